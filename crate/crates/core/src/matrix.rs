//! Pairwise-comparison matrices over an arbitrary coefficient group.
//!
//! Only the strict upper triangle is stored. The diagonal is `1_G` and
//! `a_ji = a_ij⁻¹` by construction, so a [`PcMatrix`] can never violate the
//! reciprocity conditions; [`validate_table`] exists for external data that
//! arrives as a full square table.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::group::{GroupDescriptor, GroupElement, GroupError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MatrixError {
    #[error(transparent)]
    Group(#[from] GroupError),
    #[error("index {index} out of range for a matrix of size {size}")]
    IndexOutOfRange { index: usize, size: usize },
    #[error("diagonal entries are fixed to the identity (edit at ({0},{0}))")]
    DiagonalEdit(usize),
    #[error("invalid window [{lo}, {hi}]: {reason}")]
    InvalidWindow { lo: i64, hi: i64, reason: String },
    #[error("expected {expected} upper-triangle entries, found {found}")]
    WrongLength { expected: usize, found: usize },
    #[error("weights and matrix disagree: {0}")]
    Incompatible(String),
    #[error("{0}")]
    Invalid(ValidationReport),
}

/// Index family of a comparison matrix. Infinite families are only ever
/// materialized through a finite [`PcOracle::window`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum IndexSet {
    /// `size` indices `0..size`.
    Finite(usize),
    Naturals,
    Integers,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    Membership,
    Diagonal,
    Antisymmetry,
    Shape,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub i: usize,
    pub j: usize,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn first(&self) -> Option<&Violation> {
        self.violations.first()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.first() {
            None => write!(f, "valid"),
            Some(v) => write!(
                f,
                "invalid: {:?} at ({},{}): {} ({} violation(s))",
                v.kind,
                v.i,
                v.j,
                v.detail,
                self.violations.len()
            ),
        }
    }
}

/// Checks a full square table against the three defining conditions:
/// membership, identity diagonal and `a_ji = a_ij⁻¹`, scanning row-major.
pub fn validate_table(group: &GroupDescriptor, table: &[Vec<GroupElement>]) -> ValidationReport {
    let n = table.len();
    let mut report = ValidationReport::default();
    for (i, row) in table.iter().enumerate() {
        if row.len() != n {
            report.violations.push(Violation {
                kind: ViolationKind::Shape,
                i,
                j: row.len(),
                detail: format!("row {i} has {} entries, expected {n}", row.len()),
            });
        }
    }
    if !report.is_valid() {
        return report;
    }
    let identity = group.identity();
    let mut members = vec![vec![true; n]; n];
    for i in 0..n {
        for j in 0..n {
            if let Err(e) = group.check(&table[i][j]) {
                members[i][j] = false;
                report.violations.push(Violation {
                    kind: ViolationKind::Membership,
                    i,
                    j,
                    detail: e.to_string(),
                });
            }
        }
    }
    for i in 0..n {
        for j in 0..n {
            if !members[i][j] {
                continue;
            }
            if i == j {
                let d = group.dist(&table[i][i], &identity);
                if d > group.tolerance {
                    report.violations.push(Violation {
                        kind: ViolationKind::Diagonal,
                        i,
                        j,
                        detail: format!("distance {d:e} from the identity"),
                    });
                }
            } else if i > j && members[j][i] {
                let expected = group.inv(&table[j][i]);
                let d = group.dist(&table[i][j], &expected);
                if d > group.tolerance {
                    report.violations.push(Violation {
                        kind: ViolationKind::Antisymmetry,
                        i,
                        j,
                        detail: format!("a[{i}][{j}] differs from a[{j}][{i}]^-1 by {d:e}"),
                    });
                }
            }
        }
    }
    report
}

#[derive(Debug, Clone, PartialEq)]
pub struct PcMatrix {
    group: GroupDescriptor,
    size: usize,
    /// Label of local index 0; windows of `ℤ`-indexed matrices start below zero.
    origin: i64,
    upper: Vec<GroupElement>,
}

fn upper_index(size: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < size);
    i * size - i * (i + 1) / 2 + (j - i - 1)
}

impl PcMatrix {
    /// Builds a matrix from the strict upper triangle in lexicographic `(i, j)` order.
    pub fn from_upper(
        group: GroupDescriptor,
        size: usize,
        upper: Vec<GroupElement>,
    ) -> Result<Self, MatrixError> {
        let expected = size * size.saturating_sub(1) / 2;
        if upper.len() != expected {
            return Err(MatrixError::WrongLength {
                expected,
                found: upper.len(),
            });
        }
        for g in &upper {
            group.check(g)?;
        }
        Ok(PcMatrix {
            group,
            size,
            origin: 0,
            upper,
        })
    }

    pub fn from_fn(
        group: GroupDescriptor,
        size: usize,
        mut f: impl FnMut(usize, usize) -> GroupElement,
    ) -> Result<Self, MatrixError> {
        let mut upper = Vec::with_capacity(size * size.saturating_sub(1) / 2);
        for i in 0..size {
            for j in i + 1..size {
                upper.push(f(i, j));
            }
        }
        Self::from_upper(group, size, upper)
    }

    /// Convenience constructor for `ℝ₊*` matrices.
    pub fn positive_reals(upper: &[f64]) -> Result<Self, MatrixError> {
        let len = upper.len();
        let size = (1..).take_while(|s| s * (s - 1) / 2 <= len).last().unwrap_or(1);
        if size * (size - 1) / 2 != len {
            return Err(MatrixError::WrongLength {
                expected: size * (size + 1) / 2,
                found: len,
            });
        }
        Self::from_upper(
            GroupDescriptor::positive_reals(),
            size,
            upper.iter().map(|&x| GroupElement::PositiveReal(x)).collect(),
        )
    }

    /// Validates a full square table and keeps its upper triangle.
    pub fn from_table(group: GroupDescriptor, table: &[Vec<GroupElement>]) -> Result<Self, MatrixError> {
        let report = validate_table(&group, table);
        if !report.is_valid() {
            return Err(MatrixError::Invalid(report));
        }
        let size = table.len();
        Self::from_fn(group, size, |i, j| table[i][j].clone())
    }

    pub fn identity(group: GroupDescriptor, size: usize) -> Self {
        let e = group.identity();
        Self::from_fn(group, size, |_, _| e.clone()).expect("identity is a member")
    }

    pub fn group(&self) -> &GroupDescriptor {
        &self.group
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn index_set(&self) -> IndexSet {
        IndexSet::Finite(self.size)
    }

    pub fn origin(&self) -> i64 {
        self.origin
    }

    pub fn with_origin(mut self, origin: i64) -> Self {
        self.origin = origin;
        self
    }

    pub fn label(&self, i: usize) -> i64 {
        self.origin + i as i64
    }

    /// Local index holding label 0 when the window contains it, otherwise 0.
    pub fn base_index(&self) -> usize {
        if self.origin <= 0 && -self.origin < self.size as i64 {
            (-self.origin) as usize
        } else {
            0
        }
    }

    /// Stored entries `a_ij`, `i < j`, in lexicographic order.
    pub fn upper(&self) -> &[GroupElement] {
        &self.upper
    }

    fn check_index(&self, i: usize) -> Result<(), MatrixError> {
        if i < self.size {
            Ok(())
        } else {
            Err(MatrixError::IndexOutOfRange {
                index: i,
                size: self.size,
            })
        }
    }

    /// `a_ij`, derived for `i ≥ j`.
    pub fn get(&self, i: usize, j: usize) -> GroupElement {
        assert!(i < self.size && j < self.size, "index out of range");
        match i.cmp(&j) {
            std::cmp::Ordering::Less => self.upper[upper_index(self.size, i, j)].clone(),
            std::cmp::Ordering::Equal => self.group.identity(),
            std::cmp::Ordering::Greater => self.group.inv(&self.upper[upper_index(self.size, j, i)]),
        }
    }

    pub fn try_get(&self, i: usize, j: usize) -> Result<GroupElement, MatrixError> {
        self.check_index(i)?;
        self.check_index(j)?;
        Ok(self.get(i, j))
    }

    /// Sets `a_ij` and, implicitly, `a_ji = a_ij⁻¹`.
    pub fn set(&mut self, i: usize, j: usize, value: GroupElement) -> Result<(), MatrixError> {
        self.check_index(i)?;
        self.check_index(j)?;
        if i == j {
            return Err(MatrixError::DiagonalEdit(i));
        }
        self.group.check(&value)?;
        if i < j {
            self.upper[upper_index(self.size, i, j)] = value;
        } else {
            self.upper[upper_index(self.size, j, i)] = self.group.inv(&value);
        }
        Ok(())
    }

    pub fn transpose(&self) -> PcMatrix {
        let mut t = self.clone();
        for g in &mut t.upper {
            *g = self.group.inv(g);
        }
        t
    }

    pub fn to_table(&self) -> Vec<Vec<GroupElement>> {
        (0..self.size)
            .map(|i| (0..self.size).map(|j| self.get(i, j)).collect())
            .collect()
    }

    /// Full table for `ℝ₊*` matrices.
    pub fn to_f64_table(&self) -> Option<Vec<Vec<f64>>> {
        (0..self.size)
            .map(|i| (0..self.size).map(|j| self.get(i, j).as_positive_real()).collect())
            .collect()
    }

    /// Structural check of condition 1 (membership). Conditions 2 and 3 hold by construction.
    pub fn validate(&self) -> ValidationReport {
        validate_table(&self.group, &self.to_table())
    }

    /// Inclusive sub-window `[lo, hi]` of local indices, relabelled.
    pub fn window(&self, lo: usize, hi: usize) -> Result<PcMatrix, MatrixError> {
        if lo > hi || hi >= self.size {
            return Err(MatrixError::InvalidWindow {
                lo: lo as i64,
                hi: hi as i64,
                reason: format!("matrix has {} indices", self.size),
            });
        }
        let w = PcMatrix::from_fn(self.group, hi - lo + 1, |i, j| self.get(lo + i, lo + j))?;
        Ok(w.with_origin(self.label(lo)))
    }

    /// Largest invariant distance `d(a_ij·a_jk, a_ik)` over all index triples.
    pub fn consistency_residual(&self) -> f64 {
        let n = self.size;
        let table = self.to_table();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                for k in 0..n {
                    if k == i || k == j {
                        continue;
                    }
                    let chained = self.group.mul(&table[i][j], &table[j][k]);
                    worst = worst.max(self.group.dist(&chained, &table[i][k]));
                }
            }
        }
        worst
    }

    /// Largest invariant distance between corresponding entries.
    pub fn max_entry_distance(&self, other: &PcMatrix) -> Result<f64, MatrixError> {
        if !self.group.same_group(&other.group) {
            return Err(GroupError::Mismatch {
                expected: self.group.to_string(),
                found: other.group.to_string(),
            }
            .into());
        }
        if self.size != other.size {
            return Err(MatrixError::Incompatible(format!(
                "sizes {} and {}",
                self.size, other.size
            )));
        }
        Ok(self
            .upper
            .iter()
            .zip(&other.upper)
            .map(|(a, b)| self.group.dist(a, b))
            .fold(0.0, f64::max))
    }
}

/// `∀ i, j, k: d(a_ij·a_jk, a_ik) ≤ tol`.
pub fn is_consistent(m: &PcMatrix, tol: f64) -> bool {
    m.consistency_residual() <= tol
}

/// `a_ij·a_jk·a_ki`, the holonomy around the triangle `(i, j, k)`.
pub fn triad_holonomy(m: &PcMatrix, i: usize, j: usize, k: usize) -> Result<GroupElement, MatrixError> {
    let g = m.group();
    let ij = m.try_get(i, j)?;
    let jk = m.try_get(j, k)?;
    let ki = m.try_get(k, i)?;
    Ok(g.mul(&g.mul(&ij, &jk), &ki))
}

/// A family `(λ_i)` generating the consistent matrix `a_ij = λ_i⁻¹·λ_j`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightVector {
    pub group: GroupDescriptor,
    pub origin: i64,
    pub weights: Vec<GroupElement>,
}

impl WeightVector {
    pub fn new(group: GroupDescriptor, weights: Vec<GroupElement>) -> Result<Self, MatrixError> {
        for w in &weights {
            group.check(w)?;
        }
        Ok(WeightVector {
            group,
            origin: 0,
            weights,
        })
    }

    pub fn positive_reals(weights: &[f64]) -> Result<Self, MatrixError> {
        Self::new(
            GroupDescriptor::positive_reals(),
            weights.iter().map(|&w| GroupElement::PositiveReal(w)).collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn as_f64(&self) -> Option<Vec<f64>> {
        self.weights.iter().map(GroupElement::as_positive_real).collect()
    }
}

pub fn from_weights(w: &WeightVector) -> PcMatrix {
    let g = w.group;
    let inverses: Vec<GroupElement> = w.weights.iter().map(|l| g.inv(l)).collect();
    PcMatrix::from_fn(g, w.weights.len(), |i, j| g.mul(&inverses[i], &w.weights[j]))
        .expect("weights were validated")
        .with_origin(w.origin)
}

/// Inductive weights: `λ_base = 1_G`, `λ_{i+1} = λ_i·a_{i,i+1}` going up and
/// `λ_{i-1} = λ_i·a_{i-1,i}⁻¹` going down. `base` is the index labelled 0.
pub fn recover_weights(m: &PcMatrix) -> WeightVector {
    let g = m.group();
    let n = m.size();
    let mut weights = vec![g.identity(); n];
    if n > 0 {
        let base = m.base_index();
        for i in base..n.saturating_sub(1) {
            weights[i + 1] = g.mul(&weights[i], &m.get(i, i + 1));
        }
        for i in (1..=base).rev() {
            weights[i - 1] = g.mul(&weights[i], &g.inv(&m.get(i - 1, i)));
        }
    }
    WeightVector {
        group: *g,
        origin: m.origin(),
        weights,
    }
}

/// The unique consistent matrix sharing `m`'s superdiagonal.
pub fn consistent_extension_from_chain(m: &PcMatrix) -> PcMatrix {
    from_weights(&recover_weights(m))
}

type Coefficient = dyn Fn(i64, i64) -> GroupElement + Send + Sync;

/// A comparison matrix over `ℕ` or `ℤ`, given by a pure coefficient function
/// for `i < j`. Other entries follow from reciprocity.
#[derive(Clone)]
pub struct PcOracle {
    index_set: IndexSet,
    group: GroupDescriptor,
    coefficient: Arc<Coefficient>,
}

impl fmt::Debug for PcOracle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PcOracle")
            .field("index_set", &self.index_set)
            .field("group", &self.group)
            .finish_non_exhaustive()
    }
}

impl PcOracle {
    pub fn new(
        index_set: IndexSet,
        group: GroupDescriptor,
        coefficient: impl Fn(i64, i64) -> GroupElement + Send + Sync + 'static,
    ) -> Result<Self, MatrixError> {
        if let IndexSet::Finite(_) = index_set {
            return Err(MatrixError::InvalidWindow {
                lo: 0,
                hi: 0,
                reason: "oracles are reserved for infinite index sets".into(),
            });
        }
        Ok(PcOracle {
            index_set,
            group,
            coefficient: Arc::new(coefficient),
        })
    }

    pub fn index_set(&self) -> IndexSet {
        self.index_set
    }

    pub fn group(&self) -> &GroupDescriptor {
        &self.group
    }

    fn in_range(&self, i: i64) -> bool {
        match self.index_set {
            IndexSet::Naturals => i >= 0,
            _ => true,
        }
    }

    pub fn coefficient(&self, i: i64, j: i64) -> Result<GroupElement, MatrixError> {
        for idx in [i, j] {
            if !self.in_range(idx) {
                return Err(MatrixError::InvalidWindow {
                    lo: i,
                    hi: j,
                    reason: format!("index {idx} is not a natural number"),
                });
            }
        }
        Ok(match i.cmp(&j) {
            std::cmp::Ordering::Less => (self.coefficient)(i, j),
            std::cmp::Ordering::Equal => self.group.identity(),
            std::cmp::Ordering::Greater => self.group.inv(&(self.coefficient)(j, i)),
        })
    }

    /// Materializes labels `lo..=hi`; the oracle is called once per pair `i < j`.
    pub fn window(&self, lo: i64, hi: i64) -> Result<PcMatrix, MatrixError> {
        if lo > hi || !self.in_range(lo) {
            return Err(MatrixError::InvalidWindow {
                lo,
                hi,
                reason: format!("not a valid window of {:?}", self.index_set),
            });
        }
        let size = (hi - lo + 1) as usize;
        let m = PcMatrix::from_fn(self.group, size, |i, j| {
            (self.coefficient)(lo + i as i64, lo + j as i64)
        })?;
        Ok(m.with_origin(lo))
    }
}
