//! Inconsistency indicators, worst-triad localization and reduction.
//!
//! For `ℝ₊*` a triad `(x, y, z) = (a_ij, a_ik, a_jk)` has
//! `ii = 1 − min(y/xz, xz/y) = 1 − e^{−|ln(y/xz)|}`; the matrix value is the
//! worst triad. The chain variant compares every `a_ij` with the product of
//! the superdiagonal between `i` and `j`. Over a general group the defect of
//! a triad is its holonomy `a_ij·a_jk·a_ki`, scored by an [`IndicatorMap`].

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use thiserror::Error;

use crate::group::{GroupDescriptor, GroupElement, GroupKind};
use crate::matrix::{MatrixError, PcMatrix, WeightVector, from_weights, triad_holonomy};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InconsistencyError {
    #[error("triad coefficients must be positive reals, got ({0}, {1}, {2})")]
    NonPositive(f64, f64, f64),
    #[error("operation requires {expected}, matrix is over {found}")]
    UnsupportedGroup { expected: &'static str, found: String },
    #[error(transparent)]
    Matrix(#[from] MatrixError),
}

/// Smallest fraction of the smoothing correction tried before stalling.
pub const DAMPING_LIMIT: f64 = 1.0 / 1024.0;

/// Indicator values at or below this are rounding noise; reduction stops there.
pub const II_FLOOR: f64 = 1e-12;

/// Upper triangle `(a_ij, a_ik, a_jk)` of a 3×3 principal submatrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Triad {
    pub x: GroupElement,
    pub y: GroupElement,
    pub z: GroupElement,
}

impl Triad {
    pub fn of(m: &PcMatrix, i: usize, j: usize, k: usize) -> Triad {
        Triad {
            x: m.get(i, j),
            y: m.get(i, k),
            z: m.get(j, k),
        }
    }

    fn reals(&self) -> Option<(f64, f64, f64)> {
        Some((
            self.x.as_positive_real()?,
            self.y.as_positive_real()?,
            self.z.as_positive_real()?,
        ))
    }
}

fn check_triad(x: f64, y: f64, z: f64) -> Result<(), InconsistencyError> {
    if [x, y, z].iter().all(|v| v.is_finite() && *v > 0.0) {
        Ok(())
    } else {
        Err(InconsistencyError::NonPositive(x, y, z))
    }
}

/// `1 − min(y/xz, xz/y)`.
pub fn triad_ii(x: f64, y: f64, z: f64) -> Result<f64, InconsistencyError> {
    check_triad(x, y, z)?;
    let r = y / (x * z);
    Ok(1.0 - r.min(1.0 / r))
}

/// `1 − e^{−|ln(y/xz)|}`, the log-space form of [`triad_ii`].
pub fn triad_ii_log_form(x: f64, y: f64, z: f64) -> Result<f64, InconsistencyError> {
    check_triad(x, y, z)?;
    Ok(1.0 - (-(y / (x * z)).ln().abs()).exp())
}

pub fn triad_ii_of(t: &Triad) -> Result<f64, InconsistencyError> {
    let (x, y, z) = t.reals().ok_or(InconsistencyError::UnsupportedGroup {
        expected: "positive_reals",
        found: "another group".into(),
    })?;
    triad_ii(x, y, z)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TriadValue {
    pub ijk: [usize; 3],
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InconsistencyReport {
    #[serde(rename = "ii")]
    pub value: f64,
    #[serde(rename = "worst")]
    pub worst_triad: Option<[usize; 3]>,
    #[serde(rename = "triads")]
    pub per_triad: Vec<TriadValue>,
}

impl InconsistencyReport {
    fn from_triads(per_triad: Vec<TriadValue>) -> Self {
        let mut value = 0.0;
        let mut worst = None;
        // Strict comparison in lexicographic scan order keeps the smallest triple on ties.
        for t in &per_triad {
            if worst.is_none() || t.value > value {
                value = t.value;
                worst = Some(t.ijk);
            }
        }
        InconsistencyReport {
            value,
            worst_triad: worst,
            per_triad,
        }
    }
}

fn require_positive_reals(m: &PcMatrix) -> Result<(), InconsistencyError> {
    if m.group().kind == GroupKind::PositiveReals {
        Ok(())
    } else {
        Err(InconsistencyError::UnsupportedGroup {
            expected: "positive_reals",
            found: m.group().to_string(),
        })
    }
}

fn triples(n: usize) -> impl Iterator<Item = [usize; 3]> {
    (0..n).flat_map(move |i| {
        (i + 1..n).flat_map(move |j| (j + 1..n).map(move |k| [i, j, k]))
    })
}

fn real(m: &PcMatrix, i: usize, j: usize) -> f64 {
    m.get(i, j).as_positive_real().expect("positive_reals matrix")
}

/// Every triad `i < j < k`, scored with [`triad_ii`].
pub fn matrix_ii_local(m: &PcMatrix) -> Result<InconsistencyReport, InconsistencyError> {
    require_positive_reals(m)?;
    let per_triad = triples(m.size())
        .map(|[i, j, k]| {
            let value = triad_ii(real(m, i, j), real(m, i, k), real(m, j, k))?;
            Ok(TriadValue { ijk: [i, j, k], value })
        })
        .collect::<Result<Vec<_>, InconsistencyError>>()?;
    Ok(InconsistencyReport::from_triads(per_triad))
}

/// `max_{i<j} 1 − e^{−|ln(a_ij / P_ij)|}` with `P_ij = a_{i,i+1}⋯a_{j−1,j}`.
pub fn matrix_ii_chain(m: &PcMatrix) -> Result<f64, InconsistencyError> {
    require_positive_reals(m)?;
    let n = m.size();
    let mut worst = 0.0f64;
    for i in 0..n {
        let mut log_chain = 0.0;
        for j in i + 1..n {
            log_chain += real(m, j - 1, j).ln();
            let defect = (real(m, i, j).ln() - log_chain).abs();
            worst = worst.max(1.0 - (-defect).exp());
        }
    }
    Ok(worst)
}

/// A scalar score of group elements with `In(1_G) = 0`.
#[derive(Clone)]
pub struct IndicatorMap {
    pub name: String,
    evaluator: Arc<dyn Fn(&GroupElement) -> f64 + Send + Sync>,
}

impl fmt::Debug for IndicatorMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("IndicatorMap").field("name", &self.name).finish()
    }
}

impl IndicatorMap {
    pub fn new(name: impl Into<String>, f: impl Fn(&GroupElement) -> f64 + Send + Sync + 'static) -> Self {
        IndicatorMap {
            name: name.into(),
            evaluator: Arc::new(f),
        }
    }

    pub fn eval(&self, g: &GroupElement) -> f64 {
        (self.evaluator)(g)
    }

    /// `r ↦ outer(In(g))`, e.g. `1 − e^{−r}` to land in `[0, 1)`.
    pub fn then(&self, name: impl Into<String>, outer: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        let inner = self.evaluator.clone();
        IndicatorMap::new(name, move |g| outer(inner(g)))
    }
}

/// `g ↦ d(1_G, g⁻¹)`.
pub fn indicator_from_distance(group: GroupDescriptor) -> IndicatorMap {
    IndicatorMap::new(format!("distance:{group}"), move |g| {
        group.dist(&group.identity(), &group.inv(g))
    })
}

/// `sup In(Hol(γ_ijk))` over `i < j < k`, where the holonomy is `a_ij·a_jk·a_ki`.
pub fn generalized_ii(m: &PcMatrix, indicator: &IndicatorMap) -> InconsistencyReport {
    let per_triad = triples(m.size())
        .map(|[i, j, k]| {
            let hol = triad_holonomy(m, i, j, k).expect("indices in range");
            TriadValue {
                ijk: [i, j, k],
                value: indicator.eval(&hol),
            }
        })
        .collect();
    InconsistencyReport::from_triads(per_triad)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ReductionKind {
    /// Matrix was already consistent.
    Unchanged,
    /// `x·θ^{1/3}, y·θ^{−1/3}, z·θ^{1/3}` on the worst triad.
    Smoothed,
    /// Fallback: `y ← x·z` alone.
    Replaced,
    /// A fraction of the smoothing correction on the worst triad.
    Damped,
    /// No correction kept the indicator from rising.
    Stalled,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReductionStep {
    pub matrix: PcMatrix,
    pub kind: ReductionKind,
    pub triad: Option<[usize; 3]>,
    pub ii_before: f64,
    pub ii_after: f64,
}

/// Makes the worst triad exactly consistent by spreading the correction
/// `θ = y/(xz)` evenly over its three entries. Falls back to `y ← xz` if the
/// smoothing raises the matrix indicator, then to a damped fraction of the
/// smoothing, and leaves the matrix unchanged if every option raises it.
pub fn reduce_step(m: &PcMatrix) -> Result<ReductionStep, InconsistencyError> {
    let before = matrix_ii_local(m)?;
    let Some([i, j, k]) = before.worst_triad.filter(|_| before.value > II_FLOOR) else {
        return Ok(ReductionStep {
            matrix: m.clone(),
            kind: ReductionKind::Unchanged,
            triad: None,
            ii_before: before.value,
            ii_after: before.value,
        });
    };
    let (x, y, z) = (real(m, i, j), real(m, i, k), real(m, j, k));
    let cube = (y / (x * z)).cbrt();

    let mut smoothed = m.clone();
    smoothed.set(i, j, GroupElement::PositiveReal(x * cube))?;
    smoothed.set(i, k, GroupElement::PositiveReal(y / cube))?;
    smoothed.set(j, k, GroupElement::PositiveReal(z * cube))?;
    let after = matrix_ii_local(&smoothed)?.value;
    if after <= before.value {
        return Ok(ReductionStep {
            matrix: smoothed,
            kind: ReductionKind::Smoothed,
            triad: Some([i, j, k]),
            ii_before: before.value,
            ii_after: after,
        });
    }

    let mut replaced = m.clone();
    replaced.set(i, k, GroupElement::PositiveReal(x * z))?;
    let after = matrix_ii_local(&replaced)?.value;
    if after <= before.value {
        return Ok(ReductionStep {
            matrix: replaced,
            kind: ReductionKind::Replaced,
            triad: Some([i, j, k]),
            ii_before: before.value,
            ii_after: after,
        });
    }

    // Damped smoothing: a fraction of the correction, halved until the
    // indicator no longer rises.
    let mut t = 0.5;
    while t >= DAMPING_LIMIT {
        let c = cube.powf(t);
        let mut damped = m.clone();
        damped.set(i, j, GroupElement::PositiveReal(x * c))?;
        damped.set(i, k, GroupElement::PositiveReal(y / c))?;
        damped.set(j, k, GroupElement::PositiveReal(z * c))?;
        let after = matrix_ii_local(&damped)?.value;
        if after < before.value {
            return Ok(ReductionStep {
                matrix: damped,
                kind: ReductionKind::Damped,
                triad: Some([i, j, k]),
                ii_before: before.value,
                ii_after: after,
            });
        }
        t /= 2.0;
    }

    Ok(ReductionStep {
        matrix: m.clone(),
        kind: ReductionKind::Stalled,
        triad: Some([i, j, k]),
        ii_before: before.value,
        ii_after: before.value,
    })
}

/// Repeats [`reduce_step`] up to `steps` times, stopping at a fixpoint.
/// Returns the final matrix and the indicator after each step.
pub fn reduce(m: &PcMatrix, steps: usize) -> Result<(PcMatrix, Vec<ReductionStep>), InconsistencyError> {
    let mut current = m.clone();
    let mut trace = Vec::new();
    for _ in 0..steps {
        let step = reduce_step(&current)?;
        let done = matches!(step.kind, ReductionKind::Unchanged | ReductionKind::Stalled);
        current = step.matrix.clone();
        trace.push(step);
        if done {
            break;
        }
    }
    Ok((current, trace))
}

/// Log-coordinates of the upper triangle, one `n×n` antisymmetric table per component.
fn log_components(m: &PcMatrix) -> Result<Vec<DMatrix<f64>>, InconsistencyError> {
    let n = m.size();
    let dim = match m.group().kind {
        GroupKind::PositiveReals => 1,
        GroupKind::PositiveRealsPower { dim } => dim,
        _ => {
            return Err(InconsistencyError::UnsupportedGroup {
                expected: "positive_reals or positive_reals_power",
                found: m.group().to_string(),
            });
        }
    };
    let mut out = vec![DMatrix::zeros(n, n); dim];
    for i in 0..n {
        for j in i + 1..n {
            let logs: Vec<f64> = match m.get(i, j) {
                GroupElement::PositiveReal(x) => vec![x.ln()],
                GroupElement::PositiveVector(v) => v.iter().map(|x| x.ln()).collect(),
                _ => unreachable!(),
            };
            for (c, l) in logs.into_iter().enumerate() {
                out[c][(i, j)] = l;
                out[c][(j, i)] = -l;
            }
        }
    }
    Ok(out)
}

/// Least-squares log-potential: minimizes `Σ_{i<j} (ℓ_ij − (μ_j − μ_i))²`
/// with `μ_0 = 0` through the reduced normal equations `(nI − J)μ = b`.
fn least_squares_potential(logs: &DMatrix<f64>) -> Vec<f64> {
    let n = logs.nrows();
    if n <= 1 {
        return vec![0.0; n];
    }
    let reduced = n - 1;
    let mut lhs = DMatrix::from_element(reduced, reduced, -1.0);
    for d in 0..reduced {
        lhs[(d, d)] = (n - 1) as f64;
    }
    let rhs = DVector::from_fn(reduced, |r, _| {
        let m = r + 1;
        (0..n).filter(|&i| i != m).map(|i| logs[(i, m)]).sum::<f64>()
    });
    let sol = lhs
        .cholesky()
        .expect("reduced Laplacian of a complete graph is positive definite")
        .solve(&rhs);
    std::iter::once(0.0).chain(sol.iter().copied()).collect()
}

/// `Σ_{i<j} ‖ln a_ij − (ln λ_j − ln λ_i)‖²`.
pub fn log_residual(m: &PcMatrix, w: &WeightVector) -> Result<f64, InconsistencyError> {
    let logs = log_components(m)?;
    let fitted = log_components(&from_weights(w))?;
    Ok(logs
        .iter()
        .zip(&fitted)
        .map(|(a, b)| {
            let d = a - b;
            // Each unordered pair appears twice in the antisymmetric table.
            d.norm_squared() / 2.0
        })
        .sum())
}

/// Weights minimizing the log-space residual, and the consistent matrix they generate.
pub fn nearest_consistent(m: &PcMatrix) -> Result<(WeightVector, PcMatrix), InconsistencyError> {
    let logs = log_components(m)?;
    let potentials: Vec<Vec<f64>> = logs.iter().map(least_squares_potential).collect();
    let n = m.size();
    let weights = (0..n)
        .map(|i| match m.group().kind {
            GroupKind::PositiveReals => GroupElement::PositiveReal(potentials[0][i].exp()),
            _ => GroupElement::PositiveVector(potentials.iter().map(|p| p[i].exp()).collect()),
        })
        .collect();
    let mut w = WeightVector::new(*m.group(), weights)?;
    w.origin = m.origin();
    let fitted = from_weights(&w);
    Ok((w, fitted))
}
