//! Distance matrices `k_ij = |ln a_ij|` of positive-real comparison matrices
//! and the sign enumeration of matrices sharing one.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::group::{GroupDescriptor, GroupElement, GroupKind};
use crate::matrix::{MatrixError, PcMatrix, is_consistent};

/// Entries at or below this magnitude count as zero when counting signs.
pub const NONZERO_THRESHOLD: f64 = 1e-12;

/// Largest number of free signs that will be enumerated (`2^20` matrices).
pub const MAX_SIGN_PAIRS: usize = 20;

/// Tolerance for comparing a reconstructed distance matrix with its source.
pub const RECONSTRUCTION_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DistanceError {
    #[error("distance matrices need positive_reals coefficients, found {0}")]
    NotPositiveReals(String),
    #[error("entry ({i},{j}) is {value}; distances must be finite and nonnegative")]
    Negative { i: usize, j: usize, value: f64 },
    #[error("entry ({i},{i}) is {value}; the diagonal must be zero")]
    Diagonal { i: usize, value: f64 },
    #[error("k[{i}][{j}] = {a} but k[{j}][{i}] = {b}; the matrix must be symmetric")]
    Asymmetric { i: usize, j: usize, a: f64, b: f64 },
    #[error("row {row} has {found} entries, expected {expected}")]
    Ragged { row: usize, expected: usize, found: usize },
    #[error("{pairs} nonzero pairs would give 2^{pairs} matrices (limit 2^{limit}); use the consistent-only chain enumeration instead")]
    TooManySigns { pairs: usize, limit: usize },
    #[error("line {line}, column {column}: {reason}")]
    Parse { line: usize, column: usize, reason: String },
    #[error(transparent)]
    Matrix(#[from] MatrixError),
}

/// Symmetric nonnegative matrix with zero diagonal.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistanceMatrix {
    size: usize,
    #[serde(rename = "k", serialize_with = "serialize_rows")]
    entries: Vec<f64>,
}

fn serialize_rows<S: serde::Serializer>(entries: &[f64], s: S) -> Result<S::Ok, S::Error> {
    let n = (entries.len() as f64).sqrt().round() as usize;
    let rows: Vec<&[f64]> = entries.chunks(n.max(1)).collect();
    rows.serialize(s)
}

impl<'de> Deserialize<'de> for DistanceMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Doc {
            k: Vec<Vec<f64>>,
        }
        let doc = Doc::deserialize(d)?;
        DistanceMatrix::from_rows(&doc.k).map_err(serde::de::Error::custom)
    }
}

impl DistanceMatrix {
    pub fn zeros(size: usize) -> Self {
        DistanceMatrix {
            size,
            entries: vec![0.0; size * size],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, DistanceError> {
        let n = rows.len();
        for (row, r) in rows.iter().enumerate() {
            if r.len() != n {
                return Err(DistanceError::Ragged {
                    row,
                    expected: n,
                    found: r.len(),
                });
            }
        }
        for (i, row) in rows.iter().enumerate() {
            if row[i] != 0.0 {
                return Err(DistanceError::Diagonal { i, value: row[i] });
            }
            for (j, &v) in row.iter().enumerate() {
                if !(v.is_finite() && v >= 0.0) {
                    return Err(DistanceError::Negative { i, j, value: v });
                }
                if j > i && v != rows[j][i] {
                    return Err(DistanceError::Asymmetric { i, j, a: v, b: rows[j][i] });
                }
            }
        }
        Ok(DistanceMatrix {
            size: n,
            entries: rows.concat(),
        })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.size + j]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.entries.chunks(self.size.max(1)).map(<[f64]>::to_vec).collect()
    }

    /// Unordered pairs `i < j` with `k_ij > 1e−12`, in lexicographic order.
    pub fn nonzero_pairs(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.size {
            for j in i + 1..self.size {
                if self.get(i, j) > NONZERO_THRESHOLD {
                    out.push((i, j));
                }
            }
        }
        out
    }

    /// `N`, the count of nonzero off-diagonal entries; always even.
    pub fn nonzero_count(&self) -> usize {
        2 * self.nonzero_pairs().len()
    }

    pub fn is_zero(&self) -> bool {
        self.nonzero_pairs().is_empty()
    }

    pub fn max_abs_diff(&self, other: &DistanceMatrix) -> f64 {
        if self.size != other.size {
            return f64::INFINITY;
        }
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Full symmetric square, shortest round-trip floats.
    pub fn to_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
        for row in self.rows() {
            w.write_record(row.iter().map(|v| format!("{v}")))
                .expect("writing to memory");
        }
        String::from_utf8(w.into_inner().expect("writing to memory")).expect("ascii output")
    }

    pub fn from_csv(text: &str) -> Result<Self, DistanceError> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(text.as_bytes());
        let mut rows = Vec::new();
        for record in rdr.records() {
            let record = record.map_err(|e| DistanceError::Parse {
                line: e.position().map_or(0, |p| p.line() as usize),
                column: 0,
                reason: e.to_string(),
            })?;
            let line = record.position().map_or(rows.len() + 1, |p| p.line() as usize);
            let row = record
                .iter()
                .enumerate()
                .map(|(c, field)| {
                    field.parse::<f64>().map_err(|e| DistanceError::Parse {
                        line,
                        column: c + 1,
                        reason: format!("{field:?}: {e}"),
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            rows.push(row);
        }
        DistanceMatrix::from_rows(&rows)
    }
}

fn require_positive_reals(m: &PcMatrix) -> Result<(), DistanceError> {
    if m.group().kind != GroupKind::PositiveReals {
        return Err(DistanceError::NotPositiveReals(m.group().to_string()));
    }
    Ok(())
}

fn entry(m: &PcMatrix, i: usize, j: usize) -> f64 {
    match m.get(i, j) {
        GroupElement::PositiveReal(x) => x,
        _ => unreachable!("positive_reals matrix"),
    }
}

pub fn distance_matrix_of(m: &PcMatrix) -> Result<DistanceMatrix, DistanceError> {
    require_positive_reals(m)?;
    let n = m.size();
    let mut k = DistanceMatrix::zeros(n);
    for i in 0..n {
        for j in i + 1..n {
            // Both halves come from the stored entry, so K is symmetric bit for bit.
            let v = entry(m, i, j).ln().abs();
            k.entries[i * n + j] = v;
            k.entries[j * n + i] = v;
        }
    }
    Ok(k)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TriangleReport {
    pub holds: bool,
    /// Triples `(i, j, l)` with `k_il > k_ij + k_jl`.
    pub violations: Vec<[usize; 3]>,
}

/// `k_il ≤ k_ij + k_jl` for all distinct triples, with slack of 1e−12
/// relative to `k_il` so that exact equalities survive rounding.
pub fn triangle_check(k: &DistanceMatrix) -> TriangleReport {
    let n = k.size();
    let mut violations = Vec::new();
    for i in 0..n {
        for l in i + 1..n {
            for j in 0..n {
                if j == i || j == l {
                    continue;
                }
                let lhs = k.get(i, l);
                if lhs > k.get(i, j) + k.get(j, l) + NONZERO_THRESHOLD * lhs.max(1.0) {
                    violations.push([i, j, l]);
                }
            }
        }
    }
    TriangleReport {
        holds: violations.is_empty(),
        violations,
    }
}

/// Signs `σ_ij ∈ {+1, −1}` on the nonzero pairs of a distance matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignAssignment {
    signs: BTreeMap<(usize, usize), i8>,
}

/// Serialized as `[{"pair": [i, j], "sign": ±1}, ...]`.
impl Serialize for SignAssignment {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Entry {
            pair: [usize; 2],
            sign: i8,
        }
        let entries: Vec<Entry> = self
            .signs
            .iter()
            .map(|(&(i, j), &sign)| Entry { pair: [i, j], sign })
            .collect();
        entries.serialize(s)
    }
}

impl SignAssignment {
    /// Bit `b` of `mask` set means the `b`-th pair takes sign −1.
    pub fn from_mask(pairs: &[(usize, usize)], mask: u64) -> Self {
        let signs = pairs
            .iter()
            .enumerate()
            .map(|(b, &p)| (p, if mask >> b & 1 == 1 { -1 } else { 1 }))
            .collect();
        SignAssignment { signs }
    }

    pub fn sign(&self, i: usize, j: usize) -> Option<i8> {
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        self.signs.get(&(a, b)).map(|s| if i < j { *s } else { -*s })
    }

    pub fn len(&self) -> usize {
        self.signs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.signs.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&(usize, usize), &i8)> {
        self.signs.iter()
    }

    /// `a_ij = e^{σ_ij·k_ij}`; pairs without a sign get `1`.
    pub fn apply(&self, k: &DistanceMatrix) -> PcMatrix {
        let n = k.size();
        let mut upper = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        for i in 0..n {
            for j in i + 1..n {
                let s = f64::from(self.sign(i, j).unwrap_or(0));
                upper.push(GroupElement::PositiveReal((s * k.get(i, j)).exp()));
            }
        }
        PcMatrix::from_upper(GroupDescriptor::positive_reals(), n, upper).expect("finite positive entries")
    }
}

/// Gray-code sequence over `bits` bits, starting from zero.
fn gray_codes(bits: usize) -> impl Iterator<Item = u64> {
    (0..1u64 << bits).map(|i| i ^ (i >> 1))
}

fn check_guard(pairs: usize) -> Result<(), DistanceError> {
    if pairs > MAX_SIGN_PAIRS {
        return Err(DistanceError::TooManySigns {
            pairs,
            limit: MAX_SIGN_PAIRS,
        });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Enumerated {
    pub signs: SignAssignment,
    pub matrix: PcMatrix,
}

/// All `2^{N/2}` matrices `a_ij = e^{σ_ij k_ij}`, in Gray-code order of the
/// sign masks.
pub fn enumerate_signed(k: &DistanceMatrix) -> Result<Vec<Enumerated>, DistanceError> {
    let pairs = k.nonzero_pairs();
    check_guard(pairs.len())?;
    Ok(gray_codes(pairs.len())
        .map(|mask| {
            let signs = SignAssignment::from_mask(&pairs, mask);
            let matrix = signs.apply(k);
            Enumerated { signs, matrix }
        })
        .collect())
}

pub fn enumerate_pc_from_distance(k: &DistanceMatrix) -> Result<Vec<PcMatrix>, DistanceError> {
    Ok(enumerate_signed(k)?.into_iter().map(|e| e.matrix).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SharingK {
    /// The `2^{N'}` consistent matrices built from signed superdiagonal entries.
    pub candidates: Vec<PcMatrix>,
    /// Candidates whose full distance matrix equals `k` within 1e−12.
    pub survivors: Vec<PcMatrix>,
}

/// Consistent matrices whose distance matrix is `k`.
///
/// Stage one signs the nonzero superdiagonal magnitudes `k_{i,i+1}` and
/// extends each chain consistently; only the superdiagonal of a candidate is
/// tied to `k`. Stage two keeps the candidates that reproduce all of `k`.
pub fn consistent_matrices_sharing_k(k: &DistanceMatrix) -> Result<SharingK, DistanceError> {
    let n = k.size();
    let chain: Vec<usize> = (0..n.saturating_sub(1))
        .filter(|&i| k.get(i, i + 1) > NONZERO_THRESHOLD)
        .collect();
    check_guard(chain.len())?;
    let mut candidates = Vec::with_capacity(1 << chain.len());
    for mask in gray_codes(chain.len()) {
        let mut mu = vec![0.0; n];
        for i in 0..n.saturating_sub(1) {
            let step = match chain.iter().position(|&c| c == i) {
                Some(b) if mask >> b & 1 == 1 => -k.get(i, i + 1),
                Some(_) => k.get(i, i + 1),
                None => 0.0,
            };
            mu[i + 1] = mu[i] + step;
        }
        let mut upper = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        for i in 0..n {
            for j in i + 1..n {
                upper.push(GroupElement::PositiveReal((mu[j] - mu[i]).exp()));
            }
        }
        candidates.push(PcMatrix::from_upper(GroupDescriptor::positive_reals(), n, upper)?);
    }
    let survivors = candidates
        .iter()
        .filter(|m| {
            distance_matrix_of(m).is_ok_and(|km| km.max_abs_diff(k) <= RECONSTRUCTION_TOLERANCE)
        })
        .cloned()
        .collect();
    Ok(SharingK { candidates, survivors })
}

/// Exhaustive check: every sign pattern, filtered by `is_consistent`.
pub fn brute_force_consistent(k: &DistanceMatrix, tol: f64) -> Result<Vec<PcMatrix>, DistanceError> {
    Ok(enumerate_pc_from_distance(k)?
        .into_iter()
        .filter(|m| is_consistent(m, tol))
        .collect())
}

/// Both procedures find the same matrices, up to entry distance `tol`.
pub fn same_matrix_sets(a: &[PcMatrix], b: &[PcMatrix], tol: f64) -> bool {
    let covered = |x: &[PcMatrix], y: &[PcMatrix]| {
        x.iter()
            .all(|m| y.iter().any(|o| m.max_entry_distance(o).is_ok_and(|d| d <= tol)))
    };
    a.len() == b.len() && covered(a, b) && covered(b, a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::{WeightVector, from_weights};
    use approx::assert_relative_eq;

    fn example_a() -> PcMatrix {
        PcMatrix::positive_reals(&[1.5, 3.0, 2.0]).unwrap()
    }

    #[test]
    fn distance_matrix_of_worked_example() {
        let k = distance_matrix_of(&example_a()).unwrap();
        let expected = [
            [0.0, 1.5f64.ln(), 3f64.ln()],
            [1.5f64.ln(), 0.0, 2f64.ln()],
            [3f64.ln(), 2f64.ln(), 0.0],
        ];
        for i in 0..3 {
            for j in 0..3 {
                assert_relative_eq!(k.get(i, j), expected[i][j], epsilon = 1e-15);
            }
        }
        // Transposition stores rounded reciprocals, so agreement is to a few ulps.
        let kt = distance_matrix_of(&example_a().transpose()).unwrap();
        assert!(kt.max_abs_diff(&k) <= 4.0 * f64::EPSILON);
        let id = PcMatrix::identity(GroupDescriptor::positive_reals(), 4);
        assert!(distance_matrix_of(&id).unwrap().is_zero());
    }

    #[test]
    fn distance_matrix_rejects_other_groups() {
        let m = PcMatrix::identity(GroupDescriptor::circle(), 3);
        assert!(matches!(distance_matrix_of(&m), Err(DistanceError::NotPositiveReals(_))));
    }

    #[test]
    fn triangle_examples() {
        let k = distance_matrix_of(&example_a()).unwrap();
        assert!(triangle_check(&k).holds);
        assert!(triangle_check(&DistanceMatrix::zeros(3)).holds);
        let bad = DistanceMatrix::from_rows(&[
            vec![0.0, 1.0, 10.0],
            vec![1.0, 0.0, 1.0],
            vec![10.0, 1.0, 0.0],
        ])
        .unwrap();
        let r = triangle_check(&bad);
        assert!(!r.holds);
        assert_eq!(r.violations, vec![[0, 1, 2]]);
    }

    #[test]
    fn enumeration_of_worked_example() {
        let k = distance_matrix_of(&example_a()).unwrap();
        assert_eq!(k.nonzero_count(), 6);
        let all = enumerate_signed(&k).unwrap();
        assert_eq!(all.len(), 8);
        // Gray order starts at all-plus, which is the matrix itself.
        assert!(all[0].matrix.max_entry_distance(&example_a()).unwrap() < 1e-15);
        for (a, b) in all.iter().zip(all.iter().skip(1)) {
            let flips = a.signs.iter().zip(b.signs.iter()).filter(|(x, y)| x.1 != y.1).count();
            assert_eq!(flips, 1);
        }
        for e in &all {
            assert!(e.matrix.validate().is_valid());
            assert!(distance_matrix_of(&e.matrix).unwrap().max_abs_diff(&k) <= 1e-12);
        }
    }

    #[test]
    fn zero_matrix_enumerates_identity() {
        let k = DistanceMatrix::zeros(4);
        let all = enumerate_pc_from_distance(&k).unwrap();
        assert_eq!(all, vec![PcMatrix::identity(GroupDescriptor::positive_reals(), 4)]);
        let shared = consistent_matrices_sharing_k(&k).unwrap();
        assert_eq!(shared.candidates.len(), 1);
        assert_eq!(shared.survivors, all);
    }

    #[test]
    fn guard_rejects_large_enumerations() {
        let n = 7;
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n).map(|j| if i == j { 0.0 } else { 1.0 }).collect())
            .collect();
        let k = DistanceMatrix::from_rows(&rows).unwrap();
        let err = enumerate_pc_from_distance(&k).unwrap_err();
        assert!(err.to_string().contains("consistent-only"));
        // The chain stage needs only 6 signs.
        assert_eq!(consistent_matrices_sharing_k(&k).unwrap().candidates.len(), 64);
    }

    #[test]
    fn only_the_matrix_and_its_transpose_share_k() {
        let k = distance_matrix_of(&example_a()).unwrap();
        let shared = consistent_matrices_sharing_k(&k).unwrap();
        assert_eq!(shared.candidates.len(), 4);
        assert_eq!(shared.survivors.len(), 2);
        assert!(same_matrix_sets(&shared.survivors, &[example_a(), example_a().transpose()], 1e-12));
        let brute = brute_force_consistent(&k, 1e-9).unwrap();
        assert!(same_matrix_sets(&brute, &shared.survivors, 1e-12));
    }

    #[test]
    fn five_by_five_chain_has_sixteen_candidates() {
        let w = WeightVector::positive_reals(&[1.0, 1.7, 0.4, 2.9, 6.5]).unwrap();
        let a = from_weights(&w);
        let k = distance_matrix_of(&a).unwrap();
        let shared = consistent_matrices_sharing_k(&k).unwrap();
        assert_eq!(shared.candidates.len(), 16);
        assert!(same_matrix_sets(&shared.survivors, &[a.clone(), a.transpose()], 1e-12));
        assert!(same_matrix_sets(&brute_force_consistent(&k, 1e-9).unwrap(), &shared.survivors, 1e-12));
    }

    #[test]
    fn csv_and_json_round_trip() {
        let k = distance_matrix_of(&example_a()).unwrap();
        let text = k.to_csv();
        assert_eq!(text.lines().count(), 3);
        assert_eq!(DistanceMatrix::from_csv(&text).unwrap(), k);
        let json = serde_json::to_string(&k).unwrap();
        assert!(json.contains("\"k\":[["));
        let back: DistanceMatrix = serde_json::from_str(&json).unwrap();
        assert_eq!(back, k);
    }

    #[test]
    fn malformed_inputs_are_located() {
        let err = DistanceMatrix::from_csv("0,1\n1,x\n").unwrap_err();
        assert!(matches!(err, DistanceError::Parse { line: 2, column: 2, .. }), "{err:?}");
        let err = DistanceMatrix::from_csv("0,1\n2,0\n").unwrap_err();
        assert!(matches!(err, DistanceError::Asymmetric { i: 0, j: 1, .. }));
        let err = DistanceMatrix::from_csv("0,-1\n-1,0\n").unwrap_err();
        assert!(matches!(err, DistanceError::Negative { .. }));
        let err = DistanceMatrix::from_csv("1,0\n0,0\n").unwrap_err();
        assert!(matches!(err, DistanceError::Diagonal { i: 0, .. }));
    }
}
