//! File formats and number formatting.
//!
//! Matrix documents are JSON objects `{"group", "n", "upper"}` with the upper
//! triangle in lexicographic `(i, j)` order, or `{"group", "rows"}` with the
//! full square. Elements may be bare payloads or tagged `{"kind", "value"}`.
//! Positive-real matrices may also be read from CSV, one row per line, with
//! entries written as decimals or `p/q` fractions.

use std::path::Path;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::{Value, json};
use thiserror::Error;

use crate::group::{DEFAULT_TOLERANCE, GroupDescriptor, GroupElement, GroupError};
use crate::matrix::{MatrixError, PcMatrix};

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}, column {column}: {reason}")]
    Syntax { line: usize, column: usize, reason: String },
    /// Well-formed input whose values break a matrix condition.
    #[error("line {line}, column {column}: {reason}")]
    Invalid { line: usize, column: usize, reason: String },
    #[error(transparent)]
    Group(#[from] GroupError),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
}

impl FormatError {
    fn at(line: usize, column: usize, reason: impl Into<String>) -> Self {
        FormatError::Syntax {
            line,
            column,
            reason: reason.into(),
        }
    }

    fn invalid(line: usize, column: usize, reason: impl Into<String>) -> Self {
        FormatError::Invalid {
            line,
            column,
            reason: reason.into(),
        }
    }

    /// Malformed input, as opposed to well-formed input that fails validation.
    pub fn is_syntax(&self) -> bool {
        matches!(self, FormatError::Io { .. } | FormatError::Syntax { .. })
    }
}

impl From<serde_json::Error> for FormatError {
    fn from(e: serde_json::Error) -> Self {
        FormatError::at(e.line(), e.column(), e.to_string())
    }
}

/// Relative tolerance for `a_ij·a_ji = 1` when importing CSV.
pub const CSV_RECIPROCAL_TOLERANCE: f64 = 1e-9;

/// Descriptor as a bare name when it carries the default tolerance.
pub fn group_to_value(g: &GroupDescriptor) -> Value {
    if g.tolerance == DEFAULT_TOLERANCE {
        Value::from(g.to_string())
    } else {
        serde_json::to_value(g).expect("descriptor serializes")
    }
}

impl Serialize for PcMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut doc = json!({
            "group": group_to_value(self.group()),
            "n": self.size(),
            "upper": self.upper().iter().map(GroupElement::to_payload).collect::<Vec<_>>(),
        });
        if self.origin() != 0 {
            doc["origin"] = Value::from(self.origin());
        }
        doc.serialize(s)
    }
}

impl<'de> Deserialize<'de> for PcMatrix {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = Value::deserialize(d)?;
        matrix_from_value(&v, None).map_err(D::Error::custom)
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MatrixDoc {
    #[serde(default)]
    group: Option<GroupDescriptor>,
    #[serde(default)]
    n: Option<usize>,
    #[serde(default)]
    upper: Option<Vec<Value>>,
    #[serde(default)]
    rows: Option<Vec<Vec<Value>>>,
    #[serde(default)]
    origin: i64,
}

/// Decodes a matrix document. `expected` overrides a missing `"group"` and
/// must agree with a present one.
pub fn matrix_from_value(v: &Value, expected: Option<GroupDescriptor>) -> Result<PcMatrix, FormatError> {
    let doc: MatrixDoc = serde_json::from_value(v.clone()).map_err(|e| FormatError::at(0, 0, e.to_string()))?;
    build_matrix(doc, expected)
}

fn build_matrix(doc: MatrixDoc, expected: Option<GroupDescriptor>) -> Result<PcMatrix, FormatError> {
    let group = match (doc.group, expected) {
        (Some(found), Some(want)) if !found.same_group(&want) => {
            return Err(GroupError::Mismatch {
                expected: want.to_string(),
                found: found.to_string(),
            }
            .into());
        }
        (Some(found), Some(want)) => found.with_tolerance(want.tolerance),
        (Some(found), None) => found,
        (None, Some(want)) => want,
        (None, None) => GroupDescriptor::positive_reals(),
    };
    let m = match (doc.upper, doc.rows) {
        (Some(upper), None) => {
            let n = match doc.n {
                Some(n) => n,
                None => size_from_upper_len(upper.len())
                    .ok_or_else(|| FormatError::at(0, 0, format!("{} upper entries is not n(n-1)/2", upper.len())))?,
            };
            let upper = upper
                .iter()
                .map(|e| group.element_from_payload(e))
                .collect::<Result<Vec<_>, _>>()?;
            PcMatrix::from_upper(group, n, upper)?
        }
        (None, Some(rows)) => {
            if let Some(n) = doc.n.filter(|&n| n != rows.len()) {
                return Err(FormatError::at(0, 0, format!("\"n\" is {n} but {} rows given", rows.len())));
            }
            let table = rows
                .iter()
                .map(|r| r.iter().map(|e| group.element_from_payload(e)).collect())
                .collect::<Result<Vec<Vec<_>>, _>>()?;
            PcMatrix::from_table(group, &table)?
        }
        _ => return Err(FormatError::at(0, 0, "expected exactly one of \"upper\" or \"rows\"")),
    };
    Ok(m.with_origin(doc.origin))
}

fn size_from_upper_len(len: usize) -> Option<usize> {
    (1..=len + 1).find(|n| n * (n - 1) / 2 == len)
}

pub fn matrix_from_json(text: &str, expected: Option<GroupDescriptor>) -> Result<PcMatrix, FormatError> {
    build_matrix(serde_json::from_str(text)?, expected)
}

pub fn matrix_to_json(m: &PcMatrix) -> String {
    serde_json::to_string_pretty(m).expect("matrix serializes")
}

/// Parses a decimal or a `p/q` fraction.
pub fn parse_number(field: &str) -> Result<f64, String> {
    let field = field.trim();
    let parse = |s: &str| s.trim().parse::<f64>().map_err(|e| format!("{s:?}: {e}"));
    match field.split_once('/') {
        Some((p, q)) => {
            let (p, q) = (parse(p)?, parse(q)?);
            if q == 0.0 {
                return Err(format!("{field:?}: zero denominator"));
            }
            Ok(p / q)
        }
        None => parse(field),
    }
}

/// Full-square CSV of a positive-real matrix. The diagonal must be 1 and
/// `a_ij·a_ji = 1` within a relative 1e−9; the upper triangle is kept.
pub fn matrix_from_csv(text: &str) -> Result<PcMatrix, FormatError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut rows: Vec<(usize, Vec<f64>)> = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| {
            FormatError::at(e.position().map_or(0, |p| p.line() as usize), 0, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let row = record
            .iter()
            .enumerate()
            .map(|(c, f)| parse_number(f).map_err(|r| FormatError::at(line, c + 1, r)))
            .collect::<Result<Vec<_>, _>>()?;
        rows.push((line, row));
    }
    let n = rows.len();
    for (line, row) in &rows {
        if row.len() != n {
            return Err(FormatError::at(*line, row.len().min(n) + 1, format!("expected {n} entries, found {}", row.len())));
        }
    }
    let mut upper = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for (i, (line, row)) in rows.iter().enumerate() {
        let d = row[i];
        if (d - 1.0).abs() > CSV_RECIPROCAL_TOLERANCE {
            return Err(FormatError::invalid(*line, i + 1, format!("diagonal entry is {d}, expected 1")));
        }
        for j in 0..n {
            let (a, b) = (row[j], rows[j].1[i]);
            if !(a.is_finite() && a > 0.0) {
                return Err(FormatError::invalid(*line, j + 1, format!("entry {a} is not a positive real")));
            }
            if j > i {
                if (a * b - 1.0).abs() > CSV_RECIPROCAL_TOLERANCE {
                    return Err(FormatError::invalid(
                        rows[j].0,
                        i + 1,
                        format!("entry {b} is not the reciprocal of a[{i}][{j}] = {a}"),
                    ));
                }
                upper.push(GroupElement::PositiveReal(a));
            }
        }
    }
    Ok(PcMatrix::from_upper(GroupDescriptor::positive_reals(), n, upper)?)
}

pub fn read_text(path: &Path) -> Result<String, FormatError> {
    std::fs::read_to_string(path).map_err(|source| FormatError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Reads a `.csv` or JSON matrix file.
pub fn read_matrix(path: &Path, expected: Option<GroupDescriptor>) -> Result<PcMatrix, FormatError> {
    let text = read_text(path)?;
    let is_csv = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    if is_csv {
        let m = matrix_from_csv(&text)?;
        if let Some(want) = expected.filter(|w| !w.same_group(m.group())) {
            return Err(GroupError::Mismatch {
                expected: want.to_string(),
                found: m.group().to_string(),
            }
            .into());
        }
        Ok(m)
    } else {
        matrix_from_json(&text, expected)
    }
}

/// Rounds to 12 significant digits and prints the shortest form of the result.
pub fn fmt12(x: f64) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    if x == 0.0 {
        return "0".into();
    }
    let rounded: f64 = format!("{x:.11e}").parse().expect("formatted float parses");
    let a = rounded.abs();
    if (1e-6..1e15).contains(&a) {
        format!("{rounded}")
    } else {
        format!("{rounded:e}")
    }
}

/// Human-readable element, 12 significant digits per component.
pub fn fmt_element(g: &GroupElement) -> String {
    fmt_value(&g.to_payload())
}

fn fmt_value(v: &Value) -> String {
    match v {
        Value::Number(n) => fmt12(n.as_f64().unwrap_or(f64::NAN)),
        Value::Array(items) => format!("[{}]", items.iter().map(fmt_value).collect::<Vec<_>>().join(", ")),
        other => other.to_string(),
    }
}

/// Row-major table with entries padded to a common width.
pub fn fmt_matrix(m: &PcMatrix) -> String {
    let cells: Vec<Vec<String>> = m
        .to_table()
        .iter()
        .map(|r| r.iter().map(fmt_element).collect())
        .collect();
    let width = cells.iter().flatten().map(String::len).max().unwrap_or(1);
    cells
        .iter()
        .map(|r| {
            r.iter()
                .map(|c| format!("{c:>width$}"))
                .collect::<Vec<_>>()
                .join("  ")
        })
        .collect::<Vec<_>>()
        .join("\n")
}
