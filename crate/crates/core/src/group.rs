//! Concrete coefficient groups.
//!
//! Every pairwise-comparison coefficient lives in one of five groups:
//!
//! | kind                        | element                          | algebra                   |
//! |-----------------------------|----------------------------------|---------------------------|
//! | `PositiveReals`             | `x > 0`                          | `ln x`                    |
//! | `Circle`                    | angle in `(-π, π]`               | angle                     |
//! | `PositiveRealsPower { dim }`| vector of `dim` positive reals   | componentwise logs        |
//! | `Heisenberg3`               | `(a, b, c)`, unipotent 3×3       | `(a, b, c - ab/2)`        |
//! | `UpperTriangularPositive`   | upper triangular, diag > 0       | upper triangular          |
//!
//! Composition is always read left to right: `compose(g, h)` is `g·h` and a
//! consistent matrix satisfies `a_ij·a_jk = a_ik` in that order.
//!
//! The invariant distance is left-invariant, `d(g, h) = d(1, g⁻¹h)`. For the
//! abelian kinds it is the Euclidean distance of logarithms. For the matrix
//! kinds it is `‖ln σ(g⁻¹h)‖₂`, where `σ` are singular values: this is the
//! affine-invariant distance between the SPD matrices `ggᵀ` and `hhᵀ`
//! (up to a factor 2), which is a true metric on both matrix groups.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::Rng;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::Value;
use thiserror::Error;

/// Default equality tolerance, in invariant-distance units.
pub const DEFAULT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GroupError {
    #[error("group mismatch: expected {expected}, found {found}")]
    Mismatch { expected: String, found: String },
    #[error("invalid element for {group}: {reason}")]
    InvalidElement { group: String, reason: String },
    #[error("unknown group kind `{0}`")]
    UnknownKind(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GroupKind {
    PositiveReals,
    Circle,
    PositiveRealsPower { dim: usize },
    Heisenberg3,
    UpperTriangularPositive { size: usize },
}

impl GroupKind {
    pub fn is_abelian(&self) -> bool {
        match self {
            GroupKind::PositiveReals | GroupKind::Circle | GroupKind::PositiveRealsPower { .. } => {
                true
            }
            GroupKind::Heisenberg3 => false,
            GroupKind::UpperTriangularPositive { size } => *size <= 1,
        }
    }

    /// Every kind has a computable logarithm on all of its elements except the
    /// circle, whose exponential is onto but not injective.
    pub fn has_global_log(&self) -> bool {
        !matches!(self, GroupKind::Circle)
    }
}

impl fmt::Display for GroupKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GroupKind::PositiveReals => write!(f, "positive_reals"),
            GroupKind::Circle => write!(f, "circle"),
            GroupKind::PositiveRealsPower { dim } => write!(f, "positive_reals_power:{dim}"),
            GroupKind::Heisenberg3 => write!(f, "heisenberg3"),
            GroupKind::UpperTriangularPositive { size } => {
                write!(f, "upper_triangular_positive:{size}")
            }
        }
    }
}

impl FromStr for GroupKind {
    type Err = GroupError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (name, arg) = match s.split_once(':') {
            Some((name, arg)) => (name.trim(), Some(arg.trim())),
            None => (s.trim(), None),
        };
        let parse_arg = || -> Result<usize, GroupError> {
            arg.and_then(|a| a.parse::<usize>().ok())
                .filter(|&v| v > 0)
                .ok_or_else(|| GroupError::UnknownKind(s.to_string()))
        };
        match name {
            "positive_reals" | "R+" => Ok(GroupKind::PositiveReals),
            "circle" | "S1" => Ok(GroupKind::Circle),
            "positive_reals_power" => Ok(GroupKind::PositiveRealsPower { dim: parse_arg()? }),
            "heisenberg3" => Ok(GroupKind::Heisenberg3),
            "upper_triangular_positive" => {
                Ok(GroupKind::UpperTriangularPositive { size: parse_arg()? })
            }
            _ => Err(GroupError::UnknownKind(s.to_string())),
        }
    }
}

/// A concrete group together with the tolerance used for approximate equality.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GroupDescriptor {
    #[serde(flatten)]
    pub kind: GroupKind,
    pub tolerance: f64,
}

impl<'de> Deserialize<'de> for GroupDescriptor {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Name(String),
            Full {
                #[serde(flatten)]
                kind: GroupKind,
                #[serde(default)]
                tolerance: Option<f64>,
            },
        }
        match Repr::deserialize(deserializer)? {
            Repr::Name(name) => {
                let kind = name.parse::<GroupKind>().map_err(D::Error::custom)?;
                Ok(GroupDescriptor::new(kind))
            }
            Repr::Full { kind, tolerance } => Ok(GroupDescriptor {
                kind,
                tolerance: tolerance.unwrap_or(DEFAULT_TOLERANCE),
            }),
        }
    }
}

impl fmt::Display for GroupDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.kind.fmt(f)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum GroupElement {
    PositiveReal(f64),
    /// Radians, normalized to `(-π, π]`.
    Angle(f64),
    PositiveVector(Vec<f64>),
    /// `(a, b, c)` stands for `[[1, a, c], [0, 1, b], [0, 0, 1]]`.
    Heisenberg([f64; 3]),
    UpperTriangular(DMatrix<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum AlgebraElement {
    /// Log-coordinate of a positive real, or an angle.
    Real(f64),
    Vector(Vec<f64>),
    /// Coordinates of the strictly upper triangular 3×3 matrix `[[0, a, c], [0, 0, b], [0, 0, 0]]`.
    Heisenberg([f64; 3]),
    Matrix(DMatrix<f64>),
}

impl GroupElement {
    fn tag(&self) -> &'static str {
        match self {
            GroupElement::PositiveReal(_) => "positive_reals",
            GroupElement::Angle(_) => "circle",
            GroupElement::PositiveVector(_) => "positive_reals_power",
            GroupElement::Heisenberg(_) => "heisenberg3",
            GroupElement::UpperTriangular(_) => "upper_triangular_positive",
        }
    }

    /// Bare JSON payload without the kind tag.
    pub fn to_payload(&self) -> Value {
        match self {
            GroupElement::PositiveReal(x) | GroupElement::Angle(x) => Value::from(*x),
            GroupElement::PositiveVector(v) => Value::from(v.clone()),
            GroupElement::Heisenberg(t) => Value::from(t.to_vec()),
            GroupElement::UpperTriangular(m) => matrix_to_value(m),
        }
    }

    pub fn as_positive_real(&self) -> Option<f64> {
        match self {
            GroupElement::PositiveReal(x) => Some(*x),
            _ => None,
        }
    }
}

impl AlgebraElement {
    pub fn scale(&self, t: f64) -> AlgebraElement {
        match self {
            AlgebraElement::Real(x) => AlgebraElement::Real(t * x),
            AlgebraElement::Vector(v) => AlgebraElement::Vector(v.iter().map(|x| t * x).collect()),
            AlgebraElement::Heisenberg(h) => AlgebraElement::Heisenberg(h.map(|x| t * x)),
            AlgebraElement::Matrix(m) => AlgebraElement::Matrix(m * t),
        }
    }

    pub fn neg(&self) -> AlgebraElement {
        self.scale(-1.0)
    }

    /// Euclidean (Frobenius) norm of the coordinates.
    pub fn norm(&self) -> f64 {
        match self {
            AlgebraElement::Real(x) => x.abs(),
            AlgebraElement::Vector(v) => v.iter().map(|x| x * x).sum::<f64>().sqrt(),
            AlgebraElement::Heisenberg(h) => h.iter().map(|x| x * x).sum::<f64>().sqrt(),
            AlgebraElement::Matrix(m) => m.norm(),
        }
    }

    /// Componentwise sum; `None` when the shapes differ.
    pub fn add(&self, other: &AlgebraElement) -> Option<AlgebraElement> {
        match (self, other) {
            (AlgebraElement::Real(a), AlgebraElement::Real(b)) => Some(AlgebraElement::Real(a + b)),
            (AlgebraElement::Vector(a), AlgebraElement::Vector(b)) if a.len() == b.len() => Some(
                AlgebraElement::Vector(a.iter().zip(b).map(|(x, y)| x + y).collect()),
            ),
            (AlgebraElement::Heisenberg(a), AlgebraElement::Heisenberg(b)) => Some(
                AlgebraElement::Heisenberg([a[0] + b[0], a[1] + b[1], a[2] + b[2]]),
            ),
            (AlgebraElement::Matrix(a), AlgebraElement::Matrix(b)) if a.shape() == b.shape() => {
                Some(AlgebraElement::Matrix(a + b))
            }
            _ => None,
        }
    }

    pub fn to_payload(&self) -> Value {
        match self {
            AlgebraElement::Real(x) => Value::from(*x),
            AlgebraElement::Vector(v) => Value::from(v.clone()),
            AlgebraElement::Heisenberg(h) => Value::from(h.to_vec()),
            AlgebraElement::Matrix(m) => matrix_to_value(m),
        }
    }
}

impl Serialize for GroupElement {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serde_json::json!({ "kind": self.tag(), "value": self.to_payload() }).serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for GroupElement {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Tagged {
            kind: String,
            value: Value,
        }
        let tagged = Tagged::deserialize(deserializer)?;
        let kind = match tagged.kind.as_str() {
            "positive_reals_power" => {
                let dim = tagged.value.as_array().map(|a| a.len()).unwrap_or(0);
                GroupKind::PositiveRealsPower { dim }
            }
            "upper_triangular_positive" => {
                let size = tagged.value.as_array().map(|a| a.len()).unwrap_or(0);
                GroupKind::UpperTriangularPositive { size }
            }
            other => other.parse().map_err(D::Error::custom)?,
        };
        GroupDescriptor::new(kind)
            .element_from_payload(&tagged.value)
            .map_err(D::Error::custom)
    }
}

fn matrix_to_value(m: &DMatrix<f64>) -> Value {
    Value::from(
        (0..m.nrows())
            .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect::<Vec<_>>())
            .collect::<Vec<_>>(),
    )
}

fn value_to_matrix(v: &Value, size: usize) -> Option<DMatrix<f64>> {
    let rows = v.as_array()?;
    if rows.len() != size {
        return None;
    }
    let mut m = DMatrix::zeros(size, size);
    for (i, row) in rows.iter().enumerate() {
        let row = row.as_array()?;
        if row.len() != size {
            return None;
        }
        for (j, x) in row.iter().enumerate() {
            m[(i, j)] = x.as_f64()?;
        }
    }
    Some(m)
}

fn value_to_vec(v: &Value, len: usize) -> Option<Vec<f64>> {
    let arr = v.as_array()?;
    if arr.len() != len {
        return None;
    }
    arr.iter().map(Value::as_f64).collect()
}

/// Wraps an angle into `(-π, π]`.
pub fn wrap_angle(x: f64) -> f64 {
    let mut r = x.rem_euclid(2.0 * PI);
    if r > PI {
        r -= 2.0 * PI;
    }
    r
}

impl GroupDescriptor {
    pub fn new(kind: GroupKind) -> Self {
        GroupDescriptor {
            kind,
            tolerance: DEFAULT_TOLERANCE,
        }
    }

    pub fn positive_reals() -> Self {
        Self::new(GroupKind::PositiveReals)
    }

    pub fn circle() -> Self {
        Self::new(GroupKind::Circle)
    }

    pub fn positive_reals_power(dim: usize) -> Self {
        Self::new(GroupKind::PositiveRealsPower { dim })
    }

    pub fn heisenberg3() -> Self {
        Self::new(GroupKind::Heisenberg3)
    }

    pub fn upper_triangular_positive(size: usize) -> Self {
        Self::new(GroupKind::UpperTriangularPositive { size })
    }

    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self
    }

    /// Two descriptors are compatible when their kinds agree; tolerances may differ.
    pub fn same_group(&self, other: &GroupDescriptor) -> bool {
        self.kind == other.kind
    }

    fn invalid(&self, reason: impl Into<String>) -> GroupError {
        GroupError::InvalidElement {
            group: self.kind.to_string(),
            reason: reason.into(),
        }
    }

    fn mismatch(&self, found: &GroupElement) -> GroupError {
        GroupError::Mismatch {
            expected: self.kind.to_string(),
            found: found.tag().to_string(),
        }
    }

    /// Checks that `g` is a valid element of this group.
    pub fn check(&self, g: &GroupElement) -> Result<(), GroupError> {
        match (self.kind, g) {
            (GroupKind::PositiveReals, GroupElement::PositiveReal(x)) => {
                if x.is_finite() && *x > 0.0 {
                    Ok(())
                } else {
                    Err(self.invalid(format!("{x} is not a finite positive real")))
                }
            }
            (GroupKind::Circle, GroupElement::Angle(x)) => {
                if x.is_finite() {
                    Ok(())
                } else {
                    Err(self.invalid("angle is not finite"))
                }
            }
            (GroupKind::PositiveRealsPower { dim }, GroupElement::PositiveVector(v)) => {
                if v.len() != dim {
                    Err(self.invalid(format!("expected {dim} components, found {}", v.len())))
                } else if v.iter().all(|x| x.is_finite() && *x > 0.0) {
                    Ok(())
                } else {
                    Err(self.invalid("components must be finite positive reals"))
                }
            }
            (GroupKind::Heisenberg3, GroupElement::Heisenberg(h)) => {
                if h.iter().all(|x| x.is_finite()) {
                    Ok(())
                } else {
                    Err(self.invalid("coordinates must be finite"))
                }
            }
            (GroupKind::UpperTriangularPositive { size }, GroupElement::UpperTriangular(m)) => {
                if m.nrows() != size || m.ncols() != size {
                    return Err(self.invalid(format!(
                        "expected {size}x{size} matrix, found {}x{}",
                        m.nrows(),
                        m.ncols()
                    )));
                }
                for i in 0..size {
                    if !(m[(i, i)].is_finite() && m[(i, i)] > 0.0) {
                        return Err(self.invalid(format!("diagonal entry ({i},{i}) not positive")));
                    }
                    for j in 0..size {
                        if !m[(i, j)].is_finite() {
                            return Err(self.invalid("entries must be finite"));
                        }
                        if j < i && m[(i, j)] != 0.0 {
                            return Err(self.invalid(format!("entry ({i},{j}) below diagonal")));
                        }
                    }
                }
                Ok(())
            }
            _ => Err(self.mismatch(g)),
        }
    }

    /// Parses a bare JSON payload (no kind tag) as an element of this group.
    /// A tagged `{"kind", "value"}` object is accepted too, and must match.
    pub fn element_from_payload(&self, v: &Value) -> Result<GroupElement, GroupError> {
        if let Some(obj) = v.as_object() {
            if let (Some(kind), Some(value)) = (obj.get("kind"), obj.get("value")) {
                let kind = kind.as_str().unwrap_or_default();
                let name = self.kind.to_string();
                let base = name.split(':').next().unwrap_or_default();
                if kind != base {
                    return Err(GroupError::Mismatch {
                        expected: name,
                        found: kind.to_string(),
                    });
                }
                return self.element_from_payload(value);
            }
        }
        let bad = || self.invalid(format!("cannot read payload {v}"));
        let g = match self.kind {
            GroupKind::PositiveReals => GroupElement::PositiveReal(v.as_f64().ok_or_else(bad)?),
            GroupKind::Circle => GroupElement::Angle(wrap_angle(v.as_f64().ok_or_else(bad)?)),
            GroupKind::PositiveRealsPower { dim } => {
                GroupElement::PositiveVector(value_to_vec(v, dim).ok_or_else(bad)?)
            }
            GroupKind::Heisenberg3 => {
                let h = value_to_vec(v, 3).ok_or_else(bad)?;
                GroupElement::Heisenberg([h[0], h[1], h[2]])
            }
            GroupKind::UpperTriangularPositive { size } => {
                GroupElement::UpperTriangular(value_to_matrix(v, size).ok_or_else(bad)?)
            }
        };
        self.check(&g)?;
        Ok(g)
    }

    pub fn algebra_from_payload(&self, v: &Value) -> Result<AlgebraElement, GroupError> {
        let bad = || self.invalid(format!("cannot read algebra payload {v}"));
        let x = match self.kind {
            GroupKind::PositiveReals | GroupKind::Circle => {
                AlgebraElement::Real(v.as_f64().ok_or_else(bad)?)
            }
            GroupKind::PositiveRealsPower { dim } => {
                AlgebraElement::Vector(value_to_vec(v, dim).ok_or_else(bad)?)
            }
            GroupKind::Heisenberg3 => {
                let h = value_to_vec(v, 3).ok_or_else(bad)?;
                AlgebraElement::Heisenberg([h[0], h[1], h[2]])
            }
            GroupKind::UpperTriangularPositive { size } => {
                let m = value_to_matrix(v, size).ok_or_else(bad)?;
                for i in 0..size {
                    for j in 0..i {
                        if m[(i, j)] != 0.0 {
                            return Err(self.invalid("algebra element must be upper triangular"));
                        }
                    }
                }
                AlgebraElement::Matrix(m)
            }
        };
        Ok(x)
    }

    pub fn identity(&self) -> GroupElement {
        match self.kind {
            GroupKind::PositiveReals => GroupElement::PositiveReal(1.0),
            GroupKind::Circle => GroupElement::Angle(0.0),
            GroupKind::PositiveRealsPower { dim } => GroupElement::PositiveVector(vec![1.0; dim]),
            GroupKind::Heisenberg3 => GroupElement::Heisenberg([0.0; 3]),
            GroupKind::UpperTriangularPositive { size } => {
                GroupElement::UpperTriangular(DMatrix::identity(size, size))
            }
        }
    }

    pub fn zero_algebra(&self) -> AlgebraElement {
        match self.kind {
            GroupKind::PositiveReals | GroupKind::Circle => AlgebraElement::Real(0.0),
            GroupKind::PositiveRealsPower { dim } => AlgebraElement::Vector(vec![0.0; dim]),
            GroupKind::Heisenberg3 => AlgebraElement::Heisenberg([0.0; 3]),
            GroupKind::UpperTriangularPositive { size } => {
                AlgebraElement::Matrix(DMatrix::zeros(size, size))
            }
        }
    }

    /// `g·h`.
    pub fn compose(&self, g: &GroupElement, h: &GroupElement) -> Result<GroupElement, GroupError> {
        self.check(g)?;
        self.check(h)?;
        Ok(self.mul(g, h))
    }

    pub fn inverse(&self, g: &GroupElement) -> Result<GroupElement, GroupError> {
        self.check(g)?;
        Ok(self.inv(g))
    }

    pub fn exp(&self, v: &AlgebraElement) -> Result<GroupElement, GroupError> {
        let g = match (self.kind, v) {
            (GroupKind::PositiveReals, AlgebraElement::Real(x)) => GroupElement::PositiveReal(x.exp()),
            (GroupKind::Circle, AlgebraElement::Real(x)) => GroupElement::Angle(wrap_angle(*x)),
            (GroupKind::PositiveRealsPower { dim }, AlgebraElement::Vector(x)) if x.len() == dim => {
                GroupElement::PositiveVector(x.iter().map(|c| c.exp()).collect())
            }
            (GroupKind::Heisenberg3, AlgebraElement::Heisenberg([a, b, c])) => {
                GroupElement::Heisenberg([*a, *b, c + a * b / 2.0])
            }
            (GroupKind::UpperTriangularPositive { size }, AlgebraElement::Matrix(m))
                if m.nrows() == size && m.ncols() == size =>
            {
                let mut e = m.clone().exp();
                // exp of an upper triangular matrix is upper triangular; drop round-off below.
                for i in 0..size {
                    for j in 0..i {
                        e[(i, j)] = 0.0;
                    }
                }
                GroupElement::UpperTriangular(e)
            }
            _ => return Err(self.invalid("algebra element does not match group")),
        };
        self.check(&g)?;
        Ok(g)
    }

    /// Principal logarithm. A right inverse of [`GroupDescriptor::exp`].
    pub fn log(&self, g: &GroupElement) -> Result<AlgebraElement, GroupError> {
        self.check(g)?;
        Ok(match g {
            GroupElement::PositiveReal(x) => AlgebraElement::Real(x.ln()),
            GroupElement::Angle(x) => AlgebraElement::Real(wrap_angle(*x)),
            GroupElement::PositiveVector(v) => AlgebraElement::Vector(v.iter().map(|x| x.ln()).collect()),
            GroupElement::Heisenberg([a, b, c]) => AlgebraElement::Heisenberg([*a, *b, c - a * b / 2.0]),
            GroupElement::UpperTriangular(m) => AlgebraElement::Matrix(upper_triangular_log(m)),
        })
    }

    /// Left-invariant distance, `d(g, h) = d(1, g⁻¹h)`.
    pub fn distance(&self, g: &GroupElement, h: &GroupElement) -> Result<f64, GroupError> {
        self.check(g)?;
        self.check(h)?;
        Ok(self.dist(g, h))
    }

    pub fn approx_eq(&self, g: &GroupElement, h: &GroupElement) -> bool {
        self.distance(g, h).map(|d| d <= self.tolerance).unwrap_or(false)
    }

    // Unchecked operations for elements already validated against `self`.

    pub(crate) fn mul(&self, g: &GroupElement, h: &GroupElement) -> GroupElement {
        match (g, h) {
            (GroupElement::PositiveReal(a), GroupElement::PositiveReal(b)) => {
                GroupElement::PositiveReal(a * b)
            }
            (GroupElement::Angle(a), GroupElement::Angle(b)) => GroupElement::Angle(wrap_angle(a + b)),
            (GroupElement::PositiveVector(a), GroupElement::PositiveVector(b)) => {
                GroupElement::PositiveVector(a.iter().zip(b).map(|(x, y)| x * y).collect())
            }
            (GroupElement::Heisenberg([a, b, c]), GroupElement::Heisenberg([a2, b2, c2])) => {
                GroupElement::Heisenberg([a + a2, b + b2, c + c2 + a * b2])
            }
            (GroupElement::UpperTriangular(a), GroupElement::UpperTriangular(b)) => {
                GroupElement::UpperTriangular(a * b)
            }
            _ => panic!("group mismatch: {} vs {}", g.tag(), h.tag()),
        }
    }

    pub(crate) fn inv(&self, g: &GroupElement) -> GroupElement {
        match g {
            GroupElement::PositiveReal(a) => GroupElement::PositiveReal(1.0 / a),
            GroupElement::Angle(a) => GroupElement::Angle(wrap_angle(-a)),
            GroupElement::PositiveVector(a) => {
                GroupElement::PositiveVector(a.iter().map(|x| 1.0 / x).collect())
            }
            GroupElement::Heisenberg([a, b, c]) => GroupElement::Heisenberg([-a, -b, a * b - c]),
            GroupElement::UpperTriangular(m) => GroupElement::UpperTriangular(upper_triangular_inverse(m)),
        }
    }

    pub(crate) fn dist(&self, g: &GroupElement, h: &GroupElement) -> f64 {
        match (g, h) {
            (GroupElement::PositiveReal(a), GroupElement::PositiveReal(b)) => (b.ln() - a.ln()).abs(),
            (GroupElement::Angle(a), GroupElement::Angle(b)) => wrap_angle(b - a).abs(),
            (GroupElement::PositiveVector(a), GroupElement::PositiveVector(b)) => a
                .iter()
                .zip(b)
                .map(|(x, y)| (y.ln() - x.ln()).powi(2))
                .sum::<f64>()
                .sqrt(),
            (GroupElement::Heisenberg(_), GroupElement::Heisenberg(_)) => {
                match self.mul(&self.inv(g), h) {
                    GroupElement::Heisenberg([a, b, c]) => {
                        polar_log_norm(&DMatrix::from_row_slice(3, 3, &[1.0, a, c, 0.0, 1.0, b, 0.0, 0.0, 1.0]))
                    }
                    _ => unreachable!(),
                }
            }
            (GroupElement::UpperTriangular(a), GroupElement::UpperTriangular(b)) => {
                let rel = a
                    .solve_upper_triangular(b)
                    .unwrap_or_else(|| upper_triangular_inverse(a) * b);
                polar_log_norm(&rel)
            }
            _ => panic!("group mismatch: {} vs {}", g.tag(), h.tag()),
        }
    }

    /// Random element; `spread` bounds the log-coordinates.
    pub fn random_element<R: Rng + ?Sized>(&self, rng: &mut R, spread: f64) -> GroupElement {
        match self.kind {
            GroupKind::Circle => GroupElement::Angle(wrap_angle(rng.random_range(-PI..PI))),
            _ => self
                .exp(&self.random_algebra(rng, spread))
                .expect("random algebra element matches its group"),
        }
    }

    pub fn random_algebra<R: Rng + ?Sized>(&self, rng: &mut R, spread: f64) -> AlgebraElement {
        let mut u = || rng.random_range(-spread..=spread);
        match self.kind {
            GroupKind::PositiveReals | GroupKind::Circle => AlgebraElement::Real(u()),
            GroupKind::PositiveRealsPower { dim } => AlgebraElement::Vector((0..dim).map(|_| u()).collect()),
            GroupKind::Heisenberg3 => AlgebraElement::Heisenberg([u(), u(), u()]),
            GroupKind::UpperTriangularPositive { size } => {
                let mut m = DMatrix::zeros(size, size);
                for i in 0..size {
                    for j in i..size {
                        m[(i, j)] = u();
                    }
                }
                AlgebraElement::Matrix(m)
            }
        }
    }
}

/// `‖ln σ(x)‖₂` over the singular values of `x`.
fn polar_log_norm(x: &DMatrix<f64>) -> f64 {
    x.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .map(|s| s.ln().powi(2))
        .sum::<f64>()
        .sqrt()
}

pub(crate) fn upper_triangular_inverse(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    let mut inv = m
        .solve_upper_triangular(&DMatrix::identity(n, n))
        .expect("positive diagonal is invertible");
    for i in 0..n {
        for j in 0..i {
            inv[(i, j)] = 0.0;
        }
    }
    inv
}

/// Principal square root of an upper triangular matrix with positive diagonal.
fn upper_triangular_sqrt(t: &DMatrix<f64>) -> DMatrix<f64> {
    let n = t.nrows();
    let mut r = DMatrix::zeros(n, n);
    for i in 0..n {
        r[(i, i)] = t[(i, i)].sqrt();
    }
    for d in 1..n {
        for i in 0..n - d {
            let j = i + d;
            let s: f64 = (i + 1..j).map(|k| r[(i, k)] * r[(k, j)]).sum();
            r[(i, j)] = (t[(i, j)] - s) / (r[(i, i)] + r[(j, j)]);
        }
    }
    r
}

/// Inverse scaling and squaring: take square roots until close to the
/// identity, then sum `log(I + X) = 2·atanh(X (2I + X)⁻¹)`.
fn upper_triangular_log(t: &DMatrix<f64>) -> DMatrix<f64> {
    let n = t.nrows();
    let id = DMatrix::<f64>::identity(n, n);
    let mut r = t.clone();
    let mut halvings = 0;
    while (&r - &id).norm() > 0.25 && halvings < 64 {
        r = upper_triangular_sqrt(&r);
        halvings += 1;
    }
    let x = &r - &id;
    let denom = upper_triangular_inverse(&(&id * 2.0 + &x));
    let z = &x * denom;
    let z2 = &z * &z;
    let mut power = z.clone();
    let mut sum = z.clone();
    let mut k = 1;
    loop {
        power = &power * &z2;
        k += 2;
        let term = &power / k as f64;
        sum += &term;
        if term.norm() < 1e-18 * sum.norm().max(1e-300) || k > 200 {
            break;
        }
    }
    let mut log = sum * (2.0 * 2f64.powi(halvings));
    for i in 0..n {
        for j in 0..i {
            log[(i, j)] = 0.0;
        }
    }
    log
}
