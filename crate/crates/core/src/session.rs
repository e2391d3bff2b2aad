//! A single editing session: the working matrix, its edit history and a
//! cached inconsistency report.

use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::Value;
use thiserror::Error;

use crate::distance::{DistanceError, DistanceMatrix, distance_matrix_of};
use crate::group::{GroupDescriptor, GroupElement, GroupError, GroupKind};
use crate::inconsistency::{
    InconsistencyError, InconsistencyReport, ReductionStep, generalized_ii, indicator_from_distance,
    matrix_ii_chain, matrix_ii_local, nearest_consistent, reduce_step,
};
use crate::matrix::{MatrixError, PcMatrix};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SessionError {
    #[error("diagonal entry ({0},{0}) is fixed to the identity")]
    DiagonalEdit(usize),
    #[error("index {index} out of range for a {size}x{size} matrix")]
    OutOfRange { index: usize, size: usize },
    #[error("invalid entry: {0}")]
    InvalidEntry(String),
    #[error("group mismatch: {0}")]
    GroupMismatch(String),
    #[error("unknown mode {0:?}; expected local, chain or indicator")]
    UnknownMode(String),
}

impl SessionError {
    /// Errors caused by the group of the data rather than by a bad value.
    pub fn is_group_conflict(&self) -> bool {
        matches!(self, SessionError::GroupMismatch(_))
    }
}

impl From<GroupError> for SessionError {
    fn from(e: GroupError) -> Self {
        match e {
            GroupError::Mismatch { .. } => SessionError::GroupMismatch(e.to_string()),
            other => SessionError::InvalidEntry(other.to_string()),
        }
    }
}

impl From<MatrixError> for SessionError {
    fn from(e: MatrixError) -> Self {
        match e {
            MatrixError::DiagonalEdit(i) => SessionError::DiagonalEdit(i),
            MatrixError::IndexOutOfRange { index, size } => SessionError::OutOfRange { index, size },
            MatrixError::Group(g) => g.into(),
            other => SessionError::InvalidEntry(other.to_string()),
        }
    }
}

impl From<InconsistencyError> for SessionError {
    fn from(e: InconsistencyError) -> Self {
        match e {
            InconsistencyError::UnsupportedGroup { .. } => SessionError::GroupMismatch(e.to_string()),
            InconsistencyError::Matrix(m) => m.into(),
            other => SessionError::InvalidEntry(other.to_string()),
        }
    }
}

impl From<DistanceError> for SessionError {
    fn from(e: DistanceError) -> Self {
        match e {
            DistanceError::NotPositiveReals(_) => SessionError::GroupMismatch(e.to_string()),
            other => SessionError::InvalidEntry(other.to_string()),
        }
    }
}

/// One accepted coefficient edit; `(j, i)` follows implicitly.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Edit {
    pub i: usize,
    pub j: usize,
    pub value: GroupElement,
    /// Milliseconds since the Unix epoch.
    pub at_ms: u128,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum IiMode {
    Local,
    Chain,
    Indicator,
}

impl std::str::FromStr for IiMode {
    type Err = SessionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "local" => Ok(IiMode::Local),
            "chain" => Ok(IiMode::Chain),
            "indicator" => Ok(IiMode::Indicator),
            other => Err(SessionError::UnknownMode(other.to_string())),
        }
    }
}

/// Triad report for any group: the ratio form over `ℝ₊*`, the distance
/// indicator elsewhere.
pub fn default_report(m: &PcMatrix) -> InconsistencyReport {
    match m.group().kind {
        GroupKind::PositiveReals => matrix_ii_local(m).expect("positive_reals matrix"),
        _ => generalized_ii(m, &indicator_from_distance(*m.group())),
    }
}

/// `ii` of a matrix under the given reading, with the triad breakdown when
/// the reading has one.
pub fn report_for_mode(m: &PcMatrix, mode: IiMode) -> Result<(f64, Option<InconsistencyReport>), SessionError> {
    match mode {
        IiMode::Local => {
            let r = matrix_ii_local(m)?;
            Ok((r.value, Some(r)))
        }
        IiMode::Chain => Ok((matrix_ii_chain(m)?, None)),
        IiMode::Indicator => {
            let r = generalized_ii(m, &indicator_from_distance(*m.group()));
            Ok((r.value, Some(r)))
        }
    }
}

#[derive(Debug, Clone)]
pub struct SessionState {
    initial: PcMatrix,
    current: PcMatrix,
    history: Vec<Edit>,
    report: InconsistencyReport,
}

fn now_ms() -> u128 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis())
        .unwrap_or_default()
}

impl SessionState {
    pub fn new(initial: PcMatrix) -> Self {
        let report = default_report(&initial);
        SessionState {
            current: initial.clone(),
            initial,
            history: Vec::new(),
            report,
        }
    }

    pub fn matrix(&self) -> &PcMatrix {
        &self.current
    }

    pub fn initial(&self) -> &PcMatrix {
        &self.initial
    }

    pub fn group(&self) -> &GroupDescriptor {
        self.current.group()
    }

    pub fn history(&self) -> &[Edit] {
        &self.history
    }

    pub fn report(&self) -> &InconsistencyReport {
        &self.report
    }

    /// Replaces the session with a new starting matrix.
    pub fn load(&mut self, m: PcMatrix) {
        *self = SessionState::new(m);
    }

    /// Back to the starting matrix with an empty history.
    pub fn reset(&mut self) {
        let initial = self.initial.clone();
        self.load(initial);
    }

    /// Validated edit of `a_ij`; the reciprocal entry updates with it.
    pub fn edit(&mut self, i: usize, j: usize, value: GroupElement) -> Result<&InconsistencyReport, SessionError> {
        let n = self.current.size();
        for index in [i, j] {
            if index >= n {
                return Err(SessionError::OutOfRange { index, size: n });
            }
        }
        self.current.set(i, j, value.clone())?;
        self.history.push(Edit { i, j, value, at_ms: now_ms() });
        self.report = default_report(&self.current);
        Ok(&self.report)
    }

    /// Edit with the value given as a bare or tagged JSON payload.
    pub fn edit_payload(&mut self, i: usize, j: usize, value: &Value) -> Result<&InconsistencyReport, SessionError> {
        let g = self.group().element_from_payload(value)?;
        self.edit(i, j, g)
    }

    /// `λ_i⁻¹·λ_j` from the least-squares consistent fit.
    pub fn suggest(&self, i: usize, j: usize) -> Result<GroupElement, SessionError> {
        let n = self.current.size();
        for index in [i, j] {
            if index >= n {
                return Err(SessionError::OutOfRange { index, size: n });
            }
        }
        let (_, fitted) = nearest_consistent(&self.current)?;
        Ok(fitted.get(i, j))
    }

    /// One reduction step, recorded in the history as edits of the triad entries.
    pub fn reduce(&mut self) -> Result<ReductionStep, SessionError> {
        let step = reduce_step(&self.current)?;
        if let Some([i, j, k]) = step.triad {
            let at_ms = now_ms();
            for (a, b) in [(i, j), (i, k), (j, k)] {
                let value = step.matrix.get(a, b);
                if value != self.current.get(a, b) {
                    self.history.push(Edit { i: a, j: b, value, at_ms });
                }
            }
        }
        self.current = step.matrix.clone();
        self.report = default_report(&self.current);
        Ok(step)
    }

    pub fn distance_matrix(&self) -> Result<DistanceMatrix, SessionError> {
        Ok(distance_matrix_of(&self.current)?)
    }

    /// Applies the recorded edits to the starting matrix.
    pub fn replay(&self) -> Result<PcMatrix, SessionError> {
        let mut m = self.initial.clone();
        for e in &self.history {
            m.set(e.i, e.j, e.value.clone())?;
        }
        Ok(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn example_a() -> PcMatrix {
        PcMatrix::positive_reals(&[1.5, 3.0, 2.0]).unwrap()
    }

    #[test]
    fn edit_updates_report_and_history() {
        let mut s = SessionState::new(example_a());
        assert_eq!(s.report().value, 0.0);
        // Triad (1.5, 1/3, 2): y/xz = 1/9.
        let r = s.edit(0, 2, GroupElement::PositiveReal(1.0 / 3.0)).unwrap();
        assert_relative_eq!(r.value, 8.0 / 9.0, epsilon = 1e-15);
        assert_eq!(s.history().len(), 1);
        assert_eq!(s.matrix().get(2, 0), GroupElement::PositiveReal(3.0));
        assert_eq!(s.replay().unwrap(), *s.matrix());
    }

    #[test]
    fn edits_below_diagonal_store_reciprocal() {
        let mut s = SessionState::new(example_a());
        s.edit(2, 0, GroupElement::PositiveReal(4.0)).unwrap();
        assert_eq!(s.matrix().get(0, 2), GroupElement::PositiveReal(0.25));
        assert_eq!(s.replay().unwrap(), *s.matrix());
    }

    #[test]
    fn rejected_edits_leave_state_alone() {
        let mut s = SessionState::new(example_a());
        assert_eq!(
            s.edit(1, 1, GroupElement::PositiveReal(2.0)).unwrap_err(),
            SessionError::DiagonalEdit(1)
        );
        assert!(matches!(
            s.edit_payload(0, 1, &Value::from(-2.0)),
            Err(SessionError::InvalidEntry(_))
        ));
        assert!(matches!(
            s.edit(0, 1, GroupElement::Angle(0.5)),
            Err(SessionError::GroupMismatch(_))
        ));
        assert!(matches!(
            s.edit(0, 5, GroupElement::PositiveReal(2.0)),
            Err(SessionError::OutOfRange { index: 5, size: 3 })
        ));
        assert_eq!(*s.matrix(), example_a());
        assert!(s.history().is_empty());
    }

    #[test]
    fn suggestion_on_consistent_state_is_the_entry() {
        let s = SessionState::new(example_a());
        let g = s.suggest(0, 2).unwrap().as_positive_real().unwrap();
        assert_relative_eq!(g, 3.0, epsilon = 1e-12);
    }

    #[test]
    fn reduce_then_reset() {
        let mut s = SessionState::new(example_a());
        s.edit(0, 2, GroupElement::PositiveReal(1.0 / 3.0)).unwrap();
        s.reduce().unwrap();
        assert!(s.report().value < 1e-12);
        assert_eq!(s.replay().unwrap(), *s.matrix());
        s.reset();
        assert_eq!(*s.matrix(), example_a());
        assert!(s.history().is_empty());
    }

    #[test]
    fn modes_parse() {
        assert_eq!("chain".parse::<IiMode>().unwrap(), IiMode::Chain);
        assert!("bogus".parse::<IiMode>().is_err());
        let m = PcMatrix::positive_reals(&[2.0, 1.0 / 3.0, 2.0]).unwrap();
        let (v, r) = report_for_mode(&m, IiMode::Chain).unwrap();
        assert_relative_eq!(v, 1.0 - 1.0 / 12.0, epsilon = 1e-15);
        assert!(r.is_none());
    }
}
