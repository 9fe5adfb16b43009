use thiserror::Error;

use crate::model::SubsystemId;

/// Errors raised across the crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid subsystem {id}: {reason}")]
    InvalidSubsystem { id: SubsystemId, reason: String },

    #[error("invalid transition ({from},{to}): {reason}")]
    InvalidTransition {
        from: SubsystemId,
        to: SubsystemId,
        reason: String,
    },

    #[error("unknown subsystem {0}")]
    UnknownSubsystem(SubsystemId),

    #[error("malformed switching signal: {0}")]
    MalformedSignal(String),

    #[error("interval ]{s}, {t}] is not inside [0, {horizon}] or is empty")]
    InvalidInterval { s: f64, t: f64, horizon: f64 },

    #[error("time {t} outside [0, {horizon}]")]
    TimeOutOfRange { t: f64, horizon: f64 },

    #[error("frequency budget does not fit the model: {0}")]
    BudgetMismatch(String),

    #[error("frequency budget invariant violated: {0}")]
    BudgetInvariant(String),

    #[error("contradictory floors: {0}")]
    ContradictoryFloors(String),

    #[error("hypotheses of sufficient condition {which} do not hold: {reason}")]
    ConditionHypotheses { which: &'static str, reason: String },

    #[error("certificate is not feasible (lhs = {lhs}); no decay constant exists")]
    NotFeasible { lhs: f64 },

    #[error("no comparison factor for traversed edge ({0},{1})")]
    MissingEdge(SubsystemId, SubsystemId),

    #[error("signal generation failed after {restarts} restarts (deepest prefix: {deepest} switches)")]
    GenerationFailed { restarts: usize, deepest: usize },

    #[error("enumeration exceeded the cap of {0} candidate signals")]
    EnumerationCap(usize),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("trajectory diverged at t = {t}: |x| = {norm}")]
    Diverged { t: f64, norm: f64 },

    #[error("non-finite state at t = {t}")]
    NonFinite { t: f64 },

    #[error("run {signal}/{state}: {reason}")]
    RunFailed {
        signal: usize,
        state: usize,
        reason: String,
    },

    #[error("dynamics: {0}")]
    Dynamics(String),

    #[error("csv: {0}")]
    Csv(String),

    #[error("config: {0}")]
    Config(String),

    #[error("io: {0}")]
    Io(String),
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Csv(e.to_string())
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
