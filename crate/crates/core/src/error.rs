use thiserror::Error;

use crate::series::MultiIndex;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("quintic root not bracketed for {point} at mu = {mu}")]
    RootBracket { mu: f64, point: &'static str },

    #[error("degenerate linear type: c2 = {c2} must exceed 1")]
    DegenerateLinear { c2: f64 },

    #[error("frame mismatch: expected {expected}, found {found}")]
    WrongFrame {
        expected: &'static str,
        found: &'static str,
    },

    #[error("state coincides with a primary (r1 = {r1:e}, r2 = {r2:e})")]
    Collision { r1: f64, r2: f64 },

    #[error("near-singular system at order {order}, index {index}: |det| = {det:e}")]
    Resonance {
        order: usize,
        index: MultiIndex,
        det: f64,
    },

    #[error("inconsistent {what} at order {order}, index {index}: residual {residual:e}")]
    Inconsistent {
        what: &'static str,
        order: usize,
        index: MultiIndex,
        residual: f64,
    },

    #[error("term count {count} exceeds limit {limit} at order {order}")]
    TermLimit {
        count: usize,
        limit: usize,
        order: usize,
    },

    #[error("solution is complete through order {have}, order {need} required")]
    Incomplete { have: usize, need: usize },

    #[error("missing delta entry {0}")]
    MissingDelta(&'static str),

    #[error("spec is not admissible: |delta(eta)| = {delta:e} exceeds {tol:e}")]
    Inadmissible { delta: f64, tol: f64 },

    #[error("no admissible eta root: {0}")]
    NoEtaRoot(String),

    #[error("exponential overflow: |(k-m) lambda t| = {0} > 700")]
    ExpOverflow(f64),

    #[error("step size underflow at t = {t} (h = {h:e})")]
    StepUnderflow { t: f64, h: f64 },

    #[error("step limit {steps} reached at t = {t}")]
    StepLimit { t: f64, steps: usize },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidParameter(_) => 2,
            Error::Io(_) | Error::Parse { .. } => 4,
            _ => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
