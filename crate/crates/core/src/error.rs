use thiserror::Error;

use crate::ground_state::GroundState;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid model parameters: {0}")]
    InvalidParams(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("field shape {found:?} does not match grid {expected:?}")]
    ShapeMismatch {
        expected: Vec<usize>,
        found: Vec<usize>,
    },

    #[error("no Nehari ray intersection: {0}")]
    NoNehariIntersection(String),

    #[error("translation offsets must act on the {transverse} transverse axes only, got {given}")]
    ConfinedAxisOffset { transverse: usize, given: usize },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error(
        "ground state did not converge in {iterations} iterations (best residual {residual:.3e})"
    )]
    NonConvergence {
        iterations: usize,
        residual: f64,
        best: Box<GroundState>,
    },

    #[error("non-finite values in field")]
    NonFinite,

    #[error("too few samples: need at least {needed}, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("malformed snapshot: {0}")]
    Snapshot(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
