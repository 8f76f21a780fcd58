use thiserror::Error;

use crate::entropic::EntropicSolution;

pub type Result<T, E = OtError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum OtError {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("invalid cost matrix: {0}")]
    InvalidCost(String),

    #[error("invalid transport plan: {0}")]
    InvalidPlan(String),

    #[error("cannot parse number {0:?}")]
    Parse(String),

    #[error("atom {index} is not in a support of size {len}")]
    UnknownAtom { index: usize, len: usize },

    #[error("potentials violate phi(x) + psi(y) <= c(x, y) at ({row}, {col})")]
    DualInfeasible { row: usize, col: usize },

    #[error("plan and potentials are not complementary at ({row}, {col})")]
    NotComplementary { row: usize, col: usize },

    #[error("graph is not connected: {0}")]
    Disconnected(String),

    #[error("plan is not optimal: {0}")]
    NonOptimal(String),

    #[error("offsets violate the constraint between components {n} and {m}")]
    AlphaViolation { n: usize, m: usize },

    #[error("sinkhorn stopped after {} iterations with residual {:e}", .0.iterations, .0.residual)]
    SinkhornNotConverged(Box<EntropicSolution>),

    #[error("numerical range exceeded: {0}")]
    NumericalRange(String),

    #[error("solver did not converge after {iterations} iterations (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("measure lies on the boundary of the simplex: {0}")]
    BoundaryMeasure(String),

    #[error("no admissible cost vector: {0}")]
    NoAdmissibleCost(String),

    #[error("invalid game: {0}")]
    InvalidGame(String),

    #[error("schema error: {0}")]
    Schema(String),
}

impl From<serde_json::Error> for OtError {
    fn from(err: serde_json::Error) -> Self {
        OtError::Schema(err.to_string())
    }
}
