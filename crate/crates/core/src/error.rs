use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("gap undefined for a single-level spectrum")]
    GapUndefined,

    #[error(
        "detailed balance violated upstream: max pair asymmetry {asymmetry:e} at ({row}, {col})"
    )]
    DetailedBalance {
        asymmetry: f64,
        row: usize,
        col: usize,
    },

    #[error("gap numerically closed: |alpha_2| = {0:e}")]
    GapClosed(f64),

    #[error("symmetric eigensolve did not converge (n = {n}, max |entry| = {max_abs:e})")]
    Eigensolve { n: usize, max_abs: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("degenerate fit design: {0}")]
    DegenerateFit(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
}

pub type Result<T> = std::result::Result<T, Error>;
