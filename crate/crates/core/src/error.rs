use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("eigensolver did not converge after {sweeps} sweeps (off-diagonal norm {off_norm:.3e}, dimension {dim})")]
    NoConvergence {
        sweeps: usize,
        off_norm: f64,
        dim: usize,
    },

    #[error("codebook with 2^{bits} entries exceeds the cap of {cap} entries")]
    Capacity { bits: u32, cap: usize },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("malformed file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
