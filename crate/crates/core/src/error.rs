use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("size mismatch: expected {expected}, got {got}")]
    SizeMismatch { expected: usize, got: usize },

    #[error("CFL violation: dt = {dt:e} exceeds stable bound {bound:e}")]
    Cfl { dt: f64, bound: f64 },

    #[error("incompatible Neumann right-hand side: mean {mean:e} (max |rhs| {scale:e})")]
    Compatibility { mean: f64, scale: f64 },

    #[error("solver failed to converge: residual {residual:e} after {iterations} iterations")]
    Solver { residual: f64, iterations: usize },

    #[error("negative density {value:e} in cell {cell}")]
    Negativity { cell: usize, value: f64 },

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("test function not admissible: {0}")]
    TestSupport(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("non-uniform sampling: {0}")]
    Sampling(String),

    #[error("step {step}: {source}")]
    AtStep {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code used by the command line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::AtStep { source, .. } => source.exit_code(),
            Error::Config(_) | Error::InvalidParameter(_) => 3,
            Error::Solver { .. } | Error::Compatibility { .. } => 4,
            _ => 2,
        }
    }
}
