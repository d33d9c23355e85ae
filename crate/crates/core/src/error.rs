use thiserror::Error;

/// Errors produced by the numerical library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("degenerate box on axis {axis}: lower {lower} must be < upper {upper}")]
    DegenerateBox { axis: usize, lower: f64, upper: f64 },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("boxes {first} and {second} have overlapping interiors")]
    OverlappingUnion { first: usize, second: usize },

    #[error("point lies within margin {margin} of a decision boundary")]
    WithinMargin { margin: f64 },

    #[error("numerical estimate did not converge: {0}")]
    NonConvergence(String),

    #[error("singular integrand: {0}")]
    Singular(String),

    #[error("finite case: {0}")]
    FiniteCase(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("training diverged at epoch {epoch}: {detail}")]
    TrainingDiverged { epoch: usize, detail: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Coarse failure classes, used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Schema,
    Io,
    Training,
    Numerics,
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name, reason: reason.into() }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Io(_) | Error::Csv(_) => ErrorClass::Io,
            Error::TrainingDiverged { .. } => ErrorClass::Training,
            Error::NonConvergence(_) | Error::Singular(_) => ErrorClass::Numerics,
            _ => ErrorClass::Schema,
        }
    }
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
