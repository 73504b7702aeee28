use thiserror::Error;

/// Errors raised while loading models or running the solvers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("failed to read model file: {0}")]
    Io(#[from] std::io::Error),

    #[error("malformed model file: {0}")]
    Parse(#[from] serde_json::Error),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("row {row} of {family} sums to {sum} (defect {defect:.3e} exceeds tolerance)")]
    RowSum {
        family: String,
        row: usize,
        sum: f64,
        defect: f64,
    },

    #[error("entry out of range in {0}")]
    EntryRange(String),

    #[error("invalid tail specification: {0}")]
    InvalidTail(String),

    #[error("matrix is reducible: {0}")]
    Reducible(String),

    #[error("zero pivot at state {state} during elimination (degenerate or reducible input)")]
    ZeroPivot { state: usize },

    #[error("I - M is singular or ill-conditioned (reciprocal condition {rcond:.3e})")]
    Singular { rcond: f64 },

    #[error("fixed-point iteration did not converge in {iterations} iterations (last step {step:.3e})")]
    NotConverged { iterations: usize, step: f64 },

    #[error("eigenvalue computation failed: {0}")]
    Eigen(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),
}

impl Error {
    /// True for errors that reflect a bad model or bad arguments rather than
    /// a numerical breakdown.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Io(_)
                | Error::Parse(_)
                | Error::Dimension(_)
                | Error::RowSum { .. }
                | Error::EntryRange(_)
                | Error::InvalidTail(_)
                | Error::Precondition(_)
        )
    }

    /// Short machine-readable tag.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io(_) => "io",
            Error::Parse(_) => "parse",
            Error::Dimension(_) => "dimension",
            Error::RowSum { .. } => "row_sum",
            Error::EntryRange(_) => "entry_range",
            Error::InvalidTail(_) => "invalid_tail",
            Error::Reducible(_) => "reducible",
            Error::ZeroPivot { .. } => "zero_pivot",
            Error::Singular { .. } => "singular",
            Error::NotConverged { .. } => "not_converged",
            Error::Eigen(_) => "eigen",
            Error::Precondition(_) => "precondition",
            Error::Degenerate(_) => "degenerate",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
