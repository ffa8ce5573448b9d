use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("index {index} out of range for {len} measurements")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("numeric failure at iteration {iteration}: {reason}")]
    Numeric { iteration: usize, reason: String },

    #[error("partition construction failed after {attempts} attempts (best nu = {best_nu:.4e})")]
    PartitionConstruction { attempts: usize, best_nu: f64 },

    #[error("partition set {set} yields a singular frame operator for block {block}")]
    PartitionDegenerate { block: usize, set: usize },

    #[error("channel vector {block} is not unit norm (norm = {norm})")]
    Normalization { block: usize, norm: f64 },

    #[error("relative error undefined: truth block {0} is zero")]
    UndefinedRatio(usize),

    #[error("tangent frame: {0}")]
    Frame(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("trial (rho = {rho}, index = {trial}) failed: {source}")]
    Trial {
        rho: f64,
        trial: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        Error::InvalidDimension(msg.into())
    }

    /// True for failures of the numerics rather than of the input.
    pub fn is_numeric(&self) -> bool {
        match self {
            Error::Numeric { .. }
            | Error::PartitionConstruction { .. }
            | Error::PartitionDegenerate { .. } => true,
            Error::Trial { source, .. } => source.is_numeric(),
            _ => false,
        }
    }
}
