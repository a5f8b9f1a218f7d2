use thiserror::Error;

use crate::data::Violation;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Cholesky factorization hit a non-positive pivot at `minor` (0-based).
    #[error("matrix is not positive definite (leading minor {minor})")]
    NotPositiveDefinite { minor: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("constant fiber in view {view}, feature {feature}, slab {slab}")]
    ConstantFiber {
        view: usize,
        feature: usize,
        slab: usize,
    },

    #[error("fiber in view {view}, feature {feature}, slab {slab} has fewer than 2 observed entries")]
    SparseFiber {
        view: usize,
        feature: usize,
        slab: usize,
    },

    #[error("invalid collection: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    InvalidCollection(Vec<Violation>),

    #[error("sampler failed at sweep {sweep} ({site}): {source}")]
    Sampler {
        sweep: usize,
        site: String,
        #[source]
        source: Box<Error>,
    },

    #[error("{0}")]
    Diagnostic(String),

    #[error("parse error in {path}: {msg}")]
    Parse { path: String, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn at_sweep(self, sweep: usize, site: impl Into<String>) -> Self {
        match self {
            Error::Sampler {
                sweep: 0,
                site: inner,
                source,
            } => Error::Sampler {
                sweep,
                site: format!("{}, {inner}", site.into()),
                source,
            },
            e @ Error::Sampler { .. } => e,
            e => Error::Sampler {
                sweep,
                site: site.into(),
                source: Box::new(e),
            },
        }
    }

    pub(crate) fn parse(path: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            msg: msg.into(),
        }
    }
}
