//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid group structure: {0}")]
    GroupStructure(String),

    #[error("column {index} is degenerate (zero variance)")]
    DegenerateColumn { index: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is not symmetric positive definite (min diagonal pivot {min_pivot:e})")]
    IllConditioned { min_pivot: f64 },

    #[error("posterior draws are empty")]
    EmptyDraws,

    #[error("exact enumeration supports at most {max} groups, got {got}")]
    EnumerationTooLarge { got: usize, max: usize },

    #[error("degenerate response: all outcomes equal after {attempts} attempts")]
    DegenerateResponse { attempts: usize },

    #[error("test set contains a single class")]
    SingleClassTestSet,

    #[error("numerical failure at sweep {sweep}: {source}")]
    AtSweep {
        sweep: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Attach the sweep index at which a sampler error occurred.
    pub fn at_sweep(self, sweep: usize) -> Self {
        Error::AtSweep {
            sweep,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
