use thiserror::Error;

/// Errors produced by the model, spectral, entanglement and analysis layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("ring of {n_sites} sites exceeds the configured cap of {cap}")]
    ResourceLimit { n_sites: usize, cap: usize },

    #[error("eigensolver failed in magnetization sector {sector}: {reason}")]
    NumericalFailure { sector: usize, reason: String },

    #[error("ill-conditioned projector product: energies {0} and {1} nearly coincide")]
    IllConditioned(f64, f64),

    #[error(
        "reduced matrix violates the (a, b, c) structure: residual {residual:e} >= {tolerance:e}"
    )]
    StructureViolation { residual: f64, tolerance: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("at alpha = {alpha}: {source}")]
    AtAlpha {
        alpha: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of the numerical pipeline (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::NumericalFailure { .. }
            | Error::IllConditioned(..)
            | Error::StructureViolation { .. } => true,
            Error::AtAlpha { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
