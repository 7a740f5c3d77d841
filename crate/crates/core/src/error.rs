use thiserror::Error;

use crate::graph::Vertex;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("support collision at site {0}")]
    SupportCollision(Vertex),

    #[error("support mismatch: expected {expected} sites, got {found}")]
    SupportMismatch { expected: usize, found: usize },

    #[error("site {0} is not contained in the target support")]
    NotInSupport(Vertex),

    #[error("operator dimension {found} does not match 2^{sites}")]
    DimensionMismatch { sites: usize, found: usize },

    #[error("operator is not Hermitian (deviation {0:e})")]
    NonHermitian(f64),

    #[error("parameters out of model range: {0}")]
    OutOfRange(String),

    #[error("volume too large: {sites} sites exceeds the cap of {cap}")]
    VolumeTooLarge { sites: usize, cap: usize },

    #[error("oracle volume too large: {sites} sites exceeds the cap of {cap}")]
    OracleVolumeTooLarge { sites: usize, cap: usize },

    #[error("observable support exceeds the volume of level {0}")]
    SupportOutsideVolume(usize),

    #[error("invalid observable: {0}")]
    InvalidObservable(String),

    #[error("{what}: independent routes disagree by {deviation:e}")]
    RouteMismatch { what: &'static str, deviation: f64 },

    #[error("fixed-point iteration did not converge after {0} steps")]
    NoConvergence(usize),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
