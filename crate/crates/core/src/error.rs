use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvoError {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),
    #[error("incompatible basis: {0}")]
    IncompatibleBasis(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("field grid does not match the basis quadrature grid: {0}")]
    GridMismatch(String),
    #[error("rank deficient input at function {index} (pivot norm {pivot:e})")]
    RankDeficient { index: usize, pivot: f64 },
    #[error("CFL violation: dt = {dt:e} exceeds stable bound {bound:e}")]
    CflViolation { dt: f64, bound: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("solver failed on sample {index}: {source}")]
    Sample {
        index: usize,
        #[source]
        source: Box<EvoError>,
    },
    #[error("trajectory diverged at step {step} (norm {norm:e})")]
    BlowUp { step: usize, norm: f64 },
    #[error("non-finite value in block {block}, layer {layer}")]
    NonFinite { block: usize, layer: usize },
    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    TrainingDiverged { epoch: usize, batch: usize },
    #[error("no snapshot pairs separated by the lag; nearest gaps: {nearest:?}")]
    NoPairs { nearest: Vec<f64> },
    #[error("empty probe set")]
    EmptyProbeSet,
    #[error("format error: {0}")]
    Format(String),
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, EvoError>;

impl EvoError {
    /// True for failures of the numerics (as opposed to bad input or I/O).
    pub fn is_numeric(&self) -> bool {
        match self {
            EvoError::CflViolation { .. }
            | EvoError::BlowUp { .. }
            | EvoError::NonFinite { .. }
            | EvoError::TrainingDiverged { .. }
            | EvoError::RankDeficient { .. } => true,
            EvoError::Sample { source, .. } => source.is_numeric(),
            _ => false,
        }
    }
}
