use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DgError {
    #[error("invalid Fock dimension {0}: need at least 2 levels")]
    InvalidDimension(usize),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameters: {}", .0.join("; "))]
    InvalidParams(Vec<String>),

    #[error("site index {site} out of range for a lattice of {total} sites")]
    SiteOutOfRange { site: usize, total: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("numerical collapse at site {site}, t = {time}: pre-renormalization norm {norm:e} (dt too large?)")]
    NumericalCollapse { site: usize, time: f64, norm: f64 },

    #[error("non-finite amplitude at site {site}, t = {time}")]
    Divergence { site: usize, time: f64 },

    #[error("trajectory {index} (seed {seed:#018x}) failed: {source}")]
    Trajectory {
        index: u64,
        seed: u64,
        #[source]
        source: Box<DgError>,
    },

    #[error("insufficient data for fit: {usable} usable points, need {required}")]
    InsufficientData { usable: usize, required: usize },

    #[error("relaxation rate unresolvable: {0}")]
    RateUnresolvable(String),

    #[error("total Hilbert dimension {dim} exceeds cap {cap}")]
    DimensionCap { dim: usize, cap: usize },

    #[error("density matrix lost positivity at t = {time}: min eigenvalue {min_eigenvalue:e} (reduce the step)")]
    Positivity { time: f64, min_eigenvalue: f64 },
}

impl DgError {
    /// Seed of the failing trajectory, when the error came out of an ensemble.
    pub fn replay_seed(&self) -> Option<u64> {
        match self {
            DgError::Trajectory { seed, .. } => Some(*seed),
            _ => None,
        }
    }
}

pub type Result<T> = std::result::Result<T, DgError>;
