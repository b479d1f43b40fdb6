use thiserror::Error;

pub type Result<T> = std::result::Result<T, GecError>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GecError {
    #[error("capacity exceeded: {what} needs dimension {dim}, cap is {cap}")]
    Capacity { what: String, dim: u128, cap: u128 },

    #[error("degenerate spectrum: centered Hamiltonian has zero width")]
    DegenerateSpectrum,

    #[error("degenerate model: {0}")]
    DegenerateModel(String),

    #[error("eigensolver did not converge (dim {dim}, matrix fingerprint {fingerprint:016x})")]
    NoConvergence { dim: usize, fingerprint: u64 },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("input not sorted ascending at index {0}")]
    Unsorted(usize),

    #[error("state is not normalized (norm {0})")]
    NotNormalized(f64),

    #[error("curves do not cross on the sampled grid")]
    NoCrossing,

    #[error("curves cross more than once, sign changes in intervals {0:?}")]
    MultipleCrossings(Vec<(f64, f64)>),

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("unknown format tag `{0}`")]
    UnknownFormat(String),

    #[error("time budget exceeded after {completed} of {total} steps")]
    BudgetExceeded { completed: usize, total: usize },

    #[error("realization {index}: {source}")]
    Realization {
        index: u64,
        #[source]
        source: Box<GecError>,
    },
}

impl GecError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        GecError::InvalidParameter(msg.into())
    }

    /// Strips realization wrappers.
    pub fn root(&self) -> &GecError {
        match self {
            GecError::Realization { source, .. } => source.root(),
            other => other,
        }
    }
}
