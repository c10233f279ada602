use thiserror::Error;

/// Errors produced by model construction, filtering, estimation, and I/O.
#[derive(Debug, Error)]
pub enum Error {
    /// Parameter vector violates a positivity/finiteness invariant.
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    /// A signal or series entry failed validation; the index is 0-based.
    #[error("invalid input at index {index}: {reason}")]
    InvalidInput { index: usize, reason: String },

    /// Configuration failed validation.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// Closed-loop simulation left the plausible temperature range.
    #[error("simulation unstable at t = {t_min} min ({reason}); reduce the sub-step size")]
    SimulationUnstable { t_min: f64, reason: String },

    /// The filter lost numerical validity (non-finite state, covariance no
    /// longer PSD, or a nonpositive innovation variance).
    #[error("numerical failure at sample {sample}: {reason}; consider more substeps")]
    Numerical { sample: usize, reason: String },

    /// Every optimizer restart ended in the penalty region.
    #[error("estimation failed: {0}")]
    EstimationFailed(String),

    /// Diagnostics input was degenerate (constant or zero-variance series).
    #[error("diagnostics error: {0}")]
    Diagnostics(String),

    /// Dataset text did not parse or violated a dataset invariant.
    #[error("data error at line {line}: {reason}")]
    Data { line: usize, reason: String },

    /// Report file had the wrong version or did not match the schema.
    #[error("report format error: {0}")]
    Report(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Attaches a sample index to a numerical error bubbling out of a filter
    /// step; other variants pass through unchanged.
    pub(crate) fn at_sample(self, sample: usize) -> Error {
        match self {
            Error::Numerical { reason, .. } => Error::Numerical { sample, reason },
            other => other,
        }
    }
}
