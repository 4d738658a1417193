use std::fmt;
use std::io;

/// Raised when an explicit step produces a non-finite value or leaves the
/// plausible range, usually because `dt` is too large for the parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct DivergedError {
    /// Step index within a run, when known.
    pub step: Option<usize>,
    /// Which field blew up ("c_v", "c_i" or "eta").
    pub field: &'static str,
    /// Flat pixel index of the first offending value.
    pub index: usize,
    pub value: f64,
}

impl fmt::Display for DivergedError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "simulation diverged: {}[{}] = {}",
            self.field, self.index, self.value
        )?;
        if let Some(step) = self.step {
            write!(f, " at step {step}")?;
        }
        Ok(())
    }
}

impl std::error::Error for DivergedError {}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid mask: {0}")]
    InvalidMask(String),

    #[error("dimension mismatch: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),

    #[error(transparent)]
    Diverged(#[from] DivergedError),

    #[error("invalid superpixel count: {0}")]
    InvalidK(String),

    #[error("annotation references superpixel map {found}, current map is {expected}")]
    StaleAnnotation { expected: String, found: String },

    #[error("superpixel label {label} out of range (map has {n_labels} labels)")]
    LabelOutOfRange { label: u32, n_labels: u32 },

    #[error("schema error at `{path}`: {message}")]
    Schema { path: String, message: String },

    #[error("gradient unavailable for parameter {param}: {reason}")]
    GradientUnavailable { param: &'static str, reason: String },

    #[error("training aborted after {iteration} iterations: {reason}")]
    Aborted { iteration: usize, reason: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("bad file format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn schema(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Schema {
            path: path.into(),
            message: message.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
