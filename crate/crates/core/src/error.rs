use thiserror::Error;

/// Errors raised across the volume, graph and training pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Param(String),

    #[error("format error at byte offset {offset}: {msg}")]
    Format { offset: u64, msg: String },

    #[error("shape error: {0}")]
    Shape(String),

    #[error("structural error: {0}")]
    Structural(String),

    #[error("model spec error: {0}")]
    Spec(String),

    #[error("non-finite value in layer {layer}: {msg}")]
    Numeric { layer: usize, msg: String },

    #[error("training diverged at epoch {epoch}: loss = {loss}")]
    Diverged { epoch: usize, loss: f64 },

    #[error("internal invariant violated: {0}")]
    Internal(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Param(msg.into())
    }

    pub(crate) fn format(offset: u64, msg: impl Into<String>) -> Self {
        Error::Format {
            offset,
            msg: msg.into(),
        }
    }

    /// True for errors caused by caller-supplied parameters or malformed inputs.
    pub fn is_parameter_error(&self) -> bool {
        matches!(
            self,
            Error::Param(_)
                | Error::Format { .. }
                | Error::Shape(_)
                | Error::Spec(_)
                | Error::Structural(_)
        )
    }

    /// True for numeric failures (non-finite activations, divergence).
    pub fn is_numeric_error(&self) -> bool {
        matches!(self, Error::Numeric { .. } | Error::Diverged { .. })
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
