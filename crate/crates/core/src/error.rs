use thiserror::Error;

use crate::estimation::Protocol;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("unknown figure id `{0}` (expected fig2, fig3 or fig4)")]
    UnknownFigure(String),

    #[error("phase configuration violates the unit-modulus constraint at entry {index} (|phi| = {modulus})")]
    ConstraintViolation { index: usize, modulus: f64 },

    #[error("training overhead {overhead} symbols exceeds the coherence block of {coherence} symbols")]
    TrainingExceedsCoherence { overhead: f64, coherence: f64 },

    #[error("operation is not supported for the {0} protocol")]
    UnsupportedProtocol(Protocol),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
