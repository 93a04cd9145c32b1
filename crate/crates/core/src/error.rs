use std::path::PathBuf;

/// Errors raised anywhere in the simulator.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("degenerate CSI: compressed vector is zero")]
    DegenerateCsi,

    #[error("degenerate link: estimated channel has zero norm")]
    DegenerateLink,

    #[error("degenerate sample: reference vector has zero norm")]
    DegenerateSample,

    #[error("format error: {0}")]
    Format(String),

    #[error("unsupported container version {found} (expected {expected})")]
    Version { expected: u32, found: u32 },

    #[error("shape mismatch for {what}: expected {expected:?}, found {found:?}")]
    Shape {
        what: String,
        expected: Vec<usize>,
        found: Vec<usize>,
    },

    #[error("dataset contains no LoS samples (beta = 0)")]
    NoLosSamples,

    #[error("empty dataset")]
    EmptyDataset,

    #[error("non-finite loss while training {network} (epoch {epoch}, batch {batch})")]
    NonFiniteLoss {
        network: String,
        epoch: usize,
        batch: usize,
    },

    #[error("missing artifact: {}", .0.display())]
    Missing(PathBuf),

    #[error("model container lacks {0} weights")]
    MissingWeights(&'static str),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}
