use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid channel: {0}")]
    InvalidChannel(String),

    #[error("fading is fixed in known-CSI mode and cannot be sampled")]
    FadingNotRandom,

    #[error("invalid topology: {0}")]
    InvalidTopology(String),

    #[error("invalid pmf: {0}")]
    InvalidPmf(String),

    #[error("symbol value {0} is not -1 or +1")]
    InvalidSymbol(i64),

    #[error("node {node} has p_c = 0.5; its transition block is singular")]
    UninformativeNode { node: usize },

    #[error("vector sums to {sum}, expected 1")]
    NotNormalized { sum: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("detector needs {0}")]
    MissingSideInfo(&'static str),

    #[error("sample budget must be at least 1")]
    NoSamples,

    #[error("instance too large for exact evaluation: {0}")]
    InstanceTooLarge(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// True for errors caused by user input (configuration, missing files),
    /// as opposed to failures while running a campaign.
    pub fn is_config_error(&self) -> bool {
        matches!(self, Error::Config(_) | Error::Read { .. })
    }
}
