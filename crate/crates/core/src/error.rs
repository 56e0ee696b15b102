use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),

    /// A caller broke an API precondition (wrong tape node, missing gradient, ...).
    #[error("contract error: {0}")]
    Contract(String),

    #[error("decode error at byte offset {offset}: {reason}")]
    Decode { offset: usize, reason: String },

    #[error("unsupported image format: {0}")]
    UnsupportedFormat(String),

    #[error("image has no foreground pixels at threshold {threshold}")]
    EmptyShape { threshold: u8 },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("VAE score undefined for mask `{0}`: no white pixels")]
    UndefinedScore(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("missing score component `{0}`")]
    MissingComponent(&'static str),

    #[error("ranking error: {0}")]
    Ranking(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("png encode error: {0}")]
    PngEncode(#[from] png::EncodingError),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
