use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed trace line {line}: {reason}")]
    MalformedEvent { line: usize, reason: String },

    #[error("trace `{0}` contains no events")]
    EmptyDocument(String),

    #[error("cannot fit vocabulary: {0}")]
    Fit(String),

    #[error("holdout must contain both classes (clean: {clean}, malicious: {malicious})")]
    SingleClassHoldout { clean: usize, malicious: usize },

    #[error("invalid channel map: {0}")]
    ChannelMap(String),

    #[error("invalid spectrum: {0}")]
    Spectrum(String),

    #[error("image is {actual}x{actual} but the model expects {expected}x{expected}")]
    SizeMismatch { expected: usize, actual: usize },

    #[error("unsupported image: {0}")]
    Image(String),

    #[error("invalid manifest: {0}")]
    Manifest(String),

    #[error("invalid synthetic corpus spec: {0}")]
    Synth(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Png(#[from] image::ImageError),
}
