use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, GsfError>;

#[derive(Debug, Error)]
pub enum GsfError {
    #[error("unreadable file {path}: {reason}")]
    UnreadableFile { path: PathBuf, reason: String },

    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),

    #[error("zero-sized image")]
    ZeroSizedImage,

    #[error("invalid image: {0}")]
    InvalidImage(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("negative input pixel {value} at index {index}")]
    NegativePixel { index: usize, value: f64 },

    #[error("all-zero image cannot be contrast equalized")]
    AllZeroImage,

    #[error("image {width}x{height} is smaller than the required {min_width}x{min_height}")]
    Undersized {
        width: usize,
        height: usize,
        min_width: usize,
        min_height: usize,
    },

    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    #[error("wrong feature variant: {0}")]
    WrongVariant(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("insufficient classes: {0}")]
    InsufficientClasses(String),

    #[error("degenerate between-class scatter")]
    DegenerateScatter,

    #[error("within-class scatter is singular; use a positive ridge")]
    SingularScatter,

    #[error("zero-norm vector")]
    ZeroNorm,

    #[error("empty set: {0}")]
    EmptySet(String),

    #[error("manifest line {line}: {reason}")]
    Manifest { line: usize, reason: String },

    #[error("config line {line}: {reason}")]
    Config { line: usize, reason: String },

    #[error("model file: {0}")]
    ModelFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
