//! Crate-wide error type.

use thiserror::Error;

#[derive(Error, Debug)]
pub enum Error {
    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("frame index {index} out of range (sequence has {count} frames)")]
    FrameOutOfRange { index: usize, count: usize },

    #[error("frame {width}x{height} too small for grain analysis (needs one full 64x64 tile); skip analysis for this frame")]
    FrameTooSmall { width: usize, height: usize },

    #[error("bounds error: {0}")]
    Bounds(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("parse error at bit {bit_offset}: {message}")]
    Parse { bit_offset: usize, message: String },

    #[error("encode error: field {field} out of range (value {value})")]
    Encode { field: &'static str, value: i64 },

    #[error("unsupported film grain model id {0}")]
    UnsupportedModel(u8),

    #[error("external codec command failed: {0}")]
    ExternalCodec(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn parse(bit_offset: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            bit_offset,
            message: message.into(),
        }
    }
}
