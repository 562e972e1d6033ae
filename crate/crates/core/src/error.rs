use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unsupported image format: {0}")]
    UnsupportedFormat(String),

    #[error("failed to decode image: {0}")]
    Decode(String),

    #[error("failed to encode image: {0}")]
    Encode(String),

    #[error("refusing to write lossy format: {0}")]
    LossyFormatRequested(String),

    #[error("invalid image: {0}")]
    InvalidImage(String),

    #[error("invalid metadata key {0:?}")]
    InvalidMetadata(String),

    #[error("camera id must not be empty")]
    EmptyCameraId,

    #[error("camera id is {0} bytes, the limit is 256")]
    CameraIdTooLong(usize),

    #[error("invalid photo id {0:?}: expected 16 lowercase hex characters")]
    InvalidPhotoId(String),

    #[error("plane has {actual} bytes, expected {expected}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("bit plane index {0} out of range 0..=7")]
    InvalidBitPlane(u8),

    #[error("coefficient ({row}, {col}) out of range, both indices must be in 1..=8")]
    InvalidSelector { row: u8, col: u8 },

    #[error("modifier and modified channel must differ")]
    InvalidRoles,

    #[error("image is {width}x{height}, need at least {min}x{min}")]
    ImageTooSmall { width: u32, height: u32, min: u32 },

    #[error("image dimensions differ: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(u32, u32, u32, u32),

    #[error("region {0} lies outside the {1}x{2} image")]
    RegionOutOfBounds(String, u32, u32),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("unknown technique {0:?}")]
    UnknownTechnique(String),

    #[error("unknown tamper scenario {0:?}")]
    UnknownScenario(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
