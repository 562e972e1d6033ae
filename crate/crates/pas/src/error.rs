use photostamp::cipherstream::PhotoId;

pub type Result<T, E = PasError> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum PasError {
    #[error("photo id {0} is already registered to a different camera")]
    PhotoIdCollision(PhotoId),
    #[error("photo id {0} is not registered")]
    NotFound(PhotoId),
    #[error("invalid camera id: {0}")]
    InvalidCamera(photostamp::Error),
    #[error("malformed image: {0}")]
    MalformedImage(String),
    #[error("private mode requires org_secret")]
    MissingSecret,
    #[error("org_secret is only accepted in private mode")]
    UnexpectedSecret,
    #[error("register file is corrupt: {0}")]
    CorruptRegister(String),
    #[error("register storage failed: {0}")]
    Storage(#[from] std::io::Error),
}
