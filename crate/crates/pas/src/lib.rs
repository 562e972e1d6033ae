//! Photo authentication server.
//!
//! Keeps the camera ID register and answers verification requests over a
//! small JSON API.

pub mod error;
pub mod protocol;
pub mod registry;
pub mod server;

pub use error::{PasError, Result};
pub use protocol::{handle_verify, Mode, VerifyRequest, VerifyResponse};
pub use registry::{parse_register, CidrRecord, Registration, Registry};
pub use server::{router, serve};
