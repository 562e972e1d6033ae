//! Fragile keyed watermarking for RGB photographs.
//!
//! A camera derives an AES key from its identity, enciphers one colour
//! channel and writes part of the result into another. Any later edit
//! breaks the relation and can be localized by recomputing it.

pub mod bench;
pub mod cipherstream;
pub mod error;
pub mod frequency;
pub mod imageio;
pub mod quality;
pub mod spatial;
pub mod synth;
pub mod tamper;
pub mod verifier;

pub use error::{Error, Result};
