//! Camera key material and the ciphered modifier plane.
//!
//! One SHA-256 digest of the camera identity feeds both the 128-bit AES key
//! (bytes 0..16) and the public photo ID (bytes 24..32). The modifier plane is
//! ciphered with AES-128 in counter mode, so each output byte depends only on
//! the input byte at the same position.

use std::fmt;
use std::str::FromStr;

use aes::cipher::{KeyIvInit, StreamCipher};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

type Aes128Ctr = ctr::Ctr32BE<aes::Aes128>;

const NONCE_DOMAIN: &[u8] = b"photostamp-v1";
const MAX_CAMERA_ID_LEN: usize = 256;

/// A camera's hard-coded identity (serial number, MAC-like id).
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct CameraIdentity(String);

impl CameraIdentity {
    pub fn new(id: impl Into<String>) -> Result<Self> {
        let id = id.into();
        if id.is_empty() {
            return Err(Error::EmptyCameraId);
        }
        if id.len() > MAX_CAMERA_ID_LEN {
            return Err(Error::CameraIdTooLong(id.len()));
        }
        Ok(Self(id))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    fn digest(&self) -> [u8; 32] {
        Sha256::digest(self.0.as_bytes()).into()
    }
}

// Identities are key material; keep them out of debug logs.
impl fmt::Debug for CameraIdentity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CameraIdentity({} bytes)", self.0.len())
    }
}

impl fmt::Display for CameraIdentity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl TryFrom<String> for CameraIdentity {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        Self::new(s)
    }
}

impl From<CameraIdentity> for String {
    fn from(c: CameraIdentity) -> String {
        c.0
    }
}

impl FromStr for CameraIdentity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::new(s)
    }
}

/// Public 64-bit identifier carried alongside a stamped image.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct PhotoId(String);

impl PhotoId {
    pub fn parse(s: &str) -> Result<Self> {
        let ok = s.len() == 16 && s.bytes().all(|b| matches!(b, b'0'..=b'9' | b'a'..=b'f'));
        if ok {
            Ok(Self(s.to_owned()))
        } else {
            Err(Error::InvalidPhotoId(s.to_owned()))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for PhotoId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl FromStr for PhotoId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::parse(s)
    }
}

impl TryFrom<String> for PhotoId {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        Self::parse(&s)
    }
}

impl From<PhotoId> for String {
    fn from(p: PhotoId) -> String {
        p.0
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
pub struct SymmetricKey([u8; 16]);

impl SymmetricKey {
    pub fn from_bytes(bytes: [u8; 16]) -> Self {
        Self(bytes)
    }

    pub fn as_bytes(&self) -> &[u8; 16] {
        &self.0
    }
}

impl fmt::Debug for SymmetricKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("SymmetricKey(..)")
    }
}

/// First 16 bytes of SHA-256 over the identity.
pub fn derive_key(cam: &CameraIdentity) -> SymmetricKey {
    let d = cam.digest();
    let mut key = [0; 16];
    key.copy_from_slice(&d[..16]);
    SymmetricKey(key)
}

/// Hex of the last 8 bytes of SHA-256 over the identity.
pub fn photo_id(cam: &CameraIdentity) -> PhotoId {
    let d = cam.digest();
    PhotoId(hex::encode(&d[24..]))
}

/// Counter-mode nonce bound to the raster dimensions.
pub fn nonce_for(width: u32, height: u32) -> [u8; 12] {
    let mut h = Sha256::new();
    h.update(NONCE_DOMAIN);
    h.update(width.to_be_bytes());
    h.update(height.to_be_bytes());
    let d = h.finalize();
    let mut nonce = [0; 12];
    nonce.copy_from_slice(&d[..12]);
    nonce
}

/// `len` bytes of AES-128-CTR keystream for a `width x height` raster.
pub fn keystream(key: &SymmetricKey, width: u32, height: u32, len: usize) -> Vec<u8> {
    let mut out = vec![0; len];
    apply_keystream(key, width, height, &mut out);
    out
}

fn apply_keystream(key: &SymmetricKey, width: u32, height: u32, buf: &mut [u8]) {
    let mut iv = [0u8; 16];
    iv[..12].copy_from_slice(&nonce_for(width, height));
    let mut cipher = Aes128Ctr::new(&key.0.into(), &iv.into());
    cipher.apply_keystream(buf);
}

/// XOR `plane` with the keystream for this key and raster size.
///
/// Applying it twice with the same parameters restores the input.
pub fn cipher_plane(plane: &[u8], key: &SymmetricKey, width: u32, height: u32) -> Result<Vec<u8>> {
    let expected = width as usize * height as usize;
    if plane.len() != expected {
        return Err(Error::LengthMismatch {
            expected,
            actual: plane.len(),
        });
    }
    let mut out = plane.to_vec();
    apply_keystream(key, width, height, &mut out);
    Ok(out)
}
