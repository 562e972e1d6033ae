//! PPAP messages and the verification handler.

use base64::Engine;
use photostamp::cipherstream::{CameraIdentity, PhotoId};
use photostamp::imageio::{decode, RgbImage};
use photostamp::verifier::{verify, ForgeryReport, StampConfig, Verdict};
use serde::{Deserialize, Serialize};

use crate::error::{PasError, Result};
use crate::registry::Registry;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    PublicOnline,
    Offline,
    /// The verifier holds the organisation secret; the register is not used.
    Private,
}

fn default_config() -> StampConfig {
    StampConfig::technique("lsb").expect("built-in technique")
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyRequest {
    pub mode: Mode,
    /// Base64 of a PNG or BMP file.
    pub image_b64: String,
    #[serde(default = "default_config")]
    pub config: StampConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub org_secret: Option<String>,
}

impl VerifyRequest {
    pub fn new(mode: Mode, image_bytes: &[u8], config: StampConfig) -> Self {
        Self {
            mode,
            image_b64: base64::engine::general_purpose::STANDARD.encode(image_bytes),
            config,
            org_secret: None,
        }
    }

    pub fn with_secret(mut self, secret: impl Into<String>) -> Self {
        self.org_secret = Some(secret.into());
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyResponse {
    #[serde(flatten)]
    pub report: ForgeryReport,
    pub camera_id_found: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub photo_id_used: Option<PhotoId>,
}

impl VerifyResponse {
    fn unknown(photo_id_used: Option<PhotoId>, message: String) -> Self {
        Self {
            report: ForgeryReport::unknown_camera(message),
            camera_id_found: false,
            photo_id_used,
        }
    }
}

fn decode_request_image(b64: &str) -> Result<RgbImage> {
    let bytes = base64::engine::general_purpose::STANDARD
        .decode(b64.trim())
        .map_err(|e| PasError::MalformedImage(format!("base64: {e}")))?;
    decode(&bytes).map_err(|e| PasError::MalformedImage(e.to_string()))
}

/// Serve one verification request. Only well-formedness problems are
/// errors; an unknown camera is a normal `UnknownCamera` response.
pub fn handle_verify(registry: &Registry, req: &VerifyRequest) -> Result<VerifyResponse> {
    match (req.mode, &req.org_secret) {
        (Mode::Private, None) => return Err(PasError::MissingSecret),
        (Mode::PublicOnline | Mode::Offline, Some(_)) => return Err(PasError::UnexpectedSecret),
        _ => {}
    }
    let img = decode_request_image(&req.image_b64)?;
    if let Some(secret) = &req.org_secret {
        let cam = CameraIdentity::new(secret.as_str()).map_err(|_| PasError::MissingSecret)?;
        return Ok(VerifyResponse {
            report: verify(&img, &cam, &req.config),
            camera_id_found: true,
            photo_id_used: None,
        });
    }
    let Some(raw) = img.photo_id() else {
        return Ok(VerifyResponse::unknown(None, "image carries no photo id".into()));
    };
    let Ok(id) = PhotoId::parse(raw) else {
        return Ok(VerifyResponse::unknown(None, format!("unparseable photo id {raw:?}")));
    };
    match registry.lookup(&id) {
        Ok(cam) => {
            let report = verify(&img, &cam, &req.config);
            debug_assert!(report.verdict != Verdict::UnknownCamera);
            Ok(VerifyResponse {
                report,
                camera_id_found: true,
                photo_id_used: Some(id),
            })
        }
        Err(PasError::NotFound(_)) => {
            let msg = format!("photo id {id} is not in the register");
            Ok(VerifyResponse::unknown(Some(id), msg))
        }
        Err(e) => Err(e),
    }
}
