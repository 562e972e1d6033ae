//! Stamping and verification entry points shared by the CLI and the server.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::cipherstream::{derive_key, photo_id, CameraIdentity};
use crate::error::{Error, Result};
use crate::frequency::{
    block_coverage, embed_frequency, mismatch_frequency, saturated_blocks, CoeffSelector,
    DEFAULT_TOLERANCE,
};
use crate::imageio::{RgbImage, PHOTO_ID_KEY};
use crate::quality::Db;
use crate::spatial::{embed_spatial, mismatch_spatial, BitPlane, ChannelRoles, MismatchMap};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Embedding {
    Spatial { plane: BitPlane },
    Frequency { selector: CoeffSelector, tol: f64 },
}

/// Technique plus channel roles. Serializes to the wire shape
/// `{"domain": "spatial", "plane": 0}` or
/// `{"domain": "frequency", "selector": "mid_ac", "tol": 8.0}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawConfig", into = "RawConfig")]
pub struct StampConfig {
    pub embedding: Embedding,
    pub roles: ChannelRoles,
}

/// Technique names in bench order.
pub const TECHNIQUES: [&str; 7] = ["lsb", "bit4", "msb", "dc", "first-ac", "mid-ac", "last-ac"];

impl StampConfig {
    pub fn spatial(plane: BitPlane) -> Self {
        Self {
            embedding: Embedding::Spatial { plane },
            roles: ChannelRoles::default(),
        }
    }

    pub fn frequency(selector: CoeffSelector) -> Self {
        Self {
            embedding: Embedding::Frequency {
                selector,
                tol: DEFAULT_TOLERANCE,
            },
            roles: ChannelRoles::default(),
        }
    }

    /// One of [`TECHNIQUES`], with default roles and tolerance.
    pub fn technique(name: &str) -> Result<Self> {
        Ok(match name.to_ascii_lowercase().replace('_', "-").as_str() {
            "lsb" => Self::spatial(BitPlane::LSB),
            "bit4" | "4th-bit" | "fourth-bit" => Self::spatial(BitPlane::FOURTH_BIT),
            "msb" => Self::spatial(BitPlane::MSB),
            "dc" => Self::frequency(CoeffSelector::DC),
            "first-ac" => Self::frequency(CoeffSelector::FIRST_AC),
            "mid-ac" => Self::frequency(CoeffSelector::MID_AC),
            "last-ac" => Self::frequency(CoeffSelector::LAST_AC),
            _ => return Err(Error::UnknownTechnique(name.to_owned())),
        })
    }

    pub fn all_techniques() -> Vec<(&'static str, StampConfig)> {
        TECHNIQUES
            .iter()
            .map(|n| (*n, Self::technique(n).expect("known technique")))
            .collect()
    }

    pub fn with_roles(mut self, roles: ChannelRoles) -> Self {
        self.roles = roles;
        self
    }

    /// Replaces the tolerance; no effect on spatial configs.
    pub fn with_tolerance(mut self, tol: f64) -> Result<Self> {
        if tol.is_nan() || tol < 0.0 {
            return Err(Error::InvalidConfig(format!("tolerance must be >= 0, got {tol}")));
        }
        if let Embedding::Frequency { tol: t, .. } = &mut self.embedding {
            *t = tol;
        }
        Ok(self)
    }

    /// Short technique name when this is a preset (roles ignored).
    pub fn name(&self) -> Option<&'static str> {
        match self.embedding {
            Embedding::Spatial { plane } => match plane {
                BitPlane::LSB => Some("lsb"),
                BitPlane::FOURTH_BIT => Some("bit4"),
                BitPlane::MSB => Some("msb"),
                _ => None,
            },
            Embedding::Frequency { selector, .. } => match selector {
                CoeffSelector::DC => Some("dc"),
                CoeffSelector::FIRST_AC => Some("first-ac"),
                CoeffSelector::MID_AC => Some("mid-ac"),
                CoeffSelector::LAST_AC => Some("last-ac"),
                _ => None,
            },
        }
    }

    pub fn is_spatial(&self) -> bool {
        matches!(self.embedding, Embedding::Spatial { .. })
    }
}

impl fmt::Display for StampConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.name(), self.embedding) {
            (Some(n), _) => f.write_str(n),
            (None, Embedding::Spatial { plane }) => write!(f, "bit{}", plane.index()),
            (None, Embedding::Frequency { selector, .. }) => write!(f, "coeff{selector}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Domain {
    Spatial,
    Frequency,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    domain: Domain,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    plane: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    selector: Option<CoeffSelector>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    tol: Option<Db>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    roles: Option<ChannelRoles>,
}

impl TryFrom<RawConfig> for StampConfig {
    type Error = Error;

    fn try_from(raw: RawConfig) -> Result<Self> {
        let embedding = match raw.domain {
            Domain::Spatial => {
                if raw.selector.is_some() || raw.tol.is_some() {
                    return Err(Error::InvalidConfig(
                        "spatial config takes a plane, not a selector or tol".into(),
                    ));
                }
                let plane = raw
                    .plane
                    .ok_or_else(|| Error::InvalidConfig("spatial config needs a plane".into()))?;
                Embedding::Spatial {
                    plane: BitPlane::new(plane)?,
                }
            }
            Domain::Frequency => {
                if raw.plane.is_some() {
                    return Err(Error::InvalidConfig(
                        "frequency config takes a selector, not a plane".into(),
                    ));
                }
                let selector = raw
                    .selector
                    .ok_or_else(|| Error::InvalidConfig("frequency config needs a selector".into()))?;
                let tol = raw.tol.map_or(DEFAULT_TOLERANCE, |t| t.0);
                if tol.is_nan() || tol < 0.0 {
                    return Err(Error::InvalidConfig(format!("tolerance must be >= 0, got {tol}")));
                }
                Embedding::Frequency { selector, tol }
            }
        };
        Ok(StampConfig {
            embedding,
            roles: raw.roles.unwrap_or_default(),
        })
    }
}

impl From<StampConfig> for RawConfig {
    fn from(c: StampConfig) -> Self {
        let roles = (c.roles != ChannelRoles::default()).then_some(c.roles);
        match c.embedding {
            Embedding::Spatial { plane } => RawConfig {
                domain: Domain::Spatial,
                plane: Some(plane.index()),
                selector: None,
                tol: None,
                roles,
            },
            Embedding::Frequency { selector, tol } => RawConfig {
                domain: Domain::Frequency,
                plane: None,
                selector: Some(selector),
                tol: Some(Db(tol)),
                roles,
            },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Authentic,
    Tampered,
    UnknownCamera,
    Error,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Authentic => "authentic",
            Verdict::Tampered => "tampered",
            Verdict::UnknownCamera => "unknown_camera",
            Verdict::Error => "error",
        })
    }
}

/// Axis-aligned pixel rectangle.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Rect {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
}

impl Rect {
    pub fn new(x: u32, y: u32, w: u32, h: u32) -> Self {
        Self { x, y, w, h }
    }

    pub fn area(&self) -> u64 {
        self.w as u64 * self.h as u64
    }

    pub fn right(&self) -> u32 {
        self.x + self.w
    }

    pub fn bottom(&self) -> u32 {
        self.y + self.h
    }

    pub fn contains(&self, x: u32, y: u32) -> bool {
        x >= self.x && x < self.right() && y >= self.y && y < self.bottom()
    }

    pub fn intersection(&self, other: &Rect) -> Option<Rect> {
        let x0 = self.x.max(other.x);
        let y0 = self.y.max(other.y);
        let x1 = self.right().min(other.right());
        let y1 = self.bottom().min(other.bottom());
        (x1 > x0 && y1 > y0).then(|| Rect::new(x0, y0, x1 - x0, y1 - y0))
    }

    pub fn union_bbox(&self, other: &Rect) -> Rect {
        let x0 = self.x.min(other.x);
        let y0 = self.y.min(other.y);
        let x1 = self.right().max(other.right());
        let y1 = self.bottom().max(other.bottom());
        Rect::new(x0, y0, x1 - x0, y1 - y0)
    }

    pub fn iou(&self, other: &Rect) -> f64 {
        let inter = self.intersection(other).map_or(0, |r| r.area());
        let union = self.area() + other.area() - inter;
        if union == 0 {
            0.0
        } else {
            inter as f64 / union as f64
        }
    }

    /// Bounding box of a set of rectangles.
    pub fn bounding(rects: &[Rect]) -> Option<Rect> {
        let (first, rest) = rects.split_first()?;
        Some(rest.iter().fold(*first, |acc, r| acc.union_bbox(r)))
    }
}

impl fmt::Display for Rect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}+{}+{}", self.w, self.h, self.x, self.y)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForgeryReport {
    pub verdict: Verdict,
    pub flagged_ratio: f64,
    pub regions: Vec<Rect>,
    pub coverage: f64,
    pub low_confidence_blocks: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

impl ForgeryReport {
    pub fn error(message: impl Into<String>) -> Self {
        Self {
            verdict: Verdict::Error,
            flagged_ratio: 0.0,
            regions: Vec::new(),
            coverage: 0.0,
            low_confidence_blocks: 0,
            message: Some(message.into()),
        }
    }

    pub fn unknown_camera(message: impl Into<String>) -> Self {
        Self {
            verdict: Verdict::UnknownCamera,
            ..Self::error(message)
        }
    }
}

/// Stamp `img` for `cam` and attach its photo ID.
pub fn stamp(img: &RgbImage, cam: &CameraIdentity, cfg: &StampConfig) -> Result<RgbImage> {
    let key = derive_key(cam);
    let mut out = match cfg.embedding {
        Embedding::Spatial { plane } => embed_spatial(img, &key, plane, cfg.roles),
        Embedding::Frequency { selector, .. } => embed_frequency(img, &key, selector, cfg.roles)?,
    };
    out.metadata_mut()
        .insert(PHOTO_ID_KEY.to_owned(), photo_id(cam).to_string());
    Ok(out)
}

/// A report plus the mismatch map it was built from.
#[derive(Clone, Debug)]
pub struct Verification {
    pub report: ForgeryReport,
    /// Flags after low-confidence blocks have been cleared.
    pub map: MismatchMap,
}

pub fn verify(img: &RgbImage, cam: &CameraIdentity, cfg: &StampConfig) -> ForgeryReport {
    match verify_detailed(img, cam, cfg) {
        Ok(v) => v.report,
        Err(e) => ForgeryReport::error(e.to_string()),
    }
}

pub fn verify_detailed(img: &RgbImage, cam: &CameraIdentity, cfg: &StampConfig) -> Result<Verification> {
    let key = derive_key(cam);
    let (map, coverage, low_confidence) = match cfg.embedding {
        Embedding::Spatial { plane } => (mismatch_spatial(img, &key, plane, cfg.roles), 1.0, 0),
        Embedding::Frequency { selector, tol } => {
            let mut map = mismatch_frequency(img, &key, selector, cfg.roles, tol)?;
            // Saturated blocks may have been clamped at stamping time, so a
            // deviation there is not evidence of tampering.
            let saturated = saturated_blocks(img, cfg.roles.modified());
            let mut low = 0;
            for (flag, sat) in map.flags_mut().iter_mut().zip(saturated) {
                if *flag && sat {
                    *flag = false;
                    low += 1;
                }
            }
            (map, block_coverage(img.width(), img.height()), low)
        }
    };
    let cells = map.flags().len();
    let flagged = map.count();
    let flagged_ratio = if cells == 0 { 0.0 } else { flagged as f64 / cells as f64 };
    let regions = flag_regions(&map);
    let verdict = if flagged == 0 {
        Verdict::Authentic
    } else {
        Verdict::Tampered
    };
    Ok(Verification {
        report: ForgeryReport {
            verdict,
            flagged_ratio,
            regions,
            coverage,
            low_confidence_blocks: low_confidence,
            message: None,
        },
        map,
    })
}

/// Bounding boxes (in pixels) of the 8-connected components of set flags,
/// in scan order of each component's first cell. Boxes lying entirely inside
/// another component's box are omitted since they add no coverage.
pub fn flag_regions(map: &MismatchMap) -> Vec<Rect> {
    let all = component_boxes(map);
    let mut by_area: Vec<usize> = (0..all.len()).collect();
    by_area.sort_by_key(|&i| std::cmp::Reverse(all[i].area()));
    let mut keep = vec![false; all.len()];
    let mut kept: Vec<Rect> = Vec::new();
    for i in by_area {
        let r = all[i];
        if !kept.iter().any(|k| k.intersection(&r) == Some(r)) {
            keep[i] = true;
            kept.push(r);
        }
    }
    all.into_iter()
        .zip(keep)
        .filter_map(|(r, k)| k.then_some(r))
        .collect()
}

/// Bounding box of every 8-connected component, in scan order.
pub fn component_boxes(map: &MismatchMap) -> Vec<Rect> {
    let (cols, rows) = map.grid_dims();
    let (cols, rows) = (cols as usize, rows as usize);
    let flags = map.flags();
    let mut seen = vec![false; flags.len()];
    let mut regions = Vec::new();
    let mut stack = Vec::new();
    for start in 0..flags.len() {
        if !flags[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        stack.push(start);
        let (mut x0, mut y0) = (start % cols, start / cols);
        let (mut x1, mut y1) = (x0, y0);
        while let Some(i) = stack.pop() {
            let (x, y) = (i % cols, i / cols);
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(y);
            y1 = y1.max(y);
            for ny in y.saturating_sub(1)..=(y + 1).min(rows - 1) {
                for nx in x.saturating_sub(1)..=(x + 1).min(cols - 1) {
                    let j = ny * cols + nx;
                    if flags[j] && !seen[j] {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
        }
        let s = map.cell_size();
        regions.push(Rect::new(
            x0 as u32 * s,
            y0 as u32 * s,
            (x1 - x0 + 1) as u32 * s,
            (y1 - y0 + 1) as u32 * s,
        ));
    }
    regions
}
