//! Manipulation scenarios with ground truth, and the detection bench that
//! runs stamp -> tamper -> verify over a corpus.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cipherstream::CameraIdentity;
use crate::error::{Error, Result};
use crate::imageio::{jpeg_roundtrip, RgbImage};
use crate::verifier::{stamp, verify, Rect, StampConfig, Verdict};

/// The sixteen manipulations, plus the `Identity` control.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioName {
    Identity,
    CopyMoveInternal,
    SpliceExternal,
    RegionFillConstant,
    TextOverlay,
    Crop,
    Resize,
    Rotate90,
    FlipHorizontal,
    JpegRecompressQ90,
    GaussianNoise,
    GaussianBlur,
    BrightnessPlus10,
    ContrastStretch,
    ChannelSwapRb,
    SinglePixelEdit,
    HistogramEqualize,
}

impl ScenarioName {
    /// All sixteen manipulations, without the control.
    pub const MANIPULATIONS: [ScenarioName; 16] = [
        ScenarioName::CopyMoveInternal,
        ScenarioName::SpliceExternal,
        ScenarioName::RegionFillConstant,
        ScenarioName::TextOverlay,
        ScenarioName::Crop,
        ScenarioName::Resize,
        ScenarioName::Rotate90,
        ScenarioName::FlipHorizontal,
        ScenarioName::JpegRecompressQ90,
        ScenarioName::GaussianNoise,
        ScenarioName::GaussianBlur,
        ScenarioName::BrightnessPlus10,
        ScenarioName::ContrastStretch,
        ScenarioName::ChannelSwapRb,
        ScenarioName::SinglePixelEdit,
        ScenarioName::HistogramEqualize,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioName::Identity => "identity",
            ScenarioName::CopyMoveInternal => "copy_move_internal",
            ScenarioName::SpliceExternal => "splice_external",
            ScenarioName::RegionFillConstant => "region_fill_constant",
            ScenarioName::TextOverlay => "text_overlay",
            ScenarioName::Crop => "crop",
            ScenarioName::Resize => "resize",
            ScenarioName::Rotate90 => "rotate90",
            ScenarioName::FlipHorizontal => "flip_horizontal",
            ScenarioName::JpegRecompressQ90 => "jpeg_recompress_q90",
            ScenarioName::GaussianNoise => "gaussian_noise",
            ScenarioName::GaussianBlur => "gaussian_blur",
            ScenarioName::BrightnessPlus10 => "brightness_plus10",
            ScenarioName::ContrastStretch => "contrast_stretch",
            ScenarioName::ChannelSwapRb => "channel_swap_rb",
            ScenarioName::SinglePixelEdit => "single_pixel_edit",
            ScenarioName::HistogramEqualize => "histogram_equalize",
        }
    }

    /// Detection of this scenario is a coin flip per changed pixel, so a
    /// single run proves nothing either way.
    pub fn is_probabilistic(self) -> bool {
        self == ScenarioName::SinglePixelEdit
    }
}

impl fmt::Display for ScenarioName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScenarioName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.to_ascii_lowercase().replace('-', "_");
        std::iter::once(ScenarioName::Identity)
            .chain(ScenarioName::MANIPULATIONS)
            .find(|n| n.as_str() == norm)
            .ok_or_else(|| Error::UnknownScenario(s.to_owned()))
    }
}

/// A manipulation with its parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TamperKind {
    Identity,
    CopyMoveInternal { src: Rect, dst_x: u32, dst_y: u32 },
    /// Pastes seeded foreign content into `dst`.
    SpliceExternal { dst: Rect },
    RegionFillConstant { rect: Rect, value: u8 },
    TextOverlay { x: u32, y: u32, text: String, scale: u32, color: [u8; 3] },
    Crop { rect: Rect },
    Resize { width: u32, height: u32 },
    Rotate90,
    FlipHorizontal,
    JpegRecompress { quality: u8 },
    GaussianNoise { sigma: f64 },
    GaussianBlur { sigma: f32 },
    /// Adds `delta` to every channel sample, saturating.
    Brightness { delta: i16 },
    /// `v -> 128 + gain (v - 128)`, saturating.
    ContrastStretch { gain: f64 },
    ChannelSwapRb,
    /// Replaces one pixel with a seeded random colour.
    SinglePixelEdit { x: u32, y: u32 },
    HistogramEqualize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TamperScenario {
    pub name: ScenarioName,
    pub kind: TamperKind,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TamperResult {
    pub image: RgbImage,
    /// Changed regions; empty for global manipulations.
    pub truth_region: Vec<Rect>,
    pub dims_changed: bool,
}

/// Ground truth as written next to a tampered image.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TamperTruth {
    pub scenario: TamperScenario,
    pub truth_region: Vec<Rect>,
    pub dims_changed: bool,
    pub width: u32,
    pub height: u32,
}

impl TamperScenario {
    /// Default parameters for `name` on a `width x height` image. Region
    /// positions are drawn from `seed`.
    pub fn preset(name: ScenarioName, width: u32, height: u32, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7a3d_91c4);
        let min_side = width.min(height);
        let need = |min: u32| -> Result<()> {
            if min_side < min {
                Err(Error::ImageTooSmall { width, height, min })
            } else {
                Ok(())
            }
        };
        let mut place = |w: u32, h: u32| -> Rect {
            let x = rng.gen_range(0..=width - w);
            let y = rng.gen_range(0..=height - h);
            Rect::new(x, y, w, h)
        };
        let kind = match name {
            ScenarioName::Identity => TamperKind::Identity,
            ScenarioName::CopyMoveInternal => {
                need(16)?;
                let side = (min_side / 4).clamp(8, 32);
                // src in the left half, dst in the right half: never overlapping.
                let half = width / 2;
                let sx = rng.gen_range(0..=half - side);
                let dx = rng.gen_range(half..=width - side);
                let sy = rng.gen_range(0..=height - side);
                let dy = rng.gen_range(0..=height - side);
                TamperKind::CopyMoveInternal {
                    src: Rect::new(sx, sy, side, side),
                    dst_x: dx,
                    dst_y: dy,
                }
            }
            ScenarioName::SpliceExternal => {
                need(16)?;
                let side = (min_side / 2).min(64);
                TamperKind::SpliceExternal { dst: place(side, side) }
            }
            ScenarioName::RegionFillConstant => {
                need(8)?;
                let side = (min_side / 2).min(32);
                TamperKind::RegionFillConstant {
                    rect: place(side, side),
                    value: 128,
                }
            }
            ScenarioName::TextOverlay => {
                let text = "FAKE 2026".to_owned();
                let scale = 2;
                let (tw, th) = text_extent(&text, scale);
                if tw > width || th > height {
                    return Err(Error::ImageTooSmall { width, height, min: tw.max(th) });
                }
                let r = place(tw, th);
                TamperKind::TextOverlay {
                    x: r.x,
                    y: r.y,
                    text,
                    scale,
                    color: [255, 255, 255],
                }
            }
            ScenarioName::Crop => {
                need(10)?;
                let (mx, my) = (width / 10, height / 10);
                TamperKind::Crop {
                    rect: Rect::new(mx, my, width - 2 * mx, height - 2 * my),
                }
            }
            ScenarioName::Resize => {
                need(4)?;
                TamperKind::Resize {
                    width: width * 3 / 4,
                    height: height * 3 / 4,
                }
            }
            ScenarioName::Rotate90 => TamperKind::Rotate90,
            ScenarioName::FlipHorizontal => TamperKind::FlipHorizontal,
            ScenarioName::JpegRecompressQ90 => TamperKind::JpegRecompress { quality: 90 },
            ScenarioName::GaussianNoise => TamperKind::GaussianNoise { sigma: 2.0 },
            ScenarioName::GaussianBlur => TamperKind::GaussianBlur { sigma: 1.0 },
            ScenarioName::BrightnessPlus10 => TamperKind::Brightness { delta: 10 },
            ScenarioName::ContrastStretch => TamperKind::ContrastStretch { gain: 1.2 },
            ScenarioName::ChannelSwapRb => TamperKind::ChannelSwapRb,
            ScenarioName::SinglePixelEdit => {
                let r = place(1, 1);
                TamperKind::SinglePixelEdit { x: r.x, y: r.y }
            }
            ScenarioName::HistogramEqualize => TamperKind::HistogramEqualize,
        };
        Ok(Self { name, kind, seed })
    }
}

fn check_rect(img: &RgbImage, r: &Rect) -> Result<()> {
    let fits = r.w > 0
        && r.h > 0
        && r.x.checked_add(r.w).is_some_and(|v| v <= img.width())
        && r.y.checked_add(r.h).is_some_and(|v| v <= img.height());
    if fits {
        Ok(())
    } else {
        Err(Error::RegionOutOfBounds(r.to_string(), img.width(), img.height()))
    }
}

fn map_samples(img: &RgbImage, f: impl Fn(u8) -> u8) -> RgbImage {
    let mut out = img.clone();
    for p in out.pixels_mut() {
        *p = p.map(&f);
    }
    out
}

fn to_image_crate(img: &RgbImage) -> image::RgbImage {
    image::RgbImage::from_raw(img.width(), img.height(), img.pixels().as_flattened().to_vec())
        .expect("buffer length matches dimensions")
}

fn from_image_crate(buf: &image::RgbImage, like: &RgbImage) -> Result<RgbImage> {
    let pixels = buf.pixels().map(|p| p.0).collect();
    let mut out = RgbImage::from_pixels(buf.width(), buf.height(), pixels)?;
    *out.metadata_mut() = like.metadata().clone();
    Ok(out)
}

/// Apply a manipulation. Metadata (including the photo ID) is carried over,
/// the way an editor would keep it.
pub fn apply_tamper(img: &RgbImage, s: &TamperScenario) -> Result<TamperResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
    let (w, h) = (img.width(), img.height());
    let mut truth = Vec::new();
    let image = match &s.kind {
        TamperKind::Identity => img.clone(),
        TamperKind::CopyMoveInternal { src, dst_x, dst_y } => {
            let dst = Rect::new(*dst_x, *dst_y, src.w, src.h);
            check_rect(img, src)?;
            check_rect(img, &dst)?;
            let patch = img.sub_image(src.x, src.y, src.w, src.h)?;
            let mut out = img.clone();
            for y in 0..src.h {
                for x in 0..src.w {
                    out.set_pixel(dst.x + x, dst.y + y, patch.pixel(x, y));
                }
            }
            truth.push(dst);
            out
        }
        TamperKind::SpliceExternal { dst } => {
            check_rect(img, dst)?;
            let donor = crate::synth::value_noise_image(dst.w, dst.h, s.seed);
            let mut out = img.clone();
            for y in 0..dst.h {
                for x in 0..dst.w {
                    out.set_pixel(dst.x + x, dst.y + y, donor.pixel(x, y));
                }
            }
            truth.push(*dst);
            out
        }
        TamperKind::RegionFillConstant { rect, value } => {
            check_rect(img, rect)?;
            let mut out = img.clone();
            for y in rect.y..rect.bottom() {
                for x in rect.x..rect.right() {
                    out.set_pixel(x, y, [*value; 3]);
                }
            }
            truth.push(*rect);
            out
        }
        TamperKind::TextOverlay { x, y, text, scale, color } => {
            let (tw, th) = text_extent(text, *scale);
            let area = Rect::new(*x, *y, tw, th);
            check_rect(img, &area)?;
            let mut out = img.clone();
            draw_text(&mut out, *x, *y, text, *scale, *color);
            truth.push(area);
            out
        }
        TamperKind::Crop { rect } => {
            check_rect(img, rect)?;
            let mut out = img.sub_image(rect.x, rect.y, rect.w, rect.h)?;
            *out.metadata_mut() = img.metadata().clone();
            out
        }
        TamperKind::Resize { width, height } => {
            if *width == 0 || *height == 0 {
                return Err(Error::InvalidConfig("resize target must be at least 1x1".into()));
            }
            let buf = image::imageops::resize(
                &to_image_crate(img),
                *width,
                *height,
                image::imageops::FilterType::Triangle,
            );
            from_image_crate(&buf, img)?
        }
        TamperKind::Rotate90 => {
            // clockwise: new (x, y) takes old (y, h - 1 - x)
            let mut out = RgbImage::from_fn(h, w, |x, y| img.pixel(y, h - 1 - x))?;
            *out.metadata_mut() = img.metadata().clone();
            out
        }
        TamperKind::FlipHorizontal => {
            let mut out = RgbImage::from_fn(w, h, |x, y| img.pixel(w - 1 - x, y))?;
            *out.metadata_mut() = img.metadata().clone();
            out
        }
        TamperKind::JpegRecompress { quality } => jpeg_roundtrip(img, (*quality).clamp(1, 100))?,
        TamperKind::GaussianNoise { sigma } => {
            let normal = Normal::new(0.0, *sigma)
                .map_err(|e| Error::InvalidConfig(format!("noise sigma: {e}")))?;
            let mut out = img.clone();
            for p in out.pixels_mut() {
                for c in p.iter_mut() {
                    let v = *c as f64 + normal.sample(&mut rng);
                    *c = v.round().clamp(0.0, 255.0) as u8;
                }
            }
            out
        }
        TamperKind::GaussianBlur { sigma } => {
            if !(*sigma > 0.0) {
                return Err(Error::InvalidConfig("blur sigma must be positive".into()));
            }
            let buf = image::imageops::blur(&to_image_crate(img), *sigma);
            from_image_crate(&buf, img)?
        }
        TamperKind::Brightness { delta } => {
            let d = *delta as i32;
            map_samples(img, |v| (v as i32 + d).clamp(0, 255) as u8)
        }
        TamperKind::ContrastStretch { gain } => {
            let g = *gain;
            map_samples(img, |v| (128.0 + g * (v as f64 - 128.0)).round().clamp(0.0, 255.0) as u8)
        }
        TamperKind::ChannelSwapRb => {
            let mut out = img.clone();
            for p in out.pixels_mut() {
                p.swap(0, 2);
            }
            out
        }
        TamperKind::SinglePixelEdit { x, y } => {
            let r = Rect::new(*x, *y, 1, 1);
            check_rect(img, &r)?;
            let old = img.pixel(*x, *y);
            let new = loop {
                let c: [u8; 3] = rng.gen();
                if c != old {
                    break c;
                }
            };
            let mut out = img.clone();
            out.set_pixel(*x, *y, new);
            truth.push(r);
            out
        }
        TamperKind::HistogramEqualize => {
            let mut out = img.clone();
            for c in 0..3 {
                let mut hist = [0u64; 256];
                for p in img.pixels() {
                    hist[p[c] as usize] += 1;
                }
                let total = img.len() as u64;
                let mut cdf = [0u64; 256];
                let mut acc = 0;
                for (i, n) in hist.iter().enumerate() {
                    acc += n;
                    cdf[i] = acc;
                }
                let cdf_min = cdf.iter().copied().find(|v| *v > 0).unwrap_or(0);
                let denom = (total - cdf_min).max(1) as f64;
                let lut: Vec<u8> = cdf
                    .iter()
                    .map(|&v| ((v.saturating_sub(cdf_min)) as f64 / denom * 255.0).round() as u8)
                    .collect();
                for p in out.pixels_mut() {
                    p[c] = lut[p[c] as usize];
                }
            }
            out
        }
    };
    let dims_changed = !image.same_dims(img);
    if dims_changed {
        truth.clear();
    }
    Ok(TamperResult {
        image,
        truth_region: truth,
        dims_changed,
    })
}

// 3x5 glyphs, rows top to bottom.
const GLYPHS: &[(char, &str)] = &[
    ('A', "010101111101101"),
    ('B', "110101110101110"),
    ('C', "011100100100011"),
    ('D', "110101101101110"),
    ('E', "111100110100111"),
    ('F', "111100110100100"),
    ('G', "011100101101011"),
    ('H', "101101111101101"),
    ('I', "111010010010111"),
    ('J', "001001001101010"),
    ('K', "101101110101101"),
    ('L', "100100100100111"),
    ('M', "101111111101101"),
    ('N', "110101101101101"),
    ('O', "010101101101010"),
    ('P', "110101110100100"),
    ('Q', "010101101110011"),
    ('R', "110101110101101"),
    ('S', "011100010001110"),
    ('T', "111010010010010"),
    ('U', "101101101101111"),
    ('V', "101101101101010"),
    ('W', "101101111111101"),
    ('X', "101101010101101"),
    ('Y', "101101010010010"),
    ('Z', "111001010100111"),
    ('0', "111101101101111"),
    ('1', "010110010010111"),
    ('2', "110001010100111"),
    ('3', "110001010001110"),
    ('4', "101101111001001"),
    ('5', "111100110001110"),
    ('6', "011100111101111"),
    ('7', "111001010010010"),
    ('8', "111101111101111"),
    ('9', "111101111001110"),
];

/// Pixel size of `text` rendered at `scale` (4 columns per glyph including spacing).
pub fn text_extent(text: &str, scale: u32) -> (u32, u32) {
    let n = text.chars().count() as u32;
    let w = (n * 4).saturating_sub(1).max(1) * scale;
    (w, 5 * scale)
}

fn draw_text(img: &mut RgbImage, x0: u32, y0: u32, text: &str, scale: u32, color: [u8; 3]) {
    for (i, ch) in text.chars().enumerate() {
        let Some((_, bits)) = GLYPHS.iter().find(|(g, _)| *g == ch.to_ascii_uppercase()) else {
            continue;
        };
        for (k, b) in bits.bytes().enumerate() {
            if b != b'1' {
                continue;
            }
            let (gx, gy) = ((k % 3) as u32, (k / 3) as u32);
            for dy in 0..scale {
                for dx in 0..scale {
                    let x = x0 + (i as u32 * 4 + gx) * scale + dx;
                    let y = y0 + gy * scale + dy;
                    if x < img.width() && y < img.height() {
                        img.set_pixel(x, y, color);
                    }
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectionRow {
    pub image: String,
    pub technique: String,
    pub scenario: ScenarioName,
    pub verdict: Verdict,
    pub flagged_ratio: f64,
    /// IoU of the reported regions' bounding box against the truth's, when
    /// the manipulation is local and kept the dimensions.
    pub iou: Option<f64>,
    pub runtime_ms: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DetectionTable {
    pub rows: Vec<DetectionRow>,
}

impl DetectionTable {
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["image", "technique", "scenario", "verdict", "flagged_ratio", "iou", "runtime_ms"])
            .map_err(|e| Error::Encode(e.to_string()))?;
        for r in &self.rows {
            w.write_record([
                r.image.clone(),
                r.technique.clone(),
                r.scenario.to_string(),
                r.verdict.to_string(),
                format!("{:.6}", r.flagged_ratio),
                r.iou.map(|v| format!("{v:.4}")).unwrap_or_default(),
                format!("{:.3}", r.runtime_ms),
            ])
            .map_err(|e| Error::Encode(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Encode(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Encode(e.to_string()))
    }

    /// Fraction of matching rows with a `Tampered` verdict.
    pub fn detection_rate(&self, filter: impl Fn(&DetectionRow) -> bool) -> Option<f64> {
        let rows: Vec<_> = self.rows.iter().filter(|r| filter(r)).collect();
        if rows.is_empty() {
            return None;
        }
        let hits = rows.iter().filter(|r| r.verdict == Verdict::Tampered).count();
        Some(hits as f64 / rows.len() as f64)
    }
}

/// Camera used for bench stamping.
pub const BENCH_CAMERA: &str = "BENCH-CAM-0001";

/// Stamp, tamper and verify every (image, technique, scenario) triple.
/// Component failures are recorded in the row, not propagated.
pub fn run_detection_bench(
    images: &[(String, RgbImage)],
    techniques: &[(String, StampConfig)],
    scenarios: &[ScenarioName],
    seed: u64,
) -> Result<DetectionTable> {
    if images.is_empty() || techniques.is_empty() || scenarios.is_empty() {
        return Err(Error::InvalidConfig("bench needs images, techniques and scenarios".into()));
    }
    let cam = CameraIdentity::new(BENCH_CAMERA)?;
    let mut keys = Vec::new();
    for i in 0..images.len() {
        for t in 0..techniques.len() {
            for s in 0..scenarios.len() {
                keys.push((i, t, s));
            }
        }
    }
    let rows = keys
        .par_iter()
        .map(|&(i, t, s)| {
            let (img_name, img) = &images[i];
            let (tech_name, cfg) = &techniques[t];
            let scenario = scenarios[s];
            let start = Instant::now();
            let outcome = (|| -> Result<(Verdict, f64, Option<f64>)> {
                let stamped = stamp(img, &cam, cfg)?;
                let sc = TamperScenario::preset(scenario, img.width(), img.height(), seed.wrapping_add(i as u64))?;
                let tampered = apply_tamper(&stamped, &sc)?;
                let report = verify(&tampered.image, &cam, cfg);
                if report.verdict == Verdict::Error {
                    return Err(Error::InvalidConfig(report.message.unwrap_or_default()));
                }
                let iou = match (tampered.dims_changed, Rect::bounding(&tampered.truth_region)) {
                    (false, Some(truth)) => {
                        Some(Rect::bounding(&report.regions).map_or(0.0, |found| found.iou(&truth)))
                    }
                    _ => None,
                };
                Ok((report.verdict, report.flagged_ratio, iou))
            })();
            let runtime_ms = start.elapsed().as_secs_f64() * 1e3;
            let (verdict, flagged_ratio, iou, message) = match outcome {
                Ok((v, r, iou)) => (v, r, iou, None),
                Err(e) => (Verdict::Error, 0.0, None, Some(e.to_string())),
            };
            DetectionRow {
                image: img_name.clone(),
                technique: tech_name.clone(),
                scenario,
                verdict,
                flagged_ratio,
                iou,
                runtime_ms,
                message,
            }
        })
        .collect();
    Ok(DetectionTable { rows })
}
