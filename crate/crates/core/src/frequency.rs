//! Coefficient stamping in the 8x8 block DCT domain.
//!
//! For every complete 8x8 block, one orthonormal DCT-II coefficient of the
//! modified channel is replaced by the same coefficient of the ciphered
//! modifier block, then the block is transformed back, clamped to [0, 255]
//! and rounded. Trailing rows and columns that do not fill a block are left
//! alone.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::cipherstream::SymmetricKey;
use crate::error::{Error, Result};
use crate::imageio::{ChannelId, RgbImage};
use crate::spatial::{ciphered_modifier, ChannelRoles, Granularity, MismatchMap};

pub const BLOCK: usize = 8;

/// Default verification tolerance: above any rounding perturbation an
/// unsaturated block can produce on a single coefficient.
pub const DEFAULT_TOLERANCE: f64 = 8.0;

/// One-based (row, col) position inside an 8x8 coefficient block.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct CoeffSelector {
    row: u8,
    col: u8,
}

impl CoeffSelector {
    pub const DC: CoeffSelector = CoeffSelector { row: 1, col: 1 };
    pub const FIRST_AC: CoeffSelector = CoeffSelector { row: 1, col: 2 };
    pub const MID_AC: CoeffSelector = CoeffSelector { row: 4, col: 4 };
    pub const LAST_AC: CoeffSelector = CoeffSelector { row: 8, col: 8 };

    pub fn new(row: u8, col: u8) -> Result<Self> {
        if !(1..=8).contains(&row) || !(1..=8).contains(&col) {
            return Err(Error::InvalidSelector { row, col });
        }
        Ok(Self { row, col })
    }

    pub fn row(self) -> u8 {
        self.row
    }

    pub fn col(self) -> u8 {
        self.col
    }

    fn zero_based(self) -> (usize, usize) {
        (self.row as usize - 1, self.col as usize - 1)
    }

    /// Wire name of a preset, if this is one.
    pub fn preset_name(self) -> Option<&'static str> {
        match self {
            Self::DC => Some("dc"),
            Self::FIRST_AC => Some("first_ac"),
            Self::MID_AC => Some("mid_ac"),
            Self::LAST_AC => Some("last_ac"),
            _ => None,
        }
    }
}

impl fmt::Display for CoeffSelector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.preset_name() {
            Some(name) => f.write_str(name),
            None => write!(f, "{},{}", self.row, self.col),
        }
    }
}

impl FromStr for CoeffSelector {
    type Err = Error;

    /// Accepts preset names (`dc`, `first_ac`/`first-ac`, ...) or `row,col`.
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "dc" => Ok(Self::DC),
            "first_ac" => Ok(Self::FIRST_AC),
            "mid_ac" => Ok(Self::MID_AC),
            "last_ac" => Ok(Self::LAST_AC),
            other => {
                let (r, c) = other
                    .split_once(',')
                    .ok_or_else(|| Error::InvalidConfig(format!("unknown selector {s:?}")))?;
                let parse = |t: &str| {
                    t.trim()
                        .parse::<u8>()
                        .map_err(|_| Error::InvalidConfig(format!("unknown selector {s:?}")))
                };
                Self::new(parse(r)?, parse(c)?)
            }
        }
    }
}

impl Serialize for CoeffSelector {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for CoeffSelector {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// 8x8 DCT coefficients, indexed `[row][col]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DctBlock(pub [[f64; BLOCK]; BLOCK]);

impl DctBlock {
    pub fn get(&self, sel: CoeffSelector) -> f64 {
        let (r, c) = sel.zero_based();
        self.0[r][c]
    }

    pub fn set(&mut self, sel: CoeffSelector, v: f64) {
        let (r, c) = sel.zero_based();
        self.0[r][c] = v;
    }
}

/// `basis[u][x] = a(u) * cos((2x + 1) u pi / 16)`
fn basis() -> &'static [[f64; BLOCK]; BLOCK] {
    static BASIS: OnceLock<[[f64; BLOCK]; BLOCK]> = OnceLock::new();
    BASIS.get_or_init(|| {
        let mut m = [[0.0; BLOCK]; BLOCK];
        for (u, row) in m.iter_mut().enumerate() {
            let a = if u == 0 { (1.0 / 8.0f64).sqrt() } else { (2.0 / 8.0f64).sqrt() };
            for (x, v) in row.iter_mut().enumerate() {
                *v = a * ((2 * x + 1) as f64 * u as f64 * PI / 16.0).cos();
            }
        }
        m
    })
}

/// Orthonormal 2-D DCT-II of an 8x8 sample block (`samples[row][col]`).
pub fn dct8_forward(samples: &[[f64; BLOCK]; BLOCK]) -> DctBlock {
    let m = basis();
    // rows first: t[y][v] = sum_x samples[y][x] m[v][x]
    let mut t = [[0.0; BLOCK]; BLOCK];
    for y in 0..BLOCK {
        for v in 0..BLOCK {
            t[y][v] = (0..BLOCK).map(|x| samples[y][x] * m[v][x]).sum();
        }
    }
    let mut out = [[0.0; BLOCK]; BLOCK];
    for u in 0..BLOCK {
        for v in 0..BLOCK {
            out[u][v] = (0..BLOCK).map(|y| m[u][y] * t[y][v]).sum();
        }
    }
    DctBlock(out)
}

/// Exact inverse of [`dct8_forward`]; no clamping.
pub fn dct8_inverse(coeffs: &DctBlock) -> [[f64; BLOCK]; BLOCK] {
    let m = basis();
    let c = &coeffs.0;
    let mut t = [[0.0; BLOCK]; BLOCK];
    for u in 0..BLOCK {
        for x in 0..BLOCK {
            t[u][x] = (0..BLOCK).map(|v| c[u][v] * m[v][x]).sum();
        }
    }
    let mut out = [[0.0; BLOCK]; BLOCK];
    for y in 0..BLOCK {
        for x in 0..BLOCK {
            out[y][x] = (0..BLOCK).map(|u| m[u][y] * t[u][x]).sum();
        }
    }
    out
}

fn check_size(img: &RgbImage) -> Result<()> {
    if img.width() < BLOCK as u32 || img.height() < BLOCK as u32 {
        return Err(Error::ImageTooSmall {
            width: img.width(),
            height: img.height(),
            min: BLOCK as u32,
        });
    }
    Ok(())
}

fn read_block(plane: &[u8], width: usize, bx: usize, by: usize) -> [[f64; BLOCK]; BLOCK] {
    let mut b = [[0.0; BLOCK]; BLOCK];
    for (y, row) in b.iter_mut().enumerate() {
        let start = (by * BLOCK + y) * width + bx * BLOCK;
        for (x, v) in row.iter_mut().enumerate() {
            *v = plane[start + x] as f64;
        }
    }
    b
}

/// Fraction of the image covered by complete 8x8 blocks.
pub fn block_coverage(width: u32, height: u32) -> f64 {
    let covered = (width / 8 * 8) as f64 * (height / 8 * 8) as f64;
    covered / (width as f64 * height as f64)
}

/// Result of a frequency-domain stamp, with the blocks whose write-back saturated.
#[derive(Clone, Debug)]
pub struct FrequencyStamp {
    pub image: RgbImage,
    /// Row-major block flags: `true` where clamping changed at least one sample.
    pub clamped: Vec<bool>,
}

pub fn embed_frequency(
    img: &RgbImage,
    key: &SymmetricKey,
    sel: CoeffSelector,
    roles: ChannelRoles,
) -> Result<RgbImage> {
    embed_frequency_detailed(img, key, sel, roles).map(|s| s.image)
}

pub fn embed_frequency_detailed(
    img: &RgbImage,
    key: &SymmetricKey,
    sel: CoeffSelector,
    roles: ChannelRoles,
) -> Result<FrequencyStamp> {
    check_size(img)?;
    let w = img.width() as usize;
    let (cols, rows) = (w / BLOCK, img.height() as usize / BLOCK);
    let soi = ciphered_modifier(img, key, roles);
    let mut modified = img.channel_plane(roles.modified());
    let mut clamped = vec![false; cols * rows];

    for by in 0..rows {
        for bx in 0..cols {
            let mut c_mod = dct8_forward(&read_block(&modified, w, bx, by));
            let c_cip = dct8_forward(&read_block(&soi, w, bx, by));
            c_mod.set(sel, c_cip.get(sel));
            let back = dct8_inverse(&c_mod);
            for (y, row) in back.iter().enumerate() {
                let start = (by * BLOCK + y) * w + bx * BLOCK;
                for (x, &v) in row.iter().enumerate() {
                    if !(0.0..=255.0).contains(&v) {
                        clamped[by * cols + bx] = true;
                    }
                    modified[start + x] = v.clamp(0.0, 255.0).round() as u8;
                }
            }
        }
    }

    let mut image = img.clone();
    image.set_channel_plane(roles.modified(), &modified)?;
    Ok(FrequencyStamp { image, clamped })
}

/// Per-block `|modified[sel] - ciphered[sel]|`, row-major over complete blocks.
pub fn coefficient_deviations(
    img: &RgbImage,
    key: &SymmetricKey,
    sel: CoeffSelector,
    roles: ChannelRoles,
) -> Result<Vec<f64>> {
    check_size(img)?;
    let w = img.width() as usize;
    let (cols, rows) = (w / BLOCK, img.height() as usize / BLOCK);
    let soi = ciphered_modifier(img, key, roles);
    let modified = img.channel_plane(roles.modified());
    let mut out = Vec::with_capacity(cols * rows);
    for by in 0..rows {
        for bx in 0..cols {
            let a = dct8_forward(&read_block(&modified, w, bx, by)).get(sel);
            let b = dct8_forward(&read_block(&soi, w, bx, by)).get(sel);
            out.push((a - b).abs());
        }
    }
    Ok(out)
}

pub fn mismatch_frequency(
    img: &RgbImage,
    key: &SymmetricKey,
    sel: CoeffSelector,
    roles: ChannelRoles,
    tol: f64,
) -> Result<MismatchMap> {
    if tol.is_nan() || tol < 0.0 {
        return Err(Error::InvalidConfig(format!("tolerance must be >= 0, got {tol}")));
    }
    let flags = coefficient_deviations(img, key, sel, roles)?
        .into_iter()
        .map(|d| d > tol)
        .collect();
    MismatchMap::new(img.width(), img.height(), Granularity::Block8, flags)
}

/// Row-major block flags: `true` where the channel holds a 0 or 255 sample.
pub fn saturated_blocks(img: &RgbImage, ch: ChannelId) -> Vec<bool> {
    let w = img.width() as usize;
    let (cols, rows) = (w / BLOCK, img.height() as usize / BLOCK);
    let plane = img.channel_plane(ch);
    let mut out = Vec::with_capacity(cols * rows);
    for by in 0..rows {
        for bx in 0..cols {
            let sat = (0..BLOCK).any(|y| {
                let start = (by * BLOCK + y) * w + bx * BLOCK;
                plane[start..start + BLOCK].iter().any(|&v| v == 0 || v == 255)
            });
            out.push(sat);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cipherstream::{derive_key, keystream, CameraIdentity};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// The DCT-II definition summed directly, O(N^4).
    fn brute_dct(s: &[[f64; 8]; 8]) -> [[f64; 8]; 8] {
        let a = |k: usize| if k == 0 { (0.125f64).sqrt() } else { (0.25f64).sqrt() };
        let mut out = [[0.0; 8]; 8];
        for u in 0..8 {
            for v in 0..8 {
                let mut acc = 0.0;
                for y in 0..8 {
                    for x in 0..8 {
                        acc += s[y][x]
                            * ((2.0 * y as f64 + 1.0) * u as f64 * PI / 16.0).cos()
                            * ((2.0 * x as f64 + 1.0) * v as f64 * PI / 16.0).cos();
                    }
                }
                out[u][v] = a(u) * a(v) * acc;
            }
        }
        out
    }

    fn random_block(rng: &mut ChaCha8Rng) -> [[f64; 8]; 8] {
        let mut b = [[0.0; 8]; 8];
        for row in &mut b {
            for v in row.iter_mut() {
                *v = rng.gen_range(0..=255) as f64;
            }
        }
        b
    }

    fn key() -> SymmetricKey {
        derive_key(&CameraIdentity::new("CAM-001").unwrap())
    }

    fn smooth_image(w: u32, h: u32, seed: u64) -> RgbImage {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (a, b, c): (f64, f64, f64) = (rng.gen_range(0.01..0.1), rng.gen_range(0.01..0.1), rng.gen());
        RgbImage::from_fn(w, h, |x, y| {
            let t = (x as f64 * a + c * 6.0).sin() * (y as f64 * b).cos();
            let n: i32 = rng.gen_range(-6..=6);
            let v = |base: f64| (base + 60.0 * t + n as f64).clamp(20.0, 235.0) as u8;
            [v(128.0), v(110.0), v(140.0)]
        })
        .unwrap()
    }

    #[test]
    fn constant_block_has_only_dc() {
        let c = dct8_forward(&[[100.0; 8]; 8]);
        assert!((c.0[0][0] - 800.0).abs() < 1e-9);
        for (u, row) in c.0.iter().enumerate() {
            for (v, x) in row.iter().enumerate() {
                if (u, v) != (0, 0) {
                    assert!(x.abs() < 1e-9);
                }
            }
        }
        assert_eq!(dct8_forward(&[[0.0; 8]; 8]).0, [[0.0; 8]; 8]);
    }

    #[test]
    fn matches_brute_force_definition() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let b = random_block(&mut rng);
            let fast = dct8_forward(&b);
            let slow = brute_dct(&b);
            for u in 0..8 {
                for v in 0..8 {
                    assert!((fast.0[u][v] - slow[u][v]).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn inverse_of_dc_only_is_constant() {
        let mut c = DctBlock([[0.0; 8]; 8]);
        c.set(CoeffSelector::DC, 800.0);
        for row in dct8_inverse(&c) {
            for v in row {
                assert!((v - 100.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn inverse_of_first_ac_is_its_basis_function() {
        // (1,2): constant down rows, one half-cosine across columns.
        let mut c = DctBlock([[0.0; 8]; 8]);
        c.set(CoeffSelector::FIRST_AC, 1.0);
        let s = dct8_inverse(&c);
        for (y, row) in s.iter().enumerate() {
            for (x, v) in row.iter().enumerate() {
                let expected = (1.0 / 8.0f64).sqrt()
                    * (2.0 / 8.0f64).sqrt()
                    * ((2 * x + 1) as f64 * PI / 16.0).cos();
                assert!((v - expected).abs() < 1e-12, "({y},{x})");
            }
        }
    }

    #[test]
    fn selector_parsing() {
        assert_eq!("mid-ac".parse::<CoeffSelector>().unwrap(), CoeffSelector::MID_AC);
        assert_eq!("last_ac".parse::<CoeffSelector>().unwrap(), CoeffSelector::LAST_AC);
        assert_eq!("2,3".parse::<CoeffSelector>().unwrap(), CoeffSelector::new(2, 3).unwrap());
        assert!("9,1".parse::<CoeffSelector>().is_err());
        assert!("mid".parse::<CoeffSelector>().is_err());
        assert_eq!(serde_json::to_string(&CoeffSelector::FIRST_AC).unwrap(), "\"first_ac\"");
    }

    #[test]
    fn too_small_images_are_rejected() {
        let img = RgbImage::new(7, 20).unwrap();
        assert!(matches!(
            embed_frequency(&img, &key(), CoeffSelector::DC, ChannelRoles::default()),
            Err(Error::ImageTooSmall { .. })
        ));
        assert!(mismatch_frequency(&img, &key(), CoeffSelector::DC, ChannelRoles::default(), 8.0).is_err());
    }

    #[test]
    fn only_the_modified_channel_changes_and_edges_are_kept() {
        let img = smooth_image(37, 29, 1);
        let out = embed_frequency(&img, &key(), CoeffSelector::FIRST_AC, ChannelRoles::default()).unwrap();
        assert_eq!(out.channel_plane(ChannelId::Green), img.channel_plane(ChannelId::Green));
        assert_eq!(out.channel_plane(ChannelId::Blue), img.channel_plane(ChannelId::Blue));
        assert_ne!(out.channel_plane(ChannelId::Red), img.channel_plane(ChannelId::Red));
        for y in 0..29 {
            for x in 0..37 {
                if x >= 32 || y >= 24 {
                    assert_eq!(out.pixel(x, y), img.pixel(x, y));
                }
            }
        }
    }

    #[test]
    fn dc_substitution_moves_block_means_to_the_keystream_means() {
        // With an all-zero modifier the ciphered plane is the raw keystream,
        // so each red block mean becomes that block's keystream mean
        // (barring clamping, which cannot occur for a constant input block).
        let img = RgbImage::from_fn(64, 64, |_, _| [40, 90, 0]).unwrap();
        let out = embed_frequency(&img, &key(), CoeffSelector::DC, ChannelRoles::default()).unwrap();
        let ks = keystream(&key(), 64, 64, 64 * 64);
        let red = out.channel_plane(ChannelId::Red);
        let mut overall = 0.0;
        for by in 0..8 {
            for bx in 0..8 {
                let mean = |p: &[u8]| {
                    let mut s = 0.0;
                    for y in 0..8 {
                        for x in 0..8 {
                            s += p[(by * 8 + y) * 64 + bx * 8 + x] as f64;
                        }
                    }
                    s / 64.0
                };
                assert!((mean(&red) - mean(&ks)).abs() <= 0.5);
                overall += mean(&red);
            }
        }
        assert!((overall / 64.0 - 127.5).abs() < 6.0);
    }

    #[test]
    fn fresh_stamps_stay_within_rounding_bound() {
        for sel in [CoeffSelector::FIRST_AC, CoeffSelector::MID_AC, CoeffSelector::LAST_AC, CoeffSelector::DC] {
            let img = smooth_image(96, 80, 3);
            let stamp = embed_frequency_detailed(&img, &key(), sel, ChannelRoles::default()).unwrap();
            let dev = coefficient_deviations(&stamp.image, &key(), sel, ChannelRoles::default()).unwrap();
            for (d, clamped) in dev.iter().zip(&stamp.clamped) {
                if !clamped {
                    assert!(*d <= DEFAULT_TOLERANCE, "{sel}: {d}");
                }
            }
            let map = mismatch_frequency(&stamp.image, &key(), sel, ChannelRoles::default(), DEFAULT_TOLERANCE).unwrap();
            let unclamped_flags = map
                .flags()
                .iter()
                .zip(&stamp.clamped)
                .filter(|(f, c)| **f && !**c)
                .count();
            assert_eq!(unclamped_flags, 0);
        }
    }

    #[test]
    fn foreign_patch_is_flagged() {
        let img = smooth_image(128, 128, 4);
        let sel = CoeffSelector::MID_AC;
        let mut s = embed_frequency(&img, &key(), sel, ChannelRoles::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let foreign = smooth_image(64, 64, 5);
        for y in 0..64 {
            for x in 0..64 {
                let mut p = foreign.pixel(x, y);
                p[1] = rng.gen();
                s.set_pixel(x + 32, y + 32, p);
            }
        }
        let map = mismatch_frequency(&s, &key(), sel, ChannelRoles::default(), DEFAULT_TOLERANCE).unwrap();
        let mut inside = 0;
        for by in 4..12 {
            for bx in 4..12 {
                inside += usize::from(map.get(bx, by));
            }
        }
        // A coefficient of a uniform-noise block has sd ~74, so |d| <= 8 has
        // probability ~0.09 per block; expect ~58 of 64.
        assert!(inside >= 50, "{inside}/64");
    }

    #[test]
    fn infinite_tolerance_flags_nothing() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let img = RgbImage::from_fn(40, 40, |_, _| rng.gen()).unwrap();
        let map = mismatch_frequency(&img, &key(), CoeffSelector::DC, ChannelRoles::default(), f64::INFINITY).unwrap();
        assert!(!map.any());
        assert!(mismatch_frequency(&img, &key(), CoeffSelector::DC, ChannelRoles::default(), -1.0).is_err());
    }

    #[test]
    fn coverage_fraction() {
        assert_eq!(block_coverage(64, 64), 1.0);
        assert!((block_coverage(267, 266) - (264.0 * 264.0) / (267.0 * 266.0)).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn parseval_and_inversion(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let b = random_block(&mut rng);
            let c = dct8_forward(&b);
            let e_s: f64 = b.iter().flatten().map(|v| v * v).sum();
            let e_c: f64 = c.0.iter().flatten().map(|v| v * v).sum();
            prop_assert!((e_s - e_c).abs() <= 1e-6 * e_s.max(1.0));
            let back = dct8_inverse(&c);
            for y in 0..8 {
                for x in 0..8 {
                    prop_assert!((back[y][x] - b[y][x]).abs() < 1e-9);
                }
            }
        }
    }
}
