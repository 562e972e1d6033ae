//! Bit-plane stamping in the pixel domain.
//!
//! Bit `b` of every modified-channel byte is overwritten with bit `b` of the
//! ciphered modifier byte at the same position. The modifier channel is never
//! written, so a verifier can recompute the ciphered plane from the image
//! alone and compare.

use serde::{Deserialize, Serialize};

use crate::cipherstream::{cipher_plane, SymmetricKey};
use crate::error::{Error, Result};
use crate::imageio::{ChannelId, RgbImage};

/// Bit significance, 0 = least significant.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct BitPlane(u8);

impl BitPlane {
    pub const LSB: BitPlane = BitPlane(0);
    /// "Bit no. 4" counted from one, i.e. the bit worth 8.
    pub const FOURTH_BIT: BitPlane = BitPlane(3);
    pub const MSB: BitPlane = BitPlane(7);

    pub fn new(index: u8) -> Result<Self> {
        if index > 7 {
            return Err(Error::InvalidBitPlane(index));
        }
        Ok(Self(index))
    }

    pub fn index(self) -> u8 {
        self.0
    }

    pub fn mask(self) -> u8 {
        1 << self.0
    }
}

impl TryFrom<u8> for BitPlane {
    type Error = Error;

    fn try_from(v: u8) -> Result<Self> {
        Self::new(v)
    }
}

impl From<BitPlane> for u8 {
    fn from(b: BitPlane) -> u8 {
        b.0
    }
}

/// Which channel supplies the SOI (modifier) and which one carries it (modified).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawRoles")]
pub struct ChannelRoles {
    modifier: ChannelId,
    modified: ChannelId,
}

#[derive(Deserialize)]
struct RawRoles {
    modifier: ChannelId,
    modified: ChannelId,
}

impl TryFrom<RawRoles> for ChannelRoles {
    type Error = Error;

    fn try_from(r: RawRoles) -> Result<Self> {
        Self::new(r.modifier, r.modified)
    }
}

impl ChannelRoles {
    pub fn new(modifier: ChannelId, modified: ChannelId) -> Result<Self> {
        if modifier == modified {
            return Err(Error::InvalidRoles);
        }
        Ok(Self { modifier, modified })
    }

    pub fn modifier(self) -> ChannelId {
        self.modifier
    }

    pub fn modified(self) -> ChannelId {
        self.modified
    }

    /// Parses `"blue-red"` style `modifier-modified` pairs.
    pub fn parse(s: &str) -> Result<Self> {
        let (a, b) = s
            .split_once(['/', ','])
            .or_else(|| s.split_once('-'))
            .ok_or_else(|| Error::InvalidConfig(format!("roles {s:?}: expected modifier-modified")))?;
        let strip = |t: &str| {
            t.trim()
                .trim_end_matches("-modifier")
                .trim_end_matches("-modified")
                .to_owned()
        };
        Self::new(strip(a).parse()?, strip(b).parse()?)
    }
}

impl Default for ChannelRoles {
    fn default() -> Self {
        Self {
            modifier: ChannelId::Blue,
            modified: ChannelId::Red,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Granularity {
    Pixel,
    Block8,
}

/// Per-pixel or per-8x8-block verification outcome; `true` marks a mismatch.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MismatchMap {
    width: u32,
    height: u32,
    granularity: Granularity,
    flags: Vec<bool>,
}

impl MismatchMap {
    pub fn new(width: u32, height: u32, granularity: Granularity, flags: Vec<bool>) -> Result<Self> {
        let map = Self {
            width,
            height,
            granularity,
            flags,
        };
        let (cols, rows) = map.grid_dims();
        if map.flags.len() != cols as usize * rows as usize {
            return Err(Error::LengthMismatch {
                expected: cols as usize * rows as usize,
                actual: map.flags.len(),
            });
        }
        Ok(map)
    }

    /// Image width in pixels.
    pub fn width(&self) -> u32 {
        self.width
    }

    /// Image height in pixels.
    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn granularity(&self) -> Granularity {
        self.granularity
    }

    /// Columns and rows of the flag grid.
    pub fn grid_dims(&self) -> (u32, u32) {
        match self.granularity {
            Granularity::Pixel => (self.width, self.height),
            Granularity::Block8 => (self.width / 8, self.height / 8),
        }
    }

    /// Side of one flag cell in pixels.
    pub fn cell_size(&self) -> u32 {
        match self.granularity {
            Granularity::Pixel => 1,
            Granularity::Block8 => 8,
        }
    }

    pub fn flags(&self) -> &[bool] {
        &self.flags
    }

    pub fn flags_mut(&mut self) -> &mut [bool] {
        &mut self.flags
    }

    pub fn get(&self, col: u32, row: u32) -> bool {
        let (cols, _) = self.grid_dims();
        self.flags[row as usize * cols as usize + col as usize]
    }

    pub fn count(&self) -> usize {
        self.flags.iter().filter(|f| **f).count()
    }

    pub fn any(&self) -> bool {
        self.flags.iter().any(|f| *f)
    }
}

/// The ciphered modifier plane for `img` under `key`.
pub(crate) fn ciphered_modifier(img: &RgbImage, key: &SymmetricKey, roles: ChannelRoles) -> Vec<u8> {
    let plane = img.channel_plane(roles.modifier());
    cipher_plane(&plane, key, img.width(), img.height())
        .expect("channel plane length always matches image dimensions")
}

pub fn embed_spatial(img: &RgbImage, key: &SymmetricKey, plane: BitPlane, roles: ChannelRoles) -> RgbImage {
    let soi = ciphered_modifier(img, key, roles);
    let mask = plane.mask();
    let c = roles.modified().index();
    let mut out = img.clone();
    for (px, s) in out.pixels_mut().iter_mut().zip(soi) {
        px[c] = (px[c] & !mask) | (s & mask);
    }
    out
}

pub fn mismatch_spatial(img: &RgbImage, key: &SymmetricKey, plane: BitPlane, roles: ChannelRoles) -> MismatchMap {
    let soi = ciphered_modifier(img, key, roles);
    let mask = plane.mask();
    let c = roles.modified().index();
    let flags = img
        .pixels()
        .iter()
        .zip(soi)
        .map(|(px, s)| (px[c] ^ s) & mask != 0)
        .collect();
    MismatchMap::new(img.width(), img.height(), Granularity::Pixel, flags)
        .expect("one flag per pixel")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cipherstream::{derive_key, CameraIdentity};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn key() -> SymmetricKey {
        derive_key(&CameraIdentity::new("CAM-001").unwrap())
    }

    fn random_image(w: u32, h: u32, seed: u64) -> RgbImage {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        RgbImage::from_fn(w, h, |_, _| rng.gen()).unwrap()
    }

    const PLANES: [BitPlane; 3] = [BitPlane::LSB, BitPlane::FOURTH_BIT, BitPlane::MSB];

    #[test]
    fn plane_bounds() {
        assert!(BitPlane::new(7).is_ok());
        assert!(matches!(BitPlane::new(8), Err(Error::InvalidBitPlane(8))));
        assert_eq!(BitPlane::FOURTH_BIT.mask(), 8);
    }

    #[test]
    fn roles_must_differ() {
        assert!(ChannelRoles::new(ChannelId::Red, ChannelId::Red).is_err());
        assert_eq!(ChannelRoles::parse("blue-red").unwrap(), ChannelRoles::default());
        assert_eq!(
            ChannelRoles::parse("blue-modifier/red-modified").unwrap(),
            ChannelRoles::default()
        );
        let gr = ChannelRoles::parse("green,red").unwrap();
        assert_eq!(gr.modifier(), ChannelId::Green);
        assert!(ChannelRoles::parse("blue").is_err());
    }

    #[test]
    fn only_the_chosen_bit_of_the_modified_channel_changes() {
        let img = random_image(40, 30, 1);
        for plane in PLANES {
            let out = embed_spatial(&img, &key(), plane, ChannelRoles::default());
            assert_eq!(out.channel_plane(ChannelId::Blue), img.channel_plane(ChannelId::Blue));
            assert_eq!(out.channel_plane(ChannelId::Green), img.channel_plane(ChannelId::Green));
            for (a, b) in img.pixels().iter().zip(out.pixels()) {
                let d = (a[0] as i32 - b[0] as i32).abs();
                assert!(d == 0 || d == plane.mask() as i32);
            }
        }
    }

    #[test]
    fn about_half_of_red_bytes_change_under_lsb() {
        let img = random_image(256, 256, 2);
        let out = embed_spatial(&img, &key(), BitPlane::LSB, ChannelRoles::default());
        let changed = img
            .pixels()
            .iter()
            .zip(out.pixels())
            .filter(|(a, b)| a[0] != b[0])
            .count();
        let frac = changed as f64 / img.len() as f64;
        assert!((frac - 0.5).abs() < 0.02, "{frac}");
    }

    #[test]
    fn single_bit_edit_flags_exactly_that_pixel() {
        let img = random_image(16, 16, 3);
        let mut s = embed_spatial(&img, &key(), BitPlane::LSB, ChannelRoles::default());
        let mut p = s.pixel(5, 9);
        p[0] ^= 1;
        s.set_pixel(5, 9, p);
        let map = mismatch_spatial(&s, &key(), BitPlane::LSB, ChannelRoles::default());
        assert_eq!(map.count(), 1);
        assert!(map.get(5, 9));
    }

    #[test]
    fn constant_fill_flags_about_half_inside_and_nothing_outside() {
        let img = random_image(96, 96, 4);
        let mut s = embed_spatial(&img, &key(), BitPlane::LSB, ChannelRoles::default());
        for y in 32..64 {
            for x in 32..64 {
                let mut p = s.pixel(x, y);
                p[0] = 128;
                s.set_pixel(x, y, p);
            }
        }
        let map = mismatch_spatial(&s, &key(), BitPlane::LSB, ChannelRoles::default());
        let mut inside = 0;
        for y in 0..96 {
            for x in 0..96 {
                let in_rect = (32..64).contains(&x) && (32..64).contains(&y);
                if map.get(x, y) {
                    assert!(in_rect);
                    inside += 1;
                }
            }
        }
        // Binomial(1024, 1/2): 99.9% two-sided interval is 512 +/- 53.
        assert!((459..=565).contains(&inside), "{inside}");
    }

    #[test]
    fn block_map_dimensions() {
        let m = MismatchMap::new(20, 17, Granularity::Block8, vec![false; 4]).unwrap();
        assert_eq!(m.grid_dims(), (2, 2));
        assert!(MismatchMap::new(20, 17, Granularity::Block8, vec![false; 6]).is_err());
    }

    #[test]
    fn k_pixel_edits_flag_about_half() {
        // Each replaced pixel flags w.p. 1/2; a k-pixel edit escapes w.p. 2^-k.
        let img = random_image(64, 64, 5);
        let s = embed_spatial(&img, &key(), BitPlane::LSB, ChannelRoles::default());
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for k in [8usize, 64] {
            let trials = 200;
            let mut total = 0usize;
            let mut misses = 0;
            for _ in 0..trials {
                let mut t = s.clone();
                let mut picked = std::collections::HashSet::new();
                while picked.len() < k {
                    picked.insert((rng.gen_range(0..64), rng.gen_range(0..64)));
                }
                for &(x, y) in &picked {
                    let mut p = t.pixel(x, y);
                    // fresh random red and blue bytes
                    loop {
                        let n: [u8; 3] = rng.gen();
                        if n != p {
                            p = n;
                            break;
                        }
                    }
                    t.set_pixel(x, y, p);
                }
                let map = mismatch_spatial(&t, &key(), BitPlane::LSB, ChannelRoles::default());
                for (i, f) in map.flags().iter().enumerate() {
                    if *f {
                        let (x, y) = ((i % 64) as u32, (i / 64) as u32);
                        assert!(picked.contains(&(x, y)));
                    }
                }
                total += map.count();
                misses += usize::from(!map.any());
            }
            let mean = total as f64 / trials as f64;
            assert!((mean / k as f64 - 0.5).abs() < 0.08, "k={k} mean={mean}");
            if k == 64 {
                assert_eq!(misses, 0);
            } else {
                // 2^-8 * 200 < 1 expected miss
                assert!(misses <= 5, "k=8 misses {misses}");
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn stamped_images_verify_and_restamping_is_idempotent(
            seed in any::<u64>(), w in 1u32..40, h in 1u32..40, bit in 0u8..8,
        ) {
            let img = random_image(w, h, seed);
            let plane = BitPlane::new(bit).unwrap();
            let once = embed_spatial(&img, &key(), plane, ChannelRoles::default());
            prop_assert!(!mismatch_spatial(&once, &key(), plane, ChannelRoles::default()).any());
            prop_assert_eq!(embed_spatial(&once, &key(), plane, ChannelRoles::default()), once);
        }
    }
}
