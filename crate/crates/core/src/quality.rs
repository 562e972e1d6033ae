//! Full-reference image quality indices: MAE, MSE, PSNR, SSIM and UIQI.
//!
//! Every index is computed per channel sample and averaged over R, G and B.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::imageio::{ChannelId, RgbImage};

const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;
const DYNAMIC_RANGE: f64 = 255.0;
const UIQI_WINDOW: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QualityReport {
    pub mae: f64,
    pub mse: f64,
    #[serde(serialize_with = "ser_db", deserialize_with = "de_db")]
    pub psnr: f64,
    pub ssim: f64,
    pub uiqi: f64,
}

impl QualityReport {
    pub fn compute(a: &RgbImage, b: &RgbImage) -> Result<Self> {
        Ok(Self {
            mae: mae(a, b)?,
            mse: mse(a, b)?,
            psnr: psnr(a, b)?,
            ssim: ssim(a, b)?,
            uiqi: uiqi(a, b)?,
        })
    }
}

pub(crate) fn ser_db<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_infinite() && *v > 0.0 {
        s.serialize_str("inf")
    } else {
        s.serialize_f64(*v)
    }
}

pub(crate) fn de_db<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Db {
        Num(f64),
        Text(String),
    }
    match Db::deserialize(d)? {
        Db::Num(v) => Ok(v),
        Db::Text(t) if t == "inf" => Ok(f64::INFINITY),
        Db::Text(t) => Err(serde::de::Error::custom(format!("bad dB value {t:?}"))),
    }
}

/// An f64 that round-trips `+inf` through JSON as `"inf"`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub(crate) struct Db(
    #[serde(serialize_with = "ser_db", deserialize_with = "de_db")] pub f64,
);

fn check_dims(a: &RgbImage, b: &RgbImage) -> Result<()> {
    if !a.same_dims(b) {
        return Err(Error::DimensionMismatch(a.width(), a.height(), b.width(), b.height()));
    }
    Ok(())
}

fn check_min_side(a: &RgbImage, min: usize) -> Result<()> {
    if (a.width() as usize) < min || (a.height() as usize) < min {
        return Err(Error::ImageTooSmall {
            width: a.width(),
            height: a.height(),
            min: min as u32,
        });
    }
    Ok(())
}

fn samples<'a>(a: &'a RgbImage, b: &'a RgbImage) -> impl Iterator<Item = f64> + 'a {
    a.pixels()
        .iter()
        .zip(b.pixels())
        .flat_map(|(p, q)| (0..3).map(move |c| p[c] as f64 - q[c] as f64))
}

pub fn mae(a: &RgbImage, b: &RgbImage) -> Result<f64> {
    check_dims(a, b)?;
    let n = 3.0 * a.len() as f64;
    Ok(samples(a, b).map(f64::abs).sum::<f64>() / n)
}

pub fn mse(a: &RgbImage, b: &RgbImage) -> Result<f64> {
    check_dims(a, b)?;
    let n = 3.0 * a.len() as f64;
    Ok(samples(a, b).map(|d| d * d).sum::<f64>() / n)
}

/// `10 log10(255^2 / MSE)`, `+inf` for identical images.
pub fn psnr(a: &RgbImage, b: &RgbImage) -> Result<f64> {
    Ok(psnr_from_mse(mse(a, b)?))
}

pub fn psnr_from_mse(mse: f64) -> f64 {
    if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (DYNAMIC_RANGE * DYNAMIC_RANGE / mse).log10()
    }
}

fn gaussian_kernel() -> [f64; SSIM_WINDOW] {
    let mut k = [0.0; SSIM_WINDOW];
    let c = (SSIM_WINDOW / 2) as f64;
    for (i, v) in k.iter_mut().enumerate() {
        let d = i as f64 - c;
        *v = (-(d * d) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= s);
    k
}

/// Separable "valid" convolution of a w x h plane with `k` on both axes.
fn filter_valid(plane: &[f64], w: usize, h: usize, k: &[f64]) -> (Vec<f64>, usize, usize) {
    let n = k.len();
    let ow = w - n + 1;
    let oh = h - n + 1;
    let mut horiz = vec![0.0; ow * h];
    for y in 0..h {
        let row = &plane[y * w..(y + 1) * w];
        for x in 0..ow {
            horiz[y * ow + x] = k.iter().zip(&row[x..x + n]).map(|(a, b)| a * b).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = (0..n).map(|j| k[j] * horiz[(y + j) * ow + x]).sum();
        }
    }
    (out, ow, oh)
}

fn ssim_channel(x: &[f64], y: &[f64], w: usize, h: usize) -> f64 {
    let k = gaussian_kernel();
    let c1 = (SSIM_K1 * DYNAMIC_RANGE).powi(2);
    let c2 = (SSIM_K2 * DYNAMIC_RANGE).powi(2);
    let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
    let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
    let xy: Vec<f64> = x.iter().zip(y).map(|(a, b)| a * b).collect();
    let (mx, ..) = filter_valid(x, w, h, &k);
    let (my, ..) = filter_valid(y, w, h, &k);
    let (sxx, ..) = filter_valid(&xx, w, h, &k);
    let (syy, ..) = filter_valid(&yy, w, h, &k);
    let (sxy, ..) = filter_valid(&xy, w, h, &k);
    let total: f64 = (0..mx.len())
        .map(|i| {
            let (ux, uy) = (mx[i], my[i]);
            let vx = sxx[i] - ux * ux;
            let vy = syy[i] - uy * uy;
            let cxy = sxy[i] - ux * uy;
            ((2.0 * ux * uy + c1) * (2.0 * cxy + c2)) / ((ux * ux + uy * uy + c1) * (vx + vy + c2))
        })
        .sum();
    total / mx.len() as f64
}

fn plane_f64(img: &RgbImage, ch: ChannelId) -> Vec<f64> {
    img.channel_plane(ch).into_iter().map(f64::from).collect()
}

/// Mean SSIM (11x11 Gaussian window, sigma 1.5, K1 0.01, K2 0.03) averaged over channels.
pub fn ssim(a: &RgbImage, b: &RgbImage) -> Result<f64> {
    check_dims(a, b)?;
    check_min_side(a, SSIM_WINDOW)?;
    let (w, h) = (a.width() as usize, a.height() as usize);
    let sum: f64 = ChannelId::ALL
        .iter()
        .map(|&ch| ssim_channel(&plane_f64(a, ch), &plane_f64(b, ch), w, h))
        .sum();
    Ok(sum / 3.0)
}

/// Summed-area table with a zero border, `(w + 1) x (h + 1)`.
fn integral(values: impl Iterator<Item = i64>, w: usize, h: usize) -> Vec<i64> {
    let mut t = vec![0i64; (w + 1) * (h + 1)];
    let mut it = values;
    for y in 0..h {
        let mut row = 0i64;
        for x in 0..w {
            row += it.next().expect("plane has w*h samples");
            t[(y + 1) * (w + 1) + x + 1] = t[y * (w + 1) + x + 1] + row;
        }
    }
    t
}

fn window_sum(t: &[i64], w: usize, x: usize, y: usize, n: usize) -> i64 {
    let s = w + 1;
    t[(y + n) * s + x + n] - t[y * s + x + n] - t[(y + n) * s + x] + t[y * s + x]
}

fn uiqi_channel(x: &[u8], y: &[u8], w: usize, h: usize) -> f64 {
    let n = UIQI_WINDOW;
    let nn = (n * n) as i64;
    let sx = integral(x.iter().map(|&v| v as i64), w, h);
    let sy = integral(y.iter().map(|&v| v as i64), w, h);
    let sxx = integral(x.iter().map(|&v| (v as i64).pow(2)), w, h);
    let syy = integral(y.iter().map(|&v| (v as i64).pow(2)), w, h);
    let sxy = integral(x.iter().zip(y).map(|(&a, &b)| a as i64 * b as i64), w, h);
    let mut total = 0.0;
    let mut count = 0usize;
    for wy in 0..=h - n {
        for wx in 0..=w - n {
            let ax = window_sum(&sx, w, wx, wy, n);
            let ay = window_sum(&sy, w, wx, wy, n);
            // All scaled by n^2 (n^2 - 1); the factors cancel in the ratio.
            let vx = nn * window_sum(&sxx, w, wx, wy, n) - ax * ax;
            let vy = nn * window_sum(&syy, w, wx, wy, n) - ay * ay;
            let cov = nn * window_sum(&sxy, w, wx, wy, n) - ax * ay;
            let q = match (vx == 0, vy == 0) {
                (true, true) => 1.0,
                (true, false) | (false, true) => 0.0,
                _ => {
                    let num = 4.0 * cov as f64 * ax as f64 * ay as f64;
                    let den = (vx + vy) as f64 * ((ax * ax + ay * ay) as f64);
                    num / den
                }
            };
            total += q;
            count += 1;
        }
    }
    total / count as f64
}

/// Universal image quality index over 8x8 sliding windows, averaged over channels.
///
/// Windows flat in both images score 1; windows flat in exactly one score 0.
pub fn uiqi(a: &RgbImage, b: &RgbImage) -> Result<f64> {
    check_dims(a, b)?;
    check_min_side(a, UIQI_WINDOW)?;
    let (w, h) = (a.width() as usize, a.height() as usize);
    let sum: f64 = ChannelId::ALL
        .iter()
        .map(|&ch| uiqi_channel(&a.channel_plane(ch), &b.channel_plane(ch), w, h))
        .sum();
    Ok(sum / 3.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_image(w: u32, h: u32, seed: u64) -> RgbImage {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        RgbImage::from_fn(w, h, |_, _| rng.gen()).unwrap()
    }

    /// SSIM straight from its windowed definition, one window at a time.
    fn brute_ssim(a: &RgbImage, b: &RgbImage) -> f64 {
        let (w, h) = (a.width() as usize, a.height() as usize);
        let mut g = [[0.0; 11]; 11];
        let mut s = 0.0;
        for (i, row) in g.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                let (di, dj) = (i as f64 - 5.0, j as f64 - 5.0);
                *v = (-(di * di + dj * dj) / (2.0 * 1.5 * 1.5)).exp();
                s += *v;
            }
        }
        let c1 = (0.01f64 * 255.0).powi(2);
        let c2 = (0.03f64 * 255.0).powi(2);
        let mut per_channel = 0.0;
        for c in 0..3 {
            let mut acc = 0.0;
            let mut cnt = 0;
            for wy in 0..=h - 11 {
                for wx in 0..=w - 11 {
                    let (mut mx, mut my, mut xx, mut yy, mut xy) = (0.0, 0.0, 0.0, 0.0, 0.0);
                    for i in 0..11 {
                        for j in 0..11 {
                            let wgt = g[i][j] / s;
                            let p = a.pixel((wx + j) as u32, (wy + i) as u32)[c] as f64;
                            let q = b.pixel((wx + j) as u32, (wy + i) as u32)[c] as f64;
                            mx += wgt * p;
                            my += wgt * q;
                            xx += wgt * p * p;
                            yy += wgt * q * q;
                            xy += wgt * p * q;
                        }
                    }
                    let (vx, vy, cv) = (xx - mx * mx, yy - my * my, xy - mx * my);
                    acc += ((2.0 * mx * my + c1) * (2.0 * cv + c2))
                        / ((mx * mx + my * my + c1) * (vx + vy + c2));
                    cnt += 1;
                }
            }
            per_channel += acc / cnt as f64;
        }
        per_channel / 3.0
    }

    /// Q index from sample means and unbiased variances, window by window.
    fn brute_uiqi(a: &RgbImage, b: &RgbImage) -> f64 {
        let (w, h) = (a.width() as usize, a.height() as usize);
        let mut per_channel = 0.0;
        for c in 0..3 {
            let mut acc = 0.0;
            let mut cnt = 0;
            for wy in 0..=h - 8 {
                for wx in 0..=w - 8 {
                    let mut xs = Vec::new();
                    let mut ys = Vec::new();
                    for i in 0..8 {
                        for j in 0..8 {
                            xs.push(a.pixel((wx + j) as u32, (wy + i) as u32)[c] as f64);
                            ys.push(b.pixel((wx + j) as u32, (wy + i) as u32)[c] as f64);
                        }
                    }
                    let n = 64.0;
                    let mx = xs.iter().sum::<f64>() / n;
                    let my = ys.iter().sum::<f64>() / n;
                    let vx = xs.iter().map(|v| (v - mx).powi(2)).sum::<f64>() / (n - 1.0);
                    let vy = ys.iter().map(|v| (v - my).powi(2)).sum::<f64>() / (n - 1.0);
                    let cv = xs.iter().zip(&ys).map(|(p, q)| (p - mx) * (q - my)).sum::<f64>() / (n - 1.0);
                    acc += if vx == 0.0 && vy == 0.0 {
                        1.0
                    } else if vx == 0.0 || vy == 0.0 {
                        0.0
                    } else {
                        4.0 * cv * mx * my / ((vx + vy) * (mx * mx + my * my))
                    };
                    cnt += 1;
                }
            }
            per_channel += acc / cnt as f64;
        }
        per_channel / 3.0
    }

    #[test]
    fn identical_images() {
        let a = random_image(20, 16, 1);
        let r = QualityReport::compute(&a, &a).unwrap();
        assert_eq!(r.mae, 0.0);
        assert_eq!(r.mse, 0.0);
        assert_eq!(r.psnr, f64::INFINITY);
        assert!((r.ssim - 1.0).abs() < 1e-12);
        assert_eq!(r.uiqi, 1.0);
    }

    #[test]
    fn red_lsb_flip_closed_form() {
        let a = random_image(32, 32, 2);
        let mut b = a.clone();
        for p in b.pixels_mut() {
            p[0] ^= 1;
        }
        assert!((mse(&a, &b).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!((mae(&a, &b).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        let expected = 10.0 * (3.0 * 255.0f64 * 255.0).log10();
        assert!((psnr(&a, &b).unwrap() - expected).abs() < 1e-12);
        assert!((expected - 52.90).abs() < 0.01);
    }

    #[test]
    fn dimension_and_size_errors() {
        let a = random_image(20, 20, 1);
        let b = random_image(20, 21, 1);
        assert!(matches!(mse(&a, &b), Err(Error::DimensionMismatch(..))));
        let small = random_image(10, 30, 1);
        assert!(matches!(ssim(&small, &small), Err(Error::ImageTooSmall { .. })));
        let tiny = random_image(7, 30, 1);
        assert!(matches!(uiqi(&tiny, &tiny), Err(Error::ImageTooSmall { .. })));
    }

    #[test]
    fn ssim_against_brute_force() {
        let a = random_image(23, 19, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut b = a.clone();
        for p in b.pixels_mut() {
            for c in p.iter_mut() {
                *c = c.saturating_add(rng.gen_range(0..30));
            }
        }
        assert!((ssim(&a, &b).unwrap() - brute_ssim(&a, &b)).abs() < 1e-6);
    }

    #[test]
    fn ssim_of_random_vs_its_flat_mean_is_low() {
        let a = random_image(32, 32, 5);
        let means: Vec<u8> = (0..3)
            .map(|c| (a.pixels().iter().map(|p| p[c] as f64).sum::<f64>() / a.len() as f64).round() as u8)
            .collect();
        let flat = RgbImage::from_fn(32, 32, |_, _| [means[0], means[1], means[2]]).unwrap();
        let s = ssim(&a, &flat).unwrap();
        assert!(s < 0.1, "{s}");
        assert!((s - brute_ssim(&a, &flat)).abs() < 1e-6);
    }

    #[test]
    fn uiqi_on_brightness_shifted_gradient() {
        let a = RgbImage::from_fn(16, 16, |x, y| {
            let v = (x * 8 + y * 4) as u8;
            [v, v / 2 + 20, 200 - v / 2]
        })
        .unwrap();
        let b = RgbImage::from_fn(16, 16, |x, y| a.pixel(x, y).map(|v| v + 10)).unwrap();
        let q = uiqi(&a, &b).unwrap();
        assert!(q < 1.0);
        assert!((q - brute_uiqi(&a, &b)).abs() < 1e-6);
        assert_eq!(uiqi(&a, &a).unwrap(), 1.0);
    }

    #[test]
    fn uiqi_against_brute_force_with_flat_regions() {
        let mut a = random_image(24, 20, 6);
        let mut b = random_image(24, 20, 7);
        for y in 0..10 {
            for x in 0..12 {
                a.set_pixel(x, y, [50, 50, 50]);
                if x < 10 {
                    b.set_pixel(x, y, [80, 80, 80]);
                }
            }
        }
        assert!((uiqi(&a, &b).unwrap() - brute_uiqi(&a, &b)).abs() < 1e-6);
    }

    #[test]
    fn symmetry() {
        let a = random_image(30, 25, 8);
        let b = random_image(30, 25, 9);
        assert_eq!(mse(&a, &b).unwrap(), mse(&b, &a).unwrap());
        assert_eq!(mae(&a, &b).unwrap(), mae(&b, &a).unwrap());
        assert!((ssim(&a, &b).unwrap() - ssim(&b, &a).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn psnr_inf_serializes_as_string() {
        let a = random_image(12, 12, 1);
        let r = QualityReport::compute(&a, &a).unwrap();
        let json = serde_json::to_value(r).unwrap();
        assert_eq!(json["psnr"], "inf");
        let back: QualityReport = serde_json::from_value(json).unwrap();
        assert_eq!(back.psnr, f64::INFINITY);
    }
}
