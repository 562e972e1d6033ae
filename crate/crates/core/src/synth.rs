//! Procedural photo-like test images.
//!
//! The benches need natural-looking content with smooth areas, fine texture,
//! saturated highlights and shadows. These generators provide that without
//! shipping third-party photographs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::imageio::RgbImage;

/// Smooth random field in [0, 1] on a lattice with spacing `cell`.
struct ValueNoise {
    cols: usize,
    lattice: Vec<f64>,
    cell: f64,
}

impl ValueNoise {
    fn new(w: u32, h: u32, cell: f64, rng: &mut impl Rng) -> Self {
        let cols = (w as f64 / cell).ceil() as usize + 2;
        let rows = (h as f64 / cell).ceil() as usize + 2;
        let lattice = (0..cols * rows).map(|_| rng.gen::<f64>()).collect();
        Self { cols, lattice, cell }
    }

    fn at(&self, x: f64, y: f64) -> f64 {
        let (gx, gy) = (x / self.cell, y / self.cell);
        let (ix, iy) = (gx.floor() as usize, gy.floor() as usize);
        let s = |t: f64| t * t * (3.0 - 2.0 * t);
        let (fx, fy) = (s(gx.fract()), s(gy.fract()));
        let v = |c: usize, r: usize| self.lattice[r * self.cols + c];
        let top = v(ix, iy) * (1.0 - fx) + v(ix + 1, iy) * fx;
        let bot = v(ix, iy + 1) * (1.0 - fx) + v(ix + 1, iy + 1) * fx;
        top * (1.0 - fy) + bot * fy
    }
}

/// Several octaves of value noise, normalised to [0, 1].
struct Fbm(Vec<(ValueNoise, f64)>);

impl Fbm {
    fn new(w: u32, h: u32, base_cell: f64, octaves: usize, rng: &mut impl Rng) -> Self {
        let layers = (0..octaves)
            .map(|o| {
                let cell = (base_cell / 2f64.powi(o as i32)).max(1.0);
                (ValueNoise::new(w, h, cell, rng), 0.5f64.powi(o as i32))
            })
            .collect();
        Self(layers)
    }

    fn at(&self, x: f64, y: f64) -> f64 {
        let total: f64 = self.0.iter().map(|(_, a)| a).sum();
        self.0.iter().map(|(n, a)| n.at(x, y) * a).sum::<f64>() / total
    }
}

fn ellipse(x: f64, y: f64, cx: f64, cy: f64, rx: f64, ry: f64) -> f64 {
    ((x - cx) / rx).powi(2) + ((y - cy) / ry).powi(2)
}

fn mix(a: [f64; 3], b: [f64; 3], t: f64) -> [f64; 3] {
    let t = t.clamp(0.0, 1.0);
    [0, 1, 2].map(|i| a[i] * (1.0 - t) + b[i] * t)
}

fn finish(w: u32, h: u32, sigma: f64, rng: &mut ChaCha8Rng, f: impl Fn(f64, f64) -> [f64; 3]) -> RgbImage {
    let normal = Normal::new(0.0, sigma).expect("valid sigma");
    RgbImage::from_fn(w, h, |x, y| {
        f(x as f64, y as f64).map(|v| (v + normal.sample(rng)).round().clamp(0.0, 255.0) as u8)
    })
    .expect("non-empty dimensions")
}

/// Head-and-shoulders scene: smooth skin, dark textured hair, soft background.
pub fn portrait(w: u32, h: u32, seed: u64) -> RgbImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (fw, fh) = (w as f64, h as f64);
    let bg = Fbm::new(w, h, fw / 3.0, 3, &mut rng);
    let skin = Fbm::new(w, h, fw / 10.0, 4, &mut rng);
    let hair = Fbm::new(w, h, fw / 20.0, 4, &mut rng);
    let (cx, cy) = (fw * 0.5, fh * 0.55);
    let (rx, ry) = (fw * 0.25, fh * 0.32);
    finish(w, h, 2.0, &mut rng, |x, y| {
        let t = y / fh;
        let mut c = mix([70.0, 95.0, 130.0], [150.0, 165.0, 180.0], t + 0.4 * (bg.at(x, y) - 0.5));
        // shoulders
        if y > fh * 0.8 && ellipse(x, y, cx, fh * 1.05, fw * 0.48, fh * 0.28) < 1.0 {
            c = mix([40.0, 40.0, 60.0], [90.0, 85.0, 110.0], skin.at(x, y));
        }
        let hd = ellipse(x, y, cx, cy - fh * 0.12, rx * 1.25, ry * 1.0);
        if hd < 1.0 {
            let strand = ((x * 0.9 + 12.0 * hair.at(x, y)).sin() * 0.5 + 0.5) * 35.0;
            c = [45.0 + strand, 30.0 + strand * 0.7, 22.0 + strand * 0.5];
        }
        let fd = ellipse(x, y, cx, cy, rx, ry);
        if fd < 1.0 {
            let lx = (x - cx) / rx + 0.35;
            let shade = 1.05 - 0.4 * fd - 0.15 * lx;
            let tex = 0.9 + 0.2 * skin.at(x, y);
            c = [225.0 * shade * tex, 168.0 * shade * tex, 140.0 * shade * tex];
            for ex in [-0.4, 0.4] {
                let e = ellipse(x, y, cx + ex * rx, cy - 0.2 * ry, rx * 0.16, ry * 0.07);
                if e < 1.0 {
                    c = mix([25.0, 20.0, 20.0], [245.0, 240.0, 235.0], e * 1.3 - 0.2);
                }
            }
            let m = ellipse(x, y, cx, cy + 0.5 * ry, rx * 0.35, ry * 0.08);
            if m < 1.0 {
                c = mix([150.0, 45.0, 55.0], c, m);
            }
        }
        c
    })
}

/// Fine, high-contrast fur texture with coloured facial patches.
pub fn fur(w: u32, h: u32, seed: u64) -> RgbImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (fw, fh) = (w as f64, h as f64);
    let fine = Fbm::new(w, h, 6.0, 3, &mut rng);
    let coarse = Fbm::new(w, h, fw / 6.0, 2, &mut rng);
    let warp = Fbm::new(w, h, fw / 12.0, 2, &mut rng);
    let cx = fw * 0.5;
    finish(w, h, 3.0, &mut rng, |x, y| {
        let hairs = ((x * 0.35 + y * 1.1 + 25.0 * warp.at(x, y)).sin() * 0.5 + 0.5) * 0.5 + 0.5 * fine.at(x, y);
        let tone = 0.6 * hairs + 0.4 * coarse.at(x, y);
        let mut c = mix([40.0, 35.0, 20.0], [200.0, 180.0, 120.0], tone * 1.3 - 0.15);
        let nose = ellipse(x, y, cx, fh * 0.6, fw * 0.09, fh * 0.3);
        if nose < 1.0 {
            c = mix([230.0, 40.0, 45.0], c, nose.powi(2));
        }
        for side in [-1.0, 1.0] {
            let cheek = ellipse(x, y, cx + side * fw * 0.22, fh * 0.62, fw * 0.12, fh * 0.22);
            if cheek < 1.0 {
                let ridge = (y * 0.6 + 3.0 * fine.at(x, y)).sin() * 0.5 + 0.5;
                c = mix(mix([60.0, 90.0, 190.0], [150.0, 170.0, 230.0], ridge), c, cheek.powi(3));
            }
            let eye = ellipse(x, y, cx + side * fw * 0.16, fh * 0.3, fw * 0.05, fh * 0.04);
            if eye < 1.0 {
                c = mix([10.0, 8.0, 5.0], [240.0, 170.0, 20.0], eye * 1.6 - 0.3);
            }
        }
        c
    })
}

/// Large glossy blobs of saturated colour with specular highlights and
/// deep shadows.
pub fn peppers(w: u32, h: u32, seed: u64) -> RgbImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (fw, fh) = (w as f64, h as f64);
    let palette = [
        [200.0, 25.0, 20.0],
        [70.0, 150.0, 40.0],
        [235.0, 200.0, 40.0],
        [220.0, 110.0, 20.0],
        [150.0, 20.0, 30.0],
    ];
    let blobs: Vec<([f64; 5], [f64; 3])> = (0..9)
        .map(|i| {
            let geom = [
                rng.gen_range(0.1..0.9) * fw,
                rng.gen_range(0.1..0.9) * fh,
                rng.gen_range(0.12..0.25) * fw,
                rng.gen_range(0.12..0.25) * fh,
                rng.gen_range(0.0..std::f64::consts::PI),
            ];
            (geom, palette[i % palette.len()])
        })
        .collect();
    let skin = Fbm::new(w, h, fw / 16.0, 3, &mut rng);
    finish(w, h, 1.5, &mut rng, |x, y| {
        let mut c = mix([20.0, 30.0, 10.0], [70.0, 40.0, 30.0], skin.at(x, y));
        for (g, col) in &blobs {
            let (s, co) = g[4].sin_cos();
            let (dx, dy) = (x - g[0], y - g[1]);
            let u = (dx * co + dy * s) / g[2];
            let v = (-dx * s + dy * co) / g[3];
            let d = u * u + v * v;
            if d < 1.0 {
                // light from the upper left
                let lambert = (1.0 - d).sqrt() * 0.8 + 0.25 - 0.3 * (u + v) * 0.5;
                let spec = (-((u + 0.35).powi(2) + (v + 0.35).powi(2)) / 0.012).exp();
                let base = col.map(|ch| ch * lambert.clamp(0.0, 1.3));
                let rim = ((d - 0.85) / 0.15).clamp(0.0, 1.0);
                c = mix(mix(base, [255.0; 3], spec * 1.2), [0.0; 3], rim * 0.9);
            }
        }
        c
    })
}

/// Colourful texture unrelated to any corpus image; the donor for splices.
pub fn value_noise_image(w: u32, h: u32, seed: u64) -> RgbImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_d0a0);
    let layers: Vec<Fbm> = (0..3).map(|_| Fbm::new(w, h, 8.0, 3, &mut rng)).collect();
    RgbImage::from_fn(w, h, |x, y| {
        [0, 1, 2].map(|c| (layers[c].at(x as f64, y as f64) * 255.0).round() as u8)
    })
    .expect("non-empty dimensions")
}

/// The three-image evaluation corpus: 220x220, 267x266 and 512x512.
pub fn corpus(seed: u64) -> Vec<(String, RgbImage)> {
    vec![
        ("portrait".to_owned(), portrait(220, 220, seed)),
        ("fur".to_owned(), fur(267, 266, seed.wrapping_add(1))),
        ("peppers".to_owned(), peppers(512, 512, seed.wrapping_add(2))),
    ]
}

/// Seed of the checked-in evaluation corpus.
pub const CORPUS_SEED: u64 = 2016;
