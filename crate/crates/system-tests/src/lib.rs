//! Slow, literal reference implementations used to check the fast ones.

use photostamp::imageio::RgbImage;

/// Orthonormal 2-D DCT-II of an 8x8 block by direct summation.
pub fn dct_brute(block: &[[f64; 8]; 8]) -> [[f64; 8]; 8] {
    let mut out = [[0.0; 8]; 8];
    for (u, row) in out.iter_mut().enumerate() {
        for (v, o) in row.iter_mut().enumerate() {
            let mut s = 0.0;
            for (x, brow) in block.iter().enumerate() {
                for (y, b) in brow.iter().enumerate() {
                    s += b * basis(u, x) * basis(v, y);
                }
            }
            *o = s;
        }
    }
    out
}

/// Inverse of [`dct_brute`] by direct summation.
pub fn idct_brute(coef: &[[f64; 8]; 8]) -> [[f64; 8]; 8] {
    let mut out = [[0.0; 8]; 8];
    for (x, row) in out.iter_mut().enumerate() {
        for (y, o) in row.iter_mut().enumerate() {
            let mut s = 0.0;
            for (u, crow) in coef.iter().enumerate() {
                for (v, c) in crow.iter().enumerate() {
                    s += c * basis(u, x) * basis(v, y);
                }
            }
            *o = s;
        }
    }
    out
}

fn basis(k: usize, n: usize) -> f64 {
    let alpha = if k == 0 { (1.0f64 / 8.0).sqrt() } else { (2.0f64 / 8.0).sqrt() };
    alpha * (std::f64::consts::PI * (2 * n + 1) as f64 * k as f64 / 16.0).cos()
}

fn sample(img: &RgbImage, x: usize, y: usize, c: usize) -> f64 {
    img.pixel(x as u32, y as u32)[c] as f64
}

/// Mean SSIM with an 11x11 Gaussian (sigma 1.5) over every fully inside
/// window, computed one window at a time and averaged over channels.
pub fn ssim_brute(a: &RgbImage, b: &RgbImage) -> f64 {
    let (w, h) = (a.width() as usize, a.height() as usize);
    let mut g = [[0.0; 11]; 11];
    for (i, row) in g.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            let (di, dj) = (i as f64 - 5.0, j as f64 - 5.0);
            *v = (-(di * di + dj * dj) / 4.5).exp();
        }
    }
    let total: f64 = g.iter().flatten().sum();
    let c1 = (0.01f64 * 255.0).powi(2);
    let c2 = (0.03f64 * 255.0).powi(2);
    let mut sum = 0.0;
    for c in 0..3 {
        let mut acc = 0.0;
        let mut count = 0;
        for wy in 0..=h - 11 {
            for wx in 0..=w - 11 {
                let (mut mx, mut my) = (0.0, 0.0);
                for i in 0..11 {
                    for j in 0..11 {
                        let wgt = g[i][j] / total;
                        mx += wgt * sample(a, wx + j, wy + i, c);
                        my += wgt * sample(b, wx + j, wy + i, c);
                    }
                }
                let (mut vx, mut vy, mut cv) = (0.0, 0.0, 0.0);
                for i in 0..11 {
                    for j in 0..11 {
                        let wgt = g[i][j] / total;
                        let dx = sample(a, wx + j, wy + i, c) - mx;
                        let dy = sample(b, wx + j, wy + i, c) - my;
                        vx += wgt * dx * dx;
                        vy += wgt * dy * dy;
                        cv += wgt * dx * dy;
                    }
                }
                acc += ((2.0 * mx * my + c1) * (2.0 * cv + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
                count += 1;
            }
        }
        sum += acc / count as f64;
    }
    sum / 3.0
}

/// Universal quality index over 8x8 windows at stride 1, from two-pass
/// sample statistics. Windows flat in both images score 1, flat in one 0.
pub fn uiqi_brute(a: &RgbImage, b: &RgbImage) -> f64 {
    let (w, h) = (a.width() as usize, a.height() as usize);
    let mut sum = 0.0;
    for c in 0..3 {
        let mut acc = 0.0;
        let mut count = 0;
        for wy in 0..=h - 8 {
            for wx in 0..=w - 8 {
                let mut xs = Vec::with_capacity(64);
                let mut ys = Vec::with_capacity(64);
                for i in 0..8 {
                    for j in 0..8 {
                        xs.push(sample(a, wx + j, wy + i, c));
                        ys.push(sample(b, wx + j, wy + i, c));
                    }
                }
                let mx = xs.iter().sum::<f64>() / 64.0;
                let my = ys.iter().sum::<f64>() / 64.0;
                let vx = xs.iter().map(|v| (v - mx).powi(2)).sum::<f64>() / 63.0;
                let vy = ys.iter().map(|v| (v - my).powi(2)).sum::<f64>() / 63.0;
                let cv = xs.iter().zip(&ys).map(|(p, q)| (p - mx) * (q - my)).sum::<f64>() / 63.0;
                acc += match (vx == 0.0, vy == 0.0) {
                    (true, true) => 1.0,
                    (true, false) | (false, true) => 0.0,
                    _ => 4.0 * cv * mx * my / ((vx + vy) * (mx * mx + my * my)),
                };
                count += 1;
            }
        }
        sum += acc / count as f64;
    }
    sum / 3.0
}
