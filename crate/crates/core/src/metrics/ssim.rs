//! Structural similarity on 8-bit images.

use crate::error::Result;
use crate::field::ScalarField;

pub const K1: f64 = 0.01;
pub const K2: f64 = 0.03;
pub const DYNAMIC_RANGE: f64 = 255.0;
pub const SIGMA: f64 = 1.5;
pub const WINDOW: usize = 11;

/// Normalised 1-D Gaussian taps of odd length `len`.
fn gaussian_taps(len: usize) -> Vec<f64> {
    let r = (len / 2) as f64;
    let w: Vec<f64> = (0..len)
        .map(|i| {
            let d = i as f64 - r;
            (-d * d / (2.0 * SIGMA * SIGMA)).exp()
        })
        .collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|v| v / s).collect()
}

/// Mean SSIM between the 8-bit quantisations of `a` and `b`.
///
/// Local statistics use an 11×11 Gaussian window (σ = 1.5) and population
/// moments; the map is averaged over window positions that lie fully
/// inside the image. Images narrower than 11 cells use the largest odd
/// window that fits.
pub fn ssim(a: &ScalarField, b: &ScalarField) -> Result<f64> {
    a.same_shape(b)?;
    let (qa, qb) = (a.quantize(), b.quantize());
    Ok(ssim_u8(&qa, &qb, a.width(), a.height()))
}

pub(crate) fn ssim_u8(a: &[u8], b: &[u8], w: usize, h: usize) -> f64 {
    let mut win = WINDOW.min(w).min(h);
    if win % 2 == 0 {
        win -= 1;
    }
    let taps = gaussian_taps(win);
    let (ow, oh) = (w - win + 1, h - win + 1);
    let c1 = (K1 * DYNAMIC_RANGE).powi(2);
    let c2 = (K2 * DYNAMIC_RANGE).powi(2);

    // Horizontal pass over every row: five moment images of width `ow`.
    let mut horiz = vec![[0.0f64; 5]; ow * h];
    for y in 0..h {
        let (ra, rb) = (&a[y * w..(y + 1) * w], &b[y * w..(y + 1) * w]);
        for x in 0..ow {
            let mut m = [0.0; 5];
            for (k, &t) in taps.iter().enumerate() {
                let (u, v) = (ra[x + k] as f64, rb[x + k] as f64);
                m[0] += t * u;
                m[1] += t * v;
                m[2] += t * u * u;
                m[3] += t * v * v;
                m[4] += t * u * v;
            }
            horiz[y * ow + x] = m;
        }
    }
    let mut total = 0.0;
    for y in 0..oh {
        for x in 0..ow {
            let mut m = [0.0; 5];
            for (k, &t) in taps.iter().enumerate() {
                let s = &horiz[(y + k) * ow + x];
                for j in 0..5 {
                    m[j] += t * s[j];
                }
            }
            let (mu_a, mu_b) = (m[0], m[1]);
            let va = m[2] - mu_a * mu_a;
            let vb = m[3] - mu_b * mu_b;
            let cov = m[4] - mu_a * mu_b;
            total += ((2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2))
                / ((mu_a * mu_a + mu_b * mu_b + c1) * (va + vb + c2));
        }
    }
    total / (ow * oh) as f64
}
