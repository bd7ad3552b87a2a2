//! DCT perceptual hash.

use std::fmt;

use crate::error::{Error, Result};
use crate::field::ScalarField;

/// Side of the resampled image the DCT is taken over.
pub const RESIZE: usize = 128;
/// Side of the low-frequency block kept from the DCT.
pub const BLOCK: usize = 64;
pub const HASH_BITS: usize = BLOCK * BLOCK;
/// DCT round-off on 0–255 data is ~1e-11; anything smaller than this is zero.
const NOISE_FLOOR: f64 = 1e-9;

/// Fixed-length bit string, most significant bit of each word first.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BitVector {
    len: usize,
    words: Vec<u64>,
}

impl BitVector {
    pub fn zeros(len: usize) -> Self {
        Self {
            len,
            words: vec![0; len.div_ceil(64)],
        }
    }

    pub fn from_bits(bits: &[bool]) -> Self {
        let mut v = Self::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            v.set(i, b);
        }
        v
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len);
        self.words[i / 64] >> (63 - i % 64) & 1 == 1
    }

    pub fn set(&mut self, i: usize, bit: bool) {
        assert!(i < self.len);
        let mask = 1u64 << (63 - i % 64);
        if bit {
            self.words[i / 64] |= mask;
        } else {
            self.words[i / 64] &= !mask;
        }
    }

    /// Bitwise complement (padding beyond `len` stays zero).
    pub fn not(&self) -> Self {
        let mut v = self.clone();
        for w in &mut v.words {
            *w = !*w;
        }
        if self.len % 64 != 0 {
            let last = v.words.len() - 1;
            v.words[last] &= !0u64 << (64 - self.len % 64);
        }
        v
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }
}

impl fmt::Display for BitVector {
    /// Hexadecimal, four bits per digit.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in (0..self.len).step_by(4) {
            let mut d = 0u8;
            for j in 0..4 {
                d <<= 1;
                if i + j < self.len && self.get(i + j) {
                    d |= 1;
                }
            }
            write!(f, "{d:x}")?;
        }
        Ok(())
    }
}

/// Number of positions at which the two bit vectors differ.
pub fn hamming(a: &BitVector, b: &BitVector) -> Result<usize> {
    if a.len != b.len {
        return Err(Error::invalid(format!("hash lengths differ: {} vs {}", a.len, b.len)));
    }
    Ok(a.words.iter().zip(&b.words).map(|(x, y)| (x ^ y).count_ones() as usize).sum())
}

/// Area-weighting matrix mapping `n` source cells onto `m` equal bins.
fn area_weights(n: usize, m: usize) -> Vec<Vec<(usize, f64)>> {
    let scale = n as f64 / m as f64;
    (0..m)
        .map(|i| {
            let (lo, hi) = (i as f64 * scale, (i + 1) as f64 * scale);
            let mut row = Vec::new();
            let mut j = lo.floor() as usize;
            while j < n && (j as f64) < hi {
                let overlap = (hi.min(j as f64 + 1.0) - lo.max(j as f64)).max(0.0);
                if overlap > 0.0 {
                    row.push((j, overlap / scale));
                }
                j += 1;
            }
            row
        })
        .collect()
}

/// Resample to `RESIZE × RESIZE` by exact area averaging.
pub(crate) fn resize_area(field: &ScalarField) -> Vec<f64> {
    let (w, h) = (field.width(), field.height());
    let wx = area_weights(w, RESIZE);
    let wy = area_weights(h, RESIZE);
    let mut rows = vec![0.0; h * RESIZE];
    for y in 0..h {
        for (i, row) in wx.iter().enumerate() {
            rows[y * RESIZE + i] = row.iter().map(|&(x, t)| t * field.get(x, y)).sum();
        }
    }
    let mut out = vec![0.0; RESIZE * RESIZE];
    for (j, col) in wy.iter().enumerate() {
        for i in 0..RESIZE {
            out[j * RESIZE + i] = col.iter().map(|&(y, t)| t * rows[y * RESIZE + i]).sum();
        }
    }
    out
}

/// Low-frequency `BLOCK × BLOCK` corner of the orthonormal 2-D DCT-II.
pub(crate) fn dct_block(img: &[f64]) -> Vec<f64> {
    let n = RESIZE;
    let basis: Vec<f64> = (0..BLOCK)
        .flat_map(|k| {
            let s = if k == 0 { (1.0 / n as f64).sqrt() } else { (2.0 / n as f64).sqrt() };
            (0..n).map(move |x| s * (std::f64::consts::PI * (2 * x + 1) as f64 * k as f64 / (2 * n) as f64).cos())
        })
        .collect();
    let mut tmp = vec![0.0; n * BLOCK];
    for y in 0..n {
        for k in 0..BLOCK {
            tmp[y * BLOCK + k] = (0..n).map(|x| basis[k * n + x] * img[y * n + x]).sum();
        }
    }
    let mut out = vec![0.0; BLOCK * BLOCK];
    for u in 0..BLOCK {
        for k in 0..BLOCK {
            out[u * BLOCK + k] = (0..n).map(|y| basis[u * n + y] * tmp[y * BLOCK + k]).sum();
        }
    }
    out
}

/// 4096-bit perceptual hash.
///
/// The field, scaled to 0–255 but not quantised, is area-resampled to
/// 128×128 and transformed with a 2-D DCT-II. The 4095 coefficients of the
/// low-frequency 64×64 block other than DC are compared with their median;
/// bit `i` is set when coefficient `i` (row-major, DC skipped) is above it.
/// The final bit is always zero. Coefficients within round-off of zero are
/// taken as exactly zero, so flat images hash to all zeros instead of noise.
pub fn phash(field: &ScalarField) -> BitVector {
    let img: Vec<f64> = resize_area(field).into_iter().map(|v| v * 255.0).collect();
    let mut block = dct_block(&img);
    for c in &mut block {
        if c.abs() < NOISE_FLOOR {
            *c = 0.0;
        }
    }
    let coeffs = &block[1..];
    let mut sorted = coeffs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let median = sorted[sorted.len() / 2];
    let mut bits = BitVector::zeros(HASH_BITS);
    for (i, &c) in coeffs.iter().enumerate() {
        bits.set(i, c > median);
    }
    bits
}
