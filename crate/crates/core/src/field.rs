//! Dense scalar fields: the GP gridmap and every rendered representation.

use crate::error::{Error, Result};

/// A row-major `width × height` grid of coverage values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl ScalarField {
    /// Builds a field, clamping every value into `[0, 1]`.
    ///
    /// Non-finite values are rejected rather than clamped.
    pub fn new(width: usize, height: usize, mut values: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid("field dimensions must be non-zero"));
        }
        if values.len() != width * height {
            return Err(Error::invalid(format!(
                "field of {width}x{height} needs {} values, got {}",
                width * height,
                values.len()
            )));
        }
        for v in values.iter_mut() {
            if !v.is_finite() {
                return Err(Error::invalid("field values must be finite"));
            }
            *v = v.clamp(0.0, 1.0);
        }
        Ok(Self {
            width,
            height,
            values,
        })
    }

    pub fn constant(width: usize, height: usize, value: f64) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let mut values = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                values.push(f(x, y));
            }
        }
        Self::new(width, height, values)
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// 8-bit intensities, `round(v * 255)` with halves rounded up.
    pub fn quantize(&self) -> Vec<u8> {
        self.values.iter().map(|&v| quantize_value(v)).collect()
    }

    pub fn same_shape(&self, other: &ScalarField) -> Result<()> {
        if self.width != other.width || self.height != other.height {
            return Err(Error::DimensionMismatch(
                self.width,
                self.height,
                other.width,
                other.height,
            ));
        }
        Ok(())
    }

    /// Dimensions with the long side set to `long_side`, aspect ratio preserved.
    pub fn scaled_dims(width: usize, height: usize, long_side: usize) -> (usize, usize) {
        if width >= height {
            let h = ((height as f64 * long_side as f64 / width as f64).round() as usize).max(1);
            (long_side, h)
        } else {
            let w = ((width as f64 * long_side as f64 / height as f64).round() as usize).max(1);
            (w, long_side)
        }
    }
}

/// Round-half-up quantisation onto the 8-bit scale.
#[inline]
pub fn quantize_value(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0 + 0.5).floor() as u8
}
