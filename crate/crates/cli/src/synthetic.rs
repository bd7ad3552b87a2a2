//! Seeded synthetic weed rasters for demos and tests.

use krigrid_core::raster_io::SemanticRaster;
use krigrid_core::rng::SeededRng;
use krigrid_core::Result;

/// Parameters of [`patchy_raster`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PatchySpec {
    pub width: usize,
    pub height: usize,
    /// Patches drawn: `min_patches + below(extra_patches)`.
    pub min_patches: usize,
    pub extra_patches: u64,
    pub min_radius: f64,
    pub max_radius: f64,
    /// Weed probability inside a patch, uniform in this range.
    pub min_density: f64,
    pub max_density: f64,
    /// Weed probability outside every patch.
    pub background: f64,
}

impl Default for PatchySpec {
    fn default() -> Self {
        Self {
            width: 2048,
            height: 1536,
            min_patches: 6,
            extra_patches: 20,
            min_radius: 40.0,
            max_radius: 240.0,
            min_density: 0.05,
            max_density: 0.4,
            background: 0.005,
        }
    }
}

/// Scattered weed pixels whose density rises inside random circular
/// patches; overlapping patches take the larger density.
pub fn patchy_raster(spec: &PatchySpec, seed: u64) -> Result<SemanticRaster> {
    let mut rng = SeededRng::new(seed);
    let n = spec.min_patches + if spec.extra_patches > 0 { rng.below(spec.extra_patches) as usize } else { 0 };
    let (w, h) = (spec.width, spec.height);
    let patches: Vec<(f64, f64, f64, f64)> = (0..n)
        .map(|_| {
            (
                rng.uniform() * w as f64,
                rng.uniform() * h as f64,
                spec.min_radius + (spec.max_radius - spec.min_radius) * rng.uniform(),
                spec.min_density + (spec.max_density - spec.min_density) * rng.uniform(),
            )
        })
        .collect();
    let mut mask = vec![false; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut p = spec.background;
            for &(cx, cy, r, d) in &patches {
                if (x as f64 - cx).hypot(y as f64 - cy) < r {
                    p = p.max(d);
                }
            }
            mask[y * w + x] = rng.uniform() < p;
        }
    }
    SemanticRaster::from_mask(w, h, mask)
}

/// Writes a mask as an RGB label PNG: weed pixels in `weed`, others black.
pub fn write_label_png(raster: &SemanticRaster, weed: krigrid_core::raster_io::Rgb, path: &std::path::Path) -> anyhow::Result<()> {
    let mut buf = Vec::with_capacity(raster.mask().len() * 3);
    for &m in raster.mask() {
        buf.extend_from_slice(&if m { [weed.0, weed.1, weed.2] } else { [0, 0, 0] });
    }
    let img = image::RgbImage::from_raw(raster.width() as u32, raster.height() as u32, buf)
        .ok_or_else(|| anyhow::anyhow!("label buffer does not match dimensions"))?;
    img.save_with_format(path, image::ImageFormat::Png)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use krigrid_core::raster_io::{load_orthomosaic_file, Rgb};

    fn small() -> PatchySpec {
        PatchySpec {
            width: 64,
            height: 48,
            min_radius: 5.0,
            max_radius: 15.0,
            ..PatchySpec::default()
        }
    }

    #[test]
    fn seeded_and_sparse() {
        let a = patchy_raster(&small(), 3).unwrap();
        assert_eq!(a.mask(), patchy_raster(&small(), 3).unwrap().mask());
        assert_ne!(a.mask(), patchy_raster(&small(), 4).unwrap().mask());
        let frac = a.weed_count() as f64 / (64.0 * 48.0);
        assert!(frac > 0.0 && frac < 0.4);
    }

    #[test]
    fn label_png_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.png");
        let r = patchy_raster(&small(), 1).unwrap();
        write_label_png(&r, Rgb::RED, &path).unwrap();
        assert_eq!(load_orthomosaic_file(&path, Rgb::RED).unwrap().mask(), r.mask());
    }
}
