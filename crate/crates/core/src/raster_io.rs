//! Semantic raster ingestion, seeded window sampling and field export.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use image::{ColorType, GrayImage, ImageFormat};

use crate::error::{Error, Result};
use crate::field::{quantize_value, ScalarField};
use crate::rng::SeededRng;

/// An RGB label colour.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Rgb(pub u8, pub u8, pub u8);

impl Rgb {
    pub const RED: Rgb = Rgb(255, 0, 0);
    pub const GREEN: Rgb = Rgb(0, 255, 0);
    pub const BLACK: Rgb = Rgb(0, 0, 0);
}

impl std::str::FromStr for Rgb {
    type Err = Error;

    /// Parses `R,G,B`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        if parts.len() != 3 {
            return Err(Error::invalid(format!("colour must be R,G,B, got {s:?}")));
        }
        let mut c = [0u8; 3];
        for (slot, p) in c.iter_mut().zip(&parts) {
            *slot = p
                .parse()
                .map_err(|_| Error::invalid(format!("bad colour component {p:?}")))?;
        }
        Ok(Rgb(c[0], c[1], c[2]))
    }
}

impl std::fmt::Display for Rgb {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{},{},{}", self.0, self.1, self.2)
    }
}

/// Weed mask of a semantic orthomosaic.
#[derive(Debug, Clone)]
pub struct SemanticRaster {
    width: usize,
    height: usize,
    mask: Vec<bool>,
    // (width+1) x (height+1) summed-area table of the mask.
    integral: Vec<u64>,
}

impl SemanticRaster {
    pub fn from_mask(width: usize, height: usize, mask: Vec<bool>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid("raster dimensions must be non-zero"));
        }
        if mask.len() != width * height {
            return Err(Error::invalid("mask length does not match dimensions"));
        }
        let stride = width + 1;
        let mut integral = vec![0u64; stride * (height + 1)];
        for y in 0..height {
            let mut row = 0u64;
            for x in 0..width {
                row += mask[y * width + x] as u64;
                integral[(y + 1) * stride + x + 1] = integral[y * stride + x + 1] + row;
            }
        }
        Ok(Self {
            width,
            height,
            mask,
            integral,
        })
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
    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    #[inline]
    pub fn is_weed(&self, x: usize, y: usize) -> bool {
        self.mask[y * self.width + x]
    }

    pub fn weed_count(&self) -> u64 {
        self.integral[self.integral.len() - 1]
    }

    /// Weed pixels in the half-open rectangle `[x0, x1) × [y0, y1)`.
    pub fn count_rect(&self, x0: usize, y0: usize, x1: usize, y1: usize) -> u64 {
        let s = self.width + 1;
        self.integral[y1 * s + x1] + self.integral[y0 * s + x0]
            - self.integral[y0 * s + x1]
            - self.integral[y1 * s + x0]
    }

    /// Fraction of weed pixels in a `window`-sided square centred on
    /// `(cx, cy)`, clipped to the raster and normalised by the clipped area.
    ///
    /// The window spans `[c - window/2, c - window/2 + window)` on each axis.
    pub fn weed_fraction_window(&self, cx: usize, cy: usize, window: usize) -> Result<f64> {
        if window == 0 {
            return Err(Error::invalid("window must be at least 1 pixel"));
        }
        if cx >= self.width || cy >= self.height {
            return Err(Error::invalid(format!(
                "centre ({cx}, {cy}) outside {}x{} raster",
                self.width, self.height
            )));
        }
        let half = (window / 2) as isize;
        let clip = |c: usize, n: usize| {
            let lo = (c as isize - half).max(0) as usize;
            let hi = ((c as isize - half + window as isize).max(0) as usize).min(n);
            (lo, hi)
        };
        let (x0, x1) = clip(cx, self.width);
        let (y0, y1) = clip(cy, self.height);
        let area = ((x1 - x0) * (y1 - y0)) as f64;
        Ok(self.count_rect(x0, y0, x1, y1) as f64 / area)
    }
}

/// Decodes a PNG label map and marks pixels exactly equal to `weed_colour`.
pub fn load_orthomosaic(image_bytes: &[u8], weed_colour: Rgb) -> Result<SemanticRaster> {
    let img = image::load_from_memory_with_format(image_bytes, ImageFormat::Png)?;
    match img.color() {
        ColorType::Rgb8 | ColorType::Rgba8 | ColorType::L8 | ColorType::La8 => {}
        other => {
            return Err(Error::invalid(format!(
                "expected an 8-bit RGB(A) label image, got {other:?}"
            )))
        }
    }
    let rgb = img.to_rgb8();
    let (w, h) = (rgb.width() as usize, rgb.height() as usize);
    if w == 0 || h == 0 {
        return Err(Error::invalid("image has a zero dimension"));
    }
    let mask = rgb
        .pixels()
        .map(|p| p.0 == [weed_colour.0, weed_colour.1, weed_colour.2])
        .collect();
    SemanticRaster::from_mask(w, h, mask)
}

pub fn load_orthomosaic_file(path: &Path, weed_colour: Rgb) -> Result<SemanticRaster> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    load_orthomosaic(&bytes, weed_colour)
}

/// A GP training datum: a window's weed fraction located at `(x, y)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplePoint {
    pub x: f64,
    pub y: f64,
    pub value: f64,
}

impl SamplePoint {
    pub const fn new(x: f64, y: f64, value: f64) -> Self {
        Self { x, y, value }
    }
}

/// Draws `n` i.i.d. uniform locations over the raster and average-pools a
/// `window`-sided square around each.
///
/// Coordinates are continuous in `[0, width) × [0, height)`; the pooling
/// window is centred on the pixel containing the location.
pub fn sample_uniform(
    raster: &SemanticRaster,
    n: usize,
    window: usize,
    seed: u64,
) -> Result<Vec<SamplePoint>> {
    if n == 0 {
        return Err(Error::invalid("sample count must be at least 1"));
    }
    let mut rng = SeededRng::new(seed);
    let (w, h) = (raster.width() as f64, raster.height() as f64);
    (0..n)
        .map(|_| {
            let x = rng.uniform() * w;
            let y = rng.uniform() * h;
            let cx = (x as usize).min(raster.width() - 1);
            let cy = (y as usize).min(raster.height() - 1);
            let value = raster.weed_fraction_window(cx, cy, window)?;
            Ok(SamplePoint::new(x, y, value))
        })
        .collect()
}

/// Rescales sample coordinates from raster pixels onto a grid of
/// `grid_w × grid_h` cells covering the same extent.
pub fn rescale_samples(
    samples: &[SamplePoint],
    raster_w: usize,
    raster_h: usize,
    grid_w: usize,
    grid_h: usize,
) -> Vec<SamplePoint> {
    let sx = grid_w as f64 / raster_w as f64;
    let sy = grid_h as f64 / raster_h as f64;
    samples
        .iter()
        .map(|p| SamplePoint::new(p.x * sx, p.y * sy, p.value))
        .collect()
}

/// Writes `field` as an 8-bit grayscale PNG, `round(v * 255)` half-up.
pub fn write_field_png(field: &ScalarField, path: &Path) -> Result<()> {
    let pixels: Vec<u8> = field.values().iter().map(|&v| quantize_value(v)).collect();
    let img = GrayImage::from_raw(field.width() as u32, field.height() as u32, pixels)
        .ok_or_else(|| Error::invalid("field buffer does not match dimensions"))?;
    img.save_with_format(path, ImageFormat::Png)
        .map_err(|e| match e {
            image::ImageError::IoError(io) => Error::io(path, io),
            other => Error::Decode(other),
        })
}

/// Reads a grayscale PNG back into a field, `v = p / 255`.
pub fn read_field_png(path: &Path) -> Result<ScalarField> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let img = image::load_from_memory_with_format(&bytes, ImageFormat::Png)?.to_luma8();
    let values = img.pixels().map(|p| p.0[0] as f64 / 255.0).collect();
    ScalarField::new(img.width() as usize, img.height() as usize, values)
}

const FIELD_MAGIC: &[u8; 4] = b"GPFD";

/// Lossless field file: `GPFD`, width u32, height u32, then f64 values, all
/// little-endian.
pub fn write_field_raw(field: &ScalarField, path: &Path) -> Result<()> {
    let mut out = Vec::with_capacity(12 + field.len() * 8);
    out.extend_from_slice(FIELD_MAGIC);
    out.extend_from_slice(&(field.width() as u32).to_le_bytes());
    out.extend_from_slice(&(field.height() as u32).to_le_bytes());
    for v in field.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn read_field_raw(path: &Path) -> Result<ScalarField> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() < 12 || &bytes[..4] != FIELD_MAGIC {
        return Err(Error::Format(format!("{} is not a GPFD field file", path.display())));
    }
    let w = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let h = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let body = &bytes[12..];
    if body.len() != w * h * 8 {
        return Err(Error::Format("field file truncated".into()));
    }
    let values = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    ScalarField::new(w, h, values)
}

/// Reads a reference field from either a raw `GPFD` file or a grayscale PNG.
pub fn read_field_any(path: &Path) -> Result<ScalarField> {
    let mut head = [0u8; 4];
    let mut f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let n = std::io::Read::read(&mut f, &mut head).map_err(|e| Error::io(path, e))?;
    if n == 4 && &head == FIELD_MAGIC {
        read_field_raw(path)
    } else {
        read_field_png(path)
    }
}

/// Writes samples as CSV with header `x,y,value`. Values print in shortest
/// round-trip form, so reading them back is exact.
pub fn write_samples_csv(samples: &[SamplePoint], path: &Path) -> Result<()> {
    let mut out = String::from("x,y,value\n");
    for s in samples {
        out.push_str(&format!("{},{},{}\n", s.x, s.y, s.value));
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
}

pub fn read_samples_csv(path: &Path) -> Result<Vec<SamplePoint>> {
    let f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(f).lines();
    let header = lines
        .next()
        .transpose()
        .map_err(|e| Error::io(path, e))?
        .unwrap_or_default();
    if header.trim() != "x,y,value" {
        return Err(Error::Format(format!(
            "{}: expected header `x,y,value`",
            path.display()
        )));
    }
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<f64> = line
            .split(',')
            .map(|c| c.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Format(format!("{} line {}: {e}", path.display(), i + 2)))?;
        if cols.len() != 3 {
            return Err(Error::Format(format!(
                "{} line {}: expected 3 columns",
                path.display(),
                i + 2
            )));
        }
        out.push(SamplePoint::new(cols[0], cols[1], cols[2]));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use image::{Rgb as PxRgb, RgbImage};

    fn png_bytes(img: &RgbImage) -> Vec<u8> {
        let mut buf = std::io::Cursor::new(Vec::new());
        img.write_to(&mut buf, ImageFormat::Png).unwrap();
        buf.into_inner()
    }

    fn raster_from(w: usize, h: usize, f: impl Fn(usize, usize) -> bool) -> SemanticRaster {
        let mask = (0..h)
            .flat_map(|y| (0..w).map(move |x| (x, y)))
            .map(|(x, y)| f(x, y))
            .collect();
        SemanticRaster::from_mask(w, h, mask).unwrap()
    }

    #[test]
    fn exact_colour_match() {
        let mut img = RgbImage::new(2, 1);
        img.put_pixel(0, 0, PxRgb([255, 0, 0]));
        img.put_pixel(1, 0, PxRgb([0, 0, 0]));
        let r = load_orthomosaic(&png_bytes(&img), Rgb::RED).unwrap();
        assert_eq!(r.mask(), &[true, false]);
    }

    #[test]
    fn near_colours_do_not_match() {
        let mut img = RgbImage::new(3, 1);
        img.put_pixel(0, 0, PxRgb([254, 0, 0]));
        img.put_pixel(1, 0, PxRgb([255, 1, 0]));
        img.put_pixel(2, 0, PxRgb([255, 0, 0]));
        let r = load_orthomosaic(&png_bytes(&img), Rgb::RED).unwrap();
        assert_eq!(r.mask(), &[false, false, true]);
    }

    #[test]
    fn all_black_has_no_weeds() {
        let img = RgbImage::new(4, 4);
        for c in [Rgb::RED, Rgb::GREEN] {
            let r = load_orthomosaic(&png_bytes(&img), c).unwrap();
            assert_eq!(r.weed_count(), 0);
        }
    }

    #[test]
    fn decode_failure_is_an_error() {
        assert!(matches!(
            load_orthomosaic(b"not a png", Rgb::RED),
            Err(Error::Decode(_))
        ));
    }

    #[test]
    fn colour_parsing() {
        assert_eq!("255,0,0".parse::<Rgb>().unwrap(), Rgb::RED);
        assert_eq!(" 0, 255 ,0".parse::<Rgb>().unwrap(), Rgb::GREEN);
        assert!("1,2".parse::<Rgb>().is_err());
        assert!("1,2,300".parse::<Rgb>().is_err());
    }

    #[test]
    fn window_fractions() {
        let all = raster_from(300, 200, |_, _| true);
        assert_eq!(all.weed_fraction_window(10, 10, 150).unwrap(), 1.0);
        assert_eq!(all.weed_fraction_window(299, 199, 150).unwrap(), 1.0);

        let none = raster_from(50, 50, |_, _| false);
        assert_eq!(none.weed_fraction_window(25, 25, 10).unwrap(), 0.0);

        let left = raster_from(10, 10, |x, _| x < 5);
        assert_eq!(left.weed_fraction_window(5, 5, 10).unwrap(), 0.5);

        assert!(left.weed_fraction_window(5, 5, 0).is_err());
        assert!(left.weed_fraction_window(10, 5, 3).is_err());
    }

    #[test]
    fn border_windows_normalise_by_clipped_area() {
        // Only the top-left pixel is weed; a 3x3 window at the corner keeps 2x2.
        let r = raster_from(8, 8, |x, y| x == 0 && y == 0);
        assert_eq!(r.weed_fraction_window(0, 0, 3).unwrap(), 0.25);
    }

    #[test]
    fn window_translation_invariance() {
        let pattern = |x: usize, y: usize| (x * 7 + y * 3) % 5 == 0;
        let a = raster_from(40, 40, pattern);
        let b = raster_from(60, 60, |x, y| x >= 10 && y >= 5 && pattern(x - 10, y - 5));
        for (cx, cy) in [(15, 15), (20, 12), (25, 25)] {
            assert_eq!(
                a.weed_fraction_window(cx, cy, 9).unwrap(),
                b.weed_fraction_window(cx + 10, cy + 5, 9).unwrap()
            );
        }
    }

    #[test]
    fn sampling_is_seeded_and_bounded() {
        let r = raster_from(64, 48, |x, y| (x / 8 + y / 8) % 2 == 0);
        let a = sample_uniform(&r, 1000, 15, 3).unwrap();
        let b = sample_uniform(&r, 1000, 15, 3).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, sample_uniform(&r, 1000, 15, 4).unwrap());
        for p in &a {
            assert!((0.0..64.0).contains(&p.x) && (0.0..48.0).contains(&p.y));
            assert!((0.0..=1.0).contains(&p.value));
        }
        assert!(sample_uniform(&r, 0, 15, 3).is_err());
    }

    #[test]
    fn all_weed_samples_are_one() {
        let r = raster_from(20, 20, |_, _| true);
        for p in sample_uniform(&r, 5, 7, 11).unwrap() {
            assert_eq!(p.value, 1.0);
        }
    }

    #[test]
    fn sample_mean_converges_to_coverage() {
        // Window of 1 pixel makes each sample a Bernoulli draw of the coverage.
        let r = raster_from(100, 100, |x, y| (x * 31 + y * 17) % 7 < 2);
        let p = r.weed_count() as f64 / 10_000.0;
        let n = 10_000;
        let mean = sample_uniform(&r, n, 1, 99)
            .unwrap()
            .iter()
            .map(|s| s.value)
            .sum::<f64>()
            / n as f64;
        let sigma = (p * (1.0 - p) / n as f64).sqrt();
        assert!((mean - p).abs() < 3.0 * sigma, "mean {mean} vs {p}");
    }

    #[test]
    fn png_quantisation() {
        let tmp = tempfile::tempdir().unwrap();
        let path = tmp.path().join("f.png");
        let f = ScalarField::new(3, 1, vec![0.0, 0.5, 1.0]).unwrap();
        write_field_png(&f, &path).unwrap();
        let img = image::open(&path).unwrap().to_luma8();
        let px: Vec<u8> = img.pixels().map(|p| p.0[0]).collect();
        assert_eq!(px, vec![0, 128, 255]);
        let back = read_field_png(&path).unwrap();
        assert_eq!(back.quantize(), f.quantize());
    }

    #[test]
    fn raw_field_and_csv_round_trip() {
        let tmp = tempfile::tempdir().unwrap();
        let dir = tmp.path();
        let f = ScalarField::new(2, 2, vec![0.1, 0.2, 1.0 / 3.0, 0.9]).unwrap();
        write_field_raw(&f, &dir.join("f.gpfd")).unwrap();
        assert_eq!(read_field_any(&dir.join("f.gpfd")).unwrap(), f);

        let s = vec![
            SamplePoint::new(0.1, 2.0 / 3.0, 0.25),
            SamplePoint::new(1e-9, 3.5, 1.0),
        ];
        write_samples_csv(&s, &dir.join("s.csv")).unwrap();
        assert_eq!(read_samples_csv(&dir.join("s.csv")).unwrap(), s);
    }
}
