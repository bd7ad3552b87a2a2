//! Region statistics shared by every builder.

use crate::error::{Error, Result};
use crate::field::ScalarField;

/// Mean, population variance and cell count of a region.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionStats {
    pub mean: f64,
    pub variance: f64,
    pub count: usize,
}

/// Half-open cell rectangle `[x0, x1) × [y0, y1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Rect {
    pub x0: u32,
    pub y0: u32,
    pub x1: u32,
    pub y1: u32,
}

impl Rect {
    pub const fn new(x0: u32, y0: u32, x1: u32, y1: u32) -> Self {
        Self { x0, y0, x1, y1 }
    }

    #[inline]
    pub fn width(&self) -> u32 {
        self.x1 - self.x0
    }

    #[inline]
    pub fn height(&self) -> u32 {
        self.y1 - self.y0
    }

    #[inline]
    pub fn area(&self) -> usize {
        self.width() as usize * self.height() as usize
    }

    #[inline]
    pub fn contains(&self, x: u32, y: u32) -> bool {
        x >= self.x0 && x < self.x1 && y >= self.y0 && y < self.y1
    }
}

/// A set of field cells, described one of three ways.
#[derive(Debug, Clone, Copy)]
pub enum Region<'a> {
    /// Row-major cell indices.
    Cells(&'a [usize]),
    Rect(Rect),
    /// Convex or simple polygon in continuous field coordinates (cell `(x, y)`
    /// spans `[x, x+1) × [y, y+1)`). A cell belongs when its centre is inside.
    Polygon(&'a [[f64; 2]]),
}

/// Statistics of `field` over the cells whose centres fall in `region`.
///
/// Polygon membership: a centre strictly inside every edge is in. A centre
/// exactly on an edge belongs to this polygon only if that edge faces the
/// negative x direction (or, for horizontal edges, negative y), so two
/// polygons sharing an edge never both claim a cell.
pub fn region_stats(field: &ScalarField, region: Region<'_>) -> Result<RegionStats> {
    let mut acc = Accumulator::new(field.mean());
    match region {
        Region::Cells(cells) => {
            for &i in cells {
                if i >= field.len() {
                    return Err(Error::invalid(format!("cell index {i} outside field")));
                }
                acc.push(field.values()[i]);
            }
        }
        Region::Rect(r) => {
            let x1 = (r.x1 as usize).min(field.width());
            let y1 = (r.y1 as usize).min(field.height());
            for y in r.y0 as usize..y1 {
                for x in r.x0 as usize..x1 {
                    acc.push(field.get(x, y));
                }
            }
        }
        Region::Polygon(poly) => {
            if poly.len() < 3 {
                return Err(Error::invalid("polygon needs at least 3 vertices"));
            }
            let (mut xmin, mut xmax, mut ymin, mut ymax) =
                (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
            for p in poly {
                xmin = xmin.min(p[0]);
                xmax = xmax.max(p[0]);
                ymin = ymin.min(p[1]);
                ymax = ymax.max(p[1]);
            }
            let clamp = |v: f64, n: usize| (v.max(0.0) as usize).min(n);
            let (cx0, cx1) = (clamp((xmin - 0.5).floor(), field.width()), clamp((xmax + 0.5).ceil(), field.width()));
            let (cy0, cy1) = (clamp((ymin - 0.5).floor(), field.height()), clamp((ymax + 0.5).ceil(), field.height()));
            let orient = signed_area(poly).signum();
            for y in cy0..cy1 {
                for x in cx0..cx1 {
                    if polygon_contains(poly, orient, x as f64 + 0.5, y as f64 + 0.5) {
                        acc.push(field.get(x, y));
                    }
                }
            }
        }
    }
    acc.finish()
        .ok_or_else(|| Error::invalid("region contains no cell centres"))
}

pub(crate) fn signed_area(poly: &[[f64; 2]]) -> f64 {
    let n = poly.len();
    (0..n)
        .map(|i| {
            let a = poly[i];
            let b = poly[(i + 1) % n];
            a[0] * b[1] - b[0] * a[1]
        })
        .sum::<f64>()
        * 0.5
}

fn polygon_contains(poly: &[[f64; 2]], orient: f64, px: f64, py: f64) -> bool {
    let n = poly.len();
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        let (ex, ey) = (b[0] - a[0], b[1] - a[1]);
        let c = orient * (ex * (py - a[1]) - ey * (px - a[0]));
        if c < 0.0 {
            return false;
        }
        if c == 0.0 {
            // Outward normal of the edge for a positively oriented polygon.
            let (nx, ny) = (orient * ey, -orient * ex);
            let owns = nx < 0.0 || (nx == 0.0 && ny < 0.0);
            if !owns {
                return false;
            }
        }
    }
    true
}

/// Running mean/variance over values shifted by a reference, which keeps
/// the sum-of-squares form accurate for near-constant regions.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Accumulator {
    shift: f64,
    sum: f64,
    sumsq: f64,
    count: usize,
}

impl Accumulator {
    pub(crate) fn new(shift: f64) -> Self {
        Self {
            shift,
            sum: 0.0,
            sumsq: 0.0,
            count: 0,
        }
    }

    #[inline]
    pub(crate) fn push(&mut self, v: f64) {
        let d = v - self.shift;
        self.sum += d;
        self.sumsq += d * d;
        self.count += 1;
    }

    /// Fold in another accumulator built with the same shift.
    pub(crate) fn absorb(&mut self, other: &Accumulator) {
        debug_assert_eq!(self.shift, other.shift);
        self.sum += other.sum;
        self.sumsq += other.sumsq;
        self.count += other.count;
    }

    pub(crate) fn finish(&self) -> Option<RegionStats> {
        if self.count == 0 {
            return None;
        }
        let n = self.count as f64;
        let m = self.sum / n;
        Some(RegionStats {
            mean: self.shift + m,
            variance: (self.sumsq / n - m * m).max(0.0),
            count: self.count,
        })
    }
}

/// Summed-area tables of the (shifted) values and their squares, for O(1)
/// rectangle statistics.
#[derive(Debug, Clone)]
pub(crate) struct Integral {
    stride: usize,
    shift: f64,
    s1: Vec<f64>,
    s2: Vec<f64>,
}

impl Integral {
    pub(crate) fn new(field: &ScalarField) -> Self {
        let (w, h) = (field.width(), field.height());
        let stride = w + 1;
        let shift = field.mean();
        let mut s1 = vec![0.0; stride * (h + 1)];
        let mut s2 = vec![0.0; stride * (h + 1)];
        for y in 0..h {
            let (mut r1, mut r2) = (0.0, 0.0);
            for x in 0..w {
                let d = field.get(x, y) - shift;
                r1 += d;
                r2 += d * d;
                s1[(y + 1) * stride + x + 1] = s1[y * stride + x + 1] + r1;
                s2[(y + 1) * stride + x + 1] = s2[y * stride + x + 1] + r2;
            }
        }
        Self {
            stride,
            shift,
            s1,
            s2,
        }
    }

    #[inline]
    fn corner(&self, t: &[f64], x0: usize, y0: usize, x1: usize, y1: usize) -> f64 {
        let s = self.stride;
        t[y1 * s + x1] - t[y0 * s + x1] - t[y1 * s + x0] + t[y0 * s + x0]
    }

    /// Shifted `(sum, sum of squares)` over `[x0, x1) × [y0, y1)`.
    #[inline]
    pub(crate) fn sums(&self, x0: usize, y0: usize, x1: usize, y1: usize) -> (f64, f64) {
        (
            self.corner(&self.s1, x0, y0, x1, y1),
            self.corner(&self.s2, x0, y0, x1, y1),
        )
    }

    pub(crate) fn rect_stats(&self, r: Rect) -> RegionStats {
        let (x0, y0, x1, y1) = (r.x0 as usize, r.y0 as usize, r.x1 as usize, r.y1 as usize);
        let (s1, s2) = self.sums(x0, y0, x1, y1);
        let n = r.area() as f64;
        let m = s1 / n;
        RegionStats {
            mean: self.shift + m,
            variance: (s2 / n - m * m).max(0.0),
            count: r.area(),
        }
    }
}
