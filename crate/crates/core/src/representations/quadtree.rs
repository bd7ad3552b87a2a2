//! Quadtrees and their wedgelet refinement.

use super::stats::{Accumulator, Integral, Rect};
use crate::error::{Error, Result};
use crate::field::ScalarField;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadtreeParams {
    pub max_depth: u32,
    pub hom_thresh: f64,
}

impl Default for QuadtreeParams {
    fn default() -> Self {
        Self {
            max_depth: 9,
            hom_thresh: 2e-4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WedgeletParams {
    pub max_depth: u32,
    pub hom_thresh: f64,
    /// A non-homogeneous square becomes a wedge leaf when its best line
    /// leaves a two-sided residual variance at or below this.
    pub line_thresh: f64,
    /// Spacing of candidate endpoints along the square's perimeter, in cells.
    pub perimeter_step: u32,
    /// Upper bound on endpoints per side; the spacing widens on large squares.
    pub max_side_samples: u32,
}

impl Default for WedgeletParams {
    fn default() -> Self {
        Self {
            max_depth: 9,
            hom_thresh: 2e-4,
            line_thresh: 2e-4,
            perimeter_step: 2,
            max_side_samples: 32,
        }
    }
}

/// A straight line through two points of the cell-corner lattice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct WedgeLine {
    pub p: [u16; 2],
    pub q: [u16; 2],
}

impl WedgeLine {
    /// Twice the cross product `(q - p) × (centre - p)` for the centre of
    /// cell `(x, y)`; exact in integers. Positive means the first side.
    #[inline]
    pub fn side2(&self, x: u32, y: u32) -> i64 {
        let (px, py) = (self.p[0] as i64, self.p[1] as i64);
        let (dx, dy) = (self.q[0] as i64 - px, self.q[1] as i64 - py);
        dx * (2 * y as i64 + 1 - 2 * py) - dy * (2 * x as i64 + 1 - 2 * px)
    }

    #[inline]
    pub fn is_positive(&self, x: u32, y: u32) -> bool {
        self.side2(x, y) > 0
    }

    /// Columns of row `y` inside `[x0, x1)` that lie strictly on the
    /// positive side, and those whose centres lie exactly on the line, as
    /// `[start, end)` ranges.
    #[inline]
    fn row_spans(&self, y: u32, x0: u32, x1: u32) -> ((u32, u32), (u32, u32)) {
        let (px, py) = (self.p[0] as i64, self.p[1] as i64);
        let (dx, dy) = (self.q[0] as i64 - px, self.q[1] as i64 - py);
        // side2(x) = a - b x
        let a = dx * (2 * y as i64 + 1 - 2 * py) - dy * (1 - 2 * px);
        let b = 2 * dy;
        let (lo, hi) = (x0 as i64, x1 as i64);
        let empty = (lo, lo);
        let (pos, zero) = if b == 0 {
            match a.signum() {
                1 => ((lo, hi), empty),
                0 => (empty, (lo, hi)),
                _ => (empty, empty),
            }
        } else {
            let (a, b) = if b > 0 { (a, b) } else { (-a, -b) };
            // side2 > 0 <=> x < a / b for the original b > 0, x > a / b otherwise
            let pos = if dy > 0 {
                (lo, div_ceil(a, b).clamp(lo, hi))
            } else {
                ((div_floor(a, b) + 1).clamp(lo, hi), hi)
            };
            let zero = if a % b == 0 && (lo..hi).contains(&(a / b)) {
                (a / b, a / b + 1)
            } else {
                empty
            };
            (pos, zero)
        };
        let fix = |(s, e): (i64, i64)| (s as u32, e.max(s) as u32);
        (fix(pos), fix(zero))
    }

    fn reversed(&self) -> WedgeLine {
        WedgeLine { p: self.q, q: self.p }
    }
}

#[inline]
fn div_floor(a: i64, b: i64) -> i64 {
    a.div_euclid(b)
}

#[inline]
fn div_ceil(a: i64, b: i64) -> i64 {
    -((-a).div_euclid(b))
}

#[derive(Debug, Clone, PartialEq)]
pub enum QuadNode {
    Leaf {
        rect: Rect,
        value: f64,
    },
    /// A square split by one line; `positive` holds the mean of the cells
    /// on the positive side, `negative` the rest.
    Wedge {
        rect: Rect,
        line: WedgeLine,
        positive: f64,
        negative: f64,
    },
    Internal {
        rect: Rect,
        children: Vec<QuadNode>,
    },
}

impl QuadNode {
    pub fn rect(&self) -> Rect {
        match self {
            QuadNode::Leaf { rect, .. }
            | QuadNode::Wedge { rect, .. }
            | QuadNode::Internal { rect, .. } => *rect,
        }
    }
}

/// Quadtree (or wedgelet tree) over a `width × height` field.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadTree {
    pub width: usize,
    pub height: usize,
    pub root: QuadNode,
}

/// The children of `r` in a quadtree split: four quadrants split at the
/// rounded-up midpoint, or two halves when one side is a single cell. A
/// single cell has none.
pub fn split_rect(r: Rect) -> Vec<Rect> {
    let (w, h) = (r.width(), r.height());
    let mx = r.x0 + w.div_ceil(2);
    let my = r.y0 + h.div_ceil(2);
    match (w >= 2, h >= 2) {
        (true, true) => vec![
            Rect::new(r.x0, r.y0, mx, my),
            Rect::new(mx, r.y0, r.x1, my),
            Rect::new(r.x0, my, mx, r.y1),
            Rect::new(mx, my, r.x1, r.y1),
        ],
        (true, false) => vec![Rect::new(r.x0, r.y0, mx, r.y1), Rect::new(mx, r.y0, r.x1, r.y1)],
        (false, true) => vec![Rect::new(r.x0, r.y0, r.x1, my), Rect::new(r.x0, my, r.x1, r.y1)],
        (false, false) => Vec::new(),
    }
}

fn rect_mean(field: &ScalarField, r: Rect) -> f64 {
    let mut acc = Accumulator::new(field.get(r.x0 as usize, r.y0 as usize));
    for y in r.y0..r.y1 {
        for x in r.x0..r.x1 {
            acc.push(field.get(x as usize, y as usize));
        }
    }
    acc.finish().map(|s| s.mean).unwrap_or(0.0)
}

fn check_dims(field: &ScalarField) -> Result<()> {
    if field.width() > u16::MAX as usize || field.height() > u16::MAX as usize {
        return Err(Error::invalid("quadtree fields are limited to 65535 cells per side"));
    }
    Ok(())
}

/// Recursive four-way split; a node is a leaf once its variance is at most
/// `hom_thresh`, it sits at `max_depth`, or it is a single cell.
pub fn build_quadtree(field: &ScalarField, params: &QuadtreeParams) -> Result<QuadTree> {
    check_dims(field)?;
    let ii = Integral::new(field);
    let root = Rect::new(0, 0, field.width() as u32, field.height() as u32);
    Ok(QuadTree {
        width: field.width(),
        height: field.height(),
        root: quad_node(field, &ii, root, 0, params),
    })
}

fn quad_node(field: &ScalarField, ii: &Integral, rect: Rect, depth: u32, p: &QuadtreeParams) -> QuadNode {
    let children = split_rect(rect);
    if depth >= p.max_depth || children.is_empty() || ii.rect_stats(rect).variance <= p.hom_thresh {
        return QuadNode::Leaf {
            rect,
            value: rect_mean(field, rect),
        };
    }
    QuadNode::Internal {
        rect,
        children: children
            .into_iter()
            .map(|c| quad_node(field, ii, c, depth + 1, p))
            .collect(),
    }
}

/// Quadtree recursion where each square about to be split is first offered
/// a single dividing line. If the best line's residual variance is at most
/// `line_thresh`, the square becomes a wedge leaf instead.
pub fn build_wedgelet(field: &ScalarField, params: &WedgeletParams) -> Result<QuadTree> {
    check_dims(field)?;
    if params.perimeter_step == 0 || params.max_side_samples == 0 {
        return Err(Error::invalid("wedgelet perimeter sampling must be positive"));
    }
    let ii = Integral::new(field);
    let root = Rect::new(0, 0, field.width() as u32, field.height() as u32);
    Ok(QuadTree {
        width: field.width(),
        height: field.height(),
        root: wedge_node(field, &ii, root, 0, params),
    })
}

fn wedge_node(field: &ScalarField, ii: &Integral, rect: Rect, depth: u32, p: &WedgeletParams) -> QuadNode {
    let children = split_rect(rect);
    let stats = ii.rect_stats(rect);
    if depth >= p.max_depth || children.is_empty() || stats.variance <= p.hom_thresh {
        return QuadNode::Leaf {
            rect,
            value: rect_mean(field, rect),
        };
    }
    if let Some((line, sse)) = best_line(ii, rect, p) {
        if sse / rect.area() as f64 <= p.line_thresh {
            let (pos, neg) = wedge_means(field, rect, &line);
            return QuadNode::Wedge {
                rect,
                line,
                positive: pos,
                negative: neg,
            };
        }
    }
    QuadNode::Internal {
        rect,
        children: children
            .into_iter()
            .map(|c| wedge_node(field, ii, c, depth + 1, p))
            .collect(),
    }
}

/// Candidate endpoints on the boundary of `rect`, walking clockwise from
/// the top-left corner. Each entry carries the side it was sampled on.
pub(crate) fn perimeter_points(rect: Rect, step: u32, max_per_side: u32) -> Vec<([u16; 2], u8)> {
    let (x0, y0, x1, y1) = (rect.x0, rect.y0, rect.x1, rect.y1);
    let mut pts = Vec::new();
    let mut side = |len: u32, id: u8, at: &dyn Fn(u32) -> (u32, u32)| {
        let s = step.max(len.div_ceil(max_per_side)).max(1);
        let mut t = 0;
        while t < len {
            let (x, y) = at(t);
            pts.push(([x as u16, y as u16], id));
            t += s;
        }
    };
    side(x1 - x0, 0, &|t| (x0 + t, y0));
    side(y1 - y0, 1, &|t| (x1, y0 + t));
    side(x1 - x0, 2, &|t| (x1 - t, y1));
    side(y1 - y0, 3, &|t| (x0, y1 - t));
    pts
}

/// The candidate line with the lowest two-sided squared error, ties to the
/// earliest pair in perimeter order. Both orientations of each pair are
/// tried, since cells centred on the line fall on the negative side. Lines
/// leaving either side empty are skipped.
fn best_line(ii: &Integral, rect: Rect, p: &WedgeletParams) -> Option<(WedgeLine, f64)> {
    let pts = perimeter_points(rect, p.perimeter_step, p.max_side_samples);
    let n = rect.area();
    let (t1, t2) = ii.sums(rect.x0 as usize, rect.y0 as usize, rect.x1 as usize, rect.y1 as usize);
    let sse = |c: usize, s1: f64, s2: f64| {
        if c == 0 || c == n {
            return None;
        }
        let (cp, cn) = (c as f64, (n - c) as f64);
        let (n1, n2) = (t1 - s1, t2 - s2);
        Some(((s2 - s1 * s1 / cp) + (n2 - n1 * n1 / cn)).max(0.0))
    };
    let mut best: Option<(WedgeLine, f64)> = None;
    for i in 0..pts.len() {
        for j in (i + 1)..pts.len() {
            if pts[i].1 == pts[j].1 {
                continue;
            }
            let line = WedgeLine {
                p: pts[i].0,
                q: pts[j].0,
            };
            let (mut cp, mut p1, mut p2) = (0usize, 0.0, 0.0);
            let (mut cz, mut z1, mut z2) = (0usize, 0.0, 0.0);
            for y in rect.y0..rect.y1 {
                let ((a, b), (za, zb)) = line.row_spans(y, rect.x0, rect.x1);
                if b > a {
                    let (r1, r2) = ii.sums(a as usize, y as usize, b as usize, y as usize + 1);
                    cp += (b - a) as usize;
                    p1 += r1;
                    p2 += r2;
                }
                if zb > za {
                    let (r1, r2) = ii.sums(za as usize, y as usize, zb as usize, y as usize + 1);
                    cz += (zb - za) as usize;
                    z1 += r1;
                    z2 += r2;
                }
            }
            // Reversing the line moves the on-line cells to the other side.
            let options = [
                (line, sse(cp, p1, p2)),
                (line.reversed(), sse(cp + cz, p1 + z1, p2 + z2)),
            ];
            for (l, e) in options {
                if let Some(e) = e {
                    if best.as_ref().is_none_or(|b| e < b.1) {
                        best = Some((l, e));
                    }
                }
            }
        }
    }
    best
}

fn wedge_means(field: &ScalarField, rect: Rect, line: &WedgeLine) -> (f64, f64) {
    let first = field.get(rect.x0 as usize, rect.y0 as usize);
    let mut pos = Accumulator::new(first);
    let mut neg = Accumulator::new(first);
    for y in rect.y0..rect.y1 {
        for x in rect.x0..rect.x1 {
            let v = field.get(x as usize, y as usize);
            if line.is_positive(x, y) {
                pos.push(v);
            } else {
                neg.push(v);
            }
        }
    }
    (
        pos.finish().map(|s| s.mean).unwrap_or(0.0),
        neg.finish().map(|s| s.mean).unwrap_or(0.0),
    )
}

impl QuadTree {
    pub fn leaf_count(&self) -> usize {
        fn count(n: &QuadNode) -> usize {
            match n {
                QuadNode::Leaf { .. } => 1,
                QuadNode::Wedge { .. } => 2,
                QuadNode::Internal { children, .. } => children.iter().map(count).sum(),
            }
        }
        count(&self.root)
    }

    pub fn render_into(&self, out: &mut [f64]) {
        fn fill(n: &QuadNode, w: usize, out: &mut [f64]) {
            match n {
                QuadNode::Leaf { rect, value } => {
                    for y in rect.y0..rect.y1 {
                        let row = y as usize * w;
                        out[row + rect.x0 as usize..row + rect.x1 as usize].fill(*value);
                    }
                }
                QuadNode::Wedge {
                    rect,
                    line,
                    positive,
                    negative,
                } => {
                    for y in rect.y0..rect.y1 {
                        for x in rect.x0..rect.x1 {
                            out[y as usize * w + x as usize] =
                                if line.is_positive(x, y) { *positive } else { *negative };
                        }
                    }
                }
                QuadNode::Internal { children, .. } => {
                    for c in children {
                        fill(c, w, out);
                    }
                }
            }
        }
        fill(&self.root, self.width, out);
    }

    /// Value at cell `(x, y)` by descending from the root.
    pub fn locate(&self, x: u32, y: u32) -> Option<f64> {
        let mut node = &self.root;
        loop {
            match node {
                QuadNode::Leaf { rect, value } => return rect.contains(x, y).then_some(*value),
                QuadNode::Wedge {
                    rect,
                    line,
                    positive,
                    negative,
                } => {
                    return rect
                        .contains(x, y)
                        .then(|| if line.is_positive(x, y) { *positive } else { *negative })
                }
                QuadNode::Internal { children, .. } => {
                    node = children.iter().find(|c| c.rect().contains(x, y))?;
                }
            }
        }
    }
}
