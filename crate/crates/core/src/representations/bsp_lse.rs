//! Top-down binary space partitioning by least squared error.

use rayon::prelude::*;

use super::stats::Accumulator;
use crate::error::{Error, Result};
use crate::field::ScalarField;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BspLseParams {
    pub max_depth: u32,
    pub hom_thresh: f64,
    /// Angular spacing of candidate lines in degrees; must divide 180 into
    /// whole centidegrees.
    pub angle_step: f64,
    /// Spacing of candidate offsets along each direction, in cells.
    pub offset_step: u32,
    /// Candidates kept after coarse scoring for the exact error pass.
    pub prune_keep: usize,
}

impl Default for BspLseParams {
    fn default() -> Self {
        Self {
            max_depth: 9,
            hom_thresh: 2e-4,
            angle_step: 5.0,
            offset_step: 2,
            prune_keep: 16,
        }
    }
}

impl BspLseParams {
    fn angle_step_centideg(&self) -> Result<u16> {
        let c = (self.angle_step * 100.0).round();
        if !(c >= 1.0 && c <= 18000.0) || (c - self.angle_step * 100.0).abs() > 1e-6 || 18000 % (c as u32) != 0 {
            return Err(Error::invalid(format!(
                "angle step {} does not divide 180 degrees",
                self.angle_step
            )));
        }
        Ok(c as u16)
    }
}

/// The line `(x, y)·(cos θ, sin θ) = offset`. Cell `(x, y)` is in front when
/// the projection of its centre is at least `offset`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SplitLine {
    /// θ in hundredths of a degree, in `[0, 18000)`.
    pub centideg: u16,
    /// Offset in cells.
    pub offset: i32,
}

/// `(cos θ, sin θ)` for θ in centidegrees, computed so that angles related
/// by symmetry get components of exactly equal magnitude.
pub fn unit_vector(centideg: u16) -> (f64, f64) {
    let a = centideg as i32 % 18000;
    let first = |a: i32| -> (f64, f64) {
        // a in [0, 9000]
        if a == 4500 {
            (std::f64::consts::FRAC_1_SQRT_2, std::f64::consts::FRAC_1_SQRT_2)
        } else if a < 4500 {
            let t = (a as f64 / 18000.0) * std::f64::consts::PI;
            (t.cos(), t.sin())
        } else {
            let t = ((9000 - a) as f64 / 18000.0) * std::f64::consts::PI;
            (t.sin(), t.cos())
        }
    };
    if a <= 9000 {
        first(a)
    } else {
        let (c, s) = first(18000 - a);
        (-c, s)
    }
}

impl SplitLine {
    #[inline]
    pub fn projection(&self, x: u32, y: u32) -> f64 {
        let (c, s) = unit_vector(self.centideg);
        project(c, s, x, y)
    }

    #[inline]
    pub fn is_front(&self, x: u32, y: u32) -> bool {
        self.projection(x, y) >= self.offset as f64
    }
}

#[inline]
fn project(c: f64, s: f64, x: u32, y: u32) -> f64 {
    (x as f64 + 0.5) * c + (y as f64 + 0.5) * s
}

/// One side of a split: the cells in front of `line` when `front` is true,
/// the cells behind it otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct HalfPlane {
    pub line: SplitLine,
    pub front: bool,
}

impl HalfPlane {
    #[inline]
    pub fn contains(&self, x: u32, y: u32) -> bool {
        self.line.is_front(x, y) == self.front
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum BspNode {
    Leaf {
        polygon: Vec<[f64; 2]>,
        value: f64,
    },
    Internal {
        polygon: Vec<[f64; 2]>,
        line: SplitLine,
        front: Box<BspNode>,
        back: Box<BspNode>,
    },
}

impl BspNode {
    /// Convex region of the node in continuous coordinates, counter-clockwise
    /// in the `(x, y)` plane.
    pub fn polygon(&self) -> &[[f64; 2]] {
        match self {
            BspNode::Leaf { polygon, .. } | BspNode::Internal { polygon, .. } => polygon,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BspLseTree {
    pub width: usize,
    pub height: usize,
    pub root: BspNode,
}

/// A node of the tree with the half-planes that carve out its region.
#[derive(Debug, Clone)]
pub struct BspNodeInfo {
    pub depth: u32,
    pub constraints: Vec<HalfPlane>,
    pub leaf: bool,
}

pub fn build_bsp_lse(field: &ScalarField, params: &BspLseParams) -> Result<BspLseTree> {
    let step = params.angle_step_centideg()?;
    if params.offset_step == 0 || params.prune_keep == 0 {
        return Err(Error::invalid("offset_step and prune_keep must be positive"));
    }
    if field.width() > i32::MAX as usize / 4 || field.height() > i32::MAX as usize / 4 {
        return Err(Error::invalid("field too large"));
    }
    let angles: Vec<(u16, f64, f64)> = (0..18000 / step)
        .map(|i| {
            let a = i * step;
            let (c, s) = unit_vector(a);
            (a, c, s)
        })
        .collect();
    let cells: Vec<u32> = (0..field.len() as u32).collect();
    let ctx = Ctx {
        field,
        params,
        angles,
    };
    Ok(BspLseTree {
        width: field.width(),
        height: field.height(),
        root: ctx.node(cells, rect_polygon(field.width(), field.height()), 0),
    })
}

pub(crate) fn rect_polygon(w: usize, h: usize) -> Vec<[f64; 2]> {
    vec![[0.0, 0.0], [w as f64, 0.0], [w as f64, h as f64], [0.0, h as f64]]
}

struct Ctx<'a> {
    field: &'a ScalarField,
    params: &'a BspLseParams,
    angles: Vec<(u16, f64, f64)>,
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    score: f64,
    angle: usize,
    k: i64,
}

impl Ctx<'_> {
    fn xy(&self, i: u32) -> (u32, u32) {
        let w = self.field.width() as u32;
        (i % w, i / w)
    }

    fn stats(&self, cells: &[u32]) -> (f64, f64) {
        let shift = self.field.values()[cells[0] as usize];
        let mut acc = Accumulator::new(shift);
        for &i in cells {
            acc.push(self.field.values()[i as usize]);
        }
        let s = acc.finish().expect("node regions are never empty");
        (s.mean, s.variance)
    }

    fn node(&self, cells: Vec<u32>, polygon: Vec<[f64; 2]>, depth: u32) -> BspNode {
        let (mean, variance) = self.stats(&cells);
        if depth >= self.params.max_depth || variance <= self.params.hom_thresh || cells.len() < 2 {
            return BspNode::Leaf { polygon, value: mean };
        }
        let Some(line) = self.best_split(&cells) else {
            return BspNode::Leaf { polygon, value: mean };
        };
        let (c, s) = unit_vector(line.centideg);
        let o = line.offset as f64;
        let (front, back): (Vec<u32>, Vec<u32>) = cells.into_iter().partition(|&i| {
            let (x, y) = self.xy(i);
            project(c, s, x, y) >= o
        });
        let fpoly = clip(&polygon, c, s, o, true);
        let bpoly = clip(&polygon, c, s, o, false);
        let (f, b) = if front.len() + back.len() > 1 << 15 {
            rayon::join(
                || self.node(front, fpoly, depth + 1),
                || self.node(back, bpoly, depth + 1),
            )
        } else {
            (self.node(front, fpoly, depth + 1), self.node(back, bpoly, depth + 1))
        };
        BspNode::Internal {
            polygon,
            line,
            front: Box::new(f),
            back: Box::new(b),
        }
    }

    /// Coarse pass: per direction, bin the cell projections by offset step
    /// and score every bin boundary by its between-side gap,
    /// `n_b·n_f/n·(m_b − m_f)²`. The best `prune_keep` survive to an exact
    /// squared-error comparison.
    fn best_split(&self, cells: &[u32]) -> Option<SplitLine> {
        let step = self.params.offset_step as f64;
        let shift = self.field.values()[cells[0] as usize];
        let n = cells.len() as f64;
        let mut cands: Vec<Candidate> = self
            .angles
            .par_iter()
            .enumerate()
            .flat_map_iter(|(ai, &(_, c, s))| {
                let (mut bmin, mut bmax) = (i64::MAX, i64::MIN);
                let bins: Vec<i64> = cells
                    .iter()
                    .map(|&i| {
                        let (x, y) = self.xy(i);
                        let b = (project(c, s, x, y) / step).floor() as i64;
                        bmin = bmin.min(b);
                        bmax = bmax.max(b);
                        b
                    })
                    .collect();
                let nb = (bmax - bmin + 1) as usize;
                let mut cnt = vec![0usize; nb];
                let mut sum = vec![0.0; nb];
                for (&b, &i) in bins.iter().zip(cells) {
                    let j = (b - bmin) as usize;
                    cnt[j] += 1;
                    sum[j] += self.field.values()[i as usize] - shift;
                }
                let total: f64 = sum.iter().sum();
                let mut out = Vec::with_capacity(nb.saturating_sub(1));
                let (mut cb, mut sb) = (0usize, 0.0);
                for j in 0..nb.saturating_sub(1) {
                    cb += cnt[j];
                    sb += sum[j];
                    if cnt[j] == 0 {
                        continue;
                    }
                    let cf = n - cb as f64;
                    let gap = sb / cb as f64 - (total - sb) / cf;
                    out.push(Candidate {
                        score: cb as f64 * cf / n * gap * gap,
                        angle: ai,
                        k: bmin + j as i64 + 1,
                    });
                }
                out
            })
            .collect();
        cands.sort_by(|a, b| {
            b.score
                .total_cmp(&a.score)
                .then(a.angle.cmp(&b.angle))
                .then(a.k.cmp(&b.k))
        });
        cands.truncate(self.params.prune_keep);
        cands.sort_by(|a, b| a.angle.cmp(&b.angle).then(a.k.cmp(&b.k)));

        let mut best: Option<(f64, SplitLine)> = None;
        for cand in cands {
            let (a, c, s) = self.angles[cand.angle];
            let offset = cand.k * self.params.offset_step as i64;
            let o = offset as f64;
            let mut fa = Accumulator::new(shift);
            let mut ba = Accumulator::new(shift);
            for &i in cells {
                let (x, y) = self.xy(i);
                let v = self.field.values()[i as usize];
                if project(c, s, x, y) >= o {
                    fa.push(v);
                } else {
                    ba.push(v);
                }
            }
            let (Some(f), Some(b)) = (fa.finish(), ba.finish()) else {
                continue;
            };
            let sse = f.variance * f.count as f64 + b.variance * b.count as f64;
            if best.as_ref().is_none_or(|(e, _)| sse < *e) {
                best = Some((
                    sse,
                    SplitLine {
                        centideg: a,
                        offset: offset as i32,
                    },
                ));
            }
        }
        best.map(|(_, l)| l)
    }
}

/// Clip a convex polygon to one side of `x·c + y·s = o`.
pub(crate) fn clip(poly: &[[f64; 2]], c: f64, s: f64, o: f64, front: bool) -> Vec<[f64; 2]> {
    let side = |p: &[f64; 2]| {
        let d = p[0] * c + p[1] * s - o;
        if front {
            d
        } else {
            -d
        }
    };
    let mut out = Vec::with_capacity(poly.len() + 1);
    for i in 0..poly.len() {
        let a = poly[i];
        let b = poly[(i + 1) % poly.len()];
        let (da, db) = (side(&a), side(&b));
        if da >= 0.0 {
            out.push(a);
        }
        if (da >= 0.0) != (db >= 0.0) {
            let t = da / (da - db);
            out.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
        }
    }
    out
}

impl BspLseTree {
    pub fn leaf_count(&self) -> usize {
        fn count(n: &BspNode) -> usize {
            match n {
                BspNode::Leaf { .. } => 1,
                BspNode::Internal { front, back, .. } => count(front) + count(back),
            }
        }
        count(&self.root)
    }

    pub fn locate(&self, x: u32, y: u32) -> f64 {
        let mut node = &self.root;
        loop {
            match node {
                BspNode::Leaf { value, .. } => return *value,
                BspNode::Internal { line, front, back, .. } => {
                    node = if line.is_front(x, y) { front } else { back };
                }
            }
        }
    }

    pub fn render_into(&self, out: &mut [f64]) {
        let w = self.width;
        out.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
            for (x, v) in row.iter_mut().enumerate() {
                *v = self.locate(x as u32, y as u32);
            }
        });
    }

    /// Every node in preorder with its depth and defining half-planes.
    pub fn nodes(&self) -> Vec<BspNodeInfo> {
        fn walk(n: &BspNode, depth: u32, path: &mut Vec<HalfPlane>, out: &mut Vec<BspNodeInfo>) {
            out.push(BspNodeInfo {
                depth,
                constraints: path.clone(),
                leaf: matches!(n, BspNode::Leaf { .. }),
            });
            if let BspNode::Internal { line, front, back, .. } = n {
                path.push(HalfPlane { line: *line, front: true });
                walk(front, depth + 1, path, out);
                path.pop();
                path.push(HalfPlane { line: *line, front: false });
                walk(back, depth + 1, path, out);
                path.pop();
            }
        }
        let mut out = Vec::new();
        walk(&self.root, 0, &mut Vec::new(), &mut out);
        out
    }

    /// Leaves in preorder as `(half-planes, value)`.
    pub fn leaf_regions(&self) -> Vec<(Vec<HalfPlane>, f64)> {
        fn walk(n: &BspNode, path: &mut Vec<HalfPlane>, out: &mut Vec<(Vec<HalfPlane>, f64)>) {
            match n {
                BspNode::Leaf { value, .. } => out.push((path.clone(), *value)),
                BspNode::Internal { line, front, back, .. } => {
                    path.push(HalfPlane { line: *line, front: true });
                    walk(front, path, out);
                    path.pop();
                    path.push(HalfPlane { line: *line, front: false });
                    walk(back, path, out);
                    path.pop();
                }
            }
        }
        let mut out = Vec::new();
        walk(&self.root, &mut Vec::new(), &mut out);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::representations::quadtree::{build_quadtree, QuadtreeParams};
    use crate::representations::stats::signed_area;
    use crate::rng::SeededRng;

    fn render(t: &BspLseTree) -> Vec<f64> {
        let mut out = vec![f64::NAN; t.width * t.height];
        t.render_into(&mut out);
        out
    }

    fn sse(a: &[f64], f: &ScalarField) -> f64 {
        a.iter().zip(f.values()).map(|(u, v)| (u - v).powi(2)).sum()
    }

    #[test]
    fn unit_vectors_are_symmetric() {
        for a in (0..18000u16).step_by(25) {
            let (c, s) = unit_vector(a);
            assert!((c * c + s * s - 1.0).abs() < 1e-15);
            let t = a as f64 / 18000.0 * std::f64::consts::PI;
            assert!((c - t.cos()).abs() < 1e-15 && (s - t.sin()).abs() < 1e-15);
        }
        assert_eq!(unit_vector(0), (1.0, 0.0));
        assert_eq!(unit_vector(9000), (0.0, 1.0));
        let (c, s) = unit_vector(13500);
        assert_eq!(-c, s);
    }

    #[test]
    fn bad_angle_step() {
        let f = ScalarField::constant(4, 4, 0.0).unwrap();
        for step in [7.0, 0.0, -5.0, 0.001] {
            let p = BspLseParams {
                angle_step: step,
                ..BspLseParams::default()
            };
            assert!(build_bsp_lse(&f, &p).is_err(), "{step}");
        }
    }

    #[test]
    fn constant_field_is_one_leaf() {
        let f = ScalarField::constant(30, 17, 0.3).unwrap();
        let t = build_bsp_lse(&f, &BspLseParams::default()).unwrap();
        assert_eq!(t.leaf_count(), 1);
    }

    #[test]
    fn vertical_half_field() {
        let f = ScalarField::from_fn(32, 24, |x, _| if x < 16 { 0.2 } else { 0.7 }).unwrap();
        let t = build_bsp_lse(&f, &BspLseParams::default()).unwrap();
        assert_eq!(t.leaf_count(), 2);
        match &t.root {
            BspNode::Internal { line, front, back, .. } => {
                assert_eq!(*line, SplitLine { centideg: 0, offset: 16 });
                assert!(matches!(**front, BspNode::Leaf { value, .. } if (value - 0.7).abs() < 1e-15));
                assert!(matches!(**back, BspNode::Leaf { value, .. } if (value - 0.2).abs() < 1e-15));
            }
            _ => panic!("expected a split"),
        }
        assert_eq!(render(&t), f.values());
    }

    #[test]
    fn diagonal_beats_quadtree_with_fewer_leaves() {
        let f = ScalarField::from_fn(32, 32, |x, y| if y >= x { 0.9 } else { 0.1 }).unwrap();
        let t = build_bsp_lse(&f, &BspLseParams::default()).unwrap();
        assert_eq!(t.leaf_count(), 2);
        assert_eq!(sse(&render(&t), &f), 0.0);
        for depth in 0..=9 {
            let q = build_quadtree(&f, &QuadtreeParams { max_depth: depth, hom_thresh: 2e-4 }).unwrap();
            let mut out = vec![0.0; 32 * 32];
            q.render_into(&mut out);
            assert!(sse(&out, &f) > 0.0 || q.leaf_count() > 2);
        }
    }

    /// The same search without the coarse pruning, over every angle and
    /// every offset on the grid.
    fn exhaustive_best(f: &ScalarField, step_c: u16, off: i32) -> (f64, SplitLine) {
        let mut best: Option<(f64, SplitLine)> = None;
        for a in (0..18000).step_by(step_c as usize) {
            for k in -200..200 {
                let line = SplitLine { centideg: a, offset: k * off };
                let (mut fs, mut bs) = (vec![], vec![]);
                for y in 0..f.height() as u32 {
                    for x in 0..f.width() as u32 {
                        let v = f.get(x as usize, y as usize);
                        if line.is_front(x, y) { fs.push(v) } else { bs.push(v) }
                    }
                }
                if fs.is_empty() || bs.is_empty() {
                    continue;
                }
                let e = |v: &[f64]| {
                    let m = v.iter().sum::<f64>() / v.len() as f64;
                    v.iter().map(|x| (x - m).powi(2)).sum::<f64>()
                };
                let s = e(&fs) + e(&bs);
                if best.as_ref().is_none_or(|b| s < b.0 - 1e-12) {
                    best = Some((s, line));
                }
            }
        }
        best.unwrap()
    }

    #[test]
    fn first_split_matches_exhaustive_search() {
        for seed in 0..4 {
            let mut rng = SeededRng::new(seed);
            let (cx, cy, r) = (rng.uniform() * 24.0, rng.uniform() * 24.0, 4.0 + rng.uniform() * 8.0);
            let f = ScalarField::from_fn(24, 24, |x, y| {
                let d = ((x as f64 - cx).powi(2) + (y as f64 - cy).powi(2)).sqrt();
                if d < r { 0.8 } else { 0.1 }
            })
            .unwrap();
            let p = BspLseParams { angle_step: 15.0, prune_keep: 10_000, ..BspLseParams::default() };
            let t = build_bsp_lse(&f, &p).unwrap();
            let (want, _) = exhaustive_best(&f, 1500, 2);
            if let BspNode::Internal { line, .. } = &t.root {
                let got = *line;
                let mut fs = (0.0, 0.0, 0.0);
                let mut bs = (0.0, 0.0, 0.0);
                for y in 0..24 {
                    for x in 0..24 {
                        let v = f.get(x as usize, y as usize);
                        let s = if got.is_front(x, y) { &mut fs } else { &mut bs };
                        s.0 += 1.0;
                        s.1 += v;
                        s.2 += v * v;
                    }
                }
                let e = |s: (f64, f64, f64)| s.2 - s.1 * s.1 / s.0;
                assert!((e(fs) + e(bs) - want).abs() < 1e-9, "seed {seed}");
            }
        }
    }

    #[test]
    fn render_matches_point_location() {
        let mut rng = SeededRng::new(3);
        let f = ScalarField::new(40, 28, (0..40 * 28).map(|_| rng.uniform()).collect()).unwrap();
        let t = build_bsp_lse(&f, &BspLseParams { max_depth: 5, ..BspLseParams::default() }).unwrap();
        let out = render(&t);
        let leaves = t.leaf_regions();
        for y in 0..28u32 {
            for x in 0..40u32 {
                let owners: Vec<_> = leaves
                    .iter()
                    .filter(|(hp, _)| hp.iter().all(|h| h.contains(x, y)))
                    .collect();
                assert_eq!(owners.len(), 1);
                assert_eq!(owners[0].1, out[(y * 40 + x) as usize]);
            }
        }
    }

    #[test]
    fn polygons_tile_the_field() {
        let mut rng = SeededRng::new(9);
        let f = ScalarField::new(33, 21, (0..33 * 21).map(|_| rng.uniform()).collect()).unwrap();
        let t = build_bsp_lse(&f, &BspLseParams { max_depth: 4, ..BspLseParams::default() }).unwrap();
        fn area(n: &BspNode) -> f64 {
            match n {
                BspNode::Leaf { polygon, .. } => signed_area(polygon),
                BspNode::Internal { front, back, polygon, .. } => {
                    let a = area(front) + area(back);
                    assert!((a - signed_area(polygon)).abs() < 1e-9);
                    a
                }
            }
        }
        assert!((area(&t.root) - 33.0 * 21.0).abs() < 1e-9);
    }

    #[test]
    fn stopping_rule_holds() {
        let mut rng = SeededRng::new(11);
        let f = ScalarField::new(48, 48, (0..48 * 48).map(|_| rng.uniform()).collect()).unwrap();
        let p = BspLseParams::default();
        let t = build_bsp_lse(&f, &p).unwrap();
        for node in t.nodes() {
            assert!(node.depth <= p.max_depth);
            if !node.leaf {
                assert!(node.depth < p.max_depth);
                let vals: Vec<f64> = (0..48 * 48)
                    .filter(|i| node.constraints.iter().all(|h| h.contains(i % 48, i / 48)))
                    .map(|i| f.values()[i as usize])
                    .collect();
                let m = vals.iter().sum::<f64>() / vals.len() as f64;
                let var = vals.iter().map(|v| (v - m).powi(2)).sum::<f64>() / vals.len() as f64;
                assert!(var > p.hom_thresh);
            }
        }
    }
}
