//! Variable-resolution hexagonal maps.
//!
//! Hexagons are pointy-top with axial coordinates `(q, r)`; the centre of
//! `(q, r)` at edge length `s` is `(s·√3·(q + r/2), 1.5·s·r)`. Level `ℓ`
//! uses edge `base_edge·2^ℓ`. Hexagons do not nest, so the parent of a
//! hexagon is the next-level hexagon containing its centre, and a cell
//! covers every field cell whose base hexagon descends from it. Doubling
//! the edge halves axial coordinates, so the parent of `(q, r)` is the
//! cube rounding of `(q/2, r/2)`; centres on a boundary go to the
//! candidate chosen by that rounding (halves away from zero, then the
//! largest-error component is recomputed with priority q, r, s).

use std::collections::HashMap;

use super::stats::Accumulator;
use crate::error::{Error, Result};
use crate::field::ScalarField;

const SQRT3: f64 = 1.732_050_807_568_877_2;

#[derive(Debug, Clone, PartialEq)]
pub struct HexmapParams {
    pub base_edge: f64,
    pub levels: u8,
    /// Per-level limit on a cell's variance for it to be kept whole; the
    /// entry for level 0 is unused since base cells are always kept.
    pub thresholds: Vec<f64>,
}

impl Default for HexmapParams {
    fn default() -> Self {
        Self {
            base_edge: 8.0,
            levels: 5,
            thresholds: vec![0.0, 4e-3, 4e-3, 4e-3, 4e-3],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HexGeometry {
    pub base_edge: f64,
    pub levels: u8,
}

/// Hexagon index: resolution level and axial coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct HexIndex {
    pub level: u8,
    pub q: i32,
    pub r: i32,
}

impl HexGeometry {
    pub fn new(base_edge: f64, levels: u8) -> Result<Self> {
        if !(base_edge.is_finite() && base_edge > 0.0) {
            return Err(Error::invalid("hexagon edge must be positive"));
        }
        if !(1..=24).contains(&levels) {
            return Err(Error::invalid("hexmap levels must be in 1..=24"));
        }
        Ok(Self { base_edge, levels })
    }

    #[inline]
    pub fn edge(&self, level: u8) -> f64 {
        self.base_edge * (1u64 << level) as f64
    }

    pub fn centre(&self, h: HexIndex) -> (f64, f64) {
        let s = self.edge(h.level);
        (s * SQRT3 * (h.q as f64 + h.r as f64 / 2.0), 1.5 * s * h.r as f64)
    }

    /// The level-`level` hexagon containing point `(x, y)`.
    pub fn locate(&self, level: u8, x: f64, y: f64) -> HexIndex {
        let s = self.edge(level);
        let fq = (SQRT3 / 3.0 * x - y / 3.0) / s;
        let fr = (2.0 / 3.0 * y) / s;
        let (q, r) = cube_round(fq, fr);
        HexIndex { level, q, r }
    }

    pub fn parent(&self, h: HexIndex) -> Option<HexIndex> {
        (h.level + 1 < self.levels).then(|| {
            let (q, r) = cube_round(h.q as f64 / 2.0, h.r as f64 / 2.0);
            HexIndex {
                level: h.level + 1,
                q,
                r,
            }
        })
    }

    /// The base hexagon of field cell `(x, y)` and its ancestors.
    pub fn chain(&self, x: u32, y: u32) -> impl Iterator<Item = HexIndex> + '_ {
        let base = self.locate(0, x as f64 + 0.5, y as f64 + 0.5);
        std::iter::successors(Some(base), |h| self.parent(*h))
    }
}

fn cube_round(fq: f64, fr: f64) -> (i32, i32) {
    let fs = -fq - fr;
    let (mut q, mut r, s) = (fq.round(), fr.round(), fs.round());
    let (dq, dr, ds) = ((q - fq).abs(), (r - fr).abs(), (s - fs).abs());
    if dq > dr && dq > ds {
        q = -r - s;
    } else if dr > ds {
        r = -q - s;
    }
    (q as i32, r as i32)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HexCell {
    pub index: HexIndex,
    pub value: f64,
    /// Variance of the covered field cells; NaN once decoded, since the
    /// encoding does not store it.
    pub mse: f64,
    pub pixels: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HexMap {
    pub width: usize,
    pub height: usize,
    pub geometry: HexGeometry,
    pub cells: Vec<HexCell>,
}

struct Node {
    index: HexIndex,
    acc: Accumulator,
    children: Vec<u32>,
}

/// Build the level hierarchy, then select top-down: a cell is kept whole
/// when its variance is at most its level's threshold, otherwise its
/// children are visited. Base cells are always kept.
pub fn build_hexmap(field: &ScalarField, params: &HexmapParams) -> Result<HexMap> {
    let geom = HexGeometry::new(params.base_edge, params.levels)?;
    if params.thresholds.len() != params.levels as usize {
        return Err(Error::invalid(format!(
            "{} thresholds given for {} levels",
            params.thresholds.len(),
            params.levels
        )));
    }
    if params.base_edge > field.width().min(field.height()) as f64 {
        return Err(Error::invalid("hexagon edge larger than the field"));
    }
    let shift = field.mean();
    let mut levels: Vec<Vec<Node>> = (0..params.levels).map(|_| Vec::new()).collect();
    let mut lookup: Vec<HashMap<(i32, i32), u32>> = vec![HashMap::new(); params.levels as usize];
    let w = field.width();
    for y in 0..field.height() {
        for x in 0..w {
            let h = geom.locate(0, x as f64 + 0.5, y as f64 + 0.5);
            let id = *lookup[0].entry((h.q, h.r)).or_insert_with(|| {
                levels[0].push(Node {
                    index: h,
                    acc: Accumulator::new(shift),
                    children: Vec::new(),
                });
                (levels[0].len() - 1) as u32
            });
            levels[0][id as usize].acc.push(field.get(x, y));
        }
    }
    for l in 1..params.levels as usize {
        let (lower, upper) = levels.split_at_mut(l);
        let (lower, upper) = (&mut lower[l - 1], &mut upper[0]);
        for (ci, child) in lower.iter().enumerate() {
            let p = geom.parent(child.index).expect("level below the top");
            let id = *lookup[l].entry((p.q, p.r)).or_insert_with(|| {
                upper.push(Node {
                    index: p,
                    acc: Accumulator::new(shift),
                    children: Vec::new(),
                });
                (upper.len() - 1) as u32
            });
            let node = &mut upper[id as usize];
            node.children.push(ci as u32);
            node.acc.absorb(&child.acc);
        }
    }

    let mut cells = Vec::new();
    let top = params.levels as usize - 1;
    let mut order: Vec<u32> = (0..levels[top].len() as u32).collect();
    sort_by_index(&mut order, &levels[top]);
    for id in order {
        select(&levels, &params.thresholds, top, id, &mut cells);
    }
    Ok(HexMap {
        width: field.width(),
        height: field.height(),
        geometry: geom,
        cells,
    })
}

fn sort_by_index(ids: &mut [u32], nodes: &[Node]) {
    ids.sort_by_key(|&i| {
        let h = nodes[i as usize].index;
        (h.r, h.q)
    });
}

fn select(levels: &[Vec<Node>], thr: &[f64], level: usize, id: u32, out: &mut Vec<HexCell>) {
    let node = &levels[level][id as usize];
    let stats = node.acc.finish().expect("hex cells cover at least one field cell");
    if level == 0 || stats.variance <= thr[level] {
        out.push(HexCell {
            index: node.index,
            value: stats.mean,
            mse: stats.variance,
            pixels: stats.count,
        });
        return;
    }
    let mut kids = node.children.clone();
    sort_by_index(&mut kids, &levels[level - 1]);
    for k in kids {
        select(levels, thr, level - 1, k, out);
    }
}

impl HexMap {
    pub fn leaf_count(&self) -> usize {
        self.cells.len()
    }

    pub fn render_into(&self, out: &mut [f64]) -> Result<()> {
        let lookup: HashMap<HexIndex, f64> = self.cells.iter().map(|c| (c.index, c.value)).collect();
        let mut cache: HashMap<HexIndex, f64> = HashMap::new();
        for y in 0..self.height {
            for x in 0..self.width {
                let base = self.geometry.locate(0, x as f64 + 0.5, y as f64 + 0.5);
                let v = match cache.get(&base) {
                    Some(v) => *v,
                    None => {
                        let v = self
                            .geometry
                            .chain(x as u32, y as u32)
                            .find_map(|h| lookup.get(&h).copied())
                            .ok_or_else(|| Error::Format(format!("no hexagon covers cell ({x}, {y})")))?;
                        cache.insert(base, v);
                        v
                    }
                };
                out[y * self.width + x] = v;
            }
        }
        Ok(())
    }

    /// Whether selected cell `h` covers field cell `(x, y)`.
    pub fn covers(&self, h: HexIndex, x: u32, y: u32) -> bool {
        self.geometry.chain(x, y).any(|c| c == h)
    }
}
