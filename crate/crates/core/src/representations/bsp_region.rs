//! Bottom-up region merging over an altitude-ordered binary partition tree.

use crate::error::Result;
use crate::field::ScalarField;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BspRegionParams {
    pub min_region_px: usize,
    /// Quantisation levels applied before computing edge weights; 0 uses
    /// the raw values.
    pub quantisation: u32,
}

impl Default for BspRegionParams {
    fn default() -> Self {
        Self {
            min_region_px: 10,
            quantisation: 256,
        }
    }
}

/// A horizontal run of cells `[start, start + len)` on `row`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Run {
    pub row: u32,
    pub start: u32,
    pub len: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionLeaf {
    pub runs: Vec<Run>,
    pub value: f64,
}

impl RegionLeaf {
    pub fn pixel_count(&self) -> usize {
        self.runs.iter().map(|r| r.len as usize).sum()
    }

    pub fn contains(&self, x: u32, y: u32) -> bool {
        let i = self.runs.partition_point(|r| (r.row, r.start) <= (y, x));
        i > 0 && {
            let r = self.runs[i - 1];
            r.row == y && x < r.start + r.len
        }
    }
}

/// Binary partition tree: nodes `0..n` are cells, later nodes are merges in
/// Kruskal order.
#[derive(Debug, Clone, PartialEq)]
pub struct MergeTree {
    pub cells: usize,
    /// Children of merge node `cells + i`.
    pub children: Vec<[u32; 2]>,
    pub altitude: Vec<f64>,
    /// The graph edge `(a, b)` whose acceptance created each merge node.
    pub edge: Vec<[u32; 2]>,
}

impl MergeTree {
    pub fn parents(&self) -> Vec<Option<u32>> {
        let mut p = vec![None; self.cells + self.children.len()];
        for (i, ch) in self.children.iter().enumerate() {
            for &c in ch {
                p[c as usize] = Some((self.cells + i) as u32);
            }
        }
        p
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionMap {
    pub width: usize,
    pub height: usize,
    pub leaves: Vec<RegionLeaf>,
}

struct UnionFind {
    parent: Vec<u32>,
    size: Vec<u32>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n as u32).collect(),
            size: vec![1; n],
        }
    }

    fn find(&mut self, mut a: u32) -> u32 {
        while self.parent[a as usize] != a {
            let p = self.parent[a as usize];
            self.parent[a as usize] = self.parent[p as usize];
            a = p;
        }
        a
    }

    fn union(&mut self, a: u32, b: u32) -> u32 {
        let (a, b) = if self.size[a as usize] >= self.size[b as usize] { (a, b) } else { (b, a) };
        self.parent[b as usize] = a;
        self.size[a as usize] += self.size[b as usize];
        a
    }
}

/// 4-adjacency edges in row-major order, each cell's right edge before its
/// down edge, sorted stably by weight.
fn sorted_edges(field: &ScalarField, quantisation: u32) -> Vec<([u32; 2], f64)> {
    let (w, h) = (field.width(), field.height());
    let v = field.values();
    let mut edges = Vec::with_capacity(2 * w * h);
    let q: Option<Vec<u32>> = (quantisation > 0).then(|| {
        let top = (quantisation - 1) as f64;
        v.iter().map(|&x| (x * top + 0.5).floor() as u32).collect()
    });
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let mut push = |j: usize| {
                let wgt = match &q {
                    Some(q) => q[i].abs_diff(q[j]) as f64,
                    None => (v[i] - v[j]).abs(),
                };
                edges.push(([i as u32, j as u32], wgt));
            };
            if x + 1 < w {
                push(i + 1);
            }
            if y + 1 < h {
                push(i + w);
            }
        }
    }
    if quantisation > 0 {
        // Integer weights: a stable counting sort.
        let mut counts = vec![0usize; quantisation as usize + 1];
        for e in &edges {
            counts[e.1 as usize + 1] += 1;
        }
        for i in 1..counts.len() {
            counts[i] += counts[i - 1];
        }
        let mut sorted = vec![([0u32; 2], 0.0); edges.len()];
        for e in edges {
            let slot = &mut counts[e.1 as usize];
            sorted[*slot] = e;
            *slot += 1;
        }
        sorted
    } else {
        edges.sort_by(|a, b| a.1.total_cmp(&b.1));
        edges
    }
}

/// Kruskal's algorithm over the 4-adjacency graph, recording each accepted
/// edge as a merge node.
pub fn merge_tree(field: &ScalarField, quantisation: u32) -> MergeTree {
    let n = field.len();
    let mut uf = UnionFind::new(n);
    // Tree node currently representing each union-find root.
    let mut node_of: Vec<u32> = (0..n as u32).collect();
    let mut tree = MergeTree {
        cells: n,
        children: Vec::with_capacity(n.saturating_sub(1)),
        altitude: Vec::with_capacity(n.saturating_sub(1)),
        edge: Vec::with_capacity(n.saturating_sub(1)),
    };
    for ([a, b], wgt) in sorted_edges(field, quantisation) {
        let (ra, rb) = (uf.find(a), uf.find(b));
        if ra == rb {
            continue;
        }
        let id = (n + tree.children.len()) as u32;
        tree.children.push([node_of[ra as usize], node_of[rb as usize]]);
        tree.altitude.push(wgt);
        tree.edge.push([a, b]);
        let r = uf.union(ra, rb);
        node_of[r as usize] = id;
    }
    tree
}

/// Walk the merge tree bottom-up. A merge is kept when it happens at zero
/// altitude (a flat zone) or when either of the two regions it joins is
/// still below `min_region_px`; all other merges are cut. Leaves carry the
/// mean of their cells.
pub fn build_bsp_region(field: &ScalarField, params: &BspRegionParams) -> Result<RegionMap> {
    let tree = merge_tree(field, params.quantisation);
    let n = field.len();
    let mut uf = UnionFind::new(n);
    for (k, &[a, b]) in tree.edge.iter().enumerate() {
        let (ra, rb) = (uf.find(a), uf.find(b));
        let small = (uf.size[ra as usize] as usize) < params.min_region_px
            || (uf.size[rb as usize] as usize) < params.min_region_px;
        if tree.altitude[k] == 0.0 || small {
            uf.union(ra, rb);
        }
    }
    Ok(RegionMap {
        width: field.width(),
        height: field.height(),
        leaves: leaves_from_labels(field, |i| uf.find(i as u32)),
    })
}

/// Group cells by label into run-length leaves, ordered by their first
/// cell in row-major order.
fn leaves_from_labels(field: &ScalarField, mut label: impl FnMut(usize) -> u32) -> Vec<RegionLeaf> {
    let w = field.width();
    let mut slot = vec![u32::MAX; field.len()];
    let mut leaves: Vec<(RegionLeaf, f64)> = Vec::new();
    for y in 0..field.height() {
        let mut x = 0;
        while x < w {
            let l = label(y * w + x) as usize;
            let mut end = x + 1;
            while end < w && label(y * w + end) as usize == l {
                end += 1;
            }
            if slot[l] == u32::MAX {
                slot[l] = leaves.len() as u32;
                leaves.push((
                    RegionLeaf {
                        runs: Vec::new(),
                        value: 0.0,
                    },
                    0.0,
                ));
            }
            let (leaf, sum) = &mut leaves[slot[l] as usize];
            leaf.runs.push(Run {
                row: y as u32,
                start: x as u32,
                len: (end - x) as u32,
            });
            *sum += field.values()[y * w + x..y * w + end].iter().sum::<f64>();
            x = end;
        }
    }
    leaves
        .into_iter()
        .map(|(mut leaf, sum)| {
            leaf.value = sum / leaf.pixel_count() as f64;
            leaf
        })
        .collect()
}

impl RegionMap {
    pub fn leaf_count(&self) -> usize {
        self.leaves.len()
    }

    pub fn render_into(&self, out: &mut [f64]) {
        for leaf in &self.leaves {
            for r in &leaf.runs {
                let i = r.row as usize * self.width + r.start as usize;
                out[i..i + r.len as usize].fill(leaf.value);
            }
        }
    }
}
