//! The five discrete representations of a scalar field.

pub mod bsp_lse;
pub mod bsp_region;
mod codec;
pub mod hexmap;
pub mod quadtree;
pub mod stats;

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

pub use bsp_lse::{build_bsp_lse, BspLseParams, BspLseTree, BspNode, HalfPlane, SplitLine};
pub use bsp_region::{build_bsp_region, BspRegionParams, RegionLeaf, RegionMap, Run};
pub use hexmap::{build_hexmap, HexCell, HexGeometry, HexIndex, HexMap, HexmapParams};
pub use quadtree::{build_quadtree, build_wedgelet, QuadNode, QuadTree, QuadtreeParams, WedgeLine, WedgeletParams};
pub use stats::{region_stats, Rect, Region, RegionStats};

use crate::error::{Error, Result};
use crate::field::ScalarField;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ReprKind {
    Quadtree,
    Wedgelet,
    BspLse,
    BspRegion,
    Hexmap,
}

impl ReprKind {
    pub const ALL: [ReprKind; 5] = [
        ReprKind::Quadtree,
        ReprKind::Wedgelet,
        ReprKind::BspLse,
        ReprKind::BspRegion,
        ReprKind::Hexmap,
    ];

    /// Kind byte of the binary encoding.
    pub fn tag(self) -> u8 {
        match self {
            ReprKind::Quadtree => 1,
            ReprKind::Wedgelet => 2,
            ReprKind::BspLse => 3,
            ReprKind::BspRegion => 4,
            ReprKind::Hexmap => 5,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.tag() == tag)
    }

    /// Command-line and file-name spelling.
    pub fn name(self) -> &'static str {
        match self {
            ReprKind::Quadtree => "quadtree",
            ReprKind::Wedgelet => "wedgelet",
            ReprKind::BspLse => "bsp-lse",
            ReprKind::BspRegion => "bsp-region",
            ReprKind::Hexmap => "hexmap",
        }
    }

    /// Column label used in reports and correlation keys.
    pub fn label(self) -> &'static str {
        match self {
            ReprKind::Quadtree => "Quadtree",
            ReprKind::Wedgelet => "Wedgelet",
            ReprKind::BspLse => "BSP_LSE",
            ReprKind::BspRegion => "BSP_Region",
            ReprKind::Hexmap => "Hex",
        }
    }
}

impl fmt::Display for ReprKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ReprKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace('_', "-");
        Self::ALL
            .into_iter()
            .find(|k| k.name() == norm || k.label().to_ascii_lowercase().replace('_', "-") == norm)
            .ok_or_else(|| Error::invalid(format!("unknown representation '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    Quadtree(QuadTree),
    Wedgelet(QuadTree),
    BspLse(BspLseTree),
    BspRegion(RegionMap),
    Hexmap(HexMap),
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ReprParams {
    pub quadtree: QuadtreeParams,
    pub wedgelet: WedgeletParams,
    pub bsp_lse: BspLseParams,
    pub bsp_region: BspRegionParams,
    pub hexmap: HexmapParams,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteRepresentation {
    pub payload: Payload,
    /// Wall-clock seconds spent in the builder; zero for decoded values.
    pub build_time: f64,
}

/// The cells a leaf owns.
#[derive(Debug, Clone, PartialEq)]
pub enum LeafRegion {
    Rect(Rect),
    /// One side of a wedge split of `rect`.
    Wedge { rect: Rect, line: WedgeLine, positive: bool },
    HalfPlanes(Vec<HalfPlane>),
    Runs(Vec<Run>),
    Hex { geometry: HexGeometry, index: HexIndex },
}

impl LeafRegion {
    /// Whether the centre of cell `(x, y)` belongs to this leaf.
    pub fn contains(&self, x: u32, y: u32) -> bool {
        match self {
            LeafRegion::Rect(r) => r.contains(x, y),
            LeafRegion::Wedge { rect, line, positive } => rect.contains(x, y) && line.is_positive(x, y) == *positive,
            LeafRegion::HalfPlanes(hp) => hp.iter().all(|h| h.contains(x, y)),
            LeafRegion::Runs(runs) => {
                let i = runs.partition_point(|r| (r.row, r.start) <= (y, x));
                i > 0 && runs[i - 1].row == y && x < runs[i - 1].start + runs[i - 1].len
            }
            LeafRegion::Hex { geometry, index } => geometry.chain(x, y).any(|h| h == *index),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Leaf {
    pub value: f64,
    pub region: LeafRegion,
}

impl DiscreteRepresentation {
    /// Build one representation, timing only the builder itself.
    pub fn build(kind: ReprKind, field: &ScalarField, params: &ReprParams) -> Result<Self> {
        let start = Instant::now();
        let payload = match kind {
            ReprKind::Quadtree => Payload::Quadtree(build_quadtree(field, &params.quadtree)?),
            ReprKind::Wedgelet => Payload::Wedgelet(build_wedgelet(field, &params.wedgelet)?),
            ReprKind::BspLse => Payload::BspLse(build_bsp_lse(field, &params.bsp_lse)?),
            ReprKind::BspRegion => Payload::BspRegion(build_bsp_region(field, &params.bsp_region)?),
            ReprKind::Hexmap => Payload::Hexmap(build_hexmap(field, &params.hexmap)?),
        };
        Ok(Self {
            payload,
            build_time: start.elapsed().as_secs_f64(),
        })
    }

    pub fn kind(&self) -> ReprKind {
        match self.payload {
            Payload::Quadtree(_) => ReprKind::Quadtree,
            Payload::Wedgelet(_) => ReprKind::Wedgelet,
            Payload::BspLse(_) => ReprKind::BspLse,
            Payload::BspRegion(_) => ReprKind::BspRegion,
            Payload::Hexmap(_) => ReprKind::Hexmap,
        }
    }

    pub fn width(&self) -> usize {
        match &self.payload {
            Payload::Quadtree(t) | Payload::Wedgelet(t) => t.width,
            Payload::BspLse(t) => t.width,
            Payload::BspRegion(m) => m.width,
            Payload::Hexmap(m) => m.width,
        }
    }

    pub fn height(&self) -> usize {
        match &self.payload {
            Payload::Quadtree(t) | Payload::Wedgelet(t) => t.height,
            Payload::BspLse(t) => t.height,
            Payload::BspRegion(m) => m.height,
            Payload::Hexmap(m) => m.height,
        }
    }

    /// Number of constant-valued regions; a wedge counts as two.
    pub fn leaf_count(&self) -> usize {
        match &self.payload {
            Payload::Quadtree(t) | Payload::Wedgelet(t) => t.leaf_count(),
            Payload::BspLse(t) => t.leaf_count(),
            Payload::BspRegion(m) => m.leaf_count(),
            Payload::Hexmap(m) => m.leaf_count(),
        }
    }

    /// Rasterise: each cell takes the value of the leaf owning its centre.
    pub fn render(&self) -> Result<ScalarField> {
        let (w, h) = (self.width(), self.height());
        let mut out = vec![f64::NAN; w * h];
        match &self.payload {
            Payload::Quadtree(t) | Payload::Wedgelet(t) => t.render_into(&mut out),
            Payload::BspLse(t) => t.render_into(&mut out),
            Payload::BspRegion(m) => m.render_into(&mut out),
            Payload::Hexmap(m) => m.render_into(&mut out)?,
        }
        if let Some(i) = out.iter().position(|v| v.is_nan()) {
            return Err(Error::Format(format!("cell ({}, {}) is owned by no leaf", i % w, i / w)));
        }
        ScalarField::new(w, h, out)
    }

    /// Render at explicit dimensions, which must match the source field.
    pub fn render_to(&self, width: usize, height: usize) -> Result<ScalarField> {
        if (width, height) != (self.width(), self.height()) {
            return Err(Error::DimensionMismatch(width, height, self.width(), self.height()));
        }
        self.render()
    }

    pub fn leaves(&self) -> Vec<Leaf> {
        let mut out = Vec::new();
        match &self.payload {
            Payload::Quadtree(t) | Payload::Wedgelet(t) => {
                fn walk(n: &QuadNode, out: &mut Vec<Leaf>) {
                    match n {
                        QuadNode::Leaf { rect, value } => out.push(Leaf {
                            value: *value,
                            region: LeafRegion::Rect(*rect),
                        }),
                        QuadNode::Wedge {
                            rect,
                            line,
                            positive,
                            negative,
                        } => {
                            for (side, value) in [(true, *positive), (false, *negative)] {
                                out.push(Leaf {
                                    value,
                                    region: LeafRegion::Wedge {
                                        rect: *rect,
                                        line: *line,
                                        positive: side,
                                    },
                                });
                            }
                        }
                        QuadNode::Internal { children, .. } => children.iter().for_each(|c| walk(c, out)),
                    }
                }
                walk(&t.root, &mut out);
            }
            Payload::BspLse(t) => {
                out.extend(t.leaf_regions().into_iter().map(|(hp, value)| Leaf {
                    value,
                    region: LeafRegion::HalfPlanes(hp),
                }));
            }
            Payload::BspRegion(m) => {
                out.extend(m.leaves.iter().map(|l| Leaf {
                    value: l.value,
                    region: LeafRegion::Runs(l.runs.clone()),
                }));
            }
            Payload::Hexmap(m) => {
                out.extend(m.cells.iter().map(|c| Leaf {
                    value: c.value,
                    region: LeafRegion::Hex {
                        geometry: m.geometry,
                        index: c.index,
                    },
                }));
            }
        }
        out
    }

    /// Deterministic little-endian encoding; its length is the reported size.
    pub fn serialize(&self) -> Vec<u8> {
        codec::encode(self)
    }

    /// Inverse of [`serialize`](Self::serialize) up to `f32` leaf values.
    pub fn deserialize(bytes: &[u8]) -> Result<Self> {
        codec::decode(bytes)
    }
}
