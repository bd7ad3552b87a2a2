//! Binary encoding: `GPDR`, version, kind, width and height, then a
//! kind-specific body. All integers and floats are little-endian.
//!
//! * quadtree / wedgelet: preorder nodes; flag 0 internal (children follow,
//!   their number implied by the node's rectangle), 1 leaf + `f32`,
//!   2 wedge + `4×u16` endpoints + `f32` positive side + `f32` negative side.
//! * bsp-lse: preorder nodes; flag 0 internal + `u16` centidegrees + `i32`
//!   offset, then front and back subtrees; flag 1 leaf + `f32`.
//! * bsp-region: `u32` leaf count, then per leaf `f32` value, `u32` run
//!   count and `(row, start, len)` as `u32` each.
//! * hexmap: `f64` base edge, `u8` levels, `u32` cell count, then per cell
//!   `u8` level, `i32` q, `i32` r, `f32` value.

use super::bsp_lse::{clip, rect_polygon, unit_vector, BspLseTree, BspNode, SplitLine};
use super::bsp_region::{RegionLeaf, RegionMap, Run};
use super::hexmap::{HexCell, HexGeometry, HexIndex, HexMap};
use super::quadtree::{split_rect, QuadNode, QuadTree, WedgeLine};
use super::stats::Rect;
use super::{DiscreteRepresentation, Payload, ReprKind};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"GPDR";
const VERSION: u8 = 1;
const MAX_BSP_DEPTH: u32 = 4096;

pub(super) fn encode(repr: &DiscreteRepresentation) -> Vec<u8> {
    let mut out = Vec::with_capacity(64);
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    out.push(repr.kind().tag());
    out.extend_from_slice(&(repr.width() as u32).to_le_bytes());
    out.extend_from_slice(&(repr.height() as u32).to_le_bytes());
    match &repr.payload {
        Payload::Quadtree(t) | Payload::Wedgelet(t) => quad(&t.root, &mut out),
        Payload::BspLse(t) => bsp(&t.root, &mut out),
        Payload::BspRegion(m) => {
            out.extend_from_slice(&(m.leaves.len() as u32).to_le_bytes());
            for leaf in &m.leaves {
                out.extend_from_slice(&(leaf.value as f32).to_le_bytes());
                out.extend_from_slice(&(leaf.runs.len() as u32).to_le_bytes());
                for r in &leaf.runs {
                    for v in [r.row, r.start, r.len] {
                        out.extend_from_slice(&v.to_le_bytes());
                    }
                }
            }
        }
        Payload::Hexmap(m) => {
            out.extend_from_slice(&m.geometry.base_edge.to_le_bytes());
            out.push(m.geometry.levels);
            out.extend_from_slice(&(m.cells.len() as u32).to_le_bytes());
            for c in &m.cells {
                out.push(c.index.level);
                out.extend_from_slice(&c.index.q.to_le_bytes());
                out.extend_from_slice(&c.index.r.to_le_bytes());
                out.extend_from_slice(&(c.value as f32).to_le_bytes());
            }
        }
    }
    out
}

fn quad(n: &QuadNode, out: &mut Vec<u8>) {
    match n {
        QuadNode::Internal { children, .. } => {
            out.push(0);
            children.iter().for_each(|c| quad(c, out));
        }
        QuadNode::Leaf { value, .. } => {
            out.push(1);
            out.extend_from_slice(&(*value as f32).to_le_bytes());
        }
        QuadNode::Wedge {
            line,
            positive,
            negative,
            ..
        } => {
            out.push(2);
            for v in [line.p[0], line.p[1], line.q[0], line.q[1]] {
                out.extend_from_slice(&v.to_le_bytes());
            }
            out.extend_from_slice(&(*positive as f32).to_le_bytes());
            out.extend_from_slice(&(*negative as f32).to_le_bytes());
        }
    }
}

fn bsp(n: &BspNode, out: &mut Vec<u8>) {
    match n {
        BspNode::Internal { line, front, back, .. } => {
            out.push(0);
            out.extend_from_slice(&line.centideg.to_le_bytes());
            out.extend_from_slice(&line.offset.to_le_bytes());
            bsp(front, out);
            bsp(back, out);
        }
        BspNode::Leaf { value, .. } => {
            out.push(1);
            out.extend_from_slice(&(*value as f32).to_le_bytes());
        }
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Format(format!("truncated at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn i32(&mut self) -> Result<i32> {
        Ok(i32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f32(&mut self) -> Result<f64> {
        let v = f32::from_le_bytes(self.take(4)?.try_into().unwrap()) as f64;
        if !v.is_finite() {
            return Err(Error::Format(format!("non-finite value at byte {}", self.pos - 4)));
        }
        Ok(v)
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }
}

pub(super) fn decode(bytes: &[u8]) -> Result<DiscreteRepresentation> {
    let mut rd = Reader { bytes, pos: 0 };
    if rd.take(4).ok() != Some(MAGIC.as_slice()) {
        return Err(Error::Format("missing GPDR magic".into()));
    }
    let version = rd.u8()?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let tag = rd.u8()?;
    let kind = ReprKind::from_tag(tag).ok_or_else(|| Error::Format(format!("unknown kind tag {tag}")))?;
    let (width, height) = (rd.u32()? as usize, rd.u32()? as usize);
    if width == 0 || height == 0 {
        return Err(Error::Format("zero dimension".into()));
    }
    let payload = match kind {
        ReprKind::Quadtree | ReprKind::Wedgelet => {
            let rect = Rect::new(0, 0, width as u32, height as u32);
            let t = QuadTree {
                width,
                height,
                root: read_quad(&mut rd, rect)?,
            };
            if kind == ReprKind::Quadtree {
                Payload::Quadtree(t)
            } else {
                Payload::Wedgelet(t)
            }
        }
        ReprKind::BspLse => Payload::BspLse(BspLseTree {
            width,
            height,
            root: read_bsp(&mut rd, rect_polygon(width, height), 0)?,
        }),
        ReprKind::BspRegion => {
            let n = rd.u32()? as usize;
            let mut leaves = Vec::with_capacity(n.min(rd.remaining() / 8));
            for _ in 0..n {
                let value = rd.f32()?;
                let runs_n = rd.u32()? as usize;
                let mut runs = Vec::with_capacity(runs_n.min(rd.remaining() / 12));
                for _ in 0..runs_n {
                    let r = Run {
                        row: rd.u32()?,
                        start: rd.u32()?,
                        len: rd.u32()?,
                    };
                    if r.row as usize >= height || r.start as u64 + r.len as u64 > width as u64 {
                        return Err(Error::Format(format!("run {r:?} outside the field")));
                    }
                    runs.push(r);
                }
                leaves.push(RegionLeaf { runs, value });
            }
            Payload::BspRegion(RegionMap { width, height, leaves })
        }
        ReprKind::Hexmap => {
            let geometry = HexGeometry::new(rd.f64()?, rd.u8()?).map_err(|e| Error::Format(e.to_string()))?;
            let n = rd.u32()? as usize;
            let mut cells = Vec::with_capacity(n.min(rd.remaining() / 13));
            for _ in 0..n {
                let level = rd.u8()?;
                if level >= geometry.levels {
                    return Err(Error::Format(format!("hex level {level} beyond {}", geometry.levels)));
                }
                let index = HexIndex {
                    level,
                    q: rd.i32()?,
                    r: rd.i32()?,
                };
                cells.push(HexCell {
                    index,
                    value: rd.f32()?,
                    mse: f64::NAN,
                    pixels: 0,
                });
            }
            Payload::Hexmap(HexMap {
                width,
                height,
                geometry,
                cells,
            })
        }
    };
    if rd.remaining() != 0 {
        return Err(Error::Format(format!("{} trailing bytes", rd.remaining())));
    }
    Ok(DiscreteRepresentation {
        payload,
        build_time: 0.0,
    })
}

fn read_quad(rd: &mut Reader<'_>, rect: Rect) -> Result<QuadNode> {
    match rd.u8()? {
        0 => {
            let kids = split_rect(rect);
            if kids.is_empty() {
                return Err(Error::Format("internal node on a single cell".into()));
            }
            let children = kids.into_iter().map(|r| read_quad(rd, r)).collect::<Result<_>>()?;
            Ok(QuadNode::Internal { rect, children })
        }
        1 => Ok(QuadNode::Leaf { rect, value: rd.f32()? }),
        2 => {
            let line = WedgeLine {
                p: [rd.u16()?, rd.u16()?],
                q: [rd.u16()?, rd.u16()?],
            };
            Ok(QuadNode::Wedge {
                rect,
                line,
                positive: rd.f32()?,
                negative: rd.f32()?,
            })
        }
        f => Err(Error::Format(format!("bad quadtree flag {f}"))),
    }
}

fn read_bsp(rd: &mut Reader<'_>, polygon: Vec<[f64; 2]>, depth: u32) -> Result<BspNode> {
    if depth > MAX_BSP_DEPTH {
        return Err(Error::Format("bsp tree too deep".into()));
    }
    match rd.u8()? {
        0 => {
            let line = SplitLine {
                centideg: rd.u16()?,
                offset: rd.i32()?,
            };
            if line.centideg >= 18000 {
                return Err(Error::Format(format!("angle {} out of range", line.centideg)));
            }
            let (c, s) = unit_vector(line.centideg);
            let o = line.offset as f64;
            let front = read_bsp(rd, clip(&polygon, c, s, o, true), depth + 1)?;
            let back = read_bsp(rd, clip(&polygon, c, s, o, false), depth + 1)?;
            Ok(BspNode::Internal {
                polygon,
                line,
                front: Box::new(front),
                back: Box::new(back),
            })
        }
        1 => Ok(BspNode::Leaf {
            polygon,
            value: rd.f32()?,
        }),
        f => Err(Error::Format(format!("bad bsp flag {f}"))),
    }
}
