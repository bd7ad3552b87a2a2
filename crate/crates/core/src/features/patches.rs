//! Connected weed patches.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Connectivity {
    Four,
    Eight,
}

/// Patch count and size statistics in pixels; `std` is the population
/// standard deviation. All zero for an empty mask.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PatchStats {
    pub count: usize,
    pub largest: usize,
    pub mean: f64,
    pub std: f64,
}

/// Sizes of the connected components of `true` cells, in order of each
/// component's first cell in row-major order.
pub fn patch_sizes(mask: &[bool], width: usize, height: usize, conn: Connectivity) -> Result<Vec<usize>> {
    if mask.len() != width * height {
        return Err(Error::invalid(format!(
            "mask has {} cells, expected {width}x{height}",
            mask.len()
        )));
    }
    let mut seen = vec![false; mask.len()];
    let mut sizes = Vec::new();
    let mut stack = Vec::new();
    let offsets: &[(isize, isize)] = match conn {
        Connectivity::Four => &[(1, 0), (-1, 0), (0, 1), (0, -1)],
        Connectivity::Eight => &[(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1)],
    };
    for start in 0..mask.len() {
        if !mask[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        stack.push(start);
        let mut size = 0;
        while let Some(i) = stack.pop() {
            size += 1;
            let (x, y) = ((i % width) as isize, (i / width) as isize);
            for &(dx, dy) in offsets {
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx >= width as isize || ny >= height as isize {
                    continue;
                }
                let j = ny as usize * width + nx as usize;
                if mask[j] && !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        sizes.push(size);
    }
    Ok(sizes)
}

pub fn weed_patches_stats(mask: &[bool], width: usize, height: usize, conn: Connectivity) -> Result<PatchStats> {
    let sizes = patch_sizes(mask, width, height, conn)?;
    if sizes.is_empty() {
        return Ok(PatchStats {
            count: 0,
            largest: 0,
            mean: 0.0,
            std: 0.0,
        });
    }
    let n = sizes.len() as f64;
    let mean = sizes.iter().sum::<usize>() as f64 / n;
    let var = sizes.iter().map(|&s| (s as f64 - mean).powi(2)).sum::<f64>() / n;
    Ok(PatchStats {
        count: sizes.len(),
        largest: *sizes.iter().max().unwrap(),
        mean,
        std: var.sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeededRng;

    #[test]
    fn single_pixel() {
        let mut m = vec![false; 9];
        m[4] = true;
        let s = weed_patches_stats(&m, 3, 3, Connectivity::Eight).unwrap();
        assert_eq!(s, PatchStats { count: 1, largest: 1, mean: 1.0, std: 0.0 });
    }

    #[test]
    fn diagonal_neighbours() {
        let m = vec![true, false, false, true];
        assert_eq!(weed_patches_stats(&m, 2, 2, Connectivity::Four).unwrap().count, 2);
        assert_eq!(weed_patches_stats(&m, 2, 2, Connectivity::Eight).unwrap().count, 1);
    }

    #[test]
    fn empty_mask() {
        let s = weed_patches_stats(&[false; 12], 4, 3, Connectivity::Eight).unwrap();
        assert_eq!(s.count, 0);
        assert_eq!(s.largest, 0);
        assert!(weed_patches_stats(&[false; 12], 4, 4, Connectivity::Eight).is_err());
    }

    /// Labelling by repeated label propagation until nothing changes.
    fn propagate_labels(mask: &[bool], w: usize, h: usize, diag: bool) -> Vec<usize> {
        let mut label: Vec<usize> = (0..w * h).collect();
        loop {
            let mut changed = false;
            for y in 0..h {
                for x in 0..w {
                    let i = y * w + x;
                    if !mask[i] {
                        continue;
                    }
                    for dy in -1i32..=1 {
                        for dx in -1i32..=1 {
                            if (dx == 0 && dy == 0) || (!diag && dx != 0 && dy != 0) {
                                continue;
                            }
                            let (nx, ny) = (x as i32 + dx, y as i32 + dy);
                            if nx < 0 || ny < 0 || nx >= w as i32 || ny >= h as i32 {
                                continue;
                            }
                            let j = ny as usize * w + nx as usize;
                            if mask[j] && label[j] < label[i] {
                                label[i] = label[j];
                                changed = true;
                            }
                        }
                    }
                }
            }
            if !changed {
                break;
            }
        }
        let mut sizes = std::collections::BTreeMap::new();
        for i in 0..w * h {
            if mask[i] {
                *sizes.entry(label[i]).or_insert(0) += 1;
            }
        }
        sizes.into_values().collect()
    }

    #[test]
    fn matches_label_propagation() {
        for seed in 0..10 {
            let mut rng = SeededRng::new(seed);
            let m: Vec<bool> = (0..32 * 32).map(|_| rng.uniform() < 0.45).collect();
            for (conn, diag) in [(Connectivity::Four, false), (Connectivity::Eight, true)] {
                let mut got = patch_sizes(&m, 32, 32, conn).unwrap();
                let mut want = propagate_labels(&m, 32, 32, diag);
                got.sort();
                want.sort();
                assert_eq!(got, want);
            }
        }
    }

    #[test]
    fn transpose_invariant() {
        let mut rng = SeededRng::new(77);
        let (w, h) = (20, 13);
        let m: Vec<bool> = (0..w * h).map(|_| rng.uniform() < 0.4).collect();
        let t: Vec<bool> = (0..w * h).map(|i| m[(i % h) * w + i / h]).collect();
        for conn in [Connectivity::Four, Connectivity::Eight] {
            let mut a = patch_sizes(&m, w, h, conn).unwrap();
            let mut b = patch_sizes(&t, h, w, conn).unwrap();
            a.sort();
            b.sort();
            assert_eq!(a, b);
        }
    }
}
