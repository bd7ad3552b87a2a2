//! Global and local spatial autocorrelation on coarse grids.

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::rng::SeededRng;

/// Binary contiguity weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Contiguity {
    /// Edge-sharing neighbours.
    Rook,
    /// Edge- or corner-sharing neighbours.
    Queen,
}

fn neighbours(w: usize, h: usize, i: usize, c: Contiguity, with_self: bool) -> impl Iterator<Item = usize> {
    let (x, y) = ((i % w) as isize, (i / w) as isize);
    (-1isize..=1).flat_map(move |dy| {
        (-1isize..=1).filter_map(move |dx| {
            let centre = dx == 0 && dy == 0;
            if centre && !with_self || c == Contiguity::Rook && dx != 0 && dy != 0 {
                return None;
            }
            let (nx, ny) = (x + dx, y + dy);
            (nx >= 0 && ny >= 0 && nx < w as isize && ny < h as isize).then(|| ny as usize * w + nx as usize)
        })
    })
}

/// Deviations from the mean and their mean square; errors on zero variance.
fn centred(grid: &ScalarField) -> Result<(Vec<f64>, f64)> {
    let v = grid.values();
    if v.iter().all(|&x| x == v[0]) {
        return Err(Error::ZeroVariance("grid values are constant".into()));
    }
    let m = grid.mean();
    let z: Vec<f64> = v.iter().map(|x| x - m).collect();
    let m2 = z.iter().map(|x| x * x).sum::<f64>() / z.len() as f64;
    Ok((z, m2))
}

/// Global Moran's I, `(N/W)·ΣΣ wᵢⱼ zᵢ zⱼ / Σ zᵢ²`, with binary weights.
pub fn morans_i(grid: &ScalarField, c: Contiguity) -> Result<f64> {
    let (z, _) = centred(grid)?;
    let (w, h) = (grid.width(), grid.height());
    let (mut num, mut wsum) = (0.0, 0usize);
    for i in 0..z.len() {
        for j in neighbours(w, h, i, c, false) {
            num += z[i] * z[j];
            wsum += 1;
        }
    }
    if wsum == 0 {
        return Err(Error::ZeroVariance("grid has no neighbouring cells".into()));
    }
    let den: f64 = z.iter().map(|v| v * v).sum();
    Ok(z.len() as f64 / wsum as f64 * num / den)
}

#[derive(Debug, Clone, PartialEq)]
pub struct HotColdSpots {
    /// `hot / max(cold, 1)`.
    pub ratio: f64,
    pub hot: usize,
    pub cold: usize,
    /// Gi* z-score per cell.
    pub z: Vec<f64>,
}

/// Getis-Ord Gi* over the self-inclusive queen neighbourhood:
/// `(Σⱼ wᵢⱼxⱼ − x̄·Wᵢ) / (S·√((n·Wᵢ − Wᵢ²)/(n − 1)))` with binary weights,
/// `Wᵢ = Σⱼ wᵢⱼ` and `S` the population standard deviation. A cell whose
/// neighbourhood is the whole grid has z = 0.
pub fn getis_ord(grid: &ScalarField, z_thresh: f64) -> Result<HotColdSpots> {
    let (_, m2) = centred(grid)?;
    let (w, h) = (grid.width(), grid.height());
    let n = grid.len() as f64;
    let mean = grid.mean();
    let s = m2.sqrt();
    let v = grid.values();
    let z: Vec<f64> = (0..grid.len())
        .map(|i| {
            let (mut sum, mut wi) = (0.0, 0.0);
            for j in neighbours(w, h, i, Contiguity::Queen, true) {
                sum += v[j];
                wi += 1.0;
            }
            let den = s * ((n * wi - wi * wi) / (n - 1.0)).max(0.0).sqrt();
            if den > 0.0 {
                (sum - mean * wi) / den
            } else {
                0.0
            }
        })
        .collect();
    let hot = z.iter().filter(|&&v| v > z_thresh).count();
    let cold = z.iter().filter(|&&v| v < -z_thresh).count();
    Ok(HotColdSpots {
        ratio: hot as f64 / cold.max(1) as f64,
        hot,
        cold,
        z,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalOutliers {
    /// `high_low / max(low_high, 1)`.
    pub ratio: f64,
    pub high_low: usize,
    pub low_high: usize,
    /// Local Moran's Iᵢ per cell.
    pub local_i: Vec<f64>,
    /// Pseudo p-value per cell for the lower tail.
    pub p_values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PermutationTest {
    pub permutations: usize,
    pub alpha: f64,
    pub seed: u64,
}

impl Default for PermutationTest {
    fn default() -> Self {
        Self {
            permutations: 99,
            alpha: 0.05,
            seed: 0,
        }
    }
}

fn local_moran(z: &[f64], m2: f64, w: usize, h: usize) -> Vec<f64> {
    (0..z.len())
        .map(|i| z[i] / m2 * neighbours(w, h, i, Contiguity::Queen, false).map(|j| z[j]).sum::<f64>())
        .collect()
}

/// Local Moran's `Iᵢ = zᵢ/m₂·Σⱼ wᵢⱼzⱼ` with binary queen weights. A cell is
/// an outlier when `Iᵢ < 0` and its pseudo p-value
/// `(#{Iᵢ under permutation ≤ Iᵢ} + 1)/(permutations + 1)` is at most
/// `alpha`. Each permutation shuffles every value in the grid (Fisher-Yates
/// driven by the seeded generator) and recomputes all Iᵢ. Outliers with
/// zᵢ > 0 are high-low, the rest low-high.
pub fn local_outliers(grid: &ScalarField, test: &PermutationTest) -> Result<LocalOutliers> {
    let (z, m2) = centred(grid)?;
    let (w, h) = (grid.width(), grid.height());
    let observed = local_moran(&z, m2, w, h);
    let mut below = vec![0usize; z.len()];
    let mut rng = SeededRng::new(test.seed);
    let mut perm = z.clone();
    for _ in 0..test.permutations {
        for i in (1..perm.len()).rev() {
            let j = rng.below(i as u64 + 1) as usize;
            perm.swap(i, j);
        }
        for (i, v) in local_moran(&perm, m2, w, h).into_iter().enumerate() {
            if v <= observed[i] {
                below[i] += 1;
            }
        }
    }
    let p_values: Vec<f64> = below
        .iter()
        .map(|&b| (b + 1) as f64 / (test.permutations + 1) as f64)
        .collect();
    let (mut high_low, mut low_high) = (0, 0);
    for i in 0..z.len() {
        if observed[i] < 0.0 && p_values[i] <= test.alpha {
            if z[i] > 0.0 {
                high_low += 1;
            } else {
                low_high += 1;
            }
        }
    }
    Ok(LocalOutliers {
        ratio: high_low as f64 / low_high.max(1) as f64,
        high_low,
        low_high,
        local_i: observed,
        p_values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(w: usize, h: usize, v: Vec<f64>) -> ScalarField {
        ScalarField::new(w, h, v).unwrap()
    }

    #[test]
    fn constant_grid_is_an_error() {
        let g = ScalarField::constant(4, 4, 0.3).unwrap();
        assert!(matches!(morans_i(&g, Contiguity::Queen), Err(Error::ZeroVariance(_))));
        assert!(getis_ord(&g, 1.96).is_err());
        assert!(local_outliers(&g, &PermutationTest::default()).is_err());
    }

    #[test]
    fn checkerboard_rook_is_minus_one() {
        let g = grid(4, 4, (0..16).map(|i| ((i % 4 + i / 4) % 2) as f64).collect());
        assert!((morans_i(&g, Contiguity::Rook).unwrap() + 1.0).abs() < 1e-12);
        // Queen adds same-colour diagonal pairs: 24 opposite, 18 equal.
        let want = (16.0 / 42.0) * (18.0 - 24.0) / 16.0;
        assert!((morans_i(&g, Contiguity::Queen).unwrap() - want).abs() < 1e-12);
    }

    #[test]
    fn split_grid_is_positive_and_shift_invariant() {
        let v: Vec<f64> = (0..64).map(|i| if i % 8 < 4 { 0.1 } else { 0.7 }).collect();
        let a = morans_i(&grid(8, 8, v.clone()), Contiguity::Queen).unwrap();
        assert!(a > 0.0);
        let b = morans_i(&grid(8, 8, v.iter().map(|x| x + 0.2).collect()), Contiguity::Queen).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    /// Direct evaluation with explicit weight matrices.
    fn weights(w: usize, h: usize, queen: bool, with_self: bool) -> Vec<Vec<f64>> {
        let n = w * h;
        let mut m = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                let (dx, dy) = ((i % w).abs_diff(j % w), (i / w).abs_diff(j / w));
                let adj = if queen { dx <= 1 && dy <= 1 } else { dx + dy == 1 };
                if adj && (i != j || with_self) {
                    m[i][j] = 1.0;
                }
            }
        }
        m
    }

    fn fixture() -> ScalarField {
        let mut rng = SeededRng::new(8);
        grid(8, 8, (0..64).map(|i| if i % 9 == 0 { 0.9 } else { rng.uniform() * 0.4 }).collect())
    }

    #[test]
    fn morans_i_matches_matrix_formula() {
        let g = fixture();
        for (c, queen) in [(Contiguity::Rook, false), (Contiguity::Queen, true)] {
            let wm = weights(8, 8, queen, false);
            let m = g.mean();
            let z: Vec<f64> = g.values().iter().map(|v| v - m).collect();
            let (mut num, mut ws) = (0.0, 0.0);
            for i in 0..64 {
                for j in 0..64 {
                    num += wm[i][j] * z[i] * z[j];
                    ws += wm[i][j];
                }
            }
            let want = 64.0 / ws * num / z.iter().map(|v| v * v).sum::<f64>();
            assert!((morans_i(&g, c).unwrap() - want).abs() < 1e-9);
        }
    }

    #[test]
    fn gi_star_matches_formula() {
        let g = fixture();
        let wm = weights(8, 8, true, true);
        let x = g.values();
        let n = 64.0;
        let mean = x.iter().sum::<f64>() / n;
        let s = (x.iter().map(|v| v * v).sum::<f64>() / n - mean * mean).sqrt();
        let got = getis_ord(&g, 1.96).unwrap();
        for i in 0..64 {
            let wx: f64 = (0..64).map(|j| wm[i][j] * x[j]).sum();
            let wi: f64 = wm[i].iter().sum();
            let wi2: f64 = wm[i].iter().map(|w| w * w).sum();
            let want = (wx - mean * wi) / (s * ((n * wi2 - wi * wi) / (n - 1.0)).sqrt());
            assert!((got.z[i] - want).abs() < 1e-9);
        }
        assert_eq!(got.hot, got.z.iter().filter(|&&z| z > 1.96).count());
    }

    #[test]
    fn gi_star_mirror_symmetry() {
        // Left half v, right half 1 - v mirrored: hot and cold swap.
        let mut rng = SeededRng::new(4);
        let left: Vec<f64> = (0..32).map(|_| rng.uniform()).collect();
        let v: Vec<f64> = (0..64)
            .map(|i| {
                let (x, y) = (i % 8, i / 8);
                if x < 4 { left[y * 4 + x] } else { 1.0 - left[y * 4 + (7 - x)] }
            })
            .collect();
        let r = getis_ord(&grid(8, 8, v), 1.0).unwrap();
        assert_eq!(r.hot, r.cold);
        assert!(r.hot > 0);
        assert_eq!(r.ratio, 1.0);
    }

    #[test]
    fn gi_star_negation_swaps_counts() {
        let mut rng = SeededRng::new(19);
        let g = grid(8, 8, (0..64).map(|i| if i % 7 == 0 { 0.7 } else { 0.4 + 0.1 * rng.uniform() }).collect());
        let m = g.mean();
        let neg = grid(8, 8, g.values().iter().map(|v| (2.0 * m - v).clamp(0.0, 1.0)).collect());
        assert!(neg.values().iter().zip(g.values()).all(|(a, b)| (a + b - 2.0 * m).abs() < 1e-15));
        let (a, b) = (getis_ord(&g, 1.96).unwrap(), getis_ord(&neg, 1.96).unwrap());
        assert_eq!((a.hot, a.cold), (b.cold, b.hot));
    }

    #[test]
    fn hot_plateau_guarded_ratio() {
        let v: Vec<f64> = (0..100).map(|i| if i % 10 < 3 && i / 10 < 3 { 0.9 } else { 0.1 }).collect();
        let r = getis_ord(&grid(10, 10, v), 1.96).unwrap();
        assert!(r.hot > 0);
        assert_eq!(r.cold, 0);
        assert_eq!(r.ratio, r.hot as f64);
    }

    #[test]
    fn single_high_cell_is_the_only_outlier() {
        let mut v = vec![0.1; 64];
        v[27] = 0.9;
        let r = local_outliers(&grid(8, 8, v), &PermutationTest::default()).unwrap();
        assert_eq!((r.high_low, r.low_high), (1, 0));
        assert!(r.p_values[27] <= 0.05);
        assert_eq!(r.ratio, 1.0);
    }

    #[test]
    fn local_moran_matches_brute_force() {
        let g = fixture();
        let test = PermutationTest { seed: 42, ..PermutationTest::default() };
        let got = local_outliers(&g, &test).unwrap();
        let wm = weights(8, 8, true, false);
        let x = g.values();
        let m = x.iter().sum::<f64>() / 64.0;
        let z: Vec<f64> = x.iter().map(|v| v - m).collect();
        let m2 = z.iter().map(|v| v * v).sum::<f64>() / 64.0;
        let li = |z: &[f64], i: usize| z[i] / m2 * (0..64).map(|j| wm[i][j] * z[j]).sum::<f64>();
        let obs: Vec<f64> = (0..64).map(|i| li(&z, i)).collect();
        let mut rng = SeededRng::new(42);
        let mut perm = z.clone();
        let mut count = vec![0; 64];
        for _ in 0..99 {
            for i in (1..64).rev() {
                let j = rng.below(i as u64 + 1) as usize;
                perm.swap(i, j);
            }
            for i in 0..64 {
                if li(&perm, i) <= obs[i] {
                    count[i] += 1;
                }
            }
        }
        let (mut hl, mut lh) = (0, 0);
        for i in 0..64 {
            assert!((got.local_i[i] - obs[i]).abs() < 1e-9);
            let significant = obs[i] < 0.0 && (count[i] + 1) as f64 / 100.0 <= 0.05;
            if significant {
                if z[i] > 0.0 { hl += 1 } else { lh += 1 }
            }
        }
        assert_eq!((got.high_low, got.low_high), (hl, lh));
    }
}
