//! Ordinary kriging over a fixed sample set.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::variogram::VariogramModel;
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::raster_io::SamplePoint;

const JITTER: f64 = 1e-10;
const PIVOT_RTOL: f64 = 1e-13;

/// Kriging mean and variance at one location.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub mean: f64,
    pub variance: f64,
}

/// Leave-one-out cross-validation statistics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QStats {
    /// Mean standardised residual.
    pub q1: f64,
    /// Mean squared standardised residual.
    pub q2: f64,
    /// `q2` times the geometric mean of the LOO kriging variances.
    pub cr: f64,
}

/// An ordinary kriging system assembled and factorised once.
///
/// The system is the variogram matrix bordered by the unbiasedness
/// constraint:
///
/// ```text
/// | Γ   1 | | w |   | γ(x) |
/// | 1ᵀ  0 | | μ | = |  1   |
/// ```
///
/// Samples sharing a location are averaged into one point first.
#[derive(Debug, Clone)]
pub struct KrigingModel {
    points: Vec<SamplePoint>,
    variogram: VariogramModel,
    lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    /// `A⁻¹ [v; 0]`; the mean at `x` is its dot product with `[γ(x); 1]`.
    dual: DVector<f64>,
    jittered: bool,
}

impl KrigingModel {
    pub fn new(samples: &[SamplePoint], variogram: VariogramModel) -> Result<Self> {
        let points = merge_duplicates(samples);
        if points.len() < 2 {
            return Err(Error::DegenerateGeometry(
                "kriging needs at least 2 distinct sample locations".into(),
            ));
        }
        let n = points.len();
        let mut a = DMatrix::<f64>::zeros(n + 1, n + 1);
        for i in 0..n {
            for j in (i + 1)..n {
                let g = variogram.gamma(distance(&points[i], &points[j]));
                a[(i, j)] = g;
                a[(j, i)] = g;
            }
            a[(i, n)] = 1.0;
            a[(n, i)] = 1.0;
        }
        let (lu, jittered) = match factorise(a.clone()) {
            Some(lu) => (lu, false),
            None => {
                for i in 0..n {
                    a[(i, i)] += JITTER;
                }
                let lu = factorise(a).ok_or_else(|| {
                    Error::Singular(format!(
                        "kriging matrix for {n} samples is singular even after jitter"
                    ))
                })?;
                (lu, true)
            }
        };
        let mut rhs = DVector::<f64>::zeros(n + 1);
        for (i, p) in points.iter().enumerate() {
            rhs[i] = p.value;
        }
        let dual = lu
            .solve(&rhs)
            .filter(|d| d.iter().all(|v| v.is_finite()))
            .ok_or_else(|| Error::Singular("dual solve produced non-finite weights".into()))?;
        Ok(Self {
            points,
            variogram,
            lu,
            dual,
            jittered,
        })
    }

    /// Training points after duplicate averaging.
    pub fn points(&self) -> &[SamplePoint] {
        &self.points
    }

    pub fn variogram(&self) -> &VariogramModel {
        &self.variogram
    }

    /// Whether the diagonal jitter fallback was needed.
    pub fn jittered(&self) -> bool {
        self.jittered
    }

    fn rhs_at(&self, x: f64, y: f64) -> DVector<f64> {
        let n = self.points.len();
        let mut g = DVector::<f64>::zeros(n + 1);
        for (i, p) in self.points.iter().enumerate() {
            g[i] = self.variogram.gamma((p.x - x).hypot(p.y - y));
        }
        g[n] = 1.0;
        g
    }

    /// Kriging weights at `(x, y)` followed by the Lagrange multiplier.
    pub fn weights(&self, x: f64, y: f64) -> Result<(Vec<f64>, f64)> {
        let sol = self
            .lu
            .solve(&self.rhs_at(x, y))
            .ok_or_else(|| Error::Singular("weight solve failed".into()))?;
        let n = self.points.len();
        Ok((sol.as_slice()[..n].to_vec(), sol[n]))
    }

    /// The kriging mean, evaluated in dual form: O(n) per location.
    #[inline]
    pub fn mean_at(&self, x: f64, y: f64) -> f64 {
        let n = self.points.len();
        let mut acc = self.dual[n];
        for (p, &a) in self.points.iter().zip(self.dual.iter()) {
            acc += a * self.variogram.gamma((p.x - x).hypot(p.y - y));
        }
        acc
    }

    /// Mean and variance at `(x, y)`.
    ///
    /// The mean equals [`KrigingModel::mean_at`]; the variance is
    /// `Σ wᵢ γ(xᵢ, x) + μ`, clamped at zero once it is within numerical slack.
    pub fn predict(&self, x: f64, y: f64) -> Result<Prediction> {
        let g = self.rhs_at(x, y);
        let sol = self
            .lu
            .solve(&g)
            .ok_or_else(|| Error::Singular("prediction solve failed".into()))?;
        let variance = sol.dot(&g);
        if !variance.is_finite() {
            return Err(Error::Singular("non-finite kriging variance".into()));
        }
        Ok(Prediction {
            mean: self.mean_at(x, y),
            variance: if variance < 0.0 && variance > -1e-9 {
                0.0
            } else {
                variance
            },
        })
    }

    /// Renders the mean at every cell centre `(i + 0.5, j + 0.5)`, clamped to
    /// `[0, 1]`. Rows are evaluated in parallel; each cell is an independent
    /// call to [`KrigingModel::mean_at`].
    pub fn render_field(&self, width: usize, height: usize) -> Result<ScalarField> {
        if width == 0 || height == 0 {
            return Err(Error::invalid("render dimensions must be at least 1"));
        }
        let mut values = vec![0.0; width * height];
        values
            .par_chunks_mut(width)
            .enumerate()
            .for_each(|(j, row)| {
                let y = j as f64 + 0.5;
                for (i, v) in row.iter_mut().enumerate() {
                    *v = self.mean_at(i as f64 + 0.5, y);
                }
            });
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Singular("non-finite kriging mean".into()));
        }
        ScalarField::new(width, height, values)
    }

    /// Leave-one-out residuals and variances, `(vᵢ - v̂₋ᵢ, σ̂²₋ᵢ)`.
    ///
    /// Uses the block-inverse identity for bordered systems: with
    /// `B = A⁻¹`, the LOO error is `(B [v; 0])ᵢ / Bᵢᵢ` and the LOO
    /// variance `-1 / Bᵢᵢ`, so no system is refactorised.
    pub fn loo_residuals(&self) -> Result<Vec<(f64, f64)>> {
        let n = self.points.len();
        let inv = self
            .lu
            .try_inverse()
            .ok_or_else(|| Error::Singular("kriging matrix inverse failed".into()))?;
        (0..n)
            .map(|i| {
                let bii = inv[(i, i)];
                if bii == 0.0 || !bii.is_finite() {
                    return Err(Error::DegenerateModel(format!(
                        "sample {i} has no leave-one-out variance"
                    )));
                }
                Ok((self.dual[i] / bii, -1.0 / bii))
            })
            .collect()
    }

    /// Q1/Q2/cR over standardised leave-one-out residuals.
    pub fn cross_validate(&self) -> Result<QStats> {
        let n = self.points.len();
        if n < 3 {
            return Err(Error::invalid("cross-validation needs at least 3 samples"));
        }
        let loo = self.loo_residuals()?;
        let (mut s1, mut s2, mut slog) = (0.0, 0.0, 0.0);
        for (i, &(err, var)) in loo.iter().enumerate() {
            if var <= 0.0 || !var.is_finite() {
                return Err(Error::DegenerateModel(format!(
                    "leave-one-out kriging variance at sample {i} is {var}"
                )));
            }
            let eps = err / var.sqrt();
            s1 += eps;
            s2 += eps * eps;
            slog += var.ln();
        }
        let nf = n as f64;
        let q2 = s2 / nf;
        Ok(QStats {
            q1: s1 / nf,
            q2,
            cr: q2 * (slog / nf).exp(),
        })
    }
}

fn factorise(a: DMatrix<f64>) -> Option<nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>> {
    let lu = a.lu();
    let u = lu.u();
    let diag = u.diagonal();
    let max = diag.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let min = diag.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
    if !(max > 0.0) || !(min > PIVOT_RTOL * max) {
        return None;
    }
    Some(lu)
}

#[inline]
fn distance(a: &SamplePoint, b: &SamplePoint) -> f64 {
    (a.x - b.x).hypot(a.y - b.y)
}

/// Averages the values of samples sharing exact coordinates. Order of first
/// appearance is kept.
fn merge_duplicates(samples: &[SamplePoint]) -> Vec<SamplePoint> {
    use std::collections::HashMap;
    let mut index: HashMap<(u64, u64), usize> = HashMap::with_capacity(samples.len());
    let mut sums: Vec<(f64, f64, f64, usize)> = Vec::with_capacity(samples.len());
    for s in samples {
        // +0.0 and -0.0 are the same location.
        let key = ((s.x + 0.0).to_bits(), (s.y + 0.0).to_bits());
        match index.get(&key) {
            Some(&k) => {
                sums[k].2 += s.value;
                sums[k].3 += 1;
            }
            None => {
                index.insert(key, sums.len());
                sums.push((s.x, s.y, s.value, 1));
            }
        }
    }
    sums.into_iter()
        .map(|(x, y, v, c)| SamplePoint::new(x, y, v / c as f64))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeededRng;

    fn random_samples(n: usize, seed: u64, extent: f64) -> Vec<SamplePoint> {
        let mut rng = SeededRng::new(seed);
        (0..n)
            .map(|_| {
                SamplePoint::new(
                    rng.uniform() * extent,
                    rng.uniform() * extent,
                    rng.uniform(),
                )
            })
            .collect()
    }

    fn exp_model() -> VariogramModel {
        VariogramModel::exponential(0.05, 10.0, 0.0).unwrap()
    }

    #[test]
    fn constant_duplicated_value_everywhere() {
        let s = [
            SamplePoint::new(0.0, 0.0, 0.4),
            SamplePoint::new(10.0, 0.0, 0.4),
            SamplePoint::new(3.0, 7.0, 0.4),
        ];
        let m = KrigingModel::new(&s, exp_model()).unwrap();
        for (x, y) in [(1.0, 1.0), (50.0, -20.0), (5.0, 3.5)] {
            assert!((m.predict(x, y).unwrap().mean - 0.4).abs() < 1e-12);
        }
    }

    #[test]
    fn equidistant_pair_averages() {
        let s = [SamplePoint::new(0.0, 0.0, 0.2), SamplePoint::new(10.0, 0.0, 0.9)];
        let m = KrigingModel::new(&s, exp_model()).unwrap();
        for y in [0.0, 3.0, -40.0] {
            assert!((m.predict(5.0, y).unwrap().mean - 0.55).abs() < 1e-12);
        }
    }

    #[test]
    fn three_sample_system_matches_hand_solve() {
        // Oracle: Cramer's rule on the 4x4 bordered system.
        let s = [
            SamplePoint::new(0.0, 0.0, 0.1),
            SamplePoint::new(4.0, 0.0, 0.5),
            SamplePoint::new(0.0, 3.0, 0.3),
        ];
        let vg = VariogramModel::exponential(1.0, 2.0, 0.0).unwrap();
        let m = KrigingModel::new(&s, vg).unwrap();
        let q = (1.0, 1.0);
        let d = |a: (f64, f64), b: (f64, f64)| ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt();
        let g = |h: f64| 1.0 - (-h / 2.0).exp();
        let p: Vec<(f64, f64)> = s.iter().map(|s| (s.x, s.y)).collect();
        let mut a = [[0.0f64; 4]; 4];
        let mut b = [0.0f64; 4];
        for i in 0..3 {
            for j in 0..3 {
                a[i][j] = if i == j { 0.0 } else { g(d(p[i], p[j])) };
            }
            a[i][3] = 1.0;
            a[3][i] = 1.0;
            b[i] = g(d(p[i], q));
        }
        b[3] = 1.0;
        let det4 = |m: &[[f64; 4]; 4]| -> f64 {
            let mut total = 0.0;
            for c in 0..4 {
                let mut minor = [[0.0; 3]; 3];
                for r in 1..4 {
                    let mut cc = 0;
                    for k in 0..4 {
                        if k != c {
                            minor[r - 1][cc] = m[r][k];
                            cc += 1;
                        }
                    }
                }
                let d3 = minor[0][0] * (minor[1][1] * minor[2][2] - minor[1][2] * minor[2][1])
                    - minor[0][1] * (minor[1][0] * minor[2][2] - minor[1][2] * minor[2][0])
                    + minor[0][2] * (minor[1][0] * minor[2][1] - minor[1][1] * minor[2][0]);
                total += if c % 2 == 0 { 1.0 } else { -1.0 } * m[0][c] * d3;
            }
            total
        };
        let det = det4(&a);
        let mut sol = [0.0; 4];
        for k in 0..4 {
            let mut ak = a;
            for r in 0..4 {
                ak[r][k] = b[r];
            }
            sol[k] = det4(&ak) / det;
        }
        let mean: f64 = (0..3).map(|i| sol[i] * s[i].value).sum();
        let var: f64 = (0..3).map(|i| sol[i] * b[i]).sum::<f64>() + sol[3];
        let pred = m.predict(q.0, q.1).unwrap();
        assert!((pred.mean - mean).abs() < 1e-12, "{} vs {mean}", pred.mean);
        assert!((pred.variance - var).abs() < 1e-12);
        let (w, mu) = m.weights(q.0, q.1).unwrap();
        for i in 0..3 {
            assert!((w[i] - sol[i]).abs() < 1e-12);
        }
        assert!((mu - sol[3]).abs() < 1e-12);
    }

    #[test]
    fn exact_at_samples_with_zero_nugget() {
        let s = random_samples(40, 4, 100.0);
        let m = KrigingModel::new(&s, exp_model()).unwrap();
        for p in &s {
            let pred = m.predict(p.x, p.y).unwrap();
            assert!((pred.mean - p.value).abs() < 1e-6);
            assert!(pred.variance.abs() < 1e-9);
        }
    }

    #[test]
    fn weights_sum_to_one_and_variance_non_negative() {
        let s = random_samples(30, 9, 60.0);
        for vg in [
            exp_model(),
            VariogramModel::spherical(0.04, 25.0, 0.01).unwrap(),
            VariogramModel::gaussian(0.04, 15.0, 0.001).unwrap(),
            VariogramModel::linear(0.002, 0.0).unwrap(),
            VariogramModel::power(0.01, 1.3, 0.0).unwrap(),
        ] {
            let m = KrigingModel::new(&s, vg).unwrap();
            let mut rng = SeededRng::new(1);
            for _ in 0..50 {
                let (x, y) = (rng.uniform() * 80.0 - 10.0, rng.uniform() * 80.0 - 10.0);
                let (w, _) = m.weights(x, y).unwrap();
                assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-9);
                assert!(m.predict(x, y).unwrap().variance >= -1e-9);
            }
        }
    }

    #[test]
    fn duplicates_are_averaged() {
        let s = [
            SamplePoint::new(0.0, 0.0, 0.2),
            SamplePoint::new(0.0, 0.0, 0.6),
            SamplePoint::new(8.0, 0.0, 0.1),
        ];
        let m = KrigingModel::new(&s, exp_model()).unwrap();
        assert_eq!(m.points().len(), 2);
        assert!((m.predict(0.0, 0.0).unwrap().mean - 0.4).abs() < 1e-12);
        assert!(KrigingModel::new(&s[..2], exp_model()).is_err());
    }

    #[test]
    fn zero_sill_falls_back_to_jitter() {
        let s = random_samples(10, 2, 20.0);
        let vg = VariogramModel::exponential(0.0, 5.0, 0.0).unwrap();
        let m = KrigingModel::new(&s, vg).unwrap();
        assert!(m.jittered());
        let mean = s.iter().map(|p| p.value).sum::<f64>() / s.len() as f64;
        assert!((m.mean_at(3.0, 4.0) - mean).abs() < 1e-6);
    }

    #[test]
    fn loo_identity_matches_refitting() {
        let s = random_samples(25, 12, 50.0);
        let vg = VariogramModel::spherical(0.06, 20.0, 0.005).unwrap();
        let m = KrigingModel::new(&s, vg).unwrap();
        let fast = m.loo_residuals().unwrap();
        for (i, &(err, var)) in fast.iter().enumerate() {
            let rest: Vec<_> = s
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, p)| *p)
                .collect();
            let sub = KrigingModel::new(&rest, vg).unwrap();
            let pred = sub.predict(s[i].x, s[i].y).unwrap();
            assert!((err - (s[i].value - pred.mean)).abs() < 1e-9);
            assert!((var - pred.variance).abs() < 1e-9);
        }
    }

    #[test]
    fn inflated_sill_scales_q2() {
        let s = random_samples(40, 21, 80.0);
        let base = VariogramModel::exponential(0.05, 15.0, 0.0).unwrap();
        let big = VariogramModel::exponential(0.2, 15.0, 0.0).unwrap();
        let q = KrigingModel::new(&s, base).unwrap().cross_validate().unwrap();
        let q4 = KrigingModel::new(&s, big).unwrap().cross_validate().unwrap();
        assert!((q4.q2 / q.q2 - 0.25).abs() < 1e-9);
        assert!((q4.q1 / q.q1 - 0.5).abs() < 1e-9);
    }

    #[test]
    fn render_matches_pointwise_prediction() {
        let s = random_samples(30, 33, 64.0);
        let m = KrigingModel::new(&s, exp_model()).unwrap();
        let f = m.render_field(64, 64).unwrap();
        for j in 0..64 {
            for i in 0..64 {
                let p = m.predict(i as f64 + 0.5, j as f64 + 0.5).unwrap();
                assert_eq!(f.get(i, j), p.mean.clamp(0.0, 1.0));
            }
        }
        let one = m.render_field(1, 1).unwrap();
        assert_eq!(one.get(0, 0), m.predict(0.5, 0.5).unwrap().mean.clamp(0.0, 1.0));
        assert!(m.render_field(0, 3).is_err());
    }

    #[test]
    fn constant_samples_render_constant() {
        let s: Vec<_> = random_samples(12, 6, 30.0)
            .into_iter()
            .map(|p| SamplePoint { value: 0.25, ..p })
            .collect();
        let fit = super::super::fit_variogram(&s, super::super::VariogramKind::Exponential).unwrap();
        let m = KrigingModel::new(&s, fit.model).unwrap();
        let f = m.render_field(16, 8).unwrap();
        assert!(f.values().iter().all(|v| (v - 0.25).abs() < 1e-9));
    }
}
