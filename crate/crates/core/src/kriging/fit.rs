//! Empirical variogram binning and weighted least-squares model fitting.

use super::variogram::{kind_shape, VariogramKind, VariogramModel};
use crate::error::{Error, Result};
use crate::raster_io::SamplePoint;

/// One lag class of the empirical variogram.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LagBin {
    pub centre: f64,
    pub semivariance: f64,
    pub pairs: usize,
}

/// Equal-width lag classes over `[0, max pairwise distance]`.
///
/// Each class holds the mean of `0.5 (v_i - v_j)^2` over the pairs whose
/// separation falls in it; the last class is closed on the right. Empty
/// classes are reported with zero pairs and zero semivariance.
pub fn empirical_variogram(samples: &[SamplePoint], n_lags: usize) -> Result<Vec<LagBin>> {
    if samples.len() < 2 {
        return Err(Error::invalid("empirical variogram needs at least 2 samples"));
    }
    if n_lags == 0 {
        return Err(Error::invalid("n_lags must be at least 1"));
    }
    let mut max_d = 0.0f64;
    for (i, a) in samples.iter().enumerate() {
        for b in &samples[i + 1..] {
            max_d = max_d.max(dist(a, b));
        }
    }
    if max_d == 0.0 {
        return Err(Error::DegenerateGeometry("all samples are co-located".into()));
    }
    let width = max_d / n_lags as f64;
    let mut sums = vec![0.0f64; n_lags];
    let mut counts = vec![0usize; n_lags];
    for (i, a) in samples.iter().enumerate() {
        for b in &samples[i + 1..] {
            let k = ((dist(a, b) / width) as usize).min(n_lags - 1);
            let dv = a.value - b.value;
            sums[k] += 0.5 * dv * dv;
            counts[k] += 1;
        }
    }
    Ok((0..n_lags)
        .map(|k| LagBin {
            centre: (k as f64 + 0.5) * width,
            semivariance: if counts[k] > 0 {
                sums[k] / counts[k] as f64
            } else {
                0.0
            },
            pairs: counts[k],
        })
        .collect())
}

#[inline]
fn dist(a: &SamplePoint, b: &SamplePoint) -> f64 {
    (a.x - b.x).hypot(a.y - b.y)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    /// Equal-width lag classes over the full pairwise distance range.
    pub n_lags: usize,
    /// Only lag classes whose centre lies within this fraction of the
    /// maximum pairwise distance enter the objective. Long lags have few
    /// independent pairs and are dominated by edge effects. Ignored when
    /// fewer than three populated classes would remain.
    pub max_lag_fraction: f64,
    /// Golden-section iterations allowed when refining the shape parameter.
    pub max_iterations: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            n_lags: 40,
            max_lag_fraction: 0.5,
            max_iterations: 100,
        }
    }
}

/// A fitted model with its diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VariogramFit {
    pub model: VariogramModel,
    /// Pair-count weighted squared residual of the model against the bins.
    pub weighted_sse: f64,
    pub converged: bool,
    /// Set when the samples carry no variance at all.
    pub degenerate: bool,
}

pub fn fit_variogram(samples: &[SamplePoint], kind: VariogramKind) -> Result<VariogramFit> {
    fit_variogram_with(samples, kind, &FitOptions::default())
}

/// Weighted least squares of `kind` against the empirical variogram, with
/// pair counts as weights.
///
/// Nugget and sill (or slope) enter the model linearly, so for any fixed
/// shape parameter (range, or the power exponent) they are solved exactly
/// under non-negativity. The shape parameter is then located by a log-spaced
/// grid scan refined with golden-section search.
pub fn fit_variogram_with(
    samples: &[SamplePoint],
    kind: VariogramKind,
    opts: &FitOptions,
) -> Result<VariogramFit> {
    let distinct = count_distinct(samples, 3);
    if distinct < 3 {
        return Err(Error::DegenerateGeometry(format!(
            "variogram fitting needs 3 distinct locations, got {distinct}"
        )));
    }
    let bins = empirical_variogram(samples, opts.n_lags)?;
    let max_d = bins.last().map(|b| b.centre).unwrap_or(0.0) * opts.n_lags as f64
        / (opts.n_lags as f64 - 0.5);
    let cutoff = max_d * opts.max_lag_fraction;
    let populated = bins.iter().filter(|b| b.pairs > 0);
    let mut data: Vec<(f64, f64, f64)> = populated
        .clone()
        .filter(|b| b.centre <= cutoff)
        .map(|b| (b.centre, b.semivariance, b.pairs as f64))
        .collect();
    if data.len() < 3 {
        data = populated.map(|b| (b.centre, b.semivariance, b.pairs as f64)).collect();
    }
    if data.is_empty() {
        return Err(Error::DegenerateGeometry("no populated lag classes".into()));
    }

    let degenerate = data.iter().all(|&(_, g, _)| g == 0.0);
    if degenerate {
        let mut model = VariogramModel {
            kind,
            sill: 0.0,
            range: max_d / 3.0,
            nugget: 0.0,
            exponent: 1.0,
            slope: 0.0,
        };
        if kind == VariogramKind::Linear || kind == VariogramKind::Power {
            model.range = 1.0;
        }
        return Ok(VariogramFit {
            model: model.validated()?,
            weighted_sse: 0.0,
            converged: true,
            degenerate: true,
        });
    }

    if kind == VariogramKind::Linear {
        let (nugget, slope, sse) = nnls2(&data, |h| h);
        return Ok(VariogramFit {
            model: VariogramModel::linear(slope, nugget)?,
            weighted_sse: sse,
            converged: true,
            degenerate: false,
        });
    }

    // Shape parameter search domain, in log space for range.
    let (lo, hi, log_space) = match kind {
        VariogramKind::Power => (0.01, 1.99, false),
        _ => {
            let smallest = data[0].0.max(max_d * 1e-3);
            (smallest / 10.0, max_d * 3.0, true)
        }
    };
    let to_param = |t: f64| if log_space { t.exp() } else { t };
    let (t_lo, t_hi) = if log_space {
        (lo.ln(), hi.ln())
    } else {
        (lo, hi)
    };
    let objective = |t: f64| {
        let p = to_param(t);
        let (range, exponent) = if kind == VariogramKind::Power {
            (1.0, p)
        } else {
            (p, 1.0)
        };
        nnls2(&data, |h| kind_shape(kind, h, range, exponent)).2
    };

    const GRID: usize = 64;
    let grid: Vec<f64> = (0..GRID)
        .map(|i| t_lo + (t_hi - t_lo) * i as f64 / (GRID - 1) as f64)
        .collect();
    let mut best = 0;
    let mut best_val = f64::INFINITY;
    for (i, &t) in grid.iter().enumerate() {
        let v = objective(t);
        if v < best_val {
            best_val = v;
            best = i;
        }
    }
    let mut a = grid[best.saturating_sub(1)];
    let mut b = grid[(best + 1).min(GRID - 1)];
    let tol = 1e-9 * (t_hi - t_lo).abs().max(1.0);
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (objective(c), objective(d));
    let mut converged = false;
    for _ in 0..opts.max_iterations {
        if (b - a).abs() <= tol {
            converged = true;
            break;
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = objective(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = objective(d);
        }
    }
    // Keep whichever of the grid point and the refined point is better.
    let refined = if fc <= fd { c } else { d };
    let t = if objective(refined) <= best_val {
        refined
    } else {
        grid[best]
    };
    let p = to_param(t);
    let (range, exponent) = if kind == VariogramKind::Power {
        (1.0, p)
    } else {
        (p, 1.0)
    };
    let (nugget, sill, sse) = nnls2(&data, |h| kind_shape(kind, h, range, exponent));
    let model = VariogramModel {
        kind,
        sill,
        range,
        nugget,
        exponent,
        slope: 0.0,
    }
    .validated()?;
    Ok(VariogramFit {
        model,
        weighted_sse: sse,
        converged,
        degenerate: false,
    })
}

/// Non-negative weighted least squares for `y ≈ nugget + scale · f(h)`.
/// Returns `(nugget, scale, weighted sse)`.
fn nnls2(data: &[(f64, f64, f64)], f: impl Fn(f64) -> f64) -> (f64, f64, f64) {
    let (mut sw, mut swf, mut swff, mut swy, mut swfy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    let fs: Vec<f64> = data.iter().map(|&(h, _, _)| f(h)).collect();
    for (&(_, y, w), &fh) in data.iter().zip(&fs) {
        sw += w;
        swf += w * fh;
        swff += w * fh * fh;
        swy += w * y;
        swfy += w * fh * y;
    }
    let sse = |n: f64, s: f64| {
        data.iter()
            .zip(&fs)
            .map(|(&(_, y, w), &fh)| {
                let r = y - n - s * fh;
                w * r * r
            })
            .sum::<f64>()
    };
    let mut candidates = Vec::with_capacity(4);
    let det = sw * swff - swf * swf;
    if det > 1e-12 * sw * swff.max(f64::MIN_POSITIVE) {
        let n = (swff * swy - swf * swfy) / det;
        let s = (sw * swfy - swf * swy) / det;
        if n >= 0.0 && s >= 0.0 {
            candidates.push((n, s));
        }
    }
    if swff > 0.0 {
        candidates.push((0.0, (swfy / swff).max(0.0)));
    }
    candidates.push(((swy / sw).max(0.0), 0.0));
    candidates
        .into_iter()
        .map(|(n, s)| (n, s, sse(n, s)))
        .min_by(|a, b| a.2.total_cmp(&b.2))
        .expect("at least one candidate")
}

/// Distinct locations, counting no further than `cap`.
pub(crate) fn count_distinct(samples: &[SamplePoint], cap: usize) -> usize {
    let mut seen: Vec<(f64, f64)> = Vec::with_capacity(cap);
    for s in samples {
        if !seen.iter().any(|&(x, y)| x == s.x && y == s.y) {
            seen.push((s.x, s.y));
            if seen.len() >= cap {
                break;
            }
        }
    }
    seen.len()
}
