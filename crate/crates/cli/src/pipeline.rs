//! The per-trial pipeline shared by `bench` and the stage commands.

use std::sync::Mutex;

use anyhow::{Context, Result};
use krigrid_core::field::ScalarField;
use krigrid_core::kriging::{fit_variogram, KrigingModel, QStats, VariogramFit, VariogramKind, VariogramModel};
use krigrid_core::metrics::MetricReport;
use krigrid_core::raster_io::{rescale_samples, sample_uniform, SamplePoint, SemanticRaster};
use krigrid_core::representations::{DiscreteRepresentation, ReprKind, ReprParams};

/// Serialises timed builds across the whole process.
static BUILD_LOCK: Mutex<()> = Mutex::new(());

/// Gridmap dimensions for a raster.
pub fn grid_dims(raster: &SemanticRaster, long_side: usize) -> (usize, usize) {
    ScalarField::scaled_dims(raster.width(), raster.height(), long_side)
}

/// Pooled samples drawn on the raster, with coordinates mapped onto the
/// gridmap's cell units.
pub fn sample_grid(raster: &SemanticRaster, n: usize, window: usize, seed: u64, long_side: usize) -> Result<Vec<SamplePoint>> {
    let samples = sample_uniform(raster, n, window, seed)?;
    let (gw, gh) = grid_dims(raster, long_side);
    Ok(rescale_samples(&samples, raster.width(), raster.height(), gw, gh))
}

pub fn fit(samples: &[SamplePoint], kind: VariogramKind) -> Result<(VariogramFit, Option<QStats>)> {
    let fit = fit_variogram(samples, kind).context("fitting variogram")?;
    let q = KrigingModel::new(samples, fit.model).ok().and_then(|m| m.cross_validate().ok());
    Ok((fit, q))
}

pub fn render(samples: &[SamplePoint], model: VariogramModel, width: usize, height: usize) -> Result<ScalarField> {
    let krig = KrigingModel::new(samples, model).context("assembling kriging system")?;
    Ok(krig.render_field(width, height)?)
}

/// Builds one representation with the wall clock running. The builder runs
/// on its own thread while holding a process-wide lock, so no two timed
/// builds overlap and a waiting caller never picks up other pool work.
pub fn build_timed(kind: ReprKind, field: &ScalarField, params: &ReprParams) -> Result<DiscreteRepresentation> {
    let out = std::thread::scope(|s| {
        s.spawn(|| {
            let _guard = BUILD_LOCK.lock().unwrap_or_else(|e| e.into_inner());
            DiscreteRepresentation::build(kind, field, params)
        })
        .join()
        .expect("builder thread panicked")
    });
    out.with_context(|| format!("building {}", kind.name()))
}

/// Parses a row written by [`MetricReport::csv_record`]; returns the map,
/// trial and report.
pub fn parse_metric_record(rec: &csv::StringRecord) -> Result<(String, u32, MetricReport)> {
    if rec.len() != MetricReport::CSV_HEADER.len() {
        anyhow::bail!("metrics row has {} columns, expected {}", rec.len(), MetricReport::CSV_HEADER.len());
    }
    let num = |i: usize| -> Result<f64> {
        rec[i]
            .parse::<f64>()
            .with_context(|| format!("column {} = {:?}", MetricReport::CSV_HEADER[i], &rec[i]))
    };
    let int = |i: usize| -> Result<usize> {
        rec[i]
            .parse::<usize>()
            .with_context(|| format!("column {} = {:?}", MetricReport::CSV_HEADER[i], &rec[i]))
    };
    let repr: ReprKind = rec[1].parse()?;
    Ok((
        rec[0].to_string(),
        int(2)? as u32,
        MetricReport {
            repr,
            one_minus_ssim: num(3)? / 1e4,
            hamming: int(4)?,
            mse: num(5)?,
            build_time: num(6)?,
            size_bytes: int(7)?,
            leaf_count: int(8)?,
        },
    ))
}
