//! The stage commands: each reads upstream artifacts from disk and writes
//! its own, so a chain of them reproduces `bench`.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use krigrid_core::features::{compute_features, FieldFeatures};
use krigrid_core::kriging::{VariogramKind, VariogramModel};
use krigrid_core::metrics::{evaluate, MetricReport};
use krigrid_core::raster_io::{
    load_orthomosaic_file, read_field_any, read_samples_csv, write_field_png, write_field_raw, write_samples_csv, Rgb,
};
use krigrid_core::representations::{DiscreteRepresentation, ReprKind, ReprParams};

use crate::bench::{write_correlations, write_features_csv};
use crate::pipeline::{build_timed, fit, grid_dims, parse_metric_record, render, sample_grid};

fn require(path: &Path, what: &str) -> Result<()> {
    if !path.is_file() {
        bail!("missing {what}: expected file {}", path.display());
    }
    Ok(())
}

/// Path of the build-time sidecar written next to a serialised representation.
pub fn meta_path(repr: &Path) -> PathBuf {
    let mut s = repr.as_os_str().to_owned();
    s.push(".meta");
    PathBuf::from(s)
}

pub struct SampleArgs<'a> {
    pub raster: &'a Path,
    pub weed_colour: Rgb,
    pub samples: usize,
    pub window: usize,
    pub seed: u64,
    pub long_side: usize,
    pub out: &'a Path,
}

/// Draws samples and writes them in gridmap cell coordinates.
pub fn sample(a: &SampleArgs) -> Result<usize> {
    require(a.raster, "raster")?;
    let raster = load_orthomosaic_file(a.raster, a.weed_colour)?;
    let s = sample_grid(&raster, a.samples, a.window, a.seed, a.long_side)?;
    write_samples_csv(&s, a.out)?;
    Ok(s.len())
}

/// Fits a variogram; returns the model's text block followed by the
/// cross-validation statistics as comments.
pub fn fit_stage(samples: &Path, kind: VariogramKind, out: Option<&Path>) -> Result<String> {
    require(samples, "samples CSV")?;
    let s = read_samples_csv(samples)?;
    let (f, q) = fit(&s, kind)?;
    let mut text = f.model.to_text();
    if let Some(p) = out {
        fs::write(p, &text).with_context(|| format!("writing {}", p.display()))?;
    }
    text.push_str(&format!("# weighted_sse = {}\n# converged = {}\n# degenerate = {}\n", f.weighted_sse, f.converged, f.degenerate));
    if let Some(q) = q {
        text.push_str(&format!("# q1 = {}\n# q2 = {}\n# cr = {}\n", q.q1, q.q2, q.cr));
    }
    Ok(text)
}

pub enum GridSize<'a> {
    Explicit(usize, usize),
    FromRaster { raster: &'a Path, weed_colour: Rgb, long_side: usize },
}

/// Renders the kriging mean to a lossless field file, optionally also a PNG.
pub fn render_gp(samples: &Path, variogram: &Path, size: GridSize, out: &Path, png: Option<&Path>) -> Result<(usize, usize)> {
    require(samples, "samples CSV")?;
    require(variogram, "variogram file")?;
    let s = read_samples_csv(samples)?;
    let model = VariogramModel::from_text(&fs::read_to_string(variogram)?)?;
    let (w, h) = match size {
        GridSize::Explicit(w, h) => (w, h),
        GridSize::FromRaster { raster, weed_colour, long_side } => {
            require(raster, "raster")?;
            grid_dims(&load_orthomosaic_file(raster, weed_colour)?, long_side)
        }
    };
    let field = render(&s, model, w, h)?;
    write_field_raw(&field, out)?;
    if let Some(p) = png {
        write_field_png(&field, p)?;
    }
    Ok((w, h))
}

/// Builds one representation and writes it plus a `.meta` sidecar holding
/// the build time.
pub fn build(field: &Path, kind: ReprKind, params: &ReprParams, out: &Path) -> Result<DiscreteRepresentation> {
    require(field, "field")?;
    let f = read_field_any(field)?;
    let repr = build_timed(kind, &f, params)?;
    fs::write(out, repr.serialize()).with_context(|| format!("writing {}", out.display()))?;
    fs::write(meta_path(out), format!("build_time_s = {}\n", repr.build_time))?;
    Ok(repr)
}

fn read_build_time(meta: &Path) -> Result<f64> {
    require(meta, "build metadata")?;
    let text = fs::read_to_string(meta)?;
    text.lines()
        .filter_map(|l| l.split_once('='))
        .find(|(k, _)| k.trim() == "build_time_s")
        .and_then(|(_, v)| v.trim().parse().ok())
        .with_context(|| format!("{} has no build_time_s", meta.display()))
}

/// Scores a stored representation against its reference field. The build
/// time comes from `build_time` or else from the `.meta` sidecar.
pub fn eval(repr: &Path, reference: &Path, build_time: Option<f64>) -> Result<MetricReport> {
    require(repr, "representation")?;
    require(reference, "reference field")?;
    let mut r = DiscreteRepresentation::deserialize(&fs::read(repr)?)?;
    r.build_time = match build_time {
        Some(t) => t,
        None => read_build_time(&meta_path(repr))?,
    };
    Ok(evaluate(&r, &read_field_any(reference)?)?)
}

/// Writes metric rows with the header, appending rows when `append` is set
/// and the file already exists.
pub fn write_metric_rows(path: &Path, rows: &[(String, u32, MetricReport)], append: bool) -> Result<()> {
    let exists = append && path.is_file();
    let file = fs::OpenOptions::new()
        .create(true)
        .append(exists)
        .write(true)
        .truncate(!exists)
        .open(path)
        .with_context(|| format!("opening {}", path.display()))?;
    let mut w = csv::Writer::from_writer(file);
    if !exists {
        w.write_record(MetricReport::CSV_HEADER)?;
    }
    for (map, trial, r) in rows {
        w.write_record(r.csv_record(map, *trial))?;
    }
    w.flush()?;
    Ok(())
}

pub fn features(rasters: &[PathBuf], weed_colour: Rgb, cfg: &krigrid_core::features::FeatureConfig, out: &Path) -> Result<Vec<(String, FieldFeatures)>> {
    let mut rows = Vec::new();
    for p in rasters {
        require(p, "raster")?;
        let r = load_orthomosaic_file(p, weed_colour)?;
        let name = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        rows.push((name, compute_features(&r, cfg)?));
    }
    write_features_csv(out, &rows)?;
    Ok(rows)
}

pub fn read_features_csv(path: &Path) -> Result<Vec<(String, FieldFeatures)>> {
    require(path, "features CSV")?;
    let mut rd = csv::Reader::from_path(path)?;
    if rd.headers()?.iter().collect::<Vec<_>>() != FieldFeatures::csv_header() {
        bail!("{}: unexpected header", path.display());
    }
    let mut rows = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        let mut v = [None; 10];
        for (slot, s) in v.iter_mut().zip(rec.iter().skip(1)) {
            if !s.is_empty() {
                *slot = Some(s.parse::<f64>().with_context(|| format!("bad feature value {s:?}"))?);
            }
        }
        rows.push((rec[0].to_string(), FieldFeatures::from_values(v)?));
    }
    Ok(rows)
}

pub fn read_metrics_csv(path: &Path) -> Result<Vec<(String, u32, MetricReport)>> {
    require(path, "metrics CSV")?;
    let mut rd = csv::Reader::from_path(path)?;
    if rd.headers()?.iter().collect::<Vec<_>>() != MetricReport::CSV_HEADER {
        bail!("{}: unexpected header", path.display());
    }
    rd.records().map(|r| parse_metric_record(&r?)).collect()
}

/// Writes `correlations.csv` and `correlations.md` into `out_dir`.
pub fn correlate_stage(features: &Path, metrics: &Path, out_dir: &Path) -> Result<String> {
    let f = read_features_csv(features)?;
    let m: Vec<(String, MetricReport)> = read_metrics_csv(metrics)?.into_iter().map(|(m, _, r)| (m, r)).collect();
    fs::create_dir_all(out_dir)?;
    match write_correlations(out_dir, &f, &m)? {
        Ok(t) => Ok(t.extremes_markdown()),
        Err(msg) => bail!("correlation failed: {msg}"),
    }
}
