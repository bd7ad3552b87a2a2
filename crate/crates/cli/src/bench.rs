//! The full benchmark: every field × trial × representation.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use krigrid_core::correlation::{correlate, CorrelationTable};
use krigrid_core::features::{compute_features, FieldFeatures};
use krigrid_core::kriging::{QStats, VariogramFit};
use krigrid_core::metrics::{evaluate, MetricReport};
use krigrid_core::raster_io::{load_orthomosaic_file, write_field_png, SemanticRaster};
use krigrid_core::representations::{DiscreteRepresentation, ReprKind};
use rayon::prelude::*;

use crate::config::BenchConfig;
use crate::pipeline::{build_timed, fit, grid_dims, parse_metric_record, render, sample_grid};
use crate::report;

pub const ERRORS_HEADER: [&str; 4] = ["map", "trial", "stage", "message"];
pub const VARIOGRAM_HEADER: [&str; 13] = [
    "map", "trial", "kind", "sill", "range", "nugget", "exponent", "slope", "weighted_sse", "converged", "q1", "q2", "cr",
];

/// A failed stage; `trial` is `None` for per-field stages.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorRow {
    pub map: String,
    pub trial: Option<u32>,
    pub stage: &'static str,
    pub message: String,
}

struct TrialOutput {
    fit: VariogramFit,
    q: Option<QStats>,
    reports: Vec<MetricReport>,
    dense_bytes: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchOutcome {
    pub out: PathBuf,
    pub trials_ok: usize,
    pub trials_failed: usize,
    pub errors: Vec<ErrorRow>,
}

fn run_trial(
    cfg: &BenchConfig,
    map: &str,
    raster: &SemanticRaster,
    trial: u32,
    render_dir: Option<&Path>,
) -> std::result::Result<TrialOutput, ErrorRow> {
    let fail = |stage: &'static str| {
        let map = map.to_string();
        move |e: anyhow::Error| ErrorRow {
            map,
            trial: Some(trial),
            stage,
            message: format!("{e:#}"),
        }
    };
    let seed = cfg.base_seed.wrapping_add(trial as u64);
    let samples = sample_grid(raster, cfg.samples, cfg.window, seed, cfg.long_side).map_err(fail("sample"))?;
    let kind = cfg.variogram_kind().map_err(fail("fit"))?;
    let (fitted, q) = fit(&samples, kind).map_err(fail("fit"))?;
    let (gw, gh) = grid_dims(raster, cfg.long_side);
    let field = render(&samples, fitted.model, gw, gh).map_err(fail("render-gp"))?;
    let params = cfg.repr_params();
    if let Some(dir) = render_dir {
        write_field_png(&field, &dir.join(format!("{map}_gridmap.png")))
            .map_err(|e| fail("render-png")(e.into()))?;
    }
    let mut reports = Vec::with_capacity(ReprKind::ALL.len());
    for kind in ReprKind::ALL {
        let repr = build_timed(kind, &field, &params).map_err(fail("build"))?;
        reports.push(evaluate(&repr, &field).map_err(|e| fail("eval")(e.into()))?);
        if let Some(dir) = render_dir {
            let stored = DiscreteRepresentation::deserialize(&repr.serialize())
                .and_then(|r| r.render_to(gw, gh))
                .map_err(|e| fail("render-png")(e.into()))?;
            write_field_png(&stored, &dir.join(format!("{map}_{}.png", kind.name())))
                .map_err(|e| fail("render-png")(e.into()))?;
        }
    }
    Ok(TrialOutput {
        fit: fitted,
        q,
        reports,
        dense_bytes: gw * gh * 8,
    })
}

fn write_csv<I, R>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator,
    R::Item: AsRef<[u8]>,
{
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_features_csv(path: &Path, rows: &[(String, FieldFeatures)]) -> Result<()> {
    write_csv(path, &FieldFeatures::csv_header(), rows.iter().map(|(m, f)| f.csv_record(m)))
}

pub fn write_errors_csv(path: &Path, rows: &[ErrorRow]) -> Result<()> {
    write_csv(
        path,
        &ERRORS_HEADER,
        rows.iter().map(|e| {
            [
                e.map.clone(),
                e.trial.map(|t| t.to_string()).unwrap_or_default(),
                e.stage.to_string(),
                e.message.clone(),
            ]
        }),
    )
}

/// Writes `correlations.csv` and `correlations.md`. With fewer than two
/// usable fields the CSV carries the feature rows with every value empty.
pub fn write_correlations(
    dir: &Path,
    features: &[(String, FieldFeatures)],
    metrics: &[(String, MetricReport)],
) -> Result<std::result::Result<CorrelationTable, String>> {
    let result = correlate(features, metrics).map_err(|e| e.to_string());
    let (csv, md) = match &result {
        Ok(t) => (t.to_csv(), t.extremes_markdown()),
        Err(msg) => {
            let cols = krigrid_core::correlation::MetricKey::all();
            let mut csv = String::from("feature");
            for k in &cols {
                csv.push_str(&format!(",{k}"));
            }
            csv.push('\n');
            for name in FieldFeatures::NAMES {
                csv.push_str(name);
                csv.push_str(&",".repeat(cols.len()));
                csv.push('\n');
            }
            (csv, format!("Correlation not computed: {msg}\n"))
        }
    };
    fs::write(dir.join("correlations.csv"), csv)?;
    fs::write(dir.join("correlations.md"), md)?;
    Ok(result)
}

fn manifest(cfg: &BenchConfig, maps: &[String]) -> String {
    let seeds: Vec<String> = (0..cfg.trials).map(|t| cfg.base_seed.wrapping_add(t as u64).to_string()).collect();
    format!(
        "# krigrid run manifest\ntool = \"krigrid {}\"\nmaps = {:?}\ntrial_seeds = [{}]\n\n[config]\n{}",
        env!("CARGO_PKG_VERSION"),
        maps,
        seeds.join(", "),
        cfg.to_toml()
    )
}

/// Runs the whole benchmark with `jobs` worker threads. Output files do
/// not depend on `jobs` apart from the measured build times.
///
/// Fails only when the configuration is invalid, an output cannot be
/// written, or every trial fails; individual failures become rows of
/// `errors.csv`.
pub fn run_benchmark(cfg: &BenchConfig, jobs: usize) -> Result<BenchOutcome> {
    cfg.validate()?;
    let out = cfg.out.clone();
    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    let render_dir = out.join("renders");
    if cfg.renders {
        fs::create_dir_all(&render_dir)?;
    }
    let maps = cfg.map_names();
    let colour = cfg.weed_colour()?;
    let feature_cfg = cfg.features.to_config()?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build()?;

    let (rasters, features, trials) = pool.install(|| {
        let rasters: Vec<std::result::Result<SemanticRaster, String>> = cfg
            .fields
            .par_iter()
            .map(|p| load_orthomosaic_file(p, colour).map_err(|e| e.to_string()))
            .collect();
        let features: Vec<Option<std::result::Result<FieldFeatures, String>>> = rasters
            .par_iter()
            .map(|r| r.as_ref().ok().map(|r| compute_features(r, &feature_cfg).map_err(|e| e.to_string())))
            .collect();
        let tasks: Vec<(usize, u32)> = rasters
            .iter()
            .enumerate()
            .filter(|(_, r)| r.is_ok())
            .flat_map(|(i, _)| (0..cfg.trials).map(move |t| (i, t)))
            .collect();
        let trials: Vec<(usize, u32, std::result::Result<TrialOutput, ErrorRow>)> = tasks
            .par_iter()
            .map(|&(i, t)| {
                let raster = rasters[i].as_ref().expect("filtered");
                let dir = (cfg.renders && t == 0).then_some(render_dir.as_path());
                (i, t, run_trial(cfg, &maps[i], raster, t, dir))
            })
            .collect();
        (rasters, features, trials)
    });

    let mut errors = Vec::new();
    for (i, r) in rasters.iter().enumerate() {
        if let Err(msg) = r {
            errors.push(ErrorRow {
                map: maps[i].clone(),
                trial: None,
                stage: "load",
                message: msg.clone(),
            });
        }
    }
    let mut feature_rows = Vec::new();
    for (i, f) in features.into_iter().enumerate() {
        match f {
            Some(Ok(f)) => feature_rows.push((maps[i].clone(), f)),
            Some(Err(message)) => errors.push(ErrorRow {
                map: maps[i].clone(),
                trial: None,
                stage: "features",
                message,
            }),
            None => {}
        }
    }

    let mut metric_records = Vec::new();
    let mut variogram_records = Vec::new();
    let mut dense = Vec::new();
    let (mut ok, mut failed) = (0, 0);
    for (i, t, res) in trials {
        match res {
            Ok(o) => {
                ok += 1;
                dense.push(o.dense_bytes as f64);
                let m = o.fit.model;
                let q = |f: fn(&QStats) -> f64| o.q.as_ref().map(|q| f(q).to_string()).unwrap_or_default();
                variogram_records.push(vec![
                    maps[i].clone(),
                    t.to_string(),
                    m.kind.to_string(),
                    m.sill.to_string(),
                    m.range.to_string(),
                    m.nugget.to_string(),
                    m.exponent.to_string(),
                    m.slope.to_string(),
                    o.fit.weighted_sse.to_string(),
                    o.fit.converged.to_string(),
                    q(|q| q.q1),
                    q(|q| q.q2),
                    q(|q| q.cr),
                ]);
                for r in &o.reports {
                    metric_records.push(r.csv_record(&maps[i], t));
                }
            }
            Err(e) => {
                failed += 1;
                errors.push(e);
            }
        }
    }

    write_csv(&out.join("metrics.csv"), &MetricReport::CSV_HEADER, &metric_records)?;
    write_csv(&out.join("variograms.csv"), &VARIOGRAM_HEADER, &variogram_records)?;
    write_features_csv(&out.join("features.csv"), &feature_rows)?;

    // Correlate exactly what metrics.csv stores, so the `correlate` stage
    // run on the written files reproduces it.
    let parsed: Vec<(String, u32, MetricReport)> = metric_records
        .iter()
        .map(|r| parse_metric_record(&csv::StringRecord::from(r.clone())))
        .collect::<Result<_>>()?;
    let pairs: Vec<(String, MetricReport)> = parsed.iter().map(|(m, _, r)| (m.clone(), r.clone())).collect();
    if let Err(message) = write_correlations(&out, &feature_rows, &pairs)? {
        errors.push(ErrorRow {
            map: String::new(),
            trial: None,
            stage: "correlate",
            message,
        });
    }
    write_errors_csv(&out.join("errors.csv"), &errors)?;

    fs::write(out.join("similarity_by_map.md"), report::similarity_by_map(&parsed, &maps))?;
    fs::write(out.join("similarity_overall.md"), report::similarity_overall(&parsed))?;
    fs::write(out.join("time_space.md"), report::time_space(&parsed, &dense))?;
    fs::write(out.join("run_manifest.toml"), manifest(cfg, &maps))?;

    if ok == 0 {
        bail!("all {failed} trials failed; see {}", out.join("errors.csv").display());
    }
    Ok(BenchOutcome {
        out,
        trials_ok: ok,
        trials_failed: failed,
        errors,
    })
}
