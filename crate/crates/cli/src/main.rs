use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use krigrid_cli::config::BenchConfig;
use krigrid_cli::stages::{self, GridSize, SampleArgs};
use krigrid_cli::synthetic::{patchy_raster, write_label_png, PatchySpec};
use krigrid_core::kriging::VariogramKind;
use krigrid_core::raster_io::Rgb;
use krigrid_core::representations::ReprKind;

#[derive(Parser)]
#[command(name = "krigrid", version, about = "Kriging weed maps and their discrete representations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct SamplingFlags {
    /// Weed label colour as R,G,B.
    #[arg(long, default_value = "255,0,0")]
    weed_colour: Rgb,
    #[arg(long, default_value_t = 500)]
    samples: usize,
    /// Pooling window side in pixels.
    #[arg(long, default_value_t = 150)]
    window: usize,
    #[arg(long, default_value_t = 1024)]
    long_side: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Run every field, trial and representation and write all reports.
    Bench {
        #[arg(long)]
        config: PathBuf,
        /// Worker threads; outputs are identical for any value.
        #[arg(long)]
        jobs: Option<usize>,
        /// Overrides `base_seed`.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        trials: Option<u32>,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        window: Option<usize>,
        #[arg(long)]
        weed_colour: Option<Rgb>,
        #[arg(long)]
        long_side: Option<usize>,
        #[arg(long)]
        variogram: Option<VariogramKind>,
        /// Skip the PNG renders.
        #[arg(long)]
        no_renders: bool,
    },
    /// Draw pooled samples from a label PNG, in gridmap coordinates.
    Sample {
        #[arg(long)]
        raster: PathBuf,
        #[command(flatten)]
        sampling: SamplingFlags,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit a variogram and print its parameter block.
    Fit {
        #[arg(long)]
        samples: PathBuf,
        #[arg(long, default_value = "exponential")]
        variogram: VariogramKind,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render the kriging mean to a GPFD field file.
    RenderGp {
        #[arg(long)]
        samples: PathBuf,
        #[arg(long)]
        variogram: PathBuf,
        /// Label PNG whose aspect ratio sets the grid.
        #[arg(long, required_unless_present_all = ["width", "height"])]
        raster: Option<PathBuf>,
        #[arg(long, default_value = "255,0,0")]
        weed_colour: Rgb,
        #[arg(long, default_value_t = 1024)]
        long_side: usize,
        #[arg(long, requires = "height")]
        width: Option<usize>,
        #[arg(long, requires = "width")]
        height: Option<usize>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        png: Option<PathBuf>,
    },
    /// Build one representation from a field file (GPFD or PNG).
    Build {
        #[arg(long)]
        field: PathBuf,
        #[arg(long)]
        repr: ReprKind,
        /// Bench config supplying the representation parameters.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a stored representation against a reference field.
    Eval {
        #[arg(long)]
        repr: PathBuf,
        #[arg(long)]
        reference: PathBuf,
        #[arg(long, default_value = "map")]
        map: String,
        #[arg(long, default_value_t = 0)]
        trial: u32,
        /// Build time in seconds; read from the `.meta` sidecar otherwise.
        #[arg(long)]
        build_time: Option<f64>,
        /// Metrics CSV to write; printed to stdout otherwise.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Append to an existing metrics CSV instead of replacing it.
        #[arg(long)]
        append: bool,
    },
    /// Compute field-distribution features of label PNGs.
    Features {
        #[arg(long, required = true, num_args = 1..)]
        raster: Vec<PathBuf>,
        #[arg(long, default_value = "255,0,0")]
        weed_colour: Rgb,
        /// Bench config supplying the feature parameters.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Correlate features with per-field mean metrics.
    Correlate {
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        metrics: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a synthetic patchy label PNG.
    Synth {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 2048)]
        width: usize,
        #[arg(long, default_value_t = 1536)]
        height: usize,
        #[arg(long, default_value = "255,0,0")]
        weed_colour: Rgb,
        #[arg(long)]
        out: PathBuf,
    },
}

fn load_config(path: Option<&PathBuf>) -> Result<BenchConfig> {
    path.map(|p| BenchConfig::load(p)).transpose().map(Option::unwrap_or_default)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Bench {
            config,
            jobs,
            seed,
            out,
            trials,
            samples,
            window,
            weed_colour,
            long_side,
            variogram,
            no_renders,
        } => {
            let mut cfg = BenchConfig::load(&config)?;
            if let Some(s) = seed {
                cfg.base_seed = s;
            }
            if let Some(o) = out {
                cfg.out = o;
            }
            if let Some(t) = trials {
                cfg.trials = t;
            }
            if let Some(n) = samples {
                cfg.samples = n;
            }
            if let Some(w) = window {
                cfg.window = w;
            }
            if let Some(c) = weed_colour {
                cfg.weed_colour = c.to_string();
            }
            if let Some(l) = long_side {
                cfg.long_side = l;
            }
            if let Some(v) = variogram {
                cfg.variogram = v.name().to_string();
            }
            if no_renders {
                cfg.renders = false;
            }
            let jobs = jobs.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
            let outcome = krigrid_cli::run_benchmark(&cfg, jobs)?;
            println!(
                "{} trials ok, {} failed; outputs in {}",
                outcome.trials_ok,
                outcome.trials_failed,
                outcome.out.display()
            );
            for e in &outcome.errors {
                eprintln!("error: {} trial {:?} [{}]: {}", e.map, e.trial, e.stage, e.message);
            }
        }
        Command::Sample { raster, sampling, seed, out } => {
            let n = stages::sample(&SampleArgs {
                raster: &raster,
                weed_colour: sampling.weed_colour,
                samples: sampling.samples,
                window: sampling.window,
                seed,
                long_side: sampling.long_side,
                out: &out,
            })?;
            println!("wrote {n} samples to {}", out.display());
        }
        Command::Fit { samples, variogram, out } => {
            print!("{}", stages::fit_stage(&samples, variogram, out.as_deref())?);
        }
        Command::RenderGp {
            samples,
            variogram,
            raster,
            weed_colour,
            long_side,
            width,
            height,
            out,
            png,
        } => {
            let size = match (width, height, raster.as_deref()) {
                (Some(w), Some(h), _) => GridSize::Explicit(w, h),
                (_, _, Some(raster)) => GridSize::FromRaster {
                    raster,
                    weed_colour,
                    long_side,
                },
                _ => anyhow::bail!("render-gp needs --raster or both --width and --height"),
            };
            let (w, h) = stages::render_gp(&samples, &variogram, size, &out, png.as_deref())?;
            println!("wrote {w}x{h} field to {}", out.display());
        }
        Command::Build { field, repr, config, out } => {
            let cfg = load_config(config.as_ref())?;
            let r = stages::build(&field, repr, &cfg.repr_params(), &out)?;
            println!("{} leaves, {} bytes, {} s", r.leaf_count(), r.serialize().len(), r.build_time);
        }
        Command::Eval {
            repr,
            reference,
            map,
            trial,
            build_time,
            out,
            append,
        } => {
            let report = stages::eval(&repr, &reference, build_time)?;
            let rows = [(map, trial, report)];
            match out {
                Some(p) => stages::write_metric_rows(&p, &rows, append)?,
                None => {
                    let mut w = csv::Writer::from_writer(std::io::stdout());
                    w.write_record(krigrid_core::metrics::MetricReport::CSV_HEADER)?;
                    w.write_record(rows[0].2.csv_record(&rows[0].0, rows[0].1))?;
                    w.flush()?;
                }
            }
        }
        Command::Features {
            raster,
            weed_colour,
            config,
            out,
        } => {
            let cfg = load_config(config.as_ref())?;
            let rows = stages::features(&raster, weed_colour, &cfg.features.to_config()?, &out)?;
            println!("wrote features for {} fields to {}", rows.len(), out.display());
        }
        Command::Correlate { features, metrics, out } => {
            print!("{}", stages::correlate_stage(&features, &metrics, &out)?);
        }
        Command::Synth {
            seed,
            width,
            height,
            weed_colour,
            out,
        } => {
            let spec = PatchySpec {
                width,
                height,
                ..PatchySpec::default()
            };
            let r = patchy_raster(&spec, seed)?;
            write_label_png(&r, weed_colour, &out).with_context(|| format!("writing {}", out.display()))?;
            println!("wrote {width}x{height} raster with {} weed pixels to {}", r.weed_count(), out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
