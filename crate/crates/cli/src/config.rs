//! Benchmark configuration: a TOML file of flat keys plus one table per
//! representation. Every key is optional and falls back to its default.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use krigrid_core::features::{Connectivity, Contiguity, FeatureConfig, PermutationTest};
use krigrid_core::kriging::VariogramKind;
use krigrid_core::raster_io::Rgb;
use krigrid_core::representations::{
    BspLseParams, BspRegionParams, HexmapParams, QuadtreeParams, ReprParams, WedgeletParams,
};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    /// Semantic label PNGs, relative to the config file.
    pub fields: Vec<PathBuf>,
    /// `R,G,B` of the weed label.
    pub weed_colour: String,
    pub samples: usize,
    /// Side of the pooling window in raster pixels.
    pub window: usize,
    pub variogram: String,
    /// Long side of the gridmap in cells.
    pub long_side: usize,
    pub trials: u32,
    /// Trial `t` samples with seed `base_seed + t`.
    pub base_seed: u64,
    pub out: PathBuf,
    /// Write PNG renders of the first trial.
    pub renders: bool,
    pub quadtree: QuadtreeSection,
    pub wedgelet: WedgeletSection,
    pub bsp_lse: BspLseSection,
    pub bsp_region: BspRegionSection,
    pub hexmap: HexmapSection,
    pub features: FeatureSection,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            fields: Vec::new(),
            weed_colour: Rgb::RED.to_string(),
            samples: 500,
            window: 150,
            variogram: VariogramKind::Exponential.name().to_string(),
            long_side: 1024,
            trials: 10,
            base_seed: 0,
            out: PathBuf::from("krigrid-out"),
            renders: true,
            quadtree: QuadtreeSection::default(),
            wedgelet: WedgeletSection::default(),
            bsp_lse: BspLseSection::default(),
            bsp_region: BspRegionSection::default(),
            hexmap: HexmapSection::default(),
            features: FeatureSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadtreeSection {
    pub max_depth: u32,
    pub hom_thresh: f64,
}

impl Default for QuadtreeSection {
    fn default() -> Self {
        let p = QuadtreeParams::default();
        Self {
            max_depth: p.max_depth,
            hom_thresh: p.hom_thresh,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WedgeletSection {
    pub max_depth: u32,
    pub hom_thresh: f64,
    pub line_thresh: f64,
    pub perimeter_step: u32,
    pub max_side_samples: u32,
}

impl Default for WedgeletSection {
    fn default() -> Self {
        let p = WedgeletParams::default();
        Self {
            max_depth: p.max_depth,
            hom_thresh: p.hom_thresh,
            line_thresh: p.line_thresh,
            perimeter_step: p.perimeter_step,
            max_side_samples: p.max_side_samples,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BspLseSection {
    pub max_depth: u32,
    pub hom_thresh: f64,
    pub angle_step: f64,
    pub offset_step: u32,
    pub prune_keep: usize,
}

impl Default for BspLseSection {
    fn default() -> Self {
        let p = BspLseParams::default();
        Self {
            max_depth: p.max_depth,
            hom_thresh: p.hom_thresh,
            angle_step: p.angle_step,
            offset_step: p.offset_step,
            prune_keep: p.prune_keep,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BspRegionSection {
    pub min_region_px: usize,
    pub quantisation: u32,
}

impl Default for BspRegionSection {
    fn default() -> Self {
        let p = BspRegionParams::default();
        Self {
            min_region_px: p.min_region_px,
            quantisation: p.quantisation,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HexmapSection {
    pub base_edge: f64,
    pub levels: u8,
    pub thresholds: Vec<f64>,
}

impl Default for HexmapSection {
    fn default() -> Self {
        let p = HexmapParams::default();
        Self {
            base_edge: p.base_edge,
            levels: p.levels,
            thresholds: p.thresholds,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureSection {
    /// 4 or 8.
    pub connectivity: u8,
    pub dbscan_block: usize,
    pub dbscan_eps: f64,
    pub dbscan_min_pts: usize,
    pub coarse_grid: usize,
    /// `queen` or `rook`.
    pub contiguity: String,
    pub z_thresh: f64,
    pub permutations: usize,
    pub alpha: f64,
    pub permutation_seed: u64,
}

impl Default for FeatureSection {
    fn default() -> Self {
        let c = FeatureConfig::default();
        Self {
            connectivity: 8,
            dbscan_block: c.dbscan_block,
            dbscan_eps: c.dbscan_eps,
            dbscan_min_pts: c.dbscan_min_pts,
            coarse_grid: c.coarse_grid,
            contiguity: "queen".into(),
            z_thresh: c.z_thresh,
            permutations: c.permutation.permutations,
            alpha: c.permutation.alpha,
            permutation_seed: c.permutation.seed,
        }
    }
}

impl FeatureSection {
    pub fn to_config(&self) -> Result<FeatureConfig> {
        let connectivity = match self.connectivity {
            4 => Connectivity::Four,
            8 => Connectivity::Eight,
            c => bail!("features.connectivity must be 4 or 8, got {c}"),
        };
        let contiguity = match self.contiguity.to_ascii_lowercase().as_str() {
            "queen" => Contiguity::Queen,
            "rook" => Contiguity::Rook,
            c => bail!("features.contiguity must be queen or rook, got {c:?}"),
        };
        Ok(FeatureConfig {
            connectivity,
            dbscan_block: self.dbscan_block,
            dbscan_eps: self.dbscan_eps,
            dbscan_min_pts: self.dbscan_min_pts,
            coarse_grid: self.coarse_grid,
            contiguity,
            z_thresh: self.z_thresh,
            permutation: PermutationTest {
                permutations: self.permutations,
                alpha: self.alpha,
                seed: self.permutation_seed,
            },
        })
    }
}

impl BenchConfig {
    /// Reads a config file; relative field and output paths resolve
    /// against the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg: BenchConfig = toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for f in &mut cfg.fields {
            if f.is_relative() {
                *f = base.join(&*f);
            }
        }
        if cfg.out.is_relative() {
            cfg.out = base.join(&cfg.out);
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn weed_colour(&self) -> Result<Rgb> {
        Ok(self.weed_colour.parse()?)
    }

    pub fn variogram_kind(&self) -> Result<VariogramKind> {
        Ok(self.variogram.parse()?)
    }

    pub fn repr_params(&self) -> ReprParams {
        let (q, w, b, r, h) = (&self.quadtree, &self.wedgelet, &self.bsp_lse, &self.bsp_region, &self.hexmap);
        ReprParams {
            quadtree: QuadtreeParams {
                max_depth: q.max_depth,
                hom_thresh: q.hom_thresh,
            },
            wedgelet: WedgeletParams {
                max_depth: w.max_depth,
                hom_thresh: w.hom_thresh,
                line_thresh: w.line_thresh,
                perimeter_step: w.perimeter_step,
                max_side_samples: w.max_side_samples,
            },
            bsp_lse: BspLseParams {
                max_depth: b.max_depth,
                hom_thresh: b.hom_thresh,
                angle_step: b.angle_step,
                offset_step: b.offset_step,
                prune_keep: b.prune_keep,
            },
            bsp_region: BspRegionParams {
                min_region_px: r.min_region_px,
                quantisation: r.quantisation,
            },
            hexmap: HexmapParams {
                base_edge: h.base_edge,
                levels: h.levels,
                thresholds: h.thresholds.clone(),
            },
        }
    }

    /// Map name of each field: its file stem.
    pub fn map_names(&self) -> Vec<String> {
        self.fields
            .iter()
            .map(|p| p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default())
            .collect()
    }

    /// Checks everything that can be checked before any work starts.
    pub fn validate(&self) -> Result<()> {
        if self.fields.is_empty() {
            bail!("config lists no fields");
        }
        if self.trials == 0 {
            bail!("trials must be at least 1");
        }
        if self.samples < 3 {
            bail!("samples must be at least 3");
        }
        if self.window == 0 || self.long_side == 0 {
            bail!("window and long_side must be at least 1");
        }
        for f in &self.fields {
            if !f.is_file() {
                bail!("field {} does not exist", f.display());
            }
        }
        let names = self.map_names();
        let mut seen = HashSet::new();
        for n in &names {
            if n.is_empty() || !seen.insert(n) {
                bail!("field file stems must be unique and non-empty, got {n:?} twice");
            }
        }
        self.weed_colour()?;
        self.variogram_kind()?;
        self.features.to_config()?;
        Ok(())
    }
}
