//! Field-distribution features of a semantic weed raster.

mod autocorr;
mod dbscan;
mod patches;

pub use autocorr::{getis_ord, local_outliers, morans_i, Contiguity, HotColdSpots, LocalOutliers, PermutationTest};
pub use dbscan::{dbscan, Dbscan};
pub use patches::{patch_sizes, weed_patches_stats, Connectivity, PatchStats};

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::raster_io::SemanticRaster;

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureConfig {
    pub connectivity: Connectivity,
    /// Side of the square pixel blocks that become DBSCAN points.
    pub dbscan_block: usize,
    /// Neighbourhood radius in blocks.
    pub dbscan_eps: f64,
    pub dbscan_min_pts: usize,
    /// Side of the coarse grid used for the autocorrelation statistics.
    pub coarse_grid: usize,
    pub contiguity: Contiguity,
    pub z_thresh: f64,
    pub permutation: PermutationTest,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            connectivity: Connectivity::Eight,
            dbscan_block: 8,
            dbscan_eps: 3.0,
            dbscan_min_pts: 5,
            coarse_grid: 32,
            contiguity: Contiguity::Queen,
            z_thresh: 1.96,
            permutation: PermutationTest::default(),
        }
    }
}

/// One row of features. Statistics that are undefined for the field
/// (a constant coarse grid) are `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldFeatures {
    pub weed_coverage_ratio: f64,
    pub weed_patches: usize,
    pub largest_patch_size: usize,
    pub avg_patch_size: f64,
    pub patch_size_std: f64,
    pub dbscan_num_clusters: usize,
    pub dbscan_avg_cluster_size: f64,
    pub global_autocorrelation: Option<f64>,
    pub hotspot_to_coldspot_ratio: Option<f64>,
    pub hot_to_cold_outlier_ratio: Option<f64>,
}

impl FieldFeatures {
    pub const NAMES: [&'static str; 10] = [
        "weed_coverage_ratio",
        "weed_patches",
        "largest_patch_size",
        "avg_patch_size",
        "patch_size_std",
        "dbscan_num_clusters",
        "dbscan_avg_cluster_size",
        "global_autocorrelation",
        "hotspot_to_coldspot_ratio",
        "hot_to_cold_outlier_ratio",
    ];

    /// Feature values in [`Self::NAMES`] order.
    pub fn values(&self) -> [Option<f64>; 10] {
        [
            Some(self.weed_coverage_ratio),
            Some(self.weed_patches as f64),
            Some(self.largest_patch_size as f64),
            Some(self.avg_patch_size),
            Some(self.patch_size_std),
            Some(self.dbscan_num_clusters as f64),
            Some(self.dbscan_avg_cluster_size),
            self.global_autocorrelation,
            self.hotspot_to_coldspot_ratio,
            self.hot_to_cold_outlier_ratio,
        ]
    }

    /// Inverse of [`Self::values`]; counts must be non-negative integers.
    pub fn from_values(v: [Option<f64>; 10]) -> Result<Self> {
        let real = |i: usize| v[i].ok_or_else(|| Error::invalid(format!("{} is required", Self::NAMES[i])));
        let count = |i: usize| -> Result<usize> {
            let x = real(i)?;
            if x < 0.0 || x.fract() != 0.0 {
                return Err(Error::invalid(format!("{} must be a count, got {x}", Self::NAMES[i])));
            }
            Ok(x as usize)
        };
        Ok(Self {
            weed_coverage_ratio: real(0)?,
            weed_patches: count(1)?,
            largest_patch_size: count(2)?,
            avg_patch_size: real(3)?,
            patch_size_std: real(4)?,
            dbscan_num_clusters: count(5)?,
            dbscan_avg_cluster_size: real(6)?,
            global_autocorrelation: v[7],
            hotspot_to_coldspot_ratio: v[8],
            hot_to_cold_outlier_ratio: v[9],
        })
    }

    /// CSV header with a leading `map` column.
    pub fn csv_header() -> Vec<&'static str> {
        std::iter::once("map").chain(Self::NAMES).collect()
    }

    /// CSV record; `None` is written as an empty field.
    pub fn csv_record(&self, map: &str) -> Vec<String> {
        std::iter::once(map.to_string())
            .chain(self.values().iter().map(|v| v.map(|x| x.to_string()).unwrap_or_default()))
            .collect()
    }
}

/// Top-left coordinates of the `block`-sided squares holding any weed,
/// in row-major block order.
pub fn occupied_blocks(raster: &SemanticRaster, block: usize) -> Result<Vec<[f64; 2]>> {
    if block == 0 {
        return Err(Error::invalid("block size must be at least 1"));
    }
    let (w, h) = (raster.width(), raster.height());
    let mut out = Vec::new();
    for by in 0..h.div_ceil(block) {
        for bx in 0..w.div_ceil(block) {
            let (x0, y0) = (bx * block, by * block);
            if raster.count_rect(x0, y0, (x0 + block).min(w), (y0 + block).min(h)) > 0 {
                out.push([bx as f64, by as f64]);
            }
        }
    }
    Ok(out)
}

/// Weed fraction on a `min(side, w) × min(side, h)` grid; coarse cell `i`
/// covers pixels `[⌊i·W/g⌋, ⌊(i+1)·W/g⌋)` along each axis.
pub fn coarse_grid(raster: &SemanticRaster, side: usize) -> Result<ScalarField> {
    if side == 0 {
        return Err(Error::invalid("coarse grid side must be at least 1"));
    }
    let (w, h) = (raster.width(), raster.height());
    let (gw, gh) = (side.min(w), side.min(h));
    ScalarField::from_fn(gw, gh, |i, j| {
        let (x0, x1) = (i * w / gw, (i + 1) * w / gw);
        let (y0, y1) = (j * h / gh, (j + 1) * h / gh);
        raster.count_rect(x0, y0, x1, y1) as f64 / ((x1 - x0) * (y1 - y0)) as f64
    })
}

fn defined<T>(r: Result<T>) -> Result<Option<T>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(Error::ZeroVariance(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

pub fn compute_features(raster: &SemanticRaster, config: &FeatureConfig) -> Result<FieldFeatures> {
    let (w, h) = (raster.width(), raster.height());
    let patches = weed_patches_stats(raster.mask(), w, h, config.connectivity)?;
    let points = occupied_blocks(raster, config.dbscan_block)?;
    let clusters = dbscan(&points, config.dbscan_eps, config.dbscan_min_pts)?;
    let grid = coarse_grid(raster, config.coarse_grid)?;
    Ok(FieldFeatures {
        weed_coverage_ratio: raster.weed_count() as f64 / (w * h) as f64,
        weed_patches: patches.count,
        largest_patch_size: patches.largest,
        avg_patch_size: patches.mean,
        patch_size_std: patches.std,
        dbscan_num_clusters: clusters.num_clusters,
        dbscan_avg_cluster_size: clusters.avg_cluster_size,
        global_autocorrelation: defined(morans_i(&grid, config.contiguity))?,
        hotspot_to_coldspot_ratio: defined(getis_ord(&grid, config.z_thresh))?.map(|s| s.ratio),
        hot_to_cold_outlier_ratio: defined(local_outliers(&grid, &config.permutation))?.map(|s| s.ratio),
    })
}
