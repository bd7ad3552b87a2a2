//! Similarity, error, time and size measures for rendered representations.

mod phash;
mod ssim;

pub use phash::{hamming, phash, BitVector, BLOCK, HASH_BITS, RESIZE};
pub use ssim::{ssim, DYNAMIC_RANGE, K1, K2, SIGMA, WINDOW};

use crate::error::Result;
use crate::field::ScalarField;
use crate::representations::{DiscreteRepresentation, ReprKind};

/// Mean squared difference of the 8-bit quantisations.
pub fn mse(a: &ScalarField, b: &ScalarField) -> Result<f64> {
    a.same_shape(b)?;
    let (qa, qb) = (a.quantize(), b.quantize());
    let sum: u64 = qa
        .iter()
        .zip(&qb)
        .map(|(&x, &y)| {
            let d = x.abs_diff(y) as u64;
            d * d
        })
        .sum();
    Ok(sum as f64 / qa.len() as f64)
}

/// One representation scored against its reference field.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub repr: ReprKind,
    pub one_minus_ssim: f64,
    pub hamming: usize,
    pub mse: f64,
    /// Builder wall-clock seconds.
    pub build_time: f64,
    pub size_bytes: usize,
    pub leaf_count: usize,
}

impl MetricReport {
    pub const CSV_HEADER: [&'static str; 9] = [
        "map",
        "repr",
        "trial",
        "one_minus_ssim_e4",
        "hamming",
        "mse",
        "time_s",
        "size_bytes",
        "leaf_count",
    ];

    /// CSV record matching [`CSV_HEADER`](Self::CSV_HEADER); 1 − SSIM is
    /// written in units of 1e−4.
    pub fn csv_record(&self, map: &str, trial: u32) -> Vec<String> {
        vec![
            map.to_string(),
            self.repr.label().to_string(),
            trial.to_string(),
            format!("{}", self.one_minus_ssim * 1e4),
            self.hamming.to_string(),
            format!("{}", self.mse),
            format!("{}", self.build_time),
            self.size_bytes.to_string(),
            self.leaf_count.to_string(),
        ]
    }
}

/// Score `repr` against `reference`. The representation is serialised and
/// decoded before rendering, so the metrics describe exactly what the
/// reported size stores.
pub fn evaluate(repr: &DiscreteRepresentation, reference: &ScalarField) -> Result<MetricReport> {
    let bytes = repr.serialize();
    let stored = DiscreteRepresentation::deserialize(&bytes)?;
    let rendered = stored.render_to(reference.width(), reference.height())?;
    Ok(MetricReport {
        repr: repr.kind(),
        one_minus_ssim: 1.0 - ssim(&rendered, reference)?,
        hamming: hamming(&phash(&rendered), &phash(reference))?,
        mse: mse(&rendered, reference)?,
        build_time: repr.build_time,
        size_bytes: bytes.len(),
        leaf_count: stored.leaf_count(),
    })
}
