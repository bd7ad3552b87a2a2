//! Rank correlation between field features and representation metrics.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::features::FieldFeatures;
use crate::metrics::MetricReport;
use crate::representations::ReprKind;

/// Mean ranks (1-based) with ties sharing the average of their positions.
pub fn mean_ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman's rho: Pearson correlation of mean ranks.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::invalid(format!(
            "spearman needs two equal-length lists of at least 2 values, got {} and {}",
            xs.len(),
            ys.len()
        )));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(Error::invalid("spearman values must be finite"));
    }
    let (rx, ry) = (mean_ranks(xs), mean_ranks(ys));
    let m = (xs.len() + 1) as f64 / 2.0;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - m) * (b - m);
        sxx += (a - m) * (a - m);
        syy += (b - m) * (b - m);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::ZeroVariance("ranks are all tied".into()));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Metric {
    OneMinusSsim,
    Hamming,
    Mse,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::OneMinusSsim, Metric::Hamming, Metric::Mse];

    pub fn label(self) -> &'static str {
        match self {
            Metric::OneMinusSsim => "1-SS",
            Metric::Hamming => "HD",
            Metric::Mse => "MSE",
        }
    }

    pub fn of(self, r: &MetricReport) -> f64 {
        match self {
            Metric::OneMinusSsim => r.one_minus_ssim,
            Metric::Hamming => r.hamming as f64,
            Metric::Mse => r.mse,
        }
    }
}

/// A representation/metric column such as `Hex_MSE`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MetricKey {
    pub repr: ReprKind,
    pub metric: Metric,
}

impl std::fmt::Display for MetricKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}_{}", self.repr.label(), self.metric.label())
    }
}

impl MetricKey {
    pub fn all() -> Vec<MetricKey> {
        ReprKind::ALL
            .iter()
            .flat_map(|&repr| Metric::ALL.map(|metric| MetricKey { repr, metric }))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub feature: &'static str,
    pub key: MetricKey,
    /// `None` when fewer than two fields pair up or either side is constant.
    pub rho: Option<f64>,
    /// Fields used for this pair.
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Extremes {
    pub feature: &'static str,
    pub max: Option<(MetricKey, f64)>,
    pub min: Option<(MetricKey, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationTable {
    /// Row-major over features, then representations, then metrics.
    pub entries: Vec<Entry>,
    pub extremes: Vec<Extremes>,
    /// Fields with both features and metrics.
    pub n_fields: usize,
    /// Set when `n_fields` is below [`LOW_POWER_FIELDS`].
    pub low_power: bool,
}

pub const LOW_POWER_FIELDS: usize = 10;

/// Per-field mean of every metric over its trials. Values are summed in
/// sorted order so the means do not depend on row order.
pub fn field_means(metrics: &[(String, MetricReport)]) -> BTreeMap<String, BTreeMap<MetricKey, f64>> {
    let mut acc: BTreeMap<String, BTreeMap<MetricKey, Vec<f64>>> = BTreeMap::new();
    for (map, r) in metrics {
        for metric in Metric::ALL {
            let key = MetricKey { repr: r.repr, metric };
            acc.entry(map.clone()).or_default().entry(key).or_default().push(metric.of(r));
        }
    }
    acc.into_iter()
        .map(|(map, cols)| {
            let means = cols
                .into_iter()
                .map(|(k, mut v)| {
                    v.sort_by(f64::total_cmp);
                    (k, v.iter().sum::<f64>() / v.len() as f64)
                })
                .collect();
            (map, means)
        })
        .collect()
}

/// Spearman correlation of every feature against every per-field mean
/// metric. A field missing a feature or metric is dropped from that pair.
pub fn correlate(features: &[(String, FieldFeatures)], metrics: &[(String, MetricReport)]) -> Result<CorrelationTable> {
    let means = field_means(metrics);
    let mut fields: Vec<(&String, [Option<f64>; 10])> = features
        .iter()
        .filter(|(m, _)| means.contains_key(m))
        .map(|(m, f)| (m, f.values()))
        .collect();
    fields.sort_by(|a, b| a.0.cmp(b.0));
    if fields.windows(2).any(|w| w[0].0 == w[1].0) {
        return Err(Error::invalid("duplicate map name in features"));
    }
    if fields.len() < 2 {
        return Err(Error::invalid(format!(
            "correlation needs at least 2 fields with features and metrics, got {}",
            fields.len()
        )));
    }
    let mut entries = Vec::new();
    let mut extremes = Vec::new();
    for (fi, &feature) in FieldFeatures::NAMES.iter().enumerate() {
        let mut ext = Extremes { feature, max: None, min: None };
        for key in MetricKey::all() {
            let (xs, ys): (Vec<f64>, Vec<f64>) = fields
                .iter()
                .filter_map(|(m, v)| Some((v[fi]?, *means[*m].get(&key)?)))
                .unzip();
            let rho = if xs.len() >= 2 { spearman(&xs, &ys).ok() } else { None };
            if let Some(r) = rho {
                if ext.max.is_none_or(|(_, m)| r > m) {
                    ext.max = Some((key, r));
                }
                if ext.min.is_none_or(|(_, m)| r < m) {
                    ext.min = Some((key, r));
                }
            }
            entries.push(Entry { feature, key, rho, n: xs.len() });
        }
        extremes.push(ext);
    }
    Ok(CorrelationTable {
        entries,
        extremes,
        n_fields: fields.len(),
        low_power: fields.len() < LOW_POWER_FIELDS,
    })
}

impl CorrelationTable {
    pub fn get(&self, feature: &str, key: MetricKey) -> Option<&Entry> {
        self.entries.iter().find(|e| e.feature == feature && e.key == key)
    }

    /// Feature rows by metric columns; undefined values are empty.
    pub fn to_csv(&self) -> String {
        let keys = MetricKey::all();
        let mut out = String::from("feature");
        for k in &keys {
            write!(out, ",{k}").unwrap();
        }
        out.push('\n');
        for row in self.entries.chunks(keys.len()) {
            out.push_str(row[0].feature);
            for e in row {
                out.push(',');
                if let Some(r) = e.rho {
                    write!(out, "{r}").unwrap();
                }
            }
            out.push('\n');
        }
        out
    }

    /// Per-feature strongest positive and negative association.
    pub fn extremes_markdown(&self) -> String {
        let mut out = String::from("| Feature | Metric | Max Value | Metric | Min Value |\n|---|---|---|---|---|\n");
        let cell = |e: Option<(MetricKey, f64)>| match e {
            Some((k, v)) => format!("{k} | {v:.2}"),
            None => "n/a | n/a".to_string(),
        };
        for e in &self.extremes {
            writeln!(out, "| {} | {} | {} |", e.feature, cell(e.max), cell(e.min)).unwrap();
        }
        write!(out, "\nn = {} fields", self.n_fields).unwrap();
        if self.low_power {
            out.push_str(" (low power: fewer than 10 fields)");
        }
        out.push('\n');
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeededRng;

    #[test]
    fn identical_and_reversed() {
        let xs = [0.3, 1.0, -2.0, 7.0];
        assert_eq!(spearman(&xs, &xs).unwrap(), 1.0);
        let ys: Vec<f64> = xs.iter().map(|x| -x).collect();
        assert_eq!(spearman(&xs, &ys).unwrap(), -1.0);
    }

    #[test]
    fn hand_ranked_ties() {
        // Ranks [1, 2.5, 2.5, 4] and [4, 1.5, 1.5, 3].
        assert_eq!(mean_ranks(&[1.0, 2.0, 2.0, 4.0]), vec![1.0, 2.5, 2.5, 4.0]);
        assert_eq!(mean_ranks(&[3.0, 1.0, 1.0, 2.0]), vec![4.0, 1.5, 1.5, 3.0]);
        // Deviations from 2.5: [-1.5, 0, 0, 1.5] and [1.5, -1, -1, 0.5], so
        // rho = -1.5 / 4.5.
        let want = -1.0 / 3.0;
        let got = spearman(&[1.0, 2.0, 2.0, 4.0], &[3.0, 1.0, 1.0, 2.0]).unwrap();
        assert!((got - want).abs() < 1e-15);
    }

    #[test]
    fn constant_input_is_an_error() {
        assert!(matches!(spearman(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]), Err(Error::ZeroVariance(_))));
        assert!(spearman(&[1.0], &[1.0]).is_err());
        assert!(spearman(&[1.0, 2.0], &[1.0]).is_err());
    }

    #[test]
    fn five_distinct_values_hit_the_finite_set() {
        let mut rng = SeededRng::new(5);
        for _ in 0..200 {
            let xs: Vec<f64> = (0..5).map(|_| rng.uniform()).collect();
            let ys: Vec<f64> = (0..5).map(|_| rng.uniform()).collect();
            let rho = spearman(&xs, &ys).unwrap();
            // 1 - 6·Σd²/120 with Σd² even in [0, 40].
            assert!((0..=20).any(|k| (rho - (1.0 - 6.0 * (2 * k) as f64 / 120.0)).abs() < 1e-12), "{rho}");
        }
    }

    fn report(repr: ReprKind, mse: f64, hamming: usize, ss: f64) -> MetricReport {
        MetricReport {
            repr,
            one_minus_ssim: ss,
            hamming,
            mse,
            build_time: 0.1,
            size_bytes: 10,
            leaf_count: 1,
        }
    }

    fn features(std: f64, moran: Option<f64>) -> FieldFeatures {
        FieldFeatures {
            weed_coverage_ratio: 0.1,
            weed_patches: 3,
            largest_patch_size: 10,
            avg_patch_size: 5.0,
            patch_size_std: std,
            dbscan_num_clusters: 1,
            dbscan_avg_cluster_size: 4.0,
            global_autocorrelation: moran,
            hotspot_to_coldspot_ratio: None,
            hot_to_cold_outlier_ratio: Some(1.0),
        }
    }

    fn fixture() -> (Vec<(String, FieldFeatures)>, Vec<(String, MetricReport)>) {
        let stds = [3.0, 40.0, 12.5, 7.0, 90.0];
        let feats = stds
            .iter()
            .enumerate()
            .map(|(i, &s)| (format!("f{i}"), features(s, (i != 2).then_some(i as f64 * 0.1))))
            .collect();
        let mut rows = Vec::new();
        for (i, &s) in stds.iter().enumerate() {
            for trial in 0..3 {
                for repr in ReprKind::ALL {
                    // Hex MSE is a monotone function of patch_size_std.
                    let mse = if repr == ReprKind::Hexmap { s.ln() * 10.0 + trial as f64 } else { 50.0 };
                    rows.push((format!("f{i}"), report(repr, mse, (5 * i + trial) % 7, 1e-4 * (i as f64 - 2.0).powi(2))));
                }
            }
        }
        (feats, rows)
    }

    #[test]
    fn constructed_hex_mse_correlation() {
        let (feats, rows) = fixture();
        let t = correlate(&feats, &rows).unwrap();
        let key = MetricKey { repr: ReprKind::Hexmap, metric: Metric::Mse };
        assert_eq!(key.to_string(), "Hex_MSE");
        assert_eq!(t.get("patch_size_std", key).unwrap().rho, Some(1.0));
        let ext = &t.extremes[4];
        assert_eq!(ext.feature, "patch_size_std");
        assert_eq!(ext.max.unwrap().1, 1.0);
        assert_eq!((t.n_fields, t.low_power), (5, true));
        // Constant metrics and constant features are undefined.
        let quad = MetricKey { repr: ReprKind::Quadtree, metric: Metric::Mse };
        assert_eq!(t.get("patch_size_std", quad).unwrap().rho, None);
        assert_eq!(t.get("weed_patches", key).unwrap().rho, None);
        assert!(t.extremes[0].max.is_none());
        // Missing feature values drop that field only.
        let e = t.get("global_autocorrelation", key).unwrap();
        assert_eq!(e.n, 4);
        assert!(e.rho.is_some());
        assert_eq!(t.get("hotspot_to_coldspot_ratio", key).unwrap().n, 0);
        assert!(t.to_csv().lines().nth(5).unwrap().starts_with("patch_size_std,"));
        assert!(t.extremes_markdown().contains("| patch_size_std | Hex_MSE | 1.00 |"));
    }

    #[test]
    fn row_order_does_not_matter() {
        let (mut feats, mut rows) = fixture();
        let a = correlate(&feats, &rows).unwrap();
        feats.reverse();
        rows.reverse();
        rows.rotate_left(7);
        assert_eq!(correlate(&feats, &rows).unwrap(), a);
    }

    #[test]
    fn too_few_fields() {
        let (feats, rows) = fixture();
        assert!(correlate(&feats[..1], &rows).is_err());
        assert!(correlate(&feats, &rows[..5]).is_err());
    }

    #[test]
    fn monotone_transform_invariance() {
        let mut rng = SeededRng::new(9);
        for _ in 0..50 {
            let xs: Vec<f64> = (0..12).map(|_| rng.uniform()).collect();
            let ys: Vec<f64> = (0..12).map(|_| (rng.uniform() * 4.0).floor()).collect();
            let tx: Vec<f64> = xs.iter().map(|x| (3.0 * x).exp()).collect();
            let ty: Vec<f64> = ys.iter().map(|y| y.powi(3) - 2.0).collect();
            let (a, b) = (spearman(&xs, &ys), spearman(&tx, &ty));
            match (a, b) {
                (Ok(a), Ok(b)) => assert!((a - b).abs() < 1e-12),
                (a, b) => assert_eq!(a.is_err(), b.is_err()),
            }
        }
    }
}
