//! Markdown summary tables.

use std::fmt::Write as _;

use krigrid_core::metrics::MetricReport;
use krigrid_core::representations::ReprKind;

/// Mean and sample standard deviation; the deviation is 0 for one value.
pub fn mean_std(xs: &[f64]) -> Option<(f64, f64)> {
    if xs.is_empty() {
        return None;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let std = if xs.len() > 1 {
        (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    Some((mean, std))
}

fn cell(xs: &[f64]) -> String {
    cell_prec(xs, 2)
}

fn cell_prec(xs: &[f64], p: usize) -> String {
    match mean_std(xs) {
        Some((m, s)) => format!("{m:.p$}({s:.p$})"),
        None => "n/a".into(),
    }
}

fn header(first: &[&str], extra: &[&str]) -> String {
    let cols: Vec<&str> = first
        .iter()
        .copied()
        .chain(ReprKind::ALL.iter().map(|k| k.label()))
        .chain(extra.iter().copied())
        .collect();
    format!("| {} |\n|{}\n", cols.join(" | "), "---|".repeat(cols.len()))
}

type Metric = (&'static str, fn(&MetricReport) -> f64);

const SIMILARITY: [Metric; 3] = [
    ("1-SS (e-04)", |r| r.one_minus_ssim * 1e4),
    ("HD", |r| r.hamming as f64),
    ("MSE", |r| r.mse),
];

fn values<'a>(rows: &'a [(String, u32, MetricReport)], map: Option<&'a str>, kind: ReprKind, f: fn(&MetricReport) -> f64) -> Vec<f64> {
    rows.iter()
        .filter(|(m, _, r)| r.repr == kind && map.is_none_or(|x| x == m))
        .map(|(_, _, r)| f(r))
        .collect()
}

/// Per-map mean(std) over trials of each similarity metric.
pub fn similarity_by_map(rows: &[(String, u32, MetricReport)], maps: &[String]) -> String {
    let mut out = header(&["Metric", "Map"], &[]);
    for (name, f) in SIMILARITY {
        for map in maps {
            let cells: Vec<String> = ReprKind::ALL.iter().map(|&k| cell(&values(rows, Some(map), k, f))).collect();
            writeln!(out, "| {name} | {map} | {} |", cells.join(" | ")).unwrap();
        }
    }
    out
}

/// Mean(std) of each similarity metric pooled over every map and trial.
pub fn similarity_overall(rows: &[(String, u32, MetricReport)]) -> String {
    let mut out = header(&["Metric"], &[]);
    for (name, f) in SIMILARITY {
        let cells: Vec<String> = ReprKind::ALL.iter().map(|&k| cell(&values(rows, None, k, f))).collect();
        writeln!(out, "| {name} | {} |", cells.join(" | ")).unwrap();
    }
    out
}

/// Build time and stored size, with the dense gridmap for comparison.
/// `dense_bytes` holds one entry per gridmap rendered.
pub fn time_space(rows: &[(String, u32, MetricReport)], dense_bytes: &[f64]) -> String {
    let mut out = header(&["Metric"], &["Grid map"]);
    let time: Vec<String> = ReprKind::ALL.iter().map(|&k| cell_prec(&values(rows, None, k, |r| r.build_time), 4)).collect();
    writeln!(out, "| Time (s) | {} | N/A |", time.join(" | ")).unwrap();
    let space: Vec<String> = ReprKind::ALL
        .iter()
        .map(|&k| cell_prec(&values(rows, None, k, |r| r.size_bytes as f64 / 1e6), 4))
        .collect();
    let dense: Vec<f64> = dense_bytes.iter().map(|b| b / 1e6).collect();
    writeln!(out, "| Space (MB) | {} | {} |", space.join(" | "), cell_prec(&dense, 4)).unwrap();
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(map: &str, trial: u32, repr: ReprKind, mse: f64) -> (String, u32, MetricReport) {
        (
            map.into(),
            trial,
            MetricReport {
                repr,
                one_minus_ssim: 1e-4,
                hamming: 10,
                mse,
                build_time: 0.5,
                size_bytes: 2_000_000,
                leaf_count: 3,
            },
        )
    }

    #[test]
    fn mean_and_sample_std() {
        assert_eq!(mean_std(&[]), None);
        assert_eq!(mean_std(&[2.0]), Some((2.0, 0.0)));
        let (m, s) = mean_std(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(m, 2.5);
        assert!((s - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn tables_have_expected_cells() {
        let rows = vec![row("a", 0, ReprKind::Hexmap, 100.0), row("a", 1, ReprKind::Hexmap, 120.0)];
        let t = similarity_by_map(&rows, &["a".into()]);
        assert!(t.contains("| MSE | a | n/a | n/a | n/a | n/a | 110.00(14.14) |"), "{t}");
        assert!(similarity_overall(&rows).contains("| 1-SS (e-04) | n/a | n/a | n/a | n/a | 1.00(0.00) |"));
        let ts = time_space(&rows, &[6_291_456.0]);
        assert!(ts.contains("| Space (MB) | n/a | n/a | n/a | n/a | 2.0000(0.0000) | 6.2915(0.0000) |"), "{ts}");
    }
}
