//! Density-based clustering.

use std::collections::HashMap;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Dbscan {
    /// Cluster of each point, `None` for noise.
    pub labels: Vec<Option<usize>>,
    pub core: Vec<bool>,
    pub num_clusters: usize,
    /// Mean number of points per cluster; 0 without clusters.
    pub avg_cluster_size: f64,
    pub noise: usize,
}

/// DBSCAN with Euclidean distance. A point is core when at least `min_pts`
/// points (itself included) lie within `eps`. Points are visited in the
/// given order, and a border point joins the first cluster that reaches it.
pub fn dbscan(points: &[[f64; 2]], eps: f64, min_pts: usize) -> Result<Dbscan> {
    if !(eps > 0.0 && eps.is_finite()) || min_pts == 0 {
        return Err(Error::invalid("dbscan needs eps > 0 and min_pts >= 1"));
    }
    let cell = |p: &[f64; 2]| ((p[0] / eps).floor() as i64, (p[1] / eps).floor() as i64);
    let mut grid: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    for (i, p) in points.iter().enumerate() {
        grid.entry(cell(p)).or_default().push(i);
    }
    let eps2 = eps * eps;
    let neighbours = |i: usize| -> Vec<usize> {
        let p = points[i];
        let (cx, cy) = cell(&p);
        let mut out = Vec::new();
        for gy in cy - 1..=cy + 1 {
            for gx in cx - 1..=cx + 1 {
                if let Some(list) = grid.get(&(gx, gy)) {
                    for &j in list {
                        let q = points[j];
                        if (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) <= eps2 {
                            out.push(j);
                        }
                    }
                }
            }
        }
        out.sort_unstable();
        out
    };

    let n = points.len();
    let mut labels: Vec<Option<usize>> = vec![None; n];
    let mut core = vec![false; n];
    let mut visited = vec![false; n];
    let mut clusters = 0;
    let mut queue = std::collections::VecDeque::new();
    for i in 0..n {
        if visited[i] {
            continue;
        }
        visited[i] = true;
        let nb = neighbours(i);
        if nb.len() < min_pts {
            continue;
        }
        core[i] = true;
        let c = clusters;
        clusters += 1;
        labels[i] = Some(c);
        queue.extend(nb);
        while let Some(j) = queue.pop_front() {
            if labels[j].is_none() {
                labels[j] = Some(c);
            }
            if visited[j] {
                continue;
            }
            visited[j] = true;
            let nb = neighbours(j);
            if nb.len() >= min_pts {
                core[j] = true;
                queue.extend(nb);
            }
        }
    }
    let clustered = labels.iter().filter(|l| l.is_some()).count();
    Ok(Dbscan {
        num_clusters: clusters,
        avg_cluster_size: if clusters > 0 { clustered as f64 / clusters as f64 } else { 0.0 },
        noise: n - clustered,
        labels,
        core,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeededRng;

    fn blob(cx: f64, cy: f64, n: usize, rng: &mut SeededRng) -> Vec<[f64; 2]> {
        (0..n).map(|_| [cx + rng.uniform(), cy + rng.uniform()]).collect()
    }

    #[test]
    fn two_far_blobs() {
        let mut rng = SeededRng::new(1);
        let mut pts = blob(0.0, 0.0, 8, &mut rng);
        pts.extend(blob(300.0, 0.0, 8, &mut rng));
        let r = dbscan(&pts, 3.0, 5).unwrap();
        assert_eq!(r.num_clusters, 2);
        assert_eq!(r.avg_cluster_size, 8.0);
        assert_eq!(r.noise, 0);
    }

    #[test]
    fn too_few_points() {
        let pts = [[0.0, 0.0], [0.5, 0.0], [0.0, 0.5]];
        let r = dbscan(&pts, 3.0, 5).unwrap();
        assert_eq!(r.num_clusters, 0);
        assert_eq!(r.noise, 3);
        assert!(dbscan(&pts, 0.0, 5).is_err());
    }

    /// Textbook DBSCAN with an O(n²) neighbourhood scan.
    fn reference(points: &[[f64; 2]], eps: f64, min_pts: usize) -> (Vec<bool>, Vec<Option<usize>>) {
        let n = points.len();
        let nb = |i: usize| -> Vec<usize> {
            (0..n)
                .filter(|&j| (points[i][0] - points[j][0]).powi(2) + (points[i][1] - points[j][1]).powi(2) <= eps * eps)
                .collect()
        };
        let core: Vec<bool> = (0..n).map(|i| nb(i).len() >= min_pts).collect();
        let mut labels = vec![None; n];
        let mut c = 0;
        for i in 0..n {
            if !core[i] || labels[i].is_some() {
                continue;
            }
            let mut stack = vec![i];
            labels[i] = Some(c);
            while let Some(j) = stack.pop() {
                for k in nb(j) {
                    if core[k] && labels[k].is_none() {
                        labels[k] = Some(c);
                        stack.push(k);
                    }
                }
            }
            c += 1;
        }
        (core, labels)
    }

    #[test]
    fn matches_quadratic_reference() {
        for seed in 0..20 {
            let mut rng = SeededRng::new(seed);
            let pts: Vec<[f64; 2]> = (0..50).map(|_| [rng.uniform() * 20.0, rng.uniform() * 20.0]).collect();
            let got = dbscan(&pts, 3.0, 4).unwrap();
            let (core, core_labels) = reference(&pts, 3.0, 4);
            assert_eq!(got.core, core, "seed {seed}");
            // Core points: identical clusters up to renaming, and the
            // reference numbers clusters in the same discovery order.
            for i in 0..50 {
                if core[i] {
                    assert_eq!(got.labels[i], core_labels[i], "seed {seed}");
                }
            }
            // Border points sit next to a core point of their cluster;
            // noise points next to none.
            for i in 0..50 {
                let near_core: Vec<usize> = (0..50)
                    .filter(|&j| core[j] && (pts[i][0] - pts[j][0]).powi(2) + (pts[i][1] - pts[j][1]).powi(2) <= 9.0)
                    .collect();
                match got.labels[i] {
                    None => assert!(near_core.is_empty()),
                    Some(c) => assert!(near_core.iter().any(|&j| got.labels[j] == Some(c))),
                }
            }
        }
    }

    #[test]
    fn core_membership_ignores_order() {
        let mut rng = SeededRng::new(5);
        let pts: Vec<[f64; 2]> = (0..60).map(|_| [rng.uniform() * 25.0, rng.uniform() * 25.0]).collect();
        let mut rev = pts.clone();
        rev.reverse();
        let (a, b) = (dbscan(&pts, 3.0, 4).unwrap(), dbscan(&rev, 3.0, 4).unwrap());
        assert_eq!(a.num_clusters, b.num_clusters);
        for i in 0..60 {
            for j in 0..60 {
                if a.core[i] && a.core[j] {
                    let same_a = a.labels[i] == a.labels[j];
                    let same_b = b.labels[59 - i] == b.labels[59 - j];
                    assert_eq!(same_a, same_b);
                }
            }
        }
    }
}
