//! Benchmarks, radii and validity statistics of a clustering.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{ClusterError, ClusterSolution, DistanceMatrix, MergeTree, SolutionSettings};

/// Default upper end of the statistics sweep.
pub const DEFAULT_K_MAX: usize = 8;

/// For each cluster, the member minimising the sum of squared distances to
/// all members (0-based observation index). Ties go to the smallest index.
pub fn benchmark_points(sol: &ClusterSolution, d: &DistanceMatrix) -> Vec<usize> {
    sol.members()
        .iter()
        .map(|members| {
            let mut best = (members[0], f64::INFINITY);
            for &c in members {
                let f: f64 = members.iter().map(|&a| d.get(c, a).powi(2)).sum();
                if f < best.1 {
                    best = (c, f);
                }
            }
            best.0
        })
        .collect()
}

/// Largest distance from each cluster's benchmark to its members.
pub fn cluster_radius(sol: &ClusterSolution, d: &DistanceMatrix, benchmarks: &[usize]) -> Vec<f64> {
    sol.members()
        .iter()
        .zip(benchmarks)
        .map(|(members, &c)| members.iter().map(|&a| d.get(c, a)).fold(0.0, f64::max))
        .collect()
}

/// Largest pairwise distance inside each cluster.
pub fn cluster_diameter(sol: &ClusterSolution, d: &DistanceMatrix) -> Vec<f64> {
    sol.members()
        .iter()
        .map(|members| {
            let mut max = 0.0f64;
            for (x, &a) in members.iter().enumerate() {
                for &b in &members[x + 1..] {
                    max = max.max(d.get(a, b));
                }
            }
            max
        })
        .collect()
}

/// Smallest distance between two benchmarks, `None` with fewer than two.
pub fn min_benchmark_separation(benchmarks: &[usize], d: &DistanceMatrix) -> Option<f64> {
    let mut min: Option<f64> = None;
    for (x, &a) in benchmarks.iter().enumerate() {
        for &b in &benchmarks[x + 1..] {
            let v = d.get(a, b);
            min = Some(min.map_or(v, |m| m.min(v)));
        }
    }
    min
}

fn check_len(sol: &ClusterSolution, n: usize) -> Result<(), ClusterError> {
    if sol.n() != n {
        return Err(ClusterError::LengthMismatch {
            expected: n,
            found: sol.n(),
        });
    }
    Ok(())
}

/// Calinski–Harabasz index `(B / (k - 1)) / (W / (n - k))` with Euclidean
/// scatter on `coords`. Coincident cluster members (`W = 0`) give
/// `+inf`.
pub fn ch_index(coords: &DMatrix<f64>, sol: &ClusterSolution) -> Result<f64, ClusterError> {
    let n = coords.nrows();
    check_len(sol, n)?;
    let k = sol.k;
    if k < 2 || k + 1 > n {
        return Err(ClusterError::InvalidK { k, n });
    }
    let p = coords.ncols();
    let grand: DVector<f64> = coords.row_mean().transpose();
    let mut within = 0.0;
    let mut between = 0.0;
    for members in sol.members() {
        let mut mean = DVector::zeros(p);
        for &i in &members {
            mean += coords.row(i).transpose();
        }
        mean /= members.len() as f64;
        for &i in &members {
            within += (coords.row(i).transpose() - &mean).norm_squared();
        }
        between += members.len() as f64 * (&mean - &grand).norm_squared();
    }
    if within == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok((between / (k - 1) as f64) / (within / (n - k) as f64))
}

/// Mean within-cluster distance over mean between-cluster distance.
pub fn wb_ratio(d: &DistanceMatrix, sol: &ClusterSolution) -> Result<f64, ClusterError> {
    check_len(sol, d.n())?;
    if sol.k < 2 {
        return Err(ClusterError::NoBetweenPairs);
    }
    let (mut ws, mut wn, mut bs, mut bn) = (0.0, 0usize, 0.0, 0usize);
    for i in 0..d.n() {
        for j in (i + 1)..d.n() {
            if sol.cluster_of[i] == sol.cluster_of[j] {
                ws += d.get(i, j);
                wn += 1;
            } else {
                bs += d.get(i, j);
                bn += 1;
            }
        }
    }
    if wn == 0 {
        return Err(ClusterError::NoWithinPairs);
    }
    Ok((ws / wn as f64) / (bs / bn as f64))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Silhouette {
    pub widths: Vec<f64>,
    pub average: f64,
}

/// Silhouette widths; members of singleton clusters get 0.
pub fn silhouette(d: &DistanceMatrix, sol: &ClusterSolution) -> Result<Silhouette, ClusterError> {
    check_len(sol, d.n())?;
    if sol.k < 2 {
        return Err(ClusterError::InvalidK { k: sol.k, n: d.n() });
    }
    let sizes = sol.sizes();
    let widths: Vec<f64> = (0..d.n())
        .map(|i| {
            let own = sol.cluster_of[i] - 1;
            if sizes[own] == 1 {
                return 0.0;
            }
            let mut sums = vec![0.0; sol.k];
            for j in 0..d.n() {
                sums[sol.cluster_of[j] - 1] += d.get(i, j);
            }
            let a = sums[own] / (sizes[own] - 1) as f64;
            let b = (0..sol.k)
                .filter(|&c| c != own)
                .map(|c| sums[c] / sizes[c] as f64)
                .fold(f64::INFINITY, f64::min);
            let m = a.max(b);
            if m == 0.0 {
                0.0
            } else {
                (b - a) / m
            }
        })
        .collect();
    let average = widths.iter().sum::<f64>() / widths.len() as f64;
    Ok(Silhouette { widths, average })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub k: usize,
    pub ch_index: f64,
    pub wb_ratio: f64,
    pub avg_silhouette: f64,
    pub max_radius: f64,
    pub min_benchmark_separation: f64,
}

/// Statistics for every cut `k = 2..=k_max`, with `k_max` clamped to
/// `n - 1`.
pub fn stats_sweep(
    t: &MergeTree,
    d: &DistanceMatrix,
    coords: &DMatrix<f64>,
    k_max: usize,
) -> Result<Vec<SweepRow>, ClusterError> {
    let k_max = k_max.min(t.n.saturating_sub(1));
    let settings = SolutionSettings {
        metric_id: d.metric_id().into(),
        linkage_id: String::new(),
        transform_id: String::new(),
        k: 0,
    };
    (2..=k_max)
        .map(|k| {
            let sol = t.cut(k, settings.clone())?;
            let bench = benchmark_points(&sol, d);
            let radius = cluster_radius(&sol, d, &bench);
            Ok(SweepRow {
                k,
                ch_index: ch_index(coords, &sol)?,
                wb_ratio: wb_ratio(d, &sol)?,
                avg_silhouette: silhouette(d, &sol)?.average,
                max_radius: radius.iter().copied().fold(0.0, f64::max),
                min_benchmark_separation: min_benchmark_separation(&bench, d).unwrap_or(0.0),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSummary {
    pub cluster: usize,
    /// 0-based observation index of the benchmark.
    pub benchmark_index: usize,
    pub size: usize,
    pub radius: f64,
    pub diameter: f64,
    pub benchmark_score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterStats {
    pub clusters: Vec<ClusterSummary>,
    pub ch_index: Option<f64>,
    pub wb_ratio: Option<f64>,
    pub avg_silhouette: Option<f64>,
    pub min_benchmark_separation: Option<f64>,
}

/// Per-cluster summaries plus the global statistics that are defined for
/// this `k`.
pub fn cluster_stats(
    sol: &ClusterSolution,
    d: &DistanceMatrix,
    coords: &DMatrix<f64>,
    score: Option<&[f64]>,
) -> Result<ClusterStats, ClusterError> {
    check_len(sol, d.n())?;
    let bench = benchmark_points(sol, d);
    let radius = cluster_radius(sol, d, &bench);
    let diameter = cluster_diameter(sol, d);
    let sizes = sol.sizes();
    let clusters = (0..sol.k)
        .map(|c| ClusterSummary {
            cluster: c + 1,
            benchmark_index: bench[c],
            size: sizes[c],
            radius: radius[c],
            diameter: diameter[c],
            benchmark_score: score.map(|s| s[bench[c]]),
        })
        .collect();
    Ok(ClusterStats {
        clusters,
        ch_index: ch_index(coords, sol).ok(),
        wb_ratio: wb_ratio(d, sol).ok(),
        avg_silhouette: silhouette(d, sol).ok().map(|s| s.average),
        min_benchmark_separation: min_benchmark_separation(&bench, d),
    })
}

/// Number of equal-width bins shared by the breakdown histograms.
pub const BREAKDOWN_BINS: usize = 30;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceBreakdown {
    pub cluster: usize,
    /// `BREAKDOWN_BINS + 1` edges spanning `[0, max distance]`.
    pub edges: Vec<f64>,
    pub within: Vec<usize>,
    pub between: Vec<usize>,
    pub overall: Vec<usize>,
}

/// Histograms of distances inside cluster `cluster_id` (1-based), from its
/// members to everybody else, and over all pairs, on common bins.
pub fn distance_breakdown(
    d: &DistanceMatrix,
    sol: &ClusterSolution,
    cluster_id: usize,
) -> Result<DistanceBreakdown, ClusterError> {
    check_len(sol, d.n())?;
    if cluster_id == 0 || cluster_id > sol.k {
        return Err(ClusterError::UnknownCluster(cluster_id));
    }
    let max = d.max();
    let upper = if max > 0.0 { max } else { 1.0 };
    let width = upper / BREAKDOWN_BINS as f64;
    let edges = (0..=BREAKDOWN_BINS).map(|i| i as f64 * width).collect();
    let bin = |x: f64| ((x / width) as usize).min(BREAKDOWN_BINS - 1);

    let mut within = vec![0; BREAKDOWN_BINS];
    let mut between = vec![0; BREAKDOWN_BINS];
    let mut overall = vec![0; BREAKDOWN_BINS];
    for i in 0..d.n() {
        for j in (i + 1)..d.n() {
            let x = d.get(i, j);
            let b = bin(x);
            overall[b] += 1;
            let in_i = sol.cluster_of[i] == cluster_id;
            let in_j = sol.cluster_of[j] == cluster_id;
            if in_i && in_j {
                within[b] += 1;
            } else if in_i || in_j {
                between[b] += 1;
            }
        }
    }
    Ok(DistanceBreakdown {
        cluster: cluster_id,
        edges,
        within,
        between,
        overall,
    })
}
