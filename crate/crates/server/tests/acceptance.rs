//! Acceptance checks. Each criterion prints one PASS or FAIL line; the
//! process exits non-zero when any criterion fails.

mod common;

use std::collections::BTreeSet;
use std::sync::Arc;
use std::time::{Duration, Instant};

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use linkspace::cluster::{
    benchmark_points, ch_index, cluster_diameter, cluster_radius, cut_tree, hclust, pairwise_distances, silhouette,
    stats_sweep, wb_ratio, ClusterSolution, DistanceMatrix, Linkage, Metric, SolutionSettings,
};
use linkspace::data::{chi2_score, pull_coords, CovarianceSpec, RoleSpec, VariableMatrix};
use linkspace::nldr::{classical_mds, perplexity_calibration, tsne, TsneOptions};
use linkspace::session::{headless_run, SessionManager};
use linkspace::tour::{
    grand_tour, guided_tour, radial_tour, random_frame, Geodesic, GuidedOptions, Grouping, ProjectionFrame, TourIndex,
};
use linkspace_server::{router, AppState};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde_json::{json, Value};
use tower::ServiceExt;

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn settings() -> SolutionSettings {
    SolutionSettings {
        metric_id: "euclidean".into(),
        linkage_id: String::new(),
        transform_id: String::new(),
        k: 0,
    }
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

// ---------------------------------------------------------------------------
// clustering oracle

struct OracleTree {
    merges: Vec<(usize, usize, f64)>,
    /// Labels by first occurrence for every cluster count `1..=n`, indexed by `k - 1`.
    partitions: Vec<Vec<usize>>,
}

fn first_occurrence(owner: &[usize]) -> Vec<usize> {
    let mut seen: Vec<usize> = Vec::new();
    owner
        .iter()
        .map(|o| match seen.iter().position(|s| s == o) {
            Some(i) => i + 1,
            None => {
                seen.push(*o);
                seen.len()
            }
        })
        .collect()
}

/// Naive agglomeration: every step scans all pairs of live clusters and
/// applies the textbook Lance–Williams update to a full node-by-node table.
fn oracle_hclust(d: &DistanceMatrix, linkage: Linkage) -> OracleTree {
    let n = d.n();
    let total = 2 * n;
    let mut dis = vec![vec![f64::NAN; total]; total];
    let ward = linkage == Linkage::Ward;
    for i in 0..n {
        for j in 0..n {
            let v = d.get(i, j);
            dis[i + 1][j + 1] = if ward { v * v } else { v };
        }
    }
    let mut size = vec![0usize; total];
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); total];
    for i in 1..=n {
        size[i] = 1;
        members[i] = vec![i - 1];
    }
    let mut live: Vec<usize> = (1..=n).collect();
    let mut owner: Vec<usize> = (1..=n).collect();
    let mut partitions = vec![Vec::new(); n];
    partitions[n - 1] = first_occurrence(&owner);
    let mut merges = Vec::new();
    for s in 0..n - 1 {
        let mut best: Option<(f64, usize, usize)> = None;
        for (x, &a) in live.iter().enumerate() {
            for &b in &live[x + 1..] {
                let cand = (dis[a][b], a.min(b), a.max(b));
                let better = match best {
                    None => true,
                    Some(cur) => cand.0.total_cmp(&cur.0).then(cand.1.cmp(&cur.1)).then(cand.2.cmp(&cur.2)).is_lt(),
                };
                if better {
                    best = Some(cand);
                }
            }
        }
        let (h, i, j) = best.unwrap();
        let node = n + 1 + s;
        let (ni, nj) = (size[i] as f64, size[j] as f64);
        for &k in live.iter().filter(|&&k| k != i && k != j) {
            let (dik, djk, dij, nk) = (dis[i][k], dis[j][k], dis[i][j], size[k] as f64);
            let v = match linkage {
                Linkage::Single => dik.min(djk),
                Linkage::Complete => dik.max(djk),
                Linkage::Average => (ni * dik + nj * djk) / (ni + nj),
                Linkage::Ward => ((ni + nk) * dik + (nj + nk) * djk - nk * dij) / (ni + nj + nk),
            };
            dis[node][k] = v;
            dis[k][node] = v;
        }
        size[node] = size[i] + size[j];
        let mut m = std::mem::take(&mut members[i]);
        m.extend(std::mem::take(&mut members[j]));
        for &leaf in &m {
            owner[leaf] = node;
        }
        members[node] = m;
        live.retain(|&c| c != i && c != j);
        live.push(node);
        merges.push((i, j, if ward { h.sqrt() } else { h }));
        partitions[n - 2 - s] = first_occurrence(&owner);
    }
    OracleTree { merges, partitions }
}

/// Single and complete linkage straight from the definition over member pairs.
fn definitional_height(d: &DistanceMatrix, a: &[usize], b: &[usize], linkage: Linkage) -> f64 {
    let pairs = a.iter().flat_map(|&x| b.iter().map(move |&y| d.get(x, y)));
    match linkage {
        Linkage::Single => pairs.fold(f64::INFINITY, f64::min),
        _ => pairs.fold(f64::NEG_INFINITY, f64::max),
    }
}

fn random_fixture(rng: &mut ChaCha8Rng, n: usize, p: usize, integer: bool) -> DMatrix<f64> {
    DMatrix::from_fn(n, p, |_, _| {
        if integer {
            rng.random_range(0..3) as f64
        } else {
            normal(rng)
        }
    })
}

fn clustering_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut ties = 0;
    for fixture in 0..200 {
        let n = rng.random_range(2..=10);
        let p = rng.random_range(1..=4);
        let integer = fixture % 3 == 0;
        let coords = random_fixture(&mut rng, n, p, integer);
        let metric = if fixture % 2 == 0 { Metric::Euclidean } else { Metric::Manhattan };
        let d = pairwise_distances(&coords, metric).unwrap();
        for linkage in Linkage::ALL {
            let tree = hclust(&d, linkage).map_err(|e| e.to_string())?;
            let oracle = oracle_hclust(&d, linkage);
            for (s, (m, o)) in tree.merges.iter().zip(&oracle.merges).enumerate() {
                ensure!(
                    (m.left, m.right) == (o.0, o.1) && m.height.to_bits() == o.2.to_bits(),
                    "fixture {fixture} {linkage:?} merge {s}: got ({}, {}, {}) want {o:?}",
                    m.left,
                    m.right,
                    m.height
                );
            }
            ensure!(tree.merges.len() == n - 1, "fixture {fixture}: {} merges", tree.merges.len());
            if matches!(linkage, Linkage::Single | Linkage::Complete) {
                let mut sets: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
                for m in &tree.merges {
                    let h = definitional_height(&d, &sets[m.left - 1], &sets[m.right - 1], linkage);
                    ensure!(h == m.height, "fixture {fixture} {linkage:?}: definitional height {h} vs {}", m.height);
                    let joined = [sets[m.left - 1].clone(), sets[m.right - 1].clone()].concat();
                    sets.push(joined);
                }
            }
            let heights = tree.heights();
            ties += heights.windows(2).filter(|w| w[0] == w[1]).count();
            for k in 1..=n {
                let got = cut_tree(&tree, k).map_err(|e| e.to_string())?;
                ensure!(
                    got == oracle.partitions[k - 1],
                    "fixture {fixture} {linkage:?} k={k}: {got:?} vs {:?}",
                    oracle.partitions[k - 1]
                );
            }
        }
    }
    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(10), "took {elapsed:?}");
    Ok(format!("200 fixtures x 4 linkages, {ties} tied heights, {elapsed:.2?}"))
}

// ---------------------------------------------------------------------------
// benchmarks, radius, diameter

fn random_partition(rng: &mut ChaCha8Rng, n: usize) -> Vec<usize> {
    let k = rng.random_range(1..=n.min(6));
    let mut labels: Vec<usize> = (0..n).map(|i| if i < k { i + 1 } else { rng.random_range(1..=k) }).collect();
    for i in (1..n).rev() {
        labels.swap(i, rng.random_range(0..=i));
    }
    labels
}

fn benchmark_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut tied = 0;
    for fixture in 0..100 {
        let n = rng.random_range(1..=50);
        let p = rng.random_range(1..=4);
        let integer = fixture % 2 == 0;
        let coords = random_fixture(&mut rng, n, p, integer);
        let metric = if integer { Metric::Manhattan } else { Metric::Euclidean };
        let d = pairwise_distances(&coords, metric).unwrap();
        let labels = random_partition(&mut rng, n);
        let k = *labels.iter().max().unwrap();
        let sol = ClusterSolution::from_labels(labels.clone(), settings()).unwrap();
        let bench = benchmark_points(&sol, &d);
        let radius = cluster_radius(&sol, &d, &bench);
        let diameter = cluster_diameter(&sol, &d);
        for c in 1..=k {
            let inside: Vec<usize> = (0..n).filter(|&i| labels[i] == c).collect();
            let mut scored: Vec<(f64, usize)> = inside
                .iter()
                .map(|&cand| (inside.iter().map(|&a| d.get(cand, a) * d.get(cand, a)).sum(), cand))
                .collect();
            scored.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
            if scored.len() > 1 && scored[0].0 == scored[1].0 {
                tied += 1;
            }
            let want = scored[0].1;
            ensure!(bench[c - 1] == want, "fixture {fixture} cluster {c}: benchmark {} vs {want}", bench[c - 1] + 1);
            let r = inside.iter().map(|&a| d.get(want, a)).fold(0.0, f64::max);
            ensure!(radius[c - 1] == r, "fixture {fixture} cluster {c}: radius {} vs {r}", radius[c - 1]);
            let mut diam = 0.0f64;
            for &a in &inside {
                for &b in &inside {
                    diam = diam.max(d.get(a, b));
                }
            }
            ensure!(diameter[c - 1] == diam, "fixture {fixture} cluster {c}: diameter {} vs {diam}", diameter[c - 1]);
        }
    }
    Ok(format!("100 fixtures, {tied} clusters with tied benchmark candidates"))
}

// ---------------------------------------------------------------------------
// validity statistics

fn statistics() -> Outcome {
    let coords = DMatrix::from_column_slice(4, 1, &[0.0, 1.0, 10.0, 11.0]);
    let d = pairwise_distances(&coords, Metric::Euclidean).unwrap();
    let sol = ClusterSolution::from_labels(vec![1, 1, 2, 2], settings()).unwrap();
    let ch = ch_index(&coords, &sol).map_err(|e| e.to_string())?;
    let wb = wb_ratio(&d, &sol).map_err(|e| e.to_string())?;
    let s0 = silhouette(&d, &sol).map_err(|e| e.to_string())?.widths[0];
    ensure!((ch - 200.0).abs() < 1e-10, "ch_index {ch}");
    ensure!((wb - 0.1).abs() < 1e-10, "wb_ratio {wb}");
    ensure!((s0 - (1.0 - 1.0 / 10.5)).abs() < 1e-10, "silhouette {s0}");

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for n in 9..=30 {
        let coords = random_fixture(&mut rng, n, 3, false);
        let d = pairwise_distances(&coords, Metric::Euclidean).unwrap();
        let tree = hclust(&d, Linkage::Ward).unwrap();
        let rows = stats_sweep(&tree, &d, &coords, 8).map_err(|e| e.to_string())?;
        let ks: Vec<usize> = rows.iter().map(|r| r.k).collect();
        ensure!(ks == (2..=8).collect::<Vec<_>>(), "n={n}: sweep k {ks:?}");
    }
    Ok(format!("ch {ch}, wb {wb}, s(0) {s0:.12}, sweep k=2..8 for n=9..30"))
}

// ---------------------------------------------------------------------------
// pull coordinates

fn pull_coordinates() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0.0f64;
    for fixture in 0..100 {
        let p = rng.random_range(1..=6);
        let n = rng.random_range(1..=40);
        let names: Vec<String> = (1..=p).map(|j| format!("V{j}")).collect();
        let values = DMatrix::from_fn(n, p, |_, _| 3.0 * normal(&mut rng));
        let m = VariableMatrix::new(names, values.clone()).unwrap();
        let reference: Vec<f64> = (0..p).map(|_| normal(&mut rng)).collect();

        let identity = CovarianceSpec::new(DMatrix::identity(p, p), reference.clone()).map_err(|e| e.to_string())?;
        let pulled = pull_coords(&m, &identity).map_err(|e| e.to_string())?;
        for i in 0..n {
            for j in 0..p {
                let want = values[(i, j)] - reference[j];
                ensure!(pulled.values[(i, j)] == want, "fixture {fixture}: identity pull ({i}, {j})");
            }
        }

        let variances: Vec<f64> = (0..p).map(|_| rng.random_range(0.1..5.0)).collect();
        let sigma = DMatrix::from_fn(p, p, |a, b| if a == b { variances[a] } else { 0.0 });
        let cov = CovarianceSpec::new(sigma, reference.clone()).map_err(|e| e.to_string())?;
        let pulled = pull_coords(&m, &cov).map_err(|e| e.to_string())?;
        let chi2 = chi2_score(&m, &cov).map_err(|e| e.to_string())?;
        for i in 0..n {
            let direct: f64 = (0..p).map(|j| (values[(i, j)] - reference[j]).powi(2) / variances[j]).sum();
            let norm2 = pulled.values.row(i).norm_squared();
            let err = (norm2 - chi2.values[i]).abs().max((direct - chi2.values[i]).abs());
            worst = worst.max(err);
            ensure!(err < 1e-10, "fixture {fixture} row {i}: |pull|^2 {norm2}, chi2 {}, direct {direct}", chi2.values[i]);
        }
    }
    Ok(format!("identity exact, 100 diagonal fixtures, max error {worst:.1e}"))
}

// ---------------------------------------------------------------------------
// tours

fn planted(seed: u64, n: usize) -> (DMatrix<f64>, Grouping) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let labels: Vec<usize> = (0..n).map(|i| if i < n / 2 { 1 } else { 2 }).collect();
    let data = DMatrix::from_fn(n, 6, |i, j| {
        let z = normal(&mut rng);
        if j == 0 {
            z + if labels[i] == 1 { -2.5 } else { 2.5 }
        } else {
            z
        }
    });
    (data, Grouping::new(&labels, 2).unwrap())
}

fn tour_geometry() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut frames: Vec<ProjectionFrame> = Vec::new();
    let mut seed = 0;
    while frames.len() < 10_000 {
        seed += 1;
        let p = rng.random_range(3..=8);
        let d = rng.random_range(1..=3usize).min(p - 1);
        let grand = grand_tour(p, d, 10, seed).map_err(|e| e.to_string())?;
        frames.extend(grand.interpolated);
        let start = random_frame(p, d, &mut rng).map_err(|e| e.to_string())?;
        let radial = radial_tour(&start, rng.random_range(1..=p)).map_err(|e| e.to_string())?;
        frames.extend(radial.interpolated);
        if seed % 4 == 0 {
            let (data, groups) = planted(seed, 60);
            let mut opts = GuidedOptions::new(TourIndex::Lda, 2, seed);
            opts.max_iter = 100;
            let guided = guided_tour(&data, &groups, &opts, None).map_err(|e| e.to_string())?;
            frames.extend(guided.interpolated);
        }
    }
    let worst = frames.iter().map(ProjectionFrame::orthonormality_error).fold(0.0, f64::max);
    ensure!(worst < 1e-9, "max |B'B - I| = {worst:e}");

    let e1 = ProjectionFrame::new(DMatrix::from_column_slice(2, 1, &[1.0, 0.0])).unwrap();
    let e2 = ProjectionFrame::new(DMatrix::from_column_slice(2, 1, &[0.0, 1.0])).unwrap();
    let mid = Geodesic::new(&e1, &e2).map_err(|e| e.to_string())?.at(0.5);
    let half = std::f64::consts::FRAC_1_SQRT_2;
    let b = mid.basis();
    ensure!(
        (b[(0, 0)] - half).abs() < 1e-9 && (b[(1, 0)] - half).abs() < 1e-9,
        "midpoint ({}, {})",
        b[(0, 0)],
        b[(1, 0)]
    );
    Ok(format!("{} frames, max error {worst:.1e}, midpoint ({:.12}, {:.12})", frames.len(), b[(0, 0)], b[(1, 0)]))
}

fn guided_recovery() -> Outcome {
    let start = Instant::now();
    let mut hits = 0;
    for run in 0..100u64 {
        let (data, groups) = planted(1000 + run, 100);
        let path = guided_tour(&data, &groups, &GuidedOptions::new(TourIndex::Lda, 2, run), None)
            .map_err(|e| e.to_string())?;
        let trace = path.index_trace.as_ref().ok_or("guided path without index trace")?;
        ensure!(trace.windows(2).all(|w| w[1] > w[0]), "run {run}: index trace not strictly increasing");
        if path.last_frame().loading(0) > 0.9 {
            hits += 1;
        }
    }
    let elapsed = start.elapsed();
    ensure!(hits >= 95, "|x1 loading| > 0.9 in {hits}/100 runs");
    ensure!(elapsed < Duration::from_secs(60), "took {elapsed:?}");
    Ok(format!("{hits}/100 runs recover x1, traces increasing, {elapsed:.2?}"))
}

// ---------------------------------------------------------------------------
// embeddings

fn tsne_checks() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let m = rng.random_range(5..=80);
        let row: Vec<f64> = (0..m).map(|_| rng.random_range(0.0..10.0)).collect();
        let perplexity = rng.random_range(2.0..(m as f64).min(40.0));
        let probs = perplexity_calibration(&row, perplexity).map_err(|e| e.to_string())?;
        let total: f64 = probs.iter().sum();
        let h: f64 = -probs.iter().filter(|&&q| q > 0.0).map(|q| q * q.log2()).sum::<f64>();
        let err = (h - perplexity.log2()).abs();
        worst = worst.max(err);
        ensure!((total - 1.0).abs() < 1e-12, "probabilities sum to {total}");
        ensure!(err < 1e-4, "entropy {h} vs log2 perplexity {}", perplexity.log2());
    }

    let mut separated = 0;
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let coords = DMatrix::from_fn(10, 4, |i, j| {
            let centre = if i >= 5 && j == 0 { 10.0 } else { 0.0 };
            centre + normal(&mut rng)
        });
        let d = pairwise_distances(&coords, Metric::Euclidean).unwrap();
        let emb = tsne(&d, &TsneOptions::new(seed), None).map_err(|e| e.to_string())?;
        let again = tsne(&d, &TsneOptions::new(seed), None).map_err(|e| e.to_string())?;
        ensure!(
            emb.y.iter().zip(again.y.iter()).all(|(a, b)| a.to_bits() == b.to_bits()),
            "seed {seed}: repeated run differs"
        );
        let centroid = |rows: std::ops::Range<usize>| {
            let len = rows.len() as f64;
            let (mut x, mut y) = (0.0, 0.0);
            for i in rows {
                x += emb.y[(i, 0)];
                y += emb.y[(i, 1)];
            }
            (x / len, y / len)
        };
        let spread = |rows: std::ops::Range<usize>, c: (f64, f64)| {
            let len = rows.len() as f64;
            let ss: f64 = rows.map(|i| (emb.y[(i, 0)] - c.0).powi(2) + (emb.y[(i, 1)] - c.1).powi(2)).sum();
            (ss / len).sqrt()
        };
        let (ca, cb) = (centroid(0..5), centroid(5..10));
        let gap = ((ca.0 - cb.0).powi(2) + (ca.1 - cb.1).powi(2)).sqrt();
        if gap > 3.0 * spread(0..5, ca).max(spread(5..10, cb)) {
            separated += 1;
        }
    }
    ensure!(separated >= 18, "blobs separated in {separated}/20 seeds");
    Ok(format!("max entropy error {worst:.1e} bits, {separated}/20 seeds separate, repeat runs bit-identical"))
}

fn mds_recovery() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let n = rng.random_range(3..=40);
        let p = rng.random_range(2..=5);
        let plane = DMatrix::from_fn(n, 2, |_, _| 5.0 * normal(&mut rng));
        let lift = DMatrix::from_fn(2, p, |_, _| normal(&mut rng));
        let basis = linkspace::tour::orthonormalize(&lift.transpose()).map_err(|e| e.to_string())?;
        let offset: Vec<f64> = (0..p).map(|_| normal(&mut rng)).collect();
        let mut points = plane * basis.basis().transpose();
        for (j, mut col) in points.column_iter_mut().enumerate() {
            col.add_scalar_mut(offset[j]);
        }
        let d = pairwise_distances(&points, Metric::Euclidean).unwrap();
        let emb = classical_mds(&d).map_err(|e| e.to_string())?;
        let back = pairwise_distances(&emb.y, Metric::Euclidean).unwrap();
        for i in 0..n {
            for j in 0..n {
                worst = worst.max((d.get(i, j) - back.get(i, j)).abs());
            }
        }
    }
    ensure!(worst < 1e-8, "max distance error {worst:e}");
    Ok(format!("50 planar fixtures, max distance error {worst:.1e}"))
}

// ---------------------------------------------------------------------------
// reproducibility

fn reproducibility() -> Outcome {
    let csv = common::fixture_csv(6);
    let mgr = SessionManager::new();
    let id = mgr.create();
    let s = mgr.get(&id).map_err(|e| e.to_string())?;
    let roles: RoleSpec = serde_json::from_value(common::roles()).unwrap();
    s.upload_data(csv.as_bytes(), Some(roles)).map_err(|e| e.to_string())?;
    s.set_config(&json!({"score": {"kind": "column", "column": "Z1"}, "tour": {"kind": "guided", "max_iter": 30}}))
        .map_err(|e| e.to_string())?;
    let exported = tempdir()?;
    s.export().map_err(|e| e.to_string())?.write_to(exported.path()).map_err(|e| e.to_string())?;

    let settings = std::fs::read_to_string(exported.path().join("settings.json")).map_err(|e| e.to_string())?;
    let rerun = tempdir()?;
    headless_run(csv.as_bytes(), &settings, None, Some(rerun.path())).map_err(|e| e.to_string())?;
    let a = std::fs::read(exported.path().join("assignments.csv")).map_err(|e| e.to_string())?;
    let b = std::fs::read(rerun.path().join("assignments.csv")).map_err(|e| e.to_string())?;
    ensure!(a == b, "assignments differ");

    let cmp = s.comparison().map_err(|e| e.to_string())?;
    ensure!((cmp.a.k, cmp.b.k) == (3, 4), "compared k {} and {}", cmp.a.k, cmp.b.k);
    let nonzero: Vec<usize> = cmp.table.counts.iter().map(|r| r.iter().filter(|&&c| c > 0).count()).collect();
    let split = nonzero.iter().filter(|&&c| c > 1).count();
    ensure!(split == 1 && nonzero.contains(&2), "nonzero entries per row {nonzero:?}");
    Ok(format!("{} assignment bytes identical, 3-vs-4 nonzero entries per row {nonzero:?}", a.len()))
}

fn tempdir() -> Result<tempfile::TempDir, String> {
    tempfile::tempdir().map_err(|e| e.to_string())
}

// ---------------------------------------------------------------------------
// service contract

async fn subscribe(c: &common::Client, id: &str) -> Body {
    let req = Request::builder().uri(format!("/sessions/{id}/events")).body(Body::empty()).unwrap();
    c.app.clone().oneshot(req).await.unwrap().into_body()
}

async fn expect(c: &common::Client, method: Method, uri: &str, body: Option<Value>, want: StatusCode) -> Result<Value, String> {
    let (status, value) = c.send(method.clone(), uri, body).await;
    ensure!(status == want, "{method} {uri}: {status} ({value})");
    Ok(value)
}

async fn service_contract() -> Outcome {
    let c = Arc::new(common::Client {
        app: router(AppState::default()),
    });
    let created = expect(&c, Method::POST, "/sessions", None, StatusCode::CREATED).await?;
    let id = created["id"].as_str().ok_or("no session id")?.to_string();
    let s = format!("/sessions/{id}");
    let mut hit: BTreeSet<&str> = BTreeSet::new();

    let roles = json!({"roles": common::roles()});
    expect(&c, Method::PATCH, &format!("{s}/config"), Some(roles), StatusCode::OK).await?;
    let (status, _) = c.raw(Method::POST, &format!("{s}/data"), "text/csv", common::fixture_csv(5)).await;
    ensure!(status == StatusCode::OK, "plain CSV upload: {status}");
    let upload = json!({"csv": common::fixture_csv(5), "roles": common::roles()});
    expect(&c, Method::POST, &format!("{s}/data"), Some(upload), StatusCode::OK).await?;
    hit.insert("data");
    let dist: String = (0..15)
        .map(|i| (0..15).map(|j| format!("{}", (i as i32 - j as i32).abs())).collect::<Vec<_>>().join(",") + "\n")
        .collect();
    let (status, _) = c.raw(Method::POST, &format!("{s}/distances"), "text/csv", dist).await;
    ensure!(status == StatusCode::OK, "distances upload: {status}");
    hit.insert("distances");

    let summary = expect(&c, Method::GET, &s, None, StatusCode::OK).await?;
    ensure!(summary["summary"]["n"] == 15, "summary {summary}");
    hit.insert("session");
    expect(&c, Method::GET, &format!("{s}/config"), None, StatusCode::OK).await?;
    let patch = json!({"k": 3, "score": {"kind": "column", "column": "Z1"}});
    expect(&c, Method::PATCH, &format!("{s}/config"), Some(patch), StatusCode::OK).await?;
    hit.insert("config");
    for (name, uri) in [
        ("overview", format!("{s}/overview")),
        ("stats", format!("{s}/stats?k_max=8")),
        ("benchmarks", format!("{s}/benchmarks")),
        ("coordinates", format!("{s}/coordinates?variable=A1&center=true&scale=true&hidden=1")),
        ("breakdown", format!("{s}/breakdown?cluster=1")),
        ("comparison", format!("{s}/comparison")),
        ("export", format!("{s}/export")),
    ] {
        let v = expect(&c, Method::GET, &uri, None, StatusCode::OK).await?;
        ensure!(v.is_object(), "{name}: {v}");
        hit.insert(name);
    }
    let (status, csv) = c.raw(Method::GET, &format!("{s}/export?format=csv"), "text/plain", String::new()).await;
    ensure!(status == StatusCode::OK && csv.starts_with("id,cluster"), "csv export: {status}");

    let job = expect(&c, Method::POST, &format!("{s}/jobs/embedding"), Some(json!({"panel": "left"})), StatusCode::ACCEPTED).await?;
    let done = c.wait_job(&id, job["id"].as_str().ok_or("no job id")?).await;
    ensure!(done["state"] == "done", "embedding job {done}");
    hit.insert("jobs/embedding");
    let spec = json!({"kind": "guided", "max_iter": 30});
    let job = expect(&c, Method::POST, &format!("{s}/jobs/tour"), Some(json!({"panel": "left", "spec": spec})), StatusCode::ACCEPTED).await?;
    let done = c.wait_job(&id, job["id"].as_str().ok_or("no job id")?).await;
    ensure!(done["state"] == "done", "tour job {done}");
    hit.insert("jobs/tour");
    hit.insert("jobs/{job}");
    let grand = json!({"panel": "right", "spec": {"kind": "grand", "n_bases": 50}});
    let job = expect(&c, Method::POST, &format!("{s}/jobs/tour"), Some(grand), StatusCode::ACCEPTED).await?;
    let job_id = job["id"].as_str().ok_or("no job id")?;
    let cancelled = expect(&c, Method::DELETE, &format!("{s}/jobs/{job_id}"), None, StatusCode::OK).await?;
    ensure!(cancelled["state"] == "cancelled" || cancelled["state"] == "done", "cancel {cancelled}");

    let tour = expect(&c, Method::GET, &format!("{s}/tours/left"), None, StatusCode::OK).await?;
    let frames = tour["path"]["interpolated"].as_array().map_or(0, Vec::len);
    ensure!(frames > 0, "tour without frames");
    hit.insert("tours/{panel}");
    expect(&c, Method::POST, &format!("{s}/tours/left/copy"), Some(json!({"coloring": "group"})), StatusCode::OK).await?;
    hit.insert("tours/{panel}/copy");
    expect(&c, Method::POST, &format!("{s}/tours/right/hold"), Some(json!({"position": frames})), StatusCode::OK).await?;
    hit.insert("tours/{panel}/hold");
    let sl = expect(&c, Method::GET, &format!("{s}/tours/left/slice?position=1"), None, StatusCode::OK).await?;
    ensure!(sl["in_slice"].as_array().map_or(0, Vec::len) == 15, "slice {sl}");
    hit.insert("tours/{panel}/slice");

    // two subscribers, four concurrent writers
    let mut first = subscribe(&c, &id).await;
    let mut second = subscribe(&c, &id).await;
    let writers: Vec<_> = (0..4)
        .map(|w| {
            let c = c.clone();
            let uri = format!("{s}/selection");
            tokio::spawn(async move {
                for i in 0..5usize {
                    let ids = vec![1 + (w * 5 + i) % 15];
                    let (status, _) = c.send(Method::PUT, &uri, Some(json!({"ids": ids, "origin": format!("view{w}")}))).await;
                    assert_eq!(status, StatusCode::OK);
                }
            })
        })
        .collect();
    for w in writers {
        w.await.map_err(|e| e.to_string())?;
    }
    hit.insert("selection");
    hit.insert("events");
    let mut seen = Vec::new();
    for body in [&mut first, &mut second] {
        let events = common::read_events(body, 20).await;
        let revisions: Vec<u64> = events
            .iter()
            .filter(|(name, _)| name == "selection")
            .filter_map(|(_, ev)| ev["revision"].as_u64())
            .collect();
        ensure!(revisions.len() == 20, "{} selection events", revisions.len());
        ensure!(revisions.windows(2).all(|w| w[1] > w[0]), "revisions not monotone: {revisions:?}");
        seen.push(revisions);
    }
    ensure!(seen[0] == seen[1], "subscribers disagree");
    let sel = expect(&c, Method::GET, &format!("{s}/selection"), None, StatusCode::OK).await?;
    ensure!(sel["revision"] == *seen[0].last().unwrap(), "final selection {sel}");

    expect(&c, Method::DELETE, &s, None, StatusCode::NO_CONTENT).await?;
    expect(&c, Method::GET, &s, None, StatusCode::NOT_FOUND).await?;
    Ok(format!("{} endpoint groups, 2 subscribers saw revisions {:?}..{:?}", hit.len(), seen[0][0], seen[0][19]))
}

fn main() {
    let runtime = tokio::runtime::Runtime::new().expect("runtime");
    let checks: Vec<(&str, Box<dyn Fn() -> Outcome>)> = vec![
        ("hclust and cut_tree match the Lance-Williams oracle", Box::new(clustering_oracle)),
        ("benchmarks, radius and diameter match exhaustive search", Box::new(benchmark_oracle)),
        ("validity statistics on the four-point fixture and sweep range", Box::new(statistics)),
        ("pull coordinates against chi-square", Box::new(pull_coordinates)),
        ("tour frames orthonormal and geodesic midpoint", Box::new(tour_geometry)),
        ("guided LDA tour recovers planted structure", Box::new(guided_recovery)),
        ("t-SNE calibration, separation and determinism", Box::new(tsne_checks)),
        ("classical MDS recovers planar distances", Box::new(mds_recovery)),
        ("export and headless run agree; nested comparison", Box::new(reproducibility)),
        ("service endpoints and selection broadcast", Box::new(move || runtime.block_on(service_contract()))),
    ];
    let mut failed = 0;
    for (name, check) in &checks {
        match check() {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(reason) => {
                failed += 1;
                println!("FAIL  {name}: {reason}");
            }
        }
    }
    println!("{} of {} acceptance criteria passed", checks.len() - failed, checks.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
