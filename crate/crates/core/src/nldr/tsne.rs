use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::{Embedding, NldrError};
use crate::cluster::DistanceMatrix;
use crate::control::JobControl;

pub const DEFAULT_PERPLEXITY: f64 = 30.0;
pub const DEFAULT_ITERATIONS: usize = 1000;
pub const LEARNING_RATE: f64 = 200.0;
pub const EXAGGERATION: f64 = 12.0;
/// Iterations with early exaggeration and the lower momentum.
pub const EARLY_ITERATIONS: usize = 250;
const INITIAL_MOMENTUM: f64 = 0.5;
const FINAL_MOMENTUM: f64 = 0.8;
const INIT_SD: f64 = 1e-4;
const MIN_GAIN: f64 = 0.01;
const MAX_BISECTIONS: usize = 64;
/// Tolerance on the row entropy, in bits.
pub const ENTROPY_TOL: f64 = 1e-5;

/// Conditional neighbour probabilities of one observation.
///
/// `d_row` holds the distances to the other observations. The Gaussian
/// precision is found by bisection so that `2^H` matches `perplexity`.
pub fn perplexity_calibration(d_row: &[f64], perplexity: f64) -> Result<Vec<f64>, NldrError> {
    let m = d_row.len();
    if m == 0 || !(perplexity >= 1.0) || perplexity > m as f64 {
        return Err(NldrError::InvalidPerplexity { perplexity, n: m + 1 });
    }
    if d_row.iter().any(|d| !d.is_finite() || *d < 0.0) {
        return Err(NldrError::NonFinite);
    }
    let target = perplexity.log2();
    let sq: Vec<f64> = d_row.iter().map(|d| d * d).collect();
    let min_sq = sq.iter().copied().fold(f64::INFINITY, f64::min);
    let shifted: Vec<f64> = sq.iter().map(|s| s - min_sq).collect();
    let mean = shifted.iter().sum::<f64>() / m as f64;

    let mut probs = vec![0.0; m];
    let eval = |beta: f64, probs: &mut [f64]| -> f64 {
        let mut sum = 0.0;
        for (p, s) in probs.iter_mut().zip(&shifted) {
            *p = (-beta * s).exp();
            sum += *p;
        }
        let mut h = 0.0;
        for (p, s) in probs.iter_mut().zip(&shifted) {
            *p /= sum;
            h += beta * s * *p;
        }
        // nats to bits
        (h + sum.ln()) / std::f64::consts::LN_2
    };

    let mut beta = if mean > 0.0 { 1.0 / mean } else { 1.0 };
    let mut lo = 0.0_f64;
    let mut hi = f64::INFINITY;
    for _ in 0..MAX_BISECTIONS {
        let h = eval(beta, &mut probs);
        let diff = h - target;
        if diff.abs() < ENTROPY_TOL {
            return Ok(probs);
        }
        if diff > 0.0 {
            lo = beta;
            beta = if hi.is_finite() { 0.5 * (beta + hi) } else { beta * 2.0 };
        } else {
            hi = beta;
            beta = 0.5 * (beta + lo);
        }
    }
    let h = eval(beta, &mut probs);
    if (h - target).abs() < ENTROPY_TOL {
        Ok(probs)
    } else {
        Err(NldrError::PerplexityUnattainable { perplexity, entropy: h })
    }
}

/// Entropy in bits of a probability vector.
pub fn entropy_bits(p: &[f64]) -> f64 {
    -p.iter().filter(|&&x| x > 0.0).map(|x| x * x.log2()).sum::<f64>()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TsneOptions {
    pub perplexity: f64,
    pub iterations: usize,
    pub seed: u64,
    /// Stable observation ids used to seed the initial layout; defaults to
    /// `0..n`.
    pub ids: Option<Vec<u64>>,
}

impl TsneOptions {
    pub fn new(seed: u64) -> Self {
        Self {
            perplexity: DEFAULT_PERPLEXITY,
            iterations: DEFAULT_ITERATIONS,
            seed,
            ids: None,
        }
    }
}

/// Perplexity actually used for `n` observations.
pub fn effective_perplexity(requested: f64, n: usize) -> f64 {
    requested.min((n as f64 - 1.0) / 3.0)
}

/// Symmetric joint probabilities `(p_j|i + p_i|j) / 2n`, row-major.
pub fn joint_probabilities(d: &DistanceMatrix, perplexity: f64) -> Result<Vec<f64>, NldrError> {
    let n = d.n();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let others: Vec<f64> = (0..n).filter(|&j| j != i).map(|j| d.get(i, j)).collect();
            perplexity_calibration(&others, perplexity)
        })
        .collect::<Result<_, _>>()?;
    let mut cond = vec![0.0; n * n];
    for (i, row) in rows.iter().enumerate() {
        let mut it = row.iter();
        for j in (0..n).filter(|&j| j != i) {
            cond[i * n + j] = *it.next().expect("row length");
        }
    }
    let mut p = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            p[i * n + j] = (cond[i * n + j] + cond[j * n + i]) / (2.0 * n as f64);
        }
    }
    Ok(p)
}

fn initial_layout(ids: &[u64], seed: u64) -> Vec<[f64; 2]> {
    ids.iter()
        .map(|&id| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(id);
            let x: f64 = rng.sample(StandardNormal);
            let y: f64 = rng.sample(StandardNormal);
            [x * INIT_SD, y * INIT_SD]
        })
        .collect()
}

/// Student-t kernel numerators per row and their total.
fn kernel(y: &[[f64; 2]]) -> (Vec<f64>, f64) {
    let n = y.len();
    let num: Vec<f64> = (0..n * n)
        .into_par_iter()
        .map(|k| {
            let (i, j) = (k / n, k % n);
            if i == j {
                0.0
            } else {
                let dx = y[i][0] - y[j][0];
                let dy = y[i][1] - y[j][1];
                1.0 / (1.0 + dx * dx + dy * dy)
            }
        })
        .collect();
    let row_sums: Vec<f64> = num.par_chunks(n).map(|r| r.iter().sum()).collect();
    (num, row_sums.iter().sum())
}

fn kl_divergence(p: &[f64], num: &[f64], total: f64) -> f64 {
    p.iter()
        .zip(num)
        .filter(|(&pij, _)| pij > 0.0)
        .map(|(&pij, &q)| pij * (pij / (q / total).max(f64::MIN_POSITIVE)).ln())
        .sum()
}

/// Exact t-SNE on a distance matrix.
///
/// Observations are processed in id order internally, so permuting the
/// input together with its ids permutes the output the same way.
pub fn tsne(d: &DistanceMatrix, opts: &TsneOptions, control: Option<&JobControl>) -> Result<Embedding, NldrError> {
    let n = d.n();
    if n < 4 {
        return Err(NldrError::TooFewObservations { n, min: 4 });
    }
    let ids: Vec<u64> = match &opts.ids {
        Some(ids) if ids.len() == n => ids.clone(),
        Some(ids) => {
            return Err(NldrError::LengthMismatch {
                expected: n,
                found: ids.len(),
            })
        }
        None => (0..n as u64).collect(),
    };
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&i| ids[i]);
    if order.windows(2).any(|w| ids[w[0]] == ids[w[1]]) {
        return Err(NldrError::DuplicateIds);
    }
    let sorted_d = d.subset(&order);
    let sorted_ids: Vec<u64> = order.iter().map(|&i| ids[i]).collect();

    let perplexity = effective_perplexity(opts.perplexity, n);
    let p = joint_probabilities(&sorted_d, perplexity)?;
    let mut y = initial_layout(&sorted_ids, opts.seed);
    let mut velocity = vec![[0.0; 2]; n];
    let mut gains = vec![[1.0_f64; 2]; n];
    let mut kl_early = None;

    for iter in 0..opts.iterations {
        if let Some(c) = control {
            if c.is_cancelled() {
                return Err(NldrError::Cancelled);
            }
            if iter % 10 == 0 {
                c.set_progress(iter as f64 / opts.iterations as f64);
            }
        }
        let (exaggeration, momentum) = if iter < EARLY_ITERATIONS {
            (EXAGGERATION, INITIAL_MOMENTUM)
        } else {
            (1.0, FINAL_MOMENTUM)
        };
        let (num, total) = kernel(&y);
        if iter == EARLY_ITERATIONS {
            kl_early = Some(kl_divergence(&p, &num, total));
        }
        let grad: Vec<[f64; 2]> = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut g = [0.0; 2];
                for j in 0..n {
                    let q = num[i * n + j];
                    let w = (exaggeration * p[i * n + j] - q / total) * q;
                    g[0] += w * (y[i][0] - y[j][0]);
                    g[1] += w * (y[i][1] - y[j][1]);
                }
                [4.0 * g[0], 4.0 * g[1]]
            })
            .collect();
        for i in 0..n {
            for k in 0..2 {
                let same_sign = (grad[i][k] > 0.0) == (velocity[i][k] > 0.0);
                gains[i][k] = if same_sign { gains[i][k] * 0.8 } else { gains[i][k] + 0.2 };
                gains[i][k] = gains[i][k].max(MIN_GAIN);
                velocity[i][k] = momentum * velocity[i][k] - LEARNING_RATE * gains[i][k] * grad[i][k];
                y[i][k] += velocity[i][k];
            }
        }
        let mean = [
            y.iter().map(|r| r[0]).sum::<f64>() / n as f64,
            y.iter().map(|r| r[1]).sum::<f64>() / n as f64,
        ];
        for r in y.iter_mut() {
            r[0] -= mean[0];
            r[1] -= mean[1];
        }
    }
    let (num, total) = kernel(&y);
    let kl_final = kl_divergence(&p, &num, total);
    if let Some(c) = control {
        c.set_progress(1.0);
    }

    let mut out = DMatrix::zeros(n, 2);
    for (pos, &orig) in order.iter().enumerate() {
        out[(orig, 0)] = y[pos][0];
        out[(orig, 1)] = y[pos][1];
    }
    let mut emb = Embedding::new("tsne", out, opts.seed);
    emb.params.insert("perplexity".into(), perplexity);
    emb.params.insert("iterations".into(), opts.iterations as f64);
    emb.params.insert("learning_rate".into(), LEARNING_RATE);
    emb.params.insert("exaggeration".into(), EXAGGERATION);
    if let Some(kl) = kl_early {
        emb.params.insert("kl_early".into(), kl);
    }
    emb.params.insert("kl_final".into(), kl_final);
    Ok(emb)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cluster::{pairwise_distances, Metric};
    use approx::assert_abs_diff_eq;

    #[test]
    fn equidistant_neighbours_uniform() {
        let p = perplexity_calibration(&[1.0, 1.0], 2.0).unwrap();
        assert_abs_diff_eq!(p[0], 0.5, epsilon = 1e-12);
        let p = perplexity_calibration(&[2.0; 5], 5.0).unwrap();
        assert!(p.iter().all(|x| (x - 0.2).abs() < 1e-12));
    }

    #[test]
    fn near_neighbour_takes_mass() {
        let p = perplexity_calibration(&[1.0, 10.0], 1.2).unwrap();
        assert!(p[0] > 0.9);
        assert!((entropy_bits(&p) - 1.2f64.log2()).abs() < 1e-5);
        assert_abs_diff_eq!(p.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn invalid_perplexity() {
        assert!(perplexity_calibration(&[1.0, 2.0], 0.5).is_err());
        assert!(perplexity_calibration(&[1.0, 2.0], 3.0).is_err());
        assert!(matches!(
            perplexity_calibration(&[1.0, 1.0, 1.0], 2.0),
            Err(NldrError::PerplexityUnattainable { .. })
        ));
    }

    fn blobs() -> DistanceMatrix {
        let coords = DMatrix::from_fn(10, 4, |i, j| {
            let offset = if i < 5 { 0.0 } else { 20.0 };
            offset + ((i * 7 + j * 3) % 5) as f64 * 0.3
        });
        pairwise_distances(&coords, Metric::Euclidean).unwrap()
    }

    #[test]
    fn joint_probabilities_normalised() {
        let p = joint_probabilities(&blobs(), 3.0).unwrap();
        assert_abs_diff_eq!(p.iter().sum::<f64>(), 1.0, epsilon = 1e-10);
        for i in 0..10 {
            for j in 0..10 {
                assert_eq!(p[i * 10 + j], p[j * 10 + i]);
            }
        }
    }

    #[test]
    fn deterministic_and_separating() {
        let d = blobs();
        let a = tsne(&d, &TsneOptions::new(1), None).unwrap();
        let b = tsne(&d, &TsneOptions::new(1), None).unwrap();
        assert_eq!(a, b);
        assert!(a.y.iter().all(|v| v.is_finite()));
        assert!(a.params["kl_final"] <= a.params["kl_early"]);
    }

    #[test]
    fn order_invariant() {
        let d = blobs();
        let perm: Vec<usize> = vec![3, 7, 0, 9, 1, 5, 2, 8, 6, 4];
        let mut opts = TsneOptions::new(2);
        opts.iterations = 300;
        let base = tsne(&d, &opts, None).unwrap();
        opts.ids = Some(perm.iter().map(|&i| i as u64).collect());
        let permuted = tsne(&d.subset(&perm), &opts, None).unwrap();
        for (row, &orig) in perm.iter().enumerate() {
            assert_eq!(permuted.y.row(row), base.y.row(orig));
        }
    }

    #[test]
    fn too_small() {
        let d = pairwise_distances(&DMatrix::from_fn(3, 2, |i, j| (i + j) as f64), Metric::Euclidean).unwrap();
        assert!(matches!(tsne(&d, &TsneOptions::new(0), None), Err(NldrError::TooFewObservations { .. })));
    }
}
