use nalgebra::{DMatrix, SymmetricEigen};

use super::{Embedding, NldrError};
use crate::cluster::DistanceMatrix;

/// Classical metric scaling into two dimensions.
///
/// Coordinates are the top two eigenvectors of `-1/2 J D² J` scaled by the
/// square roots of their eigenvalues. Negative eigenvalues are clipped to
/// zero, and the embedding is flagged degenerate when fewer than two
/// eigenvalues are positive.
pub fn classical_mds(d: &DistanceMatrix) -> Result<Embedding, NldrError> {
    let n = d.n();
    if n < 3 {
        return Err(NldrError::TooFewObservations { n, min: 3 });
    }
    let sq = DMatrix::from_fn(n, n, |i, j| d.get(i, j) * d.get(i, j));
    let row_means: Vec<f64> = (0..n).map(|i| sq.row(i).sum() / n as f64).collect();
    let grand = row_means.iter().sum::<f64>() / n as f64;
    let gram = DMatrix::from_fn(n, n, |i, j| -0.5 * (sq[(i, j)] - row_means[i] - row_means[j] + grand));
    let eig = SymmetricEigen::new(gram);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let top = eig.eigenvalues[order[0]].abs().max(eig.eigenvalues.amax());
    let tol = 1e-10 * top.max(f64::MIN_POSITIVE);

    let mut y = DMatrix::zeros(n, 2);
    let mut positive = 0;
    for (col, &k) in order.iter().take(2).enumerate() {
        let lambda = eig.eigenvalues[k];
        if lambda <= tol {
            continue;
        }
        positive += 1;
        let v = eig.eigenvectors.column(k);
        // sign convention: largest-magnitude entry positive
        let pivot = v.iter().copied().fold(0.0_f64, |m, x| if x.abs() > m.abs() + 1e-12 { x } else { m });
        let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
        let scale = sign * lambda.sqrt();
        for i in 0..n {
            y[(i, col)] = v[i] * scale;
        }
    }
    let mut emb = Embedding::new("mds", y, 0);
    emb.degenerate = positive < 2;
    Ok(emb)
}
