use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ClusterError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Euclidean,
    Manhattan,
    Maximum,
}

impl Metric {
    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Euclidean => "euclidean",
            Metric::Manhattan => "manhattan",
            Metric::Maximum => "maximum",
        }
    }

    fn eval(self, a: impl Iterator<Item = f64>, b: impl Iterator<Item = f64>) -> f64 {
        let diffs = a.zip(b).map(|(x, y)| (x - y).abs());
        match self {
            Metric::Euclidean => diffs.map(|d| d * d).sum::<f64>().sqrt(),
            Metric::Manhattan => diffs.sum(),
            Metric::Maximum => diffs.fold(0.0, f64::max),
        }
    }
}

/// Full symmetric matrix of pairwise distances.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    values: Vec<f64>,
    metric_id: String,
}

impl DistanceMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n..(i + 1) * self.n]
    }

    pub fn metric_id(&self) -> &str {
        &self.metric_id
    }

    /// Largest entry, 0 for a single observation.
    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// Accepts a user-supplied matrix: symmetric within 1e-9, zero diagonal
    /// within 1e-12, finite and non-negative.
    pub fn from_precomputed(m: &DMatrix<f64>) -> Result<Self, ClusterError> {
        let n = m.nrows();
        if m.ncols() != n {
            return Err(ClusterError::NotSquare {
                rows: n,
                cols: m.ncols(),
            });
        }
        let mut values = vec![0.0; n * n];
        for i in 0..n {
            if m[(i, i)].abs() > 1e-12 {
                return Err(ClusterError::NonZeroDiagonal(i + 1));
            }
            for j in 0..n {
                let x = m[(i, j)];
                if !x.is_finite() {
                    return Err(ClusterError::NonFinite);
                }
                if x < 0.0 {
                    return Err(ClusterError::NegativeDistance { i: i + 1, j: j + 1 });
                }
                if (x - m[(j, i)]).abs() > 1e-9 {
                    return Err(ClusterError::NotSymmetric { i: i + 1, j: j + 1 });
                }
                if i != j {
                    values[i * n + j] = 0.5 * (x + m[(j, i)]);
                }
            }
        }
        Ok(Self {
            n,
            values,
            metric_id: "precomputed".into(),
        })
    }

    /// Parses a headerless n×n CSV distance matrix.
    pub fn from_csv(raw: &[u8]) -> Result<Self, ClusterError> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_reader(raw);
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for record in reader.records() {
            let record = record.map_err(|e| ClusterError::Csv(e.to_string()))?;
            let row = record
                .iter()
                .map(|c| c.parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| ClusterError::Csv(format!("row {}: {e}", rows.len() + 1)))?;
            rows.push(row);
        }
        let n = rows.len();
        if let Some(r) = rows.iter().find(|r| r.len() != n) {
            return Err(ClusterError::NotSquare { rows: n, cols: r.len() });
        }
        Self::from_precomputed(&DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n, self.n, &self.values)
    }

    /// Distances among a subset of observations, in the given order.
    pub fn subset(&self, idx: &[usize]) -> Self {
        let m = idx.len();
        let mut values = vec![0.0; m * m];
        for (a, &i) in idx.iter().enumerate() {
            for (b, &j) in idx.iter().enumerate() {
                values[a * m + b] = self.get(i, j);
            }
        }
        Self {
            n: m,
            values,
            metric_id: self.metric_id.clone(),
        }
    }
}

/// Distances between the rows of `coords`.
pub fn pairwise_distances(coords: &DMatrix<f64>, metric: Metric) -> Result<DistanceMatrix, ClusterError> {
    let n = coords.nrows();
    if n < 2 {
        return Err(ClusterError::TooFewObservations(n));
    }
    if coords.iter().any(|x| !x.is_finite()) {
        return Err(ClusterError::NonFinite);
    }
    // row-major copy so each row is contiguous
    let p = coords.ncols();
    let rows: Vec<f64> = (0..n).flat_map(|i| coords.row(i).iter().copied().collect::<Vec<_>>()).collect();
    let mut values = vec![0.0; n * n];
    values.par_chunks_mut(n).enumerate().for_each(|(i, out)| {
        let a = &rows[i * p..(i + 1) * p];
        for (j, slot) in out.iter_mut().enumerate() {
            if i != j {
                let b = &rows[j * p..(j + 1) * p];
                *slot = metric.eval(a.iter().copied(), b.iter().copied());
            }
        }
    });
    // enforce exact symmetry
    for i in 0..n {
        for j in (i + 1)..n {
            values[j * n + i] = values[i * n + j];
        }
    }
    Ok(DistanceMatrix {
        n,
        values,
        metric_id: metric.as_str().into(),
    })
}
