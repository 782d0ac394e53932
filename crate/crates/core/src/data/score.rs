use super::transform::{chi2_values, CovarianceSpec};
use super::{DataError, VariableMatrix};

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreVector {
    pub name: String,
    pub values: Vec<f64>,
}

/// Quadratic-form score `(y - z)' Σ⁻¹ (y - z)` for every row.
pub fn chi2_score(m: &VariableMatrix, cov: &CovarianceSpec) -> Result<ScoreVector, DataError> {
    Ok(ScoreVector {
        name: "chi2".into(),
        values: chi2_values(m, cov)?,
    })
}

/// Wraps externally computed per-observation scores, such as model residuals.
pub fn external_score(values: &[f64], name: &str, n: usize) -> Result<ScoreVector, DataError> {
    if values.len() != n {
        return Err(DataError::LengthMismatch {
            expected: n,
            found: values.len(),
        });
    }
    if let Some(i) = values.iter().position(|x| !x.is_finite()) {
        return Err(DataError::NonFiniteValue(i));
    }
    Ok(ScoreVector {
        name: name.to_string(),
        values: values.to_vec(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BinAssignment {
    pub n_bins: usize,
    /// 1-based bin of each observation.
    pub bin_of: Vec<usize>,
    /// Upper boundaries of bins `1..`, strictly ascending. The last bin is
    /// unbounded above.
    pub boundaries: Vec<f64>,
}

/// Linear-interpolation quantile of sorted data.
fn quantile_sorted(sorted: &[f64], prob: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * prob;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Splits scores into `n_bins` quantile bins.
///
/// Coinciding boundaries are merged, so trailing bins can be empty when
/// scores are tied.
pub fn quantile_bins(s: &ScoreVector, n_bins: usize) -> Result<BinAssignment, DataError> {
    if n_bins < 2 {
        return Err(DataError::TooFewBins(n_bins));
    }
    let n = s.values.len();
    if n < n_bins {
        return Err(DataError::TooManyBins { n, n_bins });
    }
    let mut sorted = s.values.clone();
    sorted.sort_by(f64::total_cmp);
    let mut boundaries: Vec<f64> = (1..n_bins)
        .map(|i| quantile_sorted(&sorted, i as f64 / n_bins as f64))
        .collect();
    boundaries.dedup();
    let bin_of = s
        .values
        .iter()
        .map(|&x| boundaries.partition_point(|&b| b < x) + 1)
        .collect();
    Ok(BinAssignment {
        n_bins,
        bin_of,
        boundaries,
    })
}
