//! Coordinate transforms from raw variables to the representation used for
//! distances and displays.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::{DataError, VariableMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Space {
    Clustering,
    Linked,
}

impl Space {
    pub fn as_str(self) -> &'static str {
        match self {
            Space::Clustering => "clustering",
            Space::Linked => "linked",
        }
    }
}

/// Transformed coordinates of one space.
#[derive(Debug, Clone, PartialEq)]
pub struct CoordinateMatrix {
    pub values: DMatrix<f64>,
    pub names: Vec<String>,
    pub transform_id: String,
    pub space: Space,
}

impl CoordinateMatrix {
    pub fn nrows(&self) -> usize {
        self.values.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.values.ncols()
    }

    /// Wraps raw values without transformation.
    pub fn identity(m: &VariableMatrix, space: Space) -> Result<Self, DataError> {
        check_finite(m)?;
        Ok(Self {
            values: m.values.clone(),
            names: m.names.clone(),
            transform_id: "identity".into(),
            space,
        })
    }
}

fn check_finite(m: &VariableMatrix) -> Result<(), DataError> {
    for (j, name) in m.names.iter().enumerate() {
        if m.values.column(j).iter().any(|x| !x.is_finite()) {
            return Err(DataError::NonFiniteColumn(name.clone()));
        }
    }
    Ok(())
}

/// Column-wise centering (mean) and scaling (standard deviation, `n - 1`
/// denominator).
pub fn center_scale_coords(
    m: &VariableMatrix,
    center: bool,
    scale: bool,
    space: Space,
) -> Result<CoordinateMatrix, DataError> {
    check_finite(m)?;
    let n = m.nrows();
    let mut values = m.values.clone();
    for (j, name) in m.names.iter().enumerate() {
        let mut col = values.column_mut(j);
        let mean = col.sum() / n as f64;
        if scale {
            let ss: f64 = col.iter().map(|x| (x - mean).powi(2)).sum();
            let sd = if n > 1 { (ss / (n - 1) as f64).sqrt() } else { 0.0 };
            if sd == 0.0 || !sd.is_finite() {
                return Err(DataError::ConstantColumn(name.clone()));
            }
            if center {
                col.iter_mut().for_each(|x| *x = (*x - mean) / sd);
            } else {
                col.iter_mut().for_each(|x| *x /= sd);
            }
        } else if center {
            col.iter_mut().for_each(|x| *x -= mean);
        }
    }
    let transform_id = match (center, scale) {
        (true, true) => "center_scale",
        (true, false) => "center",
        (false, true) => "scale",
        (false, false) => "identity",
    };
    Ok(CoordinateMatrix {
        values,
        names: m.names.clone(),
        transform_id: transform_id.into(),
        space,
    })
}

/// Smallest eigenvalue must exceed this fraction of the largest.
pub const PD_TOLERANCE: f64 = 1e-10;

/// A validated covariance matrix with its reference point.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceSpec {
    matrix: DMatrix<f64>,
    reference: DVector<f64>,
    precision: DMatrix<f64>,
}

impl CovarianceSpec {
    pub fn new(matrix: DMatrix<f64>, reference: Vec<f64>) -> Result<Self, DataError> {
        let p = reference.len();
        if matrix.nrows() != p || matrix.ncols() != p {
            return Err(DataError::CovarianceShape {
                rows: matrix.nrows(),
                cols: matrix.ncols(),
                expected: p,
            });
        }
        if matrix.iter().any(|x| !x.is_finite()) {
            return Err(DataError::NotPositiveDefinite {
                min_eigenvalue: f64::NAN,
            });
        }
        if reference.iter().any(|x| !x.is_finite()) {
            return Err(DataError::NonFiniteValue(
                reference.iter().position(|x| !x.is_finite()).unwrap_or(0),
            ));
        }
        let scale = matrix.amax().max(f64::MIN_POSITIVE);
        if (&matrix - matrix.transpose()).amax() > 1e-9 * scale {
            return Err(DataError::NotSymmetric);
        }
        let sym = (&matrix + matrix.transpose()) * 0.5;
        let eig = SymmetricEigen::new(sym.clone());
        let min = eig.eigenvalues.min();
        let max = eig.eigenvalues.max();
        if max <= 0.0 || min <= PD_TOLERANCE * max {
            return Err(DataError::NotPositiveDefinite { min_eigenvalue: min });
        }
        let precision = sym
            .clone()
            .cholesky()
            .ok_or(DataError::NotPositiveDefinite { min_eigenvalue: min })?
            .inverse();
        // symmetrize away rounding in the inverse
        let precision = (&precision + precision.transpose()) * 0.5;
        Ok(Self {
            matrix: sym,
            reference: DVector::from_vec(reference),
            precision,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>], reference: Vec<f64>) -> Result<Self, DataError> {
        let p = rows.len();
        if rows.iter().any(|r| r.len() != p) {
            return Err(DataError::CovarianceShape {
                rows: p,
                cols: rows.first().map_or(0, Vec::len),
                expected: reference.len(),
            });
        }
        Self::new(DMatrix::from_fn(p, p, |i, j| rows[i][j]), reference)
    }

    pub fn dim(&self) -> usize {
        self.reference.len()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn reference(&self) -> &DVector<f64> {
        &self.reference
    }

    /// Inverse of the covariance matrix.
    pub fn precision(&self) -> &DMatrix<f64> {
        &self.precision
    }

    fn residuals(&self, m: &VariableMatrix) -> Result<DMatrix<f64>, DataError> {
        check_finite(m)?;
        if m.ncols() != self.dim() {
            return Err(DataError::LengthMismatch {
                expected: self.dim(),
                found: m.ncols(),
            });
        }
        let mut r = m.values.clone();
        for (j, mut col) in r.column_iter_mut().enumerate() {
            col.add_scalar_mut(-self.reference[j]);
        }
        Ok(r)
    }
}

/// Covariance-weighted residual coordinates.
///
/// Entry `(k, j)` is `sum_j' P[j][j'] (y[k][j'] - z[j']) / sqrt(P[j][j])`
/// with `P` the precision matrix and `z` the reference point, so that for
/// diagonal covariances the squared row norm is the chi-square of the row.
pub fn pull_coords(m: &VariableMatrix, cov: &CovarianceSpec) -> Result<CoordinateMatrix, DataError> {
    let r = cov.residuals(m)?;
    let p = cov.precision();
    let mut out = r * p.transpose();
    for (j, mut col) in out.column_iter_mut().enumerate() {
        col /= p[(j, j)].sqrt();
    }
    Ok(CoordinateMatrix {
        values: out,
        names: m.names.clone(),
        transform_id: "pull".into(),
        space: Space::Clustering,
    })
}

pub(crate) fn chi2_values(m: &VariableMatrix, cov: &CovarianceSpec) -> Result<Vec<f64>, DataError> {
    let r = cov.residuals(m)?;
    let weighted = &r * cov.precision();
    Ok((0..r.nrows())
        .map(|k| r.row(k).dot(&weighted.row(k)))
        .collect())
}
