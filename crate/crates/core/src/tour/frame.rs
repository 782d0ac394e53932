use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use super::TourError;

/// Orthonormality tolerance on `max |B'B - I|`.
pub const ORTHONORMAL_TOL: f64 = 1e-9;

/// A `p x d` basis with orthonormal columns.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionFrame {
    basis: DMatrix<f64>,
}

impl ProjectionFrame {
    /// Accepts an already orthonormal basis.
    pub fn new(basis: DMatrix<f64>) -> Result<Self, TourError> {
        let (p, d) = basis.shape();
        if d == 0 || d > p {
            return Err(TourError::InvalidDimension { p, d });
        }
        let frame = Self { basis };
        let err = frame.orthonormality_error();
        if err.is_nan() || err >= ORTHONORMAL_TOL {
            return Err(TourError::NotOrthonormal(err));
        }
        Ok(frame)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, TourError> {
        let p = rows.len();
        let d = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != d) {
            return Err(TourError::InvalidDocument("ragged frame rows".into()));
        }
        Self::new(DMatrix::from_fn(p, d, |i, j| rows[i][j]))
    }

    /// First `d` coordinate axes of `p`-space.
    pub fn axes(p: usize, d: usize) -> Result<Self, TourError> {
        if d == 0 || d > p {
            return Err(TourError::InvalidDimension { p, d });
        }
        Ok(Self {
            basis: DMatrix::identity(p, d),
        })
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn into_basis(self) -> DMatrix<f64> {
        self.basis
    }

    pub fn p(&self) -> usize {
        self.basis.nrows()
    }

    pub fn d(&self) -> usize {
        self.basis.ncols()
    }

    pub fn orthonormality_error(&self) -> f64 {
        let d = self.d();
        (self.basis.transpose() * &self.basis - DMatrix::<f64>::identity(d, d)).amax()
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.basis
            .row_iter()
            .map(|r| r.iter().copied().collect())
            .collect()
    }

    /// Euclidean norm of the loadings of variable `j` (0-based).
    pub fn loading(&self, j: usize) -> f64 {
        self.basis.row(j).norm()
    }
}

/// Gram–Schmidt orthonormalisation (two passes) of the columns of `m`.
pub fn orthonormalize(m: &DMatrix<f64>) -> Result<ProjectionFrame, TourError> {
    let (p, d) = m.shape();
    if d == 0 || d > p {
        return Err(TourError::InvalidDimension { p, d });
    }
    if m.iter().any(|x| !x.is_finite()) {
        return Err(TourError::RankDeficient);
    }
    let mut q = m.clone();
    for j in 0..d {
        let original = m.column(j).norm();
        for _pass in 0..2 {
            for i in 0..j {
                let proj = q.column(i).dot(&q.column(j));
                let qi = q.column(i).clone_owned();
                q.column_mut(j).axpy(-proj, &qi, 1.0);
            }
        }
        let norm = q.column(j).norm();
        if original == 0.0 || norm <= 1e-10 * original {
            return Err(TourError::RankDeficient);
        }
        q.column_mut(j).unscale_mut(norm);
    }
    Ok(ProjectionFrame { basis: q })
}

/// A frame drawn uniformly: a standard normal `p x d` matrix,
/// orthonormalised.
pub fn random_frame<R: Rng + ?Sized>(p: usize, d: usize, rng: &mut R) -> Result<ProjectionFrame, TourError> {
    if d == 0 || d > p {
        return Err(TourError::InvalidDimension { p, d });
    }
    loop {
        let m = DMatrix::from_fn(p, d, |_, _| rng.sample::<f64, _>(StandardNormal));
        match orthonormalize(&m) {
            Ok(f) => return Ok(f),
            Err(TourError::RankDeficient) => continue,
            Err(e) => return Err(e),
        }
    }
}

/// Projects the rows of `coords` onto `frame`.
pub fn project(coords: &DMatrix<f64>, frame: &ProjectionFrame) -> Result<DMatrix<f64>, TourError> {
    if coords.ncols() != frame.p() {
        return Err(TourError::DimensionMismatch {
            expected: frame.p(),
            found: coords.ncols(),
        });
    }
    Ok(coords * frame.basis())
}
