use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::frame::ProjectionFrame;
use super::TourError;
use crate::cluster::ClusterSolution;
use crate::data::GroupAssignment;

/// Below this normalised determinant the total scatter counts as singular.
const SINGULAR_TOL: f64 = 1e-12;

/// Validated 1-based group labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Grouping {
    labels: Vec<usize>,
    sizes: Vec<usize>,
}

impl Grouping {
    pub fn new(labels: &[usize], n_groups: usize) -> Result<Self, TourError> {
        if n_groups < 2 {
            return Err(TourError::TooFewGroups(n_groups));
        }
        let mut sizes = vec![0; n_groups];
        for &label in labels {
            if label == 0 || label > n_groups {
                return Err(TourError::LabelOutOfRange { label, n_groups });
            }
            sizes[label - 1] += 1;
        }
        if let Some(g) = sizes.iter().position(|&s| s == 0) {
            return Err(TourError::EmptyGroup(g + 1));
        }
        Ok(Self {
            labels: labels.to_vec(),
            sizes,
        })
    }

    /// Takes the number of groups from the largest label.
    pub fn from_labels(labels: &[usize]) -> Result<Self, TourError> {
        Self::new(labels, labels.iter().copied().max().unwrap_or(0))
    }

    pub fn from_clusters(sol: &ClusterSolution) -> Result<Self, TourError> {
        Self::new(&sol.cluster_of, sol.k)
    }

    pub fn from_groups(groups: &GroupAssignment) -> Result<Self, TourError> {
        Self::new(&groups.group_of, groups.n_groups())
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn n_groups(&self) -> usize {
        self.sizes.len()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IndexValue {
    pub value: f64,
    /// Set when the total scatter is singular and the value was forced to 0.
    pub degenerate: bool,
}

/// Projection pursuit index used by the guided tour.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "lowercase", deny_unknown_fields)]
pub enum TourIndex {
    Lda,
    Pda { lambda: f64 },
}

impl TourIndex {
    pub fn validate(&self) -> Result<(), TourError> {
        match *self {
            TourIndex::Lda => Ok(()),
            TourIndex::Pda { lambda } if (0.0..1.0).contains(&lambda) => Ok(()),
            TourIndex::Pda { lambda } => Err(TourError::InvalidLambda(lambda)),
        }
    }

    /// Whether the index has a definition for projections of dimension `d`.
    pub fn supports_dim(&self, d: usize) -> bool {
        (1..=3).contains(&d)
    }

    pub fn label(&self) -> String {
        match self {
            TourIndex::Lda => "lda".into(),
            TourIndex::Pda { lambda } => format!("pda({lambda})"),
        }
    }
}

/// Within-group and between-group scatter of a data matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ScatterMatrices {
    pub within: DMatrix<f64>,
    pub between: DMatrix<f64>,
    pub n: usize,
}

impl ScatterMatrices {
    pub fn new(data: &DMatrix<f64>, groups: &Grouping) -> Result<Self, TourError> {
        let (n, p) = data.shape();
        if groups.len() != n {
            return Err(TourError::LengthMismatch {
                expected: n,
                found: groups.len(),
            });
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(TourError::NonFinite);
        }
        let k = groups.n_groups();
        let mut means = vec![DVector::<f64>::zeros(p); k];
        for (i, &g) in groups.labels().iter().enumerate() {
            means[g - 1] += data.row(i).transpose();
        }
        for (m, &size) in means.iter_mut().zip(groups.sizes()) {
            *m /= size as f64;
        }
        let grand = data.row_sum().transpose() / n as f64;
        let mut within = DMatrix::zeros(p, p);
        for (i, &g) in groups.labels().iter().enumerate() {
            let r = data.row(i).transpose() - &means[g - 1];
            within.ger(1.0, &r, &r, 1.0);
        }
        let mut between = DMatrix::zeros(p, p);
        for (m, &size) in means.iter().zip(groups.sizes()) {
            let r = m - &grand;
            between.ger(size as f64, &r, &r, 1.0);
        }
        Ok(Self { within, between, n })
    }

    /// Scatter of the data projected onto `frame`.
    pub fn project(&self, frame: &ProjectionFrame) -> Self {
        let b = frame.basis();
        Self {
            within: b.transpose() * &self.within * b,
            between: b.transpose() * &self.between * b,
            n: self.n,
        }
    }

    pub fn lda(&self) -> IndexValue {
        self.pda(0.0)
    }

    /// `1 - |(1-λ)W + nλI| / |(1-λ)(W+B) + nλI|`; `λ = 0` is the LDA index.
    pub fn pda(&self, lambda: f64) -> IndexValue {
        let d = self.within.nrows();
        let ridge = DMatrix::<f64>::identity(d, d) * (self.n as f64 * lambda);
        let w = &self.within * (1.0 - lambda) + &ridge;
        let t = (&self.within + &self.between) * (1.0 - lambda) + &ridge;
        let det_t = t.determinant();
        let scale = (t.trace() / d as f64).powi(d as i32);
        if !(scale > 0.0) || !(det_t / scale >= SINGULAR_TOL) {
            return IndexValue {
                value: 0.0,
                degenerate: true,
            };
        }
        IndexValue {
            value: 1.0 - w.determinant() / det_t,
            degenerate: false,
        }
    }

    pub fn evaluate(&self, index: TourIndex) -> IndexValue {
        match index {
            TourIndex::Lda => self.lda(),
            TourIndex::Pda { lambda } => self.pda(lambda),
        }
    }
}

/// LDA index of already projected data.
pub fn lda_index(projected: &DMatrix<f64>, groups: &Grouping) -> Result<IndexValue, TourError> {
    Ok(ScatterMatrices::new(projected, groups)?.lda())
}

/// PDA index of already projected data, `lambda` in `[0, 1)`.
pub fn pda_index(projected: &DMatrix<f64>, groups: &Grouping, lambda: f64) -> Result<IndexValue, TourError> {
    TourIndex::Pda { lambda }.validate()?;
    Ok(ScatterMatrices::new(projected, groups)?.pda(lambda))
}
