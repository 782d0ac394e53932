//! Tabular input, variable roles and coordinate representations.
//!
//! A [`Dataset`] is the raw table. [`assign_roles`] splits it into the
//! clustering space, the linked space and the extras, imputing missing
//! numeric cells on the way. The transforms in [`transform`] turn a raw
//! [`VariableMatrix`] into the [`CoordinateMatrix`] that distances, tours
//! and embeddings consume.

mod groups;
mod roles;
mod score;
mod table;
pub mod transform;

pub use groups::{cross_groups, FlagColumn, GroupAssignment, MAX_GROUPS};
pub use roles::{assign_roles, impute_missing, RoleSpec, SpacedDataset};
pub use score::{chi2_score, external_score, quantile_bins, BinAssignment, ScoreVector};
pub use table::{Column, ColumnData, Dataset};
pub use transform::{center_scale_coords, pull_coords, CoordinateMatrix, CovarianceSpec, Space};

use nalgebra::DMatrix;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum DataError {
    #[error("csv: {0}")]
    Csv(String),
    #[error("input has no header row")]
    MissingHeader,
    #[error("input has no data rows")]
    NoRows,
    #[error("row {row} has {found} fields, expected {expected}")]
    Ragged {
        row: usize,
        found: usize,
        expected: usize,
    },
    #[error("duplicate column name `{0}`")]
    DuplicateColumn(String),
    #[error("column `{name}` has {found} values, expected {expected}")]
    ColumnLength {
        name: String,
        found: usize,
        expected: usize,
    },
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("variable `{0}` is not numeric")]
    NotNumeric(String),
    #[error("variable `{0}` is assigned to both the clustering and the linked space")]
    OverlappingRoles(String),
    #[error("variable `{0}` is listed twice")]
    RepeatedVariable(String),
    #[error("the {0} space has no variables")]
    EmptySpace(&'static str),
    #[error("column `{0}` has no non-missing values")]
    AllMissing(String),
    #[error("column `{0}` is constant and cannot be scaled")]
    ConstantColumn(String),
    #[error("column `{0}` contains non-finite values")]
    NonFiniteColumn(String),
    #[error("covariance matrix must be square with size {expected}, got {rows}x{cols}")]
    CovarianceShape {
        rows: usize,
        cols: usize,
        expected: usize,
    },
    #[error("covariance matrix is not symmetric")]
    NotSymmetric,
    #[error("covariance matrix is singular or not positive definite (smallest eigenvalue {min_eigenvalue:e})")]
    NotPositiveDefinite { min_eigenvalue: f64 },
    #[error("expected {expected} values, got {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("value at index {0} is not finite")]
    NonFiniteValue(usize),
    #[error("at least 2 bins are required, got {0}")]
    TooFewBins(usize),
    #[error("cannot split {n} observations into {n_bins} bins")]
    TooManyBins { n: usize, n_bins: usize },
    #[error("no grouping flags given")]
    NoFlags,
    #[error("{0} distinct groups exceed the display limit of 13")]
    TooManyGroups(usize),
}

/// A numeric matrix with one named column per variable.
///
/// Missing cells are stored as `NaN` until [`impute_missing`] fills them.
#[derive(Debug, Clone, PartialEq)]
pub struct VariableMatrix {
    pub names: Vec<String>,
    pub values: DMatrix<f64>,
}

impl VariableMatrix {
    pub fn new(names: Vec<String>, values: DMatrix<f64>) -> Result<Self, DataError> {
        if names.len() != values.ncols() {
            return Err(DataError::LengthMismatch {
                expected: values.ncols(),
                found: names.len(),
            });
        }
        Ok(Self { names, values })
    }

    /// Builds a matrix from rows, naming columns `V1..Vp`.
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let n = rows.len();
        let p = rows.first().map_or(0, Vec::len);
        let values = DMatrix::from_fn(n, p, |i, j| rows[i][j]);
        let names = (1..=p).map(|j| format!("V{j}")).collect();
        Self { names, values }
    }

    pub fn nrows(&self) -> usize {
        self.values.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.values.ncols()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }
}
