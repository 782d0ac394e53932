//! Linear projection tours: frames, geodesic interpolation, grand, guided
//! and radial paths, projection pursuit indices and slices.

mod frame;
mod geodesic;
mod index;
mod paths;
mod slice;

pub use frame::{orthonormalize, project, random_frame, ProjectionFrame, ORTHONORMAL_TOL};
pub use geodesic::{
    align_to, frame_distance, geodesic_interpolate, interpolate_chain, principal_angles, Geodesic, DEFAULT_STEP,
};
pub use index::{lda_index, pda_index, Grouping, IndexValue, ScatterMatrices, TourIndex};
pub use paths::{
    grand_tour, guided_tour, hold_frame, radial_tour, GuidedOptions, TourKind, TourPath, TourPathDocument,
    DEFAULT_MAX_ITER, DEFAULT_N_BASES, GUIDED_COOLING, GUIDED_INITIAL_ANGLE, GUIDED_RESTART_AFTER,
};
pub use slice::{slice_mask, SliceResult, SliceThickness, AUTO_SLICE_FRACTION};

/// Largest supported projection dimension.
pub const MAX_PROJECTION_DIM: usize = 3;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum TourError {
    #[error("matrix columns are linearly dependent")]
    RankDeficient,
    #[error("expected {expected} columns, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("frame shapes differ: {expected:?} vs {found:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("basis is not orthonormal (max deviation {0:e})")]
    NotOrthonormal(f64),
    #[error("cannot build a {d}-dimensional projection of {p} variables")]
    InvalidDimension { p: usize, d: usize },
    #[error("at least 2 groups are required, got {0}")]
    TooFewGroups(usize),
    #[error("group {0} is empty")]
    EmptyGroup(usize),
    #[error("group label {label} outside 1..={n_groups}")]
    LabelOutOfRange { label: usize, n_groups: usize },
    #[error("expected {expected} labels, got {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("position {position} outside 1..={len}")]
    PositionOutOfRange { position: usize, len: usize },
    #[error("variable {variable} outside 1..={p}")]
    InvalidVariable { variable: usize, p: usize },
    #[error("step must be positive, got {0}")]
    InvalidStep(f64),
    #[error("lambda must lie in [0, 1), got {0}")]
    InvalidLambda(f64),
    #[error("slice thickness must be positive, got {0}")]
    InvalidThickness(f64),
    #[error("coordinates contain non-finite values")]
    NonFinite,
    #[error("need at least one observation")]
    NoObservations,
    #[error("invalid tour document: {0}")]
    InvalidDocument(String),
    #[error("cancelled")]
    Cancelled,
}
