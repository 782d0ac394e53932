//! Distances, hierarchical clustering and cluster summaries.

mod compare;
mod distance;
mod hclust;
mod hull;
mod stats;

pub use compare::{compare_solutions, ContingencyTable};
pub use distance::{pairwise_distances, DistanceMatrix, Metric};
pub use hclust::{
    cut_tree, dendrogram_order, hclust, ClusterSolution, Linkage, Merge, MergeTree, SolutionSettings,
};
pub use hull::{convex_hull_2d, hulls_by_label};
pub use stats::{
    benchmark_points, ch_index, cluster_diameter, cluster_radius, cluster_stats, distance_breakdown,
    min_benchmark_separation, silhouette, stats_sweep, ClusterStats, ClusterSummary, DistanceBreakdown,
    wb_ratio, Silhouette, SweepRow, BREAKDOWN_BINS, DEFAULT_K_MAX,
};

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum ClusterError {
    #[error("need at least 2 observations, got {0}")]
    TooFewObservations(usize),
    #[error("coordinates contain non-finite values")]
    NonFinite,
    #[error("number of clusters {k} is out of range for {n} observations")]
    InvalidK { k: usize, n: usize },
    #[error("expected {expected} observations, got {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("no pairs of observations share a cluster")]
    NoWithinPairs,
    #[error("need at least two clusters")]
    NoBetweenPairs,
    #[error("cluster {0} does not exist")]
    UnknownCluster(usize),
    #[error("cluster labels must cover 1..=k without gaps")]
    InvalidLabels,
    #[error("distance matrix is {rows}x{cols}, expected square")]
    NotSquare { rows: usize, cols: usize },
    #[error("distance matrix is not symmetric at ({i}, {j})")]
    NotSymmetric { i: usize, j: usize },
    #[error("distance matrix has a non-zero diagonal at row {0}")]
    NonZeroDiagonal(usize),
    #[error("negative distance at ({i}, {j})")]
    NegativeDistance { i: usize, j: usize },
    #[error("distance csv: {0}")]
    Csv(String),
}
