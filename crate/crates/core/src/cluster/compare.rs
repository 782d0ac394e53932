use serde::{Deserialize, Serialize};

use super::{ClusterError, ClusterSolution};

/// Shared-observation counts between two partitions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContingencyTable {
    /// `counts[i][j]`: observations in cluster `i + 1` of the first
    /// solution and cluster `j + 1` of the second.
    pub counts: Vec<Vec<usize>>,
}

impl ContingencyTable {
    pub fn row_sums(&self) -> Vec<usize> {
        self.counts.iter().map(|r| r.iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<usize> {
        let cols = self.counts.first().map_or(0, Vec::len);
        (0..cols).map(|j| self.counts.iter().map(|r| r[j]).sum()).collect()
    }

    /// Rows with more than one non-zero entry, i.e. clusters of the first
    /// solution that the second one splits.
    pub fn split_rows(&self) -> Vec<usize> {
        self.counts
            .iter()
            .enumerate()
            .filter(|(_, r)| r.iter().filter(|&&c| c > 0).count() > 1)
            .map(|(i, _)| i + 1)
            .collect()
    }
}

pub fn compare_solutions(a: &ClusterSolution, b: &ClusterSolution) -> Result<ContingencyTable, ClusterError> {
    if a.n() != b.n() {
        return Err(ClusterError::LengthMismatch {
            expected: a.n(),
            found: b.n(),
        });
    }
    let mut counts = vec![vec![0; b.k]; a.k];
    for (&x, &y) in a.cluster_of.iter().zip(&b.cluster_of) {
        counts[x - 1][y - 1] += 1;
    }
    Ok(ContingencyTable { counts })
}
