//! Agglomerative clustering through the Lance–Williams recurrence.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::{ClusterError, DistanceMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Linkage {
    Single,
    Complete,
    Average,
    /// Ward's criterion in the `ward.D2` convention: updates act on squared
    /// distances and heights are reported on the distance scale.
    #[serde(alias = "ward.D2")]
    Ward,
}

impl Linkage {
    pub const ALL: [Linkage; 4] = [Linkage::Single, Linkage::Complete, Linkage::Average, Linkage::Ward];

    pub fn as_str(self) -> &'static str {
        match self {
            Linkage::Single => "single",
            Linkage::Complete => "complete",
            Linkage::Average => "average",
            Linkage::Ward => "ward",
        }
    }

    /// Dissimilarity between the union of clusters `i`, `j` and cluster `k`.
    #[inline]
    pub fn update(self, d_ik: f64, d_jk: f64, d_ij: f64, n_i: usize, n_j: usize, n_k: usize) -> f64 {
        match self {
            Linkage::Single => d_ik.min(d_jk),
            Linkage::Complete => d_ik.max(d_jk),
            Linkage::Average => {
                let (ni, nj) = (n_i as f64, n_j as f64);
                (ni * d_ik + nj * d_jk) / (ni + nj)
            }
            Linkage::Ward => {
                let (ni, nj, nk) = (n_i as f64, n_j as f64, n_k as f64);
                ((ni + nk) * d_ik + (nj + nk) * d_jk - nk * d_ij) / (ni + nj + nk)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    /// Smaller node id of the pair. Leaves are `1..=n`, the node created by
    /// merge `s` (0-based) is `n + 1 + s`.
    pub left: usize,
    pub right: usize,
    pub height: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergeTree {
    pub n: usize,
    pub merges: Vec<Merge>,
}

#[derive(Clone, Copy)]
struct Key {
    d: f64,
    lo: usize,
    hi: usize,
}

impl Key {
    fn new(d: f64, a: usize, b: usize) -> Self {
        Key {
            d,
            lo: a.min(b),
            hi: a.max(b),
        }
    }

    fn cmp(&self, other: &Key) -> Ordering {
        self.d
            .total_cmp(&other.d)
            .then(self.lo.cmp(&other.lo))
            .then(self.hi.cmp(&other.hi))
    }
}

struct Work {
    n: usize,
    d: Vec<f64>,
    id: Vec<usize>,
    size: Vec<usize>,
    active: Vec<bool>,
    nn: Vec<(usize, Key)>,
}

impl Work {
    fn key(&self, i: usize, j: usize) -> Key {
        Key::new(self.d[i * self.n + j], self.id[i], self.id[j])
    }

    fn nearest(&self, i: usize) -> (usize, Key) {
        let mut best: Option<(usize, Key)> = None;
        for j in (0..self.n).filter(|&j| j != i && self.active[j]) {
            let k = self.key(i, j);
            if best.as_ref().is_none_or(|(_, b)| k.cmp(b) == Ordering::Less) {
                best = Some((j, k));
            }
        }
        best.expect("at least two active clusters")
    }
}

/// Agglomerates `d` bottom-up.
///
/// At every step the pair with the smallest dissimilarity merges; exact
/// ties go to the pair with the smallest `(min id, max id)`. Each active
/// cluster caches its nearest neighbour, so a step costs O(n) unless the
/// merged clusters were somebody's nearest neighbour.
pub fn hclust(d: &DistanceMatrix, linkage: Linkage) -> Result<MergeTree, ClusterError> {
    let n = d.n();
    if n < 2 {
        return Err(ClusterError::TooFewObservations(n));
    }
    let mut dist = Vec::with_capacity(n * n);
    for i in 0..n {
        dist.extend(d.row(i).iter().map(|&x| if linkage == Linkage::Ward { x * x } else { x }));
    }
    let mut w = Work {
        n,
        d: dist,
        id: (1..=n).collect(),
        size: vec![1; n],
        active: vec![true; n],
        nn: Vec::with_capacity(n),
    };
    w.nn = (0..n).map(|i| w.nearest(i)).collect();

    let mut merges = Vec::with_capacity(n - 1);
    for step in 0..n - 1 {
        let a = (0..n)
            .filter(|&i| w.active[i])
            .min_by(|&x, &y| w.nn[x].1.cmp(&w.nn[y].1))
            .expect("active cluster");
        let b = w.nn[a].0;
        let d_ab = w.d[a * n + b];
        merges.push(Merge {
            left: w.id[a].min(w.id[b]),
            right: w.id[a].max(w.id[b]),
            height: if linkage == Linkage::Ward { d_ab.sqrt() } else { d_ab },
        });

        w.active[b] = false;
        for k in (0..n).filter(|&k| w.active[k] && k != a) {
            let v = linkage.update(
                w.d[a * n + k],
                w.d[b * n + k],
                d_ab,
                w.size[a],
                w.size[b],
                w.size[k],
            );
            w.d[a * n + k] = v;
            w.d[k * n + a] = v;
        }
        w.size[a] += w.size[b];
        w.id[a] = n + 1 + step;

        if step + 2 == n {
            break;
        }
        for k in (0..n).filter(|&k| w.active[k] && k != a) {
            let (nk, key) = w.nn[k];
            if nk == a || nk == b {
                w.nn[k] = w.nearest(k);
            } else {
                let cand = w.key(k, a);
                if cand.cmp(&key) == Ordering::Less {
                    w.nn[k] = (a, cand);
                }
            }
        }
        w.nn[a] = w.nearest(a);
    }
    Ok(MergeTree { n, merges })
}

/// Settings that produced a solution.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolutionSettings {
    pub metric_id: String,
    pub linkage_id: String,
    pub transform_id: String,
    pub k: usize,
}

/// A partition into `k` non-empty clusters labelled `1..=k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSolution {
    pub k: usize,
    pub cluster_of: Vec<usize>,
    pub settings: SolutionSettings,
}

impl ClusterSolution {
    /// Wraps arbitrary 1-based labels, e.g. external groups. Every label in
    /// `1..=max` must occur.
    pub fn from_labels(labels: Vec<usize>, settings: SolutionSettings) -> Result<Self, ClusterError> {
        let k = labels.iter().copied().max().unwrap_or(0);
        let mut seen = vec![false; k];
        for &l in &labels {
            if l == 0 {
                return Err(ClusterError::InvalidLabels);
            }
            seen[l - 1] = true;
        }
        if seen.iter().any(|s| !s) {
            return Err(ClusterError::InvalidLabels);
        }
        Ok(Self {
            k,
            cluster_of: labels,
            settings: SolutionSettings { k, ..settings },
        })
    }

    pub fn n(&self) -> usize {
        self.cluster_of.len()
    }

    /// 0-based member indices of each cluster, in observation order.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.k];
        for (i, &c) in self.cluster_of.iter().enumerate() {
            out[c - 1].push(i);
        }
        out
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.members().iter().map(Vec::len).collect()
    }
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Partition with `k` clusters: the tree with its `k - 1` last merges
/// undone. Labels follow first occurrence in observation order.
pub fn cut_tree(t: &MergeTree, k: usize) -> Result<Vec<usize>, ClusterError> {
    let n = t.n;
    if k == 0 || k > n {
        return Err(ClusterError::InvalidK { k, n });
    }
    // union-find over node ids 1..2n-1 (index 0 unused)
    let mut parent: Vec<usize> = (0..2 * n).collect();
    for (s, m) in t.merges.iter().take(n - k).enumerate() {
        let node = n + 1 + s;
        parent[m.left] = node;
        parent[m.right] = node;
    }
    let mut label_of_root = std::collections::HashMap::new();
    let mut labels = Vec::with_capacity(n);
    for leaf in 1..=n {
        let root = find(&mut parent, leaf);
        let next = label_of_root.len() + 1;
        labels.push(*label_of_root.entry(root).or_insert(next));
    }
    Ok(labels)
}

impl MergeTree {
    pub fn cut(&self, k: usize, settings: SolutionSettings) -> Result<ClusterSolution, ClusterError> {
        let cluster_of = cut_tree(self, k)?;
        Ok(ClusterSolution {
            k,
            cluster_of,
            settings: SolutionSettings { k, ..settings },
        })
    }

    pub fn heights(&self) -> Vec<f64> {
        self.merges.iter().map(|m| m.height).collect()
    }
}

/// Leaf ids (1-based) in left-to-right dendrogram order, visiting the child
/// with the lower node id first.
pub fn dendrogram_order(t: &MergeTree) -> Vec<usize> {
    let n = t.n;
    if t.merges.is_empty() {
        return (1..=n).collect();
    }
    let mut order = Vec::with_capacity(n);
    let mut stack = vec![n + t.merges.len()];
    while let Some(node) = stack.pop() {
        if node <= n {
            order.push(node);
        } else {
            let m = &t.merges[node - n - 1];
            stack.push(m.right);
            stack.push(m.left);
        }
    }
    order
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cluster::{pairwise_distances, Metric};
    use nalgebra::DMatrix;

    fn line(points: &[f64]) -> DistanceMatrix {
        let m = DMatrix::from_column_slice(points.len(), 1, points);
        pairwise_distances(&m, Metric::Euclidean).unwrap()
    }

    #[test]
    fn single_linkage_heights() {
        let t = hclust(&line(&[0.0, 1.0, 10.0]), Linkage::Single).unwrap();
        assert_eq!(t.heights(), vec![1.0, 9.0]);
        assert_eq!((t.merges[0].left, t.merges[0].right), (1, 2));
        assert_eq!((t.merges[1].left, t.merges[1].right), (3, 4));
    }

    #[test]
    fn average_linkage_heights() {
        let t = hclust(&line(&[0.0, 1.0, 10.0]), Linkage::Average).unwrap();
        assert_eq!(t.heights(), vec![1.0, 9.5]);
    }

    #[test]
    fn two_points() {
        let t = hclust(&line(&[2.0, 5.0]), Linkage::Ward).unwrap();
        assert_eq!(t.merges.len(), 1);
        assert_eq!(t.merges[0].height, 3.0);
    }

    #[test]
    fn ward_d2_heights_match_centroid_formula() {
        // merging {0,1} with {10}: sqrt(2 * n_a n_b / (n_a + n_b)) * |centroid gap|
        let t = hclust(&line(&[0.0, 1.0, 10.0]), Linkage::Ward).unwrap();
        let expected = (2.0 * 2.0 * 1.0 / 3.0f64).sqrt() * 9.5;
        assert!((t.merges[1].height - expected).abs() < 1e-12);
    }

    #[test]
    fn cuts() {
        let t = hclust(&line(&[0.0, 1.0, 10.0]), Linkage::Single).unwrap();
        assert_eq!(cut_tree(&t, 2).unwrap(), vec![1, 1, 2]);
        assert_eq!(cut_tree(&t, 1).unwrap(), vec![1, 1, 1]);
        assert_eq!(cut_tree(&t, 3).unwrap(), vec![1, 2, 3]);
        assert_eq!(cut_tree(&t, 0).unwrap_err(), ClusterError::InvalidK { k: 0, n: 3 });
        assert_eq!(cut_tree(&t, 4).unwrap_err(), ClusterError::InvalidK { k: 4, n: 3 });
    }

    #[test]
    fn labels_follow_first_occurrence() {
        let t = hclust(&line(&[10.0, 0.0, 11.0, 1.0]), Linkage::Complete).unwrap();
        assert_eq!(cut_tree(&t, 2).unwrap(), vec![1, 2, 1, 2]);
    }

    #[test]
    fn dendrogram_orders() {
        let t = hclust(&line(&[5.0, 6.0]), Linkage::Single).unwrap();
        assert_eq!(dendrogram_order(&t), vec![1, 2]);
        let t = hclust(&line(&[10.0, 0.0, 1.0]), Linkage::Single).unwrap();
        let order = dendrogram_order(&t);
        let pos = |leaf| order.iter().position(|&x| x == leaf).unwrap();
        assert_eq!(pos(2).abs_diff(pos(3)), 1);
        assert_eq!(order, vec![1, 2, 3]);
    }

    #[test]
    fn from_labels_requires_every_label() {
        let s = SolutionSettings {
            metric_id: "m".into(),
            linkage_id: "l".into(),
            transform_id: "t".into(),
            k: 0,
        };
        assert_eq!(
            ClusterSolution::from_labels(vec![1, 3], s.clone()).unwrap_err(),
            ClusterError::InvalidLabels
        );
        let sol = ClusterSolution::from_labels(vec![2, 1, 2], s).unwrap();
        assert_eq!(sol.k, 2);
        assert_eq!(sol.members(), vec![vec![1], vec![0, 2]]);
    }

    proptest::proptest! {
        #[test]
        fn nested_cuts_and_monotone_heights(
            pts in proptest::collection::vec(proptest::collection::vec(-5i32..5, 2), 2..25),
            li in 0usize..4,
        ) {
            let n = pts.len();
            let m = DMatrix::from_fn(n, 2, |i, j| pts[i][j] as f64);
            let d = pairwise_distances(&m, Metric::Euclidean).unwrap();
            let t = hclust(&d, Linkage::ALL[li]).unwrap();
            for w in t.merges.windows(2) {
                proptest::prop_assert!(w[0].height <= w[1].height + 1e-9);
            }
            let order = dendrogram_order(&t);
            let mut sorted = order.clone();
            sorted.sort();
            proptest::prop_assert_eq!(sorted, (1..=n).collect::<Vec<_>>());
            for k in 1..n {
                let coarse = cut_tree(&t, k).unwrap();
                let fine = cut_tree(&t, k + 1).unwrap();
                let mut parent = std::collections::HashMap::new();
                for i in 0..n {
                    let e = parent.entry(fine[i]).or_insert(coarse[i]);
                    proptest::prop_assert_eq!(*e, coarse[i]);
                }
            }
        }
    }
}
