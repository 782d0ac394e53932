use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::SessionError;
use crate::cluster::{Linkage, Metric, DEFAULT_K_MAX};
use crate::data::{CovarianceSpec, RoleSpec, Space, SpacedDataset, MAX_GROUPS};
use crate::tour::{TourIndex, TourKind, DEFAULT_MAX_ITER, DEFAULT_N_BASES};

/// Coordinate transform of one space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TransformSpec {
    CenterScale { center: bool, scale: bool },
    Pull { covariance: Vec<Vec<f64>>, reference: Vec<f64> },
}

impl Default for TransformSpec {
    fn default() -> Self {
        TransformSpec::CenterScale {
            center: true,
            scale: true,
        }
    }
}

impl TransformSpec {
    pub fn covariance(&self) -> Result<Option<CovarianceSpec>, SessionError> {
        match self {
            TransformSpec::Pull { covariance, reference } => {
                Ok(Some(CovarianceSpec::from_rows(covariance, reference.clone())?))
            }
            TransformSpec::CenterScale { .. } => Ok(None),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpaceTransforms {
    pub clustering: TransformSpec,
    pub linked: TransformSpec,
}

impl SpaceTransforms {
    pub fn get(&self, space: Space) -> &TransformSpec {
        match space {
            Space::Clustering => &self.clustering,
            Space::Linked => &self.linked,
        }
    }
}

/// Where observation scores come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScoreSpec {
    /// Quadratic form under the pull covariance of `space`.
    Chi2 { space: Space },
    /// A numeric column that is in neither space.
    Column { column: String },
}

/// Labels that colour a view or drive the guided tour.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Coloring {
    #[default]
    Cluster,
    Group,
    Score,
    Bin,
}

/// The two side-by-side view slots of the workbench.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Panel {
    Left,
    Right,
}

impl Panel {
    pub fn other(self) -> Self {
        match self {
            Panel::Left => Panel::Right,
            Panel::Right => Panel::Left,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Panel::Left => "left",
            Panel::Right => "right",
        }
    }
}

impl std::str::FromStr for Panel {
    type Err = SessionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "left" => Ok(Panel::Left),
            "right" => Ok(Panel::Right),
            other => Err(SessionError::InvalidRequest(format!("unknown panel `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NldrSpec {
    pub space: Space,
    pub method: String,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NldrPanels {
    pub left: NldrSpec,
    pub right: NldrSpec,
}

impl Default for NldrPanels {
    fn default() -> Self {
        Self {
            left: NldrSpec {
                space: Space::Clustering,
                method: "tsne".into(),
                seed: default_seed(),
            },
            right: NldrSpec {
                space: Space::Linked,
                method: "tsne".into(),
                seed: default_seed(),
            },
        }
    }
}

impl NldrPanels {
    pub fn get(&self, panel: Panel) -> &NldrSpec {
        match panel {
            Panel::Left => &self.left,
            Panel::Right => &self.right,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TourSpec {
    pub space: Space,
    pub kind: TourKind,
    pub index: TourIndex,
    pub d: usize,
    pub seed: u64,
    pub n_bases: usize,
    pub max_iter: usize,
    /// Labels the guided tour separates.
    pub groups: Coloring,
    /// 1-based variable for radial tours.
    pub variable: usize,
    /// Starting frame (`p` rows of `d` values) for guided and radial tours.
    pub start: Option<Vec<Vec<f64>>>,
}

impl Default for TourSpec {
    fn default() -> Self {
        Self {
            space: Space::Clustering,
            kind: TourKind::Grand,
            index: TourIndex::Lda,
            d: 2,
            seed: default_seed(),
            n_bases: DEFAULT_N_BASES,
            max_iter: DEFAULT_MAX_ITER,
            groups: Coloring::Cluster,
            variable: 1,
            start: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolutionSpec {
    pub metric: Metric,
    pub linkage: Linkage,
    pub k: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComparisonSpec {
    pub a: SolutionSpec,
    pub b: SolutionSpec,
}

/// Every setting that determines the analysis results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisConfig {
    pub roles: RoleSpec,
    pub transforms: SpaceTransforms,
    pub metric: Metric,
    pub linkage: Linkage,
    pub k: usize,
    /// Linked-space variables on the overview scatter; the first two linked
    /// variables when absent.
    pub display: Option<[String; 2]>,
    pub score: Option<ScoreSpec>,
    pub n_bins: usize,
    pub hulls: bool,
    /// Cluster on the uploaded distance matrix instead of computed distances.
    pub precomputed_distances: bool,
    pub stats_k_max: usize,
    pub tour: TourSpec,
    pub nldr: NldrPanels,
    /// Second solution pair for the comparison tab; the current settings
    /// against `k + 1` when absent.
    pub comparison: Option<ComparisonSpec>,
}

fn default_seed() -> u64 {
    1
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            roles: RoleSpec::default(),
            transforms: SpaceTransforms::default(),
            metric: Metric::Euclidean,
            linkage: Linkage::Ward,
            k: 3,
            display: None,
            score: None,
            n_bins: 3,
            hulls: false,
            precomputed_distances: false,
            stats_k_max: DEFAULT_K_MAX,
            tour: TourSpec::default(),
            nldr: NldrPanels::default(),
            comparison: None,
        }
    }
}

impl AnalysisConfig {
    /// Key-sorted, pretty-printed JSON with a trailing newline.
    pub fn to_canonical_json(&self) -> String {
        canonical_json(self)
    }

    /// Parses a settings document, reporting the path of the offending
    /// field on schema errors.
    pub fn from_json(text: &str) -> Result<Self, SessionError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| SessionError::Schema {
            path: e.path().to_string(),
            message: e.inner().to_string(),
        })
    }

    pub fn from_value(value: serde_json::Value) -> Result<Self, SessionError> {
        serde_path_to_error::deserialize(value).map_err(|e| SessionError::Schema {
            path: e.path().to_string(),
            message: e.inner().to_string(),
        })
    }

    /// SHA-256 of the canonical document.
    pub fn hash(&self) -> String {
        settings_hash(self)
    }

    pub fn solution_spec(&self) -> SolutionSpec {
        SolutionSpec {
            metric: self.metric,
            linkage: self.linkage,
            k: self.k,
        }
    }

    /// The comparison pair, defaulting to the current settings against the
    /// next finer cut.
    pub fn comparison_pair(&self, n: usize) -> ComparisonSpec {
        self.comparison.unwrap_or_else(|| {
            let a = self.solution_spec();
            ComparisonSpec {
                a,
                b: SolutionSpec {
                    k: (a.k + 1).min(n.max(1)),
                    ..a
                },
            }
        })
    }

    /// The display pair, falling back to the first linked variables.
    pub fn display_pair(&self, data: &SpacedDataset) -> [String; 2] {
        if let Some(pair) = &self.display {
            return pair.clone();
        }
        let names = &data.linked.names;
        let second = names.get(1).unwrap_or(&names[0]);
        [names[0].clone(), second.clone()]
    }

    /// Checks the settings that do not need data.
    pub fn validate_static(&self) -> Result<(), SessionError> {
        let invalid = |m: String| Err(SessionError::InvalidConfig(m));
        if self.k == 0 {
            return invalid("k must be at least 1".into());
        }
        if self.n_bins < 2 {
            return invalid(format!("n_bins must be at least 2, got {}", self.n_bins));
        }
        if !(2..=3).contains(&self.tour.d) {
            return invalid(format!("tour dimension must be 2 or 3, got {}", self.tour.d));
        }
        self.tour.index.validate()?;
        if !self.tour.index.supports_dim(self.tour.d) {
            return invalid(format!("index {} is not defined in {} dimensions", self.tour.index.label(), self.tour.d));
        }
        if let Some(cmp) = &self.comparison {
            if cmp.a.k == 0 || cmp.b.k == 0 {
                return invalid("comparison k must be at least 1".into());
            }
        }
        Ok(())
    }

    /// Checks the settings against a dataset.
    pub fn validate(&self, data: &SpacedDataset, precomputed_n: Option<usize>) -> Result<(), SessionError> {
        self.validate_static()?;
        let n = data.n();
        let invalid = |m: String| Err(SessionError::InvalidConfig(m));
        if self.k > n {
            return invalid(format!("k = {} exceeds the {n} observations", self.k));
        }
        if let Some(cmp) = &self.comparison {
            if cmp.a.k > n || cmp.b.k > n {
                return invalid(format!("comparison k exceeds the {n} observations"));
            }
        }
        if let Some(pair) = &self.display {
            for v in pair {
                if data.linked.column_index(v).is_none() {
                    return Err(SessionError::Data(crate::data::DataError::UnknownVariable(v.clone())));
                }
            }
        }
        for space in [Space::Clustering, Space::Linked] {
            if let Some(cov) = self.transforms.get(space).covariance()? {
                let p = space_matrix(data, space).ncols();
                if cov.dim() != p {
                    return invalid(format!(
                        "{} covariance is {}x{} but the space has {p} variables",
                        space.as_str(),
                        cov.dim(),
                        cov.dim()
                    ));
                }
            }
        }
        match &self.score {
            Some(ScoreSpec::Chi2 { space }) => {
                if !matches!(self.transforms.get(*space), TransformSpec::Pull { .. }) {
                    return invalid(format!("chi2 score needs a pull transform on the {} space", space.as_str()));
                }
            }
            Some(ScoreSpec::Column { column }) => {
                if data.extras.column_index(column).is_none() {
                    return Err(SessionError::Data(crate::data::DataError::UnknownVariable(column.clone())));
                }
            }
            None => {}
        }
        if self.score.is_some() && self.n_bins > n {
            return invalid(format!("cannot split {n} observations into {} bins", self.n_bins));
        }
        if !data.flags.is_empty() {
            let groups = crate::data::cross_groups(&data.flags)?;
            if groups.n_groups() > MAX_GROUPS {
                return Err(SessionError::Data(crate::data::DataError::TooManyGroups(groups.n_groups())));
            }
        }
        if self.precomputed_distances {
            match precomputed_n {
                Some(m) if m == n => {}
                Some(m) => return invalid(format!("precomputed distances cover {m} observations, data has {n}")),
                None => return invalid("precomputed distances requested but none were uploaded".into()),
            }
        }
        Ok(())
    }

    /// `stats_k_max`, clamped so that every cut has a within pair.
    pub fn k_max(&self, n: usize) -> usize {
        self.stats_k_max.min(n.saturating_sub(1))
    }
}

pub(crate) fn space_matrix(data: &SpacedDataset, space: Space) -> &nalgebra::DMatrix<f64> {
    match space {
        Space::Clustering => &data.clustering.values,
        Space::Linked => &data.linked.values,
    }
}

/// Key-sorted, pretty-printed JSON with a trailing newline.
pub fn canonical_json<T: Serialize>(value: &T) -> String {
    // Value maps are ordered by key
    let v = serde_json::to_value(value).expect("settings serialize");
    let mut s = serde_json::to_string_pretty(&v).expect("settings serialize");
    s.push('\n');
    s
}

pub fn settings_hash<T: Serialize>(value: &T) -> String {
    hex::encode(Sha256::digest(canonical_json(value).as_bytes()))
}

/// JSON merge patch: objects merge recursively, `null` deletes, anything
/// else replaces.
pub fn merge_patch(target: &mut serde_json::Value, patch: &serde_json::Value) {
    use serde_json::Value;
    match patch {
        Value::Object(p) => {
            if !target.is_object() {
                *target = Value::Object(serde_json::Map::new());
            }
            let t = target.as_object_mut().expect("object");
            for (key, value) in p {
                if value.is_null() {
                    t.remove(key);
                } else {
                    merge_patch(t.entry(key.clone()).or_insert(Value::Null), value);
                }
            }
        }
        other => *target = other.clone(),
    }
}
