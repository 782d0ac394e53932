use std::sync::Arc;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize, Serializer};
use serde_json::json;

use super::cache::Cache;
use super::settings::{
    settings_hash, AnalysisConfig, Coloring, NldrSpec, ScoreSpec, SolutionSpec, TourSpec,
    TransformSpec,
};
use super::SessionError;
use crate::cluster::{
    benchmark_points, cluster_diameter, cluster_radius, cluster_stats, compare_solutions, dendrogram_order,
    distance_breakdown, hclust, hulls_by_label, pairwise_distances, stats_sweep, ClusterSolution, ContingencyTable,
    DistanceBreakdown, DistanceMatrix, Merge, MergeTree, Metric, SolutionSettings,
};
use crate::control::JobControl;
use crate::data::{
    center_scale_coords, chi2_score, cross_groups, external_score, pull_coords, quantile_bins, BinAssignment,
    CoordinateMatrix, GroupAssignment, ScoreVector, Space, SpacedDataset, VariableMatrix,
};
use crate::nldr::{Embedding, MethodInput, NldrRegistry};
use crate::tour::{
    grand_tour, guided_tour, project, radial_tour, random_frame, GuidedOptions, Grouping, ProjectionFrame,
    TourKind, TourPath, TourPathDocument,
};

/// Calinski–Harabasz value; a zero within-cluster spread is reported as
/// `"perfect"`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChIndex(pub f64);

impl Serialize for ChIndex {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if self.0 == f64::INFINITY {
            s.serialize_str("perfect")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DatasetSummary {
    pub n: usize,
    pub p_c: usize,
    pub p_l: usize,
    pub p_k: usize,
    pub n_groups: usize,
    pub clustering: Vec<String>,
    pub linked: Vec<String>,
    pub extras: Vec<String>,
    pub group_names: Vec<String>,
    pub has_labels: bool,
}

impl DatasetSummary {
    pub fn of(data: &SpacedDataset) -> Result<Self, SessionError> {
        let group_names = if data.flags.is_empty() {
            Vec::new()
        } else {
            cross_groups(&data.flags)?.group_names
        };
        Ok(Self {
            n: data.n(),
            p_c: data.clustering.ncols(),
            p_l: data.linked.ncols(),
            p_k: data.extras.ncols(),
            n_groups: group_names.len(),
            clustering: data.clustering.names.clone(),
            linked: data.linked.names.clone(),
            extras: data.extras.names.clone(),
            group_names,
            has_labels: data.labels.is_some(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HeatmapPayload {
    /// 1-based observation ids, top to bottom.
    pub order: Vec<usize>,
    pub variables: Vec<String>,
    /// Clustering-space coordinates of the rows in `order`.
    pub rows: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScatterPayload {
    pub x: String,
    pub y: String,
    pub points: Vec<[f64; 2]>,
    pub cluster: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub group: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub group_names: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub score: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bin: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OverviewPayload {
    pub settings: SolutionSettings,
    pub k: usize,
    pub heatmap: HeatmapPayload,
    pub merges: Vec<Merge>,
    pub scatter: ScatterPayload,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hulls: Option<Vec<Vec<[f64; 2]>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatsRow {
    pub k: usize,
    pub ch_index: ChIndex,
    pub wb_ratio: f64,
    pub avg_silhouette: f64,
    pub max_radius: f64,
    pub min_benchmark_separation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatsPayload {
    pub k_max: usize,
    pub rows: Vec<StatsRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchmarkRow {
    /// Cluster number or group name.
    pub label: String,
    /// 1-based cluster or group index.
    pub index: usize,
    /// 1-based observation id of the benchmark.
    pub id: usize,
    pub size: usize,
    pub radius: f64,
    pub diameter: f64,
    /// Raw linked-space values of the benchmark.
    pub coordinates: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchmarksPayload {
    pub variables: Vec<String>,
    pub clusters: Vec<BenchmarkRow>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub groups: Option<Vec<BenchmarkRow>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ch_index: Option<ChIndex>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wb_ratio: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub avg_silhouette: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_benchmark_separation: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoordinateViewOptions {
    pub center: bool,
    pub scale: bool,
    /// 1-based clusters left out of the parallel coordinates.
    pub hidden: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PcpRow {
    pub id: usize,
    pub cluster: usize,
    pub benchmark: bool,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PcpPayload {
    pub variables: Vec<String>,
    pub rows: Vec<PcpRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoordinateViewPayload {
    pub variable: String,
    /// The variable's clustering-space coordinate for every observation.
    pub gradient: Vec<f64>,
    pub x: String,
    pub y: String,
    pub points: Vec<[f64; 2]>,
    pub pcp: PcpPayload,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonPayload {
    pub a: OverviewPayload,
    pub b: OverviewPayload,
    pub table: ContingencyTable,
    /// Clusters of the first solution that the second one splits.
    pub split_rows: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TourPlot {
    pub space: Space,
    pub variables: Vec<String>,
    pub kind: TourKind,
    pub final_frame: Vec<Vec<f64>>,
    /// Observations projected on the final frame.
    pub projection: Vec<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_index: Option<f64>,
    pub path: TourPathDocument,
}

/// Results derived from one dataset under one configuration. Every layer is
/// looked up in the cache under the hash of the settings it depends on.
pub struct Analysis<'a> {
    pub data: &'a SpacedDataset,
    pub config: &'a AnalysisConfig,
    pub precomputed: Option<&'a DistanceMatrix>,
    /// Identifies the uploaded bytes, so keys never outlive the data.
    pub data_id: &'a str,
    pub cache: &'a Cache,
}

fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

impl<'a> Analysis<'a> {
    pub fn n(&self) -> usize {
        self.data.n()
    }

    fn raw(&self, space: Space) -> &VariableMatrix {
        match space {
            Space::Clustering => &self.data.clustering,
            Space::Linked => &self.data.linked,
        }
    }

    pub fn coords_key(&self, space: Space) -> String {
        settings_hash(&json!({
            "layer": "coordinates",
            "data": self.data_id,
            "roles": self.config.roles,
            "space": space,
            "transform": self.config.transforms.get(space),
        }))
    }

    pub fn distances_key(&self, space: Space, metric: Metric) -> String {
        if space == Space::Clustering && self.config.precomputed_distances {
            return settings_hash(&json!({"layer": "distances", "data": self.data_id, "precomputed": true}));
        }
        settings_hash(&json!({"layer": "distances", "coordinates": self.coords_key(space), "metric": metric}))
    }

    pub fn tree_key(&self, metric: Metric, linkage: crate::cluster::Linkage) -> String {
        settings_hash(&json!({
            "layer": "tree",
            "distances": self.distances_key(Space::Clustering, metric),
            "linkage": linkage,
        }))
    }

    pub fn embedding_key(&self, spec: &NldrSpec) -> String {
        settings_hash(&json!({
            "layer": "embedding",
            "distances": self.distances_key(spec.space, self.config.metric),
            "method": spec.method,
            "seed": spec.seed,
        }))
    }

    pub fn coords(&self, space: Space) -> Result<Arc<CoordinateMatrix>, SessionError> {
        self.cache.coords(&self.coords_key(space), || {
            let m = self.raw(space);
            let mut c = match self.config.transforms.get(space) {
                TransformSpec::CenterScale { center, scale } => center_scale_coords(m, *center, *scale, space)?,
                t @ TransformSpec::Pull { .. } => {
                    let cov = t.covariance()?.expect("pull transform has a covariance");
                    pull_coords(m, &cov)?
                }
            };
            c.space = space;
            Ok(c)
        })
    }

    pub fn distances(&self, space: Space, metric: Metric) -> Result<Arc<DistanceMatrix>, SessionError> {
        self.cache.distances(&self.distances_key(space, metric), || {
            if space == Space::Clustering && self.config.precomputed_distances {
                return self
                    .precomputed
                    .cloned()
                    .ok_or_else(|| SessionError::InvalidConfig("no precomputed distances uploaded".into()));
            }
            Ok(pairwise_distances(&self.coords(space)?.values, metric)?)
        })
    }

    pub fn tree(&self, metric: Metric, linkage: crate::cluster::Linkage) -> Result<Arc<MergeTree>, SessionError> {
        self.cache.tree(&self.tree_key(metric, linkage), || {
            Ok(hclust(&*self.distances(Space::Clustering, metric)?, linkage)?)
        })
    }

    pub fn solution_for(&self, spec: SolutionSpec) -> Result<ClusterSolution, SessionError> {
        let tree = self.tree(spec.metric, spec.linkage)?;
        let settings = SolutionSettings {
            metric_id: self.distances(Space::Clustering, spec.metric)?.metric_id().to_string(),
            linkage_id: spec.linkage.as_str().into(),
            transform_id: self.coords(Space::Clustering)?.transform_id.clone(),
            k: spec.k,
        };
        Ok(tree.cut(spec.k, settings)?)
    }

    pub fn solution(&self) -> Result<ClusterSolution, SessionError> {
        self.solution_for(self.config.solution_spec())
    }

    pub fn groups(&self) -> Result<Option<GroupAssignment>, SessionError> {
        if self.data.flags.is_empty() {
            return Ok(None);
        }
        Ok(Some(cross_groups(&self.data.flags)?))
    }

    pub fn score(&self) -> Result<Option<ScoreVector>, SessionError> {
        match &self.config.score {
            None => Ok(None),
            Some(ScoreSpec::Chi2 { space }) => {
                let cov = self.config.transforms.get(*space).covariance()?.ok_or_else(|| {
                    SessionError::InvalidConfig(format!("chi2 score needs a pull transform on the {} space", space.as_str()))
                })?;
                Ok(Some(chi2_score(self.raw(*space), &cov)?))
            }
            Some(ScoreSpec::Column { column }) => {
                let j = self
                    .data
                    .extras
                    .column_index(column)
                    .ok_or_else(|| crate::data::DataError::UnknownVariable(column.clone()))?;
                let values: Vec<f64> = self.data.extras.values.column(j).iter().copied().collect();
                Ok(Some(external_score(&values, column, self.n())?))
            }
        }
    }

    pub fn bins(&self) -> Result<Option<BinAssignment>, SessionError> {
        match self.score()? {
            Some(s) => Ok(Some(quantile_bins(&s, self.config.n_bins)?)),
            None => Ok(None),
        }
    }

    /// Class labels and class count for a categorical colouring.
    pub fn classes(&self, coloring: Coloring) -> Result<(Vec<usize>, usize), SessionError> {
        match coloring {
            Coloring::Cluster => {
                let sol = self.solution()?;
                Ok((sol.cluster_of, sol.k))
            }
            Coloring::Group => {
                let g = self
                    .groups()?
                    .ok_or_else(|| SessionError::InvalidConfig("no group flags configured".into()))?;
                let k = g.n_groups();
                Ok((g.group_of, k))
            }
            Coloring::Bin => {
                let b = self
                    .bins()?
                    .ok_or_else(|| SessionError::InvalidConfig("no score configured".into()))?;
                Ok((b.bin_of, b.n_bins))
            }
            Coloring::Score => Err(SessionError::InvalidConfig("scores are continuous, not classes".into())),
        }
    }

    fn display_points(&self) -> Result<(String, String, Vec<[f64; 2]>), SessionError> {
        let [x, y] = self.config.display_pair(self.data);
        let linked = self.coords(Space::Linked)?;
        let col = |name: &str| {
            linked
                .names
                .iter()
                .position(|v| v == name)
                .ok_or_else(|| SessionError::Data(crate::data::DataError::UnknownVariable(name.into())))
        };
        let (jx, jy) = (col(&x)?, col(&y)?);
        let points = (0..self.n())
            .map(|i| [linked.values[(i, jx)], linked.values[(i, jy)]])
            .collect();
        Ok((x, y, points))
    }

    pub fn overview_for(&self, spec: SolutionSpec) -> Result<OverviewPayload, SessionError> {
        let sol = self.solution_for(spec)?;
        let tree = self.tree(spec.metric, spec.linkage)?;
        let coords = self.coords(Space::Clustering)?;
        let order = dendrogram_order(&tree);
        let rows = order
            .iter()
            .map(|&id| coords.values.row(id - 1).iter().copied().collect())
            .collect();
        let (x, y, points) = self.display_points()?;
        let groups = self.groups()?;
        let score = self.score()?;
        let bins = self.bins()?;
        let hulls = self
            .config
            .hulls
            .then(|| hulls_by_label(&points, &sol.cluster_of, sol.k));
        Ok(OverviewPayload {
            settings: sol.settings.clone(),
            k: sol.k,
            heatmap: HeatmapPayload {
                order,
                variables: coords.names.clone(),
                rows,
            },
            merges: tree.merges.clone(),
            scatter: ScatterPayload {
                x,
                y,
                points,
                cluster: sol.cluster_of.clone(),
                group_names: groups.as_ref().map(|g| g.group_names.clone()).unwrap_or_default(),
                group: groups.map(|g| g.group_of),
                score: score.map(|s| s.values),
                bin: bins.map(|b| b.bin_of),
                labels: self.data.labels.clone(),
            },
            hulls,
        })
    }

    pub fn overview(&self) -> Result<OverviewPayload, SessionError> {
        self.overview_for(self.config.solution_spec())
    }

    pub fn stats(&self, k_max: Option<usize>) -> Result<StatsPayload, SessionError> {
        let k_max = k_max.unwrap_or(self.config.stats_k_max).min(self.n().saturating_sub(1));
        let tree = self.tree(self.config.metric, self.config.linkage)?;
        let d = self.distances(Space::Clustering, self.config.metric)?;
        let coords = self.coords(Space::Clustering)?;
        let rows = stats_sweep(&tree, &d, &coords.values, k_max)?
            .into_iter()
            .map(|r| StatsRow {
                k: r.k,
                ch_index: ChIndex(r.ch_index),
                wb_ratio: r.wb_ratio,
                avg_silhouette: r.avg_silhouette,
                max_radius: r.max_radius,
                min_benchmark_separation: r.min_benchmark_separation,
            })
            .collect();
        Ok(StatsPayload { k_max, rows })
    }

    fn benchmark_rows(
        &self,
        partition: &ClusterSolution,
        names: Option<&[String]>,
        d: &DistanceMatrix,
        score: Option<&ScoreVector>,
    ) -> Vec<BenchmarkRow> {
        let bench = benchmark_points(partition, d);
        let radius = cluster_radius(partition, d, &bench);
        let diameter = cluster_diameter(partition, d);
        let sizes = partition.sizes();
        (0..partition.k)
            .map(|c| BenchmarkRow {
                label: names.map_or_else(|| (c + 1).to_string(), |n| n[c].clone()),
                index: c + 1,
                id: bench[c] + 1,
                size: sizes[c],
                radius: radius[c],
                diameter: diameter[c],
                coordinates: self.data.linked.values.row(bench[c]).iter().copied().collect(),
                score: score.map(|s| s.values[bench[c]]),
            })
            .collect()
    }

    pub fn benchmarks(&self) -> Result<BenchmarksPayload, SessionError> {
        let sol = self.solution()?;
        let d = self.distances(Space::Clustering, self.config.metric)?;
        let coords = self.coords(Space::Clustering)?;
        let score = self.score()?;
        let stats = cluster_stats(&sol, &d, &coords.values, score.as_ref().map(|s| s.values.as_slice()))?;
        let clusters = self.benchmark_rows(&sol, None, &d, score.as_ref());
        let groups = match self.groups()? {
            Some(g) => {
                let part = ClusterSolution::from_labels(g.group_of.clone(), sol.settings.clone())?;
                Some(self.benchmark_rows(&part, Some(&g.group_names), &d, score.as_ref()))
            }
            None => None,
        };
        Ok(BenchmarksPayload {
            variables: self.data.linked.names.clone(),
            clusters,
            groups,
            ch_index: stats.ch_index.map(ChIndex),
            wb_ratio: stats.wb_ratio,
            avg_silhouette: stats.avg_silhouette,
            min_benchmark_separation: stats.min_benchmark_separation,
        })
    }

    pub fn coordinate_view(&self, variable: &str, opts: &CoordinateViewOptions) -> Result<CoordinateViewPayload, SessionError> {
        let coords = self.coords(Space::Clustering)?;
        let j = coords
            .names
            .iter()
            .position(|v| v == variable)
            .ok_or_else(|| SessionError::Data(crate::data::DataError::UnknownVariable(variable.into())))?;
        let sol = self.solution()?;
        let d = self.distances(Space::Clustering, self.config.metric)?;
        let bench = benchmark_points(&sol, &d);
        let (x, y, points) = self.display_points()?;
        let n = self.n();
        let mut shown = coords.values.clone();
        for mut col in shown.column_iter_mut() {
            let mean = col.mean();
            if opts.center {
                col.add_scalar_mut(-mean);
            }
            if opts.scale && n > 1 {
                let sd = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
                if sd > 0.0 {
                    col /= sd;
                }
            }
        }
        let rows = (0..n)
            .filter(|&i| !opts.hidden.contains(&sol.cluster_of[i]))
            .map(|i| PcpRow {
                id: i + 1,
                cluster: sol.cluster_of[i],
                benchmark: bench.contains(&i),
                values: shown.row(i).iter().copied().collect(),
            })
            .collect();
        Ok(CoordinateViewPayload {
            variable: variable.to_string(),
            gradient: coords.values.column(j).iter().copied().collect(),
            x,
            y,
            points,
            pcp: PcpPayload {
                variables: coords.names.clone(),
                rows,
            },
        })
    }

    pub fn breakdown(&self, cluster: usize) -> Result<DistanceBreakdown, SessionError> {
        let sol = self.solution()?;
        let d = self.distances(Space::Clustering, self.config.metric)?;
        Ok(distance_breakdown(&d, &sol, cluster)?)
    }

    pub fn comparison(&self) -> Result<ComparisonPayload, SessionError> {
        let pair = self.config.comparison_pair(self.n());
        let a = self.overview_for(pair.a)?;
        let b = self.overview_for(pair.b)?;
        let table = compare_solutions(&self.solution_for(pair.a)?, &self.solution_for(pair.b)?)?;
        let split_rows = table.split_rows();
        Ok(ComparisonPayload { a, b, table, split_rows })
    }

    /// Assignments table: `id,cluster,group,score,bin`, one row per
    /// observation, empty fields where not configured.
    pub fn assignments_csv(&self) -> Result<String, SessionError> {
        let sol = self.solution()?;
        let groups = self.groups()?;
        let score = self.score()?;
        let bins = self.bins()?;
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| SessionError::Io(e.to_string());
        w.write_record(["id", "cluster", "group", "score", "bin"]).map_err(io)?;
        for i in 0..self.n() {
            let group = groups
                .as_ref()
                .map(|g| g.group_names[g.group_of[i] - 1].clone())
                .unwrap_or_default();
            let s = score.as_ref().map(|s| s.values[i].to_string()).unwrap_or_default();
            let b = bins.as_ref().map(|b| b.bin_of[i].to_string()).unwrap_or_default();
            w.write_record([(i + 1).to_string(), sol.cluster_of[i].to_string(), group, s, b])
                .map_err(io)?;
        }
        let bytes = w.into_inner().map_err(|e| SessionError::Io(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn embedding(
        &self,
        spec: &NldrSpec,
        registry: &NldrRegistry,
        control: Option<&JobControl>,
    ) -> Result<Arc<Embedding>, SessionError> {
        if !registry.contains(&spec.method) {
            return Err(crate::nldr::NldrError::UnknownMethod {
                name: spec.method.clone(),
                available: registry.names(),
            }
            .into());
        }
        self.cache.embedding(&self.embedding_key(spec), || {
            let coords = self.coords(spec.space)?;
            let d = self.distances(spec.space, self.config.metric)?;
            let mut input = MethodInput::new(&coords.values, &d, spec.seed);
            input.control = control;
            Ok(registry.run(&spec.method, &input)?)
        })
    }

    pub fn tour(&self, spec: &TourSpec, control: Option<&JobControl>) -> Result<TourPath, SessionError> {
        let coords = self.coords(spec.space)?;
        let p = coords.ncols();
        let start = spec.start.as_ref().map(|rows| ProjectionFrame::from_rows(rows)).transpose()?;
        let path = match spec.kind {
            TourKind::Grand => grand_tour(p, spec.d, spec.n_bases, spec.seed)?,
            TourKind::Guided => {
                let (labels, k) = self.classes(spec.groups)?;
                let groups = Grouping::new(&labels, k)?;
                let opts = GuidedOptions {
                    index: spec.index,
                    d: spec.d,
                    seed: spec.seed,
                    max_iter: spec.max_iter,
                    start,
                };
                guided_tour(&coords.values, &groups, &opts, control)?
            }
            TourKind::Radial => {
                let start = match start {
                    Some(f) => f,
                    None => random_frame(p, spec.d, &mut ChaCha8Rng::seed_from_u64(spec.seed))?,
                };
                let mut path = radial_tour(&start, spec.variable)?;
                path.seed = spec.seed;
                path
            }
        };
        Ok(path)
    }

    pub fn tour_plot(&self, spec: &TourSpec, path: &TourPath) -> Result<TourPlot, SessionError> {
        let coords = self.coords(spec.space)?;
        let last = path.last_frame();
        let projection = project(&coords.values, last)?;
        Ok(TourPlot {
            space: spec.space,
            variables: coords.names.clone(),
            kind: path.kind,
            final_frame: last.rows(),
            projection: matrix_rows(&projection),
            final_index: path.index_trace.as_ref().and_then(|t| t.last().copied()),
            path: path.to_document(false),
        })
    }

}
