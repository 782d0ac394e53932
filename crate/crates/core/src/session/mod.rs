//! Analysis sessions: uploaded data, settings, cached results, background
//! jobs, the shared selection and exports.

mod analysis;
mod cache;
mod export;
mod jobs;
mod selection;
mod settings;

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex, RwLock};
use std::thread;
use std::time::Duration;

use serde::Serialize;
use serde_json::json;

pub use analysis::{
    Analysis, BenchmarkRow, BenchmarksPayload, ChIndex, ComparisonPayload, CoordinateViewOptions,
    CoordinateViewPayload, DatasetSummary, HeatmapPayload, OverviewPayload, PcpPayload, PcpRow, ScatterPayload,
    StatsPayload, StatsRow, TourPlot,
};
pub use cache::{Cache, CacheEntry};
pub use export::{build_bundle, headless_run, ExportBundle};
pub use jobs::{Job, JobKind, JobOutput, JobState, JobStatus, JobTable};
pub use selection::{EventHub, SelectionState, SessionEvent, Subscription};
pub use settings::{
    canonical_json, merge_patch, settings_hash, AnalysisConfig, Coloring, ComparisonSpec, NldrPanels, NldrSpec,
    Panel, ScoreSpec, SolutionSpec, SpaceTransforms, TourSpec, TransformSpec,
};

use crate::cluster::{ClusterError, DistanceBreakdown, DistanceMatrix};
use crate::data::{assign_roles, DataError, Dataset, RoleSpec, Space, SpacedDataset};
use crate::nldr::{NldrError, NldrRegistry};
use crate::tour::{hold_frame, project, slice_mask, SliceResult, SliceThickness, TourError, TourKind, TourPath, TourPathDocument};

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum SessionError {
    #[error("unknown session `{0}`")]
    UnknownSession(String),
    #[error("no data uploaded")]
    NoData,
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Cluster(#[from] ClusterError),
    #[error(transparent)]
    Tour(#[from] TourError),
    #[error(transparent)]
    Nldr(#[from] NldrError),
    #[error("settings: {message} at `{path}`")]
    Schema { path: String, message: String },
    #[error("invalid settings: {0}")]
    InvalidConfig(String),
    #[error("{0}")]
    InvalidRequest(String),
    #[error("observation id {id} outside 1..={n}")]
    InvalidSelection { id: usize, n: usize },
    #[error("unknown job `{0}`")]
    UnknownJob(String),
    #[error("no tour on the {0} panel")]
    NoTour(&'static str),
    #[error("io: {0}")]
    Io(String),
}

impl SessionError {
    pub fn is_cancelled(&self) -> bool {
        matches!(self, SessionError::Nldr(NldrError::Cancelled) | SessionError::Tour(TourError::Cancelled))
    }
}

/// Layers whose cache keys changed or survived a settings update.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RecomputePlan {
    pub revision: u64,
    pub invalidated: Vec<String>,
    pub reused: Vec<String>,
    /// Panels whose tour was built under settings that no longer hold.
    pub tours_stale: Vec<Panel>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ColorPayload {
    /// 1-based classes.
    Classes { labels: Vec<usize>, n: usize },
    Gradient { values: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TourPanelPayload {
    pub panel: Panel,
    pub space: Space,
    pub variables: Vec<String>,
    /// Transformed observations, to be multiplied by each frame.
    pub data: Vec<Vec<f64>>,
    pub coloring: Coloring,
    pub colors: ColorPayload,
    pub path: TourPathDocument,
    pub stale: bool,
    /// 1-based held position.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub held: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HeldFrame {
    pub position: usize,
    pub frame: Vec<Vec<f64>>,
    pub projection: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
struct PanelTour {
    path: Arc<TourPath>,
    space: Space,
    coloring: Coloring,
    /// Coordinates key plus the class key for guided paths at build time.
    built_under: String,
    stale: bool,
    held: Option<usize>,
}

#[derive(Debug, Clone)]
struct Loaded {
    raw: Arc<Dataset>,
    data: Arc<SpacedDataset>,
    data_id: String,
}

#[derive(Debug)]
struct State {
    loaded: Option<Loaded>,
    /// Uploaded distances and the hash of their bytes.
    precomputed: Option<(Arc<DistanceMatrix>, String)>,
    config: Arc<AnalysisConfig>,
    revision: u64,
    selection: SelectionState,
    tours: HashMap<Panel, PanelTour>,
}

/// An immutable view of a session that computations run against.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub data: Arc<SpacedDataset>,
    pub config: Arc<AnalysisConfig>,
    pub precomputed: Option<Arc<DistanceMatrix>>,
    pub data_id: String,
    cache: Arc<Cache>,
}

impl State {
    /// Identifies the uploaded bytes, data and distances together.
    fn data_key(&self) -> Option<String> {
        let loaded = self.loaded.as_ref()?;
        Some(match &self.precomputed {
            Some((_, d)) => export::data_id(format!("{}:{d}", loaded.data_id).as_bytes()),
            None => loaded.data_id.clone(),
        })
    }

    fn distances(&self) -> Option<&DistanceMatrix> {
        self.precomputed.as_ref().map(|(d, _)| &**d)
    }
}

impl Snapshot {
    pub fn analysis(&self) -> Analysis<'_> {
        Analysis {
            data: &self.data,
            config: &self.config,
            precomputed: self.precomputed.as_deref(),
            data_id: &self.data_id,
            cache: &self.cache,
        }
    }
}

fn tour_key(a: &Analysis<'_>, space: Space, kind: TourKind, coloring: Coloring) -> String {
    let classes = (kind == TourKind::Guided).then(|| class_key(a, coloring));
    settings_hash(&json!({"coordinates": a.coords_key(space), "classes": classes}))
}

fn class_key(a: &Analysis<'_>, coloring: Coloring) -> String {
    let c = a.config;
    match coloring {
        Coloring::Cluster => settings_hash(&json!({"tree": a.tree_key(c.metric, c.linkage), "k": c.k})),
        Coloring::Group => settings_hash(&json!({"data": a.data_id, "roles": c.roles})),
        Coloring::Score | Coloring::Bin => settings_hash(&json!({
            "data": a.data_id, "roles": c.roles, "score": c.score, "n_bins": c.n_bins, "transforms": c.transforms,
        })),
    }
}

fn layer_keys(a: &Analysis<'_>) -> BTreeMap<String, String> {
    let c = a.config;
    let mut keys = BTreeMap::new();
    keys.insert("coordinates.clustering".into(), a.coords_key(Space::Clustering));
    keys.insert("coordinates.linked".into(), a.coords_key(Space::Linked));
    keys.insert("distances".into(), a.distances_key(Space::Clustering, c.metric));
    keys.insert("tree".into(), a.tree_key(c.metric, c.linkage));
    keys.insert("solution".into(), class_key(a, Coloring::Cluster));
    keys.insert("scores".into(), class_key(a, Coloring::Score));
    keys.insert(
        "comparison".into(),
        settings_hash(&json!({"tree": a.tree_key(c.metric, c.linkage), "pair": c.comparison_pair(a.n())})),
    );
    for panel in [Panel::Left, Panel::Right] {
        keys.insert(format!("embedding.{}", panel.as_str()), a.embedding_key(c.nldr.get(panel)));
    }
    keys
}

/// One analyst's state. Mutations are serialized by an internal lock; reads
/// and jobs work on snapshots.
pub struct Session {
    pub id: String,
    state: Mutex<State>,
    cache: Arc<Cache>,
    jobs: JobTable,
    events: EventHub,
    registry: Arc<NldrRegistry>,
}

impl std::fmt::Debug for Session {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Session").field("id", &self.id).finish_non_exhaustive()
    }
}

impl Session {
    pub fn new(id: String, registry: Arc<NldrRegistry>) -> Self {
        Self {
            id,
            state: Mutex::new(State {
                loaded: None,
                precomputed: None,
                config: Arc::new(AnalysisConfig::default()),
                revision: 0,
                selection: SelectionState::default(),
                tours: HashMap::new(),
            }),
            cache: Arc::new(Cache::new()),
            jobs: JobTable::default(),
            events: EventHub::default(),
            registry,
        }
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, State> {
        self.state.lock().expect("session lock")
    }

    pub fn revision(&self) -> u64 {
        self.lock().revision
    }

    pub fn config(&self) -> Arc<AnalysisConfig> {
        self.lock().config.clone()
    }

    pub fn cache(&self) -> &Cache {
        &self.cache
    }

    pub fn registry(&self) -> &NldrRegistry {
        &self.registry
    }

    pub fn snapshot(&self) -> Result<Snapshot, SessionError> {
        let st = self.lock();
        let loaded = st.loaded.as_ref().ok_or(SessionError::NoData)?;
        Ok(Snapshot {
            data: loaded.data.clone(),
            config: st.config.clone(),
            precomputed: st.precomputed.as_ref().map(|(d, _)| d.clone()),
            data_id: st.data_key().expect("data loaded"),
            cache: self.cache.clone(),
        })
    }

    /// Parses and splits a CSV upload. `roles` replaces the configured
    /// roles when given. The previous data, results, tours and selection are
    /// discarded.
    pub fn upload_data(&self, csv: &[u8], roles: Option<RoleSpec>) -> Result<DatasetSummary, SessionError> {
        let raw = Dataset::parse_csv(csv)?;
        let mut st = self.lock();
        let mut config = (*st.config).clone();
        if let Some(r) = roles {
            config.roles = r;
        }
        let data = assign_roles(&raw, &config.roles)?;
        let precomputed_n = st.distances().map(DistanceMatrix::n);
        config.validate(&data, precomputed_n)?;
        let summary = DatasetSummary::of(&data)?;
        self.jobs.cancel_all();
        self.cache.clear();
        st.loaded = Some(Loaded {
            raw: Arc::new(raw),
            data: Arc::new(data),
            data_id: export::data_id(csv),
        });
        st.config = Arc::new(config);
        st.tours.clear();
        st.revision += 1;
        self.clear_selection_locked(&mut st);
        Ok(summary)
    }

    /// Stores a precomputed dissimilarity matrix for
    /// `precomputed_distances`.
    pub fn upload_distances(&self, csv: &[u8]) -> Result<usize, SessionError> {
        let d = DistanceMatrix::from_csv(csv)?;
        let mut st = self.lock();
        if let Some(loaded) = &st.loaded {
            if loaded.data.n() != d.n() {
                return Err(SessionError::InvalidRequest(format!(
                    "distances cover {} observations, data has {}",
                    d.n(),
                    loaded.data.n()
                )));
            }
        }
        let n = d.n();
        st.precomputed = Some((Arc::new(d), export::data_id(csv)));
        st.revision += 1;
        Ok(n)
    }

    pub fn summary(&self) -> Result<DatasetSummary, SessionError> {
        DatasetSummary::of(&self.snapshot()?.data)
    }

    /// Applies a JSON merge patch to the settings.
    pub fn set_config(&self, patch: &serde_json::Value) -> Result<RecomputePlan, SessionError> {
        let mut st = self.lock();
        let mut doc = serde_json::to_value(&*st.config).expect("settings serialize");
        merge_patch(&mut doc, patch);
        let config = AnalysisConfig::from_value(doc)?;
        let precomputed_n = st.distances().map(DistanceMatrix::n);
        let Some(loaded) = st.loaded.clone() else {
            config.validate_static()?;
            st.config = Arc::new(config);
            st.revision += 1;
            return Ok(RecomputePlan {
                revision: st.revision,
                invalidated: Vec::new(),
                reused: Vec::new(),
                tours_stale: Vec::new(),
            });
        };
        let mut data = loaded.data.clone();
        if config.roles != st.config.roles {
            data = Arc::new(assign_roles(&loaded.raw, &config.roles)?);
        }
        config.validate(&data, precomputed_n)?;
        let data_id = st.data_key().expect("data loaded");
        let before = Analysis {
            data: &loaded.data,
            config: &st.config,
            precomputed: st.distances(),
            data_id: &data_id,
            cache: &self.cache,
        };
        let old_keys = layer_keys(&before);
        let after = Analysis {
            data: &data,
            config: &config,
            precomputed: st.distances(),
            data_id: &data_id,
            cache: &self.cache,
        };
        let new_keys = layer_keys(&after);
        let mut tours_stale = Vec::new();
        let mut tour_keys = HashMap::new();
        for (panel, t) in &st.tours {
            let key = tour_key(&after, t.space, t.path.kind, t.coloring);
            tour_keys.insert(*panel, key);
        }
        let (mut invalidated, mut reused) = (Vec::new(), Vec::new());
        for (layer, key) in &new_keys {
            if old_keys.get(layer) == Some(key) {
                reused.push(layer.clone());
            } else {
                invalidated.push(layer.clone());
            }
        }
        for (panel, t) in st.tours.iter_mut() {
            t.stale = t.built_under != tour_keys[panel];
            if t.stale {
                tours_stale.push(*panel);
            }
        }
        tours_stale.sort_by_key(|p| p.as_str());
        if let Some(l) = st.loaded.as_mut() {
            l.data = data;
        }
        st.config = Arc::new(config);
        st.revision += 1;
        Ok(RecomputePlan {
            revision: st.revision,
            invalidated,
            reused,
            tours_stale,
        })
    }

    pub fn overview(&self) -> Result<OverviewPayload, SessionError> {
        self.snapshot()?.analysis().overview()
    }

    pub fn stats(&self, k_max: Option<usize>) -> Result<StatsPayload, SessionError> {
        self.snapshot()?.analysis().stats(k_max)
    }

    pub fn benchmarks(&self) -> Result<BenchmarksPayload, SessionError> {
        self.snapshot()?.analysis().benchmarks()
    }

    pub fn coordinate_view(&self, variable: &str, opts: &CoordinateViewOptions) -> Result<CoordinateViewPayload, SessionError> {
        self.snapshot()?.analysis().coordinate_view(variable, opts)
    }

    pub fn breakdown(&self, cluster: usize) -> Result<DistanceBreakdown, SessionError> {
        self.snapshot()?.analysis().breakdown(cluster)
    }

    pub fn comparison(&self) -> Result<ComparisonPayload, SessionError> {
        self.snapshot()?.analysis().comparison()
    }

    pub fn export(&self) -> Result<ExportBundle, SessionError> {
        let snap = self.snapshot()?;
        build_bundle(&snap.analysis(), &self.registry)
    }

    /// Hash of the current merge tree's contents.
    pub fn tree_hash(&self) -> Result<String, SessionError> {
        let snap = self.snapshot()?;
        let a = snap.analysis();
        let tree = a.tree(a.config.metric, a.config.linkage)?;
        Ok(settings_hash(&*tree))
    }

    fn publish_job(&self, job: &Job) {
        let s = job.status();
        self.events.publish(&SessionEvent::Job {
            id: s.id,
            kind: s.kind,
            panel: s.panel,
            state: s.state,
            progress: s.progress,
        });
    }

    fn finish_job(&self, job: &Job, result: Result<JobOutput, SessionError>) -> bool {
        let done = match result {
            Ok(out) => job.finish(JobState::Done, Some(out), None, false),
            Err(e) if e.is_cancelled() || job.control.is_cancelled() => job.finish(JobState::Cancelled, None, None, false),
            Err(e) => job.finish(JobState::Failed, None, Some(e.to_string()), false),
        };
        if done {
            self.publish_job(job);
        }
        done
    }

    /// Starts the embedding for `panel`, with `method` overriding the
    /// configured one. Cached results finish immediately.
    pub fn start_embedding(self: &Arc<Self>, panel: Panel, method: Option<&str>) -> Result<JobStatus, SessionError> {
        let snap = self.snapshot()?;
        let mut spec = snap.config.nldr.get(panel).clone();
        if let Some(m) = method {
            spec.method = m.to_string();
        }
        if !self.registry.contains(&spec.method) {
            return Err(NldrError::UnknownMethod {
                name: spec.method,
                available: self.registry.names(),
            }
            .into());
        }
        let (job, superseded) = self.jobs.start(JobKind::Embedding, panel);
        if let Some(old) = superseded {
            self.publish_job(&old);
        }
        let key = snap.analysis().embedding_key(&spec);
        if let Some(emb) = self.cache.peek_embedding(&key) {
            job.finish(JobState::Done, Some(JobOutput::Embedding(emb.to_document())), None, true);
            self.publish_job(&job);
            return Ok(job.status());
        }
        self.publish_job(&job);
        let session = self.clone();
        let worker = job.clone();
        thread::spawn(move || {
            let a = snap.analysis();
            let result = a
                .embedding(&spec, &session.registry, Some(&worker.control))
                .map(|e| JobOutput::Embedding(e.to_document()));
            session.finish_job(&worker, result);
        });
        Ok(job.status())
    }

    /// Builds a tour for `panel` from `spec`, or from the configured tour
    /// spec. Tours are only ever built on request.
    pub fn start_tour(self: &Arc<Self>, panel: Panel, spec: Option<TourSpec>) -> Result<JobStatus, SessionError> {
        let snap = self.snapshot()?;
        let spec = spec.unwrap_or_else(|| snap.config.tour.clone());
        let mut check = (*snap.config).clone();
        check.tour = spec.clone();
        check.validate_static()?;
        let a = snap.analysis();
        let p = a.coords(spec.space)?.ncols();
        if spec.d >= p {
            return Err(TourError::InvalidDimension { p, d: spec.d }.into());
        }
        if spec.kind == TourKind::Guided {
            let (labels, k) = a.classes(spec.groups)?;
            crate::tour::Grouping::new(&labels, k)?;
        }
        let built_under = tour_key(&a, spec.space, spec.kind, spec.groups);
        let (job, superseded) = self.jobs.start(JobKind::Tour, panel);
        if let Some(old) = superseded {
            self.publish_job(&old);
        }
        self.publish_job(&job);
        let session = self.clone();
        let worker = job.clone();
        let snap = snap.clone();
        thread::spawn(move || {
            let result = snap.analysis().tour(&spec, Some(&worker.control));
            let output = result.as_ref().map(|p| JobOutput::Tour(p.to_document(false))).map_err(Clone::clone);
            // attach before reporting, so a finished job always has its panel filled
            if let Ok(path) = result {
                let mut st = session.lock();
                if session.jobs.is_current(&worker) && !worker.control.is_cancelled() {
                    st.tours.insert(
                        panel,
                        PanelTour {
                            path: Arc::new(path),
                            space: spec.space,
                            coloring: spec.groups,
                            built_under,
                            stale: false,
                            held: None,
                        },
                    );
                    st.revision += 1;
                }
            }
            session.finish_job(&worker, output);
        });
        Ok(job.status())
    }

    pub fn job(&self, id: &str) -> Result<Arc<Job>, SessionError> {
        self.jobs.get(id).ok_or_else(|| SessionError::UnknownJob(id.to_string()))
    }

    pub fn job_status(&self, id: &str) -> Result<JobStatus, SessionError> {
        Ok(self.job(id)?.status())
    }

    pub fn wait_job(&self, id: &str, timeout: Duration) -> Result<JobStatus, SessionError> {
        Ok(self.job(id)?.wait(timeout))
    }

    pub fn cancel_job(&self, id: &str) -> Result<JobStatus, SessionError> {
        let job = self.job(id)?;
        let was_running = !job.state().is_finished();
        let status = self.jobs.cancel(id).expect("job exists");
        if was_running {
            self.publish_job(&job);
        }
        Ok(status)
    }

    pub fn selection(&self) -> SelectionState {
        self.lock().selection.clone()
    }

    pub fn subscribe(&self) -> Subscription {
        self.events.subscribe()
    }

    fn clear_selection_locked(&self, st: &mut State) {
        if !st.selection.selected.is_empty() {
            st.selection = SelectionState {
                selected: Vec::new(),
                origin_view: "upload".into(),
                revision: st.selection.revision + 1,
            };
            self.events.publish(&SessionEvent::Selection(st.selection.clone()));
        }
    }

    /// Replaces the brushed set and broadcasts it. An empty list clears.
    pub fn set_selection(&self, ids: &[usize], origin: &str) -> Result<SelectionState, SessionError> {
        let mut st = self.lock();
        let n = st.loaded.as_ref().ok_or(SessionError::NoData)?.data.n();
        if let Some(&id) = ids.iter().find(|&&id| id == 0 || id > n) {
            return Err(SessionError::InvalidSelection { id, n });
        }
        let mut selected = ids.to_vec();
        selected.sort_unstable();
        selected.dedup();
        st.selection = SelectionState {
            selected,
            origin_view: origin.to_string(),
            revision: st.selection.revision + 1,
        };
        st.revision += 1;
        // published under the lock so every subscriber sees revisions in order
        self.events.publish(&SessionEvent::Selection(st.selection.clone()));
        Ok(st.selection.clone())
    }

    fn panel_tour(&self, panel: Panel) -> Result<PanelTour, SessionError> {
        self.lock().tours.get(&panel).cloned().ok_or(SessionError::NoTour(panel.as_str()))
    }

    fn colors(&self, a: &Analysis<'_>, coloring: Coloring) -> Result<ColorPayload, SessionError> {
        Ok(match coloring {
            Coloring::Score => ColorPayload::Gradient {
                values: a
                    .score()?
                    .ok_or_else(|| SessionError::InvalidConfig("no score configured".into()))?
                    .values,
            },
            c => {
                let (labels, n) = a.classes(c)?;
                ColorPayload::Classes { labels, n }
            }
        })
    }

    pub fn tour(&self, panel: Panel) -> Result<TourPanelPayload, SessionError> {
        let t = self.panel_tour(panel)?;
        let snap = self.snapshot()?;
        let a = snap.analysis();
        let coords = a.coords(t.space)?;
        Ok(TourPanelPayload {
            panel,
            space: t.space,
            variables: coords.names.clone(),
            data: coords.values.row_iter().map(|r| r.iter().copied().collect()).collect(),
            coloring: t.coloring,
            colors: self.colors(&a, t.coloring)?,
            path: t.path.to_document(true),
            stale: t.stale,
            held: t.held,
        })
    }

    /// Attaches the path on `from` to the other panel, coloured by
    /// `coloring` (default: keep the source colouring).
    pub fn copy_tour(&self, from: Panel, coloring: Option<Coloring>) -> Result<TourPanelPayload, SessionError> {
        let to = from.other();
        {
            let mut st = self.lock();
            let mut t = st.tours.get(&from).cloned().ok_or(SessionError::NoTour(from.as_str()))?;
            if let Some(c) = coloring {
                t.coloring = c;
            }
            t.held = None;
            st.tours.insert(to, t);
            st.revision += 1;
        }
        self.tour(to)
    }

    /// Freezes `panel` at 1-based `position` and returns that frame with the
    /// projected observations.
    pub fn hold_frame(&self, panel: Panel, position: usize) -> Result<HeldFrame, SessionError> {
        let t = self.panel_tour(panel)?;
        let frame = hold_frame(&t.path, position)?;
        let snap = self.snapshot()?;
        let coords = snap.analysis().coords(t.space)?;
        let proj = project(&coords.values, &frame)?;
        let mut st = self.lock();
        if let Some(cur) = st.tours.get_mut(&panel) {
            if Arc::ptr_eq(&cur.path, &t.path) {
                cur.held = Some(position);
                st.revision += 1;
            }
        }
        Ok(HeldFrame {
            position,
            frame: frame.rows(),
            projection: proj.row_iter().map(|r| r.iter().copied().collect()).collect(),
        })
    }

    /// Slice membership at 1-based `position` of the panel's path.
    pub fn slice(&self, panel: Panel, position: usize, h: SliceThickness) -> Result<SliceResult, SessionError> {
        let t = self.panel_tour(panel)?;
        let frame = hold_frame(&t.path, position)?;
        let coords = self.snapshot()?.analysis().coords(t.space)?;
        Ok(slice_mask(&coords.values, &frame, h)?)
    }
}

/// All live sessions of a service.
#[derive(Debug, Default)]
pub struct SessionManager {
    sessions: RwLock<HashMap<String, Arc<Session>>>,
    registry: Arc<NldrRegistry>,
}

impl SessionManager {
    pub fn new() -> Self {
        Self::default()
    }

    /// Sessions created by this manager see `registry`'s methods.
    pub fn with_registry(registry: NldrRegistry) -> Self {
        Self {
            sessions: RwLock::default(),
            registry: Arc::new(registry),
        }
    }

    pub fn create(&self) -> String {
        let id = uuid::Uuid::new_v4().simple().to_string();
        let session = Arc::new(Session::new(id.clone(), self.registry.clone()));
        self.sessions.write().expect("sessions lock").insert(id.clone(), session);
        id
    }

    pub fn get(&self, id: &str) -> Result<Arc<Session>, SessionError> {
        self.sessions
            .read()
            .expect("sessions lock")
            .get(id)
            .cloned()
            .ok_or_else(|| SessionError::UnknownSession(id.to_string()))
    }

    pub fn remove(&self, id: &str) -> Result<(), SessionError> {
        let s = self
            .sessions
            .write()
            .expect("sessions lock")
            .remove(id)
            .ok_or_else(|| SessionError::UnknownSession(id.to_string()))?;
        s.jobs.cancel_all();
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.sessions.read().expect("sessions lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
