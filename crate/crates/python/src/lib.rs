//! Python bindings. Structured values cross the boundary as JSON and come
//! back as plain dicts and lists.

use std::sync::Arc;
use std::time::Duration;

use linkspace::cluster::{cut_tree as cut, hclust as agglomerate, DistanceMatrix, Linkage, MergeTree};
use linkspace::nldr::NldrRegistry;
use linkspace::session::{self, JobState, JobStatus, Panel, TourSpec};
use nalgebra::DMatrix;
use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use serde::de::DeserializeOwned;
use serde::Serialize;

create_exception!(linkspace, LinkspaceError, PyException);

fn err(e: impl std::fmt::Display) -> PyErr {
    LinkspaceError::new_err(e.to_string())
}

fn to_py<T: Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(err)?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn from_py<T: DeserializeOwned>(value: &Bound<'_, PyAny>) -> PyResult<T> {
    let text: String = value.py().import("json")?.call_method1("dumps", (value,))?.extract()?;
    serde_json::from_str(&text).map_err(err)
}

/// Parses a linkage name as accepted in settings documents.
pub fn parse_linkage(name: &str) -> Result<Linkage, String> {
    serde_json::from_value(serde_json::Value::String(name.into())).map_err(|_| format!("unknown linkage '{name}'"))
}

pub fn parse_panel(name: &str) -> Result<Panel, String> {
    serde_json::from_value(serde_json::Value::String(name.into())).map_err(|_| format!("unknown panel '{name}'"))
}

fn tree_of(distances: Vec<Vec<f64>>, linkage: &str) -> PyResult<MergeTree> {
    let n = distances.len();
    if distances.iter().any(|r| r.len() != n) {
        return Err(err("distance matrix must be square"));
    }
    let m = DMatrix::from_fn(n, n, |i, j| distances[i][j]);
    let d = DistanceMatrix::from_precomputed(&m).map_err(err)?;
    agglomerate(&d, parse_linkage(linkage).map_err(err)?).map_err(err)
}

/// Merges `(left, right, height)` of a square distance matrix, with leaves
/// numbered `1..=n` and merge `s` creating node `n + 1 + s`.
#[pyfunction]
#[pyo3(signature = (distances, linkage = "ward"))]
fn hclust(distances: Vec<Vec<f64>>, linkage: &str) -> PyResult<Vec<(usize, usize, f64)>> {
    let tree = tree_of(distances, linkage)?;
    Ok(tree.merges.iter().map(|m| (m.left, m.right, m.height)).collect())
}

/// 1-based cluster labels of the `k`-cluster cut.
#[pyfunction]
#[pyo3(signature = (distances, k, linkage = "ward"))]
fn cut_tree(distances: Vec<Vec<f64>>, k: usize, linkage: &str) -> PyResult<Vec<usize>> {
    let tree = tree_of(distances, linkage)?;
    cut(&tree, k).map_err(err)
}

/// Runs a settings document against a CSV without a session and returns
/// the export bundle. Files are written when `out` is given.
#[pyfunction]
#[pyo3(signature = (csv, settings, distances = None, out = None))]
fn headless_run(
    py: Python<'_>,
    csv: &str,
    settings: &str,
    distances: Option<&str>,
    out: Option<std::path::PathBuf>,
) -> PyResult<Py<PyAny>> {
    let bundle = py
        .detach(|| session::headless_run(csv.as_bytes(), settings, distances.map(str::as_bytes), out.as_deref()))
        .map_err(err)?;
    to_py(py, &bundle)
}

#[pyclass(name = "Session")]
struct PySession {
    inner: Arc<session::Session>,
}

impl PySession {
    fn finish(&self, py: Python<'_>, started: JobStatus, timeout: f64) -> PyResult<Py<PyAny>> {
        let inner = self.inner.clone();
        let status = py
            .detach(|| inner.wait_job(&started.id, Duration::from_secs_f64(timeout)))
            .map_err(err)?;
        match status.state {
            JobState::Done => to_py(py, &status.result),
            JobState::Running => Err(err(format!("job {} still running after {timeout}s", status.id))),
            state => Err(err(status.error.unwrap_or_else(|| format!("job {state:?}")))),
        }
    }
}

#[pymethods]
impl PySession {
    #[new]
    fn new() -> Self {
        Self {
            inner: Arc::new(session::Session::new("python".into(), Arc::new(NldrRegistry::new()))),
        }
    }

    #[getter]
    fn revision(&self) -> u64 {
        self.inner.revision()
    }

    #[pyo3(signature = (csv, roles = None))]
    fn upload_data(&self, py: Python<'_>, csv: &str, roles: Option<&Bound<'_, PyAny>>) -> PyResult<Py<PyAny>> {
        let roles = roles.map(from_py).transpose()?;
        let summary = py.detach(|| self.inner.upload_data(csv.as_bytes(), roles)).map_err(err)?;
        to_py(py, &summary)
    }

    fn upload_distances(&self, csv: &str) -> PyResult<usize> {
        self.inner.upload_distances(csv.as_bytes()).map_err(err)
    }

    fn config(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &*self.inner.config())
    }

    fn set_config(&self, py: Python<'_>, patch: &Bound<'_, PyAny>) -> PyResult<Py<PyAny>> {
        let patch: serde_json::Value = from_py(patch)?;
        let plan = py.detach(|| self.inner.set_config(&patch)).map_err(err)?;
        to_py(py, &plan)
    }

    fn overview(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        let v = py.detach(|| self.inner.overview()).map_err(err)?;
        to_py(py, &v)
    }

    #[pyo3(signature = (k_max = None))]
    fn stats(&self, py: Python<'_>, k_max: Option<usize>) -> PyResult<Py<PyAny>> {
        let v = py.detach(|| self.inner.stats(k_max)).map_err(err)?;
        to_py(py, &v)
    }

    fn benchmarks(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        let v = py.detach(|| self.inner.benchmarks()).map_err(err)?;
        to_py(py, &v)
    }

    fn comparison(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        let v = py.detach(|| self.inner.comparison()).map_err(err)?;
        to_py(py, &v)
    }

    fn export(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        let v = py.detach(|| self.inner.export()).map_err(err)?;
        to_py(py, &v)
    }

    /// Computes the embedding of a panel and returns its document.
    #[pyo3(signature = (panel = "left", method = None, timeout = 60.0))]
    fn embedding(&self, py: Python<'_>, panel: &str, method: Option<&str>, timeout: f64) -> PyResult<Py<PyAny>> {
        let started = self.inner.start_embedding(parse_panel(panel).map_err(err)?, method).map_err(err)?;
        self.finish(py, started, timeout)
    }

    /// Builds the tour of a panel and returns its path document.
    #[pyo3(signature = (panel = "left", spec = None, timeout = 60.0))]
    fn tour(&self, py: Python<'_>, panel: &str, spec: Option<&Bound<'_, PyAny>>, timeout: f64) -> PyResult<Py<PyAny>> {
        let spec: Option<TourSpec> = spec.map(from_py).transpose()?;
        let started = self.inner.start_tour(parse_panel(panel).map_err(err)?, spec).map_err(err)?;
        self.finish(py, started, timeout)
    }

    fn selection(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &self.inner.selection())
    }

    #[pyo3(signature = (ids, origin = "python"))]
    fn select(&self, py: Python<'_>, ids: Vec<usize>, origin: &str) -> PyResult<Py<PyAny>> {
        let state = self.inner.set_selection(&ids, origin).map_err(err)?;
        to_py(py, &state)
    }
}

#[pymodule(name = "linkspace")]
fn bindings(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("LinkspaceError", m.py().get_type::<LinkspaceError>())?;
    m.add_class::<PySession>()?;
    m.add_function(wrap_pyfunction!(hclust, m)?)?;
    m.add_function(wrap_pyfunction!(cut_tree, m)?)?;
    m.add_function(wrap_pyfunction!(headless_run, m)?)?;
    Ok(())
}
