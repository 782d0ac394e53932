use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use super::analysis::Analysis;
use super::cache::Cache;
use super::settings::{AnalysisConfig, Panel};
use super::SessionError;
use crate::cluster::DistanceMatrix;
use crate::data::{assign_roles, Dataset};
use crate::nldr::NldrRegistry;

/// Everything written by an export: assignments, the settings that
/// reproduce them, and plot data.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExportBundle {
    pub assignments_csv: String,
    /// Canonical settings document.
    pub settings: String,
    /// Plot-data documents by name. A plot that could not be computed holds
    /// `{"error": message}`.
    pub plots: BTreeMap<String, Value>,
}

impl ExportBundle {
    /// Writes `assignments.csv`, `settings.json` and `plots/<name>.json`.
    pub fn write_to(&self, dir: &Path) -> Result<(), SessionError> {
        let io = |e: std::io::Error| SessionError::Io(e.to_string());
        fs::create_dir_all(dir.join("plots")).map_err(io)?;
        fs::write(dir.join("assignments.csv"), &self.assignments_csv).map_err(io)?;
        fs::write(dir.join("settings.json"), &self.settings).map_err(io)?;
        for (name, doc) in &self.plots {
            let mut text = serde_json::to_string_pretty(doc).expect("plot documents serialize");
            text.push('\n');
            fs::write(dir.join("plots").join(format!("{name}.json")), text).map_err(io)?;
        }
        Ok(())
    }
}

fn plot<T: Serialize>(r: Result<T, SessionError>) -> Value {
    match r {
        Ok(v) => serde_json::to_value(v).expect("plot documents serialize"),
        Err(e) => serde_json::json!({ "error": e.to_string() }),
    }
}

/// Builds the export for one analysis. Assignments errors abort; plot
/// errors are recorded in the plot document.
pub fn build_bundle(a: &Analysis<'_>, registry: &NldrRegistry) -> Result<ExportBundle, SessionError> {
    let assignments_csv = a.assignments_csv()?;
    let mut plots = BTreeMap::new();
    plots.insert("overview".to_string(), plot(a.overview()));
    plots.insert("stats".to_string(), plot(a.stats(None)));
    plots.insert("benchmarks".to_string(), plot(a.benchmarks()));
    plots.insert("comparison".to_string(), plot(a.comparison()));
    for panel in [Panel::Left, Panel::Right] {
        let spec = a.config.nldr.get(panel);
        let emb = a.embedding(spec, registry, None).map(|e| e.to_document());
        plots.insert(format!("embedding_{}", panel.as_str()), plot(emb));
    }
    let tour = a
        .tour(&a.config.tour, None)
        .and_then(|path| a.tour_plot(&a.config.tour, &path));
    plots.insert("tour".to_string(), plot(tour));
    Ok(ExportBundle {
        assignments_csv,
        settings: a.config.to_canonical_json(),
        plots,
    })
}

pub(crate) fn data_id(csv: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    hex::encode(Sha256::digest(csv))
}

/// Runs the full analysis from a CSV file and a settings document without a
/// service, optionally writing the bundle to `out`.
pub fn headless_run(
    csv: &[u8],
    settings: &str,
    distances: Option<&[u8]>,
    out: Option<&Path>,
) -> Result<ExportBundle, SessionError> {
    let config = AnalysisConfig::from_json(settings)?;
    config.validate_static()?;
    let dataset = Dataset::parse_csv(csv)?;
    let data = assign_roles(&dataset, &config.roles)?;
    let precomputed = distances.map(DistanceMatrix::from_csv).transpose()?;
    config.validate(&data, precomputed.as_ref().map(DistanceMatrix::n))?;
    let cache = Cache::new();
    let id = data_id(csv);
    let analysis = Analysis {
        data: &data,
        config: &config,
        precomputed: precomputed.as_ref(),
        data_id: &id,
        cache: &cache,
    };
    let bundle = build_bundle(&analysis, &NldrRegistry::new())?;
    if let Some(dir) = out {
        bundle.write_to(dir)?;
    }
    Ok(bundle)
}
