//! Two-dimensional non-linear embeddings behind a named method registry.

mod mds;
mod tsne;

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

pub use mds::classical_mds;
pub use tsne::{
    effective_perplexity, entropy_bits, joint_probabilities, perplexity_calibration, tsne, TsneOptions,
    DEFAULT_ITERATIONS, DEFAULT_PERPLEXITY, EARLY_ITERATIONS, ENTROPY_TOL, EXAGGERATION, LEARNING_RATE,
};

use crate::cluster::DistanceMatrix;
use crate::control::JobControl;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum NldrError {
    #[error("need at least {min} observations, got {n}")]
    TooFewObservations { n: usize, min: usize },
    #[error("perplexity {perplexity} is not attainable with {n} observations")]
    InvalidPerplexity { perplexity: f64, n: usize },
    #[error("bandwidth search for perplexity {perplexity} stopped at entropy {entropy} bits")]
    PerplexityUnattainable { perplexity: f64, entropy: f64 },
    #[error("distances contain non-finite or negative values")]
    NonFinite,
    #[error("expected {expected} values, got {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("observation ids are not unique")]
    DuplicateIds,
    #[error("unknown method `{name}`; registered: {}", .available.join(", "))]
    UnknownMethod { name: String, available: Vec<String> },
    #[error("method `{0}` is already registered")]
    DuplicateMethod(String),
    #[error("method `{method}` returned a malformed embedding: {reason}")]
    MalformedOutput { method: String, reason: String },
    #[error("coordinates have {coords} rows but distances cover {distances} observations")]
    InputMismatch { coords: usize, distances: usize },
    #[error("{0}")]
    Plugin(String),
    #[error("cancelled")]
    Cancelled,
}

/// An `n x 2` layout and the settings that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    pub method_id: String,
    pub y: DMatrix<f64>,
    pub params: BTreeMap<String, f64>,
    pub seed: u64,
    /// Set when the method could not fill both output dimensions.
    pub degenerate: bool,
}

impl Embedding {
    pub fn new(method_id: &str, y: DMatrix<f64>, seed: u64) -> Self {
        Self {
            method_id: method_id.to_string(),
            y,
            params: BTreeMap::new(),
            seed,
            degenerate: false,
        }
    }

    pub fn n(&self) -> usize {
        self.y.nrows()
    }

    pub fn points(&self) -> Vec<[f64; 2]> {
        (0..self.y.nrows()).map(|i| [self.y[(i, 0)], self.y[(i, 1)]]).collect()
    }

    pub fn to_document(&self) -> EmbeddingDocument {
        EmbeddingDocument {
            method: self.method_id.clone(),
            params: self.params.clone(),
            seed: self.seed,
            degenerate: self.degenerate,
            coordinates: self.points(),
        }
    }

    pub fn from_document(doc: &EmbeddingDocument) -> Result<Self, NldrError> {
        let n = doc.coordinates.len();
        let y = DMatrix::from_fn(n, 2, |i, j| doc.coordinates[i][j]);
        let emb = Self {
            method_id: doc.method.clone(),
            y,
            params: doc.params.clone(),
            seed: doc.seed,
            degenerate: doc.degenerate,
        };
        validate(&emb, &doc.method, n)?;
        Ok(emb)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbeddingDocument {
    pub method: String,
    pub params: BTreeMap<String, f64>,
    pub seed: u64,
    #[serde(default)]
    pub degenerate: bool,
    pub coordinates: Vec<[f64; 2]>,
}

/// Everything a method receives: the coordinate representation, the
/// distances between its rows, and run settings.
#[derive(Clone, Copy)]
pub struct MethodInput<'a> {
    pub coords: &'a DMatrix<f64>,
    pub distances: &'a DistanceMatrix,
    pub seed: u64,
    /// Stable observation ids, when the caller has them.
    pub ids: Option<&'a [u64]>,
    pub control: Option<&'a JobControl>,
}

impl<'a> MethodInput<'a> {
    pub fn new(coords: &'a DMatrix<f64>, distances: &'a DistanceMatrix, seed: u64) -> Self {
        Self {
            coords,
            distances,
            seed,
            ids: None,
            control: None,
        }
    }
}

pub type NldrMethod = Arc<dyn Fn(&MethodInput<'_>) -> Result<Embedding, NldrError> + Send + Sync>;

/// Named embedding methods. `tsne` and `mds` are always present.
#[derive(Clone)]
pub struct NldrRegistry {
    methods: BTreeMap<String, NldrMethod>,
}

impl std::fmt::Debug for NldrRegistry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_list().entries(self.methods.keys()).finish()
    }
}

impl Default for NldrRegistry {
    fn default() -> Self {
        Self::new()
    }
}

impl NldrRegistry {
    pub fn new() -> Self {
        let mut methods: BTreeMap<String, NldrMethod> = BTreeMap::new();
        methods.insert(
            "tsne".into(),
            Arc::new(|input: &MethodInput<'_>| {
                let mut opts = TsneOptions::new(input.seed);
                opts.ids = input.ids.map(<[u64]>::to_vec);
                tsne(input.distances, &opts, input.control)
            }),
        );
        methods.insert("mds".into(), Arc::new(|input: &MethodInput<'_>| classical_mds(input.distances)));
        Self { methods }
    }

    pub fn register<F>(&mut self, name: &str, method: F) -> Result<(), NldrError>
    where
        F: Fn(&MethodInput<'_>) -> Result<Embedding, NldrError> + Send + Sync + 'static,
    {
        if self.methods.contains_key(name) {
            return Err(NldrError::DuplicateMethod(name.to_string()));
        }
        self.methods.insert(name.to_string(), Arc::new(method));
        Ok(())
    }

    pub fn names(&self) -> Vec<String> {
        self.methods.keys().cloned().collect()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.methods.contains_key(name)
    }

    /// Runs method `name` and checks that it returned `n x 2` finite values.
    pub fn run(&self, name: &str, input: &MethodInput<'_>) -> Result<Embedding, NldrError> {
        let method = self.methods.get(name).ok_or_else(|| NldrError::UnknownMethod {
            name: name.to_string(),
            available: self.names(),
        })?;
        let n = input.distances.n();
        if input.coords.nrows() != n {
            return Err(NldrError::InputMismatch {
                coords: input.coords.nrows(),
                distances: n,
            });
        }
        let mut emb = method(input)?;
        validate(&emb, name, n)?;
        emb.method_id = name.to_string();
        Ok(emb)
    }
}

fn validate(emb: &Embedding, name: &str, n: usize) -> Result<(), NldrError> {
    let malformed = |reason: String| NldrError::MalformedOutput {
        method: name.to_string(),
        reason,
    };
    if emb.y.shape() != (n, 2) {
        let (r, c) = emb.y.shape();
        return Err(malformed(format!("shape {r}x{c}, expected {n}x2")));
    }
    if emb.y.iter().any(|v| !v.is_finite()) {
        return Err(malformed("non-finite coordinates".into()));
    }
    Ok(())
}

/// Runs a registered method on a coordinate matrix and its distances.
pub fn run_method(reg: &NldrRegistry, name: &str, input: &MethodInput<'_>) -> Result<Embedding, NldrError> {
    reg.run(name, input)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cluster::{pairwise_distances, Metric};

    fn input_data() -> (DMatrix<f64>, DistanceMatrix) {
        let coords = DMatrix::from_fn(8, 3, |i, j| ((i * 3 + j) % 5) as f64 + if i < 4 { 0.0 } else { 10.0 });
        let d = pairwise_distances(&coords, Metric::Euclidean).unwrap();
        (coords, d)
    }

    #[test]
    fn builtins_dispatch() {
        let reg = NldrRegistry::new();
        assert_eq!(reg.names(), vec!["mds", "tsne"]);
        let (coords, d) = input_data();
        let input = MethodInput::new(&coords, &d, 3);
        let emb = run_method(&reg, "mds", &input).unwrap();
        assert_eq!(emb.method_id, "mds");
        let emb = run_method(&reg, "tsne", &input).unwrap();
        assert_eq!(emb.method_id, "tsne");
        assert_eq!(emb, tsne(&d, &TsneOptions::new(3), None).unwrap());
    }

    #[test]
    fn plugins_and_errors() {
        let mut reg = NldrRegistry::new();
        reg.register("lle", |input: &MethodInput<'_>| {
            Ok(Embedding::new("lle", input.coords.columns(0, 2).into_owned(), input.seed))
        })
        .unwrap();
        reg.register("broken", |_: &MethodInput<'_>| Ok(Embedding::new("broken", DMatrix::zeros(2, 2), 0)))
            .unwrap();
        assert!(matches!(reg.register("tsne", |_: &MethodInput<'_>| unreachable!()), Err(NldrError::DuplicateMethod(_))));
        let (coords, d) = input_data();
        let input = MethodInput::new(&coords, &d, 0);
        let emb = reg.run("lle", &input).unwrap();
        assert_eq!(emb.y, coords.columns(0, 2).into_owned());
        assert!(matches!(reg.run("broken", &input), Err(NldrError::MalformedOutput { .. })));
        let err = reg.run("nope", &input).unwrap_err();
        assert_eq!(err.to_string(), "unknown method `nope`; registered: broken, lle, mds, tsne");
    }

    #[test]
    fn document_round_trip() {
        let (coords, d) = input_data();
        let emb = NldrRegistry::new().run("mds", &MethodInput::new(&coords, &d, 0)).unwrap();
        let json = serde_json::to_string(&emb.to_document()).unwrap();
        let back = Embedding::from_document(&serde_json::from_str(&json).unwrap()).unwrap();
        assert_eq!(back, emb);
    }
}
