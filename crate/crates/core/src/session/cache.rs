use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use crate::cluster::{DistanceMatrix, MergeTree};
use crate::data::CoordinateMatrix;
use crate::nldr::Embedding;

#[derive(Debug, Clone)]
pub enum CacheEntry {
    Coords(Arc<CoordinateMatrix>),
    Distances(Arc<DistanceMatrix>),
    Tree(Arc<MergeTree>),
    Embedding(Arc<Embedding>),
}

/// Computed results keyed by the hash of the settings that produced them.
#[derive(Debug, Default)]
pub struct Cache {
    entries: Mutex<HashMap<String, CacheEntry>>,
    hits: AtomicU64,
    misses: AtomicU64,
}

macro_rules! layer {
    ($get:ident, $variant:ident, $ty:ty) => {
        pub fn $get<E>(&self, key: &str, compute: impl FnOnce() -> Result<$ty, E>) -> Result<Arc<$ty>, E> {
            if let Some(CacheEntry::$variant(v)) = self.lookup(key) {
                return Ok(v);
            }
            self.misses.fetch_add(1, Ordering::Relaxed);
            let value = Arc::new(compute()?);
            self.insert(key, CacheEntry::$variant(value.clone()));
            Ok(value)
        }
    };
}

impl Cache {
    pub fn new() -> Self {
        Self::default()
    }

    fn lookup(&self, key: &str) -> Option<CacheEntry> {
        let found = self.entries.lock().expect("cache lock").get(key).cloned();
        if found.is_some() {
            self.hits.fetch_add(1, Ordering::Relaxed);
        }
        found
    }

    fn insert(&self, key: &str, entry: CacheEntry) {
        self.entries.lock().expect("cache lock").insert(key.to_string(), entry);
    }

    layer!(coords, Coords, CoordinateMatrix);
    layer!(distances, Distances, DistanceMatrix);
    layer!(tree, Tree, MergeTree);
    layer!(embedding, Embedding, Embedding);

    pub fn peek_embedding(&self, key: &str) -> Option<Arc<Embedding>> {
        match self.lookup(key) {
            Some(CacheEntry::Embedding(e)) => Some(e),
            _ => None,
        }
    }

    pub fn put_embedding(&self, key: &str, emb: Arc<Embedding>) {
        self.insert(key, CacheEntry::Embedding(emb));
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.lock().expect("cache lock").contains_key(key)
    }

    pub fn clear(&self) {
        self.entries.lock().expect("cache lock").clear();
    }

    pub fn len(&self) -> usize {
        self.entries.lock().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn hits(&self) -> u64 {
        self.hits.load(Ordering::Relaxed)
    }

    pub fn misses(&self) -> u64 {
        self.misses.load(Ordering::Relaxed)
    }
}
