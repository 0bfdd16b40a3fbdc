use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use super::{LexicalProfile, ProfileStore, StoreError};
use crate::graph::{SemanticGraph, SynsetId};

/// A profile keyed by graph node, for constant-time probability lookups.
#[derive(Clone, Debug, Default)]
pub struct IndexedProfile {
    values: HashMap<u32, f64>,
}

impl IndexedProfile {
    /// Entries naming synsets absent from `graph` are ignored.
    pub fn new(profile: &LexicalProfile, graph: &SemanticGraph) -> Self {
        let values = profile
            .entries()
            .iter()
            .filter_map(|(id, p)| graph.node(id.as_str()).map(|u| (u as u32, *p)))
            .collect();
        IndexedProfile { values }
    }

    pub fn get(&self, node: usize) -> Option<f64> {
        self.values.get(&(node as u32)).copied()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Anything that can hand out sense profiles to the scorer.
pub trait ProfileSource: Sync {
    /// `Ok(None)` when no profile exists for `sense`.
    fn profile(&self, sense: &SynsetId) -> Result<Option<Arc<IndexedProfile>>, StoreError>;
}

/// Profiles held in memory.
#[derive(Clone, Debug, Default)]
pub struct MemoryProfiles {
    profiles: HashMap<SynsetId, Arc<IndexedProfile>>,
}

impl MemoryProfiles {
    pub fn new(graph: &SemanticGraph, profiles: impl IntoIterator<Item = LexicalProfile>) -> Self {
        MemoryProfiles {
            profiles: profiles
                .into_iter()
                .map(|p| (p.source().clone(), Arc::new(IndexedProfile::new(&p, graph))))
                .collect(),
        }
    }
}

impl ProfileSource for MemoryProfiles {
    fn profile(&self, sense: &SynsetId) -> Result<Option<Arc<IndexedProfile>>, StoreError> {
        Ok(self.profiles.get(sense).cloned())
    }
}

/// A [`ProfileStore`] with a read-through cache. Only senses that are
/// actually scored get loaded.
pub struct CachedProfiles<'g> {
    store: ProfileStore,
    graph: &'g SemanticGraph,
    cache: RwLock<HashMap<SynsetId, Option<Arc<IndexedProfile>>>>,
}

impl<'g> CachedProfiles<'g> {
    pub fn new(store: ProfileStore, graph: &'g SemanticGraph) -> Self {
        CachedProfiles {
            store,
            graph,
            cache: RwLock::new(HashMap::new()),
        }
    }

    pub fn store(&self) -> &ProfileStore {
        &self.store
    }

    /// Number of distinct senses looked up so far.
    pub fn cached(&self) -> usize {
        self.cache.read().expect("cache lock").len()
    }
}

impl ProfileSource for CachedProfiles<'_> {
    fn profile(&self, sense: &SynsetId) -> Result<Option<Arc<IndexedProfile>>, StoreError> {
        if let Some(hit) = self.cache.read().expect("cache lock").get(sense) {
            return Ok(hit.clone());
        }
        let loaded = self
            .store
            .lookup(sense.as_str())?
            .map(|p| Arc::new(IndexedProfile::new(&p, self.graph)));
        Ok(self
            .cache
            .write()
            .expect("cache lock")
            .entry(sense.clone())
            .or_insert(loaded)
            .clone())
    }
}
