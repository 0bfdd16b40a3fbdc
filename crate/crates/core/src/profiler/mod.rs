//! Lexical profiles: Personalized PageRank restarted at a single synset.
//!
//! The walk follows `v <- (1 - alpha) e_s + alpha M v`, where column `u` of
//! `M` spreads `1 / out_degree(u)` over the out-neighbors of `u`. Mass that
//! lands on a dangling node goes back to the restart node on the next step,
//! so the full iterate always sums to one.

mod batch;
mod kernel;
mod source;
mod store;

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

use crate::graph::{SemanticGraph, SynsetId};

pub use batch::{profile_all, ProfileAllOptions, ProfileRun};
pub use source::{CachedProfiles, IndexedProfile, MemoryProfiles, ProfileSource};
pub use store::{ProfileStore, StoreError, StoreMeta, StoreWriter};

use kernel::{run_lanes, Transition, Workspace};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PprParams {
    /// Probability of following an edge rather than restarting.
    pub alpha: f64,
    /// L1 change between iterates below which the walk has converged.
    pub epsilon: f64,
    pub max_iters: usize,
    /// Number of entries kept per profile.
    pub top_n: usize,
}

impl Default for PprParams {
    fn default() -> Self {
        PprParams {
            alpha: 0.85,
            epsilon: 1e-6,
            max_iters: 30,
            top_n: 1000,
        }
    }
}

impl PprParams {
    pub fn validate(&self) -> Result<(), ProfileError> {
        let bad = |msg: &str| Err(ProfileError::InvalidParams(msg.to_string()));
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad("alpha must lie in (0, 1)");
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return bad("epsilon must be positive");
        }
        if self.max_iters == 0 {
            return bad("max_iters must be at least 1");
        }
        if self.top_n == 0 {
            return bad("top_n must be at least 1");
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum ProfileError {
    #[error("unknown source synset `{0}`")]
    UnknownSource(String),
    #[error("invalid profiling parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Store(#[from] StoreError),
}

/// Truncated PPR distribution of one source synset.
///
/// Entries are sorted by descending probability, ties by ascending id.
#[derive(Clone, Debug, PartialEq)]
pub struct LexicalProfile {
    source: SynsetId,
    entries: Vec<(SynsetId, f64)>,
}

impl LexicalProfile {
    /// Sorts `entries` into canonical order. Non-positive values are dropped.
    pub fn new(source: SynsetId, mut entries: Vec<(SynsetId, f64)>) -> Self {
        entries.retain(|(_, p)| *p > 0.0);
        entries.sort_by(|a, b| rank_order(a.1, b.1).then_with(|| a.0.cmp(&b.0)));
        LexicalProfile { source, entries }
    }

    pub(crate) fn from_sorted(source: SynsetId, entries: Vec<(SynsetId, f64)>) -> Self {
        LexicalProfile { source, entries }
    }

    pub fn source(&self) -> &SynsetId {
        &self.source
    }

    pub fn entries(&self) -> &[(SynsetId, f64)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Sum of retained probabilities.
    pub fn mass(&self) -> f64 {
        self.entries.iter().map(|(_, p)| p).sum()
    }

    pub fn get(&self, id: &str) -> Option<f64> {
        self.entries
            .iter()
            .find(|(s, _)| s.as_str() == id)
            .map(|(_, p)| *p)
    }

    /// Scales every entry by `c`. Used to probe scale invariance of scoring.
    pub fn scaled(&self, c: f64) -> LexicalProfile {
        LexicalProfile {
            source: self.source.clone(),
            entries: self.entries.iter().map(|(s, p)| (s.clone(), p * c)).collect(),
        }
    }
}

impl fmt::Display for LexicalProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}\t", self.source)?;
        for (i, (id, p)) in self.entries.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{id}:{p}")?;
        }
        Ok(())
    }
}

/// Descending by probability.
fn rank_order(a: f64, b: f64) -> Ordering {
    b.total_cmp(&a)
}

#[derive(Clone, Debug, PartialEq)]
pub struct PprOutcome {
    pub profile: LexicalProfile,
    pub iterations: usize,
    /// L1 change of the final iteration.
    pub delta: f64,
    /// False when `max_iters` ran out first; the profile is then the last iterate.
    pub converged: bool,
}

/// Untruncated result of power iteration, indexed by node.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseRun {
    pub values: Vec<f64>,
    pub iterations: usize,
    pub delta: f64,
    pub converged: bool,
}

/// Runs power iteration from `source` and returns the full iterate.
pub fn power_iteration(
    graph: &SemanticGraph,
    source: &SynsetId,
    params: &PprParams,
) -> Result<DenseRun, ProfileError> {
    params.validate()?;
    let node = graph
        .node(source.as_str())
        .ok_or_else(|| ProfileError::UnknownSource(source.to_string()))?;
    let transition = Transition::new(graph, params.alpha);
    let mut ws = Workspace::<1>::new(graph.len());
    let mut result = None;
    run_lanes(graph, &transition, &[node], params, &mut ws, |_, outcome, values| {
        result = Some(DenseRun {
            values: values.iter().map(|v| v[0]).collect(),
            iterations: outcome.iterations,
            delta: outcome.delta,
            converged: outcome.converged,
        });
    });
    Ok(result.expect("lane always reports"))
}

/// Personalized PageRank profile of one synset, truncated to `top_n`.
pub fn ppr(
    graph: &SemanticGraph,
    source: &SynsetId,
    params: &PprParams,
) -> Result<PprOutcome, ProfileError> {
    let run = power_iteration(graph, source, params)?;
    let top = truncate(graph, run.values.iter().copied().enumerate(), params.top_n);
    Ok(PprOutcome {
        profile: LexicalProfile::from_sorted(
            source.clone(),
            top.into_iter()
                .map(|(u, p)| (graph.id(u as usize).clone(), p))
                .collect(),
        ),
        iterations: run.iterations,
        delta: run.delta,
        converged: run.converged,
    })
}

/// Keeps the `top_n` largest positive values, in profile order.
pub(crate) fn truncate(
    graph: &SemanticGraph,
    values: impl Iterator<Item = (usize, f64)>,
    top_n: usize,
) -> Vec<(u32, f64)> {
    let mut kept: Vec<(u32, f64)> = values
        .filter(|&(_, p)| p > 0.0)
        .map(|(u, p)| (u as u32, p))
        .collect();
    let cmp = |a: &(u32, f64), b: &(u32, f64)| {
        rank_order(a.1, b.1).then_with(|| graph.id(a.0 as usize).cmp(graph.id(b.0 as usize)))
    };
    if kept.len() > top_n {
        kept.select_nth_unstable_by(top_n - 1, cmp);
        kept.truncate(top_n);
    }
    kept.sort_unstable_by(cmp);
    kept
}

/// Expands a profile to a dense vector over the graph's nodes.
pub fn densify(graph: &SemanticGraph, profile: &LexicalProfile) -> Vec<f64> {
    let mut v = vec![0.0; graph.len()];
    for (id, p) in profile.entries() {
        if let Some(u) = graph.node(id.as_str()) {
            v[u] = *p;
        }
    }
    v
}

/// Profile lookup keyed by id, for callers holding many profiles in memory.
pub fn index_by_source(profiles: Vec<LexicalProfile>) -> HashMap<SynsetId, LexicalProfile> {
    profiles
        .into_iter()
        .map(|p| (p.source.clone(), p))
        .collect()
}
