//! Semantic network: synsets, their lemmas, and the directed relation edges
//! between them.
//!
//! Nodes are addressed internally by a dense index (file order of the
//! synsets file). Adjacency is held in two CSR arrays, one for out-edges and
//! one for in-edges, so that power iteration can pull mass along incoming
//! edges without building a transpose per run.

mod lexicon;
pub(crate) mod load;

use std::borrow::Borrow;
use std::collections::HashMap;
use std::fmt;
use std::io::{self, Write};
use std::path::PathBuf;
use std::sync::Arc;

use thiserror::Error;

pub use lexicon::{LexKey, Lexicon};

/// Opaque synset identifier, e.g. `bn:00053723n`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SynsetId(Arc<str>);

impl SynsetId {
    pub fn new(id: impl AsRef<str>) -> Self {
        SynsetId(Arc::from(id.as_ref()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl Borrow<str> for SynsetId {
    fn borrow(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for SynsetId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for SynsetId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", &*self.0)
    }
}

impl From<&str> for SynsetId {
    fn from(s: &str) -> Self {
        SynsetId::new(s)
    }
}

/// Part-of-speech tag of a synset or a lexicon entry.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Pos {
    Noun,
    Verb,
    Adjective,
    Adverb,
}

impl Pos {
    pub const ALL: [Pos; 4] = [Pos::Noun, Pos::Verb, Pos::Adjective, Pos::Adverb];

    pub fn from_tag(tag: &str) -> Option<Pos> {
        match tag {
            "n" => Some(Pos::Noun),
            "v" => Some(Pos::Verb),
            "a" => Some(Pos::Adjective),
            "r" => Some(Pos::Adverb),
            _ => None,
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            Pos::Noun => "n",
            Pos::Verb => "v",
            Pos::Adjective => "a",
            Pos::Adverb => "r",
        }
    }
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// Lowercases and joins whitespace-separated multiword pieces with `_`.
///
/// Both the graph loader and the corpus reader run lemmas through this so the
/// two sides share one joining key.
pub fn normalize_lemma(raw: &str) -> String {
    let mut out = String::with_capacity(raw.len());
    for (i, piece) in raw.split_whitespace().enumerate() {
        if i > 0 {
            out.push('_');
        }
        out.extend(piece.chars().flat_map(char::to_lowercase));
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct Synset {
    pub id: SynsetId,
    pub pos: Pos,
    /// Normalized, sorted and duplicate-free.
    lemmas: Vec<String>,
}

impl Synset {
    /// Lemmas are normalized; returns `None` if none survive normalization.
    pub fn new<I, S>(id: SynsetId, pos: Pos, lemmas: I) -> Option<Synset>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut lemmas: Vec<String> = lemmas
            .into_iter()
            .map(|l| normalize_lemma(l.as_ref()))
            .filter(|l| !l.is_empty())
            .collect();
        if lemmas.is_empty() {
            return None;
        }
        lemmas.sort_unstable();
        lemmas.dedup();
        Some(Synset { id, pos, lemmas })
    }

    pub fn lemmas(&self) -> &[String] {
        &self.lemmas
    }

    pub fn contains_lemma(&self, lemma: &str) -> bool {
        self.lemmas
            .binary_search_by(|l| l.as_str().cmp(lemma))
            .is_ok()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GraphLoadOptions {
    /// Add the reverse of every edge.
    pub symmetrize: bool,
}

impl Default for GraphLoadOptions {
    fn default() -> Self {
        GraphLoadOptions { symmetrize: true }
    }
}

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("failed to read {}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("{}:{line}: {reason}", path.display())]
    Malformed {
        path: PathBuf,
        line: usize,
        reason: String,
    },
    #[error("{}:{line}: edge references unknown synset `{id}`", path.display())]
    UnknownSynset {
        path: PathBuf,
        line: usize,
        id: String,
    },
    #[error("{}:{line}: duplicate synset `{id}`", path.display())]
    DuplicateSynset {
        path: PathBuf,
        line: usize,
        id: String,
    },
    #[error("graph has no synsets")]
    Empty,
}

/// Errors raised by [`GraphBuilder`] before file context is attached.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BuildError {
    #[error("duplicate synset `{0}`")]
    DuplicateSynset(String),
    #[error("unknown synset `{0}`")]
    UnknownSynset(String),
    #[error("graph has no synsets")]
    Empty,
}

/// Incremental construction of a [`SemanticGraph`]; the file loader is a thin
/// wrapper around this.
#[derive(Debug, Default)]
pub struct GraphBuilder {
    synsets: Vec<Synset>,
    index: HashMap<SynsetId, u32>,
    edges: Vec<(u32, u32)>,
}

impl GraphBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_synset(&mut self, synset: Synset) -> Result<usize, BuildError> {
        if self.index.contains_key(&synset.id) {
            return Err(BuildError::DuplicateSynset(synset.id.to_string()));
        }
        let idx = self.synsets.len();
        assert!(idx < u32::MAX as usize, "too many synsets");
        self.index.insert(synset.id.clone(), idx as u32);
        self.synsets.push(synset);
        Ok(idx)
    }

    pub fn add_edge(&mut self, src: &str, dst: &str) -> Result<(), BuildError> {
        let s = *self
            .index
            .get(src)
            .ok_or_else(|| BuildError::UnknownSynset(src.to_string()))?;
        let d = *self
            .index
            .get(dst)
            .ok_or_else(|| BuildError::UnknownSynset(dst.to_string()))?;
        self.edges.push((s, d));
        Ok(())
    }

    pub fn build(self, options: GraphLoadOptions) -> Result<SemanticGraph, BuildError> {
        if self.synsets.is_empty() {
            return Err(BuildError::Empty);
        }
        let n = self.synsets.len();
        let mut edges = self.edges;
        if options.symmetrize {
            let reversed: Vec<(u32, u32)> = edges.iter().map(|&(s, d)| (d, s)).collect();
            edges.extend(reversed);
        }
        edges.retain(|&(s, d)| s != d);
        edges.sort_unstable();
        edges.dedup();

        let (out_offsets, out_targets) = csr(n, edges.iter().copied());
        let mut reversed: Vec<(u32, u32)> = edges.iter().map(|&(s, d)| (d, s)).collect();
        reversed.sort_unstable();
        let (in_offsets, in_sources) = csr(n, reversed.into_iter());

        let mut lemma_nodes: HashMap<String, Vec<u32>> = HashMap::new();
        for (i, s) in self.synsets.iter().enumerate() {
            for l in &s.lemmas {
                lemma_nodes.entry(l.clone()).or_default().push(i as u32);
            }
        }

        Ok(SemanticGraph {
            synsets: self.synsets,
            index: self.index,
            out_offsets,
            out_targets,
            in_offsets,
            in_sources,
            lemma_nodes,
        })
    }
}

/// Builds CSR arrays from edges sorted by source.
fn csr(n: usize, sorted: impl Iterator<Item = (u32, u32)>) -> (Vec<usize>, Vec<u32>) {
    let mut offsets = vec![0usize; n + 1];
    let mut targets = Vec::new();
    for (s, d) in sorted {
        offsets[s as usize + 1] += 1;
        targets.push(d);
    }
    for i in 0..n {
        offsets[i + 1] += offsets[i];
    }
    (offsets, targets)
}

/// Immutable synset graph. Safe for concurrent reads.
#[derive(Debug)]
pub struct SemanticGraph {
    synsets: Vec<Synset>,
    index: HashMap<SynsetId, u32>,
    out_offsets: Vec<usize>,
    out_targets: Vec<u32>,
    in_offsets: Vec<usize>,
    in_sources: Vec<u32>,
    lemma_nodes: HashMap<String, Vec<u32>>,
}

impl SemanticGraph {
    pub fn len(&self) -> usize {
        self.synsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.synsets.is_empty()
    }

    /// Number of directed edges.
    pub fn edge_count(&self) -> usize {
        self.out_targets.len()
    }

    pub fn synsets(&self) -> &[Synset] {
        &self.synsets
    }

    pub fn synset(&self, node: usize) -> &Synset {
        &self.synsets[node]
    }

    pub fn id(&self, node: usize) -> &SynsetId {
        &self.synsets[node].id
    }

    pub fn node(&self, id: &str) -> Option<usize> {
        self.index.get(id).map(|&i| i as usize)
    }

    pub fn get(&self, id: &str) -> Option<&Synset> {
        self.node(id).map(|i| &self.synsets[i])
    }

    /// Out-neighbors in ascending node order.
    pub fn out_neighbors(&self, node: usize) -> &[u32] {
        &self.out_targets[self.out_offsets[node]..self.out_offsets[node + 1]]
    }

    /// In-neighbors in ascending node order.
    pub fn in_neighbors(&self, node: usize) -> &[u32] {
        &self.in_sources[self.in_offsets[node]..self.in_offsets[node + 1]]
    }

    pub(crate) fn in_offsets_raw(&self) -> &[usize] {
        &self.in_offsets
    }

    pub(crate) fn in_sources_raw(&self) -> &[u32] {
        &self.in_sources
    }

    pub fn out_degree(&self, node: usize) -> usize {
        self.out_offsets[node + 1] - self.out_offsets[node]
    }

    /// Nodes whose lemma set contains `lemma`, in file order.
    pub fn nodes_with_lemma(&self, lemma: &str) -> &[u32] {
        self.lemma_nodes.get(lemma).map_or(&[], Vec::as_slice)
    }

    pub fn has_lemma(&self, lemma: &str) -> bool {
        self.lemma_nodes.contains_key(lemma)
    }

    /// Writes a canonical text form: the synsets file followed by a blank line
    /// and the edges file, both in node order.
    pub fn write_canonical<W: Write>(&self, mut w: W) -> io::Result<()> {
        for s in &self.synsets {
            writeln!(w, "{}\t{}\t{}", s.id, s.pos, s.lemmas.join("|"))?;
        }
        writeln!(w)?;
        for u in 0..self.len() {
            for &v in self.out_neighbors(u) {
                writeln!(w, "{}\t{}", self.id(u), self.id(v as usize))?;
            }
        }
        Ok(())
    }

    pub fn degree_stats(&self) -> DegreeStats {
        let mut degrees: Vec<usize> = (0..self.len()).map(|u| self.out_degree(u)).collect();
        let dangling = degrees.iter().filter(|&&d| d == 0).count();
        degrees.sort_unstable();
        let mut deciles = [0usize; 11];
        if !degrees.is_empty() {
            let last = degrees.len() - 1;
            for (i, d) in deciles.iter_mut().enumerate() {
                *d = degrees[i * last / 10];
            }
        }
        DegreeStats {
            nodes: self.len(),
            edges: self.edge_count(),
            dangling,
            out_degree_deciles: deciles,
        }
    }
}

/// Node/edge counts and the out-degree distribution.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DegreeStats {
    pub nodes: usize,
    pub edges: usize,
    /// Nodes with out-degree 0.
    pub dangling: usize,
    /// Out-degree at the 0th, 10th, ..., 100th percentile (nearest rank).
    pub out_degree_deciles: [usize; 11],
}

impl fmt::Display for DegreeStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "nodes={}", self.nodes)?;
        writeln!(f, "edges={}", self.edges)?;
        writeln!(f, "dangling={}", self.dangling)?;
        let deciles: Vec<String> = self
            .out_degree_deciles
            .iter()
            .map(|d| d.to_string())
            .collect();
        write!(f, "out_degree_deciles={}", deciles.join(","))
    }
}
