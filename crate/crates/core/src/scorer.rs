//! Sense distributions for single target-word occurrences.
//!
//! A candidate sense `s` of the target scores
//! `P(s | w) * prod_i P(w_i | s, w)`, where `P(w_i | s, w)` is the highest
//! value in the profile of `s` among synsets that can express `w_i`. The
//! product runs over the context words of the sentence, target included,
//! and is carried in log space.

use std::collections::HashSet;
use std::fmt;
use std::io;
use std::path::Path;
use std::sync::Arc;

use thiserror::Error;

use crate::graph::{normalize_lemma, LexKey, Lexicon, Pos, SemanticGraph, SynsetId};
use crate::profiler::{IndexedProfile, ProfileSource, StoreError};
use crate::ranker;

/// Probability assigned to a context word that no synset of the profile
/// expresses.
pub const SMOOTHING_FLOOR: f64 = 1e-7;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Token {
    pub surface: String,
    pub lemma: String,
    /// `None` for the unknown tag `x`.
    pub pos: Option<Pos>,
}

impl Token {
    pub fn new(surface: impl Into<String>, lemma: impl Into<String>, pos: Option<Pos>) -> Self {
        Token {
            surface: surface.into(),
            lemma: lemma.into(),
            pos,
        }
    }

    pub fn pos_tag(&self) -> &'static str {
        self.pos.map_or("x", Pos::tag)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Sentence {
    pub id: String,
    pub tokens: Vec<Token>,
}

impl Sentence {
    pub fn new(id: impl Into<String>, tokens: Vec<Token>) -> Self {
        Sentence {
            id: id.into(),
            tokens,
        }
    }
}

/// Prior over the senses of a word.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, clap::ValueEnum)]
pub enum PriorKind {
    #[default]
    Uniform,
    /// `P(s | w)` proportional to `1 / index(s)`.
    Zipf,
}

impl PriorKind {
    fn log_weight(self, index: usize) -> f64 {
        match self {
            PriorKind::Uniform => 0.0,
            PriorKind::Zipf => -(index as f64).ln(),
        }
    }
}

impl fmt::Display for PriorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PriorKind::Uniform => "uniform",
            PriorKind::Zipf => "zipf",
        })
    }
}

/// Lemmas that never count as context.
#[derive(Clone, Debug, Default)]
pub struct Stopwords(HashSet<String>);

impl Stopwords {
    /// One lemma per line; blank lines and `#` comments are ignored.
    pub fn load(path: &Path) -> io::Result<Stopwords> {
        Ok(Stopwords::from_lines(&std::fs::read_to_string(path)?))
    }

    pub fn from_lines(text: &str) -> Stopwords {
        Stopwords(
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
                .map(normalize_lemma)
                .collect(),
        )
    }

    pub fn contains(&self, lemma: &str) -> bool {
        self.0.contains(lemma)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum DistributionError {
    #[error("distribution has no senses")]
    Empty,
    #[error("probability of `{0}` is not in (0, 1]")]
    OutOfRange(SynsetId),
    #[error("probabilities sum to {0}, not 1")]
    NotNormalized(f64),
}

/// Normalized probabilities over the candidate senses of one occurrence,
/// sorted by descending probability (ties by ascending id).
#[derive(Clone, Debug, PartialEq)]
pub struct SenseDistribution {
    lemma: String,
    pos: Pos,
    probabilities: Vec<(SynsetId, f64)>,
    confidence: f64,
}

impl SenseDistribution {
    pub fn new(
        lemma: impl Into<String>,
        pos: Pos,
        mut probabilities: Vec<(SynsetId, f64)>,
    ) -> Result<Self, DistributionError> {
        if probabilities.is_empty() {
            return Err(DistributionError::Empty);
        }
        if let Some((id, _)) = probabilities.iter().find(|(_, p)| !(*p > 0.0 && *p <= 1.0)) {
            return Err(DistributionError::OutOfRange(id.clone()));
        }
        let total: f64 = probabilities.iter().map(|(_, p)| p).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(DistributionError::NotNormalized(total));
        }
        sort_senses(&mut probabilities);
        Ok(Self::sorted(lemma.into(), pos, probabilities))
    }

    /// Normalizes unnormalized log scores with the max-shift trick.
    pub fn from_log_scores(lemma: impl Into<String>, pos: Pos, scores: Vec<(SynsetId, f64)>) -> Self {
        assert!(!scores.is_empty(), "no candidate senses");
        let top = scores
            .iter()
            .map(|(_, l)| *l)
            .fold(f64::NEG_INFINITY, f64::max);
        let weights: Vec<f64> = scores.iter().map(|(_, l)| (l - top).exp()).collect();
        let total: f64 = weights.iter().sum();
        let mut probabilities: Vec<(SynsetId, f64)> = scores
            .into_iter()
            .zip(weights)
            // Keep every sense strictly positive even for very long contexts.
            .map(|((id, _), w)| (id, (w / total).max(f64::MIN_POSITIVE)))
            .collect();
        sort_senses(&mut probabilities);
        Self::sorted(lemma.into(), pos, probabilities)
    }

    fn sorted(lemma: String, pos: Pos, probabilities: Vec<(SynsetId, f64)>) -> Self {
        let ps: Vec<f64> = probabilities.iter().map(|(_, p)| *p).collect();
        SenseDistribution {
            lemma,
            pos,
            confidence: ranker::margin(&ps),
            probabilities,
        }
    }

    pub fn lemma(&self) -> &str {
        &self.lemma
    }

    pub fn pos(&self) -> Pos {
        self.pos
    }

    pub fn probabilities(&self) -> &[(SynsetId, f64)] {
        &self.probabilities
    }

    pub fn best(&self) -> &SynsetId {
        &self.probabilities[0].0
    }

    /// Margin between the two most likely senses; 1 for a monosemous word.
    pub fn confidence(&self) -> f64 {
        self.confidence
    }

    pub fn get(&self, sense: &str) -> Option<f64> {
        self.probabilities
            .iter()
            .find(|(s, _)| s.as_str() == sense)
            .map(|(_, p)| *p)
    }
}

fn sort_senses(probabilities: &mut [(SynsetId, f64)]) {
    probabilities.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
}

/// Highest value in `profile` among synsets that contain `lemma` (and match
/// `pos`, when given), never less than [`SMOOTHING_FLOOR`].
pub fn word_probability(
    profile: &IndexedProfile,
    lemma: &str,
    pos: Option<Pos>,
    graph: &SemanticGraph,
) -> f64 {
    graph
        .nodes_with_lemma(lemma)
        .iter()
        .filter(|&&u| pos.is_none_or(|p| graph.synset(u as usize).pos == p))
        .filter_map(|&u| profile.get(u as usize))
        .fold(SMOOTHING_FLOOR, f64::max)
}

#[derive(Debug, Error)]
pub enum ScoreError {
    #[error("target position {position} is out of range for a sentence of {len} tokens")]
    TargetOutOfRange { position: usize, len: usize },
    #[error("`{0}` is not in the lexicon")]
    NotInLexicon(String),
    #[error(transparent)]
    Store(#[from] StoreError),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scored {
    pub distribution: SenseDistribution,
    /// Candidate senses without a stored profile; they were scored with the
    /// floor for every context word.
    pub missing_profiles: Vec<SynsetId>,
}

pub struct Scorer<'a> {
    graph: &'a SemanticGraph,
    lexicon: &'a Lexicon,
    profiles: &'a dyn ProfileSource,
    stopwords: &'a Stopwords,
    prior: PriorKind,
}

impl<'a> Scorer<'a> {
    pub fn new(
        graph: &'a SemanticGraph,
        lexicon: &'a Lexicon,
        profiles: &'a dyn ProfileSource,
        stopwords: &'a Stopwords,
        prior: PriorKind,
    ) -> Self {
        Scorer {
            graph,
            lexicon,
            profiles,
            stopwords,
            prior,
        }
    }

    /// Lemmas of the sentence that take part in the product, in token order.
    pub fn context<'s>(&self, sentence: &'s Sentence) -> Vec<&'s str> {
        sentence
            .tokens
            .iter()
            .map(|t| t.lemma.as_str())
            .filter(|l| self.graph.has_lemma(l) && !self.stopwords.contains(l))
            .collect()
    }

    pub fn score_occurrence(&self, sentence: &Sentence, target: usize) -> Result<Scored, ScoreError> {
        let token = sentence
            .tokens
            .get(target)
            .ok_or(ScoreError::TargetOutOfRange {
                position: target,
                len: sentence.tokens.len(),
            })?;
        let pos = token
            .pos
            .ok_or_else(|| ScoreError::NotInLexicon(format!("{}#x", token.lemma)))?;
        self.score_with_context(&LexKey::new(token.lemma.clone(), pos), &self.context(sentence))
    }

    /// Scores the senses of `key` against an already extracted context.
    pub fn score_with_context(&self, key: &LexKey, context: &[&str]) -> Result<Scored, ScoreError> {
        let senses = self
            .lexicon
            .get(key)
            .ok_or_else(|| ScoreError::NotInLexicon(key.to_string()))?;
        let mut missing = Vec::new();
        let mut scores = Vec::with_capacity(senses.len());
        for (i, sense) in senses.iter().enumerate() {
            let profile: Option<Arc<IndexedProfile>> = self.profiles.profile(sense)?;
            let mut log = self.prior.log_weight(i + 1);
            match &profile {
                Some(p) => {
                    for lemma in context {
                        log += word_probability(p, lemma, None, self.graph).ln();
                    }
                }
                None => {
                    missing.push(sense.clone());
                    log += context.len() as f64 * SMOOTHING_FLOOR.ln();
                }
            }
            scores.push((sense.clone(), log));
        }
        Ok(Scored {
            distribution: SenseDistribution::from_log_scores(key.lemma.clone(), key.pos, scores),
            missing_profiles: missing,
        })
    }
}
