//! Per-sense selection of annotated occurrences.
//!
//! Every scored occurrence is filed under its most likely sense. Within a
//! `(lemma, pos, sense)` bucket, occurrences are ranked by confidence and
//! the sense at position `i` of the lemma's ordering keeps at most
//! `floor(K / i^z)` of them.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};
use std::fmt;

use thiserror::Error;

use crate::graph::{LexKey, Lexicon, SynsetId};
use crate::scorer::SenseDistribution;

/// Margins are rounded to this grid, so that summation-order noise in the
/// probabilities never reorders candidates.
const MARGIN_GRID: f64 = 1e12;

/// `p1 - p2` of probabilities sorted in descending order; 1 for a single
/// sense.
pub fn margin(sorted: &[f64]) -> f64 {
    match sorted {
        [] | [_] => 1.0,
        [p1, p2, ..] => (((p1 - p2) * MARGIN_GRID).round() / MARGIN_GRID).clamp(0.0, 1.0),
    }
}

pub fn confidence(dist: &SenseDistribution) -> f64 {
    dist.confidence()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SelectionParams {
    /// Examples granted to the first sense of each lemma.
    pub k: usize,
    /// Zipf exponent.
    pub z: f64,
    /// Candidates below this margin are never selected.
    pub min_confidence: f64,
}

impl Default for SelectionParams {
    fn default() -> Self {
        SelectionParams {
            k: 100,
            z: 2.0,
            min_confidence: 0.0,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
#[error("invalid selection parameters: {0}")]
pub struct InvalidSelection(String);

impl SelectionParams {
    pub fn validate(&self) -> Result<(), InvalidSelection> {
        if self.k == 0 {
            return Err(InvalidSelection("k must be at least 1".into()));
        }
        if !(self.z >= 0.0 && self.z.is_finite()) {
            return Err(InvalidSelection("z must be a finite number >= 0".into()));
        }
        if !(0.0..=1.0).contains(&self.min_confidence) {
            return Err(InvalidSelection("min_confidence must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

/// Quota of the sense at 1-based position `index` of its lemma's ordering.
pub fn allocation(index: usize, params: &SelectionParams) -> usize {
    assert!(index >= 1, "sense positions start at 1");
    if params.z.fract() == 0.0 && params.z <= u32::MAX as f64 {
        // Exact in integers.
        return match (index as u128).checked_pow(params.z as u32) {
            Some(d) => (params.k as u128 / d) as usize,
            None => 0,
        };
    }
    (params.k as f64 / (index as f64).powf(params.z)).floor() as usize
}

/// One scored occurrence, filed under its most likely sense.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoredCandidate {
    pub sentence_id: String,
    /// Token position of the target.
    pub position: usize,
    pub distribution: SenseDistribution,
    /// Surface tokens of the sentence, space-joined.
    pub text: String,
}

impl ScoredCandidate {
    pub fn key(&self) -> LexKey {
        LexKey::new(self.distribution.lemma(), self.distribution.pos())
    }

    pub fn sense(&self) -> &SynsetId {
        self.distribution.best()
    }

    pub fn confidence(&self) -> f64 {
        self.distribution.confidence()
    }

    /// Selection order: confidence descending, then sentence id and position
    /// ascending. `Less` means `self` ranks first.
    pub fn rank_cmp(&self, other: &Self) -> Ordering {
        other
            .confidence()
            .total_cmp(&self.confidence())
            .then_with(|| self.sentence_id.cmp(&other.sentence_id))
            .then_with(|| self.position.cmp(&other.position))
    }
}

/// Heap entry whose maximum is the weakest kept candidate.
struct Ranked(ScoredCandidate);

impl PartialEq for Ranked {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Ranked {}

impl PartialOrd for Ranked {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Ranked {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.rank_cmp(&other.0)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BucketSummary {
    pub key: LexKey,
    pub sense: SynsetId,
    /// 1-based position in the lemma's sense ordering.
    pub index: usize,
    pub quota: usize,
    /// Occurrences whose best sense was this one.
    pub candidates: usize,
    /// Candidates at or above the confidence threshold.
    pub eligible: usize,
    pub kept: usize,
}

impl fmt::Display for BucketSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}\t{}\tindex={}\tcandidates={}\teligible={}\tkept={}\tquota={}",
            self.key, self.sense, self.index, self.candidates, self.eligible, self.kept, self.quota
        )
    }
}

struct Bucket {
    index: usize,
    quota: usize,
    candidates: usize,
    eligible: usize,
    heap: BinaryHeap<Ranked>,
}

/// Streaming selector. Memory is bounded by the sum of quotas, whatever
/// the number of candidates pushed.
pub struct Selector<'a> {
    lexicon: &'a Lexicon,
    params: SelectionParams,
    buckets: BTreeMap<(LexKey, usize), (SynsetId, Bucket)>,
    unknown_sense: usize,
}

impl<'a> Selector<'a> {
    pub fn new(lexicon: &'a Lexicon, params: SelectionParams) -> Self {
        Selector {
            lexicon,
            params,
            buckets: BTreeMap::new(),
            unknown_sense: 0,
        }
    }

    /// Returns false when the candidate's sense is not in the lexicon
    /// entry of its lemma; such candidates are counted and dropped.
    pub fn push(&mut self, candidate: ScoredCandidate) -> bool {
        let key = candidate.key();
        let Some(index) = self.lexicon.sense_index(&key, candidate.sense()) else {
            self.unknown_sense += 1;
            return false;
        };
        let params = self.params;
        let (_, bucket) = self
            .buckets
            .entry((key, index))
            .or_insert_with(|| {
                (
                    candidate.sense().clone(),
                    Bucket {
                        index,
                        quota: allocation(index, &params),
                        candidates: 0,
                        eligible: 0,
                        heap: BinaryHeap::new(),
                    },
                )
            });
        bucket.candidates += 1;
        if candidate.confidence() < params.min_confidence {
            return true;
        }
        bucket.eligible += 1;
        if bucket.quota == 0 {
            return true;
        }
        if bucket.heap.len() < bucket.quota {
            bucket.heap.push(Ranked(candidate));
        } else if let Some(mut worst) = bucket.heap.peek_mut() {
            if candidate.rank_cmp(&worst.0) == Ordering::Less {
                *worst = Ranked(candidate);
            }
        }
        true
    }

    pub fn finish(self) -> Selection {
        let mut summaries = Vec::with_capacity(self.buckets.len());
        let mut selected = Vec::new();
        for ((key, _), (sense, bucket)) in self.buckets {
            let mut kept: Vec<ScoredCandidate> =
                bucket.heap.into_vec().into_iter().map(|r| r.0).collect();
            kept.sort_by(ScoredCandidate::rank_cmp);
            summaries.push(BucketSummary {
                key,
                sense,
                index: bucket.index,
                quota: bucket.quota,
                candidates: bucket.candidates,
                eligible: bucket.eligible,
                kept: kept.len(),
            });
            selected.extend(kept);
        }
        Selection {
            buckets: summaries,
            selected,
            unknown_sense: self.unknown_sense,
        }
    }
}

/// Outcome of a selection, ordered by lemma, pos and sense position, then
/// by rank within each bucket.
#[derive(Clone, Debug, PartialEq)]
pub struct Selection {
    pub buckets: Vec<BucketSummary>,
    pub selected: Vec<ScoredCandidate>,
    /// Candidates dropped because their sense was not in the lexicon entry.
    pub unknown_sense: usize,
}

pub fn select(
    candidates: impl IntoIterator<Item = ScoredCandidate>,
    lexicon: &Lexicon,
    params: &SelectionParams,
) -> Selection {
    let mut selector = Selector::new(lexicon, *params);
    for c in candidates {
        selector.push(c);
    }
    selector.finish()
}
