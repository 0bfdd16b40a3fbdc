//! Corpus in, annotated corpus out.
//!
//! Sentences stream from the corpus file in fixed-size batches. Each batch
//! is filtered for target words, scored on the worker pool, and fed in file
//! order to the streaming selector, so memory stays bounded by the batch
//! size, the kept candidates and the profiles touched.

mod corpus;
mod output;
mod stats;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rayon::prelude::*;
use thiserror::Error;

use crate::graph::{GraphError, Lexicon, Pos, SemanticGraph, SynsetId};
use crate::profiler::{CachedProfiles, ProfileStore, StoreError};
use crate::ranker::{BucketSummary, InvalidSelection, ScoredCandidate, SelectionParams, Selector};
use crate::scorer::{PriorKind, ScoreError, Scored, Scorer, Sentence, Stopwords};

pub use corpus::{parse_sentence, parse_token, target_positions, CorpusLine, CorpusReader, SkipReason};
pub use output::{format_candidate, parse_record, AnnotationRecord, FORMAT_TAG, HEADER, TOP_SENSES};
pub use stats::{compute_stats, CorpusStats, StatsAccumulator};

pub const ANNOTATIONS_FILE: &str = "annotations.tsv";
pub const REPORT_FILE: &str = "report.txt";
pub const TIMING_FILE: &str = "timing.txt";

/// Store attribute naming the synsets file the profiles were computed on.
pub const SYNSETS_ATTRIBUTE: &str = "synsets";

/// Sentences scored per batch.
const BATCH: usize = 4096;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{what} not found: {}", path.display())]
    MissingInput { what: &'static str, path: PathBuf },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Selection(#[from] InvalidSelection),
    #[error("loading graph: {0}")]
    Graph(#[from] GraphError),
    #[error("profile store: {0}")]
    Store(#[from] StoreError),
    #[error("{stage}: {}: {source}", path.display())]
    Io {
        stage: &'static str,
        path: PathBuf,
        source: io::Error,
    },
    #[error("{}:{line}: {reason}", path.display())]
    Record {
        path: PathBuf,
        line: usize,
        reason: String,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineConfig {
    /// Synsets file; read from the store's meta when absent.
    pub synsets: Option<PathBuf>,
    pub ranking: Option<PathBuf>,
    pub store: PathBuf,
    pub corpus: PathBuf,
    pub stopwords: Option<PathBuf>,
    pub out: PathBuf,
    pub selection: SelectionParams,
    pub prior: PriorKind,
    /// Worker threads; 0 uses every available core.
    pub threads: usize,
    /// Restricts targets to one part of speech.
    pub pos: Option<Pos>,
}

impl PipelineConfig {
    pub fn new(store: impl Into<PathBuf>, corpus: impl Into<PathBuf>, out: impl Into<PathBuf>) -> Self {
        PipelineConfig {
            synsets: None,
            ranking: None,
            store: store.into(),
            corpus: corpus.into(),
            stopwords: None,
            out: out.into(),
            selection: SelectionParams::default(),
            prior: PriorKind::default(),
            threads: 0,
            pos: None,
        }
    }

    /// Checks parameters and input paths before any work starts.
    pub fn validate(&self) -> Result<(), PipelineError> {
        self.selection.validate()?;
        let must_exist = |what, path: &Path| {
            if path.exists() {
                Ok(())
            } else {
                Err(PipelineError::MissingInput {
                    what,
                    path: path.to_path_buf(),
                })
            }
        };
        must_exist("profile store", &self.store)?;
        must_exist("corpus", &self.corpus)?;
        if let Some(p) = &self.synsets {
            must_exist("synsets file", p)?;
        }
        if let Some(p) = &self.ranking {
            must_exist("ranking file", p)?;
        }
        if let Some(p) = &self.stopwords {
            must_exist("stopword file", p)?;
        }
        if self.out.exists() && !self.out.is_dir() {
            return Err(PipelineError::Config(format!(
                "output path {} is not a directory",
                self.out.display()
            )));
        }
        Ok(())
    }
}

/// Synsets file for `store`: the explicit path, else the one recorded when
/// the store was built.
pub fn resolve_synsets(explicit: Option<&Path>, store: &ProfileStore) -> Result<PathBuf, PipelineError> {
    if let Some(p) = explicit {
        return Ok(p.to_path_buf());
    }
    let recorded = store
        .meta()
        .and_then(|m| m.attributes.get(SYNSETS_ATTRIBUTE))
        .ok_or_else(|| {
            PipelineError::Config(format!(
                "store {} does not record its synsets file; pass it explicitly",
                store.dir().display()
            ))
        })?;
    let path = PathBuf::from(recorded);
    if !path.exists() {
        return Err(PipelineError::MissingInput {
            what: "synsets file recorded in the store",
            path,
        });
    }
    Ok(path)
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RunCounters {
    pub lines: usize,
    pub sentences: usize,
    /// Skipped lines by reason label.
    pub skipped: BTreeMap<&'static str, usize>,
    pub sentences_without_targets: usize,
    pub occurrences: usize,
    /// Occurrences where at least one candidate sense had no profile.
    pub occurrences_missing_profile: usize,
    /// Distinct senses that had no profile.
    pub senses_without_profile: usize,
    /// Candidates whose sense was not in the lexicon entry.
    pub unknown_sense: usize,
    pub annotations: usize,
}

#[derive(Clone, Debug)]
pub struct RunReport {
    pub stats: CorpusStats,
    pub counters: RunCounters,
    pub buckets: Vec<BucketSummary>,
    pub timings: Vec<(&'static str, Duration)>,
    pub annotations_path: PathBuf,
    pub report_path: PathBuf,
}

impl RunReport {
    /// The report file contents. Timings are left out so that identical
    /// runs give identical reports.
    pub fn render(&self, config: &PipelineConfig, synsets: &Path) -> String {
        let c = &self.counters;
        let opt = |p: &Option<PathBuf>| p.as_ref().map_or("-".to_string(), |p| p.display().to_string());
        let mut out = String::new();
        let _ = writeln!(out, "format=senseforge-report-v1");
        let _ = writeln!(out, "corpus={}", config.corpus.display());
        let _ = writeln!(out, "store={}", config.store.display());
        let _ = writeln!(out, "synsets={}", synsets.display());
        let _ = writeln!(out, "ranking={}", opt(&config.ranking));
        let _ = writeln!(out, "stopwords={}", opt(&config.stopwords));
        let _ = writeln!(out, "k={}", config.selection.k);
        let _ = writeln!(out, "z={}", config.selection.z);
        let _ = writeln!(out, "min_confidence={}", config.selection.min_confidence);
        let _ = writeln!(out, "prior={}", config.prior);
        let _ = writeln!(out, "pos={}", config.pos.map_or("all", Pos::tag));
        let _ = writeln!(out, "lines_read={}", c.lines);
        let _ = writeln!(out, "sentences_parsed={}", c.sentences);
        for label in ["empty_line", "malformed_token"] {
            let _ = writeln!(out, "skipped_{label}={}", c.skipped.get(label).unwrap_or(&0));
        }
        let _ = writeln!(out, "sentences_without_targets={}", c.sentences_without_targets);
        let _ = writeln!(out, "occurrences_scored={}", c.occurrences);
        let _ = writeln!(out, "occurrences_missing_profile={}", c.occurrences_missing_profile);
        let _ = writeln!(out, "senses_without_profile={}", c.senses_without_profile);
        let _ = writeln!(out, "unknown_sense_dropped={}", c.unknown_sense);
        let _ = writeln!(out, "annotations_written={}", c.annotations);
        let _ = writeln!(out, "\n[stats]\n{}", self.stats.to_kv());
        let _ = writeln!(out, "[table]\n{}", self.stats);
        let _ = writeln!(out, "[buckets]");
        for b in &self.buckets {
            let _ = writeln!(out, "{b}");
        }
        out
    }

    pub fn render_timings(&self) -> String {
        self.timings
            .iter()
            .map(|(stage, d)| format!("{stage}={:.3}\n", d.as_secs_f64()))
            .collect()
    }
}

/// Writes `path` through a temporary file in the same directory, renamed
/// into place only once fully written.
pub fn write_atomic(
    path: &Path,
    stage: &'static str,
    body: impl FnOnce(&mut dyn Write) -> io::Result<()>,
) -> Result<(), PipelineError> {
    let err = |source| PipelineError::Io {
        stage,
        path: path.to_path_buf(),
        source,
    };
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let tmp = tempfile::NamedTempFile::new_in(dir).map_err(err)?;
    let mut w = BufWriter::new(tmp);
    body(&mut w).map_err(err)?;
    let tmp = w.into_inner().map_err(|e| err(e.into_error()))?;
    tmp.as_file().sync_all().map_err(err)?;
    tmp.persist(path).map_err(|e| err(e.error))?;
    Ok(())
}

struct Timer {
    stages: Vec<(&'static str, Duration)>,
}

impl Timer {
    fn add(&mut self, stage: &'static str, d: Duration) {
        match self.stages.iter_mut().find(|(s, _)| *s == stage) {
            Some((_, total)) => *total += d,
            None => self.stages.push((stage, d)),
        }
    }

    fn time<T>(&mut self, stage: &'static str, f: impl FnOnce() -> T) -> T {
        let t = Instant::now();
        let out = f();
        self.add(stage, t.elapsed());
        out
    }
}

/// Scores every target of every sentence in `batch`, in order.
fn score_batch(
    scorer: &Scorer<'_>,
    batch: &[(Sentence, Vec<usize>)],
) -> Result<Vec<(usize, usize, Scored)>, ScoreError> {
    let scored: Vec<Result<Vec<(usize, usize, Scored)>, ScoreError>> = batch
        .par_iter()
        .enumerate()
        .map(|(i, (sentence, targets))| {
            let context = scorer.context(sentence);
            targets
                .iter()
                .map(|&t| {
                    let key = corpus::target_key(sentence, t).expect("targets have a pos");
                    scorer.score_with_context(&key, &context).map(|s| (i, t, s))
                })
                .collect()
        })
        .collect();
    let mut out = Vec::new();
    for s in scored {
        out.extend(s?);
    }
    Ok(out)
}

pub fn run(config: &PipelineConfig) -> Result<RunReport, PipelineError> {
    config.validate()?;
    let mut timer = Timer { stages: Vec::new() };

    let load = Instant::now();
    let store = ProfileStore::open(&config.store)?;
    let synsets = resolve_synsets(config.synsets.as_deref(), &store)?;
    let graph = SemanticGraph::load_synsets(&synsets)?;
    let lexicon = Lexicon::build(&graph, config.ranking.as_deref())?;
    let stopwords = match &config.stopwords {
        Some(p) => Stopwords::load(p).map_err(|source| PipelineError::Io {
            stage: "loading stopwords",
            path: p.clone(),
            source,
        })?,
        None => Stopwords::default(),
    };
    let profiles = CachedProfiles::new(store, &graph);
    let scorer = Scorer::new(&graph, &lexicon, &profiles, &stopwords, config.prior);
    timer.add("load", load.elapsed());
    log::info!(
        "loaded {} synsets, {} lexicon entries, {} stored profiles",
        graph.len(),
        lexicon.len(),
        profiles.store().len()
    );

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.threads)
        .build()
        .map_err(|e| PipelineError::Config(format!("thread pool: {e}")))?;

    let corpus_err = |source| PipelineError::Io {
        stage: "reading corpus",
        path: config.corpus.clone(),
        source,
    };
    let mut reader = CorpusReader::open(&config.corpus).map_err(corpus_err)?;
    let mut counters = RunCounters::default();
    let mut selector = Selector::new(&lexicon, config.selection);
    let mut missing: BTreeSet<SynsetId> = BTreeSet::new();
    let mut batch: Vec<(Sentence, Vec<usize>)> = Vec::with_capacity(BATCH);
    let mut exhausted = false;

    while !exhausted {
        let read = Instant::now();
        batch.clear();
        while batch.len() < BATCH {
            let Some(line) = reader.next() else {
                exhausted = true;
                break;
            };
            counters.lines += 1;
            match line.map_err(corpus_err)? {
                CorpusLine::Sentence(s) => {
                    counters.sentences += 1;
                    let targets = target_positions(&s, &lexicon, config.pos);
                    if targets.is_empty() {
                        counters.sentences_without_targets += 1;
                    } else {
                        batch.push((s, targets));
                    }
                }
                CorpusLine::Skipped { line, reason } => {
                    log::debug!("{}:{line}: skipped ({reason:?})", config.corpus.display());
                    *counters.skipped.entry(reason.label()).or_default() += 1;
                }
            }
        }
        timer.add("read", read.elapsed());

        let scored = timer
            .time("score", || pool.install(|| score_batch(&scorer, &batch)))
            .map_err(|e| match e {
                ScoreError::Store(s) => PipelineError::Store(s),
                other => PipelineError::Config(format!("scoring: {other}")),
            })?;

        let select = Instant::now();
        for (i, position, s) in scored {
            counters.occurrences += 1;
            if !s.missing_profiles.is_empty() {
                counters.occurrences_missing_profile += 1;
                missing.extend(s.missing_profiles);
            }
            let sentence = &batch[i].0;
            let text = sentence
                .tokens
                .iter()
                .map(|t| t.surface.as_str())
                .collect::<Vec<_>>()
                .join(" ");
            selector.push(ScoredCandidate {
                sentence_id: sentence.id.clone(),
                position,
                distribution: s.distribution,
                text,
            });
        }
        timer.add("select", select.elapsed());
        log::info!(
            "scored {} occurrences in {} lines",
            counters.occurrences,
            counters.lines
        );
    }
    if !missing.is_empty() {
        log::warn!("{} candidate senses have no stored profile", missing.len());
    }
    counters.senses_without_profile = missing.len();

    let selection = timer.time("select", || selector.finish());
    counters.unknown_sense = selection.unknown_sense;
    counters.annotations = selection.selected.len();

    let write = Instant::now();
    fs::create_dir_all(&config.out).map_err(|source| PipelineError::Io {
        stage: "creating output directory",
        path: config.out.clone(),
        source,
    })?;
    let annotations_path = config.out.join(ANNOTATIONS_FILE);
    let mut acc = StatsAccumulator::new(&lexicon);
    let mut lines = Vec::with_capacity(selection.selected.len());
    for c in &selection.selected {
        let line = format_candidate(c);
        // Stats come from the record as written, so that recomputing them
        // from the file gives the same numbers.
        let record = parse_record(&line).expect("formatted records parse");
        acc.add(&record).expect("selected senses are in the lexicon");
        lines.push(line);
    }
    write_atomic(&annotations_path, "writing annotations", |w| {
        writeln!(w, "{HEADER}")?;
        for line in &lines {
            writeln!(w, "{line}")?;
        }
        Ok(())
    })?;
    timer.add("write", write.elapsed());

    let mut report = RunReport {
        stats: acc.finish(),
        counters,
        buckets: selection.buckets,
        timings: Vec::new(),
        annotations_path,
        report_path: config.out.join(REPORT_FILE),
    };
    let text = report.render(config, &synsets);
    write_atomic(&report.report_path, "writing report", |w| w.write_all(text.as_bytes()))?;
    report.timings = timer.stages;
    for (stage, d) in &report.timings {
        log::info!("stage {stage}: {:.3}s", d.as_secs_f64());
    }
    let timings = report.render_timings();
    write_atomic(&config.out.join(TIMING_FILE), "writing timings", |w| {
        w.write_all(timings.as_bytes())
    })?;
    Ok(report)
}
