//! The `senseforge` command line.
//!
//! Every subcommand accepts `--config FILE`, a `key=value` file whose keys
//! are long flag names. Its entries are applied before the command line, so
//! explicit flags win.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use crate::graph::{GraphError, GraphLoadOptions, Lexicon, Pos, SemanticGraph};
use crate::pipeline::{self, compute_stats, PipelineConfig, PipelineError, SYNSETS_ATTRIBUTE};
use crate::profiler::{profile_all, PprParams, ProfileAllOptions, ProfileError, ProfileStore, StoreError};
use crate::ranker::SelectionParams;
use crate::scorer::PriorKind;

pub const THREADS_ENV: &str = "SENSEFORGE_THREADS";

/// Flags that take no value in a config file entry.
const SWITCHES: &[&str] = &["resume", "no-symmetrize"];

#[derive(Debug, Parser)]
#[command(name = "senseforge", version, about = "Sense-annotate a raw corpus over a semantic graph")]
#[command(args_override_self = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute the lexical profile of every synset
    Profile(ProfileArgs),
    /// Annotate a corpus with a profile store
    Annotate(AnnotateArgs),
    /// Print statistics of an annotated corpus
    Stats(StatsArgs),
}

#[derive(Debug, Args)]
pub struct ProfileArgs {
    /// Synsets file (ID, POS, lemmas)
    #[arg(long)]
    pub synsets: PathBuf,
    /// Edges file (source ID, target ID)
    #[arg(long)]
    pub edges: PathBuf,
    /// Keep edges directed as given
    #[arg(long)]
    pub no_symmetrize: bool,
    /// Probability of following an edge rather than restarting
    #[arg(long, default_value_t = PprParams::default().alpha, value_parser = open_unit)]
    pub alpha: f64,
    /// L1 convergence threshold
    #[arg(long, default_value_t = PprParams::default().epsilon, value_parser = positive_f64)]
    pub epsilon: f64,
    #[arg(long, default_value_t = PprParams::default().max_iters, value_parser = positive_usize)]
    pub max_iters: usize,
    /// Entries kept per profile
    #[arg(long, default_value_t = PprParams::default().top_n, value_parser = positive_usize)]
    pub top_n: usize,
    /// Store directory to write
    #[arg(long, visible_alias = "store")]
    pub out: PathBuf,
    /// Worker threads, 0 for all cores
    #[arg(long, env = THREADS_ENV, default_value_t = 0)]
    pub threads: usize,
    /// Keep profiles already in the store
    #[arg(long)]
    pub resume: bool,
    /// key=value file of defaults for these flags
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum PosArg {
    #[value(name = "n")]
    Noun,
    #[value(name = "v")]
    Verb,
    #[value(name = "a")]
    Adjective,
    #[value(name = "r")]
    Adverb,
    #[value(name = "all")]
    All,
}

impl PosArg {
    fn filter(self) -> Option<Pos> {
        match self {
            PosArg::Noun => Some(Pos::Noun),
            PosArg::Verb => Some(Pos::Verb),
            PosArg::Adjective => Some(Pos::Adjective),
            PosArg::Adverb => Some(Pos::Adverb),
            PosArg::All => None,
        }
    }
}

#[derive(Debug, Args)]
pub struct AnnotateArgs {
    /// Synsets file [default: the one recorded in the store]
    #[arg(long)]
    pub synsets: Option<PathBuf>,
    /// Sense ranking file [default: synsets file order]
    #[arg(long)]
    pub ranking: Option<PathBuf>,
    /// Profile store directory
    #[arg(long)]
    pub store: PathBuf,
    /// Corpus file, one sentence of surface|lemma|pos tokens per line
    #[arg(long)]
    pub corpus: PathBuf,
    /// Lemmas never used as context
    #[arg(long)]
    pub stopwords: Option<PathBuf>,
    /// Examples for the first sense of each lemma
    #[arg(long, default_value_t = SelectionParams::default().k, value_parser = positive_usize)]
    pub k: usize,
    /// Zipf exponent of the per-sense quota
    #[arg(long, default_value_t = SelectionParams::default().z, value_parser = non_negative_f64)]
    pub z: f64,
    /// Prior over the senses of a word
    #[arg(long, value_enum, default_value_t = PriorKind::default())]
    pub prior: PriorKind,
    /// Minimum confidence of a selected occurrence
    #[arg(long, default_value_t = SelectionParams::default().min_confidence, value_parser = closed_unit)]
    pub min_confidence: f64,
    /// Part of speech of target words
    #[arg(long, value_enum, default_value_t = PosArg::All)]
    pub pos: PosArg,
    /// Worker threads, 0 for all cores
    #[arg(long, env = THREADS_ENV, default_value_t = 0)]
    pub threads: usize,
    /// Output directory
    #[arg(long)]
    pub out: PathBuf,
    /// key=value file of defaults for these flags
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    /// Annotated corpus file
    pub annotations: PathBuf,
    /// Synsets file [default: the one recorded in --store]
    #[arg(long)]
    pub synsets: Option<PathBuf>,
    /// Profile store whose synsets file to use
    #[arg(long)]
    pub store: Option<PathBuf>,
    /// key=value file of defaults for these flags
    #[arg(long)]
    pub config: Option<PathBuf>,
}

fn parse_f64(s: &str) -> Result<f64, String> {
    s.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| format!("`{s}` is not a number"))
}

fn open_unit(s: &str) -> Result<f64, String> {
    let v = parse_f64(s)?;
    if v > 0.0 && v < 1.0 {
        Ok(v)
    } else {
        Err("must lie strictly between 0 and 1".into())
    }
}

fn closed_unit(s: &str) -> Result<f64, String> {
    let v = parse_f64(s)?;
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err("must lie in [0, 1]".into())
    }
}

fn positive_f64(s: &str) -> Result<f64, String> {
    let v = parse_f64(s)?;
    if v > 0.0 {
        Ok(v)
    } else {
        Err("must be positive".into())
    }
}

fn non_negative_f64(s: &str) -> Result<f64, String> {
    let v = parse_f64(s)?;
    if v >= 0.0 {
        Ok(v)
    } else {
        Err("must not be negative".into())
    }
}

fn positive_usize(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(v) if v >= 1 => Ok(v),
        _ => Err("must be a positive integer".into()),
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Profile(#[from] ProfileError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Graph(_) => "graph",
            CliError::Profile(_) => "profile",
            CliError::Store(_) => "store",
            CliError::Pipeline(PipelineError::MissingInput { .. }) => "missing_input",
            CliError::Pipeline(PipelineError::Record { .. }) => "record",
            CliError::Pipeline(PipelineError::Io { .. }) => "io",
            CliError::Pipeline(_) => "pipeline",
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }
}

/// Reads a `key=value` config file into flag arguments.
pub fn config_args(path: &Path) -> Result<Vec<OsString>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    let mut args = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            CliError::Usage(format!("{}:{}: expected key=value", path.display(), i + 1))
        })?;
        let key = key.trim().trim_start_matches("--").replace('_', "-");
        let value = value.trim();
        if key == "config" {
            return Err(CliError::Usage(format!(
                "{}:{}: config files cannot nest",
                path.display(),
                i + 1
            )));
        }
        if SWITCHES.contains(&key.as_str()) {
            match value {
                "true" | "1" | "yes" => args.push(format!("--{key}").into()),
                "false" | "0" | "no" => {}
                _ => {
                    return Err(CliError::Usage(format!(
                        "{}:{}: `{key}` takes true or false",
                        path.display(),
                        i + 1
                    )))
                }
            }
        } else {
            args.push(format!("--{key}={value}").into());
        }
    }
    Ok(args)
}

/// Splices config-file entries in front of the subcommand's own flags.
fn expand_config(args: Vec<OsString>) -> Result<Vec<OsString>, CliError> {
    let mut config = None;
    let mut iter = args.iter().enumerate();
    while let Some((_, a)) = iter.next() {
        let Some(s) = a.to_str() else { continue };
        if s == "--" {
            break;
        }
        if s == "--config" {
            config = iter.next().map(|(_, v)| PathBuf::from(v));
        } else if let Some(v) = s.strip_prefix("--config=") {
            config = Some(PathBuf::from(v));
        }
    }
    let Some(path) = config else { return Ok(args) };
    if args.len() < 2 {
        return Ok(args);
    }
    let mut out = args[..2].to_vec();
    out.extend(config_args(&path)?);
    out.extend_from_slice(&args[2..]);
    Ok(out)
}

fn profile(args: ProfileArgs) -> Result<(), CliError> {
    let params = PprParams {
        alpha: args.alpha,
        epsilon: args.epsilon,
        max_iters: args.max_iters,
        top_n: args.top_n,
    };
    let symmetrize = !args.no_symmetrize;
    let graph = SemanticGraph::load(&args.synsets, &args.edges, GraphLoadOptions { symmetrize })?;
    log::info!("graph: {}", graph.degree_stats());
    let absolute = |p: &Path| std::path::absolute(p).unwrap_or_else(|_| p.to_path_buf());
    let mut options = ProfileAllOptions {
        threads: args.threads,
        resume: args.resume,
        ..Default::default()
    };
    options.attributes.insert(
        SYNSETS_ATTRIBUTE.into(),
        absolute(&args.synsets).display().to_string(),
    );
    options
        .attributes
        .insert("edges".into(), absolute(&args.edges).display().to_string());
    options
        .attributes
        .insert("symmetrize".into(), symmetrize.to_string());
    let run = profile_all(&graph, &params, None, &args.out, &options)?;
    println!(
        "profiled {} synsets ({} reused, {} not converged) into {}",
        run.computed,
        run.reused,
        run.unconverged,
        args.out.display()
    );
    Ok(())
}

fn annotate(args: AnnotateArgs) -> Result<(), CliError> {
    let config = PipelineConfig {
        synsets: args.synsets,
        ranking: args.ranking,
        store: args.store,
        corpus: args.corpus,
        stopwords: args.stopwords,
        out: args.out,
        selection: SelectionParams {
            k: args.k,
            z: args.z,
            min_confidence: args.min_confidence,
        },
        prior: args.prior,
        threads: args.threads,
        pos: args.pos.filter(),
    };
    let report = pipeline::run(&config)?;
    print!("{}", report.stats);
    println!("annotations: {}", report.annotations_path.display());
    println!("report: {}", report.report_path.display());
    Ok(())
}

fn stats(args: StatsArgs) -> Result<(), CliError> {
    let synsets = match (&args.synsets, &args.store) {
        (Some(p), _) => p.clone(),
        (None, Some(store)) => pipeline::resolve_synsets(None, &ProfileStore::open(store)?)?,
        (None, None) => return Err(CliError::Usage("pass --synsets or --store".into())),
    };
    let graph = SemanticGraph::load_synsets(&synsets)?;
    let lexicon = Lexicon::build(&graph, None)?;
    print!("{}", compute_stats(&args.annotations, &lexicon)?);
    Ok(())
}

pub fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Profile(a) => profile(a),
        Command::Annotate(a) => annotate(a),
        Command::Stats(a) => stats(a),
    }
}

fn report(err: &CliError) -> ExitCode {
    let code = err.exit_code();
    let message = err.to_string().replace(['\t', '\n'], " ");
    eprintln!("error\tkind={}\texit={code}\tmessage={message}", err.kind());
    ExitCode::from(code)
}

/// Runs the binary on `args` (program name first) and returns its status.
pub fn main_with(args: Vec<OsString>) -> ExitCode {
    let args = match expand_config(args) {
        Ok(a) => a,
        Err(e) => return report(&e),
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            if !e.use_stderr() {
                return ExitCode::SUCCESS;
            }
            return report(&CliError::Usage(e.kind().to_string()));
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e}");
            report(&e)
        }
    }
}

pub fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    main_with(std::env::args_os().collect())
}
