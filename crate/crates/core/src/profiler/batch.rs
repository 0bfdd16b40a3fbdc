use std::collections::{BTreeMap, HashSet};
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;

use super::kernel::{run_lanes, LaneOutcome, Transition, Workspace};
use super::{truncate, PprParams, ProfileError, ProfileStore, StoreMeta, StoreWriter};
use crate::graph::{SemanticGraph, SynsetId};

/// Sources sharing one sweep over the edges.
const LANES: usize = 4;

#[derive(Clone, Debug, Default)]
pub struct ProfileAllOptions {
    /// Worker threads; 0 uses every available core.
    pub threads: usize,
    /// Keep profiles already in the store and compute only the rest.
    pub resume: bool,
    /// Extra `key=value` pairs recorded in the store's meta file.
    pub attributes: BTreeMap<String, String>,
}

#[derive(Debug)]
pub struct ProfileRun {
    pub store: ProfileStore,
    /// Profiles computed by this run.
    pub computed: usize,
    /// Profiles found in the store and skipped.
    pub reused: usize,
    /// Computed profiles that hit `max_iters` before converging.
    pub unconverged: usize,
}

struct Computed {
    node: usize,
    entries: Vec<(u32, f64)>,
    outcome: LaneOutcome,
}

fn run_batch(
    graph: &SemanticGraph,
    transition: &Transition,
    params: &PprParams,
    ws: &mut Workspace<LANES>,
    sources: &[usize],
) -> Vec<Computed> {
    let mut out: Vec<Option<Computed>> = (0..sources.len()).map(|_| None).collect();
    run_lanes(graph, transition, sources, params, ws, |lane, outcome, values| {
        let entries = truncate(
            graph,
            values.iter().map(|v| v[lane]).enumerate(),
            params.top_n,
        );
        out[lane] = Some(Computed {
            node: sources[lane],
            entries,
            outcome,
        });
    });
    out.into_iter()
        .map(|c| c.expect("every lane reports"))
        .collect()
}

/// Computes the lexical profile of every target (default: every node) and
/// writes them to the store at `dir`.
///
/// Records are written in target order regardless of the thread count, so
/// two runs with the same inputs produce byte-identical stores.
pub fn profile_all(
    graph: &SemanticGraph,
    params: &PprParams,
    targets: Option<&[SynsetId]>,
    dir: &Path,
    options: &ProfileAllOptions,
) -> Result<ProfileRun, ProfileError> {
    params.validate()?;
    let nodes: Vec<usize> = match targets {
        None => (0..graph.len()).collect(),
        Some(ids) => {
            let mut seen = HashSet::new();
            let mut nodes = Vec::with_capacity(ids.len());
            for id in ids {
                let u = graph
                    .node(id.as_str())
                    .ok_or_else(|| ProfileError::UnknownSource(id.to_string()))?;
                if seen.insert(u) {
                    nodes.push(u);
                }
            }
            nodes
        }
    };

    let meta = StoreMeta {
        params: *params,
        attributes: options.attributes.clone(),
    };
    let (mut writer, existing) = StoreWriter::open(dir, &meta, options.resume)?;
    let pending: Vec<usize> = nodes
        .iter()
        .copied()
        .filter(|&u| !existing.contains(graph.id(u)))
        .collect();
    let reused = nodes.len() - pending.len();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(options.threads)
        .build()
        .expect("thread pool");
    let threads = pool.current_num_threads();
    let transition = Transition::new(graph, params.alpha);
    let chunk = LANES * threads * 8;
    let started = Instant::now();
    let mut computed = 0usize;
    let mut unconverged = 0usize;

    for (i, part) in pending.chunks(chunk).enumerate() {
        let results: Vec<Vec<Computed>> = pool.install(|| {
            part.par_chunks(LANES)
                .map_init(
                    || Workspace::<LANES>::new(graph.len()),
                    |ws, sources| run_batch(graph, &transition, params, ws, sources),
                )
                .collect()
        });
        for c in results.iter().flatten() {
            if !c.outcome.converged {
                unconverged += 1;
            }
            writer.append(
                graph.id(c.node).as_str(),
                c.entries
                    .iter()
                    .map(|&(u, p)| (graph.id(u as usize).as_str(), p)),
            )?;
        }
        writer.flush()?;
        computed += part.len();
        if i % 16 == 15 {
            log::info!(
                "profiled {computed}/{} sources in {:.1}s",
                pending.len(),
                started.elapsed().as_secs_f64()
            );
        }
    }
    writer.finish()?;
    if unconverged > 0 {
        log::warn!("{unconverged} profiles did not converge within {} iterations", params.max_iters);
    }
    log::info!(
        "profiled {computed} sources ({reused} reused) with {threads} threads in {:.1}s",
        started.elapsed().as_secs_f64()
    );

    Ok(ProfileRun {
        store: ProfileStore::open(dir)?,
        computed,
        reused,
        unconverged,
    })
}
