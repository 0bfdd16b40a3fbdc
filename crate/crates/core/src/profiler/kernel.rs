//! Multi-lane power iteration for random walk with restart.
//!
//! Each lane carries one restart source. Lanes never interact: every
//! floating-point operation of lane `l` reads only lane `l` values, and the
//! sparse-frontier shortcut only skips terms that are exactly `+0.0`. A
//! source's iterate is therefore bit-identical whether it runs alone or
//! batched with others.

use crate::graph::SemanticGraph;

use super::PprParams;

/// Per-graph, per-alpha constants shared by all runs.
pub(crate) struct Transition {
    /// `alpha / out_degree(u)`, or 0 for dangling nodes.
    scale: Vec<f64>,
    dangling: Vec<u32>,
    alpha: f64,
}

impl Transition {
    pub(crate) fn new(graph: &SemanticGraph, alpha: f64) -> Self {
        let n = graph.len();
        let mut scale = vec![0.0; n];
        let mut dangling = Vec::new();
        for (u, s) in scale.iter_mut().enumerate() {
            let deg = graph.out_degree(u);
            if deg == 0 {
                dangling.push(u as u32);
            } else {
                *s = alpha / deg as f64;
            }
        }
        Transition {
            scale,
            dangling,
            alpha,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct LaneOutcome {
    pub iterations: usize,
    /// L1 change of the last iteration.
    pub delta: f64,
    pub converged: bool,
}

pub(crate) struct Workspace<const B: usize> {
    cur: Vec<[f64; B]>,
    nxt: Vec<[f64; B]>,
    share: Vec<[f64; B]>,
    reached: Vec<bool>,
    active: Vec<u32>,
    frontier: Vec<u32>,
}

impl<const B: usize> Workspace<B> {
    pub(crate) fn new(n: usize) -> Self {
        Workspace {
            cur: vec![[0.0; B]; n],
            nxt: vec![[0.0; B]; n],
            share: vec![[0.0; B]; n],
            reached: vec![false; n],
            active: Vec::new(),
            frontier: Vec::new(),
        }
    }

    fn reset(&mut self) {
        // Only reached nodes can hold non-zero values.
        if self.active.len() == self.cur.len() {
            self.cur.fill([0.0; B]);
            self.nxt.fill([0.0; B]);
            self.share.fill([0.0; B]);
            self.reached.fill(false);
        } else {
            for &u in &self.active {
                let u = u as usize;
                self.cur[u] = [0.0; B];
                self.nxt[u] = [0.0; B];
                self.share[u] = [0.0; B];
                self.reached[u] = false;
            }
        }
        self.active.clear();
        self.frontier.clear();
    }
}

/// Runs power iteration for up to `B` sources at once.
///
/// `done` is called exactly once per lane, with the lane's iterate at the
/// moment it converged (or at `max_iters`). The slice holds every node's
/// values; only `lane` is meaningful to the callee.
pub(crate) fn run_lanes<const B: usize>(
    graph: &SemanticGraph,
    transition: &Transition,
    sources: &[usize],
    params: &PprParams,
    ws: &mut Workspace<B>,
    mut done: impl FnMut(usize, LaneOutcome, &[[f64; B]]),
) {
    assert!(!sources.is_empty() && sources.len() <= B);
    let n = graph.len();
    let lanes = sources.len();
    let alpha = transition.alpha;
    let restart_base = 1.0 - alpha;

    ws.reset();
    for (l, &s) in sources.iter().enumerate() {
        ws.cur[s][l] = 1.0;
        if !ws.reached[s] {
            ws.reached[s] = true;
            ws.frontier.push(s as u32);
        }
    }
    ws.active.extend_from_slice(&ws.frontier);
    ws.active.sort_unstable();
    let mut dense = ws.active.len() == n;

    let mut finished = [false; B];
    let mut remaining = lanes;

    for iter in 1..=params.max_iters {
        // Mass each node sends along one out-edge.
        if dense {
            for ((sh, cur), &sc) in ws.share.iter_mut().zip(&ws.cur).zip(&transition.scale) {
                for l in 0..B {
                    sh[l] = cur[l] * sc;
                }
            }
        } else {
            for &u in &ws.active {
                let u = u as usize;
                let sc = transition.scale[u];
                for l in 0..B {
                    ws.share[u][l] = ws.cur[u][l] * sc;
                }
            }
        }

        let mut dangling = [0.0f64; B];
        for &u in &transition.dangling {
            let c = &ws.cur[u as usize];
            for l in 0..B {
                dangling[l] += c[l];
            }
        }

        if !dense {
            let mut grown = Vec::new();
            for &u in &ws.frontier {
                for &v in graph.out_neighbors(u as usize) {
                    if !ws.reached[v as usize] {
                        ws.reached[v as usize] = true;
                        grown.push(v);
                    }
                }
            }
            if !grown.is_empty() {
                ws.active.extend_from_slice(&grown);
                ws.active.sort_unstable();
                dense = ws.active.len() == n;
            }
            ws.frontier = grown;
        }

        let mut delta = [0.0f64; B];
        if dense {
            pull_all(graph, &ws.share, &mut ws.nxt);
        } else {
            for &v in &ws.active {
                let v = v as usize;
                pull(graph, v, &ws.share, &mut ws.nxt[v]);
            }
        }
        for (l, &s) in sources.iter().enumerate() {
            ws.nxt[s][l] += restart_base + alpha * dangling[l];
        }
        if dense {
            for (nx, cu) in ws.nxt.iter().zip(&ws.cur) {
                for l in 0..B {
                    delta[l] += (nx[l] - cu[l]).abs();
                }
            }
        } else {
            for &v in &ws.active {
                let (nx, cu) = (&ws.nxt[v as usize], &ws.cur[v as usize]);
                for l in 0..B {
                    delta[l] += (nx[l] - cu[l]).abs();
                }
            }
        }
        std::mem::swap(&mut ws.cur, &mut ws.nxt);

        for l in 0..lanes {
            if finished[l] {
                continue;
            }
            let converged = delta[l] < params.epsilon;
            if converged || iter == params.max_iters {
                finished[l] = true;
                remaining -= 1;
                done(
                    l,
                    LaneOutcome {
                        iterations: iter,
                        delta: delta[l],
                        converged,
                    },
                    &ws.cur,
                );
            }
        }
        if remaining == 0 {
            break;
        }
    }
    if dense {
        // reset() then clears everything.
        ws.active.clear();
        ws.active.extend(0..n as u32);
    }
}

/// Sums the share rows of `v`'s in-neighbors.
///
/// Edges are dealt round-robin into four partial sums, combined as
/// `(s0 + s1) + (s2 + s3)`. The order depends only on the edge list, so
/// every lane sees the same rounding whatever the batch width.
#[inline(always)]
fn gather<const B: usize>(
    edges: &[u32],
    share: &[[f64; B]],
    lookahead: &[u32],
    out: &mut [f64; B],
) {
    const AHEAD: usize = 16;
    let mut acc = [[0.0f64; B]; 4];
    let mut chunks = edges.chunks_exact(4);
    let mut base = 0usize;
    for c in &mut chunks {
        if let Some(&ahead) = lookahead.get(base + AHEAD) {
            prefetch(&share[ahead as usize]);
        }
        for (k, &u) in c.iter().enumerate() {
            let sh = &share[u as usize];
            for l in 0..B {
                acc[k][l] += sh[l];
            }
        }
        base += 4;
    }
    for (k, &u) in chunks.remainder().iter().enumerate() {
        let sh = &share[u as usize];
        for l in 0..B {
            acc[k][l] += sh[l];
        }
    }
    for l in 0..B {
        out[l] = (acc[0][l] + acc[1][l]) + (acc[2][l] + acc[3][l]);
    }
}

fn pull<const B: usize>(graph: &SemanticGraph, v: usize, share: &[[f64; B]], out: &mut [f64; B]) {
    let edges = graph.in_neighbors(v);
    gather(edges, share, edges, out);
}

/// Dense pull over every node.
fn pull_all<const B: usize>(graph: &SemanticGraph, share: &[[f64; B]], nxt: &mut [[f64; B]]) {
    let sources = graph.in_sources_raw();
    let offsets = graph.in_offsets_raw();
    for (v, out) in nxt.iter_mut().enumerate() {
        let (lo, hi) = (offsets[v], offsets[v + 1]);
        gather(&sources[lo..hi], share, &sources[lo..], out);
    }
}

#[inline(always)]
fn prefetch<T>(row: &T) {
    #[cfg(target_arch = "x86_64")]
    unsafe {
        use std::arch::x86_64::{_mm_prefetch, _MM_HINT_T0};
        let p = row as *const T as *const i8;
        _mm_prefetch::<_MM_HINT_T0>(p);
        if std::mem::size_of::<T>() > 64 {
            _mm_prefetch::<_MM_HINT_T0>(p.add(64));
        }
    }
    #[cfg(not(target_arch = "x86_64"))]
    let _ = row;
}
