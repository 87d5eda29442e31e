//! Second-order biased random walks over a [`KnowledgeGraph`].
//!
//! From the current node, the unnormalized score of moving to neighbor `x` is
//! `w(curr, x) * alpha`, where `alpha` is
//!
//! * `1/p` when `x` is the node the walk just came from,
//! * `1` when `x` is also adjacent to that previous node,
//! * `1/q` otherwise.
//!
//! The first step has no previous node and is a plain weighted step. Small `p`
//! with large `q` keeps walks local (breadth-first regime); large `p` with
//! small `q` pushes them outward (depth-first regime). A suggestion is the
//! terminal node of a walk.

use std::collections::HashSet;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{ConceptId, GraphError, KnowledgeGraph};

/// Generator used wherever reproducibility from a seed matters.
pub type WalkRng = ChaCha8Rng;

pub const DEFAULT_WALK_LENGTH: usize = 3;
pub const DEFAULT_SUGGESTION_COUNT: usize = 5;
/// Walks attempted per requested suggestion before giving up.
pub const ATTEMPTS_PER_SUGGESTION: usize = 20;

const DFS_Q: (f64, f64) = (0.25, 0.9);
const DFS_P: (f64, f64) = (1.5, 4.0);
const BFS_Q: (f64, f64) = (1.5, 4.0);
const BFS_P: (f64, f64) = (0.1, 0.9);

#[derive(Debug, Error)]
pub enum WalkError {
    #[error("invalid walk parameters: {0}")]
    InvalidParams(String),
    #[error("previous node {prev} is not adjacent to {curr}")]
    NotAdjacent { prev: ConceptId, curr: ConceptId },
    #[error("no eligible suggestions for {origin} after {attempts} walks")]
    Exhausted { origin: ConceptId, attempts: usize },
    #[error(transparent)]
    Graph(#[from] GraphError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Regime {
    Bfs,
    Dfs,
}

impl Regime {
    pub fn flip(self) -> Self {
        match self {
            Regime::Bfs => Regime::Dfs,
            Regime::Dfs => Regime::Bfs,
        }
    }

    /// Whether `(p, q)` lies strictly inside this regime.
    pub fn admits(self, p: f64, q: f64) -> bool {
        match self {
            Regime::Bfs => p < q.min(1.0) && q > 1.0,
            Regime::Dfs => p > q.max(1.0) && q < 1.0,
        }
    }

    /// The regime `(p, q)` belongs to, if any.
    pub fn classify(p: f64, q: f64) -> Option<Self> {
        [Regime::Bfs, Regime::Dfs].into_iter().find(|r| r.admits(p, q))
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Regime::Bfs => "BFS",
            Regime::Dfs => "DFS",
        }
    }
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WalkParams {
    /// Return parameter.
    pub p: f64,
    /// In-out parameter.
    pub q: f64,
    /// Regime implied by `(p, q)`; `None` for settings outside both regimes.
    pub regime: Option<Regime>,
    pub walk_length: usize,
    pub suggestion_count: usize,
}

impl WalkParams {
    /// A zero `walk_length` is accepted and yields single-node walks.
    pub fn new(p: f64, q: f64, walk_length: usize, suggestion_count: usize) -> Result<Self, WalkError> {
        if !(p.is_finite() && p > 0.0 && q.is_finite() && q > 0.0) {
            return Err(WalkError::InvalidParams(format!("p={p}, q={q} must be positive")));
        }
        if suggestion_count == 0 {
            return Err(WalkError::InvalidParams("suggestion count must be at least 1".into()));
        }
        Ok(Self {
            p,
            q,
            regime: Regime::classify(p, q),
            walk_length,
            suggestion_count,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuggestionBatch {
    pub source: ConceptId,
    pub params: WalkParams,
    pub suggestions: Vec<ConceptId>,
    pub rng_seed: u64,
}

/// Draws `(p, q)` uniformly from the ranges reserved for `regime`.
pub fn sample_regime_params<R: Rng + ?Sized>(regime: Regime, rng: &mut R) -> (f64, f64) {
    let (q_range, p_range) = match regime {
        Regime::Dfs => (DFS_Q, DFS_P),
        Regime::Bfs => (BFS_Q, BFS_P),
    };
    let q = rng.random_range(q_range.0..=q_range.1);
    let p = rng.random_range(p_range.0..=p_range.1);
    (p, q)
}

#[inline]
fn bias(graph: &KnowledgeGraph, prev: Option<ConceptId>, next: ConceptId, p: f64, q: f64) -> f64 {
    match prev {
        None => 1.0,
        Some(prev) if prev == next => 1.0 / p,
        Some(prev) if graph.are_adjacent(prev, next) => 1.0,
        Some(_) => 1.0 / q,
    }
}

fn check_prev(graph: &KnowledgeGraph, prev: Option<ConceptId>, curr: ConceptId) -> Result<(), WalkError> {
    match prev {
        Some(prev) if !graph.are_adjacent(prev, curr) => Err(WalkError::NotAdjacent { prev, curr }),
        _ => Ok(()),
    }
}

/// Normalized distribution of the next step from `curr`, in neighbor-id order.
pub fn transition_weights(
    graph: &KnowledgeGraph,
    prev: Option<ConceptId>,
    curr: ConceptId,
    p: f64,
    q: f64,
) -> Result<Vec<(ConceptId, f64)>, WalkError> {
    let ids = graph.neighbor_ids(curr)?;
    check_prev(graph, prev, curr)?;
    let weights = graph.neighbor_weights(curr)?;
    let scores: Vec<f64> = ids
        .iter()
        .zip(weights)
        .map(|(&x, &w)| w * bias(graph, prev, x, p, q))
        .collect();
    let total: f64 = scores.iter().sum();
    Ok(ids.iter().copied().zip(scores.into_iter().map(|s| s / total)).collect())
}

fn pick<R: RngCore + ?Sized>(scores: &[f64], rng: &mut R) -> usize {
    let total: f64 = scores.iter().sum();
    let target = rng.random::<f64>() * total;
    let mut acc = 0.0;
    for (i, s) in scores.iter().enumerate() {
        acc += s;
        if target < acc {
            return i;
        }
    }
    scores.len() - 1
}

fn step<R: RngCore + ?Sized>(
    graph: &KnowledgeGraph,
    prev: Option<ConceptId>,
    curr: ConceptId,
    p: f64,
    q: f64,
    scratch: &mut Vec<f64>,
    rng: &mut R,
) -> Result<ConceptId, WalkError> {
    let ids = graph.neighbor_ids(curr)?;
    let weights = graph.neighbor_weights(curr)?;
    scratch.clear();
    scratch.extend(ids.iter().zip(weights).map(|(&x, &w)| w * bias(graph, prev, x, p, q)));
    Ok(ids[pick(scratch, rng)])
}

/// Samples the node that follows `curr` when the walk arrived from `prev`.
pub fn sample_step<R: RngCore + ?Sized>(
    graph: &KnowledgeGraph,
    prev: Option<ConceptId>,
    curr: ConceptId,
    p: f64,
    q: f64,
    rng: &mut R,
) -> Result<ConceptId, WalkError> {
    graph.degree(curr)?;
    check_prev(graph, prev, curr)?;
    step(graph, prev, curr, p, q, &mut Vec::new(), rng)
}

/// Samples one walk of `params.walk_length` steps; the path has one more entry.
pub fn sample_walk<R: RngCore + ?Sized>(
    graph: &KnowledgeGraph,
    start: ConceptId,
    params: &WalkParams,
    rng: &mut R,
) -> Result<Vec<ConceptId>, WalkError> {
    let mut scratch = Vec::new();
    walk_with(graph, start, params, &mut scratch, rng)
}

fn walk_with<R: RngCore + ?Sized>(
    graph: &KnowledgeGraph,
    start: ConceptId,
    params: &WalkParams,
    scratch: &mut Vec<f64>,
    rng: &mut R,
) -> Result<Vec<ConceptId>, WalkError> {
    graph.degree(start)?;
    let mut path = Vec::with_capacity(params.walk_length + 1);
    path.push(start);
    let mut prev = None;
    let mut curr = start;
    for _ in 0..params.walk_length {
        let next = step(graph, prev, curr, params.p, params.q, scratch, rng)?;
        path.push(next);
        prev = Some(curr);
        curr = next;
    }
    Ok(path)
}

/// Draws a batch seed from `rng`, then delegates to [`suggest_from_seed`].
pub fn generate_suggestions<R: RngCore + ?Sized>(
    graph: &KnowledgeGraph,
    source: ConceptId,
    regime: Regime,
    exclude: &HashSet<ConceptId>,
    suggestion_count: usize,
    walk_length: usize,
    rng: &mut R,
) -> Result<SuggestionBatch, WalkError> {
    let seed = rng.next_u64();
    suggest_from_seed(graph, source, regime, exclude, suggestion_count, walk_length, seed)
}

/// Samples `(p, q)` once for the batch, then collects distinct walk endpoints
/// that are neither the source nor excluded. Gives up after
/// [`ATTEMPTS_PER_SUGGESTION`]` * suggestion_count` walks; a partial batch
/// is returned if at least one candidate was found.
pub fn suggest_from_seed(
    graph: &KnowledgeGraph,
    source: ConceptId,
    regime: Regime,
    exclude: &HashSet<ConceptId>,
    suggestion_count: usize,
    walk_length: usize,
    seed: u64,
) -> Result<SuggestionBatch, WalkError> {
    let mut rng = WalkRng::seed_from_u64(seed);
    let (p, q) = sample_regime_params(regime, &mut rng);
    let params = WalkParams::new(p, q, walk_length, suggestion_count)?;
    let suggestions = collect_endpoints(graph, source, &params, exclude, &mut rng)?;
    Ok(SuggestionBatch {
        source,
        params,
        suggestions,
        rng_seed: seed,
    })
}

/// Suggestion collection with caller-fixed parameters.
pub fn collect_endpoints<R: RngCore + ?Sized>(
    graph: &KnowledgeGraph,
    source: ConceptId,
    params: &WalkParams,
    exclude: &HashSet<ConceptId>,
    rng: &mut R,
) -> Result<Vec<ConceptId>, WalkError> {
    let k = params.suggestion_count;
    let attempts = ATTEMPTS_PER_SUGGESTION * k;
    let mut scratch = Vec::new();
    let mut found: Vec<ConceptId> = Vec::with_capacity(k);
    for _ in 0..attempts {
        if found.len() == k {
            break;
        }
        let path = walk_with(graph, source, params, &mut scratch, rng)?;
        let end = *path.last().expect("walk includes start");
        if end != source && !exclude.contains(&end) && !found.contains(&end) {
            found.push(end);
        }
    }
    if found.is_empty() {
        return Err(WalkError::Exhausted { origin: source, attempts });
    }
    Ok(found)
}

/// Up to `n` distinct neighbors of `root`, drawn without replacement with
/// probability proportional to edge weight.
pub fn initial_neighbors<R: RngCore + ?Sized>(
    graph: &KnowledgeGraph,
    root: ConceptId,
    n: usize,
    rng: &mut R,
) -> Result<Vec<ConceptId>, WalkError> {
    let mut ids = graph.neighbor_ids(root)?.to_vec();
    let mut weights = graph.neighbor_weights(root)?.to_vec();
    if ids.len() <= n {
        return Ok(ids);
    }
    let mut chosen = Vec::with_capacity(n);
    for _ in 0..n {
        let i = pick(&weights, rng);
        chosen.push(ids.remove(i));
        weights.remove(i);
    }
    Ok(chosen)
}
