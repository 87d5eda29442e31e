//! Immutable undirected concept graph built from association assertions.
//!
//! Concept ids are assigned in lexicographic label order, so the label table
//! doubles as the prefix index used by [`KnowledgeGraph::autocomplete`] and the
//! per-node adjacency (sorted by neighbor id) iterates in label order too.

mod ingest;
mod label;
mod snapshot;

use std::collections::{HashMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use ingest::{ingest_assertions, parse_assertion_line, IngestReport, ParseError, SkipEvent};
pub use label::{is_vocabulary_label, normalize_label};
pub use snapshot::{read_snapshot, write_snapshot, SNAPSHOT_MAGIC, SNAPSHOT_VERSION};

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("no usable edges: the built graph would be empty")]
    EmptyGraph,
    #[error("label {0:?} is empty after normalization")]
    InvalidLabel(String),
    #[error("concept id {0} is not in the graph")]
    NotFound(ConceptId),
    #[error("snapshot: {0}")]
    Snapshot(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Dense handle into the graph's node storage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ConceptId(pub u32);

impl ConceptId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for ConceptId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// An edge between two labels, before interning.
#[derive(Debug, Clone, PartialEq)]
pub struct RawEdge {
    pub start: String,
    pub end: String,
    pub weight: f64,
}

impl RawEdge {
    pub fn new(start: impl Into<String>, end: impl Into<String>, weight: f64) -> Self {
        Self {
            start: start.into(),
            end: end.into(),
            weight,
        }
    }
}

/// An undirected edge of a built graph, reported once with `a < b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedEdge {
    pub a: ConceptId,
    pub b: ConceptId,
    pub weight: f64,
}

/// Non-positive, missing or non-finite weights are floored to this value.
pub const DEFAULT_WEIGHT: f64 = 1.0;

pub(crate) fn floor_weight(w: f64) -> f64 {
    if w.is_finite() && w > 0.0 {
        w
    } else {
        DEFAULT_WEIGHT
    }
}

/// Connected, symmetric, weighted concept graph in compressed sparse row form.
#[derive(Debug, Clone, PartialEq)]
pub struct KnowledgeGraph {
    labels: Vec<String>,
    offsets: Vec<usize>,
    targets: Vec<ConceptId>,
    weights: Vec<f64>,
}

impl KnowledgeGraph {
    /// Builds the graph from an edge stream.
    ///
    /// Antiparallel and repeated edges are merged by summing their weights,
    /// self-loops are dropped, and only the largest connected component is
    /// kept. Equal-sized components are resolved in favor of the one holding
    /// the lexicographically smallest label.
    pub fn build<I>(edges: I) -> Result<Self, GraphError>
    where
        I: IntoIterator<Item = RawEdge>,
    {
        let mut interned: HashMap<String, u32> = HashMap::new();
        let mut names: Vec<String> = Vec::new();
        let mut merged: HashMap<(u32, u32), f64> = HashMap::new();
        let mut order: Vec<(u32, u32)> = Vec::new();

        let mut intern = |label: String, names: &mut Vec<String>| -> u32 {
            if let Some(&id) = interned.get(&label) {
                return id;
            }
            let id = names.len() as u32;
            names.push(label.clone());
            interned.insert(label, id);
            id
        };

        for edge in edges {
            if edge.start == edge.end {
                continue;
            }
            let a = intern(edge.start, &mut names);
            let b = intern(edge.end, &mut names);
            let key = (a.min(b), a.max(b));
            let w = floor_weight(edge.weight);
            match merged.get_mut(&key) {
                Some(total) => *total += w,
                None => {
                    merged.insert(key, w);
                    order.push(key);
                }
            }
        }
        if order.is_empty() {
            return Err(GraphError::EmptyGraph);
        }

        let keep = largest_component(&names, &order);

        // Renumber the kept nodes in label order.
        let mut kept: Vec<u32> = (0..names.len() as u32).filter(|&i| keep[i as usize]).collect();
        kept.sort_by(|&x, &y| names[x as usize].cmp(&names[y as usize]));
        let mut remap = vec![u32::MAX; names.len()];
        for (new, &old) in kept.iter().enumerate() {
            remap[old as usize] = new as u32;
        }

        let mut adjacency: Vec<Vec<(ConceptId, f64)>> = vec![Vec::new(); kept.len()];
        for key in &order {
            let (a, b) = (remap[key.0 as usize], remap[key.1 as usize]);
            if a == u32::MAX {
                continue;
            }
            let w = merged[key];
            adjacency[a as usize].push((ConceptId(b), w));
            adjacency[b as usize].push((ConceptId(a), w));
        }
        let labels = kept.into_iter().map(|old| std::mem::take(&mut names[old as usize])).collect();
        Ok(Self::from_adjacency(labels, adjacency))
    }

    pub(crate) fn from_adjacency(labels: Vec<String>, mut adjacency: Vec<Vec<(ConceptId, f64)>>) -> Self {
        let mut offsets = Vec::with_capacity(labels.len() + 1);
        let mut targets = Vec::new();
        let mut weights = Vec::new();
        offsets.push(0);
        for list in &mut adjacency {
            list.sort_by_key(|&(n, _)| n);
            for &(n, w) in list.iter() {
                targets.push(n);
                weights.push(w);
            }
            offsets.push(targets.len());
        }
        Self {
            labels,
            offsets,
            targets,
            weights,
        }
    }

    pub fn node_count(&self) -> usize {
        self.labels.len()
    }

    /// Number of undirected edges.
    pub fn edge_count(&self) -> usize {
        self.targets.len() / 2
    }

    pub fn label(&self, id: ConceptId) -> Option<&str> {
        self.labels.get(id.index()).map(String::as_str)
    }

    /// All labels in ascending order; position equals concept id.
    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn ids(&self) -> impl Iterator<Item = ConceptId> + '_ {
        (0..self.labels.len() as u32).map(ConceptId)
    }

    /// Exact lookup of an already-normalized label.
    pub fn id_of(&self, label: &str) -> Option<ConceptId> {
        self.labels
            .binary_search_by(|probe| probe.as_str().cmp(label))
            .ok()
            .map(|i| ConceptId(i as u32))
    }

    /// Normalizes `text` and looks it up in the vocabulary.
    pub fn contains(&self, text: &str) -> Option<ConceptId> {
        normalize_label(text).ok().and_then(|l| self.id_of(&l))
    }

    fn range(&self, id: ConceptId) -> Result<std::ops::Range<usize>, GraphError> {
        let i = id.index();
        if i >= self.labels.len() {
            return Err(GraphError::NotFound(id));
        }
        Ok(self.offsets[i]..self.offsets[i + 1])
    }

    /// Neighbor ids of `id`, ascending.
    pub fn neighbor_ids(&self, id: ConceptId) -> Result<&[ConceptId], GraphError> {
        Ok(&self.targets[self.range(id)?])
    }

    /// Edge weights aligned with [`neighbor_ids`](Self::neighbor_ids).
    pub fn neighbor_weights(&self, id: ConceptId) -> Result<&[f64], GraphError> {
        Ok(&self.weights[self.range(id)?])
    }

    pub fn neighbors(&self, id: ConceptId) -> Result<Vec<(ConceptId, f64)>, GraphError> {
        let r = self.range(id)?;
        Ok(self.targets[r.clone()]
            .iter()
            .copied()
            .zip(self.weights[r].iter().copied())
            .collect())
    }

    pub fn degree(&self, id: ConceptId) -> Result<usize, GraphError> {
        Ok(self.range(id)?.len())
    }

    /// Weight of the edge between `a` and `b`, if the two are adjacent.
    pub fn edge_weight(&self, a: ConceptId, b: ConceptId) -> Option<f64> {
        let r = self.range(a).ok()?;
        let ids = &self.targets[r.clone()];
        ids.binary_search(&b).ok().map(|i| self.weights[r.start + i])
    }

    pub fn are_adjacent(&self, a: ConceptId, b: ConceptId) -> bool {
        self.edge_weight(a, b).is_some()
    }

    /// Each undirected edge once, ordered by `(a, b)` with `a < b`.
    pub fn edges(&self) -> impl Iterator<Item = WeightedEdge> + '_ {
        self.ids().flat_map(move |a| {
            let r = self.offsets[a.index()]..self.offsets[a.index() + 1];
            self.targets[r.clone()]
                .iter()
                .zip(&self.weights[r])
                .filter(move |(b, _)| **b > a)
                .map(move |(&b, &weight)| WeightedEdge { a, b, weight })
        })
    }

    /// Edges as label triples, suitable for feeding back into [`build`](Self::build).
    pub fn raw_edges(&self) -> impl Iterator<Item = RawEdge> + '_ {
        self.edges().map(|e| {
            RawEdge::new(
                self.labels[e.a.index()].clone(),
                self.labels[e.b.index()].clone(),
                e.weight,
            )
        })
    }

    /// Up to `limit` labels starting with the normalized `prefix`, ascending.
    /// An empty prefix matches everything.
    pub fn autocomplete(&self, prefix: &str, limit: usize) -> Vec<&str> {
        let prefix = normalize_label(prefix).unwrap_or_default();
        let start = self.labels.partition_point(|l| l.as_str() < prefix.as_str());
        self.labels[start..]
            .iter()
            .take_while(|l| l.starts_with(&prefix))
            .take(limit)
            .map(String::as_str)
            .collect()
    }

    /// Hop distances from `source` to every node (`usize::MAX` if unreachable).
    pub fn hop_distances(&self, source: ConceptId) -> Result<Vec<usize>, GraphError> {
        self.range(source)?;
        let mut dist = vec![usize::MAX; self.node_count()];
        let mut queue = VecDeque::from([source]);
        dist[source.index()] = 0;
        while let Some(u) = queue.pop_front() {
            let d = dist[u.index()] + 1;
            for &v in &self.targets[self.offsets[u.index()]..self.offsets[u.index() + 1]] {
                if dist[v.index()] == usize::MAX {
                    dist[v.index()] = d;
                    queue.push_back(v);
                }
            }
        }
        Ok(dist)
    }
}

fn largest_component(names: &[String], edges: &[(u32, u32)]) -> Vec<bool> {
    let mut parent: Vec<u32> = (0..names.len() as u32).collect();
    fn find(parent: &mut [u32], mut x: u32) -> u32 {
        while parent[x as usize] != x {
            let up = parent[parent[x as usize] as usize];
            parent[x as usize] = up;
            x = up;
        }
        x
    }
    for &(a, b) in edges {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra != rb {
            parent[ra.max(rb) as usize] = ra.min(rb);
        }
    }
    // root -> (size, smallest label index)
    let mut stats: HashMap<u32, (usize, u32)> = HashMap::new();
    for i in 0..names.len() as u32 {
        let r = find(&mut parent, i);
        let entry = stats.entry(r).or_insert((0, i));
        entry.0 += 1;
        if names[i as usize] < names[entry.1 as usize] {
            entry.1 = i;
        }
    }
    let best = stats
        .iter()
        .max_by(|(_, x), (_, y)| {
            x.0.cmp(&y.0)
                .then_with(|| names[y.1 as usize].cmp(&names[x.1 as usize]))
        })
        .map(|(&root, _)| root)
        .expect("at least one node");
    (0..names.len() as u32).map(|i| find(&mut parent, i) == best).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g1() -> KnowledgeGraph {
        KnowledgeGraph::build([
            RawEdge::new("a", "b", 1.0),
            RawEdge::new("b", "c", 1.0),
            RawEdge::new("a", "c", 1.0),
            RawEdge::new("c", "d", 1.0),
        ])
        .unwrap()
    }

    fn id(g: &KnowledgeGraph, l: &str) -> ConceptId {
        g.id_of(l).unwrap()
    }

    #[test]
    fn merges_and_drops_self_loops() {
        let g = KnowledgeGraph::build([
            RawEdge::new("a", "b", 1.0),
            RawEdge::new("b", "a", 2.0),
            RawEdge::new("c", "c", 5.0),
        ])
        .unwrap();
        assert_eq!(g.labels(), ["a", "b"]);
        let edges: Vec<_> = g.edges().collect();
        assert_eq!(edges.len(), 1);
        assert_eq!(edges[0].weight, 3.0);
    }

    #[test]
    fn keeps_the_larger_component() {
        let g = KnowledgeGraph::build([
            RawEdge::new("a", "b", 1.0),
            RawEdge::new("c", "d", 1.0),
            RawEdge::new("d", "e", 1.0),
        ])
        .unwrap();
        assert_eq!(g.labels(), ["c", "d", "e"]);
    }

    #[test]
    fn component_ties_prefer_smallest_label() {
        let g = KnowledgeGraph::build([
            RawEdge::new("zeta", "yak", 1.0),
            RawEdge::new("moth", "apple", 1.0),
        ])
        .unwrap();
        assert_eq!(g.labels(), ["apple", "moth"]);
    }

    #[test]
    fn empty_and_all_self_loop_streams_fail() {
        assert!(matches!(KnowledgeGraph::build(Vec::new()), Err(GraphError::EmptyGraph)));
        assert!(matches!(
            KnowledgeGraph::build([RawEdge::new("c", "c", 5.0)]),
            Err(GraphError::EmptyGraph)
        ));
    }

    #[test]
    fn weight_floor_applies() {
        let g = KnowledgeGraph::build([RawEdge::new("a", "b", -2.0), RawEdge::new("b", "c", f64::NAN)]).unwrap();
        assert!(g.edges().all(|e| e.weight == DEFAULT_WEIGHT));
    }

    #[test]
    fn neighbors_of_g1() {
        let g = g1();
        let (a, b, c, d) = (id(&g, "a"), id(&g, "b"), id(&g, "c"), id(&g, "d"));
        assert_eq!(g.neighbors(a).unwrap(), vec![(b, 1.0), (c, 1.0)]);
        assert_eq!(g.neighbors(d).unwrap(), vec![(c, 1.0)]);
        let degrees: Vec<_> = [a, b, c, d].iter().map(|&x| g.degree(x).unwrap()).collect();
        assert_eq!(degrees, [2, 2, 3, 1]);
        assert!(matches!(g.neighbors(ConceptId(99)), Err(GraphError::NotFound(_))));
    }

    #[test]
    fn autocomplete_and_contains() {
        let g = KnowledgeGraph::build([RawEdge::new("hawaii", "hawk", 1.0), RawEdge::new("hawk", "cat", 1.0)]).unwrap();
        assert_eq!(g.autocomplete("haw", 10), ["hawaii", "hawk"]);
        assert_eq!(g.autocomplete("HAW", 1), ["hawaii"]);
        assert!(g.autocomplete("zz", 10).is_empty());
        assert_eq!(g.autocomplete("", 2), ["cat", "hawaii"]);
        assert_eq!(g.contains("Hawaii"), g.id_of("hawaii"));
        assert!(g.contains("hawaii").is_some());
        assert_eq!(g.contains("qwzx"), None);
        assert_eq!(g.contains("   "), None);
    }

    #[test]
    fn rebuild_is_a_fixpoint() {
        let g = g1();
        let again = KnowledgeGraph::build(g.raw_edges()).unwrap();
        assert_eq!(g, again);
    }

    #[test]
    fn hop_distances_on_g1() {
        let g = g1();
        let d = g.hop_distances(id(&g, "a")).unwrap();
        assert_eq!(d, vec![0, 1, 1, 2]);
    }
}
