//! Synthetic fixtures shared by the benchmarks.

use conceptwalk::{EmbeddingTable, KnowledgeGraph, MindMap, RawEdge};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn label(i: usize) -> String {
    format!("c{i:06}")
}

/// A random spanning tree on `n` concepts plus `extra` chords, so the graph
/// is connected and keeps every concept.
pub fn random_graph(n: usize, extra: usize, seed: u64) -> KnowledgeGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::with_capacity(n + extra);
    for i in 1..n {
        let parent = rng.random_range(0..i);
        edges.push(RawEdge::new(label(parent), label(i), rng.random_range(0.5..3.0)));
    }
    for _ in 0..extra {
        let (a, b) = (rng.random_range(0..n), rng.random_range(0..n));
        if a != b {
            edges.push(RawEdge::new(label(a), label(b), rng.random_range(0.5..3.0)));
        }
    }
    KnowledgeGraph::build(edges).expect("fixture graph builds")
}

/// Random vectors for every concept of `graph`.
pub fn random_table(graph: &KnowledgeGraph, dim: usize, seed: u64) -> EmbeddingTable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = graph.labels().iter().map(|l| {
        let v: Vec<f32> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        (l.clone(), v)
    });
    EmbeddingTable::from_rows(rows.collect::<Vec<_>>()).expect("fixture table builds")
}

/// A tree-shaped map with up to `nodes` graph concepts.
pub fn random_map(graph: &KnowledgeGraph, nodes: usize, seed: u64) -> MindMap {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let labels = graph.labels();
    let mut map = MindMap::with_root(format!("bench-{seed}"), Default::default(), labels.choose(&mut rng).unwrap());
    let mut ids = vec![map.root()];
    while ids.len() < nodes {
        let parent = *ids.choose(&mut rng).unwrap();
        if let Ok(id) = map.add_manual_node(labels.choose(&mut rng).unwrap(), parent, graph) {
            ids.push(id);
        }
    }
    map
}
