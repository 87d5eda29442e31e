//! Fixture graphs, maps and embedding tables shared by the integration tests.
#![allow(dead_code)]

use chrono::{DateTime, TimeZone, Utc};
use conceptwalk::mindmap::MapDocument;
use conceptwalk::{EmbeddingTable, KnowledgeGraph, MindMap, RawEdge};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn t0() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2024, 3, 1, 9, 0, 0).unwrap()
}

pub fn at(seconds: i64) -> DateTime<Utc> {
    t0() + chrono::Duration::seconds(seconds)
}

/// Triangle a-b-c plus the pendant edge c-d, unit weights.
pub fn g1() -> KnowledgeGraph {
    KnowledgeGraph::build([
        RawEdge::new("a", "b", 1.0),
        RawEdge::new("b", "c", 1.0),
        RawEdge::new("a", "c", 1.0),
        RawEdge::new("c", "d", 1.0),
    ])
    .unwrap()
}

pub fn ring_label(i: usize) -> String {
    format!("r{i:03}")
}

/// `n` nodes on a cycle, each joined to the nodes up to `reach` positions away.
pub fn ring_lattice(n: usize, reach: usize) -> KnowledgeGraph {
    let mut edges = Vec::new();
    for i in 0..n {
        for k in 1..=reach {
            edges.push(RawEdge::new(ring_label(i), ring_label((i + k) % n), 1.0));
        }
    }
    KnowledgeGraph::build(edges).unwrap()
}

pub fn node_label(i: usize) -> String {
    format!("n{i:04}")
}

/// A random tree over `n` nodes plus `extra` random chords, weights in [0.5, 3).
pub fn random_connected(n: usize, extra: usize, seed: u64) -> (KnowledgeGraph, Vec<(usize, usize, f64)>) {
    let mut r = rng(seed);
    let mut edges = Vec::new();
    for i in 1..n {
        edges.push((r.random_range(0..i), i, r.random_range(0.5..3.0)));
    }
    for _ in 0..extra {
        let a = r.random_range(0..n);
        let b = r.random_range(0..n);
        edges.push((a, b, r.random_range(0.5..3.0)));
    }
    let g = KnowledgeGraph::build(edges.iter().map(|&(a, b, w)| RawEdge::new(node_label(a), node_label(b), w))).unwrap();
    (g, edges)
}

/// A map whose node `i` has concept `concepts[i]` and, for `i > 0`, is linked
/// to `parents[i - 1]`. Node 0 is the root.
pub fn map_from_tree(map_id: &str, concepts: &[String], parents: &[usize]) -> MindMap {
    assert_eq!(parents.len() + 1, concepts.len());
    let doc = serde_json::json!({
        "version": 1,
        "map_id": map_id,
        "created_at": t0(),
        "nodes": concepts.iter().enumerate().map(|(i, c)| serde_json::json!({
            "id": i,
            "concept": c,
            "provenance": if i == 0 { "root" } else { "manual" },
        })).collect::<Vec<_>>(),
        "links": parents.iter().enumerate().map(|(i, &p)| [p, i + 1]).collect::<Vec<_>>(),
    });
    let doc: MapDocument = serde_json::from_value(doc).unwrap();
    MindMap::from_document(doc).unwrap()
}

pub fn word_label(i: usize) -> String {
    format!("w{i:02}")
}

/// `words` random vectors of dimension `dim` with entries in [-1, 1).
pub fn random_table(words: usize, dim: usize, seed: u64) -> EmbeddingTable {
    let mut r = rng(seed);
    let rows: Vec<(String, Vec<f32>)> = (0..words)
        .map(|i| (word_label(i), (0..dim).map(|_| r.random_range(-1.0f32..1.0)).collect()))
        .collect();
    EmbeddingTable::from_rows(rows).unwrap()
}

/// Independent cosine distance in f64 over the stored f32 components.
pub fn oracle_cosine(u: &[f32], v: &[f32]) -> f64 {
    let (mut uv, mut uu, mut vv) = (0.0f64, 0.0f64, 0.0f64);
    for (&a, &b) in u.iter().zip(v) {
        let (a, b) = (f64::from(a), f64::from(b));
        uv += a * b;
        uu += a * a;
        vv += b * b;
    }
    (1.0 - uv / (uu * vv).sqrt()).clamp(0.0, 2.0)
}

/// Plain union-find with path halving.
pub struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        Self { parent: (0..n).collect() }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    pub fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra] = rb;
        }
    }
}

/// Assertion dump line in the five-field layout.
pub fn dump_line(start: &str, end: &str, meta: &str) -> String {
    format!("/a/[/r/RelatedTo/,{start}/,{end}/]\t/r/RelatedTo\t{start}\t{end}\t{meta}")
}
