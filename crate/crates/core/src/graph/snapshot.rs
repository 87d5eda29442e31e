//! Binary snapshot of a built graph, so large dumps are ingested once.
//!
//! Layout (little endian):
//!
//! ```text
//! magic    [u8; 4]  "CWKG"
//! version  u16
//! nodes    u64
//! edges    u64      undirected edge count
//! labels   nodes × (u32 byte length, UTF-8 bytes), ascending
//! edges    edges × (u32 a, u32 b, f64 weight), a < b
//! ```

use std::io::{Read, Write};

use super::{is_vocabulary_label, ConceptId, GraphError, KnowledgeGraph};

pub const SNAPSHOT_MAGIC: [u8; 4] = *b"CWKG";
pub const SNAPSHOT_VERSION: u16 = 1;

pub fn write_snapshot<W: Write>(graph: &KnowledgeGraph, mut out: W) -> Result<(), GraphError> {
    out.write_all(&SNAPSHOT_MAGIC)?;
    out.write_all(&SNAPSHOT_VERSION.to_le_bytes())?;
    out.write_all(&(graph.node_count() as u64).to_le_bytes())?;
    out.write_all(&(graph.edge_count() as u64).to_le_bytes())?;
    for label in graph.labels() {
        out.write_all(&(label.len() as u32).to_le_bytes())?;
        out.write_all(label.as_bytes())?;
    }
    for e in graph.edges() {
        out.write_all(&e.a.0.to_le_bytes())?;
        out.write_all(&e.b.0.to_le_bytes())?;
        out.write_all(&e.weight.to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

fn bad(msg: impl Into<String>) -> GraphError {
    GraphError::Snapshot(msg.into())
}

fn read_array<const N: usize, R: Read>(input: &mut R) -> Result<[u8; N], GraphError> {
    let mut buf = [0u8; N];
    input.read_exact(&mut buf)?;
    Ok(buf)
}

pub fn read_snapshot<R: Read>(mut input: R) -> Result<KnowledgeGraph, GraphError> {
    if read_array::<4, _>(&mut input)? != SNAPSHOT_MAGIC {
        return Err(bad("bad magic bytes"));
    }
    let version = u16::from_le_bytes(read_array(&mut input)?);
    if version != SNAPSHOT_VERSION {
        return Err(bad(format!("unsupported version {version}")));
    }
    let nodes = u64::from_le_bytes(read_array(&mut input)?) as usize;
    let edges = u64::from_le_bytes(read_array(&mut input)?) as usize;

    let mut labels: Vec<String> = Vec::with_capacity(nodes.min(1 << 24));
    for _ in 0..nodes {
        let len = u32::from_le_bytes(read_array(&mut input)?) as usize;
        let mut bytes = vec![0u8; len];
        input.read_exact(&mut bytes)?;
        let label = String::from_utf8(bytes).map_err(|_| bad("label is not UTF-8"))?;
        if !is_vocabulary_label(&label) {
            return Err(bad(format!("invalid label {label:?}")));
        }
        if labels.last().is_some_and(|prev| *prev >= label) {
            return Err(bad("labels not strictly ascending"));
        }
        labels.push(label);
    }

    let mut adjacency: Vec<Vec<(ConceptId, f64)>> = vec![Vec::new(); nodes];
    let mut last: Option<(u32, u32)> = None;
    for _ in 0..edges {
        let a = u32::from_le_bytes(read_array(&mut input)?);
        let b = u32::from_le_bytes(read_array(&mut input)?);
        let w = f64::from_le_bytes(read_array(&mut input)?);
        if a >= b || b as usize >= nodes {
            return Err(bad(format!("bad edge ({a}, {b})")));
        }
        if last.is_some_and(|prev| prev >= (a, b)) {
            return Err(bad("edges not strictly ascending"));
        }
        if !(w.is_finite() && w > 0.0) {
            return Err(bad(format!("bad weight {w}")));
        }
        last = Some((a, b));
        adjacency[a as usize].push((ConceptId(b), w));
        adjacency[b as usize].push((ConceptId(a), w));
    }
    let mut trailing = [0u8; 1];
    if input.read(&mut trailing)? != 0 {
        return Err(bad("trailing bytes"));
    }
    if adjacency.iter().any(Vec::is_empty) {
        return Err(bad("isolated node"));
    }
    let graph = KnowledgeGraph::from_adjacency(labels, adjacency);
    if graph.node_count() > 0 && graph.hop_distances(ConceptId(0))?.contains(&usize::MAX) {
        return Err(bad("graph is not connected"));
    }
    Ok(graph)
}
