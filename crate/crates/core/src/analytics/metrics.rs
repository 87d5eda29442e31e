use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::AnalyticsError;
use crate::embedding::{cosine_distance, EmbeddingTable};
use crate::mindmap::MindMap;
use crate::session::SuggestionLogEntry;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diversity {
    /// Mean pairwise cosine distance over resolvable concepts.
    pub value: f64,
    pub resolved: usize,
    pub discarded: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Distinctness {
    /// Per distinct concept: mean distance to every other distinct concept.
    pub scores: BTreeMap<String, f64>,
    pub discarded: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceDistance {
    pub entry: usize,
    pub source: String,
    pub suggestion: String,
    pub accepted: bool,
    pub distance: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SourceDistances {
    pub rows: Vec<SourceDistance>,
    /// Offered suggestions dropped because an endpoint did not resolve.
    pub skipped: usize,
}

fn resolve<'a>(
    concepts: impl IntoIterator<Item = &'a str>,
    table: &EmbeddingTable,
) -> (Vec<(&'a str, Vec<f64>)>, Vec<String>) {
    let mut resolved = Vec::new();
    let mut discarded = Vec::new();
    for c in concepts {
        match table.lookup(c) {
            Some(v) => resolved.push((c, v)),
            None => discarded.push(c.to_string()),
        }
    }
    (resolved, discarded)
}

fn distance(u: &[f64], v: &[f64]) -> f64 {
    cosine_distance(u, v).expect("table vectors share a dimension and are nonzero")
}

pub fn map_diversity(map: &MindMap, table: &EmbeddingTable) -> Result<Diversity, AnalyticsError> {
    let (vectors, discarded) = resolve(map.concepts(), table);
    let n = vectors.len();
    if n < 2 {
        return Err(AnalyticsError::InsufficientData { needed: 2, found: n });
    }
    let mut sum = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            sum += distance(&vectors[i].1, &vectors[j].1);
        }
    }
    Ok(Diversity {
        value: sum / (n * (n - 1) / 2) as f64,
        resolved: n,
        discarded,
    })
}

/// Pools the distinct concepts of all maps and scores each by its mean
/// distance to all the others.
pub fn concept_distinctness(corpus: &[MindMap], table: &EmbeddingTable) -> Result<Distinctness, AnalyticsError> {
    let distinct: BTreeSet<&str> = corpus.iter().flat_map(MindMap::concepts).collect();
    let (vectors, discarded) = resolve(distinct, table);
    let n = vectors.len();
    if n < 2 {
        return Err(AnalyticsError::InsufficientData { needed: 2, found: n });
    }
    let mut sums = vec![0.0; n];
    for i in 0..n {
        for j in i + 1..n {
            let d = distance(&vectors[i].1, &vectors[j].1);
            sums[i] += d;
            sums[j] += d;
        }
    }
    let others = (n - 1) as f64;
    Ok(Distinctness {
        scores: vectors
            .iter()
            .zip(sums)
            .map(|((c, _), s)| (c.to_string(), s / others))
            .collect(),
        discarded,
    })
}

/// Distance from each offered suggestion to its source concept.
pub fn suggestion_source_distance(log: &[SuggestionLogEntry], table: &EmbeddingTable) -> SourceDistances {
    let mut out = SourceDistances::default();
    for (i, entry) in log.iter().enumerate() {
        let source = table.lookup(&entry.source);
        for suggestion in &entry.offered {
            match (&source, table.lookup(suggestion)) {
                (Some(s), Some(v)) => out.rows.push(SourceDistance {
                    entry: i,
                    source: entry.source.clone(),
                    suggestion: suggestion.clone(),
                    accepted: entry.accepted.as_deref() == Some(suggestion.as_str()),
                    distance: distance(s, &v),
                }),
                _ => out.skipped += 1,
            }
        }
    }
    out
}
