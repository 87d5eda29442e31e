//! ConceptNet 5.x assertion dump reader.
//!
//! Each line holds five tab-separated fields: assertion URI, relation URI,
//! start URI, end URI and a JSON metadata object carrying `"weight"`. Only
//! English-to-English assertions (`/c/en/...`) become edges. Part-of-speech
//! and sense suffixes (`/c/en/run/v/wn/motion`) are folded into the bare label.

use std::io::BufRead;

use serde_json::Value;
use thiserror::Error;

use super::{floor_weight, is_vocabulary_label, GraphError, KnowledgeGraph, RawEdge, DEFAULT_WEIGHT};

const ENGLISH_PREFIX: &str = "/c/en/";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("expected 5 tab-separated fields, found {0}")]
    FieldCount(usize),
    #[error("field {field} is not a concept URI: {uri:?}")]
    BadUri { field: &'static str, uri: String },
    #[error("metadata is not a JSON object: {0}")]
    Metadata(String),
}

/// A malformed line that was skipped during ingestion.
#[derive(Debug, Clone, PartialEq)]
pub struct SkipEvent {
    /// 1-based line number.
    pub line: usize,
    pub error: ParseError,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct IngestReport {
    pub lines: usize,
    pub edges: usize,
    /// Lines with a non-English endpoint.
    pub non_english: usize,
    /// English lines whose label falls outside the vocabulary alphabet.
    pub unusable_labels: usize,
    pub skipped: Vec<SkipEvent>,
}

enum Endpoint {
    English(String),
    Foreign,
    Unusable,
}

fn endpoint(field: &'static str, uri: &str) -> Result<Endpoint, ParseError> {
    if let Some(rest) = uri.strip_prefix(ENGLISH_PREFIX) {
        let bare = rest.split('/').next().unwrap_or_default();
        let label = bare.to_lowercase();
        return Ok(if is_vocabulary_label(&label) {
            Endpoint::English(label)
        } else {
            Endpoint::Unusable
        });
    }
    match uri.strip_prefix("/c/") {
        Some(rest) if !rest.is_empty() => Ok(Endpoint::Foreign),
        _ => Err(ParseError::BadUri {
            field,
            uri: uri.to_string(),
        }),
    }
}

enum LineKind {
    Edge(RawEdge),
    Foreign,
    Unusable,
}

/// Parses one dump line. `Ok(None)` is the skip marker for assertions that are
/// well formed but not English-to-English.
pub fn parse_assertion_line(line: &str) -> Result<Option<RawEdge>, ParseError> {
    Ok(match classify_line(line)? {
        LineKind::Edge(e) => Some(e),
        LineKind::Foreign | LineKind::Unusable => None,
    })
}

fn classify_line(line: &str) -> Result<LineKind, ParseError> {
    let line = line.trim_end_matches(['\n', '\r']);
    let fields: Vec<&str> = line.split('\t').collect();
    if fields.len() != 5 {
        return Err(ParseError::FieldCount(fields.len()));
    }
    let start = endpoint("start", fields[2])?;
    let end = endpoint("end", fields[3])?;
    let meta: Value = serde_json::from_str(fields[4]).map_err(|e| ParseError::Metadata(e.to_string()))?;
    let meta = meta
        .as_object()
        .ok_or_else(|| ParseError::Metadata(fields[4].chars().take(40).collect()))?;
    let weight = meta
        .get("weight")
        .and_then(Value::as_f64)
        .map(floor_weight)
        .unwrap_or(DEFAULT_WEIGHT);

    Ok(match (start, end) {
        (Endpoint::English(a), Endpoint::English(b)) => LineKind::Edge(RawEdge::new(a, b, weight)),
        (Endpoint::Foreign, _) | (_, Endpoint::Foreign) => LineKind::Foreign,
        _ => LineKind::Unusable,
    })
}

/// Reads a whole dump and builds the graph. Malformed lines are recorded in
/// the report and never abort ingestion.
pub fn ingest_assertions<R: BufRead>(reader: R) -> Result<(KnowledgeGraph, IngestReport), GraphError> {
    let mut report = IngestReport::default();
    let mut edges = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        report.lines += 1;
        match classify_line(&line) {
            Ok(LineKind::Edge(edge)) => edges.push(edge),
            Ok(LineKind::Foreign) => report.non_english += 1,
            Ok(LineKind::Unusable) => report.unusable_labels += 1,
            Err(error) => report.skipped.push(SkipEvent { line: i + 1, error }),
        }
    }
    report.edges = edges.len();
    let graph = KnowledgeGraph::build(edges)?;
    Ok((graph, report))
}
