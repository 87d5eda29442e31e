//! Study-protocol session over one mind map.
//!
//! Suggestions are produced only on request, one batch at a time, and the
//! walk regime alternates between breadth-first and depth-first on every
//! request. A batch is resolved by accepting exactly one concept (the rest are
//! dismissed) or by dismissing all of them. Every request is logged with its
//! regime and `(p, q)`.
//!
//! Sessions never read the clock: callers pass timestamps, so a scripted
//! replay with fixed times and seed exports byte-identical documents.

use std::collections::HashSet;

use chrono::{DateTime, Utc};
use rand::{Rng, RngCore, SeedableRng};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{normalize_label, KnowledgeGraph};
use crate::mindmap::{MapDocument, MapError, MindMap, NodeId, PendingBatch, Target};
use crate::walker::{self, Regime, WalkError, WalkRng, DEFAULT_SUGGESTION_COUNT, DEFAULT_WALK_LENGTH};

pub const LOG_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SessionError {
    #[error("{0:?} is not in the concept vocabulary")]
    InvalidConcept(String),
    #[error("a suggestion batch is already pending; accept or dismiss it first")]
    PendingBatch,
    #[error("no suggestion batch is pending")]
    StaleBatch,
    #[error("{0} not found")]
    NotFound(String),
    #[error("no suggestions available for {0:?}")]
    Exhausted(String),
    #[error("{0:?} was not offered in the pending batch")]
    NotOffered(String),
    #[error("{0}")]
    InvalidEdit(String),
}

impl SessionError {
    /// Stable machine-readable code used on the wire.
    pub fn code(&self) -> &'static str {
        match self {
            SessionError::InvalidConcept(_) => "invalid_concept",
            SessionError::PendingBatch => "pending_batch",
            SessionError::StaleBatch => "stale_batch",
            SessionError::NotFound(_) => "not_found",
            SessionError::Exhausted(_) => "exhausted",
            SessionError::NotOffered(_) => "not_offered",
            SessionError::InvalidEdit(_) => "invalid_edit",
        }
    }
}

impl From<MapError> for SessionError {
    fn from(e: MapError) -> Self {
        match e {
            MapError::InvalidConcept(c) => SessionError::InvalidConcept(c),
            MapError::UnknownNode(n) => SessionError::NotFound(format!("node {n}")),
            MapError::StaleBatch => SessionError::StaleBatch,
            MapError::NotOffered(c) => SessionError::NotOffered(c),
            other => SessionError::InvalidEdit(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuggestionLogEntry {
    pub timestamp: DateTime<Utc>,
    pub source: String,
    pub regime: Regime,
    pub p: f64,
    pub q: f64,
    pub offered: Vec<String>,
    pub accepted: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SessionConfig {
    pub suggestion_count: usize,
    pub walk_length: usize,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            suggestion_count: DEFAULT_SUGGESTION_COUNT,
            walk_length: DEFAULT_WALK_LENGTH,
        }
    }
}

/// What a client sees of a freshly generated batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Offer {
    pub source_node: NodeId,
    pub source: String,
    pub regime: Regime,
    pub p: f64,
    pub q: f64,
    pub suggestions: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Decision {
    Accept { accept: String },
    Dismiss { dismiss: bool },
}

impl Decision {
    pub fn accept(concept: impl Into<String>) -> Self {
        Decision::Accept { accept: concept.into() }
    }

    pub fn dismiss_all() -> Self {
        Decision::Dismiss { dismiss: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum EditAction {
    ManualAdd {
        text: String,
        attach_to: NodeId,
    },
    LinkAdd {
        a: NodeId,
        b: NodeId,
    },
    Remove {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        node: Option<NodeId>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        link: Option<[NodeId; 2]>,
    },
    Move {
        node: NodeId,
        x: f64,
        y: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EditOutcome {
    Added(NodeId),
    Linked,
    Removed(Vec<NodeId>),
    Moved,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogDocument {
    pub version: u32,
    pub session_id: String,
    pub seed: u64,
    pub entries: Vec<SuggestionLogEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionExport {
    pub map: MapDocument,
    pub log: LogDocument,
}

impl SessionExport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("exports always serialize")
    }
}

#[derive(Debug, Clone)]
pub struct Session {
    session_id: String,
    seed: u64,
    config: SessionConfig,
    map: MindMap,
    pending: Option<(PendingBatch, usize)>,
    next_regime: Regime,
    rng: WalkRng,
    log: Vec<SuggestionLogEntry>,
}

impl Session {
    /// Bootstraps a map at `root_text`. Without a seed one is drawn from the
    /// OS; the first regime is a fair coin from the seeded generator.
    pub fn create(
        graph: &KnowledgeGraph,
        session_id: impl Into<String>,
        root_text: &str,
        seed: Option<u64>,
        now: DateTime<Utc>,
        config: SessionConfig,
    ) -> Result<Self, SessionError> {
        if config.suggestion_count == 0 {
            return Err(SessionError::InvalidEdit("suggestion count must be at least 1".into()));
        }
        let seed = seed.unwrap_or_else(|| rand::rng().next_u64());
        let mut rng = WalkRng::seed_from_u64(seed);
        let next_regime = if rng.random::<bool>() { Regime::Bfs } else { Regime::Dfs };
        let session_id = session_id.into();
        let map = MindMap::create(session_id.clone(), now, root_text, graph, &mut rng)?;
        Ok(Self {
            session_id,
            seed,
            config,
            map,
            pending: None,
            next_regime,
            rng,
            log: Vec::new(),
        })
    }

    pub fn id(&self) -> &str {
        &self.session_id
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn map(&self) -> &MindMap {
        &self.map
    }

    pub fn log(&self) -> &[SuggestionLogEntry] {
        &self.log
    }

    pub fn next_regime(&self) -> Regime {
        self.next_regime
    }

    pub fn pending(&self) -> Option<&PendingBatch> {
        self.pending.as_ref().map(|(b, _)| b)
    }

    /// Generates a batch at `node_id`, excluding every concept already on the
    /// map. The regime flips and a log entry is appended even when no
    /// suggestion could be found.
    pub fn request_suggestions(
        &mut self,
        graph: &KnowledgeGraph,
        node_id: NodeId,
        now: DateTime<Utc>,
    ) -> Result<Offer, SessionError> {
        if self.pending.is_some() {
            return Err(SessionError::PendingBatch);
        }
        let node = self
            .map
            .node(node_id)
            .ok_or_else(|| SessionError::NotFound(format!("node {node_id}")))?;
        let source = graph
            .id_of(&node.concept)
            .ok_or_else(|| SessionError::InvalidConcept(node.concept.clone()))?;
        let source_label = node.concept.clone();
        let exclude: HashSet<_> = self.map.concepts().filter_map(|c| graph.id_of(c)).collect();

        let regime = self.next_regime;
        let seed = self.rng.next_u64();
        self.next_regime = regime.flip();
        let result = walker::suggest_from_seed(
            graph,
            source,
            regime,
            &exclude,
            self.config.suggestion_count,
            self.config.walk_length,
            seed,
        );
        match result {
            Ok(batch) => {
                let pending = PendingBatch::new(&batch, node_id, graph);
                let offer = Offer {
                    source_node: node_id,
                    source: source_label.clone(),
                    regime,
                    p: batch.params.p,
                    q: batch.params.q,
                    suggestions: pending.offered.clone(),
                };
                self.log.push(SuggestionLogEntry {
                    timestamp: now,
                    source: source_label,
                    regime,
                    p: batch.params.p,
                    q: batch.params.q,
                    offered: pending.offered.clone(),
                    accepted: None,
                });
                self.pending = Some((pending, self.log.len() - 1));
                Ok(offer)
            }
            Err(WalkError::Exhausted { .. }) => {
                let (p, q) = walker::sample_regime_params(regime, &mut WalkRng::seed_from_u64(seed));
                self.log.push(SuggestionLogEntry {
                    timestamp: now,
                    source: source_label.clone(),
                    regime,
                    p,
                    q,
                    offered: Vec::new(),
                    accepted: None,
                });
                Err(SessionError::Exhausted(source_label))
            }
            Err(other) => unreachable!("walker preconditions checked above: {other}"),
        }
    }

    /// Accepts one offered concept or dismisses the whole batch. On error the
    /// session is unchanged.
    pub fn resolve_batch(&mut self, decision: &Decision) -> Result<Option<NodeId>, SessionError> {
        let Some((batch, entry)) = self.pending.as_mut() else {
            return Err(SessionError::StaleBatch);
        };
        match decision {
            Decision::Accept { accept } => {
                let chosen = normalize_label(accept).unwrap_or_else(|_| accept.clone());
                let node = self.map.accept_suggestion(batch, &chosen)?;
                self.log[*entry].accepted = Some(chosen);
                self.pending = None;
                Ok(Some(node))
            }
            Decision::Dismiss { dismiss: true } => {
                self.map.dismiss_suggestions(batch)?;
                self.pending = None;
                Ok(None)
            }
            Decision::Dismiss { dismiss: false } => {
                Err(SessionError::InvalidEdit("`dismiss` must be true".into()))
            }
        }
    }

    pub fn edit(&mut self, graph: &KnowledgeGraph, action: &EditAction) -> Result<EditOutcome, SessionError> {
        Ok(match *action {
            EditAction::ManualAdd { ref text, attach_to } => {
                EditOutcome::Added(self.map.add_manual_node(text, attach_to, graph)?)
            }
            EditAction::LinkAdd { a, b } => {
                self.map.add_link(a, b)?;
                EditOutcome::Linked
            }
            EditAction::Remove { node, link } => {
                let target = match (node, link) {
                    (Some(n), None) => Target::Node(n),
                    (None, Some([a, b])) => Target::Link(a, b),
                    _ => {
                        return Err(SessionError::InvalidEdit(
                            "remove takes exactly one of `node` or `link`".into(),
                        ))
                    }
                };
                EditOutcome::Removed(self.map.remove_element(target)?)
            }
            EditAction::Move { node, x, y } => {
                self.map.move_node(node, x, y)?;
                EditOutcome::Moved
            }
        })
    }

    pub fn export(&self) -> SessionExport {
        SessionExport {
            map: self.map.to_document(),
            log: LogDocument {
                version: LOG_VERSION,
                session_id: self.session_id.clone(),
                seed: self.seed,
                entries: self.log.clone(),
            },
        }
    }
}
