//! Concept suggestions for mind mapping.
//!
//! A [`KnowledgeGraph`] built from a ConceptNet-style assertion dump is explored
//! with second-order biased random walks ([`walker`]) to propose concepts that
//! are near (breadth-first regime) or far (depth-first regime) from a source
//! node. Mind maps ([`mindmap`]) are edited through a protocol-enforcing
//! [`session`], and [`analytics`] scores finished maps with embedding-based
//! diversity and distinctness metrics plus the usual two-sample statistics.

pub mod analytics;
pub mod embedding;
pub mod graph;
pub mod io;
pub mod mindmap;
pub mod session;
pub mod walker;

pub use embedding::{cosine_distance, EmbeddingError, EmbeddingTable};
pub use graph::{normalize_label, ConceptId, GraphError, KnowledgeGraph, RawEdge, WeightedEdge};
pub use mindmap::{MapError, MapMetrics, MindMap, NodeId, Provenance};
pub use session::{Session, SessionError, SuggestionLogEntry};
pub use walker::{Regime, SuggestionBatch, WalkError, WalkParams};
