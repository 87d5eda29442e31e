//! Mind-map document model.
//!
//! Links are undirected and unlabeled. Every edit keeps the map connected:
//! removing a node prunes whatever it cut off from the root, while removing a
//! link that would disconnect the map is refused. A concept appears at most
//! once per map.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;

use chrono::{DateTime, Utc};
use rand::RngCore;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{ConceptId, KnowledgeGraph};
use crate::walker::{self, SuggestionBatch};

/// Neighbors attached to the root when a map is created.
pub const BOOTSTRAP_NEIGHBORS: usize = 5;
pub const DOCUMENT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MapError {
    #[error("{0:?} is not in the concept vocabulary")]
    InvalidConcept(String),
    #[error("concept {0:?} is already on the map")]
    DuplicateConcept(String),
    #[error("node {0} does not exist")]
    UnknownNode(NodeId),
    #[error("a node cannot be linked to itself")]
    SelfLink,
    #[error("link {0} already exists")]
    DuplicateLink(Link),
    #[error("link {0} does not exist")]
    UnknownLink(Link),
    #[error("the root node cannot be removed")]
    RootRemoval,
    #[error("removing link {0} would disconnect the map")]
    WouldDisconnect(Link),
    #[error("{0:?} was not offered in this batch")]
    NotOffered(String),
    #[error("the suggestion batch was already resolved")]
    StaleBatch,
    #[error("invalid map document: {0}")]
    Load(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Root,
    Manual,
    Suggested,
    BootstrapNeighbor,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MindMapNode {
    pub id: NodeId,
    pub concept: String,
    pub provenance: Provenance,
    pub position: Option<Position>,
}

/// Unordered node pair, stored with the smaller id first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Link(NodeId, NodeId);

impl Link {
    pub fn new(a: NodeId, b: NodeId) -> Self {
        if a <= b {
            Link(a, b)
        } else {
            Link(b, a)
        }
    }

    pub fn endpoints(self) -> (NodeId, NodeId) {
        (self.0, self.1)
    }

    fn touches(self, n: NodeId) -> bool {
        self.0 == n || self.1 == n
    }
}

impl fmt::Display for Link {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{}, {}}}", self.0, self.1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MapMetrics {
    pub node_count: usize,
    /// Mean hop distance to the root over non-root nodes (0 for a lone root).
    pub mean_depth: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "state", content = "concept")]
pub enum BatchStatus {
    Pending,
    Accepted(String),
    Dismissed,
}

/// A suggestion batch as offered on a particular map node.
#[derive(Debug, Clone, PartialEq)]
pub struct PendingBatch {
    pub source_node: NodeId,
    pub source_concept: String,
    pub offered: Vec<String>,
    pub status: BatchStatus,
}

impl PendingBatch {
    pub fn new(batch: &SuggestionBatch, source_node: NodeId, graph: &KnowledgeGraph) -> Self {
        let name = |id: ConceptId| graph.label(id).unwrap_or_default().to_string();
        Self {
            source_node,
            source_concept: name(batch.source),
            offered: batch.suggestions.iter().map(|&c| name(c)).collect(),
            status: BatchStatus::Pending,
        }
    }

    /// Offered concepts that were not accepted (all of them after a dismissal).
    pub fn dismissed(&self) -> Vec<&str> {
        match &self.status {
            BatchStatus::Pending => Vec::new(),
            BatchStatus::Dismissed => self.offered.iter().map(String::as_str).collect(),
            BatchStatus::Accepted(c) => self.offered.iter().filter(|o| *o != c).map(String::as_str).collect(),
        }
    }
}

/// What [`MindMap::remove_element`] removes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    Node(NodeId),
    Link(NodeId, NodeId),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MindMap {
    map_id: String,
    created_at: DateTime<Utc>,
    nodes: BTreeMap<NodeId, MindMapNode>,
    links: BTreeSet<Link>,
    root: NodeId,
    next_id: u32,
    metadata: BTreeMap<String, String>,
}

impl MindMap {
    /// Starts a map at `root_text` with up to [`BOOTSTRAP_NEIGHBORS`]
    /// weight-sampled graph neighbors attached to the root.
    pub fn create<R: RngCore + ?Sized>(
        map_id: impl Into<String>,
        created_at: DateTime<Utc>,
        root_text: &str,
        graph: &KnowledgeGraph,
        rng: &mut R,
    ) -> Result<Self, MapError> {
        let root_id = graph
            .contains(root_text)
            .ok_or_else(|| MapError::InvalidConcept(root_text.to_string()))?;
        let mut map = Self::with_root(map_id, created_at, graph.label(root_id).expect("id from graph"));
        let neighbors = walker::initial_neighbors(graph, root_id, BOOTSTRAP_NEIGHBORS, rng)
            .expect("root is a graph node");
        for n in neighbors {
            let id = map.push_node(graph.label(n).expect("id from graph").to_string(), Provenance::BootstrapNeighbor);
            map.links.insert(Link::new(map.root, id));
        }
        Ok(map)
    }

    /// A map holding only a root node, without any vocabulary check.
    pub fn with_root(map_id: impl Into<String>, created_at: DateTime<Utc>, concept: &str) -> Self {
        let mut map = Self {
            map_id: map_id.into(),
            created_at,
            nodes: BTreeMap::new(),
            links: BTreeSet::new(),
            root: NodeId(0),
            next_id: 0,
            metadata: BTreeMap::new(),
        };
        map.root = map.push_node(concept.to_string(), Provenance::Root);
        map
    }

    fn push_node(&mut self, concept: String, provenance: Provenance) -> NodeId {
        let id = NodeId(self.next_id);
        self.next_id += 1;
        self.nodes.insert(
            id,
            MindMapNode {
                id,
                concept,
                provenance,
                position: None,
            },
        );
        id
    }

    pub fn map_id(&self) -> &str {
        &self.map_id
    }

    pub fn created_at(&self) -> DateTime<Utc> {
        self.created_at
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn node(&self, id: NodeId) -> Option<&MindMapNode> {
        self.nodes.get(&id)
    }

    pub fn nodes(&self) -> impl Iterator<Item = &MindMapNode> {
        self.nodes.values()
    }

    pub fn links(&self) -> impl Iterator<Item = Link> + '_ {
        self.links.iter().copied()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn link_count(&self) -> usize {
        self.links.len()
    }

    pub fn concepts(&self) -> impl Iterator<Item = &str> {
        self.nodes.values().map(|n| n.concept.as_str())
    }

    pub fn find_concept(&self, concept: &str) -> Option<NodeId> {
        self.nodes.values().find(|n| n.concept == concept).map(|n| n.id)
    }

    pub fn metadata(&self) -> &BTreeMap<String, String> {
        &self.metadata
    }

    /// Free-form annotations (e.g. study condition) carried in the document.
    pub fn set_metadata(&mut self, key: impl Into<String>, value: impl Into<String>) {
        self.metadata.insert(key.into(), value.into());
    }

    fn require(&self, id: NodeId) -> Result<&MindMapNode, MapError> {
        self.nodes.get(&id).ok_or(MapError::UnknownNode(id))
    }

    fn attach(&mut self, concept: String, provenance: Provenance, attach_to: NodeId) -> Result<NodeId, MapError> {
        self.require(attach_to)?;
        if self.find_concept(&concept).is_some() {
            return Err(MapError::DuplicateConcept(concept));
        }
        let id = self.push_node(concept, provenance);
        self.links.insert(Link::new(attach_to, id));
        Ok(id)
    }

    /// Adds a vocabulary-checked concept linked to `attach_to`.
    pub fn add_manual_node(&mut self, text: &str, attach_to: NodeId, graph: &KnowledgeGraph) -> Result<NodeId, MapError> {
        let id = graph
            .contains(text)
            .ok_or_else(|| MapError::InvalidConcept(text.to_string()))?;
        let concept = graph.label(id).expect("id from graph").to_string();
        self.attach(concept, Provenance::Manual, attach_to)
    }

    /// Commits `chosen` from the batch, linked to the batch's source node; the
    /// other offered concepts count as dismissed.
    pub fn accept_suggestion(&mut self, batch: &mut PendingBatch, chosen: &str) -> Result<NodeId, MapError> {
        if batch.status != BatchStatus::Pending {
            return Err(MapError::StaleBatch);
        }
        let Some(concept) = batch.offered.iter().find(|o| o.as_str() == chosen) else {
            return Err(MapError::NotOffered(chosen.to_string()));
        };
        let id = self.attach(concept.clone(), Provenance::Suggested, batch.source_node)?;
        batch.status = BatchStatus::Accepted(chosen.to_string());
        Ok(id)
    }

    pub fn dismiss_suggestions(&mut self, batch: &mut PendingBatch) -> Result<(), MapError> {
        if batch.status != BatchStatus::Pending {
            return Err(MapError::StaleBatch);
        }
        batch.status = BatchStatus::Dismissed;
        Ok(())
    }

    pub fn add_link(&mut self, a: NodeId, b: NodeId) -> Result<(), MapError> {
        self.require(a)?;
        self.require(b)?;
        if a == b {
            return Err(MapError::SelfLink);
        }
        let link = Link::new(a, b);
        if !self.links.insert(link) {
            return Err(MapError::DuplicateLink(link));
        }
        Ok(())
    }

    /// Removes a node or link, returning the ids of every node removed.
    pub fn remove_element(&mut self, target: Target) -> Result<Vec<NodeId>, MapError> {
        match target {
            Target::Node(id) => self.remove_node(id),
            Target::Link(a, b) => self.remove_link(a, b).map(|()| Vec::new()),
        }
    }

    /// Removes `id`, its links, and any nodes no longer reachable from the root.
    pub fn remove_node(&mut self, id: NodeId) -> Result<Vec<NodeId>, MapError> {
        self.require(id)?;
        if id == self.root {
            return Err(MapError::RootRemoval);
        }
        self.nodes.remove(&id);
        self.links.retain(|l| !l.touches(id));
        let reachable = self.depths();
        let mut removed = vec![id];
        let cut: Vec<NodeId> = self.nodes.keys().filter(|n| !reachable.contains_key(n)).copied().collect();
        for n in cut {
            self.nodes.remove(&n);
            removed.push(n);
        }
        self.links
            .retain(|l| reachable.contains_key(&l.0) && reachable.contains_key(&l.1));
        removed.sort();
        Ok(removed)
    }

    /// Removes a link unless doing so would disconnect the map.
    pub fn remove_link(&mut self, a: NodeId, b: NodeId) -> Result<(), MapError> {
        let link = Link::new(a, b);
        if !self.links.remove(&link) {
            return Err(MapError::UnknownLink(link));
        }
        if self.depths().len() != self.nodes.len() {
            self.links.insert(link);
            return Err(MapError::WouldDisconnect(link));
        }
        Ok(())
    }

    /// Updates a stored position; layout never affects metrics.
    pub fn move_node(&mut self, id: NodeId, x: f64, y: f64) -> Result<(), MapError> {
        if !(x.is_finite() && y.is_finite()) {
            return Err(MapError::Load(format!("non-finite position ({x}, {y})")));
        }
        let node = self.nodes.get_mut(&id).ok_or(MapError::UnknownNode(id))?;
        node.position = Some(Position { x, y });
        Ok(())
    }

    /// Hop distance from the root for every reachable node.
    pub fn depths(&self) -> HashMap<NodeId, usize> {
        let mut adj: HashMap<NodeId, Vec<NodeId>> = HashMap::new();
        for l in &self.links {
            adj.entry(l.0).or_default().push(l.1);
            adj.entry(l.1).or_default().push(l.0);
        }
        let mut depth = HashMap::from([(self.root, 0usize)]);
        let mut queue = VecDeque::from([self.root]);
        while let Some(u) = queue.pop_front() {
            let d = depth[&u] + 1;
            for &v in adj.get(&u).into_iter().flatten() {
                if let std::collections::hash_map::Entry::Vacant(e) = depth.entry(v) {
                    e.insert(d);
                    queue.push_back(v);
                }
            }
        }
        depth
    }

    pub fn is_connected(&self) -> bool {
        self.depths().len() == self.nodes.len()
    }

    pub fn metrics(&self) -> MapMetrics {
        let depths = self.depths();
        let non_root = self.nodes.len() - 1;
        let total: usize = depths.values().sum();
        MapMetrics {
            node_count: self.nodes.len(),
            mean_depth: if non_root == 0 { 0.0 } else { total as f64 / non_root as f64 },
        }
    }

    pub fn to_document(&self) -> MapDocument {
        MapDocument {
            version: DOCUMENT_VERSION,
            map_id: self.map_id.clone(),
            created_at: self.created_at,
            nodes: self
                .nodes
                .values()
                .map(|n| NodeDocument {
                    id: n.id,
                    concept: n.concept.clone(),
                    provenance: n.provenance,
                    x: n.position.map(|p| p.x),
                    y: n.position.map(|p| p.y),
                })
                .collect(),
            links: self.links.iter().map(|l| [l.0, l.1]).collect(),
            metadata: self.metadata.clone(),
        }
    }

    pub fn from_document(doc: MapDocument) -> Result<Self, MapError> {
        let bad = |m: String| Err(MapError::Load(m));
        if doc.version != DOCUMENT_VERSION {
            return bad(format!("unsupported version {}", doc.version));
        }
        let mut nodes = BTreeMap::new();
        let mut roots = Vec::new();
        let mut concepts = BTreeSet::new();
        for n in doc.nodes {
            let position = match (n.x, n.y) {
                (Some(x), Some(y)) if x.is_finite() && y.is_finite() => Some(Position { x, y }),
                (None, None) => None,
                _ => return bad(format!("node {} has an incomplete position", n.id)),
            };
            if n.provenance == Provenance::Root {
                roots.push(n.id);
            }
            if n.concept.is_empty() || !concepts.insert(n.concept.clone()) {
                return bad(format!("node {} repeats or omits its concept", n.id));
            }
            let node = MindMapNode {
                id: n.id,
                concept: n.concept,
                provenance: n.provenance,
                position,
            };
            if nodes.insert(n.id, node).is_some() {
                return bad(format!("duplicate node id {}", n.id));
            }
        }
        let [root] = roots[..] else {
            return bad(format!("expected exactly one root, found {}", roots.len()));
        };
        let mut links = BTreeSet::new();
        for [a, b] in doc.links {
            if !nodes.contains_key(&a) || !nodes.contains_key(&b) {
                return bad(format!("link [{a}, {b}] references a missing node"));
            }
            if a == b {
                return bad(format!("self-link on node {a}"));
            }
            if !links.insert(Link::new(a, b)) {
                return bad(format!("duplicate link [{a}, {b}]"));
            }
        }
        let next_id = nodes.keys().next_back().map_or(0, |n| n.0 + 1);
        let map = Self {
            map_id: doc.map_id,
            created_at: doc.created_at,
            nodes,
            links,
            root,
            next_id,
            metadata: doc.metadata,
        };
        if !map.is_connected() {
            return bad("map is not connected to its root".into());
        }
        Ok(map)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("map documents always serialize")
    }

    pub fn from_json(text: &str) -> Result<Self, MapError> {
        let doc: MapDocument = serde_json::from_str(text).map_err(|e| MapError::Load(e.to_string()))?;
        Self::from_document(doc)
    }
}

/// Persisted form of a [`MindMap`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapDocument {
    pub version: u32,
    pub map_id: String,
    pub created_at: DateTime<Utc>,
    pub nodes: Vec<NodeDocument>,
    pub links: Vec<[NodeId; 2]>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub metadata: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeDocument {
    pub id: NodeId,
    pub concept: String,
    pub provenance: Provenance,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y: Option<f64>,
}
