//! Weighted directed graph with dense node ids and a label dictionary.
//!
//! Every analysis in this crate runs on [`WeightedDigraph`]: nodes are
//! contiguous integer ids for array-indexed algorithms, labels (country
//! names, account identifiers) appear only at I/O boundaries. Graphs are
//! immutable after construction, so sharing them across threads is safe.

use std::collections::{HashMap, HashSet};
use std::fmt;

use thiserror::Error;

/// Dense node index. Valid only for the graph that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(pub u32);

impl NodeId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("duplicate edge {source} -> {target}")]
    DuplicateEdge { source: String, target: String },
    #[error("edge {source} -> {target} has non-positive weight {weight}")]
    NonPositiveWeight {
        source: String,
        target: String,
        weight: f64,
    },
    #[error("self-loop on node {label}")]
    SelfLoop { label: String },
    #[error("unknown node id {0}")]
    UnknownNode(u32),
    #[error("snapshot periods not strictly increasing: {previous:?} then {current:?}")]
    UnorderedPeriods { previous: String, current: String },
    #[error("snapshot {period} does not share the series label universe")]
    LabelUniverseMismatch { period: String },
}

/// Incremental constructor. Nodes are created on first mention (or
/// explicitly, to represent isolated nodes); edges are validated as they
/// are added.
#[derive(Debug, Default)]
pub struct GraphBuilder {
    labels: Vec<String>,
    ids: HashMap<String, NodeId>,
    edges: Vec<(NodeId, NodeId, f64)>,
    seen: HashSet<(NodeId, NodeId)>,
}

impl GraphBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Get or create the node for `label`.
    pub fn node(&mut self, label: &str) -> NodeId {
        if let Some(&id) = self.ids.get(label) {
            return id;
        }
        let id = NodeId(self.labels.len() as u32);
        self.labels.push(label.to_owned());
        self.ids.insert(label.to_owned(), id);
        id
    }

    pub fn edge(&mut self, source: NodeId, target: NodeId, weight: f64) -> Result<(), GraphError> {
        let n = self.labels.len() as u32;
        for id in [source, target] {
            if id.0 >= n {
                return Err(GraphError::UnknownNode(id.0));
            }
        }
        if source == target {
            return Err(GraphError::SelfLoop {
                label: self.labels[source.index()].clone(),
            });
        }
        if !(weight.is_finite() && weight > 0.0) {
            return Err(GraphError::NonPositiveWeight {
                source: self.labels[source.index()].clone(),
                target: self.labels[target.index()].clone(),
                weight,
            });
        }
        if !self.seen.insert((source, target)) {
            return Err(GraphError::DuplicateEdge {
                source: self.labels[source.index()].clone(),
                target: self.labels[target.index()].clone(),
            });
        }
        self.edges.push((source, target, weight));
        Ok(())
    }

    pub fn edge_by_label(
        &mut self,
        source: &str,
        target: &str,
        weight: f64,
    ) -> Result<(), GraphError> {
        let s = self.node(source);
        let t = self.node(target);
        self.edge(s, t, weight)
    }

    pub fn build(self) -> WeightedDigraph {
        let n = self.labels.len();
        let mut out: Vec<Vec<(NodeId, f64)>> = vec![Vec::new(); n];
        let mut inc: Vec<Vec<(NodeId, f64)>> = vec![Vec::new(); n];
        for (s, t, w) in &self.edges {
            out[s.index()].push((*t, *w));
            inc[t.index()].push((*s, *w));
        }
        for adj in out.iter_mut().chain(inc.iter_mut()) {
            adj.sort_unstable_by_key(|(v, _)| *v);
        }
        WeightedDigraph {
            labels: self.labels,
            ids: self.ids,
            out,
            inc,
            edge_count: self.edges.len(),
        }
    }
}

/// Immutable weighted directed graph.
///
/// Invariants: no self-loops, at most one edge per ordered pair, all
/// weights strictly positive and finite. Isolated nodes are allowed;
/// the node universe is independent of the edge set.
#[derive(Debug, Clone)]
pub struct WeightedDigraph {
    labels: Vec<String>,
    ids: HashMap<String, NodeId>,
    /// Out-adjacency per node, sorted by target id.
    out: Vec<Vec<(NodeId, f64)>>,
    /// In-adjacency per node, sorted by source id.
    inc: Vec<Vec<(NodeId, f64)>>,
    edge_count: usize,
}

impl WeightedDigraph {
    /// Build a graph from `(source label, target label, weight)` triples.
    /// Node ids follow first appearance; duplicate ordered pairs are an
    /// error (merging policy belongs to the ingest layer).
    pub fn from_triples<S: AsRef<str>>(triples: &[(S, S, f64)]) -> Result<Self, GraphError> {
        let mut b = GraphBuilder::new();
        for (s, t, w) in triples {
            b.edge_by_label(s.as_ref(), t.as_ref(), *w)?;
        }
        Ok(b.build())
    }

    pub fn node_count(&self) -> usize {
        self.labels.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn node_ids(&self) -> impl Iterator<Item = NodeId> {
        (0..self.labels.len() as u32).map(NodeId)
    }

    pub fn label(&self, u: NodeId) -> &str {
        &self.labels[u.index()]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn node_id(&self, label: &str) -> Option<NodeId> {
        self.ids.get(label).copied()
    }

    /// Out-neighbors of `u` with edge weights, sorted by target id.
    pub fn out_neighbors(&self, u: NodeId) -> &[(NodeId, f64)] {
        &self.out[u.index()]
    }

    /// In-neighbors of `u` with edge weights, sorted by source id.
    pub fn in_neighbors(&self, u: NodeId) -> &[(NodeId, f64)] {
        &self.inc[u.index()]
    }

    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId, f64)> + '_ {
        self.out.iter().enumerate().flat_map(|(u, adj)| {
            adj.iter().map(move |&(v, w)| (NodeId(u as u32), v, w))
        })
    }

    pub fn edge_weight(&self, u: NodeId, v: NodeId) -> Option<f64> {
        let adj = &self.out[u.index()];
        adj.binary_search_by_key(&v, |(t, _)| *t)
            .ok()
            .map(|i| adj[i].1)
    }

    pub fn has_edge(&self, u: NodeId, v: NodeId) -> bool {
        self.edge_weight(u, v).is_some()
    }

    pub fn out_degree(&self, u: NodeId) -> usize {
        self.out[u.index()].len()
    }

    pub fn in_degree(&self, u: NodeId) -> usize {
        self.inc[u.index()].len()
    }

    pub fn out_weight_sum(&self, u: NodeId) -> f64 {
        self.out[u.index()].iter().map(|(_, w)| w).sum()
    }

    pub fn in_weight_sum(&self, u: NodeId) -> f64 {
        self.inc[u.index()].iter().map(|(_, w)| w).sum()
    }

    pub fn total_weight(&self) -> f64 {
        (0..self.labels.len())
            .map(|u| self.out_weight_sum(NodeId(u as u32)))
            .sum()
    }

    /// Graph with every edge flipped: `(u,v;w)` becomes `(v,u;w)`. Node
    /// set and labels are preserved. Involution: `g.reverse().reverse()`
    /// equals `g`.
    pub fn reverse(&self) -> Self {
        WeightedDigraph {
            labels: self.labels.clone(),
            ids: self.ids.clone(),
            out: self.inc.clone(),
            inc: self.out.clone(),
            edge_count: self.edge_count,
        }
    }

    /// Subgraph of exactly the edges satisfying `keep`; the node universe
    /// shrinks to the endpoints of kept edges.
    pub fn induce_by_edges<F>(&self, mut keep: F) -> Self
    where
        F: FnMut(NodeId, NodeId, f64) -> bool,
    {
        let kept: Vec<(NodeId, NodeId, f64)> =
            self.edges().filter(|&(u, v, w)| keep(u, v, w)).collect();
        let mut endpoint_ids: Vec<NodeId> = kept
            .iter()
            .flat_map(|&(u, v, _)| [u, v])
            .collect();
        endpoint_ids.sort_unstable();
        endpoint_ids.dedup();
        self.rebuild_from(&endpoint_ids, &kept)
    }

    /// Subgraph induced by `nodes`: exactly the edges with both endpoints
    /// in the set. Isolated members of `nodes` stay in the universe.
    pub fn induce_by_nodes(&self, nodes: &[NodeId]) -> Result<Self, GraphError> {
        let n = self.labels.len() as u32;
        let mut sorted: Vec<NodeId> = nodes.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        if let Some(&bad) = sorted.iter().find(|id| id.0 >= n) {
            return Err(GraphError::UnknownNode(bad.0));
        }
        let mut member = vec![false; self.labels.len()];
        for id in &sorted {
            member[id.index()] = true;
        }
        let kept: Vec<(NodeId, NodeId, f64)> = self
            .edges()
            .filter(|&(u, v, _)| member[u.index()] && member[v.index()])
            .collect();
        Ok(self.rebuild_from(&sorted, &kept))
    }

    /// Rebuild a graph over `nodes` (sorted original ids) with `edges`
    /// remapped to the new dense id space.
    fn rebuild_from(&self, nodes: &[NodeId], edges: &[(NodeId, NodeId, f64)]) -> Self {
        let mut b = GraphBuilder::new();
        let mut remap: HashMap<NodeId, NodeId> = HashMap::with_capacity(nodes.len());
        for &old in nodes {
            remap.insert(old, b.node(&self.labels[old.index()]));
        }
        for &(u, v, w) in edges {
            // Edges come from a valid graph, so re-validation cannot fail.
            b.edge(remap[&u], remap[&v], w)
                .expect("induced edge valid by construction");
        }
        b.build()
    }
}

/// Equality is semantic: same label universe and the same labeled edge
/// set with bit-identical weights. Internal id assignment is irrelevant.
impl PartialEq for WeightedDigraph {
    fn eq(&self, other: &Self) -> bool {
        if self.labels.len() != other.labels.len() || self.edge_count != other.edge_count {
            return false;
        }
        let mut mine: Vec<&str> = self.labels.iter().map(String::as_str).collect();
        let mut theirs: Vec<&str> = other.labels.iter().map(String::as_str).collect();
        mine.sort_unstable();
        theirs.sort_unstable();
        if mine != theirs {
            return false;
        }
        let key = |g: &Self, (u, v, w): (NodeId, NodeId, f64)| {
            (g.label(u).to_owned(), g.label(v).to_owned(), w.to_bits())
        };
        let mut a: Vec<_> = self.edges().map(|e| key(self, e)).collect();
        let mut b: Vec<_> = other.edges().map(|e| key(other, e)).collect();
        a.sort_unstable();
        b.sort_unstable();
        a == b
    }
}

/// Ordered sequence of `(period label, graph)` snapshots over one shared
/// label universe. Nodes absent in a quarter appear as isolated nodes.
#[derive(Debug, Clone)]
pub struct SnapshotSeries {
    snapshots: Vec<(String, WeightedDigraph)>,
}

impl SnapshotSeries {
    /// Validates that period labels strictly increase (lexicographic date
    /// order, e.g. "2006-03") and that all graphs share one label set.
    pub fn new(snapshots: Vec<(String, WeightedDigraph)>) -> Result<Self, GraphError> {
        for pair in snapshots.windows(2) {
            if pair[0].0 >= pair[1].0 {
                return Err(GraphError::UnorderedPeriods {
                    previous: pair[0].0.clone(),
                    current: pair[1].0.clone(),
                });
            }
        }
        if let Some((_, first)) = snapshots.first() {
            let mut universe: Vec<&str> = first.labels().iter().map(String::as_str).collect();
            universe.sort_unstable();
            for (period, g) in &snapshots {
                let mut labels: Vec<&str> = g.labels().iter().map(String::as_str).collect();
                labels.sort_unstable();
                if labels != universe {
                    return Err(GraphError::LabelUniverseMismatch {
                        period: period.clone(),
                    });
                }
            }
        }
        Ok(Self { snapshots })
    }

    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &(String, WeightedDigraph)> {
        self.snapshots.iter()
    }

    pub fn get(&self, i: usize) -> Option<&(String, WeightedDigraph)> {
        self.snapshots.get(i)
    }

    pub fn periods(&self) -> impl Iterator<Item = &str> {
        self.snapshots.iter().map(|(p, _)| p.as_str())
    }
}
