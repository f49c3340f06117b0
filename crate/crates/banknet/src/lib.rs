//! Graph analytics for banking networks.
//!
//! Two pipelines share one weighted-digraph substrate:
//!
//! * **Exposure centralities** over quarterly snapshot series: common
//!   out-neighbor scores, PageRank on the edge-reversed network, min-max
//!   normalization, and classification of low-key vs highly-exposed
//!   leaders ([`centrality`]).
//! * **Suspicious-transaction scanning** over account transaction data:
//!   Louvain community partitioning, temporal and amount filtering,
//!   simple-cycle enumeration, bounded shortest-path analysis, and
//!   per-community R-values ([`aml`]).
//!
//! [`ingest`] parses the two input formats, [`report`] serializes
//! results, and [`oracle`] holds independent brute-force reference
//! implementations used for self-checks.

pub mod aml;
pub mod centrality;
pub mod community;
pub mod graph;
pub mod ingest;
pub mod oracle;
pub mod report;
pub mod synthetic;

pub use graph::{GraphBuilder, GraphError, NodeId, SnapshotSeries, WeightedDigraph};
