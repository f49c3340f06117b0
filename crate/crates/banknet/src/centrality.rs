//! Exposure centralities and leader classification.
//!
//! For one snapshot graph this module computes a common out-neighbor
//! (CON) score and a PageRank on the edge-reversed network per node,
//! rescales both into [0,1] with min-max normalization, and takes their
//! difference epsilon. Strongly positive epsilon marks a low-key leader
//! (influential but comparatively shielded), strongly negative marks a
//! highly-exposed leader.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{NodeId, SnapshotSeries, WeightedDigraph};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CentralityError {
    #[error("pair score requires two distinct nodes, got {0} twice")]
    SameNode(NodeId),
    #[error("set score requires at least 2 nodes, got {0}")]
    SetTooSmall(usize),
    #[error("cannot normalize an empty score vector")]
    EmptyInput,
    #[error("score vectors must cover the same nodes ({left} vs {right})")]
    KeyMismatch { left: usize, right: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

/// How the two edge weights into a common out-neighbor combine into one
/// contribution. `Min` reduces to the plain common-out-neighbor count on
/// unit weights.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConCombiner {
    #[default]
    Min,
    Product,
    Sum,
}

impl ConCombiner {
    #[inline]
    pub fn apply(self, a: f64, b: f64) -> f64 {
        match self {
            ConCombiner::Min => a.min(b),
            ConCombiner::Product => a * b,
            ConCombiner::Sum => a + b,
        }
    }
}

impl std::str::FromStr for ConCombiner {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "min" => Ok(ConCombiner::Min),
            "product" => Ok(ConCombiner::Product),
            "sum" => Ok(ConCombiner::Sum),
            other => Err(format!("unknown combiner {other:?} (expected min|product|sum)")),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ConConfig {
    pub combiner: ConCombiner,
}

/// Weighted common out-neighbor score of a pair: the sum, over every
/// node `w` that both `u` and `v` point at, of the combined edge
/// weights. Terms accumulate in ascending `w` order, so any two routes
/// that sum the same terms in that order agree bit-for-bit.
pub fn con_pair(
    g: &WeightedDigraph,
    u: NodeId,
    v: NodeId,
    cfg: &ConConfig,
) -> Result<f64, CentralityError> {
    if u == v {
        return Err(CentralityError::SameNode(u));
    }
    let a = g.out_neighbors(u);
    let b = g.out_neighbors(v);
    let (mut i, mut j) = (0, 0);
    let mut score = 0.0;
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                score += cfg.combiner.apply(a[i].1, b[j].1);
                i += 1;
                j += 1;
            }
        }
    }
    Ok(score)
}

/// Node score: sum of `con_pair(u, v)` over all `v != u`, accumulated in
/// ascending `v` order.
pub fn con_node(g: &WeightedDigraph, u: NodeId, cfg: &ConConfig) -> f64 {
    let mut total = 0.0;
    for v in g.node_ids() {
        if v != u {
            total += con_pair(g, u, v, cfg).expect("v != u");
        }
    }
    total
}

/// CON score of every node.
pub fn con_all(g: &WeightedDigraph, cfg: &ConConfig) -> Vec<f64> {
    g.node_ids().map(|u| con_node(g, u, cfg)).collect()
}

/// Set score: sum of `con_pair` over unordered distinct pairs within
/// `nodes`, accumulated in ascending `(u, v)` order.
pub fn con_set(
    g: &WeightedDigraph,
    nodes: &[NodeId],
    cfg: &ConConfig,
) -> Result<f64, CentralityError> {
    let mut sorted = nodes.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() < 2 {
        return Err(CentralityError::SetTooSmall(sorted.len()));
    }
    let mut total = 0.0;
    for (i, &u) in sorted.iter().enumerate() {
        for &v in &sorted[i + 1..] {
            total += con_pair(g, u, v, cfg)?;
        }
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PageRankConfig {
    /// Damping factor in (0,1).
    pub damping: f64,
    /// Convergence threshold on the L1 change per iteration.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for PageRankConfig {
    fn default() -> Self {
        Self {
            damping: 0.85,
            tolerance: 1e-10,
            max_iterations: 200,
        }
    }
}

impl PageRankConfig {
    pub fn validate(&self) -> Result<(), CentralityError> {
        if !(self.damping > 0.0 && self.damping < 1.0) {
            return Err(CentralityError::InvalidConfig(format!(
                "damping must be in (0,1), got {}",
                self.damping
            )));
        }
        if !(self.tolerance > 0.0) {
            return Err(CentralityError::InvalidConfig(format!(
                "tolerance must be positive, got {}",
                self.tolerance
            )));
        }
        if self.max_iterations == 0 {
            return Err(CentralityError::InvalidConfig(
                "max_iterations must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PageRankScores {
    /// Probability per node, summing to 1 (for non-empty graphs).
    pub scores: Vec<f64>,
    pub iterations: usize,
    /// False when the iteration cap was hit before the L1 change fell
    /// below tolerance; the last iterate is still returned.
    pub converged: bool,
}

/// Weighted PageRank of `g` itself: the walk moves from `u` to `v` with
/// probability proportional to `weight(u,v)`; dangling nodes spread
/// their mass uniformly; teleportation is uniform.
pub fn pagerank(g: &WeightedDigraph, cfg: &PageRankConfig) -> Result<PageRankScores, CentralityError> {
    cfg.validate()?;
    let n = g.node_count();
    if n == 0 {
        return Ok(PageRankScores {
            scores: Vec::new(),
            iterations: 0,
            converged: true,
        });
    }
    let nf = n as f64;
    let out_weight: Vec<f64> = g.node_ids().map(|u| g.out_weight_sum(u)).collect();
    let mut x = vec![1.0 / nf; n];
    let mut iterations = 0;
    let mut converged = false;
    while iterations < cfg.max_iterations {
        iterations += 1;
        let dangling: f64 = (0..n).filter(|&u| out_weight[u] == 0.0).map(|u| x[u]).sum();
        let base = (1.0 - cfg.damping) / nf + cfg.damping * dangling / nf;
        let mut next = vec![base; n];
        for u in 0..n {
            if out_weight[u] > 0.0 {
                let share = cfg.damping * x[u] / out_weight[u];
                for &(v, w) in g.out_neighbors(NodeId(u as u32)) {
                    next[v.index()] += share * w;
                }
            }
        }
        let l1: f64 = next.iter().zip(&x).map(|(a, b)| (a - b).abs()).sum();
        x = next;
        if l1 < cfg.tolerance {
            converged = true;
            break;
        }
    }
    Ok(PageRankScores {
        scores: x,
        iterations,
        converged,
    })
}

/// PageRank computed on the edge-reversed network, so high rank tracks
/// high out-weight in the original graph.
pub fn pagerank_reversed(
    g: &WeightedDigraph,
    cfg: &PageRankConfig,
) -> Result<PageRankScores, CentralityError> {
    pagerank(&g.reverse(), cfg)
}

/// Min-max rescaling into [0,1]: `(x - min) / (max - min)`. A constant
/// vector carries no ranking information and maps to all zeros.
pub fn unity_normalize(scores: &[f64]) -> Result<Vec<f64>, CentralityError> {
    if scores.is_empty() {
        return Err(CentralityError::EmptyInput);
    }
    let min = scores.iter().copied().fold(f64::INFINITY, f64::min);
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == min {
        return Ok(vec![0.0; scores.len()]);
    }
    let span = max - min;
    Ok(scores.iter().map(|&x| (x - min) / span).collect())
}

/// Per-node difference of the two normalized scores; values lie in
/// [-1, 1].
pub fn lkl_strength(con_norm: &[f64], pr_norm: &[f64]) -> Result<Vec<f64>, CentralityError> {
    if con_norm.len() != pr_norm.len() {
        return Err(CentralityError::KeyMismatch {
            left: con_norm.len(),
            right: pr_norm.len(),
        });
    }
    Ok(con_norm.iter().zip(pr_norm).map(|(c, p)| c - p).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LeaderClass {
    #[serde(rename = "LOW_KEY")]
    LowKey,
    #[serde(rename = "HIGHLY_EXPOSED")]
    HighlyExposed,
    #[serde(rename = "NEITHER")]
    Neither,
}

impl std::fmt::Display for LeaderClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            LeaderClass::LowKey => "LOW_KEY",
            LeaderClass::HighlyExposed => "HIGHLY_EXPOSED",
            LeaderClass::Neither => "NEITHER",
        };
        f.write_str(s)
    }
}

/// Classification cutoffs: epsilon above `low_key_min` marks a low-key
/// leader, epsilon below `highly_exposed_max` a highly-exposed one.
/// `highly_exposed_max < 0 < low_key_min`, so the classes cannot overlap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LeaderThresholds {
    pub low_key_min: f64,
    pub highly_exposed_max: f64,
}

impl Default for LeaderThresholds {
    fn default() -> Self {
        Self {
            low_key_min: 0.1,
            highly_exposed_max: -0.4,
        }
    }
}

impl LeaderThresholds {
    pub fn new(low_key_min: f64, highly_exposed_max: f64) -> Result<Self, CentralityError> {
        if !(highly_exposed_max < 0.0 && 0.0 < low_key_min) {
            return Err(CentralityError::InvalidConfig(format!(
                "thresholds must satisfy {highly_exposed_max} < 0 < {low_key_min}"
            )));
        }
        Ok(Self {
            low_key_min,
            highly_exposed_max,
        })
    }
}

/// Classify every node by its epsilon. All nodes beyond a threshold are
/// reported, not only the extremum: several leaders can coexist.
pub fn classify_leaders(epsilon: &[f64], th: &LeaderThresholds) -> Vec<LeaderClass> {
    epsilon
        .iter()
        .map(|&e| {
            if e > th.low_key_min {
                LeaderClass::LowKey
            } else if e < th.highly_exposed_max {
                LeaderClass::HighlyExposed
            } else {
                LeaderClass::Neither
            }
        })
        .collect()
}

/// Full per-node result for one snapshot. Vectors are indexed by the
/// graph's node ids; `labels` carries the id-to-name mapping.
#[derive(Debug, Clone, PartialEq)]
pub struct CentralityReport {
    pub labels: Vec<String>,
    pub con: Vec<f64>,
    pub pagerank: Vec<f64>,
    pub con_norm: Vec<f64>,
    pub pr_norm: Vec<f64>,
    pub epsilon: Vec<f64>,
    pub class: Vec<LeaderClass>,
    pub pagerank_converged: bool,
}

impl CentralityReport {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Compute everything for one snapshot: CON, reversed PageRank, both
/// normalizations, epsilon, and the leader class per node.
pub fn analyze_snapshot(
    g: &WeightedDigraph,
    con_cfg: &ConConfig,
    pr_cfg: &PageRankConfig,
    th: &LeaderThresholds,
) -> Result<CentralityReport, CentralityError> {
    let labels = g.labels().to_vec();
    if labels.is_empty() {
        pr_cfg.validate()?;
        return Ok(CentralityReport {
            labels,
            con: Vec::new(),
            pagerank: Vec::new(),
            con_norm: Vec::new(),
            pr_norm: Vec::new(),
            epsilon: Vec::new(),
            class: Vec::new(),
            pagerank_converged: true,
        });
    }
    let con = con_all(g, con_cfg);
    let pr = pagerank_reversed(g, pr_cfg)?;
    let con_norm = unity_normalize(&con)?;
    let pr_norm = unity_normalize(&pr.scores)?;
    let epsilon = lkl_strength(&con_norm, &pr_norm)?;
    let class = classify_leaders(&epsilon, th);
    Ok(CentralityReport {
        labels,
        con,
        pagerank: pr.scores,
        con_norm,
        pr_norm,
        epsilon,
        class,
        pagerank_converged: pr.converged,
    })
}

/// One report per snapshot, in period order. Snapshots are independent
/// and processed concurrently; results are gathered in input order.
pub fn analyze_series(
    series: &SnapshotSeries,
    con_cfg: &ConConfig,
    pr_cfg: &PageRankConfig,
    th: &LeaderThresholds,
) -> Result<Vec<(String, CentralityReport)>, CentralityError> {
    series
        .iter()
        .collect::<Vec<_>>()
        .par_iter()
        .map(|(period, g)| Ok((period.clone(), analyze_snapshot(g, con_cfg, pr_cfg, th)?)))
        .collect()
}
