//! Multi-hop neighborhood sampling.
//!
//! The sampler is written against [`NeighborSource`] so the same code
//! expands neighborhoods over a [`HeteroGraph`] during training and over the
//! nearline key-value stores during serving. Candidates are put in canonical
//! order (ascending node, then weight) before drawing, and the random
//! stream is seeded from `(config.seed, root)`, so two sources holding the
//! same neighbor sets produce identical compute graphs.

use std::collections::HashSet;

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng as _;

use super::store::{HeteroGraph, Neighbor};
use super::types::{EdgeTypeSet, FeatureVector, NodeRef};
use super::GraphError;
use crate::gnn::{CgNode, ComputeGraph};
use crate::rng::{node_salt, rng_for, Rng};

/// Random-walk length for approximate personalized PageRank.
pub const PPR_WALK_LENGTH: usize = 20;
/// Walks launched from each expanded node.
pub const PPR_WALKS: usize = 50;
pub const DEFAULT_PPR_ALPHA: f64 = 0.15;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SamplingStrategy {
    /// Equiprobable draws.
    Uniform,
    /// Draws proportional to edge weight.
    Weighted,
    /// Draws proportional to visit counts of truncated random walks with
    /// restart probability `alpha`.
    ApproxPpr { alpha: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplerConfig {
    pub strategy: SamplingStrategy,
    /// Neighbors drawn per node, one entry per hop.
    pub fanout: Vec<usize>,
    pub with_replacement: bool,
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            strategy: SamplingStrategy::Uniform,
            fanout: vec![10, 5],
            with_replacement: false,
            seed: 0,
        }
    }
}

impl SamplerConfig {
    pub fn uniform(fanout: Vec<usize>, seed: u64) -> Self {
        Self {
            fanout,
            seed,
            ..Default::default()
        }
    }

    pub fn hops(&self) -> usize {
        self.fanout.len()
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            seed,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<(), GraphError> {
        if self.fanout.is_empty() {
            return Err(GraphError::ConfigMismatch("at least one hop is required".into()));
        }
        if self.fanout.contains(&0) {
            return Err(GraphError::ConfigMismatch("fanout entries must be positive".into()));
        }
        if let SamplingStrategy::ApproxPpr { alpha } = self.strategy {
            if !(alpha > 0.0 && alpha < 1.0) {
                return Err(GraphError::ConfigMismatch(format!(
                    "ppr alpha must lie in (0, 1), got {alpha}"
                )));
            }
        }
        Ok(())
    }
}

/// Anything that can list a node's neighbors and features.
pub trait NeighborSource {
    /// Appends the neighbors of `node` eligible at expansion `hop` (0-based).
    fn candidates(&self, node: NodeRef, hop: usize, out: &mut Vec<Neighbor>);

    fn features(&self, node: NodeRef) -> Option<FeatureVector>;
}

/// A graph restricted to a set of edge types per hop.
pub struct GraphNeighbors<'a> {
    pub graph: &'a HeteroGraph,
    pub edge_types_per_hop: &'a [EdgeTypeSet],
}

impl NeighborSource for GraphNeighbors<'_> {
    fn candidates(&self, node: NodeRef, hop: usize, out: &mut Vec<Neighbor>) {
        let Some(&allowed) = self.edge_types_per_hop.get(hop) else {
            return;
        };
        for (t, list) in self.graph.adjacency(node) {
            if allowed.contains(*t) {
                out.extend_from_slice(list);
            }
        }
    }

    fn features(&self, node: NodeRef) -> Option<FeatureVector> {
        self.graph.features(node).map(<[f32]>::to_vec)
    }
}

/// A graph view with the edges between given node pairs hidden in both
/// directions; training hides each supervised pair's own edge.
pub struct MaskedNeighbors<'a> {
    pub inner: GraphNeighbors<'a>,
    /// Hidden pairs; `(a, b)` hides `a -> b` and `b -> a`.
    pub hidden: &'a HashSet<(NodeRef, NodeRef)>,
}

impl NeighborSource for MaskedNeighbors<'_> {
    fn candidates(&self, node: NodeRef, hop: usize, out: &mut Vec<Neighbor>) {
        let start = out.len();
        self.inner.candidates(node, hop, out);
        if self.hidden.is_empty() {
            return;
        }
        let mut k = start;
        for i in start..out.len() {
            let n = out[i].node;
            if !self.hidden.contains(&(node, n)) && !self.hidden.contains(&(n, node)) {
                out[k] = out[i];
                k += 1;
            }
        }
        out.truncate(k);
    }

    fn features(&self, node: NodeRef) -> Option<FeatureVector> {
        self.inner.features(node)
    }
}

/// Result of sampling against a source that may lack some features.
#[derive(Debug, Clone, PartialEq)]
pub struct Sampled {
    pub compute_graph: ComputeGraph,
    /// Sampled neighbors dropped because the source had no features for them.
    pub dropped: usize,
}

/// Samples the layered neighborhood of `root` from a graph.
pub fn sample_neighborhood(
    graph: &HeteroGraph,
    root: NodeRef,
    config: &SamplerConfig,
    edge_types_per_hop: &[EdgeTypeSet],
) -> Result<ComputeGraph, GraphError> {
    if edge_types_per_hop.len() != config.hops() {
        return Err(GraphError::ConfigMismatch(format!(
            "{} edge-type sets given for {} hops",
            edge_types_per_hop.len(),
            config.hops()
        )));
    }
    let source = GraphNeighbors {
        graph,
        edge_types_per_hop,
    };
    Ok(sample_from(&source, root, config)?.compute_graph)
}

/// Samples the layered neighborhood of `root` from any source.
pub fn sample_from<S: NeighborSource + ?Sized>(
    source: &S,
    root: NodeRef,
    config: &SamplerConfig,
) -> Result<Sampled, GraphError> {
    config.validate()?;
    let root_features = source.features(root).ok_or(GraphError::MissingNode(root))?;
    let mut rng = rng_for(config.seed, node_salt(root));
    let mut cg = ComputeGraph::root_only(root, root_features, 0);
    let mut dropped = 0;
    let mut frontier = vec![root];
    let mut candidates = Vec::new();

    for (hop, &fanout) in config.fanout.iter().enumerate() {
        let mut layer = Vec::new();
        let mut next_frontier = Vec::new();
        for (parent, &node) in frontier.iter().enumerate() {
            candidates.clear();
            source.candidates(node, hop, &mut candidates);
            canonical_order(&mut candidates);
            let picked = select(source, node, hop, &candidates, fanout, config, &mut rng);
            for n in picked {
                match source.features(n.node) {
                    Some(features) => {
                        layer.push(CgNode {
                            node: n.node,
                            parent,
                            weight: n.weight,
                            features,
                        });
                        next_frontier.push(n.node);
                    }
                    None => dropped += 1,
                }
            }
        }
        cg.push_layer(layer)
            .expect("sampler emits layers grouped by parent");
        frontier = next_frontier;
    }
    Ok(Sampled {
        compute_graph: cg,
        dropped,
    })
}

fn canonical_order(c: &mut [Neighbor]) {
    c.sort_by(|a, b| a.node.cmp(&b.node).then(a.weight.total_cmp(&b.weight)));
}

fn select<S: NeighborSource + ?Sized>(
    source: &S,
    node: NodeRef,
    hop: usize,
    candidates: &[Neighbor],
    fanout: usize,
    config: &SamplerConfig,
    rng: &mut Rng,
) -> Vec<Neighbor> {
    if candidates.is_empty() {
        return Vec::new();
    }
    if !config.with_replacement && fanout >= candidates.len() {
        return candidates.to_vec();
    }
    let weights: Vec<f64> = match config.strategy {
        SamplingStrategy::Uniform => return draw_uniform(candidates, fanout, config.with_replacement, rng),
        SamplingStrategy::Weighted => candidates.iter().map(|n| n.weight).collect(),
        SamplingStrategy::ApproxPpr { alpha } => ppr_visits(source, node, hop, candidates, alpha, rng),
    };
    draw_weighted(candidates, &weights, fanout, config.with_replacement, rng)
}

fn draw_uniform(c: &[Neighbor], k: usize, with_replacement: bool, rng: &mut Rng) -> Vec<Neighbor> {
    if with_replacement {
        (0..k).map(|_| c[rng.gen_range(0..c.len())]).collect()
    } else {
        let mut idx = rand::seq::index::sample(rng, c.len(), k).into_vec();
        idx.sort_unstable();
        idx.into_iter().map(|i| c[i]).collect()
    }
}

/// Weighted draw; falls back to uniform when every weight is zero.
fn draw_weighted(
    c: &[Neighbor],
    weights: &[f64],
    k: usize,
    with_replacement: bool,
    rng: &mut Rng,
) -> Vec<Neighbor> {
    let positive = weights.iter().filter(|w| **w > 0.0).count();
    if positive == 0 {
        return draw_uniform(c, k, with_replacement, rng);
    }
    if with_replacement {
        let dist = WeightedIndex::new(weights).expect("weights are finite and not all zero");
        return (0..k).map(|_| c[dist.sample(rng)]).collect();
    }
    // Efraimidis-Spirakis: keep the k largest ln(u) / w keys.
    let mut keyed: Vec<(f64, usize)> = weights
        .iter()
        .enumerate()
        .filter(|(_, w)| **w > 0.0)
        .map(|(i, w)| {
            let u: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
            (u.ln() / w, i)
        })
        .collect();
    keyed.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut idx: Vec<usize> = keyed.into_iter().take(k).map(|(_, i)| i).collect();
    idx.sort_unstable();
    idx.into_iter().map(|i| c[i]).collect()
}

/// Visit counts of the direct neighbors over truncated walks with restart.
/// Walks may wander past the first hop; only visits to direct neighbors
/// count, so every sampled node stays a true neighbor.
fn ppr_visits<S: NeighborSource + ?Sized>(
    source: &S,
    start: NodeRef,
    hop: usize,
    direct: &[Neighbor],
    alpha: f64,
    rng: &mut Rng,
) -> Vec<f64> {
    let mut visits = vec![0.0; direct.len()];
    let mut step_candidates = Vec::new();
    for _ in 0..PPR_WALKS {
        let mut current = start;
        for _ in 0..PPR_WALK_LENGTH {
            if current != start && rng.gen_bool(alpha) {
                current = start;
                continue;
            }
            step_candidates.clear();
            if current == start {
                step_candidates.extend_from_slice(direct);
            } else {
                source.candidates(current, hop, &mut step_candidates);
                canonical_order(&mut step_candidates);
            }
            if step_candidates.is_empty() {
                current = start;
                continue;
            }
            let total: f64 = step_candidates.iter().map(|n| n.weight).sum();
            let next = if total > 0.0 {
                let mut r = rng.gen_range(0.0..total);
                let mut chosen = step_candidates[step_candidates.len() - 1].node;
                for n in &step_candidates {
                    if r < n.weight {
                        chosen = n.node;
                        break;
                    }
                    r -= n.weight;
                }
                chosen
            } else {
                step_candidates[rng.gen_range(0..step_candidates.len())].node
            };
            if let Ok(i) = direct.binary_search_by(|n| n.node.cmp(&next)) {
                visits[i] += 1.0;
            }
            current = next;
        }
    }
    visits
}
