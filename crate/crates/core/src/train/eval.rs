use std::collections::{HashMap, HashSet};

use super::batches::sample_all;
use super::{LabeledPair, TrainConfig, TrainError};
use crate::gnn::{Decoder, Model};
use crate::graph::{HeteroGraph, NodeRef, NodeType, SamplerConfig};
use crate::metrics;
use crate::rng;
use crate::scalar::Scalar;

const POOL_SALT: u64 = 0x504f_4f4c;
/// Nodes embedded per parallel chunk; bounds compute-graph memory.
const EMBED_CHUNK: usize = 2048;

#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub k: usize,
    pub pool_size: usize,
    pub seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            k: 10,
            pool_size: 100,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalMetrics {
    pub queries: usize,
    pub k: usize,
    pub recall_at_k: f64,
    /// Mean over queries of the fraction of pool negatives ranked below
    /// the positive.
    pub auc: f64,
}

/// A fixed, seeded pool of candidate negative jobs.
pub fn negative_pool(graph: &HeteroGraph, pool_size: usize, seed: u64) -> Vec<NodeRef> {
    let jobs = graph.nodes_of(NodeType::Job);
    let n = pool_size.min(jobs.len());
    let mut r = rng::rng_for(seed, POOL_SALT);
    let mut idx = rand::seq::index::sample(&mut r, jobs.len(), n).into_vec();
    idx.sort_unstable();
    idx.into_iter().map(|i| jobs[i]).collect()
}

/// Embeds `nodes` with inference-time sampling (the sampler's own seed).
pub fn embed_nodes<T: Scalar>(
    model: &Model<T>,
    graph: &HeteroGraph,
    nodes: &[NodeRef],
    sampler: &SamplerConfig,
    config: &TrainConfig,
) -> Result<HashMap<NodeRef, Vec<T>>, TrainError> {
    let mut out = HashMap::with_capacity(nodes.len());
    for chunk in nodes.chunks(EMBED_CHUNK) {
        let cgs = sample_all(graph, chunk, sampler, config)?;
        let emb = model.embed(&cgs)?;
        out.extend(chunk.iter().copied().zip(emb));
    }
    Ok(out)
}

/// Ranks each evaluation positive against the pool. Pool jobs that are known
/// positives of the member (from `known` or the evaluation set) are left out
/// of that member's negatives.
pub fn evaluate_with_embeddings<T: Scalar>(
    decoder: &Decoder<T>,
    embeddings: &HashMap<NodeRef, Vec<T>>,
    eval_pairs: &[LabeledPair],
    known: &[LabeledPair],
    pool: &[NodeRef],
    k: usize,
) -> Result<EvalMetrics, TrainError> {
    let mut positives: HashMap<NodeRef, HashSet<NodeRef>> = HashMap::new();
    for p in known.iter().chain(eval_pairs).filter(|p| p.is_positive()) {
        positives.entry(p.member).or_default().insert(p.job);
    }
    let mut ranks = Vec::new();
    let mut aucs = Vec::new();
    let mut cols: Vec<Vec<T>> = Vec::with_capacity(pool.len() + 1);
    for p in eval_pairs.iter().filter(|p| p.is_positive()) {
        let (Some(m), Some(j)) = (embeddings.get(&p.member), embeddings.get(&p.job)) else {
            continue;
        };
        let own = &positives[&p.member];
        cols.clear();
        cols.push(j.clone());
        for n in pool {
            if !own.contains(n) {
                if let Some(e) = embeddings.get(n) {
                    cols.push(e.clone());
                }
            }
        }
        let scores = decoder.decode(std::slice::from_ref(m), &cols)?;
        let row = scores.row(0);
        ranks.push(metrics::rank_against(row[0], &row[1..]));
        aucs.push(metrics::pairwise_auc(row[0], &row[1..]));
    }
    let recall_at_k = metrics::recall_at_k(&ranks, k).ok_or(TrainError::EmptyEvalSet)?;
    Ok(EvalMetrics {
        queries: ranks.len(),
        k,
        recall_at_k,
        auc: aucs.iter().sum::<f64>() / aucs.len() as f64,
    })
}

/// recall@k and AUC of held-out positives against a pool of sampled
/// negatives.
pub fn evaluate_recall<T: Scalar>(
    model: &Model<T>,
    graph: &HeteroGraph,
    eval_pairs: &[LabeledPair],
    known: &[LabeledPair],
    train_config: &TrainConfig,
    eval: &EvalConfig,
) -> Result<EvalMetrics, TrainError> {
    let pool = negative_pool(graph, eval.pool_size, eval.seed);
    let mut nodes: Vec<NodeRef> = pool.clone();
    for p in eval_pairs.iter().filter(|p| p.is_positive()) {
        if graph.contains(p.member) && graph.contains(p.job) {
            nodes.push(p.member);
            nodes.push(p.job);
        }
    }
    nodes.sort_unstable();
    nodes.dedup();
    if nodes.len() == pool.len() {
        return Err(TrainError::EmptyEvalSet);
    }
    let emb = embed_nodes(model, graph, &nodes, &train_config.sampler, train_config)?;
    evaluate_with_embeddings(model.decoder(), &emb, eval_pairs, known, &pool, eval.k)
}
