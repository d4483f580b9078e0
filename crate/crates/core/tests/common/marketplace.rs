use std::collections::HashMap;

use linksage::gnn::{encode, EncoderConfig, EncoderParams};
use linksage::graph::{sample_neighborhood, HeteroGraph, NodeRef, NodeType};
use linksage::nearline::{
    run_pipeline, EmbeddingStore, FrozenEncoder, JoinConfig, NearlineStores, PipelineConfig, PipelineStats,
};
use linksage::synth::{write_events_to, SynthDataset};

pub fn encoder_for(graph: &HeteroGraph, layer_dims: Vec<usize>, seed: u64) -> EncoderParams<f32> {
    let cfg = EncoderConfig {
        feature_dim: graph.schema().max_dim(),
        layer_dims,
        ..Default::default()
    };
    EncoderParams::init(&cfg, seed)
}

pub fn event_log(ds: &SynthDataset) -> Vec<u8> {
    let mut buf = Vec::new();
    write_events_to(&mut buf, &ds.events).unwrap();
    buf
}

/// Largest neighbor list of any node in the graph, per neighbor type.
pub fn max_typed_degree(graph: &HeteroGraph) -> usize {
    let mut best = 0;
    for n in graph.nodes() {
        let mut per_type = [0usize; NodeType::COUNT];
        for (et, list) in graph.adjacency(n) {
            per_type[et.signature().1.index()] += list.len();
        }
        best = best.max(per_type.into_iter().max().unwrap_or(0));
    }
    best
}

pub struct Replay {
    pub store: EmbeddingStore<f32>,
    pub stats: PipelineStats,
    pub stores: NearlineStores,
}

pub fn replay(
    graph: &HeteroGraph,
    log: &[u8],
    params: &EncoderParams<f32>,
    join: &JoinConfig,
    workers: usize,
    capacity: usize,
) -> Replay {
    let stores = NearlineStores::new(*graph.schema(), capacity);
    let store = EmbeddingStore::new();
    let cfg = PipelineConfig {
        worker_count: workers,
        join: join.clone(),
        ..Default::default()
    };
    let enc = FrozenEncoder::new(params.clone()).unwrap();
    let stats = run_pipeline(log, &enc, &stores, &store, &cfg).unwrap();
    Replay { store, stats, stores }
}

/// Offline inference over the graph for every member and job.
pub fn batch_embeddings(
    graph: &HeteroGraph,
    params: &EncoderParams<f32>,
    join: &JoinConfig,
) -> HashMap<NodeRef, Vec<f32>> {
    let mut out = HashMap::new();
    for t in [NodeType::Member, NodeType::Job] {
        for n in graph.nodes_of(t) {
            let cg = sample_neighborhood(graph, n, &join.sampler, &join.edge_types_per_hop).unwrap();
            out.insert(n, encode(&cg, params).unwrap());
        }
    }
    out
}

/// Max-abs difference over the union of keys; a key on one side only is infinite.
pub fn max_abs_diff(a: &HashMap<NodeRef, Vec<f32>>, b: &HashMap<NodeRef, Vec<f32>>) -> f64 {
    let mut worst: f64 = 0.0;
    for (k, va) in a {
        match b.get(k) {
            Some(vb) if vb.len() == va.len() => {
                for (x, y) in va.iter().zip(vb) {
                    worst = worst.max((*x as f64 - *y as f64).abs());
                }
            }
            _ => return f64::INFINITY,
        }
    }
    if b.keys().any(|k| !a.contains_key(k)) {
        return f64::INFINITY;
    }
    worst
}
