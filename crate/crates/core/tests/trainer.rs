use linksage::gnn::EncoderConfig;
use linksage::graph::{GraphSchema, HeteroGraph, NodeRef, Relation, SamplerConfig};
use linksage::metrics;
use linksage::train::{
    embed_nodes, evaluate_recall, train, DecoderKind, EvalConfig, LabeledPair, Optimizer, TrainConfig, TrainError,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Two member clusters and two job clusters; each cluster shares a skill
/// and its features point along its own axis. Positives pair matching
/// clusters, negatives cross them.
fn two_clusters(seed: u64) -> (HeteroGraph, Vec<LabeledPair>) {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let mut g = HeteroGraph::new(GraphSchema::uniform(4));
    let side = |c: u64, r: &mut ChaCha8Rng| {
        let mut v: Vec<f32> = (0..4).map(|_| r.gen_range(-0.3f32..0.3)).collect();
        v[c as usize] += 1.0;
        v
    };
    for c in 0..2u64 {
        g.add_node(NodeRef::skill(c), side(c, &mut r)).unwrap();
    }
    for i in 0..40u64 {
        g.add_node(NodeRef::member(i), side(i % 2, &mut r)).unwrap();
        g.add_edge(Relation::MemberSkill.into(), NodeRef::member(i), NodeRef::skill(i % 2), 1.0, true)
            .unwrap();
    }
    for j in 0..20u64 {
        g.add_node(NodeRef::job(j), side(j % 2, &mut r)).unwrap();
        g.add_edge(Relation::JobSkill.into(), NodeRef::job(j), NodeRef::skill(j % 2), 1.0, true)
            .unwrap();
    }
    let mut pairs = Vec::new();
    for i in 0..40u64 {
        for k in 0..3u64 {
            let same = 2 * ((i + k) % 10) + i % 2;
            let other = 2 * ((i + k + 5) % 10) + 1 - i % 2;
            pairs.push(LabeledPair::new(i, same, 1, 10));
            pairs.push(LabeledPair::new(i, other, 0, 10));
        }
    }
    (g, pairs)
}

fn config() -> TrainConfig {
    TrainConfig {
        decoder_kind: DecoderKind::Dot,
        batch_size: 16,
        epochs: 30,
        learning_rate: 0.02,
        negatives_per_positive: 0,
        sampler: SamplerConfig::uniform(vec![4, 2], 0),
        encoder: EncoderConfig {
            feature_dim: 4,
            layer_dims: vec![8, 8],
            ..Default::default()
        },
        graph_snapshot_cutoff: 100,
        ..Default::default()
    }
}

#[test]
fn separable_task_is_learned() {
    let (g, pairs) = two_clusters(1);
    let cfg = config();
    let out = train(&g, &pairs, &cfg).unwrap();
    let loss = out.report.final_loss().unwrap();
    assert!(loss < 0.2, "final loss {loss}");
    let emb = embed_nodes(&out.model, &g, &g.nodes(), &cfg.sampler, &cfg).unwrap();
    let scores: Vec<f64> = pairs
        .iter()
        .map(|p| {
            let s = out.model.decoder().decode(&[emb[&p.member].clone()], &[emb[&p.job].clone()]).unwrap();
            s.get(0, 0)
        })
        .collect();
    let labels: Vec<bool> = pairs.iter().map(|p| p.is_positive()).collect();
    let auc = metrics::auc(&scores, &labels).unwrap();
    assert!(auc > 0.95, "training AUC {auc}");
}

#[test]
fn zero_learning_rate_changes_nothing() {
    let (g, pairs) = two_clusters(2);
    let cfg = TrainConfig {
        learning_rate: 0.0,
        epochs: 3,
        ..config()
    };
    let out = train(&g, &pairs, &cfg).unwrap();
    let init = train(&g, &pairs, &TrainConfig { epochs: 0, ..cfg.clone() }).unwrap();
    assert_eq!(out.model.tensors(), init.model.tensors());
    let losses: Vec<f64> = out.report.epochs.iter().map(|e| e.mean_loss).collect();
    assert_eq!(losses.len(), 3);
    // Sampling is re-seeded per epoch, so the loss moves only with the sample.
    let (g1, _) = two_clusters(2);
    let full = TrainConfig {
        sampler: SamplerConfig::uniform(vec![100, 100], 0),
        ..cfg
    };
    let flat = train(&g1, &pairs, &full).unwrap();
    let l: Vec<f64> = flat.report.epochs.iter().map(|e| e.mean_loss).collect();
    assert!(l.windows(2).all(|w| (w[0] - w[1]).abs() < 1e-12), "{l:?}");
}

#[test]
fn same_seed_same_trajectory() {
    let (g, pairs) = two_clusters(3);
    let cfg = TrainConfig { epochs: 4, ..config() };
    let a = train(&g, &pairs, &cfg).unwrap();
    let b = train(&g, &pairs, &cfg).unwrap();
    let bits = |o: &linksage::train::TrainOutcome| -> Vec<u64> {
        o.report.epochs.iter().map(|e| e.mean_loss.to_bits()).collect()
    };
    assert_eq!(bits(&a), bits(&b));
    assert_eq!(a.model.tensors(), b.model.tensors());
    for kind in [DecoderKind::InBatch, DecoderKind::Mlp, DecoderKind::Cosine] {
        let c = TrainConfig {
            decoder_kind: kind,
            negatives_per_positive: 2,
            ..cfg.clone()
        };
        assert_eq!(bits(&train(&g, &pairs, &c).unwrap()), bits(&train(&g, &pairs, &c).unwrap()));
    }
}

#[test]
fn pairs_after_the_cutoff_never_train() {
    let (g, mut pairs) = two_clusters(4);
    let late: Vec<LabeledPair> = pairs.iter().map(|p| LabeledPair { timestamp: 500, ..*p }).collect();
    pairs.extend(late.iter().copied());
    let cfg = TrainConfig { epochs: 2, ..config() };
    let out = train(&g, &pairs, &cfg).unwrap();
    assert_eq!(out.report.post_cutoff_pairs_used, 0);
    assert_eq!(out.report.ranking_pairs, late.len());
    assert_eq!(out.report.gnn_pairs, pairs.len() - late.len());
    let only_early = train(&g, &pairs[..late.len()], &cfg).unwrap();
    assert_eq!(out.model.tensors(), only_early.model.tensors());
    assert!(matches!(
        train(&g, &late, &cfg),
        Err(TrainError::EmptyDataset)
    ));
}

#[test]
fn exploding_updates_are_reported() {
    let (g, pairs) = two_clusters(5);
    let cfg = TrainConfig {
        optimizer: Optimizer::Sgd,
        learning_rate: 1e150,
        epochs: 5,
        ..config()
    };
    assert!(matches!(train(&g, &pairs, &cfg), Err(TrainError::DivergenceDetected { .. })));
}

#[test]
fn untrained_model_ranks_like_chance_with_mlp_decoder() {
    let ds = linksage::synth::generate(&linksage::synth::SynthConfig::small(3000, 0)).unwrap();
    let cfg = TrainConfig {
        decoder_kind: DecoderKind::Mlp,
        graph_snapshot_cutoff: ds.cutoff,
        ..Default::default()
    };
    let out = train(&ds.graph, &ds.labels, &TrainConfig { epochs: 0, ..cfg.clone() }).unwrap();
    let (known, eval): (Vec<_>, Vec<_>) = ds.labels.iter().partition(|p| p.timestamp <= ds.cutoff);
    let m = evaluate_recall(&out.model, &ds.graph, &eval, &known, &cfg, &EvalConfig::default()).unwrap();
    assert!(m.queries >= 500);
    assert!((m.recall_at_k - 0.10).abs() <= 0.03, "{m:?}");
}
