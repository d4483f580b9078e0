use std::collections::{HashMap, HashSet, VecDeque};

use rand::seq::SliceRandom;
use rand::Rng as _;
use rayon::prelude::*;

use super::{check_pair_types, DecoderKind, LabeledPair, TrainConfig, TrainError};
use crate::gnn::{make_in_batch_labels, Batch, ComputeGraph, LabelMatrix};
use crate::graph::{
    sample_from, sample_neighborhood, GraphNeighbors, HeteroGraph, MaskedNeighbors, NodeRef, NodeType, SamplerConfig,
};
use crate::rng;

const SHUFFLE_SALT: u64 = 0x5348_5546;
const NEGATIVE_SALT: u64 = 0x4e45_4741;
const NEGATIVE_RETRIES: usize = 10;

/// Node lists and labels of one batch, before neighborhoods are sampled.
#[derive(Debug, Clone, PartialEq)]
pub struct PlannedBatch {
    pub members: Vec<NodeRef>,
    pub jobs: Vec<NodeRef>,
    pub labels: LabelMatrix,
    pub mask: Option<Vec<bool>>,
    /// Labeled pairs (not random negatives) in the batch and their latest time.
    pub labeled: usize,
    pub latest_timestamp: i64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EpochPlan {
    pub batches: Vec<PlannedBatch>,
    /// Pairs whose member or job is missing from the graph.
    pub skipped: usize,
    /// In-batch leftovers that could not form a batch of two.
    pub dropped: usize,
}

/// Sampler used for training neighborhoods in `epoch`.
pub(crate) fn epoch_sampler(config: &TrainConfig, epoch: usize) -> SamplerConfig {
    config.sampler.with_seed(rng::mix(config.sampler.seed, epoch as u64 + 1))
}

/// Decides batch composition for one epoch. Deterministic in
/// `(pairs, graph, config.seed, epoch)`.
pub fn plan_epoch(
    pairs: &[LabeledPair],
    graph: &HeteroGraph,
    config: &TrainConfig,
    epoch: usize,
) -> Result<EpochPlan, TrainError> {
    let usable: Vec<LabeledPair> = pairs
        .iter()
        .filter(|p| check_pair_types(p) && graph.contains(p.member) && graph.contains(p.job))
        .copied()
        .collect();
    let skipped = pairs.len() - usable.len();
    if skipped > 0 {
        tracing::debug!(skipped, "pairs reference nodes missing from the graph");
    }
    let mut r = rng::rng_for(config.seed, rng::mix(SHUFFLE_SALT, epoch as u64));
    let mut plan = match config.decoder_kind {
        DecoderKind::InBatch => {
            let mut pos: Vec<LabeledPair> = usable.into_iter().filter(LabeledPair::is_positive).collect();
            pos.shuffle(&mut r);
            plan_in_batch(pos, config.batch_size)
        }
        _ => {
            let mut all = usable;
            all.shuffle(&mut r);
            plan_pairwise(&all, graph, config, epoch)
        }
    };
    if plan.batches.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    plan.skipped = skipped;
    Ok(plan)
}

/// Greedy chunking that keeps members and jobs distinct inside a batch,
/// deferring conflicting pairs to the next batch, so identity labels are
/// never contradicted by a duplicated column.
fn plan_in_batch(pairs: Vec<LabeledPair>, batch_size: usize) -> EpochPlan {
    let mut queue: VecDeque<LabeledPair> = pairs.into();
    let mut plan = EpochPlan::default();
    while !queue.is_empty() {
        let mut chunk = Vec::with_capacity(batch_size);
        let mut deferred = Vec::new();
        let mut members = HashSet::new();
        let mut jobs = HashSet::new();
        while chunk.len() < batch_size {
            let Some(p) = queue.pop_front() else { break };
            if members.contains(&p.member) || jobs.contains(&p.job) {
                deferred.push(p);
            } else {
                members.insert(p.member);
                jobs.insert(p.job);
                chunk.push(p);
            }
        }
        for p in deferred.into_iter().rev() {
            queue.push_front(p);
        }
        if chunk.len() < 2 {
            plan.dropped += chunk.len();
            if queue.is_empty() || chunk.is_empty() {
                break;
            }
            continue;
        }
        plan.batches.push(PlannedBatch {
            members: chunk.iter().map(|p| p.member).collect(),
            jobs: chunk.iter().map(|p| p.job).collect(),
            labels: make_in_batch_labels(chunk.len()),
            mask: None,
            labeled: chunk.len(),
            latest_timestamp: chunk.iter().map(|p| p.timestamp).max().unwrap_or(i64::MIN),
        });
    }
    plan
}

fn plan_pairwise(pairs: &[LabeledPair], graph: &HeteroGraph, config: &TrainConfig, epoch: usize) -> EpochPlan {
    let job_pool = graph.nodes_of(NodeType::Job);
    let mut positives: HashMap<NodeRef, HashSet<NodeRef>> = HashMap::new();
    for p in pairs.iter().filter(|p| p.is_positive()) {
        positives.entry(p.member).or_default().insert(p.job);
    }
    let mut r = rng::rng_for(config.seed, rng::mix(NEGATIVE_SALT, epoch as u64));
    let mut plan = EpochPlan::default();
    for chunk in pairs.chunks(config.batch_size) {
        let mut entries: Vec<(NodeRef, NodeRef, bool)> = Vec::new();
        let mut seen = HashSet::new();
        for p in chunk {
            if seen.insert((p.member, p.job)) {
                entries.push((p.member, p.job, p.is_positive()));
            }
        }
        for p in chunk.iter().filter(|p| p.is_positive()) {
            for _ in 0..config.negatives_per_positive {
                for _ in 0..NEGATIVE_RETRIES {
                    let j = job_pool[r.gen_range(0..job_pool.len())];
                    let known = positives.get(&p.member).is_some_and(|s| s.contains(&j));
                    if !known && seen.insert((p.member, j)) {
                        entries.push((p.member, j, false));
                        break;
                    }
                }
            }
        }
        let mut members = Vec::new();
        let mut jobs = Vec::new();
        let mut row = HashMap::new();
        let mut col = HashMap::new();
        for &(m, j, _) in &entries {
            row.entry(m).or_insert_with(|| {
                members.push(m);
                members.len() - 1
            });
            col.entry(j).or_insert_with(|| {
                jobs.push(j);
                jobs.len() - 1
            });
        }
        let mut labels = LabelMatrix::zeros(members.len(), jobs.len());
        let mut mask = vec![false; members.len() * jobs.len()];
        for &(m, j, y) in &entries {
            let (i, k) = (row[&m], col[&j]);
            labels.set(i, k, y);
            mask[i * jobs.len() + k] = true;
        }
        plan.batches.push(PlannedBatch {
            members,
            jobs,
            labels,
            mask: Some(mask),
            labeled: chunk.len(),
            latest_timestamp: chunk.iter().map(|p| p.timestamp).max().unwrap_or(i64::MIN),
        });
    }
    plan
}

/// Samples neighborhoods for a list of query nodes, in parallel, in order.
pub(crate) fn sample_all(
    graph: &HeteroGraph,
    nodes: &[NodeRef],
    sampler: &SamplerConfig,
    config: &TrainConfig,
) -> Result<Vec<ComputeGraph>, TrainError> {
    nodes
        .par_iter()
        .map(|&n| Ok(sample_neighborhood(graph, n, sampler, &config.edge_types_per_hop)?))
        .collect()
}

/// Positive pairs of a batch, whose own edges are hidden while sampling so
/// the encoder cannot read a label off the graph.
pub(crate) fn supervised_pairs(planned: &PlannedBatch) -> HashSet<(NodeRef, NodeRef)> {
    let mut out = HashSet::new();
    for (i, &m) in planned.members.iter().enumerate() {
        for (k, &j) in planned.jobs.iter().enumerate() {
            if planned.labels.get(i, k) == 1 {
                out.insert((m, j));
            }
        }
    }
    out
}

fn sample_masked(
    graph: &HeteroGraph,
    nodes: &[NodeRef],
    sampler: &SamplerConfig,
    config: &TrainConfig,
    hidden: &HashSet<(NodeRef, NodeRef)>,
) -> Result<Vec<ComputeGraph>, TrainError> {
    let source = MaskedNeighbors {
        inner: GraphNeighbors {
            graph,
            edge_types_per_hop: &config.edge_types_per_hop,
        },
        hidden,
    };
    nodes
        .par_iter()
        .map(|&n| Ok(sample_from(&source, n, sampler)?.compute_graph))
        .collect()
}

/// Lazily materialized batches of one epoch.
pub struct BatchStream<'a> {
    graph: &'a HeteroGraph,
    config: &'a TrainConfig,
    sampler: SamplerConfig,
    plan: std::vec::IntoIter<PlannedBatch>,
    pub skipped: usize,
    pub dropped: usize,
    pub len: usize,
}

impl Iterator for BatchStream<'_> {
    type Item = Result<(PlannedBatch, Batch), TrainError>;

    fn next(&mut self) -> Option<Self::Item> {
        let planned = self.plan.next()?;
        Some(self.materialize(planned))
    }
}

impl BatchStream<'_> {
    fn materialize(&self, planned: PlannedBatch) -> Result<(PlannedBatch, Batch), TrainError> {
        let hidden = supervised_pairs(&planned);
        let members = sample_masked(self.graph, &planned.members, &self.sampler, self.config, &hidden)?;
        let jobs = sample_masked(self.graph, &planned.jobs, &self.sampler, self.config, &hidden)?;
        let mut batch = Batch::new(members, jobs, planned.labels.clone())?;
        if let Some(mask) = &planned.mask {
            batch = batch.with_mask(mask.clone())?;
        }
        Ok((planned, batch))
    }
}

/// Plans an epoch and returns its batches as a stream.
pub fn build_batches<'a>(
    pairs: &[LabeledPair],
    graph: &'a HeteroGraph,
    config: &'a TrainConfig,
    epoch: usize,
) -> Result<BatchStream<'a>, TrainError> {
    config.validate()?;
    let plan = plan_epoch(pairs, graph, config, epoch)?;
    Ok(BatchStream {
        graph,
        config,
        sampler: epoch_sampler(config, epoch),
        len: plan.batches.len(),
        skipped: plan.skipped,
        dropped: plan.dropped,
        plan: plan.batches.into_iter(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{GraphSchema, Relation};

    fn graph() -> HeteroGraph {
        let mut g = HeteroGraph::new(GraphSchema::uniform(2));
        for i in 0..6 {
            g.add_node(NodeRef::member(i), vec![i as f32, 1.0]).unwrap();
            g.add_node(NodeRef::job(i), vec![1.0, i as f32]).unwrap();
        }
        g.add_node(NodeRef::skill(0), vec![0.5, 0.5]).unwrap();
        for i in 0..6 {
            g.add_edge(Relation::MemberSkill.into(), NodeRef::member(i), NodeRef::skill(0), 1.0, true)
                .unwrap();
            g.add_edge(Relation::JobSkill.into(), NodeRef::job(i), NodeRef::skill(0), 1.0, true)
                .unwrap();
        }
        g
    }

    fn config(kind: DecoderKind) -> TrainConfig {
        TrainConfig {
            decoder_kind: kind,
            batch_size: 2,
            sampler: SamplerConfig::uniform(vec![2, 2], 1),
            encoder: crate::gnn::EncoderConfig {
                feature_dim: 2,
                layer_dims: vec![4, 4],
                ..Default::default()
            },
            ..Default::default()
        }
    }

    #[test]
    fn in_batch_identity_and_count() {
        let g = graph();
        let pairs: Vec<_> = (0..4).map(|i| LabeledPair::new(i, i, 1, 0)).collect();
        let cfg = config(DecoderKind::InBatch);
        let s = build_batches(&pairs, &g, &cfg, 0).unwrap();
        assert_eq!(s.len, 2);
        for b in s {
            let (_, b) = b.unwrap();
            assert_eq!(b.labels, make_in_batch_labels(2));
        }
    }

    #[test]
    fn missing_nodes_are_skipped() {
        let g = graph();
        let pairs = vec![LabeledPair::new(0, 0, 1, 0), LabeledPair::new(1, 1, 1, 0), LabeledPair::new(2, 99, 1, 0)];
        let cfg = config(DecoderKind::InBatch);
        let s = build_batches(&pairs, &g, &cfg, 0).unwrap();
        assert_eq!(s.skipped, 1);
        assert_eq!(s.len, 1);
    }

    #[test]
    fn empty_dataset() {
        let g = graph();
        assert!(matches!(
            build_batches(&[], &g, &config(DecoderKind::Dot), 0),
            Err(TrainError::EmptyDataset)
        ));
    }

    #[test]
    fn in_batch_never_repeats_a_job() {
        let pairs: Vec<_> = (0..30).map(|i| LabeledPair::new(i, i % 3, 1, 0)).collect();
        let plan = plan_in_batch(pairs, 4);
        for b in &plan.batches {
            let set: HashSet<_> = b.jobs.iter().collect();
            assert_eq!(set.len(), b.jobs.len());
            assert!(b.jobs.len() <= 3);
        }
        let used: usize = plan.batches.iter().map(|b| b.labeled).sum();
        assert_eq!(used + plan.dropped, 30);
    }

    #[test]
    fn pairwise_mask_covers_positives_and_negatives() {
        let g = graph();
        let pairs = vec![LabeledPair::new(0, 0, 1, 0), LabeledPair::new(1, 1, 0, 0)];
        let cfg = config(DecoderKind::Dot);
        let plan = plan_epoch(&pairs, &g, &cfg, 0).unwrap();
        let b = &plan.batches[0];
        let observed = b.mask.as_ref().unwrap().iter().filter(|x| **x).count();
        assert_eq!(observed, 2 + 4);
        let positives = b.labels.as_slice().iter().filter(|y| **y == 1).count();
        assert_eq!(positives, 1);
    }

    #[test]
    fn same_seed_same_batches() {
        let g = graph();
        let pairs: Vec<_> = (0..6).map(|i| LabeledPair::new(i, (i + 1) % 6, 1, 0)).collect();
        let cfg = config(DecoderKind::Dot);
        let a: Vec<_> = build_batches(&pairs, &g, &cfg, 3).unwrap().map(|b| b.unwrap().1).collect();
        let b: Vec<_> = build_batches(&pairs, &g, &cfg, 3).unwrap().map(|b| b.unwrap().1).collect();
        assert_eq!(a, b);
        let c: Vec<_> = build_batches(&pairs, &g, &cfg, 4).unwrap().map(|b| b.unwrap().1).collect();
        assert_ne!(a, c);
    }
}
