//! Supervised link-prediction training: leakage partition, batch
//! construction, the optimizer loop and retrieval-style evaluation.

mod batches;
mod eval;
mod io;
mod optim;
mod report;
mod trainer;

pub use batches::{build_batches, plan_epoch, BatchStream, EpochPlan, PlannedBatch};
pub use eval::{embed_nodes, evaluate_recall, evaluate_with_embeddings, negative_pool, EvalConfig, EvalMetrics};
pub use io::{read_labels, read_labels_from, write_labels, write_labels_to};
pub use optim::{Optimizer, OptimizerState};
pub use report::{EpochStats, TrainReport};
pub use trainer::{train, train_model, TrainOutcome};

use crate::gnn::{Decoder, EncoderConfig, GnnError, Mlp};
use crate::graph::{EdgeTypeSet, GraphError, NodeRef, NodeType, SamplerConfig};
use crate::scalar::Scalar;

/// One supervised `(member, job, label)` tuple with its event time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LabeledPair {
    pub member: NodeRef,
    pub job: NodeRef,
    pub label: u8,
    /// Epoch milliseconds.
    pub timestamp: i64,
}

impl LabeledPair {
    pub fn new(member_id: u64, job_id: u64, label: u8, timestamp: i64) -> Self {
        Self {
            member: NodeRef::member(member_id),
            job: NodeRef::job(job_id),
            label,
            timestamp,
        }
    }

    pub fn is_positive(&self) -> bool {
        self.label == 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DecoderKind {
    Dot,
    Cosine,
    Mlp,
    /// Dot-product scores against every job of the batch, identity labels.
    InBatch,
}

impl DecoderKind {
    pub fn name(self) -> &'static str {
        match self {
            DecoderKind::Dot => "dot",
            DecoderKind::Cosine => "cosine",
            DecoderKind::Mlp => "mlp",
            DecoderKind::InBatch => "in-batch",
        }
    }

    pub fn build<T: Scalar>(self, embedding_dim: usize, hidden: &[usize], seed: u64) -> Decoder<T> {
        match self {
            DecoderKind::Dot | DecoderKind::InBatch => Decoder::Dot,
            DecoderKind::Cosine => Decoder::Cosine,
            DecoderKind::Mlp => Decoder::Mlp(Mlp::init(2 * embedding_dim, hidden, seed)),
        }
    }
}

impl std::str::FromStr for DecoderKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "dot" => Ok(DecoderKind::Dot),
            "cosine" => Ok(DecoderKind::Cosine),
            "mlp" => Ok(DecoderKind::Mlp),
            "in-batch" | "inbatch" => Ok(DecoderKind::InBatch),
            other => Err(format!("unknown decoder `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub decoder_kind: DecoderKind,
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub optimizer: Optimizer,
    pub sampler: SamplerConfig,
    /// Edge types followed at each hop; one entry per sampler hop.
    pub edge_types_per_hop: Vec<EdgeTypeSet>,
    pub encoder: EncoderConfig,
    /// Hidden widths of the MLP decoder.
    pub mlp_hidden: Vec<usize>,
    /// Random negatives per positive for the pairwise decoders.
    pub negatives_per_positive: usize,
    /// Pairs at or before this time train the encoder.
    pub graph_snapshot_cutoff: i64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            decoder_kind: DecoderKind::InBatch,
            batch_size: 64,
            epochs: 5,
            learning_rate: 1e-3,
            optimizer: Optimizer::adam(),
            sampler: SamplerConfig::default(),
            edge_types_per_hop: vec![EdgeTypeSet::all(); 2],
            encoder: EncoderConfig::default(),
            mlp_hidden: vec![32],
            negatives_per_positive: 4,
            graph_snapshot_cutoff: i64::MAX,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        self.sampler.validate()?;
        if self.edge_types_per_hop.len() != self.sampler.hops() {
            return Err(TrainError::InvalidConfig(format!(
                "{} edge-type sets for {} sampler hops",
                self.edge_types_per_hop.len(),
                self.sampler.hops()
            )));
        }
        if self.encoder.layer_dims.len() != self.sampler.hops() {
            return Err(TrainError::InvalidConfig(format!(
                "encoder has {} layers but the sampler expands {} hops",
                self.encoder.layer_dims.len(),
                self.sampler.hops()
            )));
        }
        if self.batch_size == 0 {
            return Err(TrainError::InvalidConfig("batch_size must be positive".into()));
        }
        if self.decoder_kind == DecoderKind::InBatch && self.batch_size < 2 {
            return Err(TrainError::InvalidConfig(
                "in-batch decoding needs batch_size >= 2".into(),
            ));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(TrainError::InvalidConfig("learning_rate must be finite and >= 0".into()));
        }
        self.optimizer.validate()?;
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error("no usable training pairs")]
    EmptyDataset,
    #[error("no usable evaluation pairs")]
    EmptyEvalSet,
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    #[error("loss diverged at epoch {epoch}, batch {batch}")]
    DivergenceDetected { epoch: usize, batch: usize },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Gnn(#[from] GnnError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Pairs split by the snapshot cutoff.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LeakagePartition {
    /// `timestamp <= cutoff`: may train the encoder.
    pub gnn: Vec<LabeledPair>,
    /// `timestamp > cutoff`: reserved for the downstream ranker.
    pub ranking: Vec<LabeledPair>,
}

/// Splits pairs at the cutoff; a pair exactly at the cutoff goes to the
/// encoder side.
pub fn check_no_leakage(pairs: &[LabeledPair], graph_snapshot_cutoff: i64) -> LeakagePartition {
    let (gnn, ranking): (Vec<_>, Vec<_>) = pairs.iter().partition(|p| p.timestamp <= graph_snapshot_cutoff);
    if ranking.is_empty() {
        tracing::warn!(
            cutoff = graph_snapshot_cutoff,
            "every pair predates the cutoff; the ranking set is empty"
        );
    }
    tracing::info!(gnn = gnn.len(), ranking = ranking.len(), "leakage partition");
    LeakagePartition { gnn, ranking }
}

pub(crate) fn check_pair_types(p: &LabeledPair) -> bool {
    p.member.node_type == NodeType::Member && p.job.node_type == NodeType::Job && p.label <= 1
}
