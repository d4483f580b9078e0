//! Downstream job matching: a small feed-forward ranker over frozen member
//! and job embeddings plus auxiliary features, trained on labels that
//! postdate the encoder's graph snapshot.

mod examples;
mod ranker;
mod segments;

pub use examples::{read_examples, read_examples_from, write_examples, write_examples_to};
pub use ranker::{
    score_and_rank, train_ranker, InputAssembler, Ranker, RankerConfig, RankerReport, RankerShape,
};
pub use segments::{engagement_segments, evaluate_segments, SegmentReport, SegmentRow, COLD_START, ENGAGED, OVERALL};

use crate::gnn::{CheckpointError, GnnError};
use crate::graph::{FeatureVector, NodeRef};

/// Names of the auxiliary features the synthetic marketplace emits, in order.
pub const AUX_FEATURES: [&str; 4] = ["profile_completeness", "activity_recency", "title_match", "skill_overlap"];

/// One labeled (member, job) pair with its auxiliary features.
#[derive(Debug, Clone, PartialEq)]
pub struct RankingExample {
    pub member: NodeRef,
    pub job: NodeRef,
    pub aux: FeatureVector,
    pub label: u8,
    /// Epoch milliseconds; must be after the encoder's graph snapshot.
    pub timestamp: i64,
}

impl RankingExample {
    pub fn new(member_id: u64, job_id: u64, aux: FeatureVector, label: u8, timestamp: i64) -> Self {
        Self {
            member: NodeRef::member(member_id),
            job: NodeRef::job(job_id),
            aux,
            label,
            timestamp,
        }
    }

    pub fn is_positive(&self) -> bool {
        self.label == 1
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RankingError {
    #[error("{count} example(s) at or before the graph snapshot cutoff {cutoff}: {listed}")]
    TemporalLeakage {
        cutoff: i64,
        count: usize,
        /// The first few offenders as `member job timestamp`.
        listed: String,
    },
    #[error("no ranking examples")]
    EmptyDataset,
    #[error("invalid example: {0}")]
    InvalidExample(String),
    #[error("invalid ranker configuration: {0}")]
    InvalidConfig(String),
    #[error("ranker loss diverged at epoch {0}")]
    DivergenceDetected(usize),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error(transparent)]
    Gnn(#[from] GnnError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
