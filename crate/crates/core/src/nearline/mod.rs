//! Nearline incremental inference: an append-only event log feeds
//! per-node-type neighbor stores and a feature store; dirty nodes are
//! joined into compute graphs, encoded with frozen parameters and published
//! to a versioned embedding store.

mod embedding;
mod event;
mod pipeline;
mod stores;

pub use embedding::{EmbeddingRecord, EmbeddingStore};
pub use event::{Action, AttributeRef, EventBody, MarketplaceEvent};
pub use pipeline::{
    embedding_map, infer_and_publish, run_pipeline, sequential_join, DeadLetter, FrozenEncoder, InferOutcome,
    JoinConfig, Joined, LatencyHistogram, PipelineConfig, PipelineStats,
};
pub use stores::{
    ingest, FeatureRecord, NearlineStores, NeighborEntry, NeighborList, StoreNeighbors, DEFAULT_CAPACITY, UNIT_WEIGHT,
};

use crate::gnn::GnnError;
use crate::graph::{GraphError, NodeRef};

#[derive(Debug, thiserror::Error)]
pub enum NearlineError {
    #[error("malformed event: {0}")]
    MalformedEvent(String),
    #[error("stale event for {key}: ts {ts} is older than {last_update}")]
    StaleEvent { key: NodeRef, ts: i64, last_update: i64 },
    #[error("{0} is closed")]
    Tombstoned(NodeRef),
    #[error("{0} has no features in the store")]
    UnknownNode(NodeRef),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Gnn(#[from] GnnError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
