//! The heterogeneous job-marketplace graph: schema, storage, file format,
//! neighbor sampling and top-skill selection.

mod io;
mod sampler;
mod store;
mod top_skills;
mod types;

pub use io::{read_graph, read_graph_from, read_graph_with_schema, write_graph, write_graph_to};
pub(crate) use io::{parse_csv_f32, push_csv};
pub use sampler::{
    sample_from, sample_neighborhood, GraphNeighbors, MaskedNeighbors, NeighborSource, Sampled, SamplerConfig,
    SamplingStrategy, DEFAULT_PPR_ALPHA, PPR_WALKS, PPR_WALK_LENGTH,
};
pub use store::{EdgeRecord, GraphHandle, HeteroGraph, Mutation, Neighbor};
pub use top_skills::compute_top_skills;
pub use types::{EdgeType, EdgeTypeSet, FeatureVector, GraphSchema, NodeRef, NodeType, Relation};

#[derive(Debug, thiserror::Error)]
pub enum GraphError {
    #[error("{node}: expected {expected} features, got {got}")]
    DimensionMismatch {
        node: NodeRef,
        expected: usize,
        got: usize,
    },
    #[error("{0}: feature vector contains NaN or infinity")]
    NonFiniteFeature(NodeRef),
    #[error("edge {edge_type} cannot connect {src} to {dst}")]
    SignatureMismatch {
        edge_type: EdgeType,
        src: NodeRef,
        dst: NodeRef,
    },
    #[error("edge endpoint {0} does not exist")]
    MissingEndpoint(NodeRef),
    #[error("edge weight {0} is negative or not finite")]
    InvalidWeight(f64),
    #[error("node {0} does not exist")]
    MissingNode(NodeRef),
    #[error("sampler configuration: {0}")]
    ConfigMismatch(String),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
