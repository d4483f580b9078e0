//! Encoder-decoder link-prediction model: compute graphs, mean and
//! attention aggregation, dot/cosine/MLP decoders, cross-entropy loss and
//! hand-written gradients.

pub mod checkpoint;
mod compute_graph;
mod decoder;
mod encoder;
mod loss;
mod mlp;
mod model;
mod params;

pub use checkpoint::CheckpointError;
pub use compute_graph::{CgNode, CgTree, ComputeGraph, ComputeGraphError};
pub use decoder::{decode_cosine, decode_dot, decode_mlp, Decoder, Side};
pub use encoder::{
    aggregate_attention, aggregate_mean, attention_weights, backward as encoder_backward, encode,
    forward as encoder_forward, EncodeTape, Embedding,
};
pub use loss::{
    bce_with_logit, loss_cross_entropy, loss_cross_entropy_masked, make_in_batch_labels, sigmoid,
    LabelMatrix, Matrix,
};
pub use mlp::{Dense, Mlp, MlpTape};
pub use model::{Batch, ForwardState, Model, ModelGrads};
pub use params::{
    Activation, AggregationMode, EncoderConfig, EncoderLayer, EncoderParams, Grads, ATTENTION_LEAK,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GnnError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("non-finite values in {0}")]
    NonFinite(String),
    #[error("aggregation over an empty neighborhood")]
    EmptyNeighborhood,
    #[error("{side} embedding {index} has zero norm")]
    ZeroNormEmbedding { side: Side, index: usize },
    #[error("label {0} is not 0 or 1")]
    InvalidLabel(u8),
    #[error("backward called without a forward pass over this batch and these parameters")]
    StaleForwardState,
}
