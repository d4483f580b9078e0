//! Heterogeneous-graph embeddings for member/job matching: graph store and
//! sampling, an inductive GNN encoder with decoders and manual gradients,
//! a trainer, a nearline incremental inference pipeline, a downstream
//! ranker and a synthetic marketplace generator.

pub mod gnn;
pub mod graph;
pub mod metrics;
pub mod nearline;
pub mod ranking;
pub mod rng;
pub mod scalar;
pub mod synth;
pub mod train;

pub use scalar::Scalar;

pub type EncoderParamsF32 = gnn::EncoderParams<f32>;
pub type EncoderParamsF64 = gnn::EncoderParams<f64>;
pub type ModelF32 = gnn::Model<f32>;
pub type ModelF64 = gnn::Model<f64>;
pub type DecoderF32 = gnn::Decoder<f32>;
pub type MlpF32 = gnn::Mlp<f32>;
pub type EmbeddingStoreF32 = nearline::EmbeddingStore<f32>;
pub type FrozenEncoderF32 = nearline::FrozenEncoder<f32>;
pub type RankerF32 = ranking::Ranker<f32>;
