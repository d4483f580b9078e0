use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use rayon::prelude::*;

use super::compute_graph::ComputeGraph;
use super::decoder::{self, Decoder, DecoderCache};
use super::encoder::{self, EncodeTape, Embedding};
use super::mlp::MlpTape;
use super::loss::{LabelMatrix, Matrix};
use super::params::{EncoderParams, Grads};
use super::GnnError;
use crate::scalar::Scalar;

/// One training step's worth of query neighborhoods and labels.
///
/// `labels[i][j]` is the target for member `i` against job `j`. When a
/// mask is present only masked-in entries are scored against their label.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub members: Vec<ComputeGraph>,
    pub jobs: Vec<ComputeGraph>,
    pub labels: LabelMatrix,
    pub mask: Option<Vec<bool>>,
}

impl Batch {
    pub fn new(
        members: Vec<ComputeGraph>,
        jobs: Vec<ComputeGraph>,
        labels: LabelMatrix,
    ) -> Result<Self, GnnError> {
        if labels.rows != members.len() || labels.cols != jobs.len() {
            return Err(GnnError::ShapeMismatch(format!(
                "labels {}x{} for {} members and {} jobs",
                labels.rows,
                labels.cols,
                members.len(),
                jobs.len()
            )));
        }
        Ok(Self {
            members,
            jobs,
            labels,
            mask: None,
        })
    }

    pub fn with_mask(mut self, mask: Vec<bool>) -> Result<Self, GnnError> {
        if mask.len() != self.members.len() * self.jobs.len() {
            return Err(GnnError::ShapeMismatch("mask size".into()));
        }
        self.mask = Some(mask);
        Ok(self)
    }

    /// Number of (member, job) entries contributing to the loss.
    pub fn observed(&self) -> usize {
        match &self.mask {
            Some(m) => m.iter().filter(|b| **b).count(),
            None => self.members.len() * self.jobs.len(),
        }
    }

    pub fn fingerprint(&self) -> u64 {
        let mut h = DefaultHasher::new();
        for cg in self.members.iter().chain(&self.jobs) {
            cg.fingerprint().hash(&mut h);
        }
        self.labels.as_slice().hash(&mut h);
        self.mask.hash(&mut h);
        h.finish()
    }
}

/// Encoder plus decoder. Every mutable access bumps a generation counter,
/// so a forward state computed before an update is detected as stale.
#[derive(Debug, Clone, PartialEq)]
pub struct Model<T> {
    encoder: EncoderParams<T>,
    decoder: Decoder<T>,
    generation: u64,
}

/// Everything the backward pass needs from a forward pass.
#[derive(Debug, Clone)]
pub struct ForwardState {
    batch_fingerprint: u64,
    generation: u64,
    encoder: EncoderParams<f64>,
    decoder: Decoder<f64>,
    member_tapes: Vec<EncodeTape>,
    job_tapes: Vec<EncodeTape>,
    member_embeddings: Vec<Vec<f64>>,
    job_embeddings: Vec<Vec<f64>>,
    cache: DecoderCache,
    pub scores: Matrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelGrads {
    pub encoder: Grads,
    pub decoder: Grads,
}

impl ModelGrads {
    pub fn is_zero(&self) -> bool {
        self.encoder.is_zero() && self.decoder.is_zero()
    }

    pub fn scale(&mut self, s: f64) {
        self.encoder.scale(s);
        self.decoder.scale(s);
    }
}

impl ForwardState {
    pub fn member_embeddings(&self) -> &[Vec<f64>] {
        &self.member_embeddings
    }

    pub fn job_embeddings(&self) -> &[Vec<f64>] {
        &self.job_embeddings
    }

    /// Distance of the forward pass from any activation kink.
    pub fn relu_margin(&self) -> f64 {
        let enc = self
            .member_tapes
            .iter()
            .chain(&self.job_tapes)
            .map(|t| t.relu_margin(&self.encoder))
            .fold(f64::INFINITY, f64::min);
        match &self.cache {
            DecoderCache::Mlp(tapes) => tapes
                .iter()
                .flatten()
                .map(MlpTape::relu_margin)
                .fold(enc, f64::min),
            _ => enc,
        }
    }
}

impl<T: Scalar> Model<T> {
    pub fn new(encoder: EncoderParams<T>, decoder: Decoder<T>) -> Result<Self, GnnError> {
        encoder.validate()?;
        if let Decoder::Mlp(m) = &decoder {
            m.validate()?;
            if m.input_dim() != 2 * encoder.output_dim() {
                return Err(GnnError::ShapeMismatch(format!(
                    "MLP decoder takes {} inputs, embeddings concatenate to {}",
                    m.input_dim(),
                    2 * encoder.output_dim()
                )));
            }
        }
        Ok(Self {
            encoder,
            decoder,
            generation: 0,
        })
    }

    pub fn encoder(&self) -> &EncoderParams<T> {
        &self.encoder
    }

    pub fn decoder(&self) -> &Decoder<T> {
        &self.decoder
    }

    pub fn into_parts(self) -> (EncoderParams<T>, Decoder<T>) {
        (self.encoder, self.decoder)
    }

    pub fn generation(&self) -> u64 {
        self.generation
    }

    pub fn encoder_mut(&mut self) -> &mut EncoderParams<T> {
        self.generation += 1;
        &mut self.encoder
    }

    pub fn decoder_mut(&mut self) -> &mut Decoder<T> {
        self.generation += 1;
        &mut self.decoder
    }

    /// Mutable parameter tensors, encoder first then decoder; same order
    /// as `ModelGrads` flattened.
    pub fn tensors_mut(&mut self) -> Vec<&mut [T]> {
        self.generation += 1;
        let mut v = self.encoder.tensors_mut();
        v.extend(self.decoder.tensors_mut());
        v
    }

    pub fn tensors(&self) -> Vec<&[T]> {
        let mut v = self.encoder.tensors();
        v.extend(self.decoder.tensors());
        v
    }

    pub fn cast<U: Scalar>(&self) -> Model<U> {
        Model {
            encoder: self.encoder.cast(),
            decoder: self.decoder.cast(),
            generation: 0,
        }
    }

    /// Embeds every compute graph, in parallel, preserving order.
    pub fn embed(&self, cgs: &[ComputeGraph]) -> Result<Vec<Embedding<T>>, GnnError> {
        let p64 = self.encoder.cast::<f64>();
        cgs.par_iter()
            .map(|cg| {
                let tape = encoder::forward(cg, &p64)?;
                Ok(tape.output().iter().map(|&x| T::of(x)).collect())
            })
            .collect()
    }

    pub fn forward(&self, batch: &Batch) -> Result<ForwardState, GnnError> {
        let p64 = self.encoder.cast::<f64>();
        let d64 = self.decoder.cast::<f64>();
        let encode_all = |cgs: &[ComputeGraph]| -> Result<Vec<EncodeTape>, GnnError> {
            cgs.par_iter().map(|cg| encoder::forward(cg, &p64)).collect()
        };
        let member_tapes = encode_all(&batch.members)?;
        let job_tapes = encode_all(&batch.jobs)?;
        let member_embeddings: Vec<Vec<f64>> = member_tapes.iter().map(|t| t.output().to_vec()).collect();
        let job_embeddings: Vec<Vec<f64>> = job_tapes.iter().map(|t| t.output().to_vec()).collect();
        let (scores, cache) =
            decoder::forward(&d64, &member_embeddings, &job_embeddings, batch.mask.as_deref())?;
        Ok(ForwardState {
            batch_fingerprint: batch.fingerprint(),
            generation: self.generation,
            encoder: p64,
            decoder: d64,
            member_tapes,
            job_tapes,
            member_embeddings,
            job_embeddings,
            cache,
            scores,
        })
    }

    /// Gradients of `sum(d_scores * scores)` with respect to every parameter.
    pub fn backward(
        &self,
        batch: &Batch,
        state: &ForwardState,
        d_scores: &Matrix,
    ) -> Result<ModelGrads, GnnError> {
        if state.generation != self.generation || state.batch_fingerprint != batch.fingerprint() {
            return Err(GnnError::StaleForwardState);
        }
        if d_scores.rows != batch.members.len() || d_scores.cols != batch.jobs.len() {
            return Err(GnnError::ShapeMismatch("score gradient shape".into()));
        }
        let mut decoder_grads = Grads::zeros_like(&state.decoder.tensors());
        let (dm, dj) = decoder::backward(
            &state.decoder,
            &state.member_embeddings,
            &state.job_embeddings,
            &state.cache,
            &state.scores,
            d_scores,
            &mut decoder_grads,
        );
        let template = Grads::zeros_like(&state.encoder.tensors());
        let tapes: Vec<(&EncodeTape, &Vec<f64>)> = state
            .member_tapes
            .iter()
            .zip(&dm)
            .chain(state.job_tapes.iter().zip(&dj))
            .collect();
        let partial: Vec<Option<Grads>> = tapes
            .par_iter()
            .map(|(tape, d)| {
                if d.iter().all(|x| *x == 0.0) {
                    return None;
                }
                let mut g = template.clone();
                encoder::backward(tape, &state.encoder, d, &mut g);
                Some(g)
            })
            .collect();
        // Sequential reduction keeps the sum independent of thread count.
        let mut encoder_grads = template;
        for g in partial.into_iter().flatten() {
            encoder_grads.add_assign(&g);
        }
        Ok(ModelGrads {
            encoder: encoder_grads,
            decoder: decoder_grads,
        })
    }
}
