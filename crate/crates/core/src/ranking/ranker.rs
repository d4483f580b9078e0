use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};

use rand::seq::SliceRandom;
use rayon::prelude::*;

use super::{RankingError, RankingExample};
use crate::gnn::checkpoint::{read_ranker, write_ranker};
pub use crate::gnn::checkpoint::RankerShape;
use crate::gnn::{bce_with_logit, sigmoid, Grads, Mlp};
use crate::graph::{NodeRef, NodeType};
use crate::nearline::EmbeddingStore;
use crate::rng;
use crate::scalar::Scalar;
use crate::train::{Optimizer, OptimizerState};

/// Builds `[member embedding ‖ job embedding ‖ aux]` inputs.
///
/// A missing embedding (or one of the wrong width) is replaced by zeros and
/// counted; nearline lag makes that a normal condition, not an error.
pub struct InputAssembler<'a, T> {
    store: &'a EmbeddingStore<T>,
    shape: RankerShape,
    fallbacks: AtomicUsize,
}

impl<'a, T: Scalar> InputAssembler<'a, T> {
    pub fn new(store: &'a EmbeddingStore<T>, shape: RankerShape) -> Self {
        Self {
            store,
            shape,
            fallbacks: AtomicUsize::new(0),
        }
    }

    pub fn shape(&self) -> RankerShape {
        self.shape
    }

    /// Embeddings replaced by zeros so far.
    pub fn fallbacks(&self) -> usize {
        self.fallbacks.load(Ordering::Relaxed)
    }

    fn push_embedding(&self, out: &mut Vec<f64>, node: NodeRef) {
        let d = self.shape.embedding_dim;
        match self.store.get(node) {
            Some(r) if r.vector.len() == d => out.extend(r.vector.iter().map(|x| x.as_f64())),
            _ => {
                self.fallbacks.fetch_add(1, Ordering::Relaxed);
                out.extend(std::iter::repeat_n(0.0, d));
            }
        }
    }

    pub fn assemble(&self, member: NodeRef, job: NodeRef, aux: &[f32]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.shape.input_dim());
        if self.shape.embedding_dim > 0 {
            self.push_embedding(&mut out, member);
            self.push_embedding(&mut out, job);
        }
        out.extend(aux.iter().map(|&x| x as f64));
        out
    }

    pub fn assemble_example(&self, e: &RankingExample) -> Vec<f64> {
        self.assemble(e.member, e.job, &e.aux)
    }
}

/// Trained ranker: input block widths and the network.
#[derive(Debug, Clone, PartialEq)]
pub struct Ranker<T> {
    shape: RankerShape,
    mlp: Mlp<T>,
    scorer: Mlp<f64>,
}

impl<T: Scalar> Ranker<T> {
    pub fn new(shape: RankerShape, mlp: Mlp<T>) -> Result<Self, RankingError> {
        mlp.validate()?;
        if mlp.input_dim() != shape.input_dim() {
            return Err(RankingError::InvalidConfig(format!(
                "network takes {} inputs, shape needs {}",
                mlp.input_dim(),
                shape.input_dim()
            )));
        }
        let scorer = mlp.cast();
        Ok(Self { shape, mlp, scorer })
    }

    pub fn shape(&self) -> RankerShape {
        self.shape
    }

    pub fn mlp(&self) -> &Mlp<T> {
        &self.mlp
    }

    pub fn uses_embeddings(&self) -> bool {
        self.shape.embedding_dim > 0
    }

    /// Logit for an assembled input.
    pub fn logit(&self, input: &[f64]) -> Result<f64, RankingError> {
        Ok(self.scorer.score(input)?)
    }

    pub fn probability(&self, input: &[f64]) -> Result<f64, RankingError> {
        Ok(sigmoid(self.logit(input)?))
    }

    pub fn save(&self, path: &Path) -> Result<(), RankingError> {
        write_ranker(BufWriter::new(File::create(path)?), self.shape, &self.mlp)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, RankingError> {
        let (shape, mlp) = read_ranker(BufReader::new(File::open(path)?))?;
        Self::new(shape, mlp)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankerConfig {
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub optimizer: Optimizer,
    /// Every example must be strictly after this time.
    pub graph_snapshot_cutoff: i64,
    /// `false` trains on the auxiliary features alone.
    pub use_embeddings: bool,
    pub seed: u64,
}

impl Default for RankerConfig {
    fn default() -> Self {
        Self {
            hidden: vec![32, 32],
            epochs: 10,
            batch_size: 64,
            learning_rate: 1e-3,
            optimizer: Optimizer::adam(),
            graph_snapshot_cutoff: i64::MIN,
            use_embeddings: true,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RankerReport {
    pub examples: usize,
    /// Mean binary cross-entropy per epoch.
    pub epoch_losses: Vec<f64>,
    pub fallbacks: usize,
}

impl RankerReport {
    pub fn to_text(&self) -> String {
        let mut s = format!("examples {}\nfallback_embeddings {}\n", self.examples, self.fallbacks);
        for (i, l) in self.epoch_losses.iter().enumerate() {
            s.push_str(&format!("epoch {} loss {l:.6}\n", i + 1));
        }
        s
    }
}

fn check_examples(examples: &[RankingExample], cutoff: i64) -> Result<usize, RankingError> {
    let Some(first) = examples.first() else {
        return Err(RankingError::EmptyDataset);
    };
    let offenders: Vec<&RankingExample> = examples.iter().filter(|e| e.timestamp <= cutoff).collect();
    if !offenders.is_empty() {
        let listed = offenders
            .iter()
            .take(10)
            .map(|e| format!("{} {} {}", e.member, e.job, e.timestamp))
            .collect::<Vec<_>>()
            .join(", ");
        return Err(RankingError::TemporalLeakage {
            cutoff,
            count: offenders.len(),
            listed,
        });
    }
    let aux_dim = first.aux.len();
    for e in examples {
        if e.member.node_type != NodeType::Member || e.job.node_type != NodeType::Job || e.label > 1 {
            return Err(RankingError::InvalidExample(format!("{} {} label {}", e.member, e.job, e.label)));
        }
        if e.aux.len() != aux_dim {
            return Err(RankingError::InvalidExample(format!(
                "{} {}: {} auxiliary features, expected {aux_dim}",
                e.member,
                e.job,
                e.aux.len()
            )));
        }
    }
    Ok(aux_dim)
}

/// Trains the ranker with binary cross-entropy.
///
/// Inputs are assembled once from the store and copied, so no gradient can
/// reach an embedding; the store is only read.
pub fn train_ranker<T: Scalar>(
    examples: &[RankingExample],
    store: &EmbeddingStore<T>,
    config: &RankerConfig,
) -> Result<(Ranker<f32>, RankerReport), RankingError> {
    let aux_dim = check_examples(examples, config.graph_snapshot_cutoff)?;
    if config.batch_size == 0 {
        return Err(RankingError::InvalidConfig("batch_size must be positive".into()));
    }
    if !(config.learning_rate >= 0.0 && config.learning_rate.is_finite()) {
        return Err(RankingError::InvalidConfig("learning_rate must be finite and >= 0".into()));
    }
    let embedding_dim = if config.use_embeddings {
        let dim = store.records().first().map(|r| r.vector.len()).unwrap_or(0);
        if dim == 0 {
            return Err(RankingError::InvalidConfig("embedding store is empty".into()));
        }
        dim
    } else {
        0
    };
    let shape = RankerShape { embedding_dim, aux_dim };
    if shape.input_dim() == 0 {
        return Err(RankingError::InvalidConfig("ranker has no inputs".into()));
    }
    let assembler = InputAssembler::new(store, shape);
    let inputs: Vec<Vec<f64>> = examples.par_iter().map(|e| assembler.assemble_example(e)).collect();

    let mut mlp: Mlp<f64> = Mlp::init(shape.input_dim(), &config.hidden, rng::mix(config.seed, 0x524b));
    let mut opt = OptimizerState::new(config.optimizer, config.learning_rate);
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut report = RankerReport {
        examples: examples.len(),
        fallbacks: assembler.fallbacks(),
        ..Default::default()
    };
    for epoch in 0..config.epochs {
        let mut r = rng::rng_for(config.seed, epoch as u64);
        order.shuffle(&mut r);
        let mut total = 0.0;
        for batch in order.chunks(config.batch_size) {
            // Per-example gradients are summed in batch order so the result
            // does not depend on the thread count.
            let parts: Vec<(Grads, f64)> = batch
                .par_iter()
                .map(|&i| {
                    let mut g = Grads::zeros_like(&mlp.tensors());
                    let tape = mlp.forward(&inputs[i]).expect("input width checked");
                    let s = tape.output();
                    let y = examples[i].label;
                    mlp.backward(&tape, sigmoid(s) - y as f64, &mut g);
                    (g, bce_with_logit(s, y))
                })
                .collect();
            let mut grads = Grads::zeros_like(&mlp.tensors());
            let mut loss = 0.0;
            for (g, l) in &parts {
                grads.add_assign(g);
                loss += l;
            }
            grads.scale(1.0 / batch.len() as f64);
            total += loss;
            let refs: Vec<&[f64]> = grads.0.iter().map(|g| g.as_slice()).collect();
            opt.step(mlp.tensors_mut(), &refs);
        }
        let mean = total / examples.len() as f64;
        if !mean.is_finite() {
            return Err(RankingError::DivergenceDetected(epoch + 1));
        }
        tracing::debug!(epoch = epoch + 1, loss = mean, "ranker epoch");
        report.epoch_losses.push(mean);
    }
    let ranker = Ranker::new(shape, mlp.cast::<f32>())?;
    Ok((ranker, report))
}

/// Scores candidate jobs for a member, best first; ties by ascending job id.
pub fn score_and_rank<T: Scalar, S: Scalar>(
    member: NodeRef,
    candidates: &[(NodeRef, Vec<f32>)],
    ranker: &Ranker<T>,
    store: &EmbeddingStore<S>,
) -> Result<Vec<(NodeRef, f64)>, RankingError> {
    let assembler = InputAssembler::new(store, ranker.shape());
    let mut scored = candidates
        .iter()
        .map(|(job, aux)| Ok((*job, ranker.probability(&assembler.assemble(member, *job, aux))?)))
        .collect::<Result<Vec<_>, RankingError>>()?;
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.id.cmp(&b.0.id)));
    Ok(scored)
}
