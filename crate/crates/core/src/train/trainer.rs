use std::time::Instant;

use super::batches::build_batches;
use super::optim::OptimizerState;
use super::report::{EpochStats, TrainReport};
use super::{check_no_leakage, LabeledPair, TrainConfig, TrainError};
use crate::gnn::{loss_cross_entropy_masked, EncoderParams, Model};
use crate::graph::HeteroGraph;
use crate::rng;

pub struct TrainOutcome {
    pub model: Model<f32>,
    pub report: TrainReport,
}

fn echo(config: &TrainConfig) -> Vec<(String, String)> {
    let e = &config.encoder;
    vec![
        ("decoder".into(), config.decoder_kind.name().into()),
        ("batch_size".into(), config.batch_size.to_string()),
        ("epochs".into(), config.epochs.to_string()),
        ("learning_rate".into(), config.learning_rate.to_string()),
        ("optimizer".into(), format!("{:?}", config.optimizer)),
        ("sampler".into(), format!("{:?}", config.sampler)),
        ("aggregation".into(), e.mode.name().into()),
        ("layer_dims".into(), format!("{:?}", e.layer_dims)),
        ("feature_dim".into(), e.feature_dim.to_string()),
        ("type_encoding".into(), e.type_encoding.to_string()),
        ("negatives_per_positive".into(), config.negatives_per_positive.to_string()),
        ("graph_snapshot_cutoff".into(), config.graph_snapshot_cutoff.to_string()),
        ("seed".into(), config.seed.to_string()),
    ]
}

/// Initializes a model from the configuration and trains it on the pairs at
/// or before the snapshot cutoff.
pub fn train(graph: &HeteroGraph, pairs: &[LabeledPair], config: &TrainConfig) -> Result<TrainOutcome, TrainError> {
    config.validate()?;
    let encoder = EncoderParams::<f32>::init(&config.encoder, rng::mix(config.seed, 1));
    let decoder = config
        .decoder_kind
        .build(encoder.output_dim(), &config.mlp_hidden, rng::mix(config.seed, 2));
    let model = Model::new(encoder, decoder)?;
    train_model(model, graph, pairs, config)
}

/// Continues training an existing model.
pub fn train_model(
    mut model: Model<f32>,
    graph: &HeteroGraph,
    pairs: &[LabeledPair],
    config: &TrainConfig,
) -> Result<TrainOutcome, TrainError> {
    config.validate()?;
    let start = Instant::now();
    let partition = check_no_leakage(pairs, config.graph_snapshot_cutoff);
    if partition.gnn.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    let mut report = TrainReport {
        config: echo(config),
        gnn_pairs: partition.gnn.len(),
        ranking_pairs: partition.ranking.len(),
        parameter_count: model.tensors().iter().map(|t| t.len()).sum(),
        ..Default::default()
    };
    let mut opt = OptimizerState::new(config.optimizer, config.learning_rate);
    for epoch in 0..config.epochs {
        let stream = build_batches(&partition.gnn, graph, config, epoch)?;
        report.skipped_pairs = stream.skipped;
        report.dropped_pairs = stream.dropped;
        let mut loss_sum = 0.0;
        let mut entries = 0;
        let mut batches = 0;
        for (bi, item) in stream.enumerate() {
            let (planned, batch) = item?;
            if planned.latest_timestamp > config.graph_snapshot_cutoff {
                report.post_cutoff_pairs_used += planned.labeled;
            }
            let state = model.forward(&batch)?;
            let (loss, mut d) = loss_cross_entropy_masked(&state.scores, &batch.labels, batch.mask.as_deref())?;
            if !loss.is_finite() {
                return Err(TrainError::DivergenceDetected { epoch, batch: bi });
            }
            let observed = batch.observed();
            let inv = 1.0 / observed as f64;
            for x in d.data.iter_mut() {
                *x *= inv;
            }
            let grads = model.backward(&batch, &state, &d)?;
            if !grads.encoder.is_finite() || !grads.decoder.is_finite() {
                return Err(TrainError::DivergenceDetected { epoch, batch: bi });
            }
            let flat: Vec<&[f64]> = grads
                .encoder
                .0
                .iter()
                .chain(&grads.decoder.0)
                .map(Vec::as_slice)
                .collect();
            opt.step(model.tensors_mut(), &flat);
            loss_sum += loss;
            entries += observed;
            batches += 1;
        }
        let mean_loss = loss_sum / entries as f64;
        tracing::info!(epoch, mean_loss, batches, "epoch done");
        report.epochs.push(EpochStats {
            epoch,
            mean_loss,
            batches,
            entries,
        });
    }
    report.wall_clock_secs = start.elapsed().as_secs_f64();
    Ok(TrainOutcome { model, report })
}
