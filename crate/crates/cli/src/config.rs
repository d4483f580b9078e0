//! The shared run configuration: a TOML document in which every key is
//! optional and unknown keys are rejected.

use std::path::{Path, PathBuf};

use linksage::gnn::{AggregationMode, EncoderConfig};
use linksage::graph::{EdgeTypeSet, SamplerConfig, SamplingStrategy, DEFAULT_PPR_ALPHA};
use linksage::nearline::{JoinConfig, PipelineConfig, DEFAULT_CAPACITY};
use linksage::ranking::{RankerConfig, COLD_START, ENGAGED};
use linksage::synth::{SynthConfig, DAY_MS};
use linksage::train::{DecoderKind, EvalConfig, Optimizer, TrainConfig};
use serde::Deserialize;

#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Seeds every random stream (generation, sampling, initialisation, shuffling).
    pub seed: u64,
    pub paths: Paths,
    pub synth: Synth,
    pub sampler: Sampler,
    pub encoder: Encoder,
    pub train: Train,
    pub nearline: Nearline,
    pub ranker: Ranker,
    pub eval: Eval,
}

/// File names are resolved against `data_dir` unless absolute.
#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub data_dir: PathBuf,
    pub graph: PathBuf,
    pub labels: PathBuf,
    pub events: PathBuf,
    pub examples: PathBuf,
    pub stats: PathBuf,
    pub checkpoint: PathBuf,
    pub train_report: PathBuf,
    pub loss_csv: PathBuf,
    pub embeddings: PathBuf,
    pub nearline_embeddings: PathBuf,
    pub pipeline_stats: PathBuf,
    pub dead_letter: PathBuf,
    pub ranker: PathBuf,
    pub ranker_report: PathBuf,
    pub metrics_dir: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        let p = PathBuf::from;
        Self {
            data_dir: p("data"),
            graph: p("graph.tsv"),
            labels: p("labels.tsv"),
            events: p("events.jsonl"),
            examples: p("examples.tsv"),
            stats: p("stats.txt"),
            checkpoint: p("model.ckpt"),
            train_report: p("train_report.txt"),
            loss_csv: p("train_loss.csv"),
            embeddings: p("embeddings.tsv"),
            nearline_embeddings: p("nearline_embeddings.tsv"),
            pipeline_stats: p("pipeline_stats.txt"),
            dead_letter: p("dead_letter.tsv"),
            ranker: p("ranker.ckpt"),
            ranker_report: p("ranker_report.txt"),
            metrics_dir: p("metrics"),
        }
    }
}

impl Paths {
    pub fn resolve(&self, file: &Path) -> PathBuf {
        if file.is_absolute() {
            file.to_path_buf()
        } else {
            self.data_dir.join(file)
        }
    }
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct Synth {
    pub members: usize,
    pub members_per_job: usize,
    pub companies_per_member: f64,
    pub positions_per_member: f64,
    pub titles: usize,
    pub skills: usize,
    pub member_top_skills: f64,
    pub job_top_skills: f64,
    pub engagements_per_member: f64,
    pub clusters: usize,
    pub in_cluster_fraction: f64,
    pub feature_dim: usize,
    pub feature_noise: f64,
    pub cold_start_fraction: f64,
    pub negatives_per_positive: usize,
    pub time_span_days: f64,
    pub cutoff_fraction: f64,
}

impl Default for Synth {
    fn default() -> Self {
        let d = SynthConfig::default();
        Self {
            members: d.member_count,
            members_per_job: d.members_per_job,
            companies_per_member: d.companies_per_member,
            positions_per_member: d.positions_per_member,
            titles: d.title_count,
            skills: d.skill_count,
            member_top_skills: d.member_top_skills,
            job_top_skills: d.job_top_skills,
            engagements_per_member: d.engagements_per_member,
            clusters: d.cluster_count,
            in_cluster_fraction: d.in_cluster_fraction,
            feature_dim: d.feature_dim,
            feature_noise: d.feature_noise,
            cold_start_fraction: d.cold_start_fraction,
            negatives_per_positive: d.negatives_per_positive,
            time_span_days: d.time_span_ms as f64 / DAY_MS as f64,
            cutoff_fraction: d.cutoff_fraction,
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    Uniform,
    Weighted,
    Ppr,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct Sampler {
    pub strategy: Strategy,
    /// Neighbors per hop; its length is the number of hops.
    pub fanout: Vec<usize>,
    pub with_replacement: bool,
    pub ppr_alpha: f64,
}

impl Default for Sampler {
    fn default() -> Self {
        let d = SamplerConfig::default();
        Self {
            strategy: Strategy::Uniform,
            fanout: d.fanout,
            with_replacement: d.with_replacement,
            ppr_alpha: DEFAULT_PPR_ALPHA,
        }
    }
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct Encoder {
    /// One width per sampler hop; the last is the embedding dimension.
    pub layer_dims: Vec<usize>,
    /// `mean` or `attention`.
    pub aggregation: String,
    pub type_encoding: bool,
}

impl Default for Encoder {
    fn default() -> Self {
        let d = EncoderConfig::default();
        Self {
            layer_dims: d.layer_dims,
            aggregation: d.mode.name().to_string(),
            type_encoding: d.type_encoding,
        }
    }
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct Train {
    /// `in-batch`, `dot`, `cosine` or `mlp`.
    pub decoder: String,
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    /// `adam` or `sgd`.
    pub optimizer: String,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub negatives_per_positive: usize,
    pub mlp_hidden: Vec<usize>,
    /// Defaults to the cutoff implied by the `[synth]` section.
    pub graph_snapshot_cutoff: Option<i64>,
}

impl Default for Train {
    fn default() -> Self {
        let d = TrainConfig::default();
        let Optimizer::Adam { beta1, beta2, epsilon } = Optimizer::adam() else {
            unreachable!()
        };
        Self {
            decoder: d.decoder_kind.name().to_string(),
            batch_size: d.batch_size,
            epochs: d.epochs,
            learning_rate: d.learning_rate,
            optimizer: "adam".into(),
            beta1,
            beta2,
            epsilon,
            negatives_per_positive: d.negatives_per_positive,
            mlp_hidden: d.mlp_hidden,
            graph_snapshot_cutoff: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct Nearline {
    /// Maximum entries per (node, neighbor type) list.
    pub capacity: usize,
    pub debounce_ms: i64,
    pub reconcile: bool,
}

impl Default for Nearline {
    fn default() -> Self {
        let d = PipelineConfig::default();
        Self {
            capacity: DEFAULT_CAPACITY,
            debounce_ms: d.debounce_ms,
            reconcile: d.reconcile,
        }
    }
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct Ranker {
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub use_embeddings: bool,
    /// Share of members whose examples are held out of ranker training and
    /// used by `evaluate`.
    pub holdout_fraction: f64,
}

impl Default for Ranker {
    fn default() -> Self {
        let d = RankerConfig::default();
        Self {
            hidden: d.hidden,
            epochs: d.epochs,
            batch_size: d.batch_size,
            learning_rate: d.learning_rate,
            use_embeddings: d.use_embeddings,
            holdout_fraction: 0.2,
        }
    }
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct Eval {
    pub k: usize,
    pub pool_size: usize,
    pub segments: Vec<String>,
}

impl Default for Eval {
    fn default() -> Self {
        let d = EvalConfig::default();
        Self {
            k: d.k,
            pool_size: d.pool_size,
            segments: vec![COLD_START.into(), ENGAGED.into()],
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        Self::parse(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    pub fn synth_config(&self) -> SynthConfig {
        let s = &self.synth;
        SynthConfig {
            member_count: s.members,
            members_per_job: s.members_per_job,
            companies_per_member: s.companies_per_member,
            positions_per_member: s.positions_per_member,
            title_count: s.titles,
            skill_count: s.skills,
            member_top_skills: s.member_top_skills,
            job_top_skills: s.job_top_skills,
            engagements_per_member: s.engagements_per_member,
            cluster_count: s.clusters,
            in_cluster_fraction: s.in_cluster_fraction,
            feature_dim: s.feature_dim,
            feature_noise: s.feature_noise,
            cold_start_fraction: s.cold_start_fraction,
            negatives_per_positive: s.negatives_per_positive,
            time_span_ms: (s.time_span_days * DAY_MS as f64).round() as i64,
            cutoff_fraction: s.cutoff_fraction,
            seed: self.seed,
            ..SynthConfig::default()
        }
    }

    pub fn cutoff(&self) -> i64 {
        self.train
            .graph_snapshot_cutoff
            .unwrap_or_else(|| self.synth_config().cutoff())
    }

    pub fn sampler_config(&self) -> SamplerConfig {
        let s = &self.sampler;
        SamplerConfig {
            strategy: match s.strategy {
                Strategy::Uniform => SamplingStrategy::Uniform,
                Strategy::Weighted => SamplingStrategy::Weighted,
                Strategy::Ppr => SamplingStrategy::ApproxPpr { alpha: s.ppr_alpha },
            },
            fanout: s.fanout.clone(),
            with_replacement: s.with_replacement,
            seed: self.seed,
        }
    }

    pub fn encoder_config(&self, feature_dim: usize) -> Result<EncoderConfig, String> {
        Ok(EncoderConfig {
            feature_dim,
            layer_dims: self.encoder.layer_dims.clone(),
            mode: self.encoder.aggregation.parse::<AggregationMode>()?,
            type_encoding: self.encoder.type_encoding,
        })
    }

    pub fn train_config(&self, feature_dim: usize) -> Result<TrainConfig, String> {
        let t = &self.train;
        let optimizer = match t.optimizer.as_str() {
            "adam" => Optimizer::Adam {
                beta1: t.beta1,
                beta2: t.beta2,
                epsilon: t.epsilon,
            },
            "sgd" => Optimizer::Sgd,
            other => return Err(format!("unknown optimizer `{other}` (expected adam or sgd)")),
        };
        Ok(TrainConfig {
            decoder_kind: t.decoder.parse::<DecoderKind>()?,
            batch_size: t.batch_size,
            epochs: t.epochs,
            learning_rate: t.learning_rate,
            optimizer,
            sampler: self.sampler_config(),
            edge_types_per_hop: vec![EdgeTypeSet::all(); self.sampler.fanout.len()],
            encoder: self.encoder_config(feature_dim)?,
            mlp_hidden: t.mlp_hidden.clone(),
            negatives_per_positive: t.negatives_per_positive,
            graph_snapshot_cutoff: self.cutoff(),
            seed: self.seed,
        })
    }

    pub fn join_config(&self) -> JoinConfig {
        JoinConfig {
            sampler: self.sampler_config(),
            edge_types_per_hop: vec![EdgeTypeSet::all(); self.sampler.fanout.len()],
        }
    }

    pub fn pipeline_config(&self, workers: usize) -> PipelineConfig {
        PipelineConfig {
            worker_count: workers,
            debounce_ms: self.nearline.debounce_ms,
            join: self.join_config(),
            reconcile: self.nearline.reconcile,
            dead_letter: Some(self.paths.resolve(&self.paths.dead_letter)),
        }
    }

    pub fn ranker_config(&self) -> RankerConfig {
        let r = &self.ranker;
        RankerConfig {
            hidden: r.hidden.clone(),
            epochs: r.epochs,
            batch_size: r.batch_size,
            learning_rate: r.learning_rate,
            graph_snapshot_cutoff: self.cutoff(),
            use_embeddings: r.use_embeddings,
            seed: self.seed,
            ..RankerConfig::default()
        }
    }

    pub fn eval_config(&self) -> EvalConfig {
        EvalConfig {
            k: self.eval.k,
            pool_size: self.eval.pool_size,
            seed: self.seed,
        }
    }
}
