//! `linksage`: generate data, train the encoder, run batch and nearline
//! inference, train the ranker and evaluate, from one shared config file.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tracing_subscriber::EnvFilter;

use crate::commands::{BenchArgs, Env, NearlineArgs};
use crate::config::RunConfig;
use crate::error::{CliError, USAGE};

#[derive(Debug, Parser)]
#[command(name = "linksage", version, about = "Marketplace graph embeddings for job matching")]
struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Seed for every random stream.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; defaults to the available cores. 1 forces the serial path.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Directory that relative file names resolve against.
    #[arg(long, global = true, value_name = "DIR")]
    data_dir: Option<PathBuf>,
    /// More log output on stderr (repeat for debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic marketplace: graph, labels, event log, ranking examples, stats.
    Synth(SynthFlags),
    /// Validate a graph file, rewrite it and write its stats.
    BuildGraph {
        #[arg(long, value_name = "FILE")]
        input: Option<PathBuf>,
        #[arg(long, value_name = "FILE")]
        output: Option<PathBuf>,
    },
    /// Train the encoder and decoder on labels up to the snapshot cutoff.
    Train(TrainFlags),
    /// Embed every member and job of the graph and export the embeddings.
    InferBatch,
    /// Replay an event log through the nearline pipeline and export its embeddings.
    ServeNearline(NearlineFlags),
    /// Train the ranker on post-cutoff examples of non-held-out members.
    RankTrain(RankFlags),
    /// Write link recall, overall and per-segment ranking metrics.
    Evaluate {
        #[arg(long)]
        k: Option<usize>,
    },
    /// Measure sampling, encoding and nearline throughput.
    Bench {
        /// Nodes sampled and encoded.
        #[arg(long, default_value_t = 2000)]
        nodes: usize,
        #[arg(long)]
        capacity: Option<usize>,
    },
}

#[derive(Debug, Args)]
struct SynthFlags {
    #[arg(long)]
    members: Option<usize>,
    #[arg(long)]
    clusters: Option<usize>,
    #[arg(long)]
    feature_dim: Option<usize>,
}

#[derive(Debug, Args)]
struct TrainFlags {
    /// in-batch, dot, cosine or mlp.
    #[arg(long)]
    decoder: Option<String>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    /// Graph snapshot cutoff in epoch milliseconds.
    #[arg(long)]
    cutoff: Option<i64>,
}

#[derive(Debug, Args)]
struct NearlineFlags {
    /// Event log; defaults to the configured path.
    #[arg(long, value_name = "FILE")]
    events: Option<PathBuf>,
    /// Maximum entries per neighbor list.
    #[arg(long)]
    capacity: Option<usize>,
    #[arg(long)]
    debounce_ms: Option<i64>,
    /// Skip the final reconciliation sweep.
    #[arg(long)]
    no_reconcile: bool,
}

#[derive(Debug, Args)]
struct RankFlags {
    #[arg(long)]
    epochs: Option<usize>,
    /// Train on the auxiliary features alone.
    #[arg(long)]
    no_embeddings: bool,
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn apply_flags(cli: &Cli, c: &mut RunConfig) {
    set(&mut c.seed, cli.seed);
    set(&mut c.paths.data_dir, cli.data_dir.clone());
    match &cli.command {
        Command::Synth(f) => {
            set(&mut c.synth.members, f.members);
            set(&mut c.synth.clusters, f.clusters);
            set(&mut c.synth.feature_dim, f.feature_dim);
        }
        Command::Train(f) => {
            set(&mut c.train.decoder, f.decoder.clone());
            set(&mut c.train.epochs, f.epochs);
            set(&mut c.train.batch_size, f.batch_size);
            set(&mut c.train.learning_rate, f.learning_rate);
            if f.cutoff.is_some() {
                c.train.graph_snapshot_cutoff = f.cutoff;
            }
        }
        Command::ServeNearline(f) => {
            set(&mut c.nearline.capacity, f.capacity);
            set(&mut c.nearline.debounce_ms, f.debounce_ms);
            if f.no_reconcile {
                c.nearline.reconcile = false;
            }
        }
        Command::RankTrain(f) => {
            set(&mut c.ranker.epochs, f.epochs);
            if f.no_embeddings {
                c.ranker.use_embeddings = false;
            }
        }
        Command::Evaluate { k } => set(&mut c.eval.k, *k),
        Command::Bench { capacity, .. } => set(&mut c.nearline.capacity, *capacity),
        Command::BuildGraph { .. } | Command::InferBatch => {}
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path).map_err(CliError::usage)?,
        None => RunConfig::default(),
    };
    apply_flags(&cli, &mut config);
    let workers = match cli.workers {
        Some(0) => return Err(CliError::usage("--workers must be at least 1")),
        Some(n) => n,
        None => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build_global()
        .map_err(|e| CliError::usage(e.to_string()))?;
    let env = Env { config, workers };
    match &cli.command {
        Command::Synth(_) => commands::synth(&env),
        Command::BuildGraph { input, output } => commands::build_graph(&env, input.as_deref(), output.as_deref()),
        Command::Train(_) => commands::train_cmd(&env),
        Command::InferBatch => commands::infer_batch(&env),
        Command::ServeNearline(f) => commands::serve_nearline(&env, NearlineArgs { events: f.events.as_deref() }),
        Command::RankTrain(_) => commands::rank_train(&env),
        Command::Evaluate { .. } => commands::evaluate(&env),
        Command::Bench { nodes, .. } => commands::bench(&env, BenchArgs { nodes: *nodes }),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let filter = EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new(level));
    tracing_subscriber::fmt().with_env_filter(filter).with_writer(std::io::stderr).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code as u8)
        }
    }
}
