use std::collections::HashMap;
use std::fs;
use std::io::BufReader;
use std::path::Path;
use std::time::Instant;

use linksage::gnn::checkpoint::{load_model, save_model};
use linksage::gnn::{encode, EncoderParams, Model};
use linksage::graph::{read_graph, sample_neighborhood, write_graph, GraphSchema, HeteroGraph, NodeRef, NodeType};
use linksage::nearline::{run_pipeline, EmbeddingStore, FrozenEncoder, NearlineStores};
use linksage::ranking::{
    engagement_segments, evaluate_segments, read_examples, train_ranker, write_examples, Ranker, RankingExample,
};
use linksage::rng;
use linksage::synth::{generate, stats, write_events};
use linksage::train::{
    check_no_leakage, embed_nodes, evaluate_recall, read_labels, train, write_labels, EvalMetrics, TrainConfig,
};
use tracing::info;

use crate::config::RunConfig;
use crate::error::{CliError, Context};

pub struct Env {
    pub config: RunConfig,
    pub workers: usize,
}

impl Env {
    fn path(&self, file: &Path) -> std::path::PathBuf {
        self.config.paths.resolve(file)
    }

    fn write(&self, file: &Path, contents: &str) -> Result<std::path::PathBuf, CliError> {
        let path = self.path(file);
        ensure_parent(&path)?;
        fs::write(&path, contents).at(&path)?;
        Ok(path)
    }

    fn graph(&self) -> Result<HeteroGraph, CliError> {
        let path = self.path(&self.config.paths.graph);
        read_graph(&path).at(&path)
    }

    fn model(&self) -> Result<Model<f32>, CliError> {
        let path = self.path(&self.config.paths.checkpoint);
        load_model(&path).at(&path)
    }

    fn train_config(&self, graph: &HeteroGraph) -> Result<TrainConfig, CliError> {
        self.config.train_config(graph.schema().max_dim()).map_err(CliError::usage)
    }

    fn embeddings(&self) -> Result<EmbeddingStore<f32>, CliError> {
        let path = self.path(&self.config.paths.embeddings);
        EmbeddingStore::import(&path).at(&path)
    }

    fn examples(&self) -> Result<Vec<RankingExample>, CliError> {
        let path = self.path(&self.config.paths.examples);
        read_examples(&path).at(&path)
    }

    /// Members whose examples are withheld from ranker training.
    fn held_out(&self, member: NodeRef) -> bool {
        let draw = rng::mix(self.config.seed, rng::node_salt(member)) % 1_000_000;
        (draw as f64) < self.config.ranker.holdout_fraction * 1e6
    }
}

fn ensure_parent(path: &Path) -> Result<(), CliError> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => fs::create_dir_all(dir).at(dir),
        _ => Ok(()),
    }
}

pub fn synth(env: &Env) -> Result<(), CliError> {
    let cfg = env.config.synth_config();
    let ds = generate(&cfg).plain()?;
    let p = &env.config.paths;
    let graph = env.path(&p.graph);
    ensure_parent(&graph)?;
    write_graph(&ds.graph, &graph).at(&graph)?;
    let labels = env.path(&p.labels);
    write_labels(&labels, &ds.labels).at(&labels)?;
    let events = env.path(&p.events);
    write_events(&events, &ds.events).at(&events)?;
    let examples = env.path(&p.examples);
    write_examples(&examples, &ds.examples).at(&examples)?;
    env.write(&p.stats, &stats(&ds.graph).to_text())?;
    println!(
        "synth: {} nodes, {} labels, {} events, {} examples, cutoff {}",
        ds.graph.node_count(),
        ds.labels.len(),
        ds.events.len(),
        ds.examples.len(),
        ds.cutoff
    );
    Ok(())
}

pub fn build_graph(env: &Env, input: Option<&Path>, output: Option<&Path>) -> Result<(), CliError> {
    let input = input.map_or_else(|| env.path(&env.config.paths.graph), Path::to_path_buf);
    let output = output.map_or_else(|| input.clone(), Path::to_path_buf);
    let graph = read_graph(&input).at(&input)?;
    graph.check_schema_closure().at(&input)?;
    ensure_parent(&output)?;
    write_graph(&graph, &output).at(&output)?;
    let s = stats(&graph);
    env.write(&env.config.paths.stats, &s.to_text())?;
    println!(
        "build-graph: {} nodes, {} edges, written to {}",
        graph.node_count(),
        graph.edge_count(),
        output.display()
    );
    Ok(())
}

pub fn train_cmd(env: &Env) -> Result<(), CliError> {
    let graph = env.graph()?;
    let labels_path = env.path(&env.config.paths.labels);
    let labels = read_labels(&labels_path).at(&labels_path)?;
    let cfg = env.train_config(&graph)?;
    let outcome = train(&graph, &labels, &cfg).plain()?;
    let p = &env.config.paths;
    let ckpt = env.path(&p.checkpoint);
    ensure_parent(&ckpt)?;
    save_model(&ckpt, &outcome.model).at(&ckpt)?;
    env.write(&p.train_report, &outcome.report.to_text())?;
    env.write(&p.loss_csv, &outcome.report.loss_csv())?;
    match outcome.report.final_loss() {
        Some(l) => println!("train: {} epochs, final loss {l:.6}", outcome.report.epochs.len()),
        None => println!("train: 0 epochs"),
    }
    Ok(())
}

pub fn infer_batch(env: &Env) -> Result<(), CliError> {
    let graph = env.graph()?;
    let model = env.model()?;
    let cfg = env.train_config(&graph)?;
    let mut nodes = graph.nodes_of(NodeType::Member);
    nodes.extend(graph.nodes_of(NodeType::Job));
    let embedded = embed_nodes(&model, &graph, &nodes, &cfg.sampler, &cfg).plain()?;
    let model_id = FrozenEncoder::new(model.encoder().clone()).plain()?.model_id();
    let store = EmbeddingStore::new();
    let produced_at = env.config.cutoff();
    for n in nodes {
        if let Some(v) = embedded.get(&n) {
            store.publish(n, v.clone(), produced_at, model_id);
        }
    }
    let out = env.path(&env.config.paths.embeddings);
    ensure_parent(&out)?;
    store.export(&out).at(&out)?;
    println!("infer-batch: {} embeddings written to {}", store.len(), out.display());
    Ok(())
}

pub struct NearlineArgs<'a> {
    pub events: Option<&'a Path>,
}

pub fn serve_nearline(env: &Env, args: NearlineArgs) -> Result<(), CliError> {
    let model = env.model()?;
    let events = args
        .events
        .map_or_else(|| env.path(&env.config.paths.events), Path::to_path_buf);
    let p = &env.config.paths;
    let dead = env.path(&p.dead_letter);
    ensure_parent(&dead)?;
    let file = fs::File::open(&events).at(&events)?;
    let encoder = FrozenEncoder::new(model.encoder().clone()).plain()?;
    let stores = NearlineStores::new(
        GraphSchema::uniform(model.encoder().feature_dim),
        env.config.nearline.capacity,
    );
    let store = EmbeddingStore::new();
    let cfg = env.config.pipeline_config(env.workers);
    let stats = run_pipeline(BufReader::new(file), &encoder, &stores, &store, &cfg).at(&events)?;
    let out = env.path(&p.nearline_embeddings);
    store.export(&out).at(&out)?;
    env.write(&p.pipeline_stats, &stats.to_text())?;
    println!(
        "serve-nearline: {} events, {} applied, {} malformed, {} stale, {} embeddings, {:.0} events/s",
        stats.events_read,
        stats.events_applied,
        stats.malformed,
        stats.stale,
        store.len(),
        stats.events_per_sec()
    );
    Ok(())
}

pub fn rank_train(env: &Env) -> Result<(), CliError> {
    let store = env.embeddings()?;
    let examples: Vec<RankingExample> = env.examples()?.into_iter().filter(|e| !env.held_out(e.member)).collect();
    let (ranker, report) = train_ranker(&examples, &store, &env.config.ranker_config()).plain()?;
    let p = &env.config.paths;
    let out = env.path(&p.ranker);
    ensure_parent(&out)?;
    ranker.save(&out).at(&out)?;
    env.write(&p.ranker_report, &report.to_text())?;
    println!(
        "rank-train: {} examples, final loss {}",
        report.examples,
        report.epoch_losses.last().map_or("n/a".to_string(), |l| format!("{l:.6}"))
    );
    Ok(())
}

fn recall_csv(m: &EvalMetrics) -> String {
    format!("k,queries,recall_at_k,auc\n{},{},{:.6},{:.6}\n", m.k, m.queries, m.recall_at_k, m.auc)
}

pub fn evaluate(env: &Env) -> Result<(), CliError> {
    let graph = env.graph()?;
    let model = env.model()?;
    let cfg = env.train_config(&graph)?;
    let labels_path = env.path(&env.config.paths.labels);
    let labels = read_labels(&labels_path).at(&labels_path)?;
    let split = check_no_leakage(&labels, cfg.graph_snapshot_cutoff);
    let recall = evaluate_recall(&model, &graph, &split.ranking, &split.gnn, &cfg, &env.config.eval_config()).plain()?;

    let store = env.embeddings()?;
    let ranker_path = env.path(&env.config.paths.ranker);
    let ranker = Ranker::<f32>::load(&ranker_path).at(&ranker_path)?;
    let test: Vec<RankingExample> = env.examples()?.into_iter().filter(|e| env.held_out(e.member)).collect();
    let wanted: Vec<&str> = env.config.eval.segments.iter().map(String::as_str).collect();
    let segments =
        evaluate_segments(&test, &ranker, &store, engagement_segments(&graph), &wanted, env.config.eval.k).plain()?;
    for w in &segments.warnings {
        tracing::warn!("{w}");
    }

    let dir = &env.config.paths.metrics_dir;
    env.write(&dir.join("recall.csv"), &recall_csv(&recall))?;
    env.write(&dir.join("segments.csv"), &segments.to_csv())?;
    let overall = segments.overall();
    let f = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
    env.write(
        &dir.join("overall.csv"),
        &format!(
            "examples,auc,recall_at_k,link_recall_at_k,link_auc\n{},{},{},{:.6},{:.6}\n",
            overall.n,
            f(overall.auc),
            f(overall.recall_at_k),
            recall.recall_at_k,
            recall.auc
        ),
    )?;
    println!("overall AUC {}", overall.auc.map_or("n/a".to_string(), |a| format!("{a:.4}")));
    for r in &segments.rows[1..] {
        println!("{} AUC {} (n = {})", r.segment, r.auc.map_or("n/a".to_string(), |a| format!("{a:.4}")), r.n);
    }
    println!("link recall@{} {:.4} over {} queries", recall.k, recall.recall_at_k, recall.queries);
    Ok(())
}

pub struct BenchArgs {
    pub nodes: usize,
}

pub fn bench(env: &Env, args: BenchArgs) -> Result<(), CliError> {
    let graph = env.graph()?;
    let cfg = env.train_config(&graph)?;
    let ckpt = env.path(&env.config.paths.checkpoint);
    let params: EncoderParams<f32> = if ckpt.exists() {
        env.model()?.encoder().clone()
    } else {
        info!("no checkpoint at {}, benchmarking a freshly initialised encoder", ckpt.display());
        EncoderParams::init(&cfg.encoder, env.config.seed)
    };
    let mut nodes = graph.nodes_of(NodeType::Member);
    nodes.extend(graph.nodes_of(NodeType::Job));
    nodes.truncate(args.nodes.max(1));

    let start = Instant::now();
    let mut cgs = Vec::with_capacity(nodes.len());
    for &n in &nodes {
        cgs.push(sample_neighborhood(&graph, n, &cfg.sampler, &cfg.edge_types_per_hop).plain()?);
    }
    let sample_secs = start.elapsed().as_secs_f64();
    let start = Instant::now();
    let mut sink = HashMap::with_capacity(nodes.len());
    for (n, cg) in nodes.iter().zip(&cgs) {
        sink.insert(*n, encode(cg, &params).plain()?);
    }
    let encode_secs = start.elapsed().as_secs_f64();

    let events = env.path(&env.config.paths.events);
    let file = fs::File::open(&events).at(&events)?;
    let encoder = FrozenEncoder::new(params.clone()).plain()?;
    let stores = NearlineStores::new(GraphSchema::uniform(params.feature_dim), env.config.nearline.capacity);
    let store = EmbeddingStore::new();
    let mut pcfg = env.config.pipeline_config(env.workers);
    pcfg.dead_letter = None;
    let stats = run_pipeline(BufReader::new(file), &encoder, &stores, &store, &pcfg).at(&events)?;

    let rate = |n: usize, s: f64| if s > 0.0 { n as f64 / s } else { f64::INFINITY };
    let mut report = String::new();
    report.push_str(&format!("workers {}\n", env.workers));
    report.push_str(&format!(
        "sampling_nodes_per_sec {:.1}\nencoding_nodes_per_sec {:.1}\n",
        rate(nodes.len(), sample_secs),
        rate(nodes.len(), encode_secs)
    ));
    report.push_str(&format!(
        "nearline_events {}\nnearline_events_per_sec {:.1}\nnearline_embeddings {}\n",
        stats.events_read,
        stats.events_per_sec(),
        stats.embeddings_published
    ));
    report.push_str("latency_ms_histogram\n");
    report.push_str(&stats.latency.to_csv());
    env.write(&env.config.paths.metrics_dir.join("bench.txt"), &report)?;
    print!("{report}");
    Ok(())
}
