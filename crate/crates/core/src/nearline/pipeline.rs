use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufRead, BufWriter, Write};
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;

use super::embedding::{EmbeddingRecord, EmbeddingStore};
use super::event::{EventBody, MarketplaceEvent};
use super::stores::{ingest, NearlineStores, StoreNeighbors};
use super::NearlineError;
use crate::gnn::{encode, ComputeGraph, EncoderParams};
use crate::graph::{sample_from, EdgeTypeSet, GraphError, NodeRef, NodeType, SamplerConfig, SamplingStrategy};
use crate::rng::{node_salt, splitmix64};
use crate::scalar::Scalar;

/// Encoder parameters pinned for serving, with a digest used as model id.
#[derive(Debug, Clone)]
pub struct FrozenEncoder<T> {
    params: EncoderParams<T>,
    model_id: u64,
}

impl<T: Scalar> FrozenEncoder<T> {
    pub fn new(params: EncoderParams<T>) -> Result<Self, NearlineError> {
        params.validate()?;
        let mut h = splitmix64(params.num_layers() as u64);
        for t in params.tensors() {
            for x in t {
                h = splitmix64(h ^ x.as_f64().to_bits());
            }
        }
        Ok(Self { params, model_id: h })
    }

    pub fn params(&self) -> &EncoderParams<T> {
        &self.params
    }

    pub fn model_id(&self) -> u64 {
        self.model_id
    }
}

/// How compute graphs are assembled at serving time.
#[derive(Debug, Clone, PartialEq)]
pub struct JoinConfig {
    pub sampler: SamplerConfig,
    pub edge_types_per_hop: Vec<EdgeTypeSet>,
}

impl Default for JoinConfig {
    fn default() -> Self {
        Self {
            sampler: SamplerConfig::default(),
            edge_types_per_hop: vec![EdgeTypeSet::all(); 2],
        }
    }
}

/// A joined compute graph and the number of neighbors dropped for lack of
/// features.
#[derive(Debug, Clone, PartialEq)]
pub struct Joined {
    pub compute_graph: ComputeGraph,
    pub dropped: usize,
}

/// Assembles `node`'s compute graph from the stores: its features, its
/// neighbor lists per node type, then each neighbor's features, hop by hop.
pub fn sequential_join(node: NodeRef, stores: &NearlineStores, join: &JoinConfig) -> Result<Joined, NearlineError> {
    if join.edge_types_per_hop.len() != join.sampler.hops() {
        return Err(NearlineError::Graph(GraphError::ConfigMismatch(format!(
            "{} edge-type sets given for {} hops",
            join.edge_types_per_hop.len(),
            join.sampler.hops()
        ))));
    }
    let source = StoreNeighbors {
        stores,
        edge_types_per_hop: &join.edge_types_per_hop,
    };
    match sample_from(&source, node, &join.sampler) {
        Ok(s) => Ok(Joined {
            compute_graph: s.compute_graph,
            dropped: s.dropped,
        }),
        Err(GraphError::MissingNode(n)) => Err(NearlineError::UnknownNode(n)),
        Err(e) => Err(e.into()),
    }
}

#[derive(Debug)]
pub struct InferOutcome<T> {
    pub published: Vec<Arc<EmbeddingRecord<T>>>,
    pub failed: Vec<(NodeRef, NearlineError)>,
    pub dropped: usize,
}

/// Joins, encodes and publishes every node of `dirty`, in parallel on the
/// current thread pool. Failures are reported per node.
pub fn infer_and_publish<T: Scalar>(
    dirty: &[NodeRef],
    encoder: &FrozenEncoder<T>,
    stores: &NearlineStores,
    embeddings: &EmbeddingStore<T>,
    join: &JoinConfig,
    produced_at: i64,
) -> InferOutcome<T> {
    let results: Vec<(NodeRef, Result<(Vec<T>, usize), NearlineError>)> = dirty
        .par_iter()
        .map(|&n| {
            let r = sequential_join(n, stores, join).and_then(|j| {
                let v = encode(&j.compute_graph, &encoder.params)?;
                Ok((v, j.dropped))
            });
            (n, r)
        })
        .collect();
    let mut out = InferOutcome {
        published: Vec::new(),
        failed: Vec::new(),
        dropped: 0,
    };
    for (n, r) in results {
        match r {
            Ok((v, dropped)) => {
                out.dropped += dropped;
                out.published
                    .push(embeddings.publish(n, v, produced_at, encoder.model_id));
            }
            Err(e) => out.failed.push((n, e)),
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub worker_count: usize,
    /// Dirty nodes are coalesced over windows of this many milliseconds of
    /// event time.
    pub debounce_ms: i64,
    pub join: JoinConfig,
    /// After the log drains, re-infer every node whose multi-hop
    /// neighborhood changed during the run.
    pub reconcile: bool,
    pub dead_letter: Option<PathBuf>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            worker_count: 1,
            debounce_ms: 100,
            join: JoinConfig::default(),
            reconcile: true,
            dead_letter: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeadLetter {
    pub line: usize,
    pub reason: String,
    /// The offending record as read (or re-serialized, if it parsed).
    pub raw: String,
}

/// Histogram of event-to-publication latency in pipeline time.
#[derive(Debug, Clone, PartialEq)]
pub struct LatencyHistogram {
    /// Upper bounds (exclusive) of all but the last, open-ended bucket.
    pub bounds_ms: Vec<i64>,
    pub counts: Vec<u64>,
}

impl Default for LatencyHistogram {
    fn default() -> Self {
        let bounds_ms = vec![1, 10, 50, 100, 250, 500, 1_000, 5_000, 60_000];
        let counts = vec![0; bounds_ms.len() + 1];
        Self { bounds_ms, counts }
    }
}

impl LatencyHistogram {
    pub fn record(&mut self, ms: i64) {
        let i = self.bounds_ms.partition_point(|&b| b <= ms);
        self.counts[i] += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("lower_ms,upper_ms,count\n");
        let mut lo = 0;
        for (i, c) in self.counts.iter().enumerate() {
            match self.bounds_ms.get(i) {
                Some(hi) => {
                    let _ = writeln!(s, "{lo},{hi},{c}");
                    lo = *hi;
                }
                None => {
                    let _ = writeln!(s, "{lo},inf,{c}");
                }
            }
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PipelineStats {
    /// Non-blank lines read from the log.
    pub events_read: usize,
    pub events_applied: usize,
    /// Dead-lettered: unparseable or invalid events.
    pub malformed: usize,
    pub stale: usize,
    /// Events for jobs already closed.
    pub tombstoned: usize,
    pub embeddings_published: usize,
    /// Published by the final reconciliation sweep (included above).
    pub reconciled: usize,
    pub inference_failures: usize,
    /// Neighbors dropped by the join for lack of features.
    pub join_dropped: usize,
    pub windows: usize,
    pub max_list_len: usize,
    pub workers: usize,
    pub wall_secs: f64,
    pub latency: LatencyHistogram,
    pub dead_letters: Vec<DeadLetter>,
}

impl PipelineStats {
    pub fn events_per_sec(&self) -> f64 {
        if self.wall_secs > 0.0 {
            self.events_read as f64 / self.wall_secs
        } else {
            0.0
        }
    }

    /// `key: value` lines.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "events_read: {}", self.events_read);
        let _ = writeln!(s, "events_applied: {}", self.events_applied);
        let _ = writeln!(s, "malformed: {}", self.malformed);
        let _ = writeln!(s, "stale: {}", self.stale);
        let _ = writeln!(s, "tombstoned: {}", self.tombstoned);
        let _ = writeln!(s, "embeddings_published: {}", self.embeddings_published);
        let _ = writeln!(s, "reconciled: {}", self.reconciled);
        let _ = writeln!(s, "inference_failures: {}", self.inference_failures);
        let _ = writeln!(s, "join_dropped: {}", self.join_dropped);
        let _ = writeln!(s, "windows: {}", self.windows);
        let _ = writeln!(s, "max_list_len: {}", self.max_list_len);
        let _ = writeln!(s, "workers: {}", self.workers);
        let _ = writeln!(s, "wall_secs: {:.3}", self.wall_secs);
        let _ = writeln!(s, "events_per_sec: {:.1}", self.events_per_sec());
        s
    }
}

struct Pending {
    line: usize,
    event: MarketplaceEvent,
}

#[derive(Default)]
struct GroupResult {
    applied: Vec<(i64, Vec<NodeRef>)>,
    stale: usize,
    tombstoned: usize,
    dead: Vec<DeadLetter>,
}

fn ingest_group<'a>(events: impl Iterator<Item = &'a Pending>, stores: &NearlineStores) -> GroupResult {
    let mut r = GroupResult::default();
    for p in events {
        match ingest(&p.event, stores) {
            Ok(dirty) => r.applied.push((p.event.ts, dirty)),
            Err(NearlineError::StaleEvent { .. }) => r.stale += 1,
            Err(NearlineError::Tombstoned(_)) => r.tombstoned += 1,
            Err(e) => r.dead.push(DeadLetter {
                line: p.line,
                reason: e.to_string(),
                raw: p.event.to_json(),
            }),
        }
    }
    r
}

struct Runner<'a, T> {
    encoder: &'a FrozenEncoder<T>,
    stores: &'a NearlineStores,
    embeddings: &'a EmbeddingStore<T>,
    config: &'a PipelineConfig,
    pool: Option<rayon::ThreadPool>,
    stats: PipelineStats,
}

impl<T: Scalar> Runner<'_, T> {
    fn install<R: Send>(&self, f: impl FnOnce() -> R + Send) -> R {
        match &self.pool {
            Some(p) => p.install(f),
            None => f(),
        }
    }

    fn publish(&mut self, nodes: &[NodeRef], produced_at: i64) -> usize {
        let (encoder, stores, embeddings, join) = (self.encoder, self.stores, self.embeddings, &self.config.join);
        let out = self.install(|| infer_and_publish(nodes, encoder, stores, embeddings, join, produced_at));
        self.stats.embeddings_published += out.published.len();
        self.stats.inference_failures += out.failed.len();
        self.stats.join_dropped += out.dropped;
        for (n, e) in &out.failed {
            tracing::debug!(node = %n, error = %e, "inference failed");
        }
        out.published.len()
    }

    fn window(&mut self, events: &[Pending], close_ts: i64) {
        self.stats.windows += 1;
        // Tombstones are read across keys, so close jobs before fanning out.
        let mut last: HashMap<NodeRef, i64> = HashMap::new();
        for p in events {
            let key = p.event.partition_key;
            let seen = *last
                .entry(key)
                .or_insert_with(|| self.stores.last_seen(key).unwrap_or(i64::MIN));
            if p.event.ts < seen {
                continue;
            }
            last.insert(key, p.event.ts);
            if let EventBody::JobClosed { job } = p.event.body {
                self.stores.close(job, p.event.ts);
            }
        }
        let workers = self.config.worker_count.max(1);
        let mut groups: Vec<Vec<&Pending>> = vec![Vec::new(); workers];
        for p in events {
            groups[(node_salt(p.event.partition_key) % workers as u64) as usize].push(p);
        }
        let stores = self.stores;
        let results: Vec<GroupResult> = self.install(|| {
            groups
                .par_iter()
                .map(|g| ingest_group(g.iter().copied(), stores))
                .collect()
        });
        let mut dirty = HashSet::new();
        let mut applied_ts = Vec::new();
        for r in results {
            self.stats.stale += r.stale;
            self.stats.tombstoned += r.tombstoned;
            self.stats.malformed += r.dead.len();
            self.stats.dead_letters.extend(r.dead);
            for (ts, d) in r.applied {
                self.stats.events_applied += 1;
                if !d.is_empty() {
                    applied_ts.push(ts);
                }
                dirty.extend(d);
            }
        }
        let mut dirty: Vec<NodeRef> = dirty
            .into_iter()
            .filter(|n| self.stores.closed_at(*n).is_none())
            .collect();
        dirty.sort_unstable();
        self.publish(&dirty, close_ts);
        for ts in applied_ts {
            self.stats.latency.record(close_ts - ts);
        }
    }

    /// Member and job nodes within the encoder's receptive field of any
    /// node changed during the run.
    fn affected(&self) -> Vec<NodeRef> {
        let touched = self.stores.take_touched();
        let mut nodes: Vec<NodeRef> = if matches!(self.config.join.sampler.strategy, SamplingStrategy::ApproxPpr { .. }) {
            // Walks reach past the sampled hops.
            self.stores.entity_nodes()
        } else {
            let mut seen: HashSet<NodeRef> = touched.iter().copied().collect();
            let mut frontier = touched;
            for _ in 0..self.config.join.sampler.hops() {
                let mut next = Vec::new();
                for n in &frontier {
                    for e in self.stores.all_neighbors(*n) {
                        if seen.insert(e.node) {
                            next.push(e.node);
                        }
                    }
                }
                frontier = next;
            }
            seen.into_iter().collect()
        };
        nodes.retain(|n| {
            !n.node_type.is_attribute() && self.stores.closed_at(*n).is_none() && self.stores.features(*n).is_some()
        });
        nodes.sort_unstable();
        nodes
    }
}

/// Drains an event log through the stores and publishes embeddings.
///
/// Events are read in log order and cut into debounce windows of event
/// time. Within a window, events are partitioned by key over the workers,
/// so each key is applied in log order by one worker; the window's dirty
/// nodes are then joined, encoded and published at the window close.
/// Unparseable or invalid lines go to the dead-letter list (and file).
pub fn run_pipeline<T: Scalar>(
    log: impl BufRead,
    encoder: &FrozenEncoder<T>,
    stores: &NearlineStores,
    embeddings: &EmbeddingStore<T>,
    config: &PipelineConfig,
) -> Result<PipelineStats, NearlineError> {
    let start = Instant::now();
    let workers = config.worker_count.max(1);
    let pool = if workers > 1 {
        Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(workers)
                .build()
                .map_err(|e| NearlineError::Io(std::io::Error::other(e)))?,
        )
    } else {
        None
    };
    let mut run = Runner {
        encoder,
        stores,
        embeddings,
        config,
        pool,
        stats: PipelineStats {
            workers,
            ..Default::default()
        },
    };
    let mut window: Vec<Pending> = Vec::new();
    let mut window_start = None;
    let debounce = config.debounce_ms.max(1);
    let mut last_close = i64::MIN;

    for (i, line) in log.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        run.stats.events_read += 1;
        let event = match MarketplaceEvent::parse(&line, stores.schema()) {
            Ok(e) => e,
            Err(reason) => {
                run.stats.malformed += 1;
                run.stats.dead_letters.push(DeadLetter {
                    line: i + 1,
                    reason,
                    raw: line,
                });
                continue;
            }
        };
        let ws = *window_start.get_or_insert(event.ts);
        if event.ts >= ws + debounce && !window.is_empty() {
            let close = ws + debounce;
            run.window(&window, close);
            last_close = close;
            window.clear();
            window_start = Some(ws + (event.ts - ws) / debounce * debounce);
        }
        window.push(Pending { line: i + 1, event });
    }
    if let (false, Some(ws)) = (window.is_empty(), window_start) {
        let close = ws + debounce;
        run.window(&window, close);
        last_close = close;
    }
    if config.reconcile {
        let nodes = run.affected();
        let n = run.publish(&nodes, last_close.max(0));
        run.stats.reconciled = n;
    }
    run.stats.max_list_len = stores.max_list_len();
    run.stats.wall_secs = start.elapsed().as_secs_f64();

    if let Some(path) = &config.dead_letter {
        let mut w = BufWriter::new(File::create(path)?);
        let mut letters: Vec<&DeadLetter> = run.stats.dead_letters.iter().collect();
        letters.sort_by_key(|d| d.line);
        for d in letters {
            writeln!(w, "{}\t{}\t{}", d.line, d.reason, d.raw)?;
        }
        w.flush()?;
    }
    tracing::info!(
        events = run.stats.events_read,
        published = run.stats.embeddings_published,
        secs = run.stats.wall_secs,
        "pipeline drained"
    );
    Ok(run.stats)
}

/// Member and job embeddings published so far, as a map.
pub fn embedding_map<T: Scalar>(store: &EmbeddingStore<T>) -> HashMap<NodeRef, Vec<T>> {
    store
        .records()
        .into_iter()
        .filter(|r| matches!(r.node.node_type, NodeType::Member | NodeType::Job))
        .map(|r| (r.node, r.vector.clone()))
        .collect()
}
