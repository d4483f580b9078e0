use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, Normal, Poisson};

use super::{SynthConfig, SynthCounts, SynthError, DAY_MS, EPOCH_MS};
use crate::graph::{
    compute_top_skills, EdgeType, FeatureVector, GraphSchema, HeteroGraph, NodeRef, NodeType, Relation,
};
use crate::nearline::{Action, AttributeRef, EventBody, MarketplaceEvent, UNIT_WEIGHT};
use crate::ranking::RankingExample;
use crate::rng::{self, Rng};
use crate::train::LabeledPair;

/// Everything one generation run produces.
#[derive(Debug, Clone)]
pub struct SynthDataset {
    pub config: SynthConfig,
    pub counts: SynthCounts,
    /// Snapshot at the cutoff: all nodes, attribute edges, and engagement
    /// and recruiter edges at or before the cutoff. Every edge is reciprocal.
    pub graph: HeteroGraph,
    /// Positives at their first engagement time, negatives alongside them.
    pub labels: Vec<LabeledPair>,
    /// Time-ordered log whose replay rebuilds `graph`.
    pub events: Vec<MarketplaceEvent>,
    /// Post-cutoff labels with auxiliary features.
    pub examples: Vec<RankingExample>,
    pub member_clusters: Vec<usize>,
    pub job_clusters: Vec<usize>,
    /// Members with no engagement before the cutoff.
    pub cold_members: Vec<NodeRef>,
    pub cutoff: i64,
}

impl SynthDataset {
    pub fn cluster_of(&self, node: NodeRef) -> Option<usize> {
        match node.node_type {
            NodeType::Member => self.member_clusters.get(node.id as usize).copied(),
            NodeType::Job => self.job_clusters.get(node.id as usize).copied(),
            _ => None,
        }
    }

    /// The cluster jobs of a member's off-cluster engagements come from.
    pub fn adjacent_cluster(&self, cluster: usize) -> usize {
        (cluster + 1) % self.config.cluster_count
    }
}

/// The non-cluster part of an attribute-bearing entity.
struct Profile {
    title: u64,
    company: u64,
    position: u64,
    raw_skills: Vec<(NodeRef, f64)>,
    top_skills: Vec<NodeRef>,
}

impl Profile {
    fn attributes(&self) -> Vec<NodeRef> {
        let mut v = vec![
            NodeRef::new(NodeType::Title, self.title),
            NodeRef::new(NodeType::Company, self.company),
            NodeRef::new(NodeType::Position, self.position),
        ];
        v.extend(&self.top_skills);
        v
    }
}

struct Gen<'a> {
    cfg: &'a SynthConfig,
    r: Rng,
    centroids: Vec<Vec<f64>>,
    /// Attribute ids by type and home cluster.
    by_cluster: HashMap<NodeType, Vec<Vec<u64>>>,
    counts: SynthCounts,
}

impl Gen<'_> {
    fn noisy(&mut self, cluster: usize, sd: f64) -> FeatureVector {
        let n = Normal::new(0.0, sd).expect("finite sd");
        let c = &self.centroids[cluster];
        c.iter().map(|&x| (x + n.sample(&mut self.r)) as f32).collect()
    }

    fn total(&self, t: NodeType) -> usize {
        match t {
            NodeType::Title => self.counts.titles,
            NodeType::Company => self.counts.companies,
            NodeType::Position => self.counts.positions,
            NodeType::Skill => self.counts.skills,
            NodeType::Member => self.counts.members,
            NodeType::Job => self.counts.jobs,
        }
    }

    fn pick(&mut self, t: NodeType, cluster: usize, p_in: f64) -> u64 {
        if self.r.gen_bool(p_in) {
            let ids = &self.by_cluster[&t][cluster];
            ids[self.r.gen_range(0..ids.len())]
        } else {
            self.r.gen_range(0..self.total(t) as u64)
        }
    }

    fn profile(&mut self, cluster: usize) -> Profile {
        let p = self.cfg.attribute_in_cluster;
        let title = self.pick(NodeType::Title, cluster, p);
        let company = self.pick(NodeType::Company, cluster, p);
        let position = self.pick(NodeType::Position, cluster, p);
        let mut seen = HashSet::new();
        let mut raw_skills = Vec::new();
        while raw_skills.len() < self.cfg.raw_skills_per_entity {
            // Cluster pools can be smaller than the list; fall back to any skill.
            let p_in = if seen.len() < self.by_cluster[&NodeType::Skill][cluster].len() {
                self.cfg.skill_in_cluster
            } else {
                0.0
            };
            let s = self.pick(NodeType::Skill, cluster, p_in);
            if seen.insert(s) {
                raw_skills.push((NodeRef::skill(s), self.r.gen_range(0.5..1.5)));
            }
        }
        Profile {
            title,
            company,
            position,
            raw_skills,
            top_skills: Vec::new(),
        }
    }

    /// Exactly `round(frac(d) * n)` entities get `ceil(d)` top skills, the
    /// rest `floor(d)`.
    fn top_skill_counts(&mut self, n: usize, d: f64) -> Vec<usize> {
        let base = d.floor() as usize;
        let extra = ((d - d.floor()) * n as f64).round() as usize;
        let mut k = vec![base; n];
        for i in rand::seq::index::sample(&mut self.r, n, extra.min(n)) {
            k[i] += 1;
        }
        k
    }

    fn action(&mut self) -> Action {
        let u: f64 = self.r.gen();
        if u < 0.6 {
            Action::Click
        } else if u < 0.85 {
            Action::Save
        } else {
            Action::Apply
        }
    }
}

fn attribute_ref(node: NodeRef, features: &HashMap<NodeRef, FeatureVector>) -> AttributeRef {
    AttributeRef {
        node,
        features: Some(features[&node].clone()),
    }
}

/// Generates a marketplace; the same configuration gives bit-identical output.
pub fn generate(config: &SynthConfig) -> Result<SynthDataset, SynthError> {
    let counts = config.validate()?;
    let c = config.cluster_count;
    let d = config.feature_dim;
    let mut r = rng::rng(config.seed);
    let centroids: Vec<Vec<f64>> = (0..c)
        .map(|_| {
            (0..d)
                .map(|_| config.centroid_scale * r.sample::<f64, _>(rand_distr::StandardNormal))
                .collect()
        })
        .collect();
    let attr_types = [NodeType::Title, NodeType::Company, NodeType::Position, NodeType::Skill];
    let mut g = Gen {
        cfg: config,
        r,
        centroids,
        by_cluster: HashMap::new(),
        counts,
    };
    for t in attr_types {
        let mut pools = vec![Vec::new(); c];
        for id in 0..g.total(t) as u64 {
            pools[id as usize % c].push(id);
        }
        g.by_cluster.insert(t, pools);
    }

    let schema = GraphSchema::uniform(d);
    let mut graph = HeteroGraph::new(schema);
    let mut features: HashMap<NodeRef, FeatureVector> = HashMap::new();
    for t in attr_types {
        for id in 0..g.total(t) as u64 {
            let f = g.noisy(id as usize % c, config.attribute_noise);
            let n = NodeRef::new(t, id);
            graph.add_node(n, f.clone())?;
            features.insert(n, f);
        }
    }

    let member_clusters: Vec<usize> = (0..counts.members).map(|i| i % c).collect();
    let job_clusters: Vec<usize> = (0..counts.jobs).map(|i| i % c).collect();
    let member_features: Vec<FeatureVector> = member_clusters
        .iter()
        .map(|&k| g.noisy(k, config.feature_noise))
        .collect();
    let job_features: Vec<FeatureVector> = job_clusters.iter().map(|&k| g.noisy(k, config.feature_noise)).collect();
    let mut member_profiles: Vec<Profile> = member_clusters.iter().map(|&k| g.profile(k)).collect();
    let mut job_profiles: Vec<Profile> = job_clusters.iter().map(|&k| g.profile(k)).collect();
    let completeness: Vec<f32> = (0..counts.members).map(|_| g.r.gen_range(0.4f32..1.0)).collect();

    // Top skills from rarity-weighted raw lists.
    let mut freq: HashMap<NodeRef, u64> = HashMap::new();
    for p in member_profiles.iter().chain(&job_profiles) {
        for (s, _) in &p.raw_skills {
            *freq.entry(*s).or_default() += 1;
        }
    }
    let total = (counts.members + counts.jobs) as u64;
    let mk = g.top_skill_counts(counts.members, config.member_top_skills);
    let jk = g.top_skill_counts(counts.jobs, config.job_top_skills);
    for (p, k) in member_profiles.iter_mut().zip(mk) {
        p.top_skills = compute_top_skills(&p.raw_skills, &freq, total, k);
    }
    for (p, k) in job_profiles.iter_mut().zip(jk) {
        p.top_skills = compute_top_skills(&p.raw_skills, &freq, total, k);
    }

    // Timeline: entities appear in the first 5% of the span, activity after.
    let span = config.time_span_ms;
    let created_end = EPOCH_MS + span / 20;
    let end = EPOCH_MS + span;
    let cutoff = config.cutoff();
    let member_created: Vec<i64> = (0..counts.members).map(|_| g.r.gen_range(EPOCH_MS..created_end)).collect();
    let job_created: Vec<i64> = (0..counts.jobs).map(|_| g.r.gen_range(EPOCH_MS..created_end)).collect();

    let n_cold = (config.cold_start_fraction * counts.members as f64).floor() as usize;
    let mut shuffled: Vec<usize> = (0..counts.members).collect();
    shuffled.shuffle(&mut g.r);
    let mut is_cold = vec![false; counts.members];
    for &m in &shuffled[..n_cold] {
        is_cold[m] = true;
    }

    let mut jobs_by_cluster = vec![Vec::new(); c];
    for (j, &k) in job_clusters.iter().enumerate() {
        jobs_by_cluster[k].push(j as u64);
    }
    let mut warm_by_cluster = vec![Vec::new(); c];
    for (m, &k) in member_clusters.iter().enumerate() {
        if !is_cold[m] {
            warm_by_cluster[k].push(m as u64);
        }
    }

    // (member, job) -> actions in time order.
    let mut engagements: BTreeMap<(u64, u64), Vec<(i64, Action)>> = BTreeMap::new();
    let extra = Poisson::new(config.engagements_per_member - 1.0).ok();
    for m in 0..counts.members {
        let k = member_clusters[m];
        let n = 1 + extra.as_ref().map_or(0, |p| p.sample(&mut g.r) as usize);
        let mut chosen = HashSet::new();
        let mut attempts = 0;
        while chosen.len() < n && attempts < 20 * n {
            attempts += 1;
            let cluster = if g.r.gen_bool(config.in_cluster_fraction) { k } else { (k + 1) % c };
            let pool = &jobs_by_cluster[cluster];
            let j = pool[g.r.gen_range(0..pool.len())];
            if !chosen.insert(j) {
                continue;
            }
            let ts = if is_cold[m] {
                g.r.gen_range(cutoff + 1..end)
            } else if chosen.len() == 1 {
                g.r.gen_range(created_end..=cutoff)
            } else {
                g.r.gen_range(created_end..end)
            };
            let mut actions = vec![(ts, g.action())];
            if g.r.gen_bool(config.repeat_probability) {
                let later = g.r.gen_range(ts..end);
                actions.push((later, g.action()));
            }
            engagements.insert((m as u64, j), actions);
        }
    }

    let mut recruiter: BTreeMap<(u64, u64), i64> = BTreeMap::new();
    if config.recruiter_interactions_per_job > 0.0 {
        let p = Poisson::new(config.recruiter_interactions_per_job).expect("positive rate");
        for j in 0..counts.jobs {
            let k = job_clusters[j];
            let n = p.sample(&mut g.r) as usize;
            for _ in 0..n {
                // Mirror of the engagement rule: members of this cluster or the previous one.
                let cluster = if g.r.gen_bool(config.in_cluster_fraction) { k } else { (k + c - 1) % c };
                let pool = &warm_by_cluster[cluster];
                if pool.is_empty() {
                    continue;
                }
                let m = pool[g.r.gen_range(0..pool.len())];
                let ts = g.r.gen_range(created_end..=cutoff);
                recruiter.entry((j as u64, m)).or_insert(ts);
            }
        }
    }

    // Graph: nodes, attribute edges, snapshot engagement and recruiter edges.
    for (m, f) in member_features.iter().enumerate() {
        graph.add_node(NodeRef::member(m as u64), f.clone())?;
    }
    for (j, f) in job_features.iter().enumerate() {
        graph.add_node(NodeRef::job(j as u64), f.clone())?;
    }
    let attach = |graph: &mut HeteroGraph, owner: NodeRef, p: &Profile| -> Result<(), SynthError> {
        for a in p.attributes() {
            let rel = Relation::attribute(owner.node_type, a.node_type).expect("attribute relation");
            graph.add_edge(EdgeType::Forward(rel), owner, a, UNIT_WEIGHT, true)?;
        }
        Ok(())
    };
    for (m, p) in member_profiles.iter().enumerate() {
        attach(&mut graph, NodeRef::member(m as u64), p)?;
    }
    for (j, p) in job_profiles.iter().enumerate() {
        attach(&mut graph, NodeRef::job(j as u64), p)?;
    }
    let eng = EdgeType::Forward(Relation::SeekerEngagement);
    let mut last_engaged: Vec<Option<i64>> = vec![None; counts.members];
    for (&(m, j), actions) in &engagements {
        // The latest action at or before the cutoff sets the weight; ties go
        // to the heavier action, as in the nearline store.
        let latest = actions
            .iter()
            .filter(|(ts, _)| *ts <= cutoff)
            .max_by(|a, b| a.0.cmp(&b.0).then(a.1.weight().total_cmp(&b.1.weight())));
        if let Some(&(ts, a)) = latest {
            graph.add_edge(eng, NodeRef::member(m), NodeRef::job(j), a.weight(), true)?;
            let l = &mut last_engaged[m as usize];
            *l = Some(l.map_or(ts, |x: i64| x.max(ts)));
        }
    }
    let rec = EdgeType::Forward(Relation::RecruiterInteraction);
    for &(j, m) in recruiter.keys() {
        graph.add_edge(rec, NodeRef::job(j), NodeRef::member(m), UNIT_WEIGHT, true)?;
    }

    // Labels.
    let mut engaged_by: Vec<HashSet<u64>> = vec![HashSet::new(); counts.members];
    for &(m, j) in engagements.keys() {
        engaged_by[m as usize].insert(j);
    }
    let mut labels = Vec::new();
    for (&(m, j), actions) in &engagements {
        let ts = actions.iter().map(|a| a.0).min().expect("at least one action");
        labels.push(LabeledPair::new(m, j, 1, ts));
        let mut drawn = HashSet::new();
        while drawn.len() < config.negatives_per_positive {
            let n = g.r.gen_range(0..counts.jobs as u64);
            if !engaged_by[m as usize].contains(&n) && drawn.insert(n) {
                labels.push(LabeledPair::new(m, n, 0, ts));
            }
        }
    }
    labels.sort_by_key(|p| (p.timestamp, p.member, p.job, p.label));

    // Ranking examples from post-cutoff labels.
    let examples = labels
        .iter()
        .filter(|p| p.timestamp > cutoff)
        .map(|p| {
            let (m, j) = (p.member.id as usize, p.job.id as usize);
            let (mp, jp) = (&member_profiles[m], &job_profiles[j]);
            let recency = last_engaged[m].map_or(0.0, |t| (-((p.timestamp - t) as f64) / (7 * DAY_MS) as f64).exp());
            let overlap = mp.top_skills.iter().filter(|s| jp.top_skills.contains(s)).count();
            let aux = vec![
                completeness[m],
                recency as f32,
                (mp.title == jp.title) as u8 as f32,
                overlap as f32,
            ];
            RankingExample {
                member: p.member,
                job: p.job,
                aux,
                label: p.label,
                timestamp: p.timestamp,
            }
        })
        .collect();

    // Event log replaying the snapshot graph.
    let mut events = Vec::new();
    for (j, p) in job_profiles.iter().enumerate() {
        events.push(MarketplaceEvent::new(
            job_created[j],
            EventBody::JobCreated {
                job: NodeRef::job(j as u64),
                features: job_features[j].clone(),
                attributes: p.attributes().into_iter().map(|a| attribute_ref(a, &features)).collect(),
            },
        ));
    }
    for (m, p) in member_profiles.iter().enumerate() {
        events.push(MarketplaceEvent::new(
            member_created[m],
            EventBody::MemberAttributesUpdated {
                member: NodeRef::member(m as u64),
                features: member_features[m].clone(),
                attributes: p.attributes().into_iter().map(|a| attribute_ref(a, &features)).collect(),
            },
        ));
    }
    for (&(m, j), actions) in &engagements {
        for &(ts, action) in actions.iter().filter(|(ts, _)| *ts <= cutoff) {
            events.push(MarketplaceEvent::new(
                ts,
                EventBody::SeekerEngagement {
                    member: NodeRef::member(m),
                    job: NodeRef::job(j),
                    action,
                },
            ));
        }
    }
    for (&(j, m), &ts) in &recruiter {
        events.push(MarketplaceEvent::new(
            ts,
            EventBody::RecruiterInteraction {
                job: NodeRef::job(j),
                member: NodeRef::member(m),
            },
        ));
    }
    // Stable: ties keep generation order, which is deterministic.
    events.sort_by_key(|e| e.ts);

    let mut cold_members: Vec<NodeRef> = shuffled[..n_cold].iter().map(|&m| NodeRef::member(m as u64)).collect();
    cold_members.sort_unstable();
    tracing::info!(
        members = counts.members,
        jobs = counts.jobs,
        edges = graph.edge_count(),
        labels = labels.len(),
        events = events.len(),
        "generated marketplace"
    );
    Ok(SynthDataset {
        config: config.clone(),
        counts,
        graph,
        labels,
        events,
        examples,
        member_clusters,
        job_clusters,
        cold_members,
        cutoff,
    })
}

/// One JSON event per line.
pub fn write_events_to<W: Write>(mut w: W, events: &[MarketplaceEvent]) -> std::io::Result<()> {
    for e in events {
        w.write_all(e.to_json().as_bytes())?;
        w.write_all(b"\n")?;
    }
    w.flush()
}

pub fn write_events(path: &Path, events: &[MarketplaceEvent]) -> std::io::Result<()> {
    write_events_to(BufWriter::new(File::create(path)?), events)
}
