use std::collections::BTreeSet;
use std::sync::atomic::{AtomicUsize, Ordering};

use dashmap::{DashMap, DashSet};

use super::event::{AttributeRef, EventBody, MarketplaceEvent};
use super::NearlineError;
use crate::graph::{
    EdgeType, EdgeTypeSet, FeatureVector, GraphSchema, Neighbor, NeighborSource, NodeRef, NodeType, Relation,
};

pub const DEFAULT_CAPACITY: usize = 128;

/// Weight of attribute and recruiter edges materialized from events.
pub const UNIT_WEIGHT: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeighborEntry {
    pub node: NodeRef,
    /// Edge type from the list owner to `node`.
    pub edge_type: EdgeType,
    pub weight: f64,
    pub last_update: i64,
}

impl NeighborEntry {
    fn recency_key(&self) -> (i64, NodeRef, usize) {
        (self.last_update, self.node, self.edge_type.ordinal())
    }
}

/// Bounded neighbor list ordered oldest first.
///
/// An entry is identified by `(node, edge_type)`. Re-observing it keeps the
/// latest observation (larger weight on equal timestamps). Eviction drops
/// the oldest entry. Together these make the final list a function of the
/// set of observations, not of the order they arrive from different keys.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct NeighborList {
    entries: Vec<NeighborEntry>,
}

impl NeighborList {
    pub fn entries(&self) -> &[NeighborEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Returns true if the list changed.
    fn observe(&mut self, e: NeighborEntry, capacity: usize) -> bool {
        if let Some(i) = self
            .entries
            .iter()
            .position(|x| x.node == e.node && x.edge_type == e.edge_type)
        {
            let old = self.entries[i];
            let newer = (e.last_update, e.weight) > (old.last_update, old.weight);
            if !newer {
                return false;
            }
            self.entries.remove(i);
        }
        let at = self.entries.partition_point(|x| x.recency_key() < e.recency_key());
        self.entries.insert(at, e);
        while self.entries.len() > capacity {
            self.entries.remove(0);
        }
        true
    }

    fn remove(&mut self, node: NodeRef, edge_type: EdgeType) -> bool {
        let before = self.entries.len();
        self.entries.retain(|x| !(x.node == node && x.edge_type == edge_type));
        self.entries.len() != before
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRecord {
    pub features: FeatureVector,
    pub last_update: i64,
}

/// Neighbor lists, input features and per-key bookkeeping of the pipeline.
///
/// Neighbor lists are partitioned by the neighbor's node type, one
/// concurrent map per type, keyed by the list owner.
#[derive(Debug)]
pub struct NearlineStores {
    schema: GraphSchema,
    capacity: usize,
    neighbors: Vec<DashMap<NodeRef, NeighborList>>,
    features: DashMap<NodeRef, FeatureRecord>,
    last_seen: DashMap<NodeRef, i64>,
    closed: DashMap<NodeRef, i64>,
    touched: DashSet<NodeRef>,
    max_list_len: AtomicUsize,
}

impl NearlineStores {
    pub fn new(schema: GraphSchema, capacity: usize) -> Self {
        assert!(capacity > 0, "neighbor capacity must be positive");
        Self {
            schema,
            capacity,
            neighbors: (0..NodeType::COUNT).map(|_| DashMap::new()).collect(),
            features: DashMap::new(),
            last_seen: DashMap::new(),
            closed: DashMap::new(),
            touched: DashSet::new(),
            max_list_len: AtomicUsize::new(0),
        }
    }

    pub fn schema(&self) -> &GraphSchema {
        &self.schema
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn features(&self, node: NodeRef) -> Option<FeatureVector> {
        self.features.get(&node).map(|r| r.features.clone())
    }

    pub fn feature_record(&self, node: NodeRef) -> Option<FeatureRecord> {
        self.features.get(&node).map(|r| r.clone())
    }

    /// The list of `neighbor_type` neighbors owned by `node`.
    pub fn neighbor_list(&self, node: NodeRef, neighbor_type: NodeType) -> NeighborList {
        self.neighbors[neighbor_type.index()]
            .get(&node)
            .map(|l| l.clone())
            .unwrap_or_default()
    }

    /// Every neighbor entry of `node`, across node types.
    pub fn all_neighbors(&self, node: NodeRef) -> Vec<NeighborEntry> {
        let mut out = Vec::new();
        for store in &self.neighbors {
            if let Some(l) = store.get(&node) {
                out.extend_from_slice(l.entries());
            }
        }
        out
    }

    /// Largest list length ever held.
    pub fn max_list_len(&self) -> usize {
        self.max_list_len.load(Ordering::Relaxed)
    }

    pub fn last_seen(&self, key: NodeRef) -> Option<i64> {
        self.last_seen.get(&key).map(|t| *t)
    }

    pub fn closed_at(&self, job: NodeRef) -> Option<i64> {
        self.closed.get(&job).map(|t| *t)
    }

    pub fn closed_jobs(&self) -> Vec<NodeRef> {
        let mut v: Vec<_> = self.closed.iter().map(|e| *e.key()).collect();
        v.sort_unstable();
        v
    }

    /// Records a tombstone; the earliest close time wins.
    pub fn close(&self, job: NodeRef, ts: i64) {
        self.closed
            .entry(job)
            .and_modify(|t| *t = (*t).min(ts))
            .or_insert(ts);
    }

    fn is_closed(&self, job: NodeRef, ts: i64) -> bool {
        self.closed_at(job).is_some_and(|c| c <= ts)
    }

    /// Member and job nodes with features, sorted.
    pub fn entity_nodes(&self) -> Vec<NodeRef> {
        let mut v: Vec<_> = self
            .features
            .iter()
            .map(|e| *e.key())
            .filter(|n| !n.node_type.is_attribute())
            .collect();
        v.sort_unstable();
        v
    }

    /// Nodes whose lists or features changed since the last call.
    pub fn take_touched(&self) -> Vec<NodeRef> {
        let mut v: Vec<_> = self.touched.iter().map(|n| *n).collect();
        for n in &v {
            self.touched.remove(n);
        }
        v.sort_unstable();
        v
    }

    fn observe(&self, owner: NodeRef, e: NeighborEntry) {
        let store = &self.neighbors[e.node.node_type.index()];
        let mut list = store.entry(owner).or_default();
        if list.observe(e, self.capacity) {
            self.max_list_len.fetch_max(list.len(), Ordering::Relaxed);
            self.touched.insert(owner);
        }
    }

    /// Adds `src -> dst` and its reciprocal.
    fn link(&self, edge_type: EdgeType, src: NodeRef, dst: NodeRef, weight: f64, ts: i64) {
        self.observe(
            src,
            NeighborEntry {
                node: dst,
                edge_type,
                weight,
                last_update: ts,
            },
        );
        self.observe(
            dst,
            NeighborEntry {
                node: src,
                edge_type: edge_type.reversed(),
                weight,
                last_update: ts,
            },
        );
    }

    fn unlink(&self, edge_type: EdgeType, src: NodeRef, dst: NodeRef) {
        for (owner, node, t) in [(src, dst, edge_type), (dst, src, edge_type.reversed())] {
            if let Some(mut l) = self.neighbors[node.node_type.index()].get_mut(&owner) {
                if l.remove(node, t) {
                    self.touched.insert(owner);
                }
            }
        }
    }

    /// Newer timestamps win; equal timestamps keep the bitwise larger
    /// vector so concurrent writers converge.
    fn put_features(&self, node: NodeRef, features: &[f32], ts: i64) {
        let bits = |f: &[f32]| f.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        let mut changed = false;
        self.features
            .entry(node)
            .and_modify(|r| {
                let replace = ts > r.last_update || (ts == r.last_update && bits(features) > bits(&r.features));
                if replace {
                    changed = r.features != features;
                    r.features = features.to_vec();
                    r.last_update = ts;
                }
            })
            .or_insert_with(|| {
                changed = true;
                FeatureRecord {
                    features: features.to_vec(),
                    last_update: ts,
                }
            });
        if changed {
            self.touched.insert(node);
        }
    }

    /// Replaces the attribute set of `owner` with `attributes`.
    fn set_attributes(&self, owner: NodeRef, attributes: &[AttributeRef], ts: i64) -> Result<(), NearlineError> {
        let mut wanted = BTreeSet::new();
        for a in attributes {
            let relation = Relation::attribute(owner.node_type, a.node.node_type)
                .ok_or_else(|| NearlineError::MalformedEvent(format!("{owner} cannot link {}", a.node)))?;
            wanted.insert((EdgeType::Forward(relation), a.node));
        }
        for t in NodeType::ALL.into_iter().filter(|t| t.is_attribute()) {
            let current = self.neighbor_list(owner, t);
            for e in current.entries() {
                if !e.edge_type.is_reverse() && !wanted.contains(&(e.edge_type, e.node)) {
                    self.unlink(e.edge_type, owner, e.node);
                }
            }
        }
        for a in attributes {
            if let Some(f) = &a.features {
                self.put_features(a.node, f, ts);
            }
        }
        for (t, node) in wanted {
            self.link(t, owner, node, UNIT_WEIGHT, ts);
        }
        Ok(())
    }

    /// Removes tombstoned jobs from every store; returns them.
    pub fn compact(&self) -> Vec<NodeRef> {
        let jobs = self.closed_jobs();
        for &j in &jobs {
            for e in self.all_neighbors(j) {
                if let Some(mut l) = self.neighbors[NodeType::Job.index()].get_mut(&e.node) {
                    l.remove(j, e.edge_type.reversed());
                }
            }
            for store in &self.neighbors {
                store.remove(&j);
            }
            self.features.remove(&j);
            self.last_seen.remove(&j);
            self.closed.remove(&j);
        }
        jobs
    }
}

/// Applies one event to the stores and returns the member and job nodes
/// whose embeddings it invalidates.
pub fn ingest(event: &MarketplaceEvent, stores: &NearlineStores) -> Result<Vec<NodeRef>, NearlineError> {
    event
        .validate(&stores.schema)
        .map_err(NearlineError::MalformedEvent)?;
    let key = event.partition_key;
    let ts = event.ts;
    let closed_job = match &event.body {
        EventBody::JobClosed { .. } => None,
        EventBody::JobCreated { job, .. } | EventBody::SeekerEngagement { job, .. } => Some(*job),
        EventBody::RecruiterInteraction { job, .. } => Some(*job),
        EventBody::MemberAttributesUpdated { .. } => None,
    };
    if let Some(j) = closed_job {
        if stores.is_closed(j, ts) {
            return Err(NearlineError::Tombstoned(j));
        }
    }
    {
        let mut last = stores.last_seen.entry(key).or_insert(i64::MIN);
        if ts < *last {
            return Err(NearlineError::StaleEvent {
                key,
                ts,
                last_update: *last,
            });
        }
        *last = ts;
    }
    let dirty = match &event.body {
        EventBody::JobCreated {
            job,
            features,
            attributes,
        } => {
            stores.put_features(*job, features, ts);
            stores.set_attributes(*job, attributes, ts)?;
            vec![*job]
        }
        EventBody::MemberAttributesUpdated {
            member,
            features,
            attributes,
        } => {
            stores.put_features(*member, features, ts);
            stores.set_attributes(*member, attributes, ts)?;
            vec![*member]
        }
        EventBody::SeekerEngagement { member, job, action } => {
            stores.link(Relation::SeekerEngagement.into(), *member, *job, action.weight(), ts);
            vec![*member, *job]
        }
        EventBody::RecruiterInteraction { job, member } => {
            stores.link(Relation::RecruiterInteraction.into(), *job, *member, UNIT_WEIGHT, ts);
            vec![*member, *job]
        }
        EventBody::JobClosed { job } => {
            stores.close(*job, ts);
            Vec::new()
        }
    };
    Ok(dirty)
}

/// The stores seen through the sampler's neighbor interface.
pub struct StoreNeighbors<'a> {
    pub stores: &'a NearlineStores,
    pub edge_types_per_hop: &'a [EdgeTypeSet],
}

impl NeighborSource for StoreNeighbors<'_> {
    fn candidates(&self, node: NodeRef, hop: usize, out: &mut Vec<Neighbor>) {
        let Some(&allowed) = self.edge_types_per_hop.get(hop) else {
            return;
        };
        for store in &self.stores.neighbors {
            if let Some(l) = store.get(&node) {
                out.extend(
                    l.entries()
                        .iter()
                        .filter(|e| allowed.contains(e.edge_type))
                        .map(|e| Neighbor {
                            node: e.node,
                            weight: e.weight,
                        }),
                );
            }
        }
    }

    fn features(&self, node: NodeRef) -> Option<FeatureVector> {
        self.stores.features(node)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nearline::event::Action;

    fn stores(cap: usize) -> NearlineStores {
        NearlineStores::new(GraphSchema::uniform(2), cap)
    }

    fn created(ts: i64, job: u64, skills: &[u64]) -> MarketplaceEvent {
        MarketplaceEvent::new(
            ts,
            EventBody::JobCreated {
                job: NodeRef::job(job),
                features: vec![job as f32, 1.0],
                attributes: skills
                    .iter()
                    .map(|&s| AttributeRef {
                        node: NodeRef::skill(s),
                        features: Some(vec![0.5, s as f32]),
                    })
                    .collect(),
            },
        )
    }

    fn engage(ts: i64, m: u64, j: u64, action: Action) -> MarketplaceEvent {
        MarketplaceEvent::new(
            ts,
            EventBody::SeekerEngagement {
                member: NodeRef::member(m),
                job: NodeRef::job(j),
                action,
            },
        )
    }

    #[test]
    fn job_created_writes_through() {
        let s = stores(8);
        let dirty = ingest(&created(1, 9, &[1]), &s).unwrap();
        assert_eq!(dirty, vec![NodeRef::job(9)]);
        assert!(s.features(NodeRef::job(9)).is_some());
        let skills = s.neighbor_list(NodeRef::job(9), NodeType::Skill);
        assert_eq!(skills.entries().len(), 1);
        assert_eq!(skills.entries()[0].node, NodeRef::skill(1));
        assert_eq!(s.neighbor_list(NodeRef::skill(1), NodeType::Job).len(), 1);
    }

    #[test]
    fn engagement_is_reciprocal_and_deduplicated() {
        let s = stores(8);
        let dirty = ingest(&engage(1, 3, 9, Action::Apply), &s).unwrap();
        assert_eq!(dirty, vec![NodeRef::member(3), NodeRef::job(9)]);
        assert_eq!(s.neighbor_list(NodeRef::job(9), NodeType::Member).len(), 1);
        assert_eq!(s.neighbor_list(NodeRef::member(3), NodeType::Job).len(), 1);
        ingest(&engage(2, 3, 9, Action::Click), &s).unwrap();
        let l = s.neighbor_list(NodeRef::job(9), NodeType::Member);
        assert_eq!(l.len(), 1);
        assert_eq!(l.entries()[0].last_update, 2);
        assert_eq!(l.entries()[0].weight, 1.0);
    }

    #[test]
    fn stale_and_tombstoned_events_are_rejected() {
        let s = stores(8);
        ingest(&engage(10, 1, 9, Action::Save), &s).unwrap();
        assert!(matches!(
            ingest(&engage(5, 2, 9, Action::Save), &s),
            Err(NearlineError::StaleEvent { .. })
        ));
        let close = MarketplaceEvent::new(20, EventBody::JobClosed { job: NodeRef::job(9) });
        assert!(ingest(&close, &s).unwrap().is_empty());
        assert!(matches!(
            ingest(&engage(30, 2, 9, Action::Save), &s),
            Err(NearlineError::Tombstoned(_))
        ));
    }

    #[test]
    fn capacity_evicts_oldest() {
        let s = stores(3);
        for m in 0..10 {
            ingest(&engage(m as i64, m, 1, Action::Click), &s).unwrap();
        }
        let l = s.neighbor_list(NodeRef::job(1), NodeType::Member);
        let kept: Vec<u64> = l.entries().iter().map(|e| e.node.id).collect();
        assert_eq!(kept, vec![7, 8, 9]);
        assert_eq!(s.max_list_len(), 3);
    }

    #[test]
    fn eviction_is_order_independent() {
        // Interleavings of per-key ordered streams must converge.
        let a = [engage(1, 1, 1, Action::Apply), engage(3, 1, 1, Action::Click)];
        let b = [engage(2, 1, 2, Action::Save)];
        let one = stores(1);
        for e in a.iter().chain(&b) {
            ingest(e, &one).unwrap();
        }
        let two = stores(1);
        for e in [&a[0], &b[0], &a[1]] {
            ingest(e, &two).unwrap();
        }
        let l1 = one.neighbor_list(NodeRef::member(1), NodeType::Job);
        let l2 = two.neighbor_list(NodeRef::member(1), NodeType::Job);
        assert_eq!(l1, l2);
        assert_eq!(l1.entries()[0].weight, 1.0);
    }

    #[test]
    fn attribute_update_replaces_links() {
        let s = stores(8);
        let upd = |ts, skills: &[u64]| {
            MarketplaceEvent::new(
                ts,
                EventBody::MemberAttributesUpdated {
                    member: NodeRef::member(1),
                    features: vec![0.0, 0.0],
                    attributes: skills
                        .iter()
                        .map(|&k| AttributeRef {
                            node: NodeRef::skill(k),
                            features: None,
                        })
                        .collect(),
                },
            )
        };
        ingest(&upd(1, &[1, 2]), &s).unwrap();
        ingest(&upd(2, &[2, 3]), &s).unwrap();
        let ids: Vec<u64> = s
            .neighbor_list(NodeRef::member(1), NodeType::Skill)
            .entries()
            .iter()
            .map(|e| e.node.id)
            .collect();
        assert_eq!(ids.len(), 2);
        assert!(ids.contains(&2) && ids.contains(&3));
        assert!(s.neighbor_list(NodeRef::skill(1), NodeType::Member).is_empty());
    }

    #[test]
    fn compaction_removes_closed_jobs() {
        let s = stores(8);
        ingest(&created(1, 9, &[1]), &s).unwrap();
        ingest(&engage(2, 3, 9, Action::Apply), &s).unwrap();
        ingest(&MarketplaceEvent::new(3, EventBody::JobClosed { job: NodeRef::job(9) }), &s).unwrap();
        assert_eq!(s.compact(), vec![NodeRef::job(9)]);
        assert!(s.features(NodeRef::job(9)).is_none());
        assert!(s.neighbor_list(NodeRef::member(3), NodeType::Job).is_empty());
        assert!(s.neighbor_list(NodeRef::skill(1), NodeType::Job).is_empty());
    }
}
