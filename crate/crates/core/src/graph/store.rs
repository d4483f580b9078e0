use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use super::types::{EdgeType, FeatureVector, GraphSchema, NodeRef, NodeType};
use super::GraphError;

/// One adjacency entry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub node: NodeRef,
    pub weight: f64,
}

/// An edge as inserted, before reciprocal expansion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeRecord {
    pub edge_type: EdgeType,
    pub src: NodeRef,
    pub dst: NodeRef,
    pub weight: f64,
    pub reciprocal: bool,
}

/// A single mutation of a [`HeteroGraph`].
#[derive(Debug, Clone, PartialEq)]
pub enum Mutation {
    AddNode {
        node: NodeRef,
        features: FeatureVector,
    },
    AddEdge(EdgeRecord),
    RemoveNode(NodeRef),
}

type AdjacencyList = Vec<(EdgeType, Vec<Neighbor>)>;

/// In-memory heterogeneous marketplace graph.
///
/// Adjacency is kept per source node and edge type in insertion order. The
/// inserted edge log is retained next to it so the graph can be serialized
/// and rebuilt with identical adjacency order.
#[derive(Debug, Clone, Default)]
pub struct HeteroGraph {
    schema: GraphSchema,
    features: HashMap<NodeRef, FeatureVector>,
    adjacency: HashMap<NodeRef, AdjacencyList>,
    edges: Vec<EdgeRecord>,
    node_counts: [usize; NodeType::COUNT],
    version: u64,
}

impl PartialEq for HeteroGraph {
    /// Structural equality: nodes, bit-identical features and edge log.
    /// The snapshot version is not part of a graph's identity.
    fn eq(&self, other: &Self) -> bool {
        self.features.len() == other.features.len()
            && self.features.iter().all(|(n, f)| {
                other.features.get(n).is_some_and(|g| {
                    f.len() == g.len() && f.iter().zip(g).all(|(a, b)| a.to_bits() == b.to_bits())
                })
            })
            && self.edges.len() == other.edges.len()
            && self.edges.iter().zip(&other.edges).all(|(a, b)| {
                a.edge_type == b.edge_type
                    && a.src == b.src
                    && a.dst == b.dst
                    && a.weight.to_bits() == b.weight.to_bits()
                    && a.reciprocal == b.reciprocal
            })
    }
}

impl HeteroGraph {
    pub fn new(schema: GraphSchema) -> Self {
        Self {
            schema,
            ..Default::default()
        }
    }

    pub fn schema(&self) -> &GraphSchema {
        &self.schema
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn node_count(&self) -> usize {
        self.features.len()
    }

    pub fn count_of(&self, node_type: NodeType) -> usize {
        self.node_counts[node_type.index()]
    }

    /// Number of stored directed edges, reciprocal copies included.
    pub fn edge_count(&self) -> usize {
        self.edges
            .iter()
            .map(|e| if e.reciprocal { 2 } else { 1 })
            .sum()
    }

    pub fn edge_log(&self) -> &[EdgeRecord] {
        &self.edges
    }

    pub fn contains(&self, node: NodeRef) -> bool {
        self.features.contains_key(&node)
    }

    pub fn features(&self, node: NodeRef) -> Option<&[f32]> {
        self.features.get(&node).map(Vec::as_slice)
    }

    /// All nodes, sorted ascending.
    pub fn nodes(&self) -> Vec<NodeRef> {
        let mut v: Vec<_> = self.features.keys().copied().collect();
        v.sort_unstable();
        v
    }

    /// Nodes of one type, sorted ascending.
    pub fn nodes_of(&self, node_type: NodeType) -> Vec<NodeRef> {
        let mut v: Vec<_> = self
            .features
            .keys()
            .filter(|n| n.node_type == node_type)
            .copied()
            .collect();
        v.sort_unstable();
        v
    }

    pub fn add_node(&mut self, node: NodeRef, features: FeatureVector) -> Result<(), GraphError> {
        self.insert_node(node, features)?;
        self.version += 1;
        Ok(())
    }

    pub fn add_edge(
        &mut self,
        edge_type: EdgeType,
        src: NodeRef,
        dst: NodeRef,
        weight: f64,
        reciprocal: bool,
    ) -> Result<(), GraphError> {
        self.insert_edge(EdgeRecord {
            edge_type,
            src,
            dst,
            weight,
            reciprocal,
        })?;
        self.version += 1;
        Ok(())
    }

    /// Removes a node and every edge touching it.
    pub fn remove_node(&mut self, node: NodeRef) -> Result<(), GraphError> {
        if !self.contains(node) {
            return Err(GraphError::MissingNode(node));
        }
        self.retain_nodes(|n| n != node);
        self.version += 1;
        Ok(())
    }

    /// Copy of this graph with every node of `node_type` (and its edges) removed.
    pub fn without_node_type(&self, node_type: NodeType) -> HeteroGraph {
        let mut g = self.clone();
        g.retain_nodes(|n| n.node_type != node_type);
        g.version += 1;
        g
    }

    /// Applies a batch of mutations all-or-nothing; the version bumps once.
    pub fn apply_batch(&mut self, batch: &[Mutation]) -> Result<(), GraphError> {
        let mut next = self.clone();
        for m in batch {
            match m {
                Mutation::AddNode { node, features } => next.insert_node(*node, features.clone())?,
                Mutation::AddEdge(e) => next.insert_edge(*e)?,
                Mutation::RemoveNode(n) => {
                    if !next.contains(*n) {
                        return Err(GraphError::MissingNode(*n));
                    }
                    let n = *n;
                    next.retain_nodes(|x| x != n);
                }
            }
        }
        next.version = self.version + 1;
        *self = next;
        Ok(())
    }

    /// Stored adjacency of `node` under `edge_type`, in insertion order.
    pub fn neighbors(&self, node: NodeRef, edge_type: EdgeType) -> Result<&[Neighbor], GraphError> {
        if !self.contains(node) {
            return Err(GraphError::MissingNode(node));
        }
        Ok(self
            .adjacency
            .get(&node)
            .and_then(|lists| lists.iter().find(|(t, _)| *t == edge_type))
            .map(|(_, l)| l.as_slice())
            .unwrap_or(&[]))
    }

    /// Every (edge type, adjacency) pair stored for `node`.
    pub fn adjacency(&self, node: NodeRef) -> &[(EdgeType, Vec<Neighbor>)] {
        self.adjacency.get(&node).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Out-degree of `node` under `edge_type`; zero for unknown nodes.
    pub fn degree(&self, node: NodeRef, edge_type: EdgeType) -> usize {
        self.neighbors(node, edge_type).map_or(0, <[_]>::len)
    }

    /// Iterates (src, edge type, neighbor) over every stored directed edge.
    pub fn iter_edges(&self) -> impl Iterator<Item = (NodeRef, EdgeType, &Neighbor)> {
        self.adjacency.iter().flat_map(|(src, lists)| {
            lists
                .iter()
                .flat_map(move |(t, l)| l.iter().map(move |n| (*src, *t, n)))
        })
    }

    /// Full-scan check that every stored edge respects its signature and
    /// every endpoint exists.
    pub fn check_schema_closure(&self) -> Result<(), GraphError> {
        for (src, t, n) in self.iter_edges() {
            if t.signature() != (src.node_type, n.node.node_type) {
                return Err(GraphError::SignatureMismatch {
                    edge_type: t,
                    src,
                    dst: n.node,
                });
            }
            if !self.contains(n.node) {
                return Err(GraphError::MissingEndpoint(n.node));
            }
        }
        Ok(())
    }

    fn insert_node(&mut self, node: NodeRef, features: FeatureVector) -> Result<(), GraphError> {
        let expected = self.schema.dim(node.node_type);
        if features.len() != expected {
            return Err(GraphError::DimensionMismatch {
                node,
                expected,
                got: features.len(),
            });
        }
        if features.iter().any(|x| !x.is_finite()) {
            return Err(GraphError::NonFiniteFeature(node));
        }
        if self.features.insert(node, features).is_none() {
            self.node_counts[node.node_type.index()] += 1;
        }
        Ok(())
    }

    fn insert_edge(&mut self, e: EdgeRecord) -> Result<(), GraphError> {
        if e.edge_type.signature() != (e.src.node_type, e.dst.node_type) {
            return Err(GraphError::SignatureMismatch {
                edge_type: e.edge_type,
                src: e.src,
                dst: e.dst,
            });
        }
        for n in [e.src, e.dst] {
            if !self.contains(n) {
                return Err(GraphError::MissingEndpoint(n));
            }
        }
        if !e.weight.is_finite() || e.weight < 0.0 {
            return Err(GraphError::InvalidWeight(e.weight));
        }
        self.push_adjacency(e.src, e.edge_type, e.dst, e.weight);
        if e.reciprocal {
            self.push_adjacency(e.dst, e.edge_type.reversed(), e.src, e.weight);
        }
        self.edges.push(e);
        Ok(())
    }

    fn push_adjacency(&mut self, src: NodeRef, edge_type: EdgeType, dst: NodeRef, weight: f64) {
        let lists = self.adjacency.entry(src).or_default();
        let neighbor = Neighbor { node: dst, weight };
        match lists.iter_mut().find(|(t, _)| *t == edge_type) {
            Some((_, l)) => l.push(neighbor),
            None => lists.push((edge_type, vec![neighbor])),
        }
    }

    fn retain_nodes(&mut self, keep: impl Fn(NodeRef) -> bool) {
        self.features.retain(|n, _| keep(*n));
        self.node_counts = [0; NodeType::COUNT];
        for n in self.features.keys() {
            self.node_counts[n.node_type.index()] += 1;
        }
        let edges = std::mem::take(&mut self.edges);
        self.adjacency.clear();
        for e in edges.into_iter().filter(|e| keep(e.src) && keep(e.dst)) {
            self.push_adjacency(e.src, e.edge_type, e.dst, e.weight);
            if e.reciprocal {
                self.push_adjacency(e.dst, e.edge_type.reversed(), e.src, e.weight);
            }
            self.edges.push(e);
        }
    }
}

/// Single-writer, many-reader publication of immutable graph snapshots.
///
/// Readers clone an `Arc` to the current snapshot and never observe a
/// partially applied batch; the writer builds the next snapshot off to the
/// side and swaps it in.
#[derive(Debug, Default)]
pub struct GraphHandle {
    current: RwLock<Arc<HeteroGraph>>,
}

impl GraphHandle {
    pub fn new(graph: HeteroGraph) -> Self {
        Self {
            current: RwLock::new(Arc::new(graph)),
        }
    }

    pub fn snapshot(&self) -> Arc<HeteroGraph> {
        self.current.read().expect("graph lock poisoned").clone()
    }

    /// Applies `batch` to a copy of the current snapshot and publishes it.
    pub fn apply(&self, batch: &[Mutation]) -> Result<u64, GraphError> {
        let mut guard = self.current.write().expect("graph lock poisoned");
        let mut next = HeteroGraph::clone(&guard);
        next.apply_batch(batch)?;
        let version = next.version();
        *guard = Arc::new(next);
        Ok(version)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Relation;

    fn schema4() -> GraphSchema {
        GraphSchema::uniform(4)
    }

    fn two_node_graph() -> HeteroGraph {
        let mut g = HeteroGraph::new(schema4());
        g.add_node(NodeRef::member(1), vec![0.0; 4]).unwrap();
        g.add_node(NodeRef::skill(7), vec![1.0; 4]).unwrap();
        g.add_node(NodeRef::job(2), vec![2.0; 4]).unwrap();
        g
    }

    #[test]
    fn add_node_counts_and_replaces() {
        let mut g = HeteroGraph::new(schema4());
        g.add_node(NodeRef::member(1), vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(g.node_count(), 1);
        let v = g.version();
        g.add_node(NodeRef::member(1), vec![5.0; 4]).unwrap();
        assert_eq!(g.node_count(), 1);
        assert_eq!(g.count_of(NodeType::Member), 1);
        assert_eq!(g.features(NodeRef::member(1)).unwrap(), &[5.0; 4]);
        assert!(g.version() > v);
    }

    #[test]
    fn add_node_rejects_bad_features() {
        let mut g = HeteroGraph::new(schema4());
        assert!(matches!(
            g.add_node(NodeRef::member(1), vec![0.0; 3]),
            Err(GraphError::DimensionMismatch { expected: 4, got: 3, .. })
        ));
        assert!(matches!(
            g.add_node(NodeRef::member(1), vec![0.0, f32::NAN, 0.0, 0.0]),
            Err(GraphError::NonFiniteFeature(_))
        ));
        assert_eq!(g.node_count(), 0);
    }

    #[test]
    fn reciprocal_edge_creates_reverse() {
        let mut g = two_node_graph();
        let v = g.version();
        g.add_edge(Relation::MemberSkill.into(), NodeRef::member(1), NodeRef::skill(7), 1.5, true)
            .unwrap();
        assert_eq!(g.version(), v + 1);
        let fwd = g.neighbors(NodeRef::member(1), Relation::MemberSkill.into()).unwrap();
        assert_eq!(fwd, &[Neighbor { node: NodeRef::skill(7), weight: 1.5 }]);
        let rev = g
            .neighbors(NodeRef::skill(7), EdgeType::Reverse(Relation::MemberSkill))
            .unwrap();
        assert_eq!(rev, &[Neighbor { node: NodeRef::member(1), weight: 1.5 }]);
        assert_eq!(g.edge_count(), 2);
    }

    #[test]
    fn add_edge_errors() {
        let mut g = two_node_graph();
        assert!(matches!(
            g.add_edge(Relation::MemberSkill.into(), NodeRef::job(2), NodeRef::skill(7), 1.0, false),
            Err(GraphError::SignatureMismatch { .. })
        ));
        assert!(matches!(
            g.add_edge(
                Relation::SeekerEngagement.into(),
                NodeRef::member(1),
                NodeRef::job(2),
                -1.0,
                false
            ),
            Err(GraphError::InvalidWeight(_))
        ));
        assert!(matches!(
            g.add_edge(
                Relation::SeekerEngagement.into(),
                NodeRef::member(1),
                NodeRef::job(99),
                1.0,
                false
            ),
            Err(GraphError::MissingEndpoint(n)) if n == NodeRef::job(99)
        ));
        assert_eq!(g.edge_count(), 0);
    }

    #[test]
    fn neighbors_readback_and_empty() {
        let mut g = two_node_graph();
        g.add_node(NodeRef::skill(8), vec![0.0; 4]).unwrap();
        let et: EdgeType = Relation::MemberSkill.into();
        g.add_edge(et, NodeRef::member(1), NodeRef::skill(8), 1.0, false).unwrap();
        g.add_edge(et, NodeRef::member(1), NodeRef::skill(7), 1.0, false).unwrap();
        let ids: Vec<_> = g
            .neighbors(NodeRef::member(1), et)
            .unwrap()
            .iter()
            .map(|n| n.node)
            .collect();
        assert_eq!(ids, vec![NodeRef::skill(8), NodeRef::skill(7)]);
        assert!(g
            .neighbors(NodeRef::member(1), Relation::MemberTitle.into())
            .unwrap()
            .is_empty());
        assert!(matches!(
            g.neighbors(NodeRef::member(5), et),
            Err(GraphError::MissingNode(_))
        ));
    }

    #[test]
    fn remove_node_drops_incident_edges() {
        let mut g = two_node_graph();
        g.add_edge(
            Relation::SeekerEngagement.into(),
            NodeRef::member(1),
            NodeRef::job(2),
            1.0,
            true,
        )
        .unwrap();
        g.remove_node(NodeRef::job(2)).unwrap();
        assert!(!g.contains(NodeRef::job(2)));
        assert_eq!(g.edge_count(), 0);
        assert!(g
            .neighbors(NodeRef::member(1), Relation::SeekerEngagement.into())
            .unwrap()
            .is_empty());
        g.check_schema_closure().unwrap();
    }

    #[test]
    fn batch_is_all_or_nothing() {
        let mut g = two_node_graph();
        let v = g.version();
        let bad = [
            Mutation::AddNode {
                node: NodeRef::member(3),
                features: vec![0.0; 4],
            },
            Mutation::AddEdge(EdgeRecord {
                edge_type: Relation::MemberSkill.into(),
                src: NodeRef::member(3),
                dst: NodeRef::skill(404),
                weight: 1.0,
                reciprocal: true,
            }),
        ];
        assert!(g.apply_batch(&bad).is_err());
        assert!(!g.contains(NodeRef::member(3)));
        assert_eq!(g.version(), v);

        let good = [
            Mutation::AddNode {
                node: NodeRef::member(3),
                features: vec![0.0; 4],
            },
            Mutation::AddEdge(EdgeRecord {
                edge_type: Relation::MemberSkill.into(),
                src: NodeRef::member(3),
                dst: NodeRef::skill(7),
                weight: 1.0,
                reciprocal: true,
            }),
        ];
        g.apply_batch(&good).unwrap();
        assert_eq!(g.version(), v + 1);
    }

    #[test]
    fn handle_publishes_whole_batches() {
        let handle = GraphHandle::new(two_node_graph());
        let before = handle.snapshot();
        let v = handle
            .apply(&[Mutation::AddNode {
                node: NodeRef::member(9),
                features: vec![0.0; 4],
            }])
            .unwrap();
        assert!(!before.contains(NodeRef::member(9)));
        let after = handle.snapshot();
        assert!(after.contains(NodeRef::member(9)));
        assert_eq!(after.version(), v);
        assert!(v > before.version());
    }
}
