use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::graph::{EdgeType, HeteroGraph, NodeType};

/// Per-type node and edge counts and mean degrees.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GraphStats {
    pub nodes: BTreeMap<NodeType, usize>,
    /// Stored adjacency entries per edge type; a reciprocal edge adds one
    /// entry to its relation and one to the reverse type.
    pub edges: BTreeMap<EdgeType, usize>,
    /// Mean out-degree of nodes of a type over an edge type leaving it.
    pub mean_degree: BTreeMap<(NodeType, EdgeType), f64>,
}

impl GraphStats {
    pub fn node_count(&self, t: NodeType) -> usize {
        self.nodes.get(&t).copied().unwrap_or(0)
    }

    pub fn edge_count(&self, e: EdgeType) -> usize {
        self.edges.get(&e).copied().unwrap_or(0)
    }

    pub fn mean_degree(&self, t: NodeType, e: EdgeType) -> f64 {
        self.mean_degree.get(&(t, e)).copied().unwrap_or(0.0)
    }

    /// `key value` lines: `nodes.<type>`, `edges.<edge type>`,
    /// `mean_degree.<type>.<edge type>`.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for t in NodeType::ALL {
            let _ = writeln!(s, "nodes.{t} {}", self.node_count(t));
        }
        for e in EdgeType::all() {
            let _ = writeln!(s, "edges.{e} {}", self.edge_count(e));
        }
        for e in EdgeType::all() {
            let t = e.signature().0;
            let _ = writeln!(s, "mean_degree.{t}.{e} {:.6}", self.mean_degree(t, e));
        }
        s
    }
}

pub fn stats(graph: &HeteroGraph) -> GraphStats {
    let mut out = GraphStats::default();
    for t in NodeType::ALL {
        out.nodes.insert(t, graph.count_of(t));
    }
    for e in EdgeType::all() {
        out.edges.insert(e, 0);
    }
    for t in NodeType::ALL {
        for n in graph.nodes_of(t) {
            for (e, list) in graph.adjacency(n) {
                *out.edges.entry(*e).or_default() += list.len();
            }
        }
    }
    for e in EdgeType::all() {
        let t = e.signature().0;
        let n = out.node_count(t);
        let d = if n == 0 { 0.0 } else { out.edge_count(e) as f64 / n as f64 };
        out.mean_degree.insert((t, e), d);
    }
    out
}
