use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::ops::Range;

use crate::graph::{FeatureVector, NodeRef};

/// One occurrence of a node in a compute graph.
#[derive(Debug, Clone, PartialEq)]
pub struct CgNode {
    pub node: NodeRef,
    /// Index of the sampling node in the previous layer; 0 for the root.
    pub parent: usize,
    /// Weight of the edge it was sampled through; 0 for the root.
    pub weight: f64,
    pub features: FeatureVector,
}

/// Layered neighborhood sample around a query node.
///
/// Layer 0 holds the query node only. Nodes of layer `l > 0` are grouped by
/// parent: their parent indices never decrease, so the children of each node
/// form a contiguous range of the next layer.
#[derive(Debug, Clone, PartialEq)]
pub struct ComputeGraph {
    layers: Vec<Vec<CgNode>>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ComputeGraphError {
    #[error("compute graph needs exactly one root node")]
    BadRoot,
    #[error("layer {layer} node {index} has parent {parent} outside the previous layer")]
    BadParent {
        layer: usize,
        index: usize,
        parent: usize,
    },
    #[error("layer {layer} is not grouped by parent")]
    Ungrouped { layer: usize },
}

impl ComputeGraph {
    /// A compute graph with only the query node and `hops` empty layers.
    pub fn root_only(node: NodeRef, features: FeatureVector, hops: usize) -> Self {
        let mut layers = vec![Vec::new(); hops + 1];
        layers[0].push(CgNode {
            node,
            parent: 0,
            weight: 0.0,
            features,
        });
        Self { layers }
    }

    pub fn from_layers(layers: Vec<Vec<CgNode>>) -> Result<Self, ComputeGraphError> {
        if layers.first().map(Vec::len) != Some(1) {
            return Err(ComputeGraphError::BadRoot);
        }
        for l in 1..layers.len() {
            let prev = layers[l - 1].len();
            let mut last = 0;
            for (i, n) in layers[l].iter().enumerate() {
                if n.parent >= prev {
                    return Err(ComputeGraphError::BadParent {
                        layer: l,
                        index: i,
                        parent: n.parent,
                    });
                }
                if n.parent < last {
                    return Err(ComputeGraphError::Ungrouped { layer: l });
                }
                last = n.parent;
            }
        }
        Ok(Self { layers })
    }

    /// Appends a layer whose parents index into the current last layer.
    pub fn push_layer(&mut self, layer: Vec<CgNode>) -> Result<(), ComputeGraphError> {
        let mut layers = std::mem::take(&mut self.layers);
        layers.push(layer);
        match Self::from_layers(layers) {
            Ok(cg) => {
                *self = cg;
                Ok(())
            }
            Err(e) => Err(e),
        }
    }

    pub fn root(&self) -> &CgNode {
        &self.layers[0][0]
    }

    pub fn layers(&self) -> &[Vec<CgNode>] {
        &self.layers
    }

    /// Number of sampled hops (layers beyond the root).
    pub fn hops(&self) -> usize {
        self.layers.len() - 1
    }

    pub fn len(&self) -> usize {
        self.layers.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// For each node of `layer`, the range of its children in `layer + 1`.
    pub fn child_ranges(&self, layer: usize) -> Vec<Range<usize>> {
        let n = self.layers[layer].len();
        let mut ranges = vec![0..0; n];
        let Some(next) = self.layers.get(layer + 1) else {
            return ranges;
        };
        let mut start = 0;
        for (v, range) in ranges.iter_mut().enumerate() {
            let mut end = start;
            while end < next.len() && next[end].parent == v {
                end += 1;
            }
            *range = start..end;
            start = end;
        }
        ranges
    }

    /// Stable content hash over node identities, parents, weights and features.
    pub fn fingerprint(&self) -> u64 {
        let mut h = DefaultHasher::new();
        self.layers.len().hash(&mut h);
        for layer in &self.layers {
            layer.len().hash(&mut h);
            for n in layer {
                n.node.hash(&mut h);
                n.parent.hash(&mut h);
                n.weight.to_bits().hash(&mut h);
                for f in &n.features {
                    f.to_bits().hash(&mut h);
                }
            }
        }
        h.finish()
    }

    /// Order-insensitive tree view: children sorted recursively, so two
    /// samples of the same neighborhood compare equal regardless of the
    /// order their sources listed neighbors in.
    pub fn canonical_tree(&self) -> CgTree {
        self.subtree(0, 0)
    }

    fn subtree(&self, layer: usize, index: usize) -> CgTree {
        let n = &self.layers[layer][index];
        let mut children: Vec<CgTree> = match self.layers.get(layer + 1) {
            Some(next) => next
                .iter()
                .enumerate()
                .filter(|(_, c)| c.parent == index)
                .map(|(i, _)| self.subtree(layer + 1, i))
                .collect(),
            None => Vec::new(),
        };
        children.sort_by(|a, b| a.cmp_key(b));
        CgTree {
            node: n.node,
            features: n.features.iter().map(|f| f.to_bits()).collect(),
            children,
        }
    }
}

/// Nested, canonically ordered form of a [`ComputeGraph`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CgTree {
    pub node: NodeRef,
    pub features: Vec<u32>,
    pub children: Vec<CgTree>,
}

impl CgTree {
    fn cmp_key(&self, other: &Self) -> std::cmp::Ordering {
        self.node
            .cmp(&other.node)
            .then_with(|| self.features.cmp(&other.features))
            .then_with(|| self.children.len().cmp(&other.children.len()))
            .then_with(|| {
                for (a, b) in self.children.iter().zip(&other.children) {
                    let o = a.cmp_key(b);
                    if o.is_ne() {
                        return o;
                    }
                }
                std::cmp::Ordering::Equal
            })
    }

    pub fn size(&self) -> usize {
        1 + self.children.iter().map(CgTree::size).sum::<usize>()
    }
}
