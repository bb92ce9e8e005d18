//! Multiplex graph data model: aligned node set, one undirected simple
//! graph per layer, optional node attributes.
//!
//! Edges are stored canonically (lesser endpoint first, sorted, deduplicated)
//! and mirrored into per-node sorted neighbor lists. Construction is lenient
//! about raw input — self-loops and duplicates are dropped and counted in
//! [`LoadStats`] — but everything observable afterwards is strict.

use alloc::collections::BTreeSet;
use alloc::vec;
use alloc::vec::Vec;

use crate::matrix::DenseMatrix;

#[derive(Clone, Debug, PartialEq)]
pub enum GraphError {
    /// An edge endpoint is ≥ num_nodes.
    NodeOutOfRange {
        layer: usize,
        node: u32,
        num_nodes: usize,
    },
    /// A multiplex graph needs at least two layers.
    TooFewLayers(usize),
    /// Attribute matrix must have one row per node.
    AttributeRowMismatch { expected: usize, found: usize },
}

impl core::fmt::Display for GraphError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            GraphError::NodeOutOfRange {
                layer,
                node,
                num_nodes,
            } => write!(
                f,
                "layer {layer}: node {node} out of range for {num_nodes} nodes"
            ),
            GraphError::TooFewLayers(n) => {
                write!(f, "multiplex graph needs >= 2 layers, got {n}")
            }
            GraphError::AttributeRowMismatch { expected, found } => {
                write!(f, "attribute matrix has {found} rows, expected {expected}")
            }
        }
    }
}

impl core::error::Error for GraphError {}

/// Per-layer counts of what construction dropped or kept.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LayerLoadStats {
    pub kept: usize,
    pub self_loops_dropped: usize,
    pub duplicates_dropped: usize,
}

/// Construction report for a whole multiplex graph.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LoadStats {
    pub layers: Vec<LayerLoadStats>,
}

impl LoadStats {
    pub fn total_dropped(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.self_loops_dropped + l.duplicates_dropped)
            .sum()
    }
}

/// One layer: an undirected simple graph over the shared node set.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LayerGraph {
    layer_id: usize,
    num_nodes: usize,
    /// Canonical (u < v) pairs, sorted ascending.
    edges: Vec<(u32, u32)>,
    /// Sorted neighbor list per node.
    neighbors: Vec<Vec<u32>>,
}

impl LayerGraph {
    /// Build from raw pairs, dropping self-loops and duplicates.
    pub fn from_raw_edges(
        layer_id: usize,
        num_nodes: usize,
        raw: &[(u32, u32)],
    ) -> Result<(Self, LayerLoadStats), GraphError> {
        let mut stats = LayerLoadStats::default();
        let mut canon: BTreeSet<(u32, u32)> = BTreeSet::new();
        for &(a, b) in raw {
            for node in [a, b] {
                if node as usize >= num_nodes {
                    return Err(GraphError::NodeOutOfRange {
                        layer: layer_id,
                        node,
                        num_nodes,
                    });
                }
            }
            if a == b {
                stats.self_loops_dropped += 1;
                continue;
            }
            let e = if a < b { (a, b) } else { (b, a) };
            if !canon.insert(e) {
                stats.duplicates_dropped += 1;
            }
        }
        stats.kept = canon.len();
        Ok((
            Self::from_canonical(layer_id, num_nodes, canon.into_iter().collect()),
            stats,
        ))
    }

    /// Build from pairs already known to be canonical, distinct, in-range
    /// and sorted (e.g. a subset of another layer's edges).
    pub fn from_canonical(layer_id: usize, num_nodes: usize, edges: Vec<(u32, u32)>) -> Self {
        debug_assert!(edges.windows(2).all(|w| w[0] < w[1]), "edges not sorted/unique");
        debug_assert!(edges.iter().all(|&(u, v)| u < v && (v as usize) < num_nodes));
        let mut neighbors = vec![Vec::new(); num_nodes];
        for &(u, v) in &edges {
            neighbors[u as usize].push(v);
            neighbors[v as usize].push(u);
        }
        for list in neighbors.iter_mut() {
            list.sort_unstable();
        }
        LayerGraph {
            layer_id,
            num_nodes,
            edges,
            neighbors,
        }
    }

    pub fn layer_id(&self) -> usize {
        self.layer_id
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(u32, u32)] {
        &self.edges
    }

    pub fn neighbors(&self, node: u32) -> &[u32] {
        &self.neighbors[node as usize]
    }

    pub fn degree(&self, node: u32) -> usize {
        self.neighbors[node as usize].len()
    }

    pub fn has_edge(&self, u: u32, v: u32) -> bool {
        if u == v {
            return false;
        }
        self.neighbors[u as usize].binary_search(&v).is_ok()
    }

    /// Number of unordered node pairs that are not edges.
    pub fn non_edge_count(&self) -> usize {
        let n = self.num_nodes;
        n * (n - 1) / 2 - self.edges.len()
    }

    /// Same node set, edge set restricted to `keep` (which must be a subset
    /// of this layer's edges, canonical but in any order).
    pub fn subgraph(&self, keep: &[(u32, u32)]) -> LayerGraph {
        let mut edges: Vec<(u32, u32)> = keep.to_vec();
        edges.sort_unstable();
        edges.dedup();
        debug_assert!(edges.iter().all(|&(u, v)| self.has_edge(u, v)));
        LayerGraph::from_canonical(self.layer_id, self.num_nodes, edges)
    }
}

/// The full multiplex network: layers over one node index space, plus an
/// optional attribute matrix (num_nodes x d0).
#[derive(Clone, Debug)]
pub struct MultiplexGraph {
    num_nodes: usize,
    layers: Vec<LayerGraph>,
    attributes: Option<DenseMatrix>,
}

impl MultiplexGraph {
    pub fn new(
        num_nodes: usize,
        layer_edges: &[Vec<(u32, u32)>],
        attributes: Option<DenseMatrix>,
    ) -> Result<(Self, LoadStats), GraphError> {
        if layer_edges.len() < 2 {
            return Err(GraphError::TooFewLayers(layer_edges.len()));
        }
        if let Some(attrs) = &attributes {
            if attrs.rows() != num_nodes {
                return Err(GraphError::AttributeRowMismatch {
                    expected: num_nodes,
                    found: attrs.rows(),
                });
            }
        }
        let mut layers = Vec::with_capacity(layer_edges.len());
        let mut stats = LoadStats::default();
        for (layer_id, raw) in layer_edges.iter().enumerate() {
            let (layer, layer_stats) = LayerGraph::from_raw_edges(layer_id, num_nodes, raw)?;
            layers.push(layer);
            stats.layers.push(layer_stats);
        }
        Ok((
            MultiplexGraph {
                num_nodes,
                layers,
                attributes,
            },
            stats,
        ))
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn layers(&self) -> &[LayerGraph] {
        &self.layers
    }

    pub fn layer(&self, r: usize) -> &LayerGraph {
        &self.layers[r]
    }

    pub fn attributes(&self) -> Option<&DenseMatrix> {
        self.attributes.as_ref()
    }

    /// Width of the attribute block (0 when the graph has no attributes).
    pub fn attr_width(&self) -> usize {
        self.attributes.as_ref().map_or(0, |a| a.cols())
    }
}

/// Initial node features for one layer: each row is the node's attribute
/// vector concatenated with its binary adjacency row in `basis`.
///
/// `basis` must be built over the same node set; for training it is the
/// layer's train-edge subgraph so that held-out edges never appear in the
/// features.
pub fn build_node_features(graph: &MultiplexGraph, basis: &LayerGraph) -> DenseMatrix {
    let n = graph.num_nodes();
    assert_eq!(basis.num_nodes(), n, "basis node set mismatch");
    let d0 = graph.attr_width();
    let mut features = DenseMatrix::zeros(n, d0 + n);
    for node in 0..n {
        let row = features.row_mut(node);
        if let Some(attrs) = graph.attributes() {
            row[..d0].copy_from_slice(attrs.row(node));
        }
        for &nb in basis.neighbors(node as u32) {
            row[d0 + nb as usize] = 1.0;
        }
    }
    features
}
