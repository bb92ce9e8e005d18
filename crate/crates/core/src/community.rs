//! Community detection (two-phase Louvain) and weak/strong tie labeling.
//!
//! The local phase visits nodes in a seed-shuffled order and applies only
//! strictly positive modularity gains (ties keep the node where it is), the
//! coarsening phase collapses communities into weighted super-nodes, and the
//! two alternate until a full local pass makes no move. Resolution is fixed
//! at 1.0. Isolated nodes never gain from joining anything and therefore end
//! up as singleton communities.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::graph::LayerGraph;
use crate::seeds;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CommunityError {
    /// Louvain needs at least one edge to say anything.
    EmptyLayer { layer: usize },
    /// label_ties met an endpoint the partition does not cover.
    NodeNotCovered { node: u32 },
}

impl core::fmt::Display for CommunityError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            CommunityError::EmptyLayer { layer } => {
                write!(f, "layer {layer} has no edges to cluster")
            }
            CommunityError::NodeNotCovered { node } => {
                write!(f, "node {node} not covered by the partition")
            }
        }
    }
}

impl core::error::Error for CommunityError {}

/// A node-to-community assignment for one layer, with its modularity.
#[derive(Clone, Debug, PartialEq)]
pub struct CommunityPartition {
    layer_id: usize,
    /// assignment[n] = community id of node n; ids are compact, ordered by
    /// first appearance.
    assignment: Vec<u32>,
    modularity: f64,
    num_communities: usize,
}

impl CommunityPartition {
    /// Wrap an externally supplied assignment (one entry per node), e.g. a
    /// partition loaded from disk or a planted ground truth. Community ids
    /// are compacted by first appearance and modularity is recomputed.
    pub fn from_assignment(
        layer: &LayerGraph,
        assignment: &[u32],
    ) -> Result<Self, CommunityError> {
        if assignment.len() != layer.num_nodes() {
            return Err(CommunityError::NodeNotCovered {
                node: assignment.len().min(layer.num_nodes()) as u32,
            });
        }
        let mut relabel: alloc::collections::BTreeMap<u32, u32> = alloc::collections::BTreeMap::new();
        let mut next = 0u32;
        let compact: Vec<u32> = assignment
            .iter()
            .map(|&raw| {
                *relabel.entry(raw).or_insert_with(|| {
                    let id = next;
                    next += 1;
                    id
                })
            })
            .collect();
        let q = modularity(layer, &compact);
        Ok(CommunityPartition {
            layer_id: layer.layer_id(),
            assignment: compact,
            modularity: q,
            num_communities: next as usize,
        })
    }

    pub fn layer_id(&self) -> usize {
        self.layer_id
    }

    pub fn assignment(&self) -> &[u32] {
        &self.assignment
    }

    pub fn community_of(&self, node: u32) -> Option<u32> {
        self.assignment.get(node as usize).copied()
    }

    pub fn num_communities(&self) -> usize {
        self.num_communities
    }

    pub fn modularity(&self) -> f64 {
        self.modularity
    }
}

/// Weak/strong classification of a node pair under one layer's partition.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Tie {
    /// Endpoints in different communities.
    Weak,
    /// Endpoints in the same community.
    Strong,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TieLabel {
    pub edge: (u32, u32),
    pub label: Tie,
}

/// Modularity of `assignment` on the (unweighted) layer:
/// Q = Σ_c [ m_c/m − (d_c/(2m))² ].
pub fn modularity(layer: &LayerGraph, assignment: &[u32]) -> f64 {
    assert_eq!(assignment.len(), layer.num_nodes());
    let m = layer.num_edges() as f64;
    if m == 0.0 {
        return 0.0;
    }
    let num_comms = assignment.iter().map(|&c| c as usize + 1).max().unwrap_or(0);
    let mut intra = vec![0.0f64; num_comms];
    let mut degree_sum = vec![0.0f64; num_comms];
    for &(u, v) in layer.edges() {
        if assignment[u as usize] == assignment[v as usize] {
            intra[assignment[u as usize] as usize] += 1.0;
        }
    }
    for node in 0..layer.num_nodes() {
        degree_sum[assignment[node] as usize] += layer.degree(node as u32) as f64;
    }
    let mut q = 0.0;
    for c in 0..num_comms {
        let frac = degree_sum[c] / (2.0 * m);
        q += intra[c] / m - frac * frac;
    }
    q
}

/// Weighted graph used internally across coarsening levels. Self-loop
/// weight counts twice toward a node's degree, matching the convention in
/// which a coarsened community's internal edges stay inside its super-node.
struct WeightedGraph {
    /// Per node: (neighbor, weight), excluding self.
    adj: Vec<Vec<(u32, f64)>>,
    self_loop: Vec<f64>,
    /// Total edge weight m (self-loops counted once).
    total: f64,
}

impl WeightedGraph {
    fn from_layer(layer: &LayerGraph) -> Self {
        let n = layer.num_nodes();
        let mut adj = vec![Vec::new(); n];
        for &(u, v) in layer.edges() {
            adj[u as usize].push((v, 1.0));
            adj[v as usize].push((u, 1.0));
        }
        WeightedGraph {
            adj,
            self_loop: vec![0.0; n],
            total: layer.num_edges() as f64,
        }
    }

    fn num_nodes(&self) -> usize {
        self.adj.len()
    }

    fn weighted_degree(&self, node: usize) -> f64 {
        let link: f64 = self.adj[node].iter().map(|&(_, w)| w).sum();
        link + 2.0 * self.self_loop[node]
    }
}

/// One local-move phase. Returns (community assignment on this graph's
/// nodes, whether any move happened).
fn local_phase(
    graph: &WeightedGraph,
    rng: &mut impl rand::Rng,
) -> (Vec<u32>, bool) {
    let n = graph.num_nodes();
    let two_m = 2.0 * graph.total;
    let mut comm: Vec<u32> = (0..n as u32).collect();
    let mut comm_tot: Vec<f64> = (0..n).map(|i| graph.weighted_degree(i)).collect();

    let mut order: Vec<usize> = (0..n).collect();
    let mut any_move = false;
    loop {
        order.shuffle(rng);
        let mut moved_this_pass = false;
        for &node in &order {
            let k_i = graph.weighted_degree(node);
            if k_i == 0.0 {
                continue;
            }
            let old = comm[node];
            // Weights from `node` into each adjacent community.
            let mut neigh_comms: Vec<(u32, f64)> = Vec::new();
            for &(nb, w) in &graph.adj[node] {
                let c = comm[nb as usize];
                match neigh_comms.iter_mut().find(|(cc, _)| *cc == c) {
                    Some((_, acc)) => *acc += w,
                    None => neigh_comms.push((c, w)),
                }
            }
            // Remove the node from its community before weighing options.
            comm_tot[old as usize] -= k_i;
            let k_in_old = neigh_comms
                .iter()
                .find(|(c, _)| *c == old)
                .map_or(0.0, |&(_, w)| w);
            let gain_of = |k_in: f64, tot: f64| k_in - tot * k_i / two_m;
            let mut best_comm = old;
            let mut best_gain = gain_of(k_in_old, comm_tot[old as usize]);
            for &(c, k_in) in &neigh_comms {
                if c == old {
                    continue;
                }
                let gain = gain_of(k_in, comm_tot[c as usize]);
                if gain > best_gain {
                    best_gain = gain;
                    best_comm = c;
                }
            }
            comm_tot[best_comm as usize] += k_i;
            comm[node] = best_comm;
            if best_comm != old {
                moved_this_pass = true;
                any_move = true;
            }
        }
        if !moved_this_pass {
            break;
        }
    }
    (comm, any_move)
}

/// Collapse each community into one node; intra-community weight becomes a
/// self-loop. Returns the coarse graph and the node→coarse-node map.
fn coarsen(graph: &WeightedGraph, comm: &[u32]) -> (WeightedGraph, Vec<u32>) {
    let n = graph.num_nodes();
    let mut relabel: Vec<i64> = vec![-1; n];
    let mut next = 0u32;
    let mut mapped = vec![0u32; n];
    for node in 0..n {
        let c = comm[node] as usize;
        if relabel[c] < 0 {
            relabel[c] = next as i64;
            next += 1;
        }
        mapped[node] = relabel[c] as u32;
    }
    let coarse_n = next as usize;
    let mut weight: alloc::collections::BTreeMap<(u32, u32), f64> =
        alloc::collections::BTreeMap::new();
    let mut self_loop = vec![0.0f64; coarse_n];
    for node in 0..n {
        self_loop[mapped[node] as usize] += graph.self_loop[node];
        for &(nb, w) in &graph.adj[node] {
            let (a, b) = (mapped[node], mapped[nb as usize]);
            if a == b {
                // each intra edge visited from both endpoints: w/2 each
                self_loop[a as usize] += w / 2.0;
            } else if a < b {
                *weight.entry((a, b)).or_insert(0.0) += w;
            }
        }
    }
    let mut adj = vec![Vec::new(); coarse_n];
    for (&(a, b), &w) in &weight {
        adj[a as usize].push((b, w));
        adj[b as usize].push((a, w));
    }
    let total = graph.total;
    (
        WeightedGraph {
            adj,
            self_loop,
            total,
        },
        mapped,
    )
}

/// Two-phase Louvain on one layer, deterministic per seed.
pub fn louvain_partition(
    layer: &LayerGraph,
    seed: u64,
) -> Result<CommunityPartition, CommunityError> {
    if layer.num_edges() == 0 {
        return Err(CommunityError::EmptyLayer {
            layer: layer.layer_id(),
        });
    }
    let mut rng = seeds::rng(seed, seeds::STREAM_COMMUNITY, layer.layer_id() as u64);
    let mut graph = WeightedGraph::from_layer(layer);
    // node_to_comm[n] = current coarse node holding original node n
    let mut node_to_coarse: Vec<u32> = (0..layer.num_nodes() as u32).collect();
    loop {
        let (comm, moved) = local_phase(&graph, &mut rng);
        if !moved {
            break;
        }
        let (coarse, mapped) = coarsen(&graph, &comm);
        // mapped sends each old coarse node to the super-node of its community
        for slot in node_to_coarse.iter_mut() {
            *slot = mapped[*slot as usize];
        }
        graph = coarse;
        if graph.num_nodes() == 1 {
            break;
        }
    }
    // Compact ids by first appearance over node index order.
    let mut relabel: alloc::collections::BTreeMap<u32, u32> = alloc::collections::BTreeMap::new();
    let mut next = 0u32;
    let mut assignment = vec![0u32; layer.num_nodes()];
    for node in 0..layer.num_nodes() {
        let raw = node_to_coarse[node];
        let id = *relabel.entry(raw).or_insert_with(|| {
            let id = next;
            next += 1;
            id
        });
        assignment[node] = id;
    }
    let q = modularity(layer, &assignment);
    Ok(CommunityPartition {
        layer_id: layer.layer_id(),
        assignment,
        modularity: q,
        num_communities: next as usize,
    })
}

/// Classify node pairs as weak (communities differ) or strong ties. Works
/// for edges and non-edges alike.
pub fn label_ties(
    pairs: &[(u32, u32)],
    partition: &CommunityPartition,
) -> Result<Vec<TieLabel>, CommunityError> {
    let mut out = Vec::with_capacity(pairs.len());
    for &(u, v) in pairs {
        let cu = partition
            .community_of(u)
            .ok_or(CommunityError::NodeNotCovered { node: u })?;
        let cv = partition
            .community_of(v)
            .ok_or(CommunityError::NodeNotCovered { node: v })?;
        out.push(TieLabel {
            edge: (u, v),
            label: if cu == cv { Tie::Strong } else { Tie::Weak },
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::LayerGraph;

    fn layer(num_nodes: usize, edges: &[(u32, u32)]) -> LayerGraph {
        LayerGraph::from_raw_edges(0, num_nodes, edges).unwrap().0
    }

    /// Exhaustive maximum-modularity search over all set partitions,
    /// enumerated as restricted growth strings. Usable up to ~10 nodes.
    fn best_partition_exhaustive(layer: &LayerGraph) -> (Vec<u32>, f64) {
        let n = layer.num_nodes();
        assert!(n <= 10, "exhaustive search is factorial; keep it tiny");
        let mut rgs = vec![0u32; n];
        let mut best = (rgs.clone(), modularity(layer, &rgs));
        loop {
            // next restricted growth string
            let mut i = n;
            loop {
                if i == 1 {
                    return best;
                }
                i -= 1;
                let max_prefix = rgs[..i].iter().copied().max().unwrap();
                if rgs[i] <= max_prefix {
                    rgs[i] += 1;
                    for slot in rgs.iter_mut().skip(i + 1) {
                        *slot = 0;
                    }
                    break;
                }
            }
            let q = modularity(layer, &rgs);
            if q > best.1 {
                best = (rgs.clone(), q);
            }
        }
    }

    fn assignments_equivalent(a: &[u32], b: &[u32]) -> bool {
        // same partition up to relabeling
        let norm = |x: &[u32]| {
            let mut map = alloc::collections::BTreeMap::new();
            let mut next = 0u32;
            x.iter()
                .map(|&c| {
                    *map.entry(c).or_insert_with(|| {
                        let id = next;
                        next += 1;
                        id
                    })
                })
                .collect::<Vec<u32>>()
        };
        norm(a) == norm(b)
    }

    fn two_cliques_with_bridge() -> LayerGraph {
        let mut edges = Vec::new();
        for u in 0..4u32 {
            for v in (u + 1)..4 {
                edges.push((u, v));
                edges.push((u + 4, v + 4));
            }
        }
        edges.push((3, 4));
        layer(8, &edges)
    }

    #[test]
    fn two_cliques_match_exhaustive_optimum() {
        let g = two_cliques_with_bridge();
        let part = louvain_partition(&g, 7).unwrap();
        let (best_assignment, best_q) = best_partition_exhaustive(&g);
        assert_eq!(part.num_communities(), 2);
        assert!(assignments_equivalent(part.assignment(), &best_assignment));
        assert!((part.modularity() - best_q).abs() < 1e-12);
        // the two communities are exactly the cliques
        let a = part.assignment();
        assert!(a[..4].iter().all(|&c| c == a[0]));
        assert!(a[4..].iter().all(|&c| c == a[4]));
        assert_ne!(a[0], a[4]);
    }

    #[test]
    fn single_edge_endpoints_merge() {
        let g = layer(2, &[(0, 1)]);
        let part = louvain_partition(&g, 3).unwrap();
        assert_eq!(part.num_communities(), 1);
        // merged partition has Q = 0, singletons Q = -0.5
        assert!((part.modularity() - 0.0).abs() < 1e-12);
        assert!(part.modularity() > modularity(&g, &[0, 1]));
    }

    #[test]
    fn disconnected_triangles_split_in_two() {
        let g = layer(6, &[(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)]);
        let part = louvain_partition(&g, 11).unwrap();
        let (best_assignment, best_q) = best_partition_exhaustive(&g);
        assert_eq!(part.num_communities(), 2);
        assert!(assignments_equivalent(part.assignment(), &best_assignment));
        assert!((part.modularity() - best_q).abs() < 1e-12);
    }

    #[test]
    fn isolated_nodes_become_singletons() {
        // nodes 4 and 5 have no edges
        let g = layer(6, &[(0, 1), (1, 2), (0, 2), (2, 3)]);
        let part = louvain_partition(&g, 5).unwrap();
        let a = part.assignment();
        assert_ne!(a[4], a[5]);
        assert!(!a[..4].contains(&a[4]));
        assert!(!a[..4].contains(&a[5]));
    }

    #[test]
    fn empty_layer_is_an_error() {
        let g = layer(3, &[]);
        let err = louvain_partition(&g, 1).unwrap_err();
        assert_eq!(err, CommunityError::EmptyLayer { layer: 0 });
    }

    #[test]
    fn stored_modularity_matches_recomputation() {
        let g = two_cliques_with_bridge();
        for seed in 0..5 {
            let part = louvain_partition(&g, seed).unwrap();
            let q = modularity(&g, part.assignment());
            assert!((part.modularity() - q).abs() < 1e-9);
        }
    }

    #[test]
    fn same_seed_is_deterministic() {
        let g = two_cliques_with_bridge();
        let a = louvain_partition(&g, 42).unwrap();
        let b = louvain_partition(&g, 42).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn bridge_is_weak_intra_clique_is_strong() {
        let g = two_cliques_with_bridge();
        let part = louvain_partition(&g, 7).unwrap();
        let labels = label_ties(&[(3, 4), (0, 1), (5, 6)], &part).unwrap();
        assert_eq!(labels[0].label, Tie::Weak);
        assert_eq!(labels[1].label, Tie::Strong);
        assert_eq!(labels[2].label, Tie::Strong);
    }

    #[test]
    fn degenerate_partition_makes_everything_strong() {
        let g = layer(4, &[(0, 1), (1, 2), (2, 3)]);
        let part = CommunityPartition {
            layer_id: 0,
            assignment: vec![0, 0, 0, 0],
            modularity: modularity(&g, &[0, 0, 0, 0]),
            num_communities: 1,
        };
        let labels = label_ties(g.edges(), &part).unwrap();
        assert!(labels.iter().all(|l| l.label == Tie::Strong));
    }

    #[test]
    fn uncovered_node_is_an_error() {
        let g = layer(2, &[(0, 1)]);
        let part = louvain_partition(&g, 1).unwrap();
        let err = label_ties(&[(0, 7)], &part).unwrap_err();
        assert_eq!(err, CommunityError::NodeNotCovered { node: 7 });
    }

    proptest::proptest! {
        #[test]
        fn louvain_beats_singletons(n in 3usize..24, edge_bits in proptest::collection::vec(0u8..4, 300), seed in 0u64..50) {
            let mut edges = Vec::new();
            let mut k = 0;
            for u in 0..n as u32 {
                for v in (u + 1)..n as u32 {
                    if edge_bits[k % edge_bits.len()] == 0 {
                        edges.push((u, v));
                    }
                    k += 1;
                }
            }
            proptest::prop_assume!(!edges.is_empty());
            let g = layer(n, &edges);
            let part = louvain_partition(&g, seed).unwrap();
            let singletons: Vec<u32> = (0..n as u32).collect();
            proptest::prop_assert!(part.modularity() >= modularity(&g, &singletons) - 1e-12);
            // assignment covers every node with compact ids
            proptest::prop_assert_eq!(part.assignment().len(), n);
            let max_id = part.assignment().iter().copied().max().unwrap();
            proptest::prop_assert_eq!(max_id as usize + 1, part.num_communities());
            // stored modularity is consistent
            let q = modularity(&g, part.assignment());
            proptest::prop_assert!((part.modularity() - q).abs() < 1e-9);
        }
    }
}
