//! Network reconstruction from link predictions and deterministic
//! susceptible–infected (SI) spreading for downstream validation.
//!
//! Reconstruction keeps the training edge sample and adds only
//! *correctly* predicted links (a predicted pair enters iff it exists in
//! the original layer), so a reconstruction is always a subgraph of the
//! original layer and a supergraph of its base sample. The SI dynamics are
//! deterministic — an infected node infects all susceptible neighbors each
//! synchronous step — so adding edges can only accelerate spreading, and
//! the terminal infected set is exactly the source's connected component.

use alloc::string::String;
use alloc::string::ToString;
use alloc::vec::Vec;

use alloc::collections::BTreeSet;

use rand::Rng;

use crate::graph::{LayerGraph, MultiplexGraph};
use crate::model::{forward, score_link, MrgnnParams};
use crate::seeds;
use crate::split::DataSplit;
use crate::train::training_inputs;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum EpidemicError {
    SourceOutOfRange { source: u32, num_nodes: usize },
    /// Random source selection found no node with an edge.
    NoCandidateSource,
    LayerOutOfRange { layer: usize, num_layers: usize },
    /// compare_spreads needs traces over one node space and source.
    MismatchedTraces,
    EmptyComparison,
}

impl core::fmt::Display for EpidemicError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            EpidemicError::SourceOutOfRange { source, num_nodes } => {
                write!(f, "source {source} outside node range 0..{num_nodes}")
            }
            EpidemicError::NoCandidateSource => {
                write!(f, "no non-isolated node to pick as source")
            }
            EpidemicError::LayerOutOfRange { layer, num_layers } => {
                write!(f, "layer {layer} outside 0..{num_layers}")
            }
            EpidemicError::MismatchedTraces => {
                write!(f, "traces disagree on node space or source")
            }
            EpidemicError::EmptyComparison => write!(f, "nothing to compare"),
        }
    }
}

impl core::error::Error for EpidemicError {}

/// Where a reconstructed edge came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Provenance {
    /// Part of the training sample the model saw.
    Sampled,
    /// Predicted above threshold and confirmed present in the original
    /// layer.
    Recovered,
}

/// One layer rebuilt from a base edge sample plus correctly predicted
/// links.
#[derive(Clone, Debug, PartialEq)]
pub struct ReconstructedNetwork {
    layer_id: usize,
    num_nodes: usize,
    /// Canonical (u < v), sorted; parallel to `provenance`.
    edges: Vec<(u32, u32)>,
    provenance: Vec<Provenance>,
}

impl ReconstructedNetwork {
    pub fn layer_id(&self) -> usize {
        self.layer_id
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn edges(&self) -> &[(u32, u32)] {
        &self.edges
    }

    pub fn provenance(&self) -> &[Provenance] {
        &self.provenance
    }

    pub fn sampled_count(&self) -> usize {
        self.provenance
            .iter()
            .filter(|&&p| p == Provenance::Sampled)
            .count()
    }

    pub fn recovered_count(&self) -> usize {
        self.edges.len() - self.sampled_count()
    }

    /// The reconstruction as a plain graph, ready for simulation.
    pub fn to_layer_graph(&self) -> LayerGraph {
        LayerGraph::from_canonical(self.layer_id, self.num_nodes, self.edges.clone())
    }

    /// Only the base sample, as a graph — the natural spreading baseline.
    pub fn base_layer_graph(&self) -> LayerGraph {
        let base: Vec<(u32, u32)> = self
            .edges
            .iter()
            .zip(self.provenance.iter())
            .filter(|(_, &p)| p == Provenance::Sampled)
            .map(|(&e, _)| e)
            .collect();
        LayerGraph::from_canonical(self.layer_id, self.num_nodes, base)
    }
}

/// Rebuild one layer from the split's training sample plus every node pair
/// the model scores at or above `threshold` *and* that exists in the
/// original layer. Scoring runs on training-basis embeddings, so the model
/// never sees the held-out edges it is asked to recover.
pub fn reconstruct(
    graph: &MultiplexGraph,
    layer: usize,
    params: &MrgnnParams,
    split: &DataSplit,
    threshold: f64,
) -> Result<ReconstructedNetwork, EpidemicError> {
    if layer >= graph.num_layers() {
        return Err(EpidemicError::LayerOutOfRange {
            layer,
            num_layers: graph.num_layers(),
        });
    }
    let (bases, features) = training_inputs(graph, split);
    let pass = forward(params, &bases, &features);
    let fused = &pass.fused_values()[layer];
    let mu = params.store.value(params.layout.mu[layer]);

    let base: BTreeSet<(u32, u32)> = split.layers[layer].train_pos.iter().copied().collect();
    let original = graph.layer(layer);
    let n = graph.num_nodes() as u32;

    let mut edges: Vec<(u32, u32)> = Vec::new();
    let mut provenance: Vec<Provenance> = Vec::new();
    for u in 0..n {
        for v in (u + 1)..n {
            let pair = (u, v);
            if base.contains(&pair) {
                edges.push(pair);
                provenance.push(Provenance::Sampled);
                continue;
            }
            // every remaining node pair is a prediction candidate
            let score = score_link(fused, mu, u, v, params.config.score_sign);
            if score >= threshold && original.has_edge(u, v) {
                edges.push(pair);
                provenance.push(Provenance::Recovered);
            }
        }
    }

    Ok(ReconstructedNetwork {
        layer_id: layer,
        num_nodes: graph.num_nodes(),
        edges,
        provenance,
    })
}

/// Union of all layers' edges — an aggregate spreading substrate. This is
/// an extra analysis mode, not part of the per-layer protocol.
pub fn union_network(graph: &MultiplexGraph) -> LayerGraph {
    let union: BTreeSet<(u32, u32)> = graph
        .layers()
        .iter()
        .flat_map(|layer| layer.edges().iter().copied())
        .collect();
    LayerGraph::from_canonical(0, graph.num_nodes(), union.into_iter().collect())
}

/// How si_spread picks its source.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SourceSelection {
    Fixed(u32),
    /// Seed-determined uniform choice among non-isolated nodes.
    Random,
}

/// One deterministic SI run.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SpreadTrace {
    pub source: u32,
    pub num_nodes: usize,
    /// Cumulative infected set per step, sorted; `steps[0] == [source]`.
    pub steps: Vec<Vec<u32>>,
}

impl SpreadTrace {
    /// Infected-set size per step, e.g. `[1, 2, 3]` on a short path.
    pub fn infected_counts(&self) -> Vec<usize> {
        self.steps.iter().map(|s| s.len()).collect()
    }

    /// Last step index (the fixed point).
    pub fn terminal_step(&self) -> usize {
        self.steps.len() - 1
    }

    pub fn terminal_set(&self) -> &[u32] {
        self.steps.last().expect("at least the source step")
    }

    /// Infected set at `step`, clamped to the terminal set afterwards.
    pub fn set_at(&self, step: usize) -> &[u32] {
        let idx = step.min(self.terminal_step());
        &self.steps[idx]
    }
}

/// Deterministic synchronous SI: every infected node infects all of its
/// susceptible neighbors each step; stops when a step adds nobody. The
/// seed matters only for [`SourceSelection::Random`].
pub fn si_spread(
    network: &LayerGraph,
    source: SourceSelection,
    seed: u64,
) -> Result<SpreadTrace, EpidemicError> {
    let n = network.num_nodes();
    let start = match source {
        SourceSelection::Fixed(s) => {
            if (s as usize) >= n {
                return Err(EpidemicError::SourceOutOfRange {
                    source: s,
                    num_nodes: n,
                });
            }
            s
        }
        SourceSelection::Random => {
            let candidates: Vec<u32> =
                (0..n as u32).filter(|&v| network.degree(v) > 0).collect();
            if candidates.is_empty() {
                return Err(EpidemicError::NoCandidateSource);
            }
            let mut rng = seeds::rng(seed, seeds::STREAM_EPIDEMIC, 0);
            candidates[rng.gen_range(0..candidates.len())]
        }
    };

    let mut infected = vec_of_false(n);
    infected[start as usize] = true;
    let mut current: Vec<u32> = alloc::vec![start];
    let mut steps: Vec<Vec<u32>> = alloc::vec![current.clone()];
    loop {
        let mut newly: Vec<u32> = Vec::new();
        for &u in &current {
            for &v in network.neighbors(u) {
                if !infected[v as usize] {
                    infected[v as usize] = true;
                    newly.push(v);
                }
            }
        }
        if newly.is_empty() {
            break;
        }
        current.extend_from_slice(&newly);
        current.sort_unstable();
        steps.push(current.clone());
        // only the frontier can infect anyone new, but iterating the full
        // set is equivalent for SI and keeps the loop obviously correct
    }
    Ok(SpreadTrace {
        source: start,
        num_nodes: n,
        steps,
    })
}

fn vec_of_false(n: usize) -> Vec<bool> {
    alloc::vec![false; n]
}

/// Side-by-side spreading curves for reconstructions of the same layer.
#[derive(Clone, Debug, PartialEq)]
pub struct SpreadComparison {
    pub names: Vec<String>,
    pub num_nodes: usize,
    pub source: u32,
    /// `fractions[t][k]` = infected fraction of trace k at step t; traces
    /// that terminate early repeat their terminal fraction.
    pub fractions: Vec<Vec<f64>>,
    pub terminal_sizes: Vec<usize>,
}

/// Align traces over a common step axis. All traces must share the node
/// space and the source.
pub fn compare_spreads(
    traces: &[(&str, &SpreadTrace)],
) -> Result<SpreadComparison, EpidemicError> {
    let (first, rest) = traces.split_first().ok_or(EpidemicError::EmptyComparison)?;
    for (_, t) in rest {
        if t.num_nodes != first.1.num_nodes || t.source != first.1.source {
            return Err(EpidemicError::MismatchedTraces);
        }
    }
    let horizon = traces
        .iter()
        .map(|(_, t)| t.terminal_step())
        .max()
        .unwrap_or(0);
    let n = first.1.num_nodes as f64;
    let fractions = (0..=horizon)
        .map(|t| {
            traces
                .iter()
                .map(|(_, trace)| trace.set_at(t).len() as f64 / n)
                .collect()
        })
        .collect();
    Ok(SpreadComparison {
        names: traces.iter().map(|(name, _)| name.to_string()).collect(),
        num_nodes: first.1.num_nodes,
        source: first.1.source,
        fractions,
        terminal_sizes: traces.iter().map(|(_, t)| t.terminal_set().len()).collect(),
    })
}
