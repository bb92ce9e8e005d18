//! Train/validation/test edge splitting and negative sampling.
//!
//! Held-out sets are carved per layer: first `test_frac` of the edges
//! (floored), then `val_frac` of what remains (floored), the rest trains.
//! Each positive subset is paired with an equal-count set of negatives —
//! node pairs that are not edges anywhere in the layer — and the three
//! negative sets are mutually disjoint. Everything is a pure function of
//! `(graph, fractions, seed)`.

use alloc::collections::BTreeSet;
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::graph::{LayerGraph, MultiplexGraph};
use crate::seeds;

#[derive(Clone, Debug, PartialEq)]
pub enum SplitError {
    /// Fractions must be positive and sum below 1.
    InvalidFractions { test_frac: f64, val_frac: f64 },
    /// A layer has too few edges to split at all.
    LayerTooSmall { layer: usize, num_edges: usize },
    /// The requested fractions leave some subset of a layer empty.
    EmptySubset {
        layer: usize,
        subset: &'static str,
    },
    /// Not enough non-edges to sample the requested negatives.
    InsufficientNonEdges {
        layer: usize,
        requested: usize,
        available: usize,
    },
}

impl core::fmt::Display for SplitError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            SplitError::InvalidFractions {
                test_frac,
                val_frac,
            } => write!(
                f,
                "fractions must satisfy 0 < test, 0 < val, test + val < 1; got {test_frac}/{val_frac}"
            ),
            SplitError::LayerTooSmall { layer, num_edges } => {
                write!(f, "layer {layer} has {num_edges} edges; need at least 10")
            }
            SplitError::EmptySubset { layer, subset } => {
                write!(f, "layer {layer}: {subset} subset would be empty")
            }
            SplitError::InsufficientNonEdges {
                layer,
                requested,
                available,
            } => write!(
                f,
                "layer {layer}: need {requested} negative pairs, only {available} non-edges available"
            ),
        }
    }
}

impl core::error::Error for SplitError {}

/// Names the six per-layer edge subsets.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EdgeSubset {
    TrainPos,
    TrainNeg,
    ValPos,
    ValNeg,
    TestPos,
    TestNeg,
}

/// The six edge sets of one layer. Positive sets partition the layer's
/// edges; each negative set matches its positive set in size.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LayerSplit {
    pub train_pos: Vec<(u32, u32)>,
    pub train_neg: Vec<(u32, u32)>,
    pub val_pos: Vec<(u32, u32)>,
    pub val_neg: Vec<(u32, u32)>,
    pub test_pos: Vec<(u32, u32)>,
    pub test_neg: Vec<(u32, u32)>,
}

impl LayerSplit {
    pub fn subset(&self, which: EdgeSubset) -> &[(u32, u32)] {
        match which {
            EdgeSubset::TrainPos => &self.train_pos,
            EdgeSubset::TrainNeg => &self.train_neg,
            EdgeSubset::ValPos => &self.val_pos,
            EdgeSubset::ValNeg => &self.val_neg,
            EdgeSubset::TestPos => &self.test_pos,
            EdgeSubset::TestNeg => &self.test_neg,
        }
    }
}

/// Per-layer split of a multiplex graph, tagged with what produced it.
#[derive(Clone, Debug, PartialEq)]
pub struct DataSplit {
    pub layers: Vec<LayerSplit>,
    pub seed: u64,
    pub test_frac: f64,
    pub val_frac: f64,
}

/// Split every layer of `graph` into train/val/test positives with matched
/// disjoint negatives. Test takes `⌊test_frac·|E|⌋` edges, validation takes
/// `⌊val_frac·(remaining)⌋` of what is left, training keeps the rest.
pub fn split_edges(
    graph: &MultiplexGraph,
    test_frac: f64,
    val_frac: f64,
    seed: u64,
) -> Result<DataSplit, SplitError> {
    if !(test_frac > 0.0 && val_frac > 0.0 && test_frac + val_frac < 1.0) {
        return Err(SplitError::InvalidFractions {
            test_frac,
            val_frac,
        });
    }
    let mut layers = Vec::with_capacity(graph.num_layers());
    for (r, layer) in graph.layers().iter().enumerate() {
        let m = layer.num_edges();
        if m < 10 {
            return Err(SplitError::LayerTooSmall {
                layer: r,
                num_edges: m,
            });
        }
        let test_count = (test_frac * m as f64) as usize;
        let val_count = (val_frac * (m - test_count) as f64) as usize;
        let train_count = m - test_count - val_count;
        for (count, name) in [
            (test_count, "test"),
            (val_count, "validation"),
            (train_count, "train"),
        ] {
            if count == 0 {
                return Err(SplitError::EmptySubset {
                    layer: r,
                    subset: name,
                });
            }
        }

        layers.push(split_layer_with_counts(layer, r, test_count, val_count, seed)?);
    }
    Ok(DataSplit {
        layers,
        seed,
        test_frac,
        val_frac,
    })
}

/// Split for training-size sweeps: the test set takes everything outside
/// the training portion (`⌊(1−train_frac)·|E|⌋`, with a tiny guard against
/// float dust so 0.8·100 lands on 80), and validation is carved out of the
/// training portion as `⌊val_within·train_total⌋`. A zero `val_within` is
/// allowed and leaves the validation sets empty, in which case training
/// runs its full epoch budget.
pub fn split_with_train_fraction(
    graph: &MultiplexGraph,
    train_frac: f64,
    val_within: f64,
    seed: u64,
) -> Result<DataSplit, SplitError> {
    if !(train_frac > 0.0 && train_frac < 1.0) || !(0.0..1.0).contains(&val_within) {
        return Err(SplitError::InvalidFractions {
            test_frac: 1.0 - train_frac,
            val_frac: val_within,
        });
    }
    let mut layers = Vec::with_capacity(graph.num_layers());
    for (r, layer) in graph.layers().iter().enumerate() {
        let m = layer.num_edges();
        if m < 10 {
            return Err(SplitError::LayerTooSmall {
                layer: r,
                num_edges: m,
            });
        }
        let test_count = ((1.0 - train_frac) * m as f64 + 1e-9) as usize;
        let train_total = m - test_count;
        let val_count = (val_within * train_total as f64 + 1e-9) as usize;
        if test_count == 0 {
            return Err(SplitError::EmptySubset {
                layer: r,
                subset: "test",
            });
        }
        if train_total - val_count == 0 {
            return Err(SplitError::EmptySubset {
                layer: r,
                subset: "train",
            });
        }
        layers.push(split_layer_with_counts(layer, r, test_count, val_count, seed)?);
    }
    Ok(DataSplit {
        layers,
        seed,
        test_frac: 1.0 - train_frac,
        val_frac: val_within,
    })
}

/// Shuffle one layer's edges and carve test, then validation, then
/// training; a single negative draw of the same total size is partitioned
/// identically, which makes all six subsets mutually disjoint by
/// construction.
fn split_layer_with_counts(
    layer: &LayerGraph,
    r: usize,
    test_count: usize,
    val_count: usize,
    seed: u64,
) -> Result<LayerSplit, SplitError> {
    let m = layer.num_edges();
    let mut shuffled: Vec<(u32, u32)> = layer.edges().to_vec();
    let mut rng = seeds::rng(seed, seeds::STREAM_SPLIT, r as u64);
    shuffled.shuffle(&mut rng);

    let mut test_pos: Vec<_> = shuffled[..test_count].to_vec();
    let mut val_pos: Vec<_> = shuffled[test_count..test_count + val_count].to_vec();
    let mut train_pos: Vec<_> = shuffled[test_count + val_count..].to_vec();
    test_pos.sort_unstable();
    val_pos.sort_unstable();
    train_pos.sort_unstable();

    let negatives = sample_negatives(
        layer,
        m,
        &[],
        seeds::derive(seed, seeds::STREAM_NEGATIVE, r as u64),
    )
    .map_err(|e| match e {
        SplitError::InsufficientNonEdges {
            requested,
            available,
            ..
        } => SplitError::InsufficientNonEdges {
            layer: r,
            requested,
            available,
        },
        other => other,
    })?;
    let mut test_neg: Vec<_> = negatives[..test_count].to_vec();
    let mut val_neg: Vec<_> = negatives[test_count..test_count + val_count].to_vec();
    let mut train_neg: Vec<_> = negatives[test_count + val_count..].to_vec();
    test_neg.sort_unstable();
    val_neg.sort_unstable();
    train_neg.sort_unstable();

    Ok(LayerSplit {
        train_pos,
        train_neg,
        val_pos,
        val_neg,
        test_pos,
        test_neg,
    })
}

/// Draw `count` distinct canonical non-edges of `layer`, uniformly without
/// replacement, avoiding `exclude`. Candidates are enumerated outright; the
/// node sets here are small enough that this beats rejection sampling.
pub fn sample_negatives(
    layer: &LayerGraph,
    count: usize,
    exclude: &[(u32, u32)],
    seed: u64,
) -> Result<Vec<(u32, u32)>, SplitError> {
    let excluded: BTreeSet<(u32, u32)> = exclude
        .iter()
        .map(|&(u, v)| if u < v { (u, v) } else { (v, u) })
        .collect();
    let n = layer.num_nodes() as u32;
    let mut candidates: Vec<(u32, u32)> = Vec::new();
    for u in 0..n {
        for v in (u + 1)..n {
            if !layer.has_edge(u, v) && !excluded.contains(&(u, v)) {
                candidates.push((u, v));
            }
        }
    }
    if candidates.len() < count {
        return Err(SplitError::InsufficientNonEdges {
            layer: layer.layer_id(),
            requested: count,
            available: candidates.len(),
        });
    }
    let mut rng = seeds::rng(seed, seeds::STREAM_NEGATIVE, 0);
    let (chosen, _) = candidates.partial_shuffle(&mut rng, count);
    let mut out = chosen.to_vec();
    out.sort_unstable();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::MultiplexGraph;
    use alloc::vec;

    /// Two identical layers with exactly 100 edges over 30 nodes.
    fn hundred_edge_graph() -> MultiplexGraph {
        let mut edges = Vec::new();
        'outer: for u in 0..30u32 {
            for v in (u + 1)..30 {
                edges.push((u, v));
                if edges.len() == 100 {
                    break 'outer;
                }
            }
        }
        let (g, _) = MultiplexGraph::new(30, &[edges.clone(), edges], None).unwrap();
        g
    }

    #[test]
    fn two_stage_floor_rule_yields_10_9_81() {
        let g = hundred_edge_graph();
        let split = split_edges(&g, 0.1, 0.1, 7).unwrap();
        for layer in &split.layers {
            assert_eq!(layer.test_pos.len(), 10);
            assert_eq!(layer.val_pos.len(), 9);
            assert_eq!(layer.train_pos.len(), 81);
            assert_eq!(layer.test_neg.len(), 10);
            assert_eq!(layer.val_neg.len(), 9);
            assert_eq!(layer.train_neg.len(), 81);
        }
    }

    #[test]
    fn same_seed_reproduces_the_split() {
        let g = hundred_edge_graph();
        let a = split_edges(&g, 0.1, 0.1, 99).unwrap();
        let b = split_edges(&g, 0.1, 0.1, 99).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn different_seeds_generally_differ() {
        let g = hundred_edge_graph();
        let a = split_edges(&g, 0.1, 0.1, 1).unwrap();
        let b = split_edges(&g, 0.1, 0.1, 2).unwrap();
        assert_ne!(a.layers[0].test_pos, b.layers[0].test_pos);
    }

    #[test]
    fn oversized_fractions_are_rejected() {
        let g = hundred_edge_graph();
        let err = split_edges(&g, 0.95, 0.1, 7).unwrap_err();
        assert!(matches!(err, SplitError::InvalidFractions { .. }));
    }

    #[test]
    fn positives_partition_the_edge_set() {
        let g = hundred_edge_graph();
        let split = split_edges(&g, 0.2, 0.15, 3).unwrap();
        for (layer_split, layer) in split.layers.iter().zip(g.layers()) {
            let mut union: Vec<(u32, u32)> = Vec::new();
            union.extend_from_slice(&layer_split.train_pos);
            union.extend_from_slice(&layer_split.val_pos);
            union.extend_from_slice(&layer_split.test_pos);
            union.sort_unstable();
            assert_eq!(union, layer.edges());
        }
    }

    #[test]
    fn negatives_avoid_edges_and_each_other() {
        let g = hundred_edge_graph();
        let split = split_edges(&g, 0.1, 0.1, 11).unwrap();
        for (layer_split, layer) in split.layers.iter().zip(g.layers()) {
            let mut all_neg: Vec<(u32, u32)> = Vec::new();
            for subset in [
                &layer_split.train_neg,
                &layer_split.val_neg,
                &layer_split.test_neg,
            ] {
                for &(u, v) in subset.iter() {
                    assert!(!layer.has_edge(u, v), "negative ({u},{v}) is an edge");
                    assert!(u < v, "negative not canonical");
                }
                all_neg.extend_from_slice(subset);
            }
            let before = all_neg.len();
            all_neg.sort_unstable();
            all_neg.dedup();
            assert_eq!(all_neg.len(), before, "negative sets overlap");
        }
    }

    #[test]
    fn complete_graph_has_no_negatives() {
        let (layer, _) =
            crate::graph::LayerGraph::from_raw_edges(0, 3, &[(0, 1), (0, 2), (1, 2)]).unwrap();
        let err = sample_negatives(&layer, 1, &[], 5).unwrap_err();
        assert!(matches!(
            err,
            SplitError::InsufficientNonEdges {
                requested: 1,
                available: 0,
                ..
            }
        ));
    }

    #[test]
    fn path_graph_unique_non_edge() {
        let (layer, _) = crate::graph::LayerGraph::from_raw_edges(0, 3, &[(0, 1), (1, 2)]).unwrap();
        let neg = sample_negatives(&layer, 1, &[], 5).unwrap();
        assert_eq!(neg, vec![(0, 2)]);
    }

    #[test]
    fn sampled_negatives_are_valid_under_any_seed() {
        let edges: Vec<(u32, u32)> = (0..10).map(|i| (i as u32, (i + 1) as u32)).collect();
        let (layer, _) = crate::graph::LayerGraph::from_raw_edges(0, 50, &edges).unwrap();
        let a = sample_negatives(&layer, 40, &[], 1).unwrap();
        let b = sample_negatives(&layer, 40, &[], 2).unwrap();
        assert_ne!(a, b, "two seeds picked identical 40-pair sets");
        for set in [&a, &b] {
            assert_eq!(set.len(), 40);
            for &(u, v) in set.iter() {
                assert!(u < v);
                assert!(!layer.has_edge(u, v));
            }
            let mut dedup = set.clone();
            dedup.dedup();
            assert_eq!(dedup.len(), 40);
        }
    }

    #[test]
    fn exclusion_list_is_respected() {
        let (layer, _) = crate::graph::LayerGraph::from_raw_edges(0, 4, &[(0, 1)]).unwrap();
        // non-edges: (0,2),(0,3),(1,2),(1,3),(2,3) — exclude all but one
        let exclude = [(0, 2), (0, 3), (1, 2), (2, 3)];
        let neg = sample_negatives(&layer, 1, &exclude, 9).unwrap();
        assert_eq!(neg, vec![(1, 3)]);
    }

    #[test]
    fn tiny_layer_is_rejected() {
        let (g, _) = MultiplexGraph::new(
            6,
            &[
                vec![(0, 1), (1, 2), (2, 3), (3, 4), (4, 5)],
                vec![(0, 1), (1, 2), (2, 3), (3, 4), (4, 5)],
            ],
            None,
        )
        .unwrap();
        let err = split_edges(&g, 0.1, 0.1, 7).unwrap_err();
        assert!(matches!(err, SplitError::LayerTooSmall { num_edges: 5, .. }));
    }

    #[test]
    fn sweep_split_keeps_twenty_and_tests_eighty() {
        let g = hundred_edge_graph();
        let split = split_with_train_fraction(&g, 0.2, 0.0, 7).unwrap();
        for layer in &split.layers {
            assert_eq!(layer.train_pos.len(), 20);
            assert_eq!(layer.val_pos.len(), 0);
            assert_eq!(layer.test_pos.len(), 80);
            assert_eq!(layer.test_neg.len(), 80);
        }
    }

    #[test]
    fn sweep_split_can_carve_validation_inside_training() {
        let g = hundred_edge_graph();
        let split = split_with_train_fraction(&g, 0.2, 0.1, 7).unwrap();
        for layer in &split.layers {
            assert_eq!(layer.test_pos.len(), 80);
            assert_eq!(layer.val_pos.len(), 2);
            assert_eq!(layer.train_pos.len(), 18);
        }
    }

    #[test]
    fn sweep_split_near_one_fails_on_small_layers() {
        let g = hundred_edge_graph();
        let err = split_with_train_fraction(&g, 0.999, 0.0, 7).unwrap_err();
        assert!(matches!(
            err,
            SplitError::EmptySubset {
                subset: "test",
                ..
            }
        ));
    }

    #[test]
    fn sweep_split_rejects_degenerate_fractions() {
        let g = hundred_edge_graph();
        for (f, v) in [(0.0, 0.0), (1.0, 0.0), (0.5, 1.0), (0.5, -0.1)] {
            assert!(matches!(
                split_with_train_fraction(&g, f, v, 7),
                Err(SplitError::InvalidFractions { .. })
            ));
        }
    }

    #[test]
    fn sweep_split_partitions_edges_and_is_deterministic() {
        let g = hundred_edge_graph();
        let a = split_with_train_fraction(&g, 0.3, 0.1, 21).unwrap();
        let b = split_with_train_fraction(&g, 0.3, 0.1, 21).unwrap();
        assert_eq!(a, b);
        for (layer_split, layer) in a.layers.iter().zip(g.layers()) {
            let mut union: Vec<(u32, u32)> = Vec::new();
            union.extend_from_slice(&layer_split.train_pos);
            union.extend_from_slice(&layer_split.val_pos);
            union.extend_from_slice(&layer_split.test_pos);
            union.sort_unstable();
            assert_eq!(union, layer.edges());
        }
    }
}
