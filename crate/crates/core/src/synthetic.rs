//! Deterministic synthetic multiplex networks.
//!
//! Three generators cover the test and experiment needs of the workspace:
//! a hand-written 12-node toy fixture, a two-layer stochastic block model
//! with correlated layers for fusion ablations, and a three-layer
//! physician-style network sized like the classic 246-node CKM innovation
//! study, used as a stand-in when the real data files are not on disk.
//!
//! All generators are pure functions of their seed: the same seed yields
//! bit-identical edge lists on every platform.

use alloc::collections::BTreeSet;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::graph::MultiplexGraph;
use crate::matrix::DenseMatrix;
use crate::seeds;

/// Hand-written 12-node, 3-layer fixture with two 6-node communities and a
/// handful of bridges. Every layer has at least 10 edges so it survives the
/// standard splitter.
pub fn toy_multiplex() -> MultiplexGraph {
    let layer0 = vec![
        (0, 1),
        (0, 2),
        (1, 2),
        (2, 3),
        (3, 4),
        (3, 5),
        (4, 5),
        (6, 7),
        (6, 8),
        (7, 8),
        (8, 9),
        (9, 10),
        (9, 11),
        (10, 11),
        (5, 6),
    ];
    let layer1 = vec![
        (0, 1),
        (1, 2),
        (0, 3),
        (2, 4),
        (3, 4),
        (4, 5),
        (6, 7),
        (7, 9),
        (8, 9),
        (8, 10),
        (10, 11),
        (6, 11),
        (2, 8),
        (5, 6),
    ];
    let layer2 = vec![
        (0, 1),
        (0, 2),
        (1, 3),
        (0, 4),
        (2, 5),
        (1, 5),
        (6, 8),
        (7, 10),
        (6, 9),
        (9, 11),
        (7, 11),
        (4, 7),
        (5, 6),
        (10, 11),
    ];
    let (graph, stats) = MultiplexGraph::new(12, &[layer0, layer1, layer2], None)
        .expect("toy fixture is valid by construction");
    debug_assert_eq!(stats.total_dropped(), 0);
    graph
}

/// Number of nodes in [`two_layer_blocks`].
pub const TWO_LAYER_NODES: u32 = 300;
/// Block size in [`two_layer_blocks`] (four equal blocks).
pub const TWO_LAYER_BLOCK: u32 = 75;

/// Ground-truth block of a node in [`two_layer_blocks`].
pub fn two_layer_block_of(node: u32) -> u32 {
    node / TWO_LAYER_BLOCK
}

/// Two-layer, 300-node stochastic block model over four planted blocks of
/// 75 nodes. Within-block structure is dense in both layers but only
/// loosely shared; cross-block (weak) edges are rare and mostly *copied*
/// between layers, so the second layer carries most of the evidence about
/// the first layer's weak ties and vice versa. Ablating inter-layer fusion
/// on this family measurably hurts weak-tie prediction.
pub fn two_layer_blocks(seed: u64) -> MultiplexGraph {
    let n = TWO_LAYER_NODES;
    let same = |i: u32, j: u32| two_layer_block_of(i) == two_layer_block_of(j);

    let mut rng0 = seeds::rng(seed, seeds::STREAM_SYNTHETIC, 0);
    let base = sample_pairs(n, &mut rng0, |i, j| if same(i, j) { 0.12 } else { 0.01 });

    let base_set: BTreeSet<(u32, u32)> = base.iter().copied().collect();
    let mut rng1 = seeds::rng(seed, seeds::STREAM_SYNTHETIC, 1);
    let copied = sample_pairs(n, &mut rng1, |i, j| {
        let shared = base_set.contains(&(i, j));
        match (shared, same(i, j)) {
            (true, true) => 0.45,
            (true, false) => 0.92,
            (false, true) => 0.075,
            (false, false) => 0.002,
        }
    });

    let (graph, _) = MultiplexGraph::new(n as usize, &[base, copied], None)
        .expect("block-model layers are valid by construction");
    graph
}

/// Number of nodes in [`physician_standin`], matching the CKM physician
/// network.
pub const STANDIN_NODES: u32 = 246;

/// Planted community sizes for [`physician_standin`] (eight uneven blocks).
pub const STANDIN_BLOCK_SIZES: [u32; 8] = [38, 35, 33, 32, 30, 28, 26, 24];

/// Ground-truth block of a node in [`physician_standin`].
pub fn standin_block_of(node: u32) -> u32 {
    let mut acc = 0;
    for (b, &size) in STANDIN_BLOCK_SIZES.iter().enumerate() {
        acc += size;
        if node < acc {
            return b as u32;
        }
    }
    panic!("node {node} out of range");
}

/// Position of a node inside its block in [`physician_standin`].
fn standin_block_pos(node: u32) -> u32 {
    let mut acc = 0;
    for &size in STANDIN_BLOCK_SIZES.iter() {
        if node < acc + size {
            return node - acc;
        }
        acc += size;
    }
    panic!("node {node} out of range");
}

/// Substrate inclusion rate per layer of [`physician_standin`]: the share
/// of the latent local substrate each relation expresses.
const STANDIN_INCLUDE: [f64; 3] = [0.94, 0.84, 0.62];
/// Inclusion rate for cross-block substrate edges. Bridges that exist at
/// all are expressed in nearly every relation — the strong multiplexity of
/// weak ties that makes them recoverable from the other layers.
const STANDIN_INCLUDE_WEAK: [f64; 3] = [0.97, 0.95, 0.90];
/// Per-layer rate of extra local (near-pair) edges outside the substrate.
const STANDIN_OWN_NEAR: [f64; 3] = [0.04, 0.10, 0.20];
/// Width of the survey-style ±1 attribute block in [`physician_standin`]
/// (32 block-profile answers plus 4 boundary-spanner answers).
pub const STANDIN_ATTR_DIM: usize = 36;
/// Number of boundary-spanner ("broker") nodes at the head of each block.
/// Nearly all cross-block substrate edges run between brokers, mirroring
/// the physicians who kept contacts in several towns.
const STANDIN_BROKERS_PER_BLOCK: u32 = 6;

/// Three-layer, 246-node stand-in for the CKM physician network: same node
/// count and mean degree ≈ 5–7 per layer. A latent social *substrate* is
/// drawn once — dense local neighbourhoods inside eight uneven blocks
/// (pairs within distance 4 of each other in block order connect with
/// probability 0.8) plus sparse cross-block "weak" connections — and each
/// layer independently expresses a slice of it (92%, 80%, 58%) on top of a
/// little private local noise. Nodes carry 32 survey-style ±1 attributes:
/// a shared profile per block with 15% per-answer individual flips, the
/// kind of correlated questionnaire data the original physician study
/// recorded. Two properties matter downstream: a held-out cross-block edge
/// is almost always visible in some *other* layer, so weak ties are only
/// predictable through inter-layer evidence; and the layers differ sharply
/// in how much substrate they carry, giving inter-layer attention a real
/// asymmetry to find.
pub fn physician_standin(seed: u64) -> MultiplexGraph {
    let n = STANDIN_NODES;
    let same = |i: u32, j: u32| standin_block_of(i) == standin_block_of(j);
    let near = |i: u32, j: u32| {
        same(i, j) && standin_block_pos(i).abs_diff(standin_block_pos(j)) <= 5
    };
    let broker = |i: u32| standin_block_pos(i) < STANDIN_BROKERS_PER_BLOCK;

    let mut rng_sub = seeds::rng(seed, seeds::STREAM_SYNTHETIC, 10);
    let substrate = sample_pairs(n, &mut rng_sub, |i, j| {
        if near(i, j) {
            0.85
        } else if same(i, j) {
            0.018
        } else if broker(i) && broker(j) {
            0.105
        } else {
            0.0012
        }
    });
    let sub_set: BTreeSet<(u32, u32)> = substrate.iter().copied().collect();

    let mut layers = Vec::with_capacity(3);
    for ell in 0..3 {
        let mut rng = seeds::rng(seed, seeds::STREAM_SYNTHETIC, 11 + ell as u64);
        layers.push(sample_pairs(n, &mut rng, |i, j| {
            if sub_set.contains(&(i, j)) {
                if same(i, j) {
                    STANDIN_INCLUDE[ell]
                } else {
                    STANDIN_INCLUDE_WEAK[ell]
                }
            } else if near(i, j) {
                STANDIN_OWN_NEAR[ell]
            } else if same(i, j) {
                0.002
            } else {
                0.0003
            }
        }));
    }

    let mut rng_attr = seeds::rng(seed, seeds::STREAM_SYNTHETIC, 14);
    const BLOCK_ANSWERS: usize = STANDIN_ATTR_DIM - 4;
    let mut profiles = [[0.0f64; BLOCK_ANSWERS]; STANDIN_BLOCK_SIZES.len()];
    for profile in profiles.iter_mut() {
        for slot in profile.iter_mut() {
            *slot = if rng_attr.gen::<f64>() < 0.5 { 1.0 } else { -1.0 };
        }
    }
    let mut attrs = DenseMatrix::zeros(n as usize, STANDIN_ATTR_DIM);
    for node in 0..n {
        let profile = &profiles[standin_block_of(node) as usize];
        let row = attrs.row_mut(node as usize);
        for (slot, &answer) in row.iter_mut().zip(profile.iter()) {
            let flip = rng_attr.gen::<f64>() < 0.15;
            *slot = if flip { -answer } else { answer };
        }
        // the last answers mark boundary spanners (e.g. out-of-town
        // meetings attended), with a little individual noise
        let spans = if broker(node) { 1.0 } else { -1.0 };
        for slot in row[BLOCK_ANSWERS..].iter_mut() {
            let flip = rng_attr.gen::<f64>() < 0.08;
            *slot = if flip { -spans } else { spans };
        }
    }

    let (graph, _) = MultiplexGraph::new(n as usize, &layers, Some(attrs))
        .expect("stand-in layers are valid by construction");
    graph
}

/// Draw each unordered pair (i < j) independently with probability
/// `prob(i, j)`. Exactly one uniform draw is consumed per pair, so the
/// stream alignment never depends on the probabilities.
fn sample_pairs<F: FnMut(u32, u32) -> f64>(
    n: u32,
    rng: &mut rand_chacha::ChaCha8Rng,
    mut prob: F,
) -> Vec<(u32, u32)> {
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let u: f64 = rng.gen();
            if u < prob(i, j) {
                edges.push((i, j));
            }
        }
    }
    edges
}
