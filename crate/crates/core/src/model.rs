//! The multiplex-relation GNN: weighted neighbor sampling, K-step
//! intra-layer propagation, a shared projection into one latent space,
//! inter-layer attention (logit or semantic variant), additive fusion, and
//! per-layer logistic link scoring.
//!
//! Every numeric path here runs on the autodiff [`Tape`]; the convenience
//! functions that return plain matrices run a private tape internally, so
//! training and inference cannot drift apart. Neighbor selection is discrete
//! top-k and deliberately off-tape: gradients never flow through the ranking,
//! only through the values of whatever was selected.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::graph::LayerGraph;
use crate::graph::MultiplexGraph;
use crate::math;
use crate::matrix::DenseMatrix;
use crate::seeds;
use crate::tape::{ParamId, ParamStore, Tape, ValueId};

/// Which inter-layer attention scorer fuses the layers.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Aggregator {
    Logit,
    Semantic,
}

/// Sign convention inside the link-scoring sigmoid. `Standard` makes
/// aligned embeddings score high (1/(1+exp(−x))); `LiteralPrinted` keeps the
/// opposite sign for comparison runs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum ScoreSign {
    #[default]
    Standard,
    LiteralPrinted,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    pub embed_dim: usize,
    pub steps: usize,
    pub neighbor_cap: usize,
    pub aggregator: Aggregator,
    pub init_seed: u64,
    pub score_sign: ScoreSign,
    /// Ablation switch: false scores on the intra-layer embeddings alone
    /// (z = h), isolating the value of inter-layer fusion.
    pub fuse_layers: bool,
}

impl ModelConfig {
    pub fn new(aggregator: Aggregator, init_seed: u64) -> Self {
        ModelConfig {
            embed_dim: 128,
            steps: 2,
            neighbor_cap: 10,
            aggregator,
            init_seed,
            score_sign: ScoreSign::Standard,
            fuse_layers: true,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.embed_dim < 1 || self.steps < 1 || self.neighbor_cap < 1 {
            return Err(ModelError::InvalidConfig {
                embed_dim: self.embed_dim,
                steps: self.steps,
                neighbor_cap: self.neighbor_cap,
            });
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ModelError {
    InvalidConfig {
        embed_dim: usize,
        steps: usize,
        neighbor_cap: usize,
    },
}

impl core::fmt::Display for ModelError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            ModelError::InvalidConfig {
                embed_dim,
                steps,
                neighbor_cap,
            } => write!(
                f,
                "embed_dim, steps and neighbor_cap must all be >= 1 (got {embed_dim}/{steps}/{neighbor_cap})"
            ),
        }
    }
}

impl core::error::Error for ModelError {}

/// Handles into the [`ParamStore`] for every parameter the model owns.
#[derive(Clone, Debug)]
pub struct ParamLayout {
    pub num_layers: usize,
    pub feature_width: usize,
    /// w[r][k]: propagation matrix of step k in layer r (d × d_in).
    pub w: Vec<Vec<ParamId>>,
    /// u[r][k]: sampling row used to rank neighbors entering step k+1
    /// (1 × 2·width of h^k).
    pub u: Vec<Vec<ParamId>>,
    /// Shared projection (d × d) and bias (1 × d).
    pub m: ParamId,
    pub b: ParamId,
    /// Logit aggregator: θ per layer (1 × d). Empty for semantic.
    pub theta: Vec<ParamId>,
    /// Semantic aggregator: V per layer (d × d) and one shared Q (d × d).
    pub v: Vec<ParamId>,
    pub q: Option<ParamId>,
    /// Per-layer scorer (1 × d).
    pub mu: Vec<ParamId>,
}

/// Trained or freshly initialized model state.
#[derive(Clone, Debug)]
pub struct MrgnnParams {
    pub store: ParamStore,
    pub layout: ParamLayout,
    pub config: ModelConfig,
}

/// Initialize all parameter matrices uniformly in
/// `[−1/√fan_in, +1/√fan_in]` (fan_in = column count), bias at zero,
/// deterministically from `config.init_seed`.
pub fn init_params(config: &ModelConfig, graph: &MultiplexGraph) -> MrgnnParams {
    config.validate().expect("invalid model config");
    let d = config.embed_dim;
    let num_layers = graph.num_layers();
    let feature_width = graph.attr_width() + graph.num_nodes();
    let mut store = ParamStore::new();
    let mut rng = seeds::rng(config.init_seed, seeds::STREAM_INIT, 0);

    let uniform = |rows: usize, cols: usize, rng: &mut rand_chacha::ChaCha8Rng| {
        let bound = 1.0 / math::sqrt(cols as f64);
        let data: Vec<f64> = (0..rows * cols)
            .map(|_| rng.gen_range(-bound..=bound))
            .collect();
        DenseMatrix::from_vec(rows, cols, data)
    };

    let mut w = Vec::with_capacity(num_layers);
    let mut u = Vec::with_capacity(num_layers);
    for r in 0..num_layers {
        let mut wr = Vec::with_capacity(config.steps);
        let mut ur = Vec::with_capacity(config.steps);
        for k in 0..config.steps {
            let d_in = if k == 0 { feature_width } else { d };
            wr.push(store.insert(&format!("w.{r}.{k}"), uniform(d, d_in, &mut rng)));
            ur.push(store.insert(&format!("u.{r}.{k}"), uniform(1, 2 * d_in, &mut rng)));
        }
        w.push(wr);
        u.push(ur);
    }
    let m = store.insert("m", uniform(d, d, &mut rng));
    let b = store.insert("b", DenseMatrix::zeros(1, d));

    let mut theta = Vec::new();
    let mut v = Vec::new();
    let mut q = None;
    match config.aggregator {
        Aggregator::Logit => {
            for r in 0..num_layers {
                theta.push(store.insert(&format!("theta.{r}"), uniform(1, d, &mut rng)));
            }
        }
        Aggregator::Semantic => {
            for r in 0..num_layers {
                v.push(store.insert(&format!("v.{r}"), uniform(d, d, &mut rng)));
            }
            q = Some(store.insert("q", uniform(d, d, &mut rng)));
        }
    }
    let mut mu = Vec::with_capacity(num_layers);
    for r in 0..num_layers {
        mu.push(store.insert(&format!("mu.{r}"), uniform(1, d, &mut rng)));
    }

    MrgnnParams {
        store,
        layout: ParamLayout {
            num_layers,
            feature_width,
            w,
            u,
            m,
            b,
            theta,
            v,
            q,
            mu,
        },
        config: config.clone(),
    }
}

/// Sampling weight of every full neighbor of `node`:
/// `α_u = exp(relu(U · [h_node ∥ h_u]))`, sorted descending, ties broken by
/// ascending node index. The cap is applied later by [`select_neighbors`].
pub fn sampling_weights(
    basis: &LayerGraph,
    u_row: &DenseMatrix,
    h_prev: &DenseMatrix,
    node: u32,
) -> Vec<(u32, f64)> {
    let width = h_prev.cols();
    assert_eq!(u_row.cols(), 2 * width, "sampling row width mismatch");
    let u_data = u_row.row(0);
    let h_n = h_prev.row(node as usize);
    let self_part: f64 = u_data[..width]
        .iter()
        .zip(h_n.iter())
        .map(|(a, b)| a * b)
        .sum();
    let mut out: Vec<(u32, f64)> = basis
        .neighbors(node)
        .iter()
        .map(|&nb| {
            let h_u = h_prev.row(nb as usize);
            let z: f64 = self_part
                + u_data[width..]
                    .iter()
                    .zip(h_u.iter())
                    .map(|(a, b)| a * b)
                    .sum::<f64>();
            (nb, math::exp(math::relu(z)))
        })
        .collect();
    out.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .unwrap_or(core::cmp::Ordering::Equal)
            .then_with(|| a.0.cmp(&b.0))
    });
    out
}

/// Keep the first `cap` ranked neighbors.
pub fn select_neighbors(ranked: &[(u32, f64)], cap: usize) -> Vec<u32> {
    ranked.iter().take(cap).map(|&(n, _)| n).collect()
}

/// Per node: the neighbors selected for one propagation step.
pub type StepSelections = Vec<Vec<u32>>;
/// selections[layer][step][node] -> selected neighbor list.
pub type Selections = Vec<Vec<StepSelections>>;

/// Node-level inter-layer attention: `get(n, p, q)` is the weight layer q
/// contributes to node n's fused representation in layer p. Diagonal
/// entries are zero; each off-diagonal row sums to one.
#[derive(Clone, Debug, PartialEq)]
pub struct AttentionTensor {
    num_nodes: usize,
    num_layers: usize,
    data: Vec<f64>,
}

impl AttentionTensor {
    fn zeros(num_nodes: usize, num_layers: usize) -> Self {
        AttentionTensor {
            num_nodes,
            num_layers,
            data: vec![0.0; num_nodes * num_layers * num_layers],
        }
    }

    fn idx(&self, n: usize, p: usize, q: usize) -> usize {
        (n * self.num_layers + p) * self.num_layers + q
    }

    fn set(&mut self, n: usize, p: usize, q: usize, v: f64) {
        let i = self.idx(n, p, q);
        self.data[i] = v;
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn num_layers(&self) -> usize {
        self.num_layers
    }

    pub fn get(&self, n: usize, p: usize, q: usize) -> f64 {
        self.data[self.idx(n, p, q)]
    }

    /// Σ over q≠p of a[n][p][q]; 1 within 1e-6 by construction.
    pub fn row_sum(&self, n: usize, p: usize) -> f64 {
        (0..self.num_layers)
            .filter(|&q| q != p)
            .map(|q| self.get(n, p, q))
            .sum()
    }

    /// Mean over nodes of a[·][p][q].
    pub fn mean(&self, p: usize, q: usize) -> f64 {
        (0..self.num_nodes).map(|n| self.get(n, p, q)).sum::<f64>() / self.num_nodes as f64
    }
}

/// Everything one forward pass produces, alongside the tape that computed it.
pub struct ForwardPass {
    pub tape: Tape,
    /// h^{K,(r)} per layer, before projection (num_nodes × d).
    pub intra: Vec<ValueId>,
    /// h^(r) per layer, after the shared projection (num_nodes × d).
    pub projected: Vec<ValueId>,
    /// z^(r) per layer (num_nodes × d).
    pub fused: Vec<ValueId>,
    pub attention: AttentionTensor,
    pub selections: Selections,
}

impl ForwardPass {
    pub fn fused_values(&self) -> Vec<DenseMatrix> {
        self.fused.iter().map(|&id| self.tape.value(id).clone()).collect()
    }

    pub fn projected_values(&self) -> Vec<DenseMatrix> {
        self.projected
            .iter()
            .map(|&id| self.tape.value(id).clone())
            .collect()
    }
}

/// Full forward pass over all layers. `bases[r]` is the graph whose edges
/// carry messages in layer r (the train subgraph during training, the full
/// layer for post-hoc analysis); `features[r]` its initial node features.
pub fn forward(
    params: &MrgnnParams,
    bases: &[LayerGraph],
    features: &[DenseMatrix],
) -> ForwardPass {
    forward_with(&params.store, &params.layout, &params.config, bases, features, None)
}

/// Forward pass with the neighbor selections pinned to a previous pass —
/// the loss becomes smooth in the parameters, which is what finite
/// differences need.
pub fn forward_frozen(
    params: &MrgnnParams,
    bases: &[LayerGraph],
    features: &[DenseMatrix],
    selections: &Selections,
) -> ForwardPass {
    forward_with(
        &params.store,
        &params.layout,
        &params.config,
        bases,
        features,
        Some(selections),
    )
}

/// Forward pass against an externally borrowed store (the layout's ids must
/// come from that store). Lets gradient checking re-evaluate the loss while
/// it perturbs parameters in place.
pub fn forward_with(
    store: &ParamStore,
    layout: &ParamLayout,
    config: &ModelConfig,
    bases: &[LayerGraph],
    features: &[DenseMatrix],
    frozen: Option<&Selections>,
) -> ForwardPass {
    assert_eq!(bases.len(), layout.num_layers, "layer count mismatch");
    assert_eq!(features.len(), layout.num_layers);

    let mut tape = Tape::new();
    let mut intra = Vec::with_capacity(layout.num_layers);
    let mut selections: Selections = Vec::with_capacity(layout.num_layers);

    for r in 0..layout.num_layers {
        let n = features[r].rows();
        let mut h = tape.constant(features[r].clone());
        let mut layer_sel = Vec::with_capacity(config.steps);
        for k in 0..config.steps {
            let step_sel: StepSelections = match frozen {
                Some(sel) => sel[r][k].clone(),
                None => {
                    let u_row = store.value(layout.u[r][k]);
                    let h_val = tape.value(h);
                    (0..n as u32)
                        .map(|node| {
                            let ranked = sampling_weights(&bases[r], u_row, h_val, node);
                            select_neighbors(&ranked, config.neighbor_cap)
                        })
                        .collect()
                }
            };
            let groups: Vec<Vec<u32>> = step_sel
                .iter()
                .enumerate()
                .map(|(node, sel)| {
                    let mut g = Vec::with_capacity(sel.len() + 1);
                    g.push(node as u32);
                    g.extend_from_slice(sel);
                    g
                })
                .collect();
            let means = tape.neighbor_mean(h, groups);
            let wv = tape.param(store, layout.w[r][k]);
            let wt = tape.transpose(wv);
            let lin = tape.matmul(means, wt);
            h = tape.relu(lin);
            layer_sel.push(step_sel);
        }
        intra.push(h);
        selections.push(layer_sel);
    }

    // shared projection: tanh(h·Mᵀ + b)
    let mv = tape.param(store, layout.m);
    let mt = tape.transpose(mv);
    let bv = tape.param(store, layout.b);
    let projected: Vec<ValueId> = intra
        .iter()
        .map(|&h| {
            let lin = tape.matmul(h, mt);
            let shifted = tape.add_row_broadcast(lin, bv);
            tape.tanh(shifted)
        })
        .collect();

    // attention + fusion
    let num_nodes = features[0].rows();
    let mut attention = AttentionTensor::zeros(num_nodes, layout.num_layers);
    let mut fused = Vec::with_capacity(layout.num_layers);

    // semantic variant shares tanh(V^(r)·h^(r)) across all pairs
    let semantic_parts: Vec<ValueId> = if config.aggregator == Aggregator::Semantic {
        (0..layout.num_layers)
            .map(|r| {
                let vv = tape.param(store, layout.v[r]);
                let vt = tape.transpose(vv);
                let lin = tape.matmul(projected[r], vt);
                tape.tanh(lin)
            })
            .collect()
    } else {
        Vec::new()
    };
    let q_t = layout.q.map(|q| {
        let qv = tape.param(store, q);
        tape.transpose(qv)
    });
    let ones_row = tape.constant(DenseMatrix::from_vec(
        1,
        config.embed_dim,
        vec![1.0; config.embed_dim],
    ));

    for p in 0..layout.num_layers {
        let others: Vec<usize> = (0..layout.num_layers).filter(|&q| q != p).collect();
        let cols: Vec<ValueId> = others
            .iter()
            .map(|&q| match config.aggregator {
                Aggregator::Logit => {
                    let had = tape.hadamard(projected[p], projected[q]);
                    let tv = tape.param(store, layout.theta[p]);
                    let tt = tape.transpose(tv);
                    let raw = tape.matmul(had, tt);
                    tape.sigmoid(raw)
                }
                Aggregator::Semantic => {
                    let s = tape.add(semantic_parts[p], semantic_parts[q]);
                    let y = tape.matmul(s, q_t.expect("semantic layout has Q"));
                    tape.row_means(y)
                }
            })
            .collect();
        let stacked = tape.concat_cols(&cols);
        let attn = tape.softmax_rows(stacked);
        for (j, &q) in others.iter().enumerate() {
            for node in 0..num_nodes {
                attention.set(node, p, q, tape.value(attn).get(node, j));
            }
        }
        let mut z = projected[p];
        if config.fuse_layers {
            for (j, &q) in others.iter().enumerate() {
                let c = tape.col(attn, j);
                let bcast = tape.matmul(c, ones_row);
                let weighted = tape.hadamard(bcast, projected[q]);
                z = tape.add(z, weighted);
            }
        }
        fused.push(z);
    }

    ForwardPass {
        tape,
        intra,
        projected,
        fused,
        attention,
        selections,
    }
}

/// Score a batch of node pairs in one layer on the tape: returns an
/// (|pairs| × 1) node of probabilities.
pub fn score_pairs_on_tape(
    tape: &mut Tape,
    store: &ParamStore,
    mu: ParamId,
    fused: ValueId,
    pairs: &[(u32, u32)],
    sign: ScoreSign,
) -> ValueId {
    let is: Vec<u32> = pairs.iter().map(|&(i, _)| i).collect();
    let js: Vec<u32> = pairs.iter().map(|&(_, j)| j).collect();
    let zi = tape.gather_rows(fused, &is);
    let zj = tape.gather_rows(fused, &js);
    let had = tape.hadamard(zi, zj);
    let mv = tape.param(store, mu);
    let mt = tape.transpose(mv);
    let mut logits = tape.matmul(had, mt);
    if sign == ScoreSign::LiteralPrinted {
        logits = tape.scale(logits, -1.0);
    }
    tape.sigmoid(logits)
}

/// Value-level link score: sigmoid(μ·(z_i ⊗ z_j)). Must agree with
/// [`score_pairs_on_tape`] (covered by a test).
pub fn score_link(
    fused: &DenseMatrix,
    mu: &DenseMatrix,
    i: u32,
    j: u32,
    sign: ScoreSign,
) -> f64 {
    let logit: f64 = fused
        .row(i as usize)
        .iter()
        .zip(fused.row(j as usize).iter())
        .zip(mu.row(0).iter())
        .map(|((a, b), m)| a * b * m)
        .sum();
    match sign {
        ScoreSign::Standard => math::sigmoid(logit),
        ScoreSign::LiteralPrinted => math::sigmoid(-logit),
    }
}

/// K-step propagation for one layer, returned as a plain matrix.
pub fn propagate_intra(
    params: &MrgnnParams,
    basis: &LayerGraph,
    features: &DenseMatrix,
    layer: usize,
) -> DenseMatrix {
    let layout = &params.layout;
    let config = &params.config;
    let mut tape = Tape::new();
    let n = features.rows();
    let mut h = tape.constant(features.clone());
    for k in 0..config.steps {
        let u_row = params.store.value(layout.u[layer][k]);
        let h_val = tape.value(h);
        let groups: Vec<Vec<u32>> = (0..n as u32)
            .map(|node| {
                let ranked = sampling_weights(basis, u_row, h_val, node);
                let mut g = vec![node];
                g.extend(select_neighbors(&ranked, config.neighbor_cap));
                g
            })
            .collect();
        let means = tape.neighbor_mean(h, groups);
        let wv = tape.param(&params.store, layout.w[layer][k]);
        let wt = tape.transpose(wv);
        let lin = tape.matmul(means, wt);
        h = tape.relu(lin);
    }
    tape.value(h).clone()
}

/// Shared projection tanh(M·h + b) applied to every row.
pub fn project_shared(params: &MrgnnParams, h: &DenseMatrix) -> DenseMatrix {
    let mut tape = Tape::new();
    let hv = tape.constant(h.clone());
    let mv = tape.param(&params.store, params.layout.m);
    let mt = tape.transpose(mv);
    let bv = tape.param(&params.store, params.layout.b);
    let lin = tape.matmul(hv, mt);
    let shifted = tape.add_row_broadcast(lin, bv);
    let out = tape.tanh(shifted);
    tape.value(out).clone()
}

/// Attention row of one node in layer p over all q≠p, computed with the
/// configured aggregator from post-projection embeddings. Returns
/// `(q, weight)` pairs in ascending q order.
pub fn attention_row(
    params: &MrgnnParams,
    projected: &[DenseMatrix],
    node: u32,
    p: usize,
) -> Vec<(usize, f64)> {
    let num_layers = projected.len();
    assert!(num_layers >= 2, "attention needs at least two layers");
    let pass = attention_from_projected(params, projected);
    (0..num_layers)
        .filter(|&q| q != p)
        .map(|q| (q, pass.get(node as usize, p, q)))
        .collect()
}

/// AttentionTensor over given post-projection embeddings (used by analysis
/// paths that re-score without re-propagating).
pub fn attention_from_projected(
    params: &MrgnnParams,
    projected: &[DenseMatrix],
) -> AttentionTensor {
    let layout = &params.layout;
    let config = &params.config;
    let num_layers = projected.len();
    let num_nodes = projected[0].rows();
    let mut tape = Tape::new();
    let proj_ids: Vec<ValueId> = projected.iter().map(|m| tape.constant(m.clone())).collect();

    let semantic_parts: Vec<ValueId> = if config.aggregator == Aggregator::Semantic {
        (0..num_layers)
            .map(|r| {
                let vv = tape.param(&params.store, layout.v[r]);
                let vt = tape.transpose(vv);
                let lin = tape.matmul(proj_ids[r], vt);
                tape.tanh(lin)
            })
            .collect()
    } else {
        Vec::new()
    };
    let q_t = layout.q.map(|q| {
        let qv = tape.param(&params.store, q);
        tape.transpose(qv)
    });

    let mut attention = AttentionTensor::zeros(num_nodes, num_layers);
    for p in 0..num_layers {
        let others: Vec<usize> = (0..num_layers).filter(|&q| q != p).collect();
        let cols: Vec<ValueId> = others
            .iter()
            .map(|&q| match config.aggregator {
                Aggregator::Logit => {
                    let had = tape.hadamard(proj_ids[p], proj_ids[q]);
                    let tv = tape.param(&params.store, layout.theta[p]);
                    let tt = tape.transpose(tv);
                    let raw = tape.matmul(had, tt);
                    tape.sigmoid(raw)
                }
                Aggregator::Semantic => {
                    let s = tape.add(semantic_parts[p], semantic_parts[q]);
                    let y = tape.matmul(s, q_t.expect("semantic layout has Q"));
                    tape.row_means(y)
                }
            })
            .collect();
        let stacked = tape.concat_cols(&cols);
        let attn = tape.softmax_rows(stacked);
        for (j, &q) in others.iter().enumerate() {
            for node in 0..num_nodes {
                attention.set(node, p, q, tape.value(attn).get(node, j));
            }
        }
    }
    attention
}

/// Fused representation of one node: z = h^(p) + Σ_{q≠p} a(p←q) · h^(q).
pub fn fuse(
    projected: &[DenseMatrix],
    attention: &AttentionTensor,
    node: u32,
    p: usize,
) -> Vec<f64> {
    let n = node as usize;
    let mut z: Vec<f64> = projected[p].row(n).to_vec();
    for (q, proj_q) in projected.iter().enumerate() {
        if q == p {
            continue;
        }
        let a = attention.get(n, p, q);
        for (zi, hq) in z.iter_mut().zip(proj_q.row(n).iter()) {
            *zi += a * hq;
        }
    }
    z
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_node_features, MultiplexGraph};

    fn tiny_graph(num_nodes: usize, layers: &[&[(u32, u32)]]) -> MultiplexGraph {
        let lists: Vec<Vec<(u32, u32)>> = layers.iter().map(|l| l.to_vec()).collect();
        MultiplexGraph::new(num_nodes, &lists, None).unwrap().0
    }

    fn small_config(d: usize, steps: usize, aggregator: Aggregator, seed: u64) -> ModelConfig {
        ModelConfig {
            embed_dim: d,
            steps,
            neighbor_cap: 10,
            aggregator,
            init_seed: seed,
            score_sign: ScoreSign::Standard,
            fuse_layers: true,
        }
    }

    #[test]
    fn init_is_deterministic() {
        let g = tiny_graph(4, &[&[(0, 1), (2, 3)], &[(0, 2)]]);
        let cfg = small_config(8, 2, Aggregator::Logit, 5);
        let a = init_params(&cfg, &g);
        let b = init_params(&cfg, &g);
        for (pa, pb) in a.store.iter().zip(b.store.iter()) {
            assert_eq!(pa.0, pb.0);
            assert_eq!(pa.1.data(), pb.1.data());
        }
    }

    #[test]
    fn init_respects_fan_in_bound() {
        // 16 nodes, no attributes → feature width 16 → first-step bound 0.25
        let edges: Vec<(u32, u32)> = (0..15).map(|i| (i, i + 1)).collect();
        let g = tiny_graph(16, &[&edges, &edges]);
        let cfg = small_config(8, 1, Aggregator::Logit, 3);
        let params = init_params(&cfg, &g);
        let w00 = params.store.value(params.layout.w[0][0]);
        assert_eq!(w00.shape(), (8, 16));
        assert!(w00.data().iter().all(|x| x.abs() <= 0.25));
        assert!(params.store.value(params.layout.b).data().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn logit_parameter_census() {
        let g = tiny_graph(5, &[&[(0, 1)], &[(1, 2)], &[(2, 3)]]);
        let cfg = small_config(4, 2, Aggregator::Logit, 1);
        let params = init_params(&cfg, &g);
        // 3·2 W + 3·2 U + M + b + 3 θ + 3 μ = 20
        assert_eq!(params.store.len(), 20);
        assert!(params.layout.v.is_empty());
        assert!(params.layout.q.is_none());
    }

    #[test]
    fn semantic_parameter_census() {
        let g = tiny_graph(5, &[&[(0, 1)], &[(1, 2)], &[(2, 3)]]);
        let cfg = small_config(4, 2, Aggregator::Semantic, 1);
        let params = init_params(&cfg, &g);
        // 3·2 W + 3·2 U + M + b + 3 V + Q + 3 μ = 21
        assert_eq!(params.store.len(), 21);
        assert!(params.layout.theta.is_empty());
    }

    #[test]
    fn sampling_weight_of_unit_case_is_e() {
        let (basis, _) = LayerGraph::from_raw_edges(0, 2, &[(0, 1)]).unwrap();
        let h = DenseMatrix::from_vec(2, 1, vec![1.0, 0.0]);
        let u = DenseMatrix::row_vector(vec![1.0, 1.0]);
        let ranked = sampling_weights(&basis, &u, &h, 0);
        assert_eq!(ranked.len(), 1);
        assert_eq!(ranked[0].0, 1);
        assert!((ranked[0].1 - math::exp(1.0)).abs() < 1e-12);
    }

    #[test]
    fn zero_sampling_row_ties_break_by_index() {
        let (basis, _) =
            LayerGraph::from_raw_edges(0, 4, &[(2, 0), (2, 3), (1, 2)]).unwrap();
        let h = DenseMatrix::from_vec(4, 2, vec![1.0; 8]);
        let u = DenseMatrix::row_vector(vec![0.0; 4]);
        let ranked = sampling_weights(&basis, &u, &h, 2);
        let order: Vec<u32> = ranked.iter().map(|&(n, _)| n).collect();
        assert_eq!(order, vec![0, 1, 3]);
        assert!(ranked.iter().all(|&(_, w)| (w - 1.0).abs() < 1e-15));
    }

    #[test]
    fn cap_applies_only_at_selection() {
        let (basis, _) = LayerGraph::from_raw_edges(0, 5, &[(0, 1), (0, 2), (0, 3)]).unwrap();
        let h = DenseMatrix::zeros(5, 2);
        let u = DenseMatrix::row_vector(vec![0.0; 4]);
        let ranked = sampling_weights(&basis, &u, &h, 0);
        assert_eq!(ranked.len(), 3);
        assert_eq!(select_neighbors(&ranked, 10).len(), 3);
        assert_eq!(select_neighbors(&ranked, 2).len(), 2);
        assert_eq!(select_neighbors(&[], 10), Vec::<u32>::new());
    }

    #[test]
    fn select_takes_top_of_fifteen() {
        let ranked: Vec<(u32, f64)> = (0..15).map(|i| (i as u32, 15.0 - i as f64)).collect();
        let sel = select_neighbors(&ranked, 10);
        assert_eq!(sel, (0..10).collect::<Vec<u32>>());
    }

    /// Propagation by hand: identity W, one neighbor.
    #[test]
    fn propagate_matches_hand_mean() {
        let g = tiny_graph(2, &[&[(0, 1)], &[(0, 1)]]);
        let cfg = small_config(2, 1, Aggregator::Logit, 1);
        let mut params = init_params(&cfg, &g);
        // feature width is 2, so W is 2x2; set it to identity
        let w = params.layout.w[0][0];
        *params.store.value_mut(w) = DenseMatrix::from_vec(2, 2, vec![1.0, 0.0, 0.0, 1.0]);
        let features = DenseMatrix::from_vec(2, 2, vec![1.0, 1.0, 3.0, 3.0]);
        let h = propagate_intra(&params, g.layer(0), &features, 0);
        assert_eq!(h.row(0), &[2.0, 2.0]);

        *params.store.value_mut(w) =
            DenseMatrix::from_vec(2, 2, vec![-1.0, 0.0, 0.0, -1.0]);
        let h = propagate_intra(&params, g.layer(0), &features, 0);
        assert_eq!(h.row(0), &[0.0, 0.0]);
    }

    #[test]
    fn isolated_node_propagates_alone() {
        // node 2 has no neighbors in the basis
        let g = tiny_graph(3, &[&[(0, 1)], &[(0, 1)]]);
        let cfg = small_config(3, 1, Aggregator::Logit, 1);
        let mut params = init_params(&cfg, &g);
        let w = params.layout.w[0][0];
        let wv = DenseMatrix::from_vec(
            3,
            3,
            vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0],
        );
        *params.store.value_mut(w) = wv.clone();
        let features =
            DenseMatrix::from_vec(3, 3, vec![0.0, 1.0, 0.0, 1.0, 0.0, 0.0, 0.25, -0.5, 2.0]);
        let h = propagate_intra(&params, g.layer(0), &features, 0);
        // relu(identity · own features): negatives clipped
        assert_eq!(h.row(2), &[0.25, 0.0, 2.0]);
    }

    #[test]
    fn projection_saturates_and_annihilates() {
        let g = tiny_graph(3, &[&[(0, 1)], &[(1, 2)]]);
        let cfg = small_config(2, 1, Aggregator::Logit, 1);
        let mut params = init_params(&cfg, &g);
        let h = DenseMatrix::from_vec(3, 2, vec![0.3, -0.7, 5.0, -5.0, 0.0, 0.0]);

        *params.store.value_mut(params.layout.m) = DenseMatrix::zeros(2, 2);
        let p = project_shared(&params, &h);
        assert!(p.data().iter().all(|&x| x == 0.0));

        *params.store.value_mut(params.layout.m) =
            DenseMatrix::from_vec(2, 2, vec![100.0, 0.0, 0.0, 100.0]);
        let p = project_shared(&params, &h);
        // tanh saturates to exactly ±1.0 in f64 for large arguments
        assert!(p.data().iter().all(|&x| x.abs() <= 1.0));
        assert!(p.get(1, 0) > 0.999 && p.get(1, 1) < -0.999);
    }

    fn forward_on(
        g: &MultiplexGraph,
        params: &MrgnnParams,
    ) -> ForwardPass {
        let bases: Vec<LayerGraph> = g.layers().to_vec();
        let features: Vec<DenseMatrix> = g
            .layers()
            .iter()
            .map(|l| build_node_features(g, l))
            .collect();
        forward(params, &bases, &features)
    }

    #[test]
    fn two_layer_attention_is_all_ones() {
        let g = tiny_graph(4, &[&[(0, 1), (2, 3)], &[(0, 2), (1, 3)]]);
        for agg in [Aggregator::Logit, Aggregator::Semantic] {
            let params = init_params(&small_config(4, 1, agg, 9), &g);
            let pass = forward_on(&g, &params);
            for n in 0..4 {
                assert!((pass.attention.get(n, 0, 1) - 1.0).abs() < 1e-12);
                assert!((pass.attention.get(n, 1, 0) - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_scorer_gives_uniform_attention() {
        let g = tiny_graph(
            4,
            &[&[(0, 1), (2, 3)], &[(0, 2), (1, 3)], &[(0, 3), (1, 2)]],
        );
        // logit: θ = 0 → all scores 0.5 → uniform 1/2
        let mut params = init_params(&small_config(4, 1, Aggregator::Logit, 9), &g);
        for &t in &params.layout.theta.clone() {
            params.store.value_mut(t).fill(0.0);
        }
        let pass = forward_on(&g, &params);
        for n in 0..4 {
            for p in 0..3 {
                for q in 0..3 {
                    if p != q {
                        assert!((pass.attention.get(n, p, q) - 0.5).abs() < 1e-12);
                    }
                }
            }
        }
        // semantic: Q = 0 → all scores 0 → uniform
        let mut params = init_params(&small_config(4, 1, Aggregator::Semantic, 9), &g);
        let q = params.layout.q.unwrap();
        params.store.value_mut(q).fill(0.0);
        let pass = forward_on(&g, &params);
        for n in 0..4 {
            assert!((pass.attention.get(n, 0, 1) - 0.5).abs() < 1e-12);
            assert!((pass.attention.get(n, 0, 2) - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn attention_rows_normalize_for_both_aggregators() {
        let g = tiny_graph(
            6,
            &[
                &[(0, 1), (1, 2), (3, 4), (4, 5)],
                &[(0, 2), (1, 3), (2, 4)],
                &[(0, 5), (1, 4), (2, 3)],
            ],
        );
        for agg in [Aggregator::Logit, Aggregator::Semantic] {
            let params = init_params(&small_config(6, 2, agg, 33), &g);
            let pass = forward_on(&g, &params);
            for n in 0..6 {
                for p in 0..3 {
                    assert!((pass.attention.row_sum(n, p) - 1.0).abs() < 1e-6);
                    for q in 0..3 {
                        let a = pass.attention.get(n, p, q);
                        assert!((0.0..=1.0).contains(&a));
                    }
                }
            }
        }
    }

    #[test]
    fn fuse_examples() {
        // |R|=2: z = h_p + h_q
        let hp = DenseMatrix::from_vec(1, 2, vec![0.2, -0.3]);
        let hq = DenseMatrix::from_vec(1, 2, vec![0.5, 0.1]);
        let mut attn = AttentionTensor::zeros(1, 2);
        attn.set(0, 0, 1, 1.0);
        let z = fuse(&[hp.clone(), hq.clone()], &attn, 0, 0);
        for (zi, want) in z.iter().zip([0.7, -0.2]) {
            assert!((zi - want).abs() < 1e-12);
        }

        // three layers, attention 0.5/0.5, h^(p)=0
        let h0 = DenseMatrix::from_vec(1, 2, vec![0.0, 0.0]);
        let h1 = DenseMatrix::from_vec(1, 2, vec![1.0, 0.0]);
        let h2 = DenseMatrix::from_vec(1, 2, vec![0.0, 1.0]);
        let mut attn = AttentionTensor::zeros(1, 3);
        attn.set(0, 0, 1, 0.5);
        attn.set(0, 0, 2, 0.5);
        let z = fuse(&[h0, h1, h2], &attn, 0, 0);
        for (zi, want) in z.iter().zip([0.5, 0.5]) {
            assert!((zi - want).abs() < 1e-12);
        }
    }

    #[test]
    fn fuse_doubles_when_all_layers_agree() {
        let v = DenseMatrix::from_vec(1, 3, vec![0.4, -0.2, 0.9]);
        let mut attn = AttentionTensor::zeros(1, 3);
        attn.set(0, 0, 1, 0.3);
        attn.set(0, 0, 2, 0.7);
        let z = fuse(&[v.clone(), v.clone(), v.clone()], &attn, 0, 0);
        for (zi, vi) in z.iter().zip(v.row(0).iter()) {
            assert!((zi - 2.0 * vi).abs() < 1e-12);
        }
    }

    #[test]
    fn score_is_symmetric_and_calibrated() {
        let z = DenseMatrix::from_vec(2, 1, vec![2.0, 2.0]);
        let mu = DenseMatrix::row_vector(vec![1.0]);
        let s = score_link(&z, &mu, 0, 1, ScoreSign::Standard);
        assert!((s - math::sigmoid(4.0)).abs() < 1e-15);
        assert!((s - 0.9820137900379085).abs() < 1e-12);
        assert_eq!(
            score_link(&z, &mu, 0, 1, ScoreSign::Standard),
            score_link(&z, &mu, 1, 0, ScoreSign::Standard)
        );

        let zero_mu = DenseMatrix::row_vector(vec![0.0]);
        assert_eq!(score_link(&z, &zero_mu, 0, 1, ScoreSign::Standard), 0.5);

        let lit = score_link(&z, &mu, 0, 1, ScoreSign::LiteralPrinted);
        assert!((lit - math::sigmoid(-4.0)).abs() < 1e-15);
    }

    #[test]
    fn tape_and_value_scoring_agree() {
        let g = tiny_graph(5, &[&[(0, 1), (1, 2), (3, 4)], &[(0, 3), (2, 4)]]);
        let params = init_params(&small_config(5, 2, Aggregator::Logit, 21), &g);
        let pass = forward_on(&g, &params);
        let fused_vals = pass.fused_values();
        let pairs = [(0u32, 1u32), (2, 4), (0, 4), (1, 3)];
        let mut tape = pass.tape;
        let scored = score_pairs_on_tape(
            &mut tape,
            &params.store,
            params.layout.mu[0],
            pass.fused[0],
            &pairs,
            ScoreSign::Standard,
        );
        let mu = params.store.value(params.layout.mu[0]);
        for (row, &(i, j)) in pairs.iter().enumerate() {
            let by_value = score_link(&fused_vals[0], mu, i, j, ScoreSign::Standard);
            let by_tape = tape.value(scored).get(row, 0);
            assert!((by_value - by_tape).abs() < 1e-14);
        }
    }

    #[test]
    fn forward_is_deterministic() {
        let g = tiny_graph(6, &[&[(0, 1), (2, 3), (4, 5)], &[(0, 2), (1, 4)]]);
        let params = init_params(&small_config(4, 2, Aggregator::Semantic, 77), &g);
        let a = forward_on(&g, &params);
        let b = forward_on(&g, &params);
        for (x, y) in a.fused.iter().zip(b.fused.iter()) {
            assert_eq!(a.tape.value(*x).data(), b.tape.value(*y).data());
        }
        assert_eq!(a.selections, b.selections);
    }

    /// Closed-form smoke test: K=1, identity-padded W, M=I, b=0, μ=[1,1],
    /// two layers (attention degenerates to 1). The score of pair (0,1) in
    /// layer 0 reduces to sigmoid(4·tanh²(0.5)).
    #[test]
    fn degenerate_configuration_has_closed_form() {
        let g = tiny_graph(4, &[&[(0, 1), (2, 3)], &[(0, 2), (1, 3)]]);
        let cfg = small_config(2, 1, Aggregator::Logit, 4);
        let mut params = init_params(&cfg, &g);
        // W picks feature coords 0,1 of the 4-wide mean
        let w_pad = DenseMatrix::from_vec(2, 4, vec![1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        for r in 0..2 {
            *params.store.value_mut(params.layout.w[r][0]) = w_pad.clone();
        }
        *params.store.value_mut(params.layout.m) =
            DenseMatrix::from_vec(2, 2, vec![1.0, 0.0, 0.0, 1.0]);
        for r in 0..2 {
            *params.store.value_mut(params.layout.mu[r]) =
                DenseMatrix::row_vector(vec![1.0, 1.0]);
        }
        let pass = forward_on(&g, &params);
        let fused = pass.fused_values();
        let mu = params.store.value(params.layout.mu[0]);
        let score = score_link(&fused[0], mu, 0, 1, ScoreSign::Standard);
        let t = math::tanh(0.5);
        assert!((score - math::sigmoid(4.0 * t * t)).abs() < 1e-12);
    }

    /// Consistently permuting node indices permutes the embeddings: the
    /// first-step W and U columns that act on the adjacency block are
    /// permuted along with the graph, everything else is left alone.
    #[test]
    #[allow(clippy::needless_range_loop)] // index loops mirror the permutation algebra
    fn forward_is_permutation_equivariant() {
        let n = 10usize;
        let layer0: Vec<(u32, u32)> = vec![
            (0, 1),
            (0, 2),
            (1, 2),
            (2, 3),
            (3, 4),
            (4, 5),
            (5, 6),
            (6, 7),
            (7, 8),
            (8, 9),
            (1, 9),
            (2, 8),
        ];
        let layer1: Vec<(u32, u32)> = vec![
            (0, 5),
            (1, 6),
            (2, 7),
            (3, 8),
            (4, 9),
            (0, 9),
            (2, 5),
            (3, 6),
        ];
        let perm: [u32; 10] = [3, 7, 0, 9, 1, 4, 8, 2, 6, 5];

        let g1 = tiny_graph(n, &[&layer0, &layer1]);
        let mapped = |edges: &[(u32, u32)]| {
            edges
                .iter()
                .map(|&(u, v)| (perm[u as usize], perm[v as usize]))
                .collect::<Vec<_>>()
        };
        let g2 = tiny_graph(n, &[&mapped(&layer0), &mapped(&layer1)]);

        let mut cfg = small_config(4, 2, Aggregator::Logit, 13);
        cfg.neighbor_cap = 2; // exercise the ranking cutoff
        let mut params1 = init_params(&cfg, &g1);
        // relu(U·x) pins about half the sampling scores to exactly zero,
        // and tied scores fall back to the index tie-break, which is not
        // permutation-invariant; strictly positive U keeps scores distinct
        // so the ranking itself is what gets tested
        for r in 0..2 {
            for k in 0..cfg.steps {
                let u_id = params1.layout.u[r][k];
                let positive = params1.store.value(u_id).map(|x| x.abs() + 0.1);
                *params1.store.value_mut(u_id) = positive;
            }
        }
        let mut params2 = params1.clone();
        // permute the adjacency-block columns of first-step W and both
        // halves of first-step U
        for r in 0..2 {
            let w_id = params2.layout.w[r][0];
            let w1 = params1.store.value(w_id).clone();
            let mut w2 = DenseMatrix::zeros(w1.rows(), w1.cols());
            for i in 0..w1.rows() {
                for c in 0..n {
                    w2.set(i, perm[c] as usize, w1.get(i, c));
                }
            }
            *params2.store.value_mut(w_id) = w2;

            let u_id = params2.layout.u[r][0];
            let u1 = params1.store.value(u_id).clone();
            let mut u2 = DenseMatrix::zeros(1, u1.cols());
            for c in 0..n {
                u2.set(0, perm[c] as usize, u1.get(0, c));
                u2.set(0, n + perm[c] as usize, u1.get(0, n + c));
            }
            *params2.store.value_mut(u_id) = u2;
        }

        let pass1 = forward_on(&g1, &params1);
        let pass2 = forward_on(&g2, &params2);
        let fused1 = pass1.fused_values();
        let fused2 = pass2.fused_values();
        for r in 0..2 {
            for node in 0..n {
                let a = fused1[r].row(node);
                let b = fused2[r].row(perm[node] as usize);
                for (x, y) in a.iter().zip(b.iter()) {
                    assert!(
                        (x - y).abs() < 1e-9,
                        "layer {r} node {node}: {x} vs {y}"
                    );
                }
            }
        }
    }
}
