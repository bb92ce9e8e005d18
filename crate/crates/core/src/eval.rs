//! Evaluation of trained models: per-layer and macro AUC / Micro-F1,
//! weak-tie-restricted metrics, training-size and embedding-dimension
//! sweeps, attention-distribution analysis, and the fixed mean-attention
//! predictor.
//!
//! Scoring always runs on embeddings propagated over the *training*
//! subgraphs, so no test or validation edge leaks into message passing.
//! Weak ties are classified against each layer's full-graph community
//! partition, which the caller supplies (communities are a property of the
//! observed network, not of a particular split).

use alloc::vec::Vec;

use crate::community::{label_ties, CommunityError, CommunityPartition, Tie};
use crate::graph::{build_node_features, MultiplexGraph};
use crate::matrix::DenseMatrix;
use crate::metrics::{auc, micro_f1, MetricError};
use crate::model::{
    forward, score_link, Aggregator, AttentionTensor, ModelConfig, MrgnnParams, ScoreSign,
};
use crate::split::{split_edges, split_with_train_fraction, DataSplit, SplitError};
use crate::train::{train, training_inputs, TrainConfig, TrainError};

/// Micro-F1 decision threshold used throughout.
pub const F1_THRESHOLD: f64 = 0.5;

#[derive(Clone, Debug, PartialEq)]
pub enum EvalError {
    Metric(MetricError),
    Community(CommunityError),
    /// Partitions must cover exactly the graph's layers.
    PartitionMismatch { expected: usize, found: usize },
    EmptyTest { layer: usize },
}

impl From<MetricError> for EvalError {
    fn from(e: MetricError) -> Self {
        EvalError::Metric(e)
    }
}

impl From<CommunityError> for EvalError {
    fn from(e: CommunityError) -> Self {
        EvalError::Community(e)
    }
}

impl core::fmt::Display for EvalError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            EvalError::Metric(e) => write!(f, "metric failure: {e}"),
            EvalError::Community(e) => write!(f, "community failure: {e}"),
            EvalError::PartitionMismatch { expected, found } => {
                write!(f, "expected {expected} partitions, found {found}")
            }
            EvalError::EmptyTest { layer } => write!(f, "layer {layer} has an empty test set"),
        }
    }
}

impl core::error::Error for EvalError {}

/// Test-set metrics for one layer. Weak-tie metrics are absent — never a
/// fabricated number — when the layer has no weak test positives or no weak
/// test negatives.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerMetrics {
    pub layer_id: usize,
    pub auc: f64,
    pub micro_f1: f64,
    pub weak_auc: Option<f64>,
    pub weak_micro_f1: Option<f64>,
    pub test_pos: usize,
    pub test_neg: usize,
    pub weak_pos: usize,
    pub weak_neg: usize,
}

/// Full evaluation of one trained model on one split.
#[derive(Clone, Debug, PartialEq)]
pub struct EvaluationReport {
    pub layers: Vec<LayerMetrics>,
    /// Unweighted mean over layers.
    pub macro_auc: f64,
    pub macro_micro_f1: f64,
    /// Unweighted mean over the layers whose weak metrics are present.
    pub weak_macro_auc: Option<f64>,
    pub weak_macro_micro_f1: Option<f64>,
    // config echo
    pub aggregator: Aggregator,
    pub embed_dim: usize,
    pub init_seed: u64,
}

/// Score every test pair of every layer and compute overall plus
/// weak-tie-restricted metrics. `partitions[r]` must be layer r's
/// full-graph community partition.
pub fn evaluate(
    params: &MrgnnParams,
    graph: &MultiplexGraph,
    split: &DataSplit,
    partitions: &[CommunityPartition],
) -> Result<EvaluationReport, EvalError> {
    if partitions.len() != graph.num_layers() {
        return Err(EvalError::PartitionMismatch {
            expected: graph.num_layers(),
            found: partitions.len(),
        });
    }
    let (bases, features) = training_inputs(graph, split);
    let pass = forward(params, &bases, &features);
    let fused = pass.fused_values();

    let mut layers = Vec::with_capacity(split.layers.len());
    for (r, ls) in split.layers.iter().enumerate() {
        if ls.test_pos.is_empty() || ls.test_neg.is_empty() {
            return Err(EvalError::EmptyTest { layer: r });
        }
        let mu = params.store.value(params.layout.mu[r]);
        let score =
            |&(i, j): &(u32, u32)| score_link(&fused[r], mu, i, j, params.config.score_sign);

        let mut scores: Vec<f64> = Vec::with_capacity(ls.test_pos.len() + ls.test_neg.len());
        let mut labels: Vec<bool> = Vec::with_capacity(scores.capacity());
        scores.extend(ls.test_pos.iter().map(score));
        labels.extend(core::iter::repeat_n(true, ls.test_pos.len()));
        scores.extend(ls.test_neg.iter().map(score));
        labels.extend(core::iter::repeat_n(false, ls.test_neg.len()));

        let overall_auc = auc(&scores, &labels)?;
        let overall_f1 = micro_f1(&scores, &labels, F1_THRESHOLD)?;

        let weak_of = |pairs: &[(u32, u32)]| -> Result<Vec<(u32, u32)>, EvalError> {
            Ok(label_ties(pairs, &partitions[r])?
                .into_iter()
                .filter(|t| t.label == Tie::Weak)
                .map(|t| t.edge)
                .collect())
        };
        let weak_pos = weak_of(&ls.test_pos)?;
        let weak_neg = weak_of(&ls.test_neg)?;

        let (weak_auc, weak_f1) = if weak_pos.is_empty() || weak_neg.is_empty() {
            (None, None)
        } else {
            let mut wscores: Vec<f64> = Vec::with_capacity(weak_pos.len() + weak_neg.len());
            let mut wlabels: Vec<bool> = Vec::with_capacity(wscores.capacity());
            wscores.extend(weak_pos.iter().map(score));
            wlabels.extend(core::iter::repeat_n(true, weak_pos.len()));
            wscores.extend(weak_neg.iter().map(score));
            wlabels.extend(core::iter::repeat_n(false, weak_neg.len()));
            (
                Some(auc(&wscores, &wlabels)?),
                Some(micro_f1(&wscores, &wlabels, F1_THRESHOLD)?),
            )
        };

        layers.push(LayerMetrics {
            layer_id: r,
            auc: overall_auc,
            micro_f1: overall_f1,
            weak_auc,
            weak_micro_f1: weak_f1,
            test_pos: ls.test_pos.len(),
            test_neg: ls.test_neg.len(),
            weak_pos: weak_pos.len(),
            weak_neg: weak_neg.len(),
        });
    }

    let macro_auc = mean(layers.iter().map(|l| l.auc)).expect("≥ 2 layers");
    let macro_micro_f1 = mean(layers.iter().map(|l| l.micro_f1)).expect("≥ 2 layers");
    let weak_macro_auc = mean(layers.iter().filter_map(|l| l.weak_auc));
    let weak_macro_micro_f1 = mean(layers.iter().filter_map(|l| l.weak_micro_f1));

    Ok(EvaluationReport {
        layers,
        macro_auc,
        macro_micro_f1,
        weak_macro_auc,
        weak_macro_micro_f1,
        aggregator: params.config.aggregator,
        embed_dim: params.config.embed_dim,
        init_seed: params.config.init_seed,
    })
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let collected: Vec<f64> = values.collect();
    if collected.is_empty() {
        None
    } else {
        Some(collected.iter().sum::<f64>() / collected.len() as f64)
    }
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let m = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n;
    (m, crate::math::sqrt(var))
}

#[derive(Clone, Debug, PartialEq)]
pub enum SweepError {
    Split(SplitError),
    Train(TrainError),
    Eval(EvalError),
    Community(CommunityError),
    EmptyGrid,
}

impl From<SplitError> for SweepError {
    fn from(e: SplitError) -> Self {
        SweepError::Split(e)
    }
}
impl From<TrainError> for SweepError {
    fn from(e: TrainError) -> Self {
        SweepError::Train(e)
    }
}
impl From<EvalError> for SweepError {
    fn from(e: EvalError) -> Self {
        SweepError::Eval(e)
    }
}
impl From<CommunityError> for SweepError {
    fn from(e: CommunityError) -> Self {
        SweepError::Community(e)
    }
}

impl core::fmt::Display for SweepError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            SweepError::Split(e) => write!(f, "sweep split failed: {e}"),
            SweepError::Train(e) => write!(f, "sweep training failed: {e}"),
            SweepError::Eval(e) => write!(f, "sweep evaluation failed: {e}"),
            SweepError::Community(e) => write!(f, "sweep clustering failed: {e}"),
            SweepError::EmptyGrid => write!(f, "sweep needs fractions/dims, variants and seeds"),
        }
    }
}

impl core::error::Error for SweepError {}

/// One (training fraction, variant) cell aggregated over seeds.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainSizeCell {
    pub train_fraction: f64,
    pub aggregator: Aggregator,
    pub mean_macro_auc: f64,
    pub std_macro_auc: f64,
    pub mean_macro_micro_f1: f64,
    /// Mean over the seeds whose reports carry weak metrics.
    pub weak_mean_macro_auc: Option<f64>,
    pub per_seed: Vec<EvaluationReport>,
}

/// One (embedding dimension, variant) cell aggregated over seeds.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbedDimCell {
    pub embed_dim: usize,
    pub aggregator: Aggregator,
    pub mean_macro_auc: f64,
    pub std_macro_auc: f64,
    pub per_seed: Vec<EvaluationReport>,
}

/// Louvain partitions of every full layer, seeded once for the whole
/// experiment so weak-tie labels stay fixed across runs.
pub fn full_graph_partitions(
    graph: &MultiplexGraph,
    seed: u64,
) -> Result<Vec<CommunityPartition>, CommunityError> {
    graph
        .layers()
        .iter()
        .map(|layer| crate::community::louvain_partition(layer, seed))
        .collect()
}

/// Vary the training fraction: train on `f` of each layer's links and test
/// on everything else plus matched negatives. Each seed drives the split,
/// the parameter initialization, and the optimizer. `val_within` carves an
/// early-stopping validation set out of the training portion (0 disables
/// early stopping and honors the plain train/test protocol).
pub fn sweep_training_size(
    graph: &MultiplexGraph,
    fractions: &[f64],
    variants: &[ModelConfig],
    train_cfg: &TrainConfig,
    seeds: &[u64],
    val_within: f64,
) -> Result<Vec<TrainSizeCell>, SweepError> {
    if fractions.is_empty() || variants.is_empty() || seeds.is_empty() {
        return Err(SweepError::EmptyGrid);
    }
    let partitions = full_graph_partitions(graph, train_cfg.seed)?;
    let mut cells = Vec::with_capacity(fractions.len() * variants.len());
    for &fraction in fractions {
        for variant in variants {
            let mut per_seed = Vec::with_capacity(seeds.len());
            for &seed in seeds {
                let split = split_with_train_fraction(graph, fraction, val_within, seed)?;
                let report = run_once(graph, &split, variant, train_cfg, seed, &partitions)?;
                per_seed.push(report);
            }
            cells.push(summarize_size_cell(fraction, variant.aggregator, per_seed));
        }
    }
    Ok(cells)
}

/// Vary the embedding dimension under the standard split protocol
/// (`test_frac`/`val_frac` of [`TrainConfig`]-driven runs fixed at
/// 0.1/0.1).
pub fn sweep_embedding_dim(
    graph: &MultiplexGraph,
    dims: &[usize],
    variants: &[ModelConfig],
    train_cfg: &TrainConfig,
    seeds: &[u64],
) -> Result<Vec<EmbedDimCell>, SweepError> {
    if dims.is_empty() || variants.is_empty() || seeds.is_empty() {
        return Err(SweepError::EmptyGrid);
    }
    let partitions = full_graph_partitions(graph, train_cfg.seed)?;
    let mut cells = Vec::with_capacity(dims.len() * variants.len());
    for &dim in dims {
        for variant in variants {
            let mut shaped = variant.clone();
            shaped.embed_dim = dim;
            let mut per_seed = Vec::with_capacity(seeds.len());
            for &seed in seeds {
                let split = split_edges(graph, 0.1, 0.1, seed)?;
                let report = run_once(graph, &split, &shaped, train_cfg, seed, &partitions)?;
                per_seed.push(report);
            }
            let aucs: Vec<f64> = per_seed.iter().map(|r| r.macro_auc).collect();
            let (mean_auc, std_auc) = mean_std(&aucs);
            cells.push(EmbedDimCell {
                embed_dim: dim,
                aggregator: variant.aggregator,
                mean_macro_auc: mean_auc,
                std_macro_auc: std_auc,
                per_seed,
            });
        }
    }
    Ok(cells)
}

fn run_once(
    graph: &MultiplexGraph,
    split: &DataSplit,
    variant: &ModelConfig,
    train_cfg: &TrainConfig,
    seed: u64,
    partitions: &[CommunityPartition],
) -> Result<EvaluationReport, SweepError> {
    let mut mc = variant.clone();
    mc.init_seed = seed;
    let mut tc = train_cfg.clone();
    tc.seed = seed;
    let (params, _) = train(graph, split, &mc, &tc)?;
    Ok(evaluate(&params, graph, split, partitions)?)
}

fn summarize_size_cell(
    fraction: f64,
    aggregator: Aggregator,
    per_seed: Vec<EvaluationReport>,
) -> TrainSizeCell {
    let aucs: Vec<f64> = per_seed.iter().map(|r| r.macro_auc).collect();
    let (mean_auc, std_auc) = mean_std(&aucs);
    let f1s: Vec<f64> = per_seed.iter().map(|r| r.macro_micro_f1).collect();
    let weak = mean(per_seed.iter().filter_map(|r| r.weak_macro_auc));
    TrainSizeCell {
        train_fraction: fraction,
        aggregator,
        mean_macro_auc: mean_auc,
        std_macro_auc: std_auc,
        mean_macro_micro_f1: f1s.iter().sum::<f64>() / f1s.len() as f64,
        weak_mean_macro_auc: weak,
        per_seed,
    }
}

/// Number of histogram bins in [`PairAttention`].
pub const ATTENTION_BINS: usize = 20;

/// Distribution of one ordered attention coefficient a^(to←from) over
/// nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct PairAttention {
    pub to_layer: usize,
    pub from_layer: usize,
    pub mean: f64,
    /// Population standard deviation over nodes.
    pub std: f64,
    /// 20 equal bins over [0,1]; a value of exactly 1 lands in the last
    /// bin.
    pub histogram: [u32; ATTENTION_BINS],
}

/// Node-level attention distributions for every ordered layer pair.
#[derive(Clone, Debug, PartialEq)]
pub struct AttentionStats {
    pub num_nodes: usize,
    pub num_layers: usize,
    /// All ordered pairs (to, from), to ≠ from, in row-major order.
    pub pairs: Vec<PairAttention>,
}

impl AttentionStats {
    pub fn pair(&self, to_layer: usize, from_layer: usize) -> Option<&PairAttention> {
        self.pairs
            .iter()
            .find(|p| p.to_layer == to_layer && p.from_layer == from_layer)
    }

    /// Mean attention a^(to←from); 0 when to == from or out of range.
    pub fn mean(&self, to_layer: usize, from_layer: usize) -> f64 {
        self.pair(to_layer, from_layer).map_or(0.0, |p| p.mean)
    }

    /// Σ over sources of mean attention into `to_layer`; 1 ± 1e-6 by the
    /// softmax normalization.
    pub fn row_mean_sum(&self, to_layer: usize) -> f64 {
        self.pairs
            .iter()
            .filter(|p| p.to_layer == to_layer)
            .map(|p| p.mean)
            .sum()
    }
}

/// Summarize a raw attention tensor into per-pair statistics.
pub fn stats_from_tensor(attention: &AttentionTensor) -> AttentionStats {
    let n = attention.num_nodes();
    let layers = attention.num_layers();
    let mut pairs = Vec::new();
    for p in 0..layers {
        for q in 0..layers {
            if p == q {
                continue;
            }
            let values: Vec<f64> = (0..n).map(|node| attention.get(node, p, q)).collect();
            let (m, s) = mean_std(&values);
            let mut histogram = [0u32; ATTENTION_BINS];
            for &v in &values {
                let bin = ((v * ATTENTION_BINS as f64) as usize).min(ATTENTION_BINS - 1);
                histogram[bin] += 1;
            }
            pairs.push(PairAttention {
                to_layer: p,
                from_layer: q,
                mean: m,
                std: s,
                histogram,
            });
        }
    }
    AttentionStats {
        num_nodes: n,
        num_layers: layers,
        pairs,
    }
}

/// Attention distributions of a trained model over the full graph
/// (analysis runs message passing on complete layers, not a split).
pub fn attention_stats(params: &MrgnnParams, graph: &MultiplexGraph) -> AttentionStats {
    let bases = graph.layers().to_vec();
    let features: Vec<DenseMatrix> = bases
        .iter()
        .map(|basis| build_node_features(graph, basis))
        .collect();
    let pass = forward(params, &bases, &features);
    stats_from_tensor(&pass.attention)
}

/// Fixed-attention link predictor: layer p's intra-layer probability plus
/// each other layer's probability weighted by the *mean* attention
/// a^(p←q), evaluated on the per-layer projected embeddings. The raw sum
/// lives in [0, R]; [`predict`](MeanAttentionPredictor::predict) clamps it
/// to [0,1] for metric use.
#[derive(Clone, Debug)]
pub struct MeanAttentionPredictor {
    pub projected: Vec<DenseMatrix>,
    pub mu: Vec<DenseMatrix>,
    /// mean_attention[p][q]; the diagonal is 0.
    pub mean_attention: Vec<Vec<f64>>,
    pub score_sign: ScoreSign,
}

impl MeanAttentionPredictor {
    /// Build from a trained model and its attention statistics, with
    /// embeddings propagated over the full graph.
    pub fn new(params: &MrgnnParams, graph: &MultiplexGraph, stats: &AttentionStats) -> Self {
        let bases = graph.layers().to_vec();
        let features: Vec<DenseMatrix> = bases
            .iter()
            .map(|basis| build_node_features(graph, basis))
            .collect();
        let pass = forward(params, &bases, &features);
        let projected = pass.projected_values();
        let layers = graph.num_layers();
        let mu = (0..layers)
            .map(|r| params.store.value(params.layout.mu[r]).clone())
            .collect();
        let mean_attention = (0..layers)
            .map(|p| (0..layers).map(|q| stats.mean(p, q)).collect())
            .collect();
        MeanAttentionPredictor {
            projected,
            mu,
            mean_attention,
            score_sign: params.config.score_sign,
        }
    }

    /// Unclamped combined probability (can exceed 1 by construction).
    pub fn predict_raw(&self, i: u32, j: u32, layer: usize) -> f64 {
        let mut p = score_link(&self.projected[layer], &self.mu[layer], i, j, self.score_sign);
        for q in 0..self.projected.len() {
            if q == layer {
                continue;
            }
            p += self.mean_attention[layer][q]
                * score_link(&self.projected[q], &self.mu[q], i, j, self.score_sign);
        }
        p
    }

    /// Combined probability clamped to [0,1].
    pub fn predict(&self, i: u32, j: u32, layer: usize) -> f64 {
        self.predict_raw(i, j, layer).clamp(0.0, 1.0)
    }
}

/// Convenience wrapper matching the one-shot call shape; prefer building a
/// [`MeanAttentionPredictor`] once when scoring many pairs.
pub fn mean_attention_predict(
    params: &MrgnnParams,
    graph: &MultiplexGraph,
    stats: &AttentionStats,
    i: u32,
    j: u32,
    layer: usize,
) -> f64 {
    MeanAttentionPredictor::new(params, graph, stats).predict(i, j, layer)
}

/// Train one model per seed under the standard protocol and macro-average
/// everything; the workhorse behind the protocol experiments.
pub fn seeded_reports(
    graph: &MultiplexGraph,
    variant: &ModelConfig,
    train_cfg: &TrainConfig,
    seeds: &[u64],
    test_frac: f64,
    val_frac: f64,
    partitions: &[CommunityPartition],
) -> Result<Vec<EvaluationReport>, SweepError> {
    let mut reports = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let split = split_edges(graph, test_frac, val_frac, seed)?;
        reports.push(run_once(graph, &split, variant, train_cfg, seed, partitions)?);
    }
    Ok(reports)
}
