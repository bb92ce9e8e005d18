//! End-to-end experiment pipeline: split → full-graph communities → train
//! → evaluate → attention analysis, repeated over seeds and aggregated.
//!
//! Each run seed drives everything random in that run — the edge split,
//! the negative draw, the parameter initialization, and the epoch
//! shuffling — while the Louvain partitions that define weak ties are
//! computed once per experiment from a dedicated partition seed, so all
//! runs answer the same question about the same tie labels.

use alloc::vec::Vec;

use crate::community::CommunityPartition;
use crate::eval::{
    attention_stats, evaluate, full_graph_partitions, AttentionStats, EvaluationReport,
    SweepError,
};
use crate::graph::MultiplexGraph;
use crate::model::ModelConfig;
use crate::split::split_edges;
use crate::train::{train, TrainConfig, TrainReport};

/// Everything a protocol run needs besides the graph and the seed list.
#[derive(Clone, Debug)]
pub struct RunConfig {
    /// Model template; `init_seed` is overridden by each run seed.
    pub model: ModelConfig,
    /// Optimizer template; `seed` is overridden by each run seed.
    pub train: TrainConfig,
    pub test_frac: f64,
    pub val_frac: f64,
    /// Louvain seed for the experiment-wide weak-tie partitions.
    pub partition_seed: u64,
}

impl RunConfig {
    /// Standard protocol: 10% test, 10% validation.
    pub fn new(model: ModelConfig, train: TrainConfig) -> Self {
        RunConfig {
            model,
            train,
            test_frac: 0.1,
            val_frac: 0.1,
            partition_seed: 0,
        }
    }
}

/// One seed's outcome.
#[derive(Clone, Debug, PartialEq)]
pub struct SeedRun {
    pub seed: u64,
    pub report: EvaluationReport,
    pub train_report: TrainReport,
    /// Attention distributions of the trained model over the full graph.
    pub attention: AttentionStats,
}

/// Seed-averaged outcome of a protocol experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct AggregateReport {
    pub seeds: Vec<u64>,
    pub runs: Vec<SeedRun>,
    pub mean_macro_auc: f64,
    pub std_macro_auc: f64,
    pub mean_macro_micro_f1: f64,
    /// Present when at least one run produced weak metrics.
    pub weak_mean_macro_auc: Option<f64>,
    pub weak_std_macro_auc: Option<f64>,
    pub per_layer_mean_auc: Vec<f64>,
    /// mean_attention[p][q] = a^(p←q) averaged over nodes and runs; the
    /// diagonal is 0.
    pub mean_attention: Vec<Vec<f64>>,
}

/// Run the full pipeline for one seed against precomputed partitions.
pub fn run_single(
    graph: &MultiplexGraph,
    cfg: &RunConfig,
    seed: u64,
    partitions: &[CommunityPartition],
) -> Result<SeedRun, SweepError> {
    run_single_with_params(graph, cfg, seed, partitions).map(|(run, _)| run)
}

/// Like [`run_single`], but also hands back the trained parameters for
/// callers that persist checkpoints or feed downstream analyses.
pub fn run_single_with_params(
    graph: &MultiplexGraph,
    cfg: &RunConfig,
    seed: u64,
    partitions: &[CommunityPartition],
) -> Result<(SeedRun, crate::model::MrgnnParams), SweepError> {
    let split = split_edges(graph, cfg.test_frac, cfg.val_frac, seed)?;
    let mut model = cfg.model.clone();
    model.init_seed = seed;
    let mut train_cfg = cfg.train.clone();
    train_cfg.seed = seed;
    let (params, train_report) = train(graph, &split, &model, &train_cfg)?;
    let report = evaluate(&params, graph, &split, partitions)?;
    let attention = attention_stats(&params, graph);
    Ok((
        SeedRun {
            seed,
            report,
            train_report,
            attention,
        },
        params,
    ))
}

/// Run the protocol once per seed and aggregate.
pub fn run_protocol(
    graph: &MultiplexGraph,
    cfg: &RunConfig,
    seeds: &[u64],
) -> Result<AggregateReport, SweepError> {
    let partitions = full_graph_partitions(graph, cfg.partition_seed)?;
    let mut runs = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        runs.push(run_single(graph, cfg, seed, &partitions)?);
    }
    Ok(aggregate_runs(seeds, runs, graph.num_layers()))
}

/// Seed-average a set of finished runs (the tail of [`run_protocol`],
/// exposed for callers that drive [`run_single_with_params`] themselves).
pub fn aggregate_runs(seeds: &[u64], runs: Vec<SeedRun>, num_layers: usize) -> AggregateReport {
    let aucs: Vec<f64> = runs.iter().map(|r| r.report.macro_auc).collect();
    let (mean_macro_auc, std_macro_auc) = mean_std(&aucs);
    let f1s: Vec<f64> = runs.iter().map(|r| r.report.macro_micro_f1).collect();
    let weak: Vec<f64> = runs
        .iter()
        .filter_map(|r| r.report.weak_macro_auc)
        .collect();
    let (weak_mean, weak_std) = if weak.is_empty() {
        (None, None)
    } else {
        let (m, s) = mean_std(&weak);
        (Some(m), Some(s))
    };
    let per_layer_mean_auc = (0..num_layers)
        .map(|r| {
            runs.iter().map(|run| run.report.layers[r].auc).sum::<f64>() / runs.len() as f64
        })
        .collect();
    let mean_attention = (0..num_layers)
        .map(|p| {
            (0..num_layers)
                .map(|q| {
                    if p == q {
                        0.0
                    } else {
                        runs.iter().map(|run| run.attention.mean(p, q)).sum::<f64>()
                            / runs.len() as f64
                    }
                })
                .collect()
        })
        .collect();
    AggregateReport {
        seeds: seeds.to_vec(),
        runs,
        mean_macro_auc,
        std_macro_auc,
        mean_macro_micro_f1: f1s.iter().sum::<f64>() / f1s.len() as f64,
        weak_mean_macro_auc: weak_mean,
        weak_std_macro_auc: weak_std,
        per_layer_mean_auc,
        mean_attention,
    }
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let m = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n;
    (m, crate::math::sqrt(var))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Aggregator;
    use crate::synthetic;

    fn tiny_cfg(seed: u64) -> RunConfig {
        let mut model = ModelConfig::new(Aggregator::Logit, seed);
        model.embed_dim = 4;
        let mut train = TrainConfig::new(seed);
        train.max_epochs = 4;
        let mut cfg = RunConfig::new(model, train);
        cfg.test_frac = 0.2;
        cfg.val_frac = 0.2;
        cfg
    }

    #[test]
    fn protocol_aggregates_over_seeds() {
        let graph = synthetic::toy_multiplex();
        let cfg = tiny_cfg(0);
        let agg = run_protocol(&graph, &cfg, &[1, 2, 3]).unwrap();
        assert_eq!(agg.seeds, [1, 2, 3]);
        assert_eq!(agg.runs.len(), 3);
        assert_eq!(agg.per_layer_mean_auc.len(), 3);
        let hand_mean: f64 = agg
            .runs
            .iter()
            .map(|r| r.report.macro_auc)
            .sum::<f64>()
            / 3.0;
        assert!((agg.mean_macro_auc - hand_mean).abs() < 1e-15);
        assert!(agg.std_macro_auc >= 0.0);
        for run in &agg.runs {
            assert_eq!(run.report.init_seed, run.seed);
        }
    }

    #[test]
    fn protocol_is_deterministic() {
        let graph = synthetic::toy_multiplex();
        let cfg = tiny_cfg(0);
        let a = run_protocol(&graph, &cfg, &[5, 6]).unwrap();
        let b = run_protocol(&graph, &cfg, &[5, 6]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn aggregated_attention_rows_stay_normalized() {
        let graph = synthetic::toy_multiplex();
        let cfg = tiny_cfg(0);
        let agg = run_protocol(&graph, &cfg, &[7, 8]).unwrap();
        for p in 0..3 {
            let row: f64 = agg.mean_attention[p].iter().sum();
            assert!((row - 1.0).abs() < 1e-6, "layer {p} row sum {row}");
        }
    }

    #[test]
    #[ignore]
    fn pilot_standin() {
        use crate::model::Aggregator;
        let agg_kind = match std::env::var("PILOT_AGG").as_deref() {
            Ok("semantic") => Aggregator::Semantic,
            _ => Aggregator::Logit,
        };
        let dim: usize = std::env::var("PILOT_DIM")
            .ok()
            .and_then(|s| s.parse().ok())
            .unwrap_or(128);
        let nseeds: u64 = std::env::var("PILOT_SEEDS")
            .ok()
            .and_then(|s| s.parse().ok())
            .unwrap_or(2);
        let graph = synthetic::physician_standin(0);
        let mut model = ModelConfig::new(agg_kind, 0);
        model.embed_dim = dim;
        if let Ok(k) = std::env::var("PILOT_K") {
            model.steps = k.parse().unwrap();
        }
        let mut train = TrainConfig::new(0);
        if let Ok(p) = std::env::var("PILOT_PATIENCE") {
            train.patience = p.parse().unwrap();
        }
        if let Ok(me) = std::env::var("PILOT_EPOCHS") {
            train.max_epochs = me.parse().unwrap();
        }
        if let Ok(b) = std::env::var("PILOT_BATCH") {
            train.batch_size = crate::train::BatchSize::Size(b.parse().unwrap());
        }
        let cfg = RunConfig::new(model, train);
        let seed_base: u64 = std::env::var("PILOT_BASE").ok().and_then(|s| s.parse().ok()).unwrap_or(0);
        let seeds: Vec<u64> = (seed_base..seed_base + nseeds).collect();
        let t0 = std::time::Instant::now();
        let agg = run_protocol(&graph, &cfg, &seeds).unwrap();
        let dt = t0.elapsed().as_secs_f64();

        // train-pair AUC of the first seed's final model
        if std::env::var("PILOT_TRAINAUC").is_ok() {
            let seed = seeds[0];
            let split = crate::split::split_edges(&graph, 0.1, 0.1, seed).unwrap();
            let mut model = cfg.model.clone();
            model.init_seed = seed;
            let mut tc = cfg.train.clone();
            tc.seed = seed;
            let (params, _) = crate::train::train(&graph, &split, &model, &tc).unwrap();
            let (bases, features) = crate::train::training_inputs(&graph, &split);
            let pass = crate::model::forward(&params, &bases, &features);
            let fused = pass.fused_values();
            for (r, ls) in split.layers.iter().enumerate() {
                let mu = params.store.value(params.layout.mu[r]);
                let mut scores = alloc::vec::Vec::new();
                let mut labels = alloc::vec::Vec::new();
                for &(i, j) in &ls.train_pos {
                    scores.push(crate::model::score_link(
                        &fused[r], mu, i, j, model.score_sign,
                    ));
                    labels.push(true);
                }
                for &(i, j) in &ls.train_neg {
                    scores.push(crate::model::score_link(
                        &fused[r], mu, i, j, model.score_sign,
                    ));
                    labels.push(false);
                }
                let auc = crate::metrics::auc(&scores, &labels).unwrap();

                let part_auc = |pos: &[(u32, u32)], neg: &[(u32, u32)]| {
                    let mut s = alloc::vec::Vec::new();
                    let mut l = alloc::vec::Vec::new();
                    for &(i, j) in pos {
                        s.push(crate::model::score_link(&fused[r], mu, i, j, model.score_sign));
                        l.push(true);
                    }
                    for &(i, j) in neg {
                        s.push(crate::model::score_link(&fused[r], mu, i, j, model.score_sign));
                        l.push(false);
                    }
                    crate::metrics::auc(&s, &l).unwrap()
                };
                let val_auc = part_auc(&ls.val_pos, &ls.val_neg);
                let test_auc = part_auc(&ls.test_pos, &ls.test_neg);
                std::println!(
                    "  layer {r}: train AUC {auc:.4} val {val_auc:.4} test {test_auc:.4} (n_val {}+{} n_test {}+{})",
                    ls.val_pos.len(), ls.val_neg.len(), ls.test_pos.len(), ls.test_neg.len()
                );
            }
        }
        for run in &agg.runs {
            std::println!(
                "seed {}: macro {:.4} weak {:?} epochs {} best {}",
                run.seed,
                run.report.macro_auc,
                run.report.weak_macro_auc.map(|x| (x * 1e4).round() / 1e4),
                run.train_report.epochs.len(),
                run.train_report.best_epoch
            );
            if std::env::var("PILOT_ATTN").is_ok() {
                for pa in &run.attention.pairs {
                    std::println!(
                        "  a({}<-{}) mean {:.4} std {:.4}",
                        pa.to_layer,
                        pa.from_layer,
                        pa.mean,
                        pa.std
                    );
                }
            }
            let stride: usize = std::env::var("PILOT_STRIDE")
                .ok()
                .and_then(|s| s.parse().ok())
                .unwrap_or(10);
            for e in run.train_report.epochs.iter().step_by(stride) {
                std::println!(
                    "  epoch {:3}: loss {:.9} val {:?}",
                    e.epoch,
                    e.train_loss,
                    e.val_auc_macro.map(|x| (x * 1e4).round() / 1e4)
                );
            }
        }
        std::println!(
            "{agg_kind:?} d={dim}: mean macro {:.4} weak {:?} per-layer {:?} attn {:?} wall {dt:.1}s",
            agg.mean_macro_auc,
            agg.weak_mean_macro_auc.map(|x| (x * 1e4).round() / 1e4),
            agg.per_layer_mean_auc
                .iter()
                .map(|x| (x * 1e4).round() / 1e4)
                .collect::<alloc::vec::Vec<_>>(),
            agg.mean_attention
        );
    }
}
