//! `train`: one model per seed, checkpoints and reports to the output
//! directory. `evaluate`: re-score previously saved checkpoints on their
//! original splits.

use std::time::Instant;

use mrgnn_core::eval::{evaluate, full_graph_partitions, EvaluationReport};
use mrgnn_core::harness::{aggregate_runs, run_single_with_params};
use mrgnn_core::split::split_edges;

use super::{checkpoint_path, load_graph, runtime, sweep_error};
use crate::checkpoint;
use crate::error::{CliError, CliResult};
use crate::experiment::Experiment;
use crate::report;

pub fn cmd_train(exp: &Experiment) -> CliResult<()> {
    let graph = load_graph(exp)?;
    let partitions = full_graph_partitions(&graph, exp.run.partition_seed).map_err(runtime)?;
    let out = &exp.output_dir;

    let total_start = Instant::now();
    let mut runs = Vec::with_capacity(exp.seeds.len());
    for &seed in &exp.seeds {
        let seed_start = Instant::now();
        let (mut run, params) =
            run_single_with_params(&graph, &exp.run, seed, &partitions).map_err(sweep_error)?;
        run.train_report.wall_time_secs = seed_start.elapsed().as_secs_f64();

        checkpoint::save(&checkpoint_path(out, seed), seed, &params)?;
        report::write_train_report(out, seed, &run.train_report, graph.num_layers())?;
        report::write_evaluation(out, seed, &run.report)?;
        println!(
            "seed {seed}: macro AUC {:.4}  micro-F1 {:.4}  weak AUC {}  (best epoch {})",
            run.report.macro_auc,
            run.report.macro_micro_f1,
            fmt_opt(run.report.weak_macro_auc),
            run.train_report.best_epoch,
        );
        runs.push(run);
    }

    let wall: Vec<f64> = runs.iter().map(|r| r.train_report.wall_time_secs).collect();
    report::write_per_seed(out, &runs, &wall)?;
    let agg = aggregate_runs(&exp.seeds, runs, graph.num_layers());
    report::write_aggregate(out, &agg, total_start.elapsed().as_secs_f64())?;
    report::write_mean_attention(out, &agg)?;

    println!(
        "aggregate over {} seeds: macro AUC {:.4} ± {:.4}  micro-F1 {:.4}  weak AUC {}",
        agg.seeds.len(),
        agg.mean_macro_auc,
        agg.std_macro_auc,
        agg.mean_macro_micro_f1,
        fmt_opt(agg.weak_mean_macro_auc),
    );
    println!("reports written to {}", out.display());
    Ok(())
}

pub fn cmd_evaluate(exp: &Experiment) -> CliResult<()> {
    let graph = load_graph(exp)?;
    let partitions = full_graph_partitions(&graph, exp.run.partition_seed).map_err(runtime)?;
    let out = &exp.output_dir;

    let mut reports: Vec<EvaluationReport> = Vec::with_capacity(exp.seeds.len());
    for &seed in &exp.seeds {
        let path = checkpoint_path(out, seed);
        if !path.exists() {
            return Err(CliError::usage(format!(
                "checkpoint {} does not exist (run `mrgnn train` first)",
                path.display()
            )));
        }
        let (ckpt_seed, params) = checkpoint::load(&path, &graph)?;
        if ckpt_seed != seed {
            return Err(CliError::runtime(format!(
                "checkpoint {} was trained with seed {ckpt_seed}, not {seed}",
                path.display()
            )));
        }
        let split = split_edges(&graph, exp.run.test_frac, exp.run.val_frac, seed)
            .map_err(runtime)?;
        let report = evaluate(&params, &graph, &split, &partitions).map_err(runtime)?;
        report::write_evaluation(out, seed, &report)?;
        println!(
            "seed {seed}: macro AUC {:.4}  micro-F1 {:.4}  weak AUC {}",
            report.macro_auc,
            report.macro_micro_f1,
            fmt_opt(report.weak_macro_auc),
        );
        reports.push(report);
    }

    let aucs: Vec<f64> = reports.iter().map(|r| r.macro_auc).collect();
    let (mean, std) = mean_std(&aucs);
    let f1 = reports.iter().map(|r| r.macro_micro_f1).sum::<f64>() / reports.len() as f64;
    let weak: Vec<f64> = reports.iter().filter_map(|r| r.weak_macro_auc).collect();
    let weak_mean = (!weak.is_empty()).then(|| weak.iter().sum::<f64>() / weak.len() as f64);

    let mut header = vec![
        "seeds".to_string(),
        "mean_macro_auc".to_string(),
        "std_macro_auc".to_string(),
        "mean_macro_micro_f1".to_string(),
        "weak_mean_macro_auc".to_string(),
    ];
    let mut row = vec![
        exp.seeds
            .iter()
            .map(|s| s.to_string())
            .collect::<Vec<_>>()
            .join(" "),
        mean.to_string(),
        std.to_string(),
        f1.to_string(),
        weak_mean.map(|x| x.to_string()).unwrap_or_default(),
    ];
    debug_assert_eq!(header.len(), row.len());
    let rows = vec![std::mem::take(&mut header), std::mem::take(&mut row)];
    report::write_csv_rows(&out.join("evaluate_aggregate.csv"), &rows)?;

    println!(
        "aggregate over {} seeds: macro AUC {mean:.4} ± {std:.4}  micro-F1 {f1:.4}  weak AUC {}",
        exp.seeds.len(),
        fmt_opt(weak_mean),
    );
    Ok(())
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "n/a".to_string())
}
