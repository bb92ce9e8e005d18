//! Report writers. Every artifact lands atomically — bytes are staged in
//! a sibling temp file and renamed into place — so an interrupted run
//! never leaves a truncated report behind. Floats are written at full
//! round-trip precision; the only nondeterministic columns across reruns
//! of the same config are the wall-time ones.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use mrgnn_core::eval::{AttentionStats, EmbedDimCell, EvaluationReport, TrainSizeCell};
use mrgnn_core::epidemic::SpreadComparison;
use mrgnn_core::harness::{AggregateReport, SeedRun};
use mrgnn_core::model::Aggregator;
use mrgnn_core::train::TrainReport;

use crate::error::{CliError, CliResult};

/// Write `bytes` to `path` via a temp file in the same directory plus an
/// atomic rename, creating parent directories as needed.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let parent = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&parent).map_err(|e| {
        CliError::runtime(format!("cannot create {}: {e}", parent.display()))
    })?;
    let file_name = path
        .file_name()
        .ok_or_else(|| CliError::usage(format!("not a file path: {}", path.display())))?;
    let tmp = parent.join(format!(
        ".{}.tmp{}",
        file_name.to_string_lossy(),
        std::process::id()
    ));
    fs::write(&tmp, bytes)
        .map_err(|e| CliError::runtime(format!("cannot write {}: {e}", tmp.display())))?;
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        CliError::runtime(format!("cannot move report into {}: {e}", path.display()))
    })
}

/// Encode rows as CSV and land them atomically — for one-off tables that
/// don't warrant a dedicated writer.
pub fn write_csv_rows(path: &Path, rows: &[Vec<String>]) -> CliResult<()> {
    write_csv(path, rows)
}

fn write_csv(path: &Path, rows: &[Vec<String>]) -> CliResult<()> {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    for row in rows {
        wtr.write_record(row)
            .map_err(|e| CliError::runtime(format!("csv encoding failed: {e}")))?;
    }
    let bytes = wtr
        .into_inner()
        .map_err(|e| CliError::runtime(format!("csv encoding failed: {e}")))?;
    write_atomic(path, &bytes)
}

fn cell<T: std::fmt::Display>(v: T) -> String {
    v.to_string()
}

fn opt_cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn variant_name(aggregator: Aggregator) -> &'static str {
    match aggregator {
        Aggregator::Logit => "logit",
        Aggregator::Semantic => "semantic",
    }
}

/// Per-epoch training curve of one seed: `train_seed{N}.csv`.
pub fn write_train_report(
    dir: &Path,
    seed: u64,
    report: &TrainReport,
    num_layers: usize,
) -> CliResult<()> {
    let mut header = vec![cell("epoch"), cell("train_loss"), cell("val_auc_macro")];
    for r in 0..num_layers {
        header.push(format!("val_auc_layer{r}"));
    }
    let mut rows = vec![header];
    for e in &report.epochs {
        let mut row = vec![cell(e.epoch), cell(e.train_loss), opt_cell(e.val_auc_macro)];
        for r in 0..num_layers {
            row.push(opt_cell(e.val_auc.get(r).copied().flatten()));
        }
        rows.push(row);
    }
    write_csv(&dir.join(format!("train_seed{seed}.csv")), &rows)
}

/// Per-layer test metrics of one seed: `evaluation_seed{N}.csv`.
pub fn write_evaluation(dir: &Path, seed: u64, report: &EvaluationReport) -> CliResult<()> {
    let mut rows = vec![vec![
        cell("layer"),
        cell("auc"),
        cell("micro_f1"),
        cell("weak_auc"),
        cell("weak_micro_f1"),
        cell("test_pos"),
        cell("test_neg"),
        cell("weak_pos"),
        cell("weak_neg"),
    ]];
    for l in &report.layers {
        rows.push(vec![
            cell(l.layer_id),
            cell(l.auc),
            cell(l.micro_f1),
            opt_cell(l.weak_auc),
            opt_cell(l.weak_micro_f1),
            cell(l.test_pos),
            cell(l.test_neg),
            cell(l.weak_pos),
            cell(l.weak_neg),
        ]);
    }
    write_csv(&dir.join(format!("evaluation_seed{seed}.csv")), &rows)
}

/// One row per seed: `per_seed.csv`. `wall_secs[i]` pairs with `runs[i]`
/// and is the only column that varies across identical reruns.
pub fn write_per_seed(dir: &Path, runs: &[SeedRun], wall_secs: &[f64]) -> CliResult<()> {
    let mut rows = vec![vec![
        cell("seed"),
        cell("macro_auc"),
        cell("macro_micro_f1"),
        cell("weak_macro_auc"),
        cell("weak_macro_micro_f1"),
        cell("best_epoch"),
        cell("epochs_run"),
        cell("wall_time_secs"),
    ]];
    for (run, &wall) in runs.iter().zip(wall_secs) {
        rows.push(vec![
            cell(run.seed),
            cell(run.report.macro_auc),
            cell(run.report.macro_micro_f1),
            opt_cell(run.report.weak_macro_auc),
            opt_cell(run.report.weak_macro_micro_f1),
            cell(run.train_report.best_epoch),
            cell(run.train_report.epochs.len()),
            cell(wall),
        ]);
    }
    write_csv(&dir.join("per_seed.csv"), &rows)
}

/// Seed-averaged metrics: `aggregate.csv`, one wide row.
pub fn write_aggregate(dir: &Path, agg: &AggregateReport, total_wall_secs: f64) -> CliResult<()> {
    let mut header = vec![
        cell("seeds"),
        cell("mean_macro_auc"),
        cell("std_macro_auc"),
        cell("mean_macro_micro_f1"),
        cell("weak_mean_macro_auc"),
        cell("weak_std_macro_auc"),
    ];
    let mut row = vec![
        agg.seeds
            .iter()
            .map(|s| s.to_string())
            .collect::<Vec<_>>()
            .join(" "),
        cell(agg.mean_macro_auc),
        cell(agg.std_macro_auc),
        cell(agg.mean_macro_micro_f1),
        opt_cell(agg.weak_mean_macro_auc),
        opt_cell(agg.weak_std_macro_auc),
    ];
    for (r, v) in agg.per_layer_mean_auc.iter().enumerate() {
        header.push(format!("layer{r}_mean_auc"));
        row.push(cell(v));
    }
    header.push(cell("wall_time_secs"));
    row.push(cell(total_wall_secs));
    write_csv(&dir.join("aggregate.csv"), &[header, row])
}

/// Node-and-seed-averaged inter-layer attention: `mean_attention.csv`,
/// one row per ordered layer pair.
pub fn write_mean_attention(dir: &Path, agg: &AggregateReport) -> CliResult<()> {
    let mut rows = vec![vec![cell("to_layer"), cell("from_layer"), cell("mean")]];
    for (p, row) in agg.mean_attention.iter().enumerate() {
        for (q, &a) in row.iter().enumerate() {
            if p != q {
                rows.push(vec![cell(p), cell(q), cell(a)]);
            }
        }
    }
    write_csv(&dir.join("mean_attention.csv"), &rows)
}

/// Full attention distributions of one model: mean, std, and histogram
/// bin counts (equal-width bins over [0, 1]) per ordered layer pair.
pub fn write_attention_stats(path: &Path, stats: &AttentionStats) -> CliResult<()> {
    let bins = stats
        .pairs
        .first()
        .map(|p| p.histogram.len())
        .unwrap_or(0);
    let mut header = vec![
        cell("to_layer"),
        cell("from_layer"),
        cell("mean"),
        cell("std"),
    ];
    for b in 0..bins {
        header.push(format!("bin_{b:02}"));
    }
    let mut rows = vec![header];
    for pair in &stats.pairs {
        let mut row = vec![
            cell(pair.to_layer),
            cell(pair.from_layer),
            cell(pair.mean),
            cell(pair.std),
        ];
        for &count in pair.histogram.iter() {
            row.push(cell(count));
        }
        rows.push(row);
    }
    write_csv(path, &rows)
}

/// Train-size sweep: one row per (fraction, variant, seed) plus the
/// cell's seed-averaged columns.
pub fn write_train_size_sweep(path: &Path, cells: &[TrainSizeCell]) -> CliResult<()> {
    let mut rows = vec![vec![
        cell("train_fraction"),
        cell("variant"),
        cell("seed_index"),
        cell("macro_auc"),
        cell("macro_micro_f1"),
        cell("weak_macro_auc"),
        cell("cell_mean_macro_auc"),
        cell("cell_std_macro_auc"),
        cell("cell_weak_mean_macro_auc"),
    ]];
    for c in cells {
        for (i, report) in c.per_seed.iter().enumerate() {
            rows.push(vec![
                cell(c.train_fraction),
                cell(variant_name(c.aggregator)),
                cell(i),
                cell(report.macro_auc),
                cell(report.macro_micro_f1),
                opt_cell(report.weak_macro_auc),
                cell(c.mean_macro_auc),
                cell(c.std_macro_auc),
                opt_cell(c.weak_mean_macro_auc),
            ]);
        }
    }
    write_csv(path, &rows)
}

/// Embedding-dimension sweep: one row per (dimension, variant, seed).
pub fn write_embed_dim_sweep(path: &Path, cells: &[EmbedDimCell]) -> CliResult<()> {
    let mut rows = vec![vec![
        cell("embed_dim"),
        cell("variant"),
        cell("seed_index"),
        cell("macro_auc"),
        cell("cell_mean_macro_auc"),
        cell("cell_std_macro_auc"),
    ]];
    for c in cells {
        for (i, report) in c.per_seed.iter().enumerate() {
            rows.push(vec![
                cell(c.embed_dim),
                cell(variant_name(c.aggregator)),
                cell(i),
                cell(report.macro_auc),
                cell(c.mean_macro_auc),
                cell(c.std_macro_auc),
            ]);
        }
    }
    write_csv(path, &rows)
}

/// Strict-form edge list: one `u<TAB>v` line per edge.
pub fn write_edge_list(path: &Path, edges: &[(u32, u32)]) -> CliResult<()> {
    let mut out = String::new();
    for &(u, v) in edges {
        let _ = writeln!(out, "{u}\t{v}");
    }
    write_atomic(path, out.as_bytes())
}

/// Spreading curves: `step` column plus one infected-fraction column per
/// trace name.
pub fn write_spreading(path: &Path, comparison: &SpreadComparison) -> CliResult<()> {
    let mut header = vec![cell("step")];
    header.extend(comparison.names.iter().cloned());
    let mut rows = vec![header];
    for (t, fractions) in comparison.fractions.iter().enumerate() {
        let mut row = vec![cell(t)];
        row.extend(fractions.iter().map(|f| cell(*f)));
        rows.push(row);
    }
    write_csv(path, &rows)
}
