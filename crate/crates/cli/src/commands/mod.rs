//! One module per subcommand, plus the small shared plumbing: dataset
//! loading with warnings, checkpoint-or-inline-training resolution, and
//! error mapping into the process exit taxonomy.

pub mod attention;
pub mod simulate;
pub mod sweep;
pub mod train;

use std::path::Path;

use mrgnn_core::eval::SweepError;
use mrgnn_core::model::MrgnnParams;
use mrgnn_core::MultiplexGraph;

use crate::checkpoint;
use crate::dataset;
use crate::error::{CliError, CliResult};
use crate::experiment::Experiment;

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::runtime(e.to_string())
}

/// Grid emptiness is a config mistake; everything else a sweep can raise
/// is a runtime failure.
fn sweep_error(e: SweepError) -> CliError {
    match e {
        SweepError::EmptyGrid => CliError::usage(e.to_string()),
        other => CliError::runtime(other.to_string()),
    }
}

fn load_graph(exp: &Experiment) -> CliResult<MultiplexGraph> {
    let (graph, _) = dataset::load_dataset(&exp.dataset_path)?;
    Ok(graph)
}

/// A trained model plus the seed that drove its data split.
fn trained_model(exp: &Experiment, graph: &MultiplexGraph) -> CliResult<(u64, MrgnnParams)> {
    match &exp.checkpoint {
        Some(path) => {
            if !path.exists() {
                return Err(CliError::usage(format!(
                    "checkpoint {} does not exist",
                    path.display()
                )));
            }
            checkpoint::load(path, graph)
        }
        None => {
            let seed = exp.seeds[0];
            eprintln!("note: no checkpoint configured; training inline with seed {seed}");
            let split =
                mrgnn_core::split::split_edges(graph, exp.run.test_frac, exp.run.val_frac, seed)
                    .map_err(runtime)?;
            let mut model = exp.run.model.clone();
            model.init_seed = seed;
            let mut train_cfg = exp.run.train.clone();
            train_cfg.seed = seed;
            let (params, _) =
                mrgnn_core::train::train(graph, &split, &model, &train_cfg).map_err(runtime)?;
            Ok((seed, params))
        }
    }
}

fn checkpoint_path(dir: &Path, seed: u64) -> std::path::PathBuf {
    dir.join(format!("seed{seed}.ckpt"))
}
