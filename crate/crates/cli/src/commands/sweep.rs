//! `sweep`: grid experiments over the training fraction or the embedding
//! dimension, emitted as one CSV row per grid cell and seed.

use mrgnn_core::eval::{sweep_embedding_dim, sweep_training_size};
use mrgnn_core::ModelConfig;

use super::{load_graph, sweep_error};
use crate::error::{CliError, CliResult};
use crate::experiment::{parse_variant, Experiment};
use crate::report;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepKind {
    TrainSize,
    EmbedDim,
}

pub fn cmd_sweep(exp: &Experiment, kind: SweepKind) -> CliResult<()> {
    let sweep = exp.sweep.as_ref().ok_or_else(|| {
        CliError::usage("config has no [sweep] section; add the grid to sweep over")
    })?;

    // Cross the grid with every requested variant; default to the model
    // section's single variant.
    let variants: Vec<ModelConfig> = match &sweep.variants {
        Some(names) if names.is_empty() => {
            return Err(CliError::usage("[sweep] variants is empty"));
        }
        Some(names) => names
            .iter()
            .map(|name| {
                parse_variant(name).map(|aggregator| {
                    let mut m = exp.run.model.clone();
                    m.aggregator = aggregator;
                    m
                })
            })
            .collect::<CliResult<_>>()?,
        None => vec![exp.run.model.clone()],
    };

    let graph = load_graph(exp)?;
    // Core sweeps read the partition seed from the train config's seed
    // field and re-seed per run internally.
    let mut train_cfg = exp.run.train.clone();
    train_cfg.seed = exp.run.partition_seed;

    match kind {
        SweepKind::TrainSize => {
            let fractions = sweep.train_fractions.as_deref().ok_or_else(|| {
                CliError::usage("[sweep] has no train_fractions grid")
            })?;
            if fractions.is_empty() {
                return Err(CliError::usage("[sweep] train_fractions is empty"));
            }
            let val_within = sweep.val_within.ok_or_else(|| {
                CliError::usage(
                    "[sweep] needs val_within (validation share carved out of each \
                     training portion; 0 disables early stopping)",
                )
            })?;
            let cells = sweep_training_size(
                &graph,
                fractions,
                &variants,
                &train_cfg,
                &exp.seeds,
                val_within,
            )
            .map_err(sweep_error)?;
            let path = exp.output_dir.join("sweep_train_size.csv");
            report::write_train_size_sweep(&path, &cells)?;
            for c in &cells {
                println!(
                    "train fraction {:.2} ({:?}): macro AUC {:.4} ± {:.4}",
                    c.train_fraction, c.aggregator, c.mean_macro_auc, c.std_macro_auc
                );
            }
            println!("sweep written to {}", path.display());
        }
        SweepKind::EmbedDim => {
            let dims = sweep.embed_dims.as_deref().ok_or_else(|| {
                CliError::usage("[sweep] has no embed_dims grid")
            })?;
            if dims.is_empty() {
                return Err(CliError::usage("[sweep] embed_dims is empty"));
            }
            let cells = sweep_embedding_dim(&graph, dims, &variants, &train_cfg, &exp.seeds)
                .map_err(sweep_error)?;
            let path = exp.output_dir.join("sweep_embed_dim.csv");
            report::write_embed_dim_sweep(&path, &cells)?;
            for c in &cells {
                println!(
                    "embed dim {} ({:?}): macro AUC {:.4} ± {:.4}",
                    c.embed_dim, c.aggregator, c.mean_macro_auc, c.std_macro_auc
                );
            }
            println!("sweep written to {}", path.display());
        }
    }
    Ok(())
}
