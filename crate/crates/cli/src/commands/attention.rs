//! `attention`: export the trained model's inter-layer attention
//! distributions — mean, std, and histogram per ordered layer pair —
//! for downstream analysis and the fixed mean-attention predictor.

use mrgnn_core::eval::attention_stats;

use super::{load_graph, trained_model};
use crate::error::CliResult;
use crate::experiment::Experiment;
use crate::report;

pub fn cmd_attention(exp: &Experiment) -> CliResult<()> {
    let graph = load_graph(exp)?;
    if graph.num_layers() == 2 {
        eprintln!(
            "warning: with two layers every attention softmax has a single term, \
             so every weight is exactly 1; the distributions below are degenerate"
        );
    }
    let (_, params) = trained_model(exp, &graph)?;
    let stats = attention_stats(&params, &graph);

    let path = exp.output_dir.join("attention.csv");
    report::write_attention_stats(&path, &stats)?;
    for pair in &stats.pairs {
        println!(
            "a({} <- {}): mean {:.4}  std {:.4}",
            pair.to_layer, pair.from_layer, pair.mean, pair.std
        );
    }
    println!("attention distributions written to {}", path.display());
    Ok(())
}
