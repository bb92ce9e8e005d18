//! Dataset ingestion. A small TOML descriptor names the node count, one
//! edge-list file per layer, and an optional node-attribute table:
//!
//! ```toml
//! num_nodes = 246
//! layers = ["advice.tsv", "discussion.tsv", "friend.tsv"]
//! attributes = "survey.csv"   # optional
//! ```
//!
//! File paths are resolved relative to the descriptor's directory. Edge
//! lists are UTF-8 text with one `u<TAB>v` pair of 0-based indices per
//! line; on input any run of blanks separates the endpoints and `#` lines
//! are comments, while everything the toolkit writes back out uses the
//! strict single-tab form. Attribute files are comma-separated reals, one
//! row per node.

use std::fs;
use std::path::{Path, PathBuf};

use mrgnn_core::{DenseMatrix, LoadStats, MultiplexGraph};
use serde::Deserialize;

use crate::error::{CliError, CliResult};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetDescriptor {
    pub num_nodes: usize,
    pub layers: Vec<PathBuf>,
    pub attributes: Option<PathBuf>,
}

impl DatasetDescriptor {
    pub fn from_file(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| {
            CliError::usage(format!("cannot read dataset descriptor {}: {e}", path.display()))
        })?;
        toml::from_str(&text).map_err(|e| {
            CliError::usage(format!("dataset descriptor {}: {e}", path.display()))
        })
    }
}

/// Load and validate a multiplex graph from a descriptor file. Dropped
/// self-loops and duplicate edges are reported on stderr, never silently
/// discarded.
pub fn load_dataset(descriptor_path: &Path) -> CliResult<(MultiplexGraph, LoadStats)> {
    let descriptor = DatasetDescriptor::from_file(descriptor_path)?;
    let base = descriptor_path.parent().unwrap_or_else(|| Path::new("."));

    let mut layer_edges = Vec::with_capacity(descriptor.layers.len());
    for rel in &descriptor.layers {
        layer_edges.push(read_edge_list(&base.join(rel))?);
    }
    let attributes = match &descriptor.attributes {
        Some(rel) => Some(read_attributes(&base.join(rel), descriptor.num_nodes)?),
        None => None,
    };

    let (graph, stats) = MultiplexGraph::new(descriptor.num_nodes, &layer_edges, attributes)
        .map_err(|e| {
            CliError::usage(format!("dataset {}: {e}", descriptor_path.display()))
        })?;
    for (r, layer) in stats.layers.iter().enumerate() {
        if layer.self_loops_dropped > 0 || layer.duplicates_dropped > 0 {
            eprintln!(
                "warning: layer {r} ({}): dropped {} self-loops and {} duplicate edges",
                descriptor.layers[r].display(),
                layer.self_loops_dropped,
                layer.duplicates_dropped
            );
        }
    }
    Ok((graph, stats))
}

fn read_edge_list(path: &Path) -> CliResult<Vec<(u32, u32)>> {
    let text = fs::read_to_string(path).map_err(|e| {
        CliError::usage(format!("cannot read edge list {}: {e}", path.display()))
    })?;
    let mut edges = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields = line.split_whitespace();
        let (Some(a), Some(b), None) = (fields.next(), fields.next(), fields.next()) else {
            return Err(CliError::usage(format!(
                "{}:{}: expected two node indices, got {line:?}",
                path.display(),
                lineno + 1
            )));
        };
        let parse = |token: &str| {
            token.parse::<u32>().map_err(|_| {
                CliError::usage(format!(
                    "{}:{}: invalid node index {token:?}",
                    path.display(),
                    lineno + 1
                ))
            })
        };
        edges.push((parse(a)?, parse(b)?));
    }
    Ok(edges)
}

fn read_attributes(path: &Path, num_nodes: usize) -> CliResult<DenseMatrix> {
    let text = fs::read_to_string(path).map_err(|e| {
        CliError::usage(format!("cannot read attribute file {}: {e}", path.display()))
    })?;
    let mut data: Vec<f64> = Vec::new();
    let mut width: Option<usize> = None;
    let mut rows = 0usize;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let mut values = Vec::new();
        for token in line.split(',') {
            let token = token.trim();
            let value: f64 = token.parse().map_err(|_| {
                CliError::usage(format!(
                    "{}:{}: invalid attribute value {token:?}",
                    path.display(),
                    lineno + 1
                ))
            })?;
            values.push(value);
        }
        match width {
            None => width = Some(values.len()),
            Some(w) if w != values.len() => {
                return Err(CliError::usage(format!(
                    "{}:{}: row has {} values, previous rows had {w}",
                    path.display(),
                    lineno + 1,
                    values.len()
                )));
            }
            Some(_) => {}
        }
        data.extend_from_slice(&values);
        rows += 1;
    }
    if rows != num_nodes {
        return Err(CliError::usage(format!(
            "attribute file {}: {rows} rows but the dataset declares {num_nodes} nodes",
            path.display()
        )));
    }
    Ok(DenseMatrix::from_vec(rows, width.unwrap_or(0), data))
}
