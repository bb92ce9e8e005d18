//! Core algorithms for multiplex-network link prediction.
//!
//! This crate holds everything that does not touch the filesystem: the
//! multiplex graph model, edge splitting and negative sampling, Louvain
//! community detection and tie labeling, a small reverse-mode autodiff
//! engine, the MRGNN forward pass (intra-layer propagation, shared
//! projection, inter-layer attention, link scoring), SGD training,
//! evaluation metrics and sweeps, and a deterministic SI spreading
//! simulator. File formats, checkpoints, CSV reports, and the CLI live in
//! the companion `mrgnn-cli` crate.
//!
//! The crate is `no_std` (with `alloc`); float transcendentals come from
//! `libm` so results are identical regardless of the host's libm. All
//! randomness is ChaCha-seeded and every public entry point is
//! deterministic given its inputs and seeds.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod community;
pub mod epidemic;
pub mod eval;
pub mod graph;
pub mod harness;
pub mod math;
pub mod matrix;
pub mod metrics;
pub mod model;
pub mod seeds;
pub mod split;
pub mod synthetic;
pub mod tape;
pub mod train;

pub use graph::{GraphError, LayerGraph, LoadStats, MultiplexGraph};
pub use matrix::DenseMatrix;
pub use model::{Aggregator, AttentionTensor, ForwardPass, ModelConfig, MrgnnParams};
pub use split::{DataSplit, EdgeSubset, LayerSplit, SplitError};
pub use tape::{ParamId, ParamStore, Tape, ValueId};
pub use train::{BatchSize, TrainConfig, TrainError, TrainReport};
