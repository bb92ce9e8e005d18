//! Experiment configuration. One TOML file enumerates the dataset, every
//! model and optimizer knob, the split protocol, and the seed list, so a
//! run is reproducible from the file alone: nothing numeric defaults
//! silently and nothing is seeded from the clock.
//!
//! ```toml
//! dataset = "data/ckm/dataset.toml"
//! output_dir = "runs/ckm"
//! seeds = [0, 1, 2, 3, 4, 5, 6, 7, 8, 9]
//!
//! [model]
//! variant = "logit"          # or "semantic"
//! embed_dim = 128
//! steps = 2
//! neighbor_cap = 10
//!
//! [train]
//! learning_rate = 0.7
//! max_epochs = 1300
//! patience = 700
//! batch_size = "full"        # or an integer
//!
//! [split]
//! test_frac = 0.1
//! val_frac = 0.1
//! partition_seed = 0
//! ```
//!
//! Optional `[sweep]` and `[simulate]` tables carry the grid and
//! spreading options used by those subcommands, and an optional
//! top-level `checkpoint` key points `simulate`/`attention` at a trained
//! model. Paths inside the file resolve relative to the file's own
//! directory; `--out`, `--seeds`, and `--variant` override their config
//! counterparts from the command line.

use std::fs;
use std::path::{Path, PathBuf};

use mrgnn_core::harness::RunConfig;
use mrgnn_core::{Aggregator, BatchSize, ModelConfig, TrainConfig};
use serde::Deserialize;

use crate::error::{CliError, CliResult};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExperimentFile {
    dataset: PathBuf,
    output_dir: Option<PathBuf>,
    /// May be omitted only when `--seeds` supplies the list instead.
    seeds: Option<Vec<u64>>,
    /// Trained model consumed by `simulate` and `attention`; those
    /// commands train inline from the first seed when this is absent.
    checkpoint: Option<PathBuf>,
    model: ModelSection,
    train: TrainSection,
    split: SplitSection,
    sweep: Option<SweepSection>,
    simulate: Option<SimulateSection>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelSection {
    variant: String,
    embed_dim: usize,
    steps: usize,
    neighbor_cap: usize,
    /// Ablation switch; scoring ignores the other layers when false.
    fuse_layers: Option<bool>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrainSection {
    learning_rate: f64,
    max_epochs: usize,
    patience: usize,
    batch_size: BatchSizeField,
}

/// `"full"` or a positive pair count per step.
#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum BatchSizeField {
    Named(String),
    Size(usize),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SplitSection {
    test_frac: f64,
    val_frac: f64,
    /// Louvain seed for the experiment-wide weak-tie partitions.
    partition_seed: u64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub train_fractions: Option<Vec<f64>>,
    /// Validation share carved out of each training portion for early
    /// stopping in the train-size sweep; 0 disables early stopping.
    pub val_within: Option<f64>,
    pub embed_dims: Option<Vec<usize>>,
    /// Variants to cross with the grid; defaults to the `[model]` variant.
    pub variants: Option<Vec<String>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    /// Link-probability cutoff for network reconstruction.
    pub threshold: f64,
    /// Also spread on the union of all layers (an aggregate view the
    /// per-layer protocol does not define).
    pub include_union: Option<bool>,
    /// Seed for random source selection; defaults to the first run seed.
    pub source_seed: Option<u64>,
}

/// A fully resolved experiment: flags applied, paths anchored, configs
/// validated.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub dataset_path: PathBuf,
    pub output_dir: PathBuf,
    pub seeds: Vec<u64>,
    pub checkpoint: Option<PathBuf>,
    pub run: RunConfig,
    pub sweep: Option<SweepSection>,
    pub simulate: Option<SimulateSection>,
}

/// Command-line overrides applied on top of the file.
#[derive(Debug, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seeds: Option<Vec<u64>>,
    pub variant: Option<Aggregator>,
}

pub fn parse_variant(name: &str) -> CliResult<Aggregator> {
    match name {
        "logit" => Ok(Aggregator::Logit),
        "semantic" => Ok(Aggregator::Semantic),
        other => Err(CliError::usage(format!(
            "unknown variant {other:?} (expected \"logit\" or \"semantic\")"
        ))),
    }
}

pub fn load_experiment(config_path: &Path, overrides: Overrides) -> CliResult<Experiment> {
    let text = fs::read_to_string(config_path).map_err(|e| {
        CliError::usage(format!("cannot read config {}: {e}", config_path.display()))
    })?;
    let file: ExperimentFile = toml::from_str(&text)
        .map_err(|e| CliError::usage(format!("config {}: {e}", config_path.display())))?;
    let base = config_path.parent().unwrap_or_else(|| Path::new("."));

    let seeds = overrides
        .seeds
        .or(file.seeds)
        .ok_or_else(|| CliError::usage("no seeds: add `seeds = [...]` to the config or pass --seeds"))?;
    if seeds.is_empty() {
        return Err(CliError::usage("the seed list is empty"));
    }

    let variant = match overrides.variant {
        Some(v) => v,
        None => parse_variant(&file.model.variant)?,
    };
    let mut model = ModelConfig::new(variant, 0);
    model.embed_dim = file.model.embed_dim;
    model.steps = file.model.steps;
    model.neighbor_cap = file.model.neighbor_cap;
    model.fuse_layers = file.model.fuse_layers.unwrap_or(true);
    model
        .validate()
        .map_err(|e| CliError::usage(format!("[model]: {e}")))?;

    let batch_size = match &file.train.batch_size {
        BatchSizeField::Named(name) if name == "full" => BatchSize::Full,
        BatchSizeField::Named(name) => {
            return Err(CliError::usage(format!(
                "[train] batch_size: expected \"full\" or a positive integer, got {name:?}"
            )));
        }
        BatchSizeField::Size(n) => BatchSize::Size(*n),
    };
    let mut train = TrainConfig::new(0);
    train.learning_rate = file.train.learning_rate;
    train.max_epochs = file.train.max_epochs;
    train.patience = file.train.patience;
    train.batch_size = batch_size;
    train
        .validate()
        .map_err(|e| CliError::usage(format!("[train]: {e}")))?;

    let (test_frac, val_frac) = (file.split.test_frac, file.split.val_frac);
    if !(test_frac > 0.0 && val_frac > 0.0 && test_frac + val_frac < 1.0) {
        return Err(CliError::usage(format!(
            "[split]: need test_frac > 0, val_frac > 0, and test_frac + val_frac < 1 \
             (got {test_frac} and {val_frac})"
        )));
    }

    let dataset_path = base.join(&file.dataset);
    if !dataset_path.exists() {
        return Err(CliError::usage(format!(
            "dataset descriptor {} does not exist",
            dataset_path.display()
        )));
    }
    let checkpoint = file.checkpoint.as_ref().map(|rel| base.join(rel));

    let output_dir = match overrides.out {
        Some(dir) => dir,
        None => base.join(file.output_dir.as_deref().ok_or_else(|| {
            CliError::usage("no output directory: add `output_dir = ...` to the config or pass --out")
        })?),
    };

    let mut run = RunConfig::new(model, train);
    run.test_frac = test_frac;
    run.val_frac = val_frac;
    run.partition_seed = file.split.partition_seed;

    Ok(Experiment {
        dataset_path,
        output_dir,
        seeds,
        checkpoint,
        run,
        sweep: file.sweep,
        simulate: file.simulate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write as _;

    const MINIMAL: &str = r#"
dataset = "data.toml"
output_dir = "out"
seeds = [0, 1]

[model]
variant = "logit"
embed_dim = 8
steps = 2
neighbor_cap = 10

[train]
learning_rate = 0.7
max_epochs = 50
patience = 10
batch_size = "full"

[split]
test_frac = 0.1
val_frac = 0.1
partition_seed = 0
"#;

    fn write_config(dir: &Path, body: &str) -> PathBuf {
        let path = dir.join("exp.toml");
        let mut f = fs::File::create(&path).unwrap();
        f.write_all(body.as_bytes()).unwrap();
        fs::File::create(dir.join("data.toml")).unwrap();
        path
    }

    #[test]
    fn minimal_config_resolves() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_config(dir.path(), MINIMAL);
        let exp = load_experiment(&path, Overrides::default()).unwrap();
        assert_eq!(exp.seeds, vec![0, 1]);
        assert_eq!(exp.run.model.embed_dim, 8);
        assert_eq!(exp.run.model.aggregator, Aggregator::Logit);
        assert_eq!(exp.run.train.max_epochs, 50);
        assert_eq!(exp.output_dir, dir.path().join("out"));
        assert!(exp.run.model.fuse_layers);
    }

    #[test]
    fn flags_override_seeds_variant_and_out() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_config(dir.path(), MINIMAL);
        let exp = load_experiment(
            &path,
            Overrides {
                out: Some(PathBuf::from("/tmp/elsewhere")),
                seeds: Some(vec![7]),
                variant: Some(Aggregator::Semantic),
            },
        )
        .unwrap();
        assert_eq!(exp.seeds, vec![7]);
        assert_eq!(exp.run.model.aggregator, Aggregator::Semantic);
        assert_eq!(exp.output_dir, PathBuf::from("/tmp/elsewhere"));
    }

    #[test]
    fn missing_seeds_is_a_usage_error() {
        let dir = tempfile::tempdir().unwrap();
        let body = MINIMAL.replace("seeds = [0, 1]\n", "");
        let path = write_config(dir.path(), &body);
        let err = load_experiment(&path, Overrides::default()).unwrap_err();
        assert!(matches!(err, CliError::Usage(_)));
        assert!(err.to_string().contains("seeds"), "{err}");
    }

    #[test]
    fn missing_dataset_file_is_reported_with_its_path() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_config(dir.path(), MINIMAL);
        fs::remove_file(dir.path().join("data.toml")).unwrap();
        let err = load_experiment(&path, Overrides::default()).unwrap_err();
        assert!(err.to_string().contains("data.toml"), "{err}");
    }

    #[test]
    fn integer_batch_size_parses() {
        let dir = tempfile::tempdir().unwrap();
        let body = MINIMAL.replace("batch_size = \"full\"", "batch_size = 32");
        let path = write_config(dir.path(), &body);
        let exp = load_experiment(&path, Overrides::default()).unwrap();
        assert_eq!(exp.run.train.batch_size, BatchSize::Size(32));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let body = format!("{MINIMAL}\nlearning_rte = 0.1\n");
        let path = write_config(dir.path(), &body);
        let err = load_experiment(&path, Overrides::default()).unwrap_err();
        assert!(matches!(err, CliError::Usage(_)));
    }

    #[test]
    fn bad_split_fractions_are_usage_errors() {
        let dir = tempfile::tempdir().unwrap();
        let body = MINIMAL.replace("test_frac = 0.1", "test_frac = 0.95");
        let path = write_config(dir.path(), &body);
        let err = load_experiment(&path, Overrides::default()).unwrap_err();
        assert!(err.to_string().contains("test_frac"), "{err}");
    }

    #[test]
    fn unknown_variant_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let body = MINIMAL.replace("\"logit\"", "\"softmax\"");
        let path = write_config(dir.path(), &body);
        let err = load_experiment(&path, Overrides::default()).unwrap_err();
        assert!(err.to_string().contains("softmax"), "{err}");
    }
}
