//! `mrgnn` — multiplex link-prediction experiments driven by one config
//! file. Exit codes: 0 success, 1 usage/config error, 2 runtime/numeric
//! failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use mrgnn_cli::commands::sweep::SweepKind;
use mrgnn_cli::commands::{attention, simulate, sweep, train};
use mrgnn_cli::error::{CliError, CliResult};
use mrgnn_cli::experiment::{load_experiment, Experiment, Overrides};

#[derive(Parser)]
#[command(
    name = "mrgnn",
    version,
    about = "Multiplex-network link prediction: training, evaluation, sweeps, \
             attention analysis, and spreading simulations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one model per seed; write checkpoints and reports.
    Train(CommonArgs),
    /// Re-score saved checkpoints on their original splits.
    Evaluate(CommonArgs),
    /// Grid experiments over training fraction or embedding dimension.
    Sweep {
        /// Which knob the grid varies.
        #[arg(value_enum)]
        kind: SweepKindArg,
        #[command(flatten)]
        args: CommonArgs,
    },
    /// Reconstruct layers with a trained model and spread SI on them.
    Simulate {
        #[command(flatten)]
        args: CommonArgs,
        /// Infection source node for every simulation (default: seeded
        /// random choice among non-isolated nodes).
        #[arg(long)]
        fixed_source: Option<u32>,
    },
    /// Export inter-layer attention distributions of a trained model.
    Attention(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Experiment config file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides the config's output_dir).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated seed list (overrides the config's seeds).
    #[arg(long, value_parser = parse_seed_list)]
    seeds: Option<SeedList>,
    /// Attention variant (overrides the config's model.variant).
    #[arg(long, value_enum)]
    variant: Option<VariantArg>,
}

/// Newtype so clap can carry a parsed seed list through one flag.
#[derive(Clone, Debug)]
struct SeedList(Vec<u64>);

fn parse_seed_list(raw: &str) -> Result<SeedList, String> {
    let mut seeds = Vec::new();
    for token in raw.split(',') {
        let token = token.trim();
        if token.is_empty() {
            return Err("empty entry in seed list".to_string());
        }
        seeds.push(
            token
                .parse::<u64>()
                .map_err(|_| format!("invalid seed {token:?}"))?,
        );
    }
    Ok(SeedList(seeds))
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    Logit,
    Semantic,
}

#[derive(Clone, Copy, ValueEnum)]
enum SweepKindArg {
    /// Vary the share of links used for training.
    #[value(name = "train_size", alias = "train-size")]
    TrainSize,
    /// Vary the embedding dimension.
    #[value(name = "embed_dim", alias = "embed-dim")]
    EmbedDim,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}

fn dispatch(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Train(args) => train::cmd_train(&resolve(args)?),
        Command::Evaluate(args) => train::cmd_evaluate(&resolve(args)?),
        Command::Sweep { kind, args } => {
            let kind = match kind {
                SweepKindArg::TrainSize => SweepKind::TrainSize,
                SweepKindArg::EmbedDim => SweepKind::EmbedDim,
            };
            sweep::cmd_sweep(&resolve(args)?, kind)
        }
        Command::Simulate { args, fixed_source } => {
            simulate::cmd_simulate(&resolve(args)?, fixed_source)
        }
        Command::Attention(args) => attention::cmd_attention(&resolve(args)?),
    }
}

fn resolve(args: CommonArgs) -> Result<Experiment, CliError> {
    load_experiment(
        &args.config,
        Overrides {
            out: args.out,
            seeds: args.seeds.map(|s| s.0),
            variant: args.variant.map(|v| match v {
                VariantArg::Logit => mrgnn_core::Aggregator::Logit,
                VariantArg::Semantic => mrgnn_core::Aggregator::Semantic,
            }),
        },
    )
}
