//! `cgcl`: reproducible link-prediction experiments. Splits graphs, trains
//! cross-view models over repeated seeds, sweeps the hyperparameter grid,
//! and re-scores saved checkpoints, emitting JSON/CSV artifacts that are
//! byte-identical across identical invocations.

mod dataset;
mod run;

use cgcl_core::model::DecoderHead;
use clap::{Args, Parser, Subcommand};
use dataset::DatasetArgs;
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "cgcl",
    version,
    about = "Cross-view consistency link prediction"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a train/val/test edge split and write its manifest
    Split(SplitCmd),
    /// Train models over repeated seeds; writes checkpoints, loss curves,
    /// metrics, and an aggregate report
    Train(TrainCmd),
    /// Train the full embedding-width x learning-rate grid; one CSV row per cell
    Sweep(SweepCmd),
    /// Re-score a saved checkpoint against a saved split
    Eval(EvalCmd),
}

#[derive(Args)]
struct SplitOpts {
    /// Fraction of edges held out for the test set
    #[arg(long, default_value_t = 0.10)]
    test_frac: f64,
    /// Fraction of edges held out for the validation set
    #[arg(long, default_value_t = 0.05)]
    val_frac: f64,
    /// Base RNG seed; the split uses it directly, repeat k trains with seed+k
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct ModelOpts {
    /// Training epochs
    #[arg(long, default_value_t = 800)]
    epochs: usize,
    /// Edge decoder: dot (scalar product) or hadamard (elementwise product)
    #[arg(long, default_value = "dot", value_parser = parse_head)]
    head: DecoderHead,
    /// Train on a single augmented view per epoch instead of both
    #[arg(long)]
    one_view: bool,
    /// Propagate over the raw 0/1 adjacency, skipping symmetric normalization
    #[arg(long)]
    raw_adjacency: bool,
    /// Keep the final-epoch parameters instead of the best-validation ones
    #[arg(long)]
    no_val_select: bool,
}

fn parse_head(s: &str) -> Result<DecoderHead, String> {
    s.parse()
        .map_err(|e: cgcl_core::error::Error| e.to_string())
}

#[derive(Args)]
struct SplitCmd {
    #[command(flatten)]
    data: DatasetArgs,
    #[command(flatten)]
    split: SplitOpts,
    /// Output directory
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

#[derive(Args)]
struct TrainCmd {
    #[command(flatten)]
    data: DatasetArgs,
    #[command(flatten)]
    split: SplitOpts,
    #[command(flatten)]
    model: ModelOpts,
    /// Adam learning rate
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    /// Embedding width d_v (the edge MLP hidden width is d_v/2)
    #[arg(long, default_value_t = 256)]
    hidden: usize,
    /// Reuse a saved split manifest instead of sampling one
    #[arg(long, value_name = "FILE")]
    manifest: Option<PathBuf>,
    /// Number of training repetitions with derived seeds
    #[arg(long, default_value_t = 10)]
    repeat: u64,
    /// Output directory
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

#[derive(Args)]
struct SweepCmd {
    #[command(flatten)]
    data: DatasetArgs,
    #[command(flatten)]
    split: SplitOpts,
    #[command(flatten)]
    model: ModelOpts,
    /// Embedding widths to sweep
    #[arg(long, value_delimiter = ',', default_value = "512,256,128,64")]
    grid_dv: Vec<usize>,
    /// Learning rates to sweep
    #[arg(long, value_delimiter = ',', default_value = "0.001,0.005,0.01,0.05")]
    grid_lr: Vec<f64>,
    /// Number of training repetitions per cell
    #[arg(long, default_value_t = 10)]
    repeat: u64,
    /// Output directory
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

#[derive(Args)]
struct EvalCmd {
    #[command(flatten)]
    data: DatasetArgs,
    /// Split manifest to evaluate against
    #[arg(long, value_name = "FILE")]
    manifest: PathBuf,
    /// Checkpoint to score
    #[arg(long, value_name = "FILE")]
    checkpoint: PathBuf,
    /// Score over the raw 0/1 adjacency (must match how the model was trained)
    #[arg(long)]
    raw_adjacency: bool,
    /// Output directory
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

fn main() {
    let cli = Cli::parse();
    run::init_logger();
    let result = match cli.command {
        Command::Split(cmd) => run::cmd_split(cmd),
        Command::Train(cmd) => run::cmd_train(cmd),
        Command::Sweep(cmd) => run::cmd_sweep(cmd),
        Command::Eval(cmd) => run::cmd_eval(cmd),
    };
    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
