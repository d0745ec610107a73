//! `earconv` command-line front end.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "earconv", version, about = "Train and run the ear-image gender CNN")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train from a manifest and write checkpoint, epoch log and test report
    Train(TrainArgs),
    /// Evaluate a checkpoint on every image of a manifest
    Eval(EvalArgs),
    /// Classify one image
    Predict(PredictArgs),
    /// Export per-layer feature-map grids for one image
    Featuremaps(FeatureArgs),
    /// Print the layer table of a checkpoint or a named architecture
    Inspect(InspectArgs),
    /// Generate the synthetic two-class texture corpus
    Synth(SynthArgs),
}

#[derive(Args, Debug)]
struct SeedArg {
    /// Master seed; falls back to EARCONV_SEED, then 0
    #[arg(long, env = "EARCONV_SEED", default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Output directory (created if missing)
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 100)]
    epochs: usize,
    #[arg(long, default_value_t = 32)]
    batch: usize,
    #[arg(long, default_value_t = 0.001)]
    lr: f64,
    #[arg(long, default_value_t = 0.2)]
    dropout: f64,
    /// Fraction of images assigned to the training split
    #[arg(long, default_value_t = 0.7)]
    train_fraction: f64,
    /// Keep every subject's images on one side of the split
    #[arg(long)]
    subject_disjoint: bool,
    /// Disable flip and rotation augmentation
    #[arg(long)]
    no_augment: bool,
    /// `earnet` (256 px) or `shrunken[N]` (reduced widths, N px input, default 36)
    #[arg(long, default_value = "earnet")]
    arch: String,
    #[command(flatten)]
    seed: SeedArg,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    checkpoint: PathBuf,
    /// Write the JSON report here instead of standard output
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 32)]
    batch: usize,
}

#[derive(Args, Debug)]
pub struct PredictArgs {
    #[arg(long)]
    image: PathBuf,
    #[arg(long)]
    checkpoint: PathBuf,
}

#[derive(Args, Debug)]
pub struct FeatureArgs {
    #[arg(long)]
    image: PathBuf,
    #[arg(long)]
    checkpoint: PathBuf,
    /// Comma-separated layer ids or display names, e.g. conv1,Conv_2D_7
    #[arg(long, value_delimiter = ',', required = true)]
    layers: Vec<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
#[group(required = true, multiple = false)]
pub struct InspectArgs {
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long)]
    arch: Option<String>,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 16)]
    count: usize,
    /// Side length of the generated images in pixels
    #[arg(long, default_value_t = 64)]
    size: usize,
    #[command(flatten)]
    seed: SeedArg,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(a) => commands::train(a),
        Command::Eval(a) => commands::eval(a),
        Command::Predict(a) => commands::predict(a),
        Command::Featuremaps(a) => commands::featuremaps(a),
        Command::Inspect(a) => commands::inspect(a),
        Command::Synth(a) => commands::synth(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
