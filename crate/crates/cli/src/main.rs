use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hassvm::Optimizer;

mod commands;
mod input;

#[derive(Debug, Parser)]
#[command(name = "hassvm", version, about = "Hierarchical adaptive structural SVMs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train a model and write it to a file.
    #[command(subcommand)]
    Train(TrainCommand),
    /// Report accuracy of a model on labeled data.
    Eval(EvalArgs),
    /// Run a repeated-split experiment from a config file.
    Experiment(ExperimentArgs),
    /// Generate a synthetic source domain, target leaves and their tree.
    Synth(SynthArgs),
    /// Latent target domains: pseudo-labels and domain discovery.
    #[command(subcommand)]
    Latent(LatentCommand),
}

#[derive(Debug, Subcommand)]
enum TrainCommand {
    /// Plain structural SVM from zero (SRC, TAR or MIX depending on the data).
    Ssvm(SsvmArgs),
    /// Adapt a source model to one target domain.
    Assvm(AdaptArgs),
    /// Adapt a source model to the union of all target domains.
    AssvmAll(AdaptArgs),
    /// Jointly adapt a source model over an adaptation tree.
    Hassvm(HassvmArgs),
}

#[derive(Debug, Args)]
struct Common {
    /// Dataset files (`domain,label,f1,...,fn` per line).
    #[arg(long, required = true, num_args = 1..)]
    data: Vec<PathBuf>,
    /// Use only these domains from the data files.
    #[arg(long, num_args = 1..)]
    domain: Vec<String>,
    #[arg(long = "C", default_value_t = 1.0)]
    c: f64,
    #[arg(long, default_value_t = Optimizer::Dual)]
    optimizer: Optimizer,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SsvmArgs {
    #[command(flatten)]
    common: Common,
    /// Label recorded in the model.
    #[arg(long, default_value = "SRC")]
    kind: String,
    /// Category count; defaults to the largest label.
    #[arg(long = "K")]
    k: Option<usize>,
    /// Do not append the constant bias feature.
    #[arg(long)]
    no_bias: bool,
    /// Z-score features with statistics of the training data.
    #[arg(long)]
    normalize: bool,
}

#[derive(Debug, Args)]
struct SourceArgs {
    #[arg(long)]
    source_model: PathBuf,
    /// Adapt from this node of a tree model instead of a single-vector model.
    #[arg(long)]
    source_node: Option<String>,
}

#[derive(Debug, Args)]
struct AdaptArgs {
    #[command(flatten)]
    source: SourceArgs,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct HassvmArgs {
    #[command(flatten)]
    source: SourceArgs,
    /// Tree file (`{"root": ...}`).
    #[arg(long, required_unless_present = "brackets")]
    tree: Option<PathBuf>,
    /// Tree in bracket notation, e.g. `[T1,[T2,T3]]`.
    #[arg(long, conflicts_with = "tree")]
    brackets: Option<String>,
    /// Per-node loss multipliers, pre-order, comma separated.
    #[arg(long, value_delimiter = ',')]
    node_multipliers: Option<Vec<f64>>,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long, required = true, num_args = 1..)]
    data: Vec<PathBuf>,
    /// Evaluate this tree node's weights on every domain.
    #[arg(long)]
    node: Option<String>,
}

#[derive(Debug, Args)]
struct ExperimentArgs {
    #[arg(long)]
    config: PathBuf,
    /// Write the full report (JSON) here.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the table here.
    #[arg(long)]
    tsv: Option<PathBuf>,
    /// Worker threads for repetitions.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Generator config file; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long = "K")]
    k: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    depth: Option<usize>,
    #[arg(long)]
    branching: Option<usize>,
    #[arg(long)]
    source_per_category: Option<usize>,
    #[arg(long)]
    target_per_category: Option<usize>,
    #[arg(long)]
    class_mean_scale: Option<f64>,
    /// One magnitude per tree level, comma separated.
    #[arg(long, value_delimiter = ',')]
    shifts: Option<Vec<f64>>,
    #[arg(long)]
    noise: Option<f64>,
}

#[derive(Debug, Subcommand)]
enum LatentCommand {
    /// Relabel samples with a source model's predictions.
    Predict(PredictArgs),
    /// Split a sample pool into domains with seeded k-means.
    Partition(PartitionArgs),
}

#[derive(Debug, Args)]
struct PredictArgs {
    #[command(flatten)]
    source: SourceArgs,
    #[arg(long, required = true, num_args = 1..)]
    data: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct PartitionArgs {
    #[arg(long, required = true, num_args = 1..)]
    data: Vec<PathBuf>,
    #[arg(long)]
    domains: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Assignment file, one domain id per sample.
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprintln!("{}", one_line(&e.render().to_string()));
            return ExitCode::FAILURE;
        }
    };
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

/// Folds clap's multi-line usage error into one line.
fn one_line(rendered: &str) -> String {
    rendered
        .lines()
        .map(str::trim)
        .take_while(|l| !l.starts_with("Usage:"))
        .filter(|l| !l.is_empty() && !l.starts_with("tip:"))
        .collect::<Vec<_>>()
        .join(" ")
}
