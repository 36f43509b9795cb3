use std::path::PathBuf;

use anglecs::{Algorithm, Generator, MarginLoss};
use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "anglecs", version, about = "Angle-based cost-sensitive boosting")]
pub struct Cli {
    /// Worker threads for parallel replications and trials [default: all cores].
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Log more (-v: one line per replication, -vv: per round).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run replicated experiments and write per-round test-cost curves.
    Simulate(SimulateArgs),
    /// Fit an ensemble to a CSV file and save it.
    Train(TrainArgs),
    /// Predict classes, expected costs and probabilities for a CSV file.
    Predict(PredictArgs),
    /// Check numerically that risk minimizers follow the Bayes rule.
    ConsistencyCheck(ConsistencyArgs),
}

/// CSV input options shared by `simulate --data` and `train`.
#[derive(Debug, Args)]
pub struct CsvArgs {
    /// Name of the label column.
    #[arg(long, default_value = "label")]
    pub label: String,

    /// Comma-separated categorical columns (one-hot encoded); others are numeric.
    #[arg(long, value_delimiter = ',')]
    pub categorical: Vec<String>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Synthetic generator: waveform or four_class.
    #[arg(long = "gen", value_parser = parse_generator, conflicts_with = "data", required_unless_present = "data")]
    pub generator: Option<Generator>,

    /// CSV dataset split into train and test sets per replication.
    #[arg(long)]
    pub data: Option<PathBuf>,

    #[command(flatten)]
    pub csv: CsvArgs,

    /// Training share of each class for --data runs (stratified).
    #[arg(long, default_value_t = 0.04)]
    pub train_fraction: f64,

    /// Boosting algorithm: adaboost or logitboost.
    #[arg(long = "algo", default_value = "adaboost", value_parser = parse_algorithm)]
    pub algorithm: Algorithm,

    /// Cost matrix: zero_one, sim1, sim2, linear, partitioned_linear or a CSV path.
    #[arg(long, default_value = "zero_one")]
    pub cost: String,

    /// Boosting rounds.
    #[arg(long, default_value_t = 200, value_parser = clap::value_parser!(u64).range(1..))]
    pub rounds: u64,

    /// Replications.
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
    pub reps: u64,

    /// Base seed; replication r uses substream r.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,

    /// Maximum leaves per tree.
    #[arg(long, default_value_t = 4, value_parser = clap::value_parser!(u64).range(2..))]
    pub max_leaves: u64,

    /// Training sample size for generator runs.
    #[arg(long, default_value_t = 300, value_parser = clap::value_parser!(u64).range(1..))]
    pub n_train: u64,

    /// Test sample size for generator runs.
    #[arg(long, default_value_t = 4700, value_parser = clap::value_parser!(u64).range(1..))]
    pub n_test: u64,

    /// Output directory for curves.csv and summary.csv.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Training CSV with a header row.
    #[arg(long)]
    pub data: PathBuf,

    #[command(flatten)]
    pub csv: CsvArgs,

    /// Boosting algorithm: adaboost or logitboost.
    #[arg(long = "algo", default_value = "adaboost", value_parser = parse_algorithm)]
    pub algorithm: Algorithm,

    /// Cost matrix: zero_one, sim1, sim2, linear, partitioned_linear or a CSV path.
    #[arg(long, default_value = "zero_one")]
    pub cost: String,

    /// Boosting rounds.
    #[arg(long, default_value_t = 200, value_parser = clap::value_parser!(u64).range(1..))]
    pub rounds: u64,

    /// Maximum leaves per tree.
    #[arg(long, default_value_t = 4, value_parser = clap::value_parser!(u64).range(2..))]
    pub max_leaves: u64,

    /// Leave continuous columns unstandardized.
    #[arg(long)]
    pub no_standardize: bool,

    /// Where to write the model.
    #[arg(long)]
    pub model: PathBuf,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// Model written by `train`.
    #[arg(long)]
    pub model: PathBuf,

    /// CSV with the model's feature columns; a label column is ignored.
    #[arg(long)]
    pub data: PathBuf,

    /// Output CSV.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ConsistencyArgs {
    /// Margin loss: exponential, logit or lmum.
    #[arg(long, default_value = "exponential", value_parser = parse_loss_name)]
    pub loss: String,

    /// LMUM parameter a (> 0).
    #[arg(long, default_value_t = 1.0)]
    pub lmum_a: f64,

    /// LMUM parameter c (>= 0).
    #[arg(long, default_value_t = 0.0)]
    pub lmum_c: f64,

    /// Number of classes.
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u64).range(2..))]
    pub k: u64,

    /// Cost matrix: zero_one, sim1, sim2, linear, partitioned_linear or a CSV path.
    #[arg(long, default_value = "zero_one")]
    pub cost: String,

    /// Random distributions to test.
    #[arg(long, default_value_t = 200, value_parser = clap::value_parser!(u64).range(1..))]
    pub trials: u64,

    /// Base seed; trial t uses substream t.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,

    /// Per-trial report CSV.
    #[arg(long)]
    pub out: PathBuf,
}

impl ConsistencyArgs {
    pub fn margin_loss(&self) -> anglecs::Result<MarginLoss> {
        match self.loss.as_str() {
            "lmum" => MarginLoss::lmum(self.lmum_a, self.lmum_c),
            other => other.parse(),
        }
    }
}

fn parse_generator(s: &str) -> Result<Generator, String> {
    s.parse().map_err(|e: anglecs::Error| e.to_string())
}

fn parse_algorithm(s: &str) -> Result<Algorithm, String> {
    s.parse().map_err(|e: anglecs::Error| e.to_string())
}

fn parse_loss_name(s: &str) -> Result<String, String> {
    s.parse::<MarginLoss>()
        .map(|_| s.to_string())
        .map_err(|e| e.to_string())
}
