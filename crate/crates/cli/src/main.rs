//! `pedcc`: generate centroids, train members, grow ensembles, evaluate.
//!
//! Exit codes: 0 success, 1 usage, 2 data or format, 3 training or numeric.

mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pedcc::centroids::DEFAULT_ITERATIONS;
use pedcc::{ClassId, ErrorCategory};

#[derive(Parser)]
#[command(
    name = "pedcc",
    version,
    about = "Class-incremental learning with predefined evenly distributed class centroids"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// A CSV file, or an IDX image file when `--labels` is given.
#[derive(Args, Clone, Debug)]
pub struct DataArgs {
    #[arg(long = "data", value_name = "PATH")]
    pub path: PathBuf,
    /// IDX label file paired with an IDX image file.
    #[arg(long, value_name = "PATH")]
    pub labels: Option<PathBuf>,
}

/// Command-line overrides applied on top of the config file.
#[derive(Args, Clone, Debug, Default)]
pub struct LossOverrides {
    #[arg(long)]
    pub scale: Option<f64>,
    #[arg(long)]
    pub margin: Option<f64>,
    #[arg(long)]
    pub root: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate an evenly distributed centroid set.
    GenCentroids {
        #[arg(long)]
        classes: usize,
        #[arg(long)]
        dim: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_ITERATIONS)]
        iterations: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one network against a fixed centroid file.
    Train {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        overrides: LossOverrides,
        #[arg(long)]
        centroids: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a member on a new class batch and append it to an ensemble.
    IncrAdd {
        #[arg(long)]
        ensemble: PathBuf,
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        overrides: LossOverrides,
    },
    /// Per-task and cumulative accuracy of an ensemble.
    Eval {
        #[arg(long)]
        ensemble: PathBuf,
        #[arg(long = "test", value_name = "PATH")]
        test: PathBuf,
        #[arg(long = "test-labels", value_name = "PATH")]
        test_labels: Option<PathBuf>,
        #[arg(long)]
        report: PathBuf,
    },
    /// Accuracy of one model restricted to a subset of its classes.
    SubsetEval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long = "test", value_name = "PATH")]
        test: PathBuf,
        #[arg(long = "test-labels", value_name = "PATH")]
        test_labels: Option<PathBuf>,
        /// Comma-separated class labels, e.g. "3,7,11".
        #[arg(long, value_delimiter = ',', required = true)]
        subset: Vec<ClassId>,
        #[arg(long)]
        report: PathBuf,
    },
    /// Write a synthetic Gaussian-blob dataset as CSV.
    Synth {
        #[arg(long)]
        classes: usize,
        #[arg(long)]
        dim: usize,
        #[arg(long)]
        per_class: usize,
        #[arg(long, default_value_t = 4.0)]
        separation: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Extra held-out samples per class, written to `--test-out`.
        #[arg(long, default_value_t = 0)]
        test_per_class: usize,
        #[arg(long)]
        test_out: Option<PathBuf>,
    },
}

fn run(command: Command) -> pedcc::Result<()> {
    match command {
        Command::GenCentroids {
            classes,
            dim,
            seed,
            iterations,
            out,
        } => commands::gen_centroids(classes, dim, seed, iterations, &out),
        Command::Train {
            data,
            spec,
            config,
            overrides,
            centroids,
            out,
        } => commands::train(commands::TrainArgs {
            data: &data,
            spec: &spec,
            config: config.as_deref(),
            overrides: &overrides,
            centroids: &centroids,
            out: &out,
        }),
        Command::IncrAdd {
            ensemble,
            data,
            spec,
            config,
            overrides,
        } => commands::incr_add(commands::IncrAddArgs {
            ensemble: &ensemble,
            data: &data,
            spec: &spec,
            config: config.as_deref(),
            overrides: &overrides,
        }),
        Command::Eval {
            ensemble,
            test,
            test_labels,
            report,
        } => commands::eval(
            &ensemble,
            &DataArgs {
                path: test,
                labels: test_labels,
            },
            &report,
        ),
        Command::SubsetEval {
            model,
            test,
            test_labels,
            subset,
            report,
        } => commands::subset_eval(
            &model,
            &DataArgs {
                path: test,
                labels: test_labels,
            },
            &subset,
            &report,
        ),
        Command::Synth {
            classes,
            dim,
            per_class,
            separation,
            seed,
            out,
            test_per_class,
            test_out,
        } => commands::synth(commands::SynthArgs {
            classes,
            dim,
            per_class,
            separation,
            seed,
            out: &out,
            test_per_class,
            test_out: test_out.as_deref(),
        }),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("pedcc: error: {}", e.to_string().replace('\n', " "));
            ExitCode::from(match e.category() {
                ErrorCategory::Usage => 1,
                ErrorCategory::Data => 2,
                ErrorCategory::Numeric => 3,
            })
        }
    }
}
