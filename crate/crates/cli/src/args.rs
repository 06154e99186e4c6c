use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "ppmem",
    version,
    about = "Projection pursuit on Gaussian mixtures with modal clustering of the projected data"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit Gaussian mixtures over a (G, family) grid and select by BIC.
    Fit(RunArgs),
    /// Estimate a maximal-negentropy projection basis and project the data.
    Project(RunArgs),
    /// Fit a mixture to projected data and cluster it with Modal EM.
    Cluster(RunArgs),
    /// fit, project, cluster and evaluate in one run.
    Pipeline(RunArgs),
    /// Write a synthetic dataset as CSV.
    Simulate(SimulateArgs),
    /// Print the adjusted Rand index between two labelings.
    Evaluate(EvaluateArgs),
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Input CSV (for `cluster`, the projected data; defaults to
    /// OUTPUT_DIR/projected.csv).
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long, default_value = ".")]
    pub output_dir: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    /// TOML file with pipeline settings; command-line flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Projection dimension, or a range such as 1..5 for a sweep.
    #[arg(long)]
    pub dim: Option<String>,
    /// Use the data as given instead of standardizing columns.
    #[arg(long)]
    pub no_standardize: bool,
    /// Numbers of components, e.g. 1..9 or 1,2,4.
    #[arg(long)]
    pub components: Option<String>,
    /// Covariance families, e.g. EII,VVV or all.
    #[arg(long)]
    pub families: Option<String>,
    /// Keep every Modal EM iterate in modal.json.
    #[arg(long)]
    pub record_paths: bool,
    /// Column holding class labels; it is excluded from the features.
    #[arg(long)]
    pub label_column: Option<String>,
    /// Mixture used by `project` (defaults to OUTPUT_DIR/pp_model.json).
    #[arg(long)]
    pub model: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Generator {
    /// 100 x 50, two groups of 85 and 15.
    TwoGroup,
    /// 400 x 8, eight clusters on the corners of a block plus 5 noise variables.
    Block8,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    pub generator: Generator,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Destination file; standard output when omitted.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    pub labels_a: PathBuf,
    pub labels_b: PathBuf,
    /// Column to read from multi-column files.
    #[arg(long, default_value = "class")]
    pub label_column: String,
}
