use std::path::PathBuf;

use clap::{ArgAction, Args, Parser, Subcommand, ValueEnum};

/// Rebalance imbalanced tabular datasets with classic resamplers and deep
/// generative oversamplers.
#[derive(Parser, Debug)]
#[command(name = "rebalance", version, about)]
pub struct Cli {
    /// More log output (-v info, -vv debug). RUST_LOG overrides.
    #[arg(short, long, action = ArgAction::Count, global = true)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Encode a raw CSV with its metadata sidecar.
    Preprocess(PreprocessArgs),
    /// Train one generative model on an encoded dataset.
    Train(TrainArgs),
    /// Draw synthetic rows from a trained model.
    Sample(SampleArgs),
    /// Run the cross-validated under/oversampling sweep.
    Grid(GridArgs),
    /// Summary tables from a results.csv.
    Report(ReportArgs),
    /// Heatmaps from a results.csv or PCA/t-SNE/SOM diagnostics of a sample.
    Viz(VizArgs),
}

#[derive(Args, Debug, Clone)]
pub struct OutDir {
    /// Output directory.
    #[arg(short, long, env = "REBALANCE_OUT", default_value = "rebalance-out")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct PreprocessArgs {
    /// Raw CSV with a header row.
    #[arg(long)]
    pub csv: PathBuf,
    /// JSON metadata describing label, positive class and variables.
    #[arg(long)]
    pub metadata: PathBuf,
    #[command(flatten)]
    pub out: OutDir,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Encoded dataset directory (output of `preprocess`).
    #[arg(long)]
    pub data: PathBuf,
    /// Model name, e.g. mv-vae, gan, mv-wgan-gp.
    #[arg(long)]
    pub model: String,
    #[arg(long, default_value = "minority")]
    pub strategy: String,
    /// JSON grid configuration; its generator overrides, validation fraction and seed apply.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[command(flatten)]
    pub out: OutDir,
}

#[derive(Args, Debug)]
pub struct SampleArgs {
    /// Model file written by `train`.
    #[arg(long)]
    pub model: PathBuf,
    /// Sampling strategy; defaults to the one the model was trained for.
    #[arg(long)]
    pub strategy: Option<String>,
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    /// Target class (0 or 1).
    #[arg(long, default_value_t = 1)]
    pub class: u8,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Row-draw budget for rejection sampling.
    #[arg(long)]
    pub draw_limit: Option<usize>,
    /// Write the encoded representation instead of decoded values.
    #[arg(long)]
    pub encoded: bool,
    /// Output file name inside the output directory.
    #[arg(long, default_value = "samples.csv")]
    pub file: String,
    #[command(flatten)]
    pub out: OutDir,
}

#[derive(Args, Debug)]
pub struct GridArgs {
    /// Encoded dataset directory (output of `preprocess`).
    #[arg(long)]
    pub data: PathBuf,
    /// JSON grid configuration, or a manifest.json from an earlier run to replay it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Comma-separated method ids and model names.
    #[arg(long, value_delimiter = ',')]
    pub methods: Option<Vec<String>>,
    /// Comma-separated sampling strategies for generative models.
    #[arg(long, value_delimiter = ',')]
    pub sampling: Option<Vec<String>>,
    #[arg(long, value_delimiter = ',')]
    pub usr_grid: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub osr_grid: Option<Vec<f64>>,
    #[arg(long)]
    pub folds: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub draw_limit: Option<usize>,
    /// Generator training epochs.
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Also write measured wall times into results.csv.
    #[arg(long)]
    pub record_wall_time: bool,
    /// Worker threads.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[command(flatten)]
    pub out: OutDir,
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    #[arg(long)]
    pub results: PathBuf,
    /// Imbalance ratio for the baseline row; read from a neighbouring manifest.json when absent.
    #[arg(long)]
    pub ir: Option<f64>,
    #[command(flatten)]
    pub out: OutDir,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum VizKindArg {
    /// One USR×OSR heatmap per oversampling method.
    Heatmap,
    /// PCA, t-SNE and SOM figures of real plus synthetic rows.
    Diagnostics,
}

#[derive(Args, Debug)]
pub struct VizArgs {
    #[arg(long, value_enum)]
    pub kind: VizKindArg,
    /// results.csv (heatmap).
    #[arg(long)]
    pub results: Option<PathBuf>,
    /// Encoded dataset directory (diagnostics).
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Classic oversampler id (diagnostics).
    #[arg(long)]
    pub method: Option<String>,
    /// Trained model file (diagnostics).
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long, default_value_t = 200)]
    pub n_real: usize,
    #[arg(long, default_value_t = 200)]
    pub n_synth: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub perplexity: Option<f64>,
    #[arg(long)]
    pub tsne_iterations: Option<usize>,
    #[arg(long)]
    pub som_epochs: Option<usize>,
    #[command(flatten)]
    pub out: OutDir,
}
