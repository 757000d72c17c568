use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use relnam::nam::SubnetSpec;
use relnam::optim::AdamConfig;
use relnam::rem::{CovariateLayout, Regime};
use relnam::simulator::EffectKind;
use relnam::trainer::TrainConfig;
use relnam::uncertainty::KernelForm;

#[derive(Debug, Parser)]
#[command(name = "relnam", version, about = "Neural additive relational event models")]
pub struct Cli {
    /// Worker threads for refits, CV cells and subnets (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand, Serialize, Deserialize)]
#[serde(tag = "subcommand", rename_all = "kebab-case")]
pub enum Command {
    /// Simulate an event sequence from known effect functions.
    Simulate(SimulateArgs),
    /// Draw nested case-control pairs from an event sequence.
    Sample(SampleArgs),
    /// Train one model on a pairs file.
    Fit(FitArgs),
    /// k-fold cross-validation over architectures and dropout rates.
    Cv(CvArgs),
    /// Train models on bootstrap resamples of a pairs file.
    Bootstrap(BootstrapArgs),
    /// Evaluate bootstrap models on a grid and summarize them by GP regression.
    Curves(CurvesArgs),
    /// Score a model against the generating truth.
    Score(ScoreArgs),
    /// Time training as the number of covariates grows.
    Bench(BenchArgs),
    /// Re-run the command recorded in a manifest.
    #[serde(skip)]
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 1000)]
    pub nodes: usize,
    #[arg(long, default_value_t = 50_000)]
    pub events: usize,
    /// full-dyadic or growing-citation.
    #[arg(long, default_value_t = Regime::FullDyadic)]
    pub regime: Regime,
    /// Uniform(0,1) sender attributes per node.
    #[arg(long, default_value_t = 1)]
    pub sender_attrs: usize,
    /// Uniform(0,1) receiver attributes per node.
    #[arg(long, default_value_t = 1)]
    pub receiver_attrs: usize,
    /// Comma-separated covariate sources, e.g. `sender:0,receiver:0,received:0:50`.
    #[arg(long, default_value = "sender:0,receiver:0", value_parser = CovariateLayout::parse_list)]
    pub covariates: CovariateLayout,
    /// One effect per covariate, in order, e.g. `sine(1,6.283185307179586,0)`.
    #[arg(long = "effect", num_args = 1.., default_values_t = default_effects())]
    pub effects: Vec<EffectKind>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

fn default_effects() -> Vec<EffectKind> {
    vec![
        EffectKind::Sine {
            amplitude: 1.0,
            frequency: std::f64::consts::TAU,
            phase: 0.0,
        },
        EffectKind::Quadratic {
            center: 0.5,
            scale: 4.0,
        },
    ]
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SampleArgs {
    #[arg(long)]
    pub events: PathBuf,
    #[arg(long)]
    pub nodes: PathBuf,
    /// Supplies the covariate layout and regime when they are not given.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[arg(long, value_parser = CovariateLayout::parse_list)]
    pub covariates: Option<CovariateLayout>,
    #[arg(long)]
    pub regime: Option<Regime>,
    /// Controls per case.
    #[arg(long, default_value_t = 1)]
    pub controls: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct TrainArgs {
    #[arg(long, default_value_t = 10)]
    pub epochs: usize,
    #[arg(long, default_value_t = 256)]
    pub batch_size: usize,
    #[arg(long, default_value_t = AdamConfig::default().lr)]
    pub lr: f64,
    #[arg(long, default_value_t = AdamConfig::default().beta1)]
    pub beta1: f64,
    #[arg(long, default_value_t = AdamConfig::default().beta2)]
    pub beta2: f64,
    #[arg(long, default_value_t = AdamConfig::default().eps)]
    pub eps: f64,
    /// Stop after this many epochs without improvement.
    #[arg(long)]
    pub patience: Option<usize>,
}

impl TrainArgs {
    pub fn config(&self, spec: SubnetSpec, seed: u64) -> TrainConfig {
        TrainConfig {
            spec,
            per_covariate: None,
            batch_size: self.batch_size,
            epochs: self.epochs,
            adam: AdamConfig {
                lr: self.lr,
                beta1: self.beta1,
                beta2: self.beta2,
                eps: self.eps,
            },
            seed,
            patience: self.patience,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct FitArgs {
    #[arg(long)]
    pub pairs: PathBuf,
    /// Preset (model1..model4) or hidden widths like `64-128-64`.
    #[arg(long, default_value = "model1")]
    pub arch: String,
    #[arg(long, default_value_t = 0.0)]
    pub dropout: f64,
    #[command(flatten)]
    pub train: TrainArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct CvArgs {
    #[arg(long)]
    pub pairs: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "model1,model2")]
    pub archs: Vec<String>,
    #[arg(long, value_delimiter = ',', default_value = "0")]
    pub dropouts: Vec<f64>,
    #[arg(long, default_value_t = 10)]
    pub folds: usize,
    #[command(flatten)]
    pub train: TrainArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct BootstrapArgs {
    #[arg(long)]
    pub pairs: PathBuf,
    #[arg(long, default_value = "model1")]
    pub arch: String,
    #[arg(long, default_value_t = 0.0)]
    pub dropout: f64,
    #[arg(long, default_value_t = 5)]
    pub refits: usize,
    #[command(flatten)]
    pub train: TrainArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct CurvesArgs {
    /// Model files, or directories holding `model_b{i}.json` files.
    #[arg(long, num_args = 1.., required = true)]
    pub models: Vec<PathBuf>,
    #[arg(long, default_value_t = 100)]
    pub grid_points: usize,
    /// Grid range; defaults to each subnet's training input range.
    #[arg(long, allow_hyphen_values = true)]
    pub x_min: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub x_max: Option<f64>,
    #[arg(long, default_value_t = 0.1)]
    pub length_scale: f64,
    /// `rbf` (absolute distance) or `rbf-squared`.
    #[arg(long, default_value_t = KernelForm::Absolute)]
    pub kernel: KernelForm,
    #[arg(long, default_value_t = 1.0)]
    pub jitter: f64,
    /// Accepted for uniformity; curve fitting draws no random numbers.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ScoreArgs {
    #[arg(long)]
    pub pairs: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub truth: PathBuf,
    /// Directory with `curves_k{k}.csv` files for curve metrics.
    #[arg(long)]
    pub curves: Option<PathBuf>,
    /// Accepted for uniformity; scoring draws no random numbers.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct BenchArgs {
    #[arg(long, value_delimiter = ',', default_value = "2,4,8")]
    pub qs: Vec<usize>,
    #[arg(long, default_value_t = 20_000)]
    pub events: usize,
    #[arg(long, default_value_t = 200)]
    pub nodes: usize,
    #[arg(long, default_value = "model1")]
    pub arch: String,
    #[arg(long, default_value_t = 1)]
    pub epochs: usize,
    #[arg(long, default_value_t = 256)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct ReplayArgs {
    pub manifest: PathBuf,
    /// Write to this directory instead of the recorded one.
    #[arg(long)]
    pub out: Option<PathBuf>,
}
