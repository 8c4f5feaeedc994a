use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "semlink",
    version,
    about = "Channel-adaptive digital semantic link: simulation, analysis and training",
    args_override_self = true,
    after_help = "Every command writes CSV with a header row to stdout or --out. \
Numbers carry 9 significant digits. Exit status: 0 success, 1 invalid input or \
configuration, 2 file or format error."
)]
pub struct Cli {
    /// `key = value` file supplying defaults for the command's flags
    /// (keys are flag names, `#` starts a comment).
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Monte Carlo flip and erasure rates of the modulation link.
    ///
    /// Columns: order,a,snr_db,flip_rate,erasure_rate,analytic_mu,analytic_d,n_bits
    SimulateBer(SimulateBerArgs),
    /// Analytic BSEC parameters next to their Monte Carlo estimates.
    ///
    /// Columns: snr_db,mu,d,r,empirical_mu,empirical_d,empirical_r,n_bits
    BsecTable(BsecTableArgs),
    /// Ternary decision intervals of every bit of one order.
    ///
    /// Columns: bit,output,lower,upper (bits numbered from 1)
    DemodRegions(DemodRegionsArgs),
    /// Per-bit thresholds and the order chosen at a given SNR.
    ///
    /// Columns: bit,alpha,tau2,tau4,tau6,order
    AdaptivePlan(AdaptivePlanArgs),
    /// Ergodic capacity for |h| uniform on [g1, g2].
    ///
    /// Columns: g1,g2,capacity
    Capacity(CapacityArgs),
    /// Train encoder, decoder and classifier through sampled BSECs.
    ///
    /// Columns: epoch,warmup,loss,mse,ce,accuracy
    Train(TrainArgs),
    /// Send a test set through the simulated link with a trained model.
    ///
    /// Columns: snr_db,ber,erasure_rate,accuracy,mse,spectral_efficiency
    Eval(EvalArgs),
    /// Quick numerical self-test.
    ///
    /// Columns: check,value,expected,tolerance,pass
    Selfcheck(SelfcheckArgs),
}

#[derive(Debug, Args)]
pub struct Output {
    /// Write CSV here instead of stdout.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateBerArgs {
    /// Bits per symbol: 2, 4 or 6 (comma-separated for several).
    #[arg(long, value_delimiter = ',', default_value = "2")]
    pub order: Vec<u32>,
    /// Erasure-band width in units of d_min.
    #[arg(long, default_value_t = 0.0)]
    pub a: f64,
    #[arg(
        long = "snr-db",
        value_delimiter = ',',
        allow_negative_numbers = true,
        default_value = "-3,0,3,6"
    )]
    pub snr_db: Vec<f64>,
    #[arg(long, default_value_t = 1_000_000)]
    pub bits: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct BsecTableArgs {
    #[arg(long, default_value_t = 2)]
    pub order: u32,
    #[arg(long, default_value_t = 0.5)]
    pub a: f64,
    #[arg(
        long = "snr-db",
        value_delimiter = ',',
        allow_negative_numbers = true,
        default_value = "-3,0,3,6"
    )]
    pub snr_db: Vec<f64>,
    #[arg(long, default_value_t = 1_000_000)]
    pub bits: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct DemodRegionsArgs {
    #[arg(long, default_value_t = 4)]
    pub order: u32,
    /// One offset for all bits, or one per bit.
    #[arg(long, value_delimiter = ',', default_value = "0.5")]
    pub a: Vec<f64>,
    /// Report endpoints in units of d_min.
    #[arg(long = "in-dmin")]
    pub in_dmin: bool,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BetaSet {
    Homogeneous,
    Heterogeneous,
}

#[derive(Debug, Args)]
pub struct ProfileArgs {
    /// Profile file with `index,alpha,a` lines.
    #[arg(long, value_name = "FILE")]
    pub profile: Option<PathBuf>,
    /// Same robustness level for every bit.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Robustness level of the first bit (linear profile).
    #[arg(long = "alpha-first")]
    pub alpha_first: Option<f64>,
    /// Robustness level of the last bit (linear profile).
    #[arg(long = "alpha-last")]
    pub alpha_last: Option<f64>,
    /// Erasure-band offset applied to every bit of a generated profile.
    #[arg(long, default_value_t = 0.5)]
    pub a: f64,
}

#[derive(Debug, Args)]
pub struct AdaptivePlanArgs {
    /// Latent bits when no profile file is given.
    #[arg(long = "latent-bits", default_value_t = 96)]
    pub latent_bits: usize,
    #[command(flatten)]
    pub profile: ProfileArgs,
    #[arg(long, value_enum, default_value_t = BetaSet::Heterogeneous)]
    pub betas: BetaSet,
    /// SNR (dB) at which to choose orders; without it the order column is empty.
    #[arg(long = "snr-db", allow_negative_numbers = true)]
    pub snr_db: Option<f64>,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct CapacityArgs {
    #[arg(long, default_value_t = 0.37)]
    pub g1: f64,
    #[arg(long, default_value_t = 2.5)]
    pub g2: f64,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// IDX image file; synthetic data is used when absent.
    #[arg(long, value_name = "FILE", requires = "labels")]
    pub images: Option<PathBuf>,
    /// IDX label file.
    #[arg(long, value_name = "FILE", requires = "images")]
    pub labels: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    pub classes: usize,
    #[arg(long, default_value_t = 64)]
    pub dim: usize,
    #[arg(long = "per-class", default_value_t = 200)]
    pub per_class: usize,
    /// Standard deviation of the synthetic per-example noise.
    #[arg(long, default_value_t = 1.0)]
    pub noise: f64,
    /// Seed of the synthetic data and of the train/test split.
    #[arg(long = "data-seed", default_value_t = 100)]
    pub data_seed: u64,
    /// Share of examples used for training; the rest is the test set.
    #[arg(long = "train-fraction", default_value_t = 0.8)]
    pub train_fraction: f64,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long = "latent-bits", default_value_t = 32)]
    pub latent_bits: usize,
    #[command(flatten)]
    pub profile: ProfileArgs,
    #[arg(long, default_value_t = 30)]
    pub epochs: usize,
    #[arg(long, default_value_t = 5)]
    pub warmup: usize,
    #[arg(long, default_value_t = 32)]
    pub batch: usize,
    #[arg(long, default_value_t = 0.001)]
    pub lr: f64,
    #[arg(long, default_value_t = 0.2)]
    pub lambda: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Where to store the trained models.
    #[arg(long = "model-out", value_name = "FILE")]
    pub model_out: PathBuf,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Adaptive,
    Fixed,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long, value_name = "FILE")]
    pub model: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub profile: ProfileArgs,
    #[arg(long, value_enum, default_value_t = ModeArg::Adaptive)]
    pub mode: ModeArg,
    /// Bits per symbol in fixed mode.
    #[arg(long, default_value_t = 2)]
    pub order: u32,
    #[arg(long, value_enum, default_value_t = BetaSet::Heterogeneous)]
    pub betas: BetaSet,
    /// Fixed SNR points (dB); without them |h| is drawn from [g1, g2] and
    /// snr_db reports the mean SNR.
    #[arg(long = "snr-db", value_delimiter = ',', allow_negative_numbers = true)]
    pub snr_db: Vec<f64>,
    #[arg(long, default_value_t = 0.37)]
    pub g1: f64,
    #[arg(long, default_value_t = 2.5)]
    pub g2: f64,
    /// Images per channel realization.
    #[arg(long = "block-len", default_value_t = 10)]
    pub block_len: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Also write the run's configuration, seed and timestamps here.
    #[arg(long, value_name = "FILE")]
    pub record: Option<PathBuf>,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct SelfcheckArgs {
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[command(flatten)]
    pub output: Output,
}
