use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "dnbg", version, about = "Causal dynamic MRI reconstruction")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a radial sampling mask (.pgm, or .bin with a .json sidecar).
    Mask(MaskArgs),
    /// Write a synthetic dynamic phantom dataset.
    Phantom(PhantomArgs),
    /// Sample a dataset in k-space, one mask per frame.
    Sample(SampleArgs),
    /// Reconstruct a k-space sequence frame by frame.
    Reconstruct(ReconstructArgs),
    /// Compare reconstructions against ground truth.
    Evaluate(EvaluateArgs),
    /// Rerun a reconstruction over a range of one parameter.
    Sweep(SweepArgs),
}

#[derive(Debug, Args)]
pub struct MaskArgs {
    #[arg(long, default_value_t = 256)]
    pub side: usize,
    /// Target sampling rate; the ray count is chosen to match it.
    #[arg(long, conflicts_with = "rays")]
    pub rate: Option<f64>,
    /// Explicit number of rays.
    #[arg(long)]
    pub rays: Option<usize>,
    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DTypeArg {
    Real32,
    Complex64,
}

#[derive(Debug, Args)]
pub struct PhantomArgs {
    #[arg(long, default_value_t = 64)]
    pub side: usize,
    #[arg(long, default_value_t = 10)]
    pub frames: usize,
    /// Motion and pulsation strength in [0, 2].
    #[arg(long, default_value_t = 1.0)]
    pub amplitude: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = DTypeArg::Real32)]
    pub dtype: DTypeArg,
    /// Output stem; `<stem>.json` and `<stem>.raw` are written.
    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    /// Dataset stem.
    #[arg(long)]
    pub dataset: PathBuf,
    /// Rate of the frame-1 mask.
    #[arg(long, default_value_t = 0.4)]
    pub first_rate: f64,
    /// Rate of the masks of frames 2 onwards.
    #[arg(long, default_value_t = 0.2)]
    pub rate: f64,
    /// Mask file for frame 1, overriding `--first-rate`.
    #[arg(long)]
    pub first_mask: Option<PathBuf>,
    /// Mask file for frames 2 onwards, overriding `--rate`.
    #[arg(long)]
    pub mask: Option<PathBuf>,
    /// Per-component standard deviation of complex Gaussian noise.
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Dnbg,
    Ablation,
    ZeroFilled,
}

/// Settings layered over the configuration file.
#[derive(Debug, Args)]
pub struct Overrides {
    /// TOML configuration; unspecified keys keep their defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub iters: Option<usize>,
    #[arg(long)]
    pub groups: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Pin sampled k-space entries to the measurements.
    #[arg(long)]
    pub noiseless: bool,
}

#[derive(Debug, Args)]
pub struct ReconstructArgs {
    /// K-space sequence written by `sample`.
    #[arg(long)]
    pub kspace: PathBuf,
    #[command(flatten)]
    pub overrides: Overrides,
    #[arg(long, value_enum, default_value_t = Method::Dnbg)]
    pub method: Method,
    /// Ground-truth dataset stem; enables PSNR columns and error maps.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Fully sampled guide dataset stem; its first frame replaces the
    /// frame-1 reconstruction.
    #[arg(long)]
    pub guide: Option<PathBuf>,
    /// Output directory.
    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Reconstructed dataset stem.
    #[arg(long)]
    pub recon: PathBuf,
    #[arg(long)]
    pub truth: PathBuf,
    /// CSV path; standard output when omitted.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepParam {
    /// Number of patch groups.
    #[value(name = "Ng", alias = "ng")]
    Groups,
    /// Patch area in pixels.
    #[value(name = "L", alias = "l")]
    PatchArea,
    /// Neighborhood radius.
    #[value(name = "R1", alias = "r1")]
    Radius,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub kspace: PathBuf,
    #[arg(long)]
    pub truth: PathBuf,
    #[command(flatten)]
    pub overrides: Overrides,
    #[arg(long, value_enum)]
    pub param: SweepParam,
    /// Comma-separated values.
    #[arg(long, value_delimiter = ',', required = true)]
    pub values: Vec<f64>,
    /// Runs per value, with consecutive seeds.
    #[arg(long, default_value_t = 3)]
    pub repeats: usize,
    /// Configurations run at once.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}
