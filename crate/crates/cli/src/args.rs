use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser)]
#[command(
    name = "flimdeconv",
    version,
    about = "Simulate, blur and deconvolve frequency-domain FLIM fields"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write an ideal two-fluorophore field.
    Simulate(SimulateArgs),
    /// Write a Gaussian PSF as a scalar field.
    Psf(PsfCmdArgs),
    /// Blur a field with the PSF.
    Convolve(ConvolveArgs),
    /// Add one seeded noise realization to a field.
    Noise(NoiseCmdArgs),
    /// Richardson-Lucy / RL-TV deconvolution of both planes.
    Deconvolve(DeconvolveArgs),
    /// Export the phase-lifetime map of a field (CSV, 16-bit PGM).
    Lifetime(LifetimeArgs),
    /// Export one row of a field's lifetime map.
    Profile(ProfileArgs),
    /// Boundary position and lifetime RMSE of an estimate against a truth field.
    Metrics(MetricsArgs),
    /// simulate -> convolve -> noise -> deconvolve -> lifetime -> metrics.
    Pipeline(PipelineArgs),
    /// Re-run a manifest into a new location and compare output digests.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    Fig1a,
    Fig1b,
    #[value(name = "fig2-equal")]
    Fig2Equal,
    #[value(name = "fig2-unequal")]
    Fig2Unequal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BoundaryMode {
    Reflect,
    Periodic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EngineMode {
    Fft,
    Direct,
}

/// Whether realizations are averaged as fields (then one lifetime map) or as
/// per-realization lifetime maps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AvgOrder {
    #[default]
    Field,
    Lifetime,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NoiseKindArg {
    Gaussian,
    Poisson,
}

#[derive(Debug, Clone, Default, Args)]
pub struct PhantomArgs {
    /// Scenario preset; explicit flags override its values.
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
    /// Length of a 1D phantom.
    #[arg(long, conflicts_with_all = ["width", "height"])]
    pub n: Option<usize>,
    #[arg(long)]
    pub width: Option<usize>,
    #[arg(long)]
    pub height: Option<usize>,
    /// First column of the right fluorophore.
    #[arg(long)]
    pub boundary_px: Option<usize>,
    /// Left lifetime, ns.
    #[arg(long)]
    pub tau1: Option<f64>,
    /// Right lifetime, ns.
    #[arg(long)]
    pub tau2: Option<f64>,
    #[arg(long)]
    pub a1: Option<f64>,
    #[arg(long)]
    pub a2: Option<f64>,
    #[arg(long)]
    pub freq_mhz: Option<f64>,
    #[arg(long)]
    pub pitch_nm: Option<f64>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct PsfArgs {
    #[arg(long)]
    pub psf_sigma_px: Option<f64>,
    /// Measured PSF as a scalar FLIMCF1 field (renormalized to unit sum).
    #[arg(long, conflicts_with = "psf_sigma_px")]
    pub psf: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct OpticsArgs {
    #[arg(long, value_enum)]
    pub boundary_mode: Option<BoundaryMode>,
    #[arg(long, value_enum)]
    pub engine: Option<EngineMode>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct DeconvArgs {
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    pub iters: Option<u32>,
    #[arg(long)]
    pub lambda: Option<f64>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct NoiseArgs {
    /// Gaussian noise standard deviation; 0 disables noise.
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    pub realizations: Option<u32>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub avg_order: Option<AvgOrder>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub phantom: PhantomArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PsfCmdArgs {
    #[arg(long)]
    pub psf_sigma_px: Option<f64>,
    /// Kernel dimensionality.
    #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u8).range(1..=2))]
    pub dims: u8,
    #[arg(long)]
    pub pitch_nm: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ConvolveArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[command(flatten)]
    pub psf: PsfArgs,
    #[command(flatten)]
    pub optics: OpticsArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct NoiseCmdArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value = "gaussian")]
    pub kind: NoiseKindArg,
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Counts assigned to the field maximum (Poisson noise).
    #[arg(long, default_value_t = 100.0)]
    pub peak_counts: f64,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Realization index drawn from the seed.
    #[arg(long, default_value_t = 0)]
    pub realization: u32,
    /// Keep negative values instead of clamping them to zero.
    #[arg(long)]
    pub no_clamp: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DeconvolveArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[command(flatten)]
    pub psf: PsfArgs,
    #[command(flatten)]
    pub optics: OpticsArgs,
    #[command(flatten)]
    pub deconv: DeconvArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct LifetimeArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Also write this row as a profile CSV.
    #[arg(long)]
    pub row: Option<usize>,
    /// Output basename; `.csv`, `.pgm` and `.pgm.txt` are appended.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ProfileArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub row: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    /// Estimated field.
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Noiseless ideal field.
    #[arg(long)]
    pub truth: PathBuf,
    /// Row used for boundary localization (default: centre row).
    #[arg(long)]
    pub row: Option<usize>,
    #[arg(long)]
    pub tau1: Option<f64>,
    #[arg(long)]
    pub tau2: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    #[command(flatten)]
    pub phantom: PhantomArgs,
    #[command(flatten)]
    pub psf: PsfArgs,
    #[command(flatten)]
    pub optics: OpticsArgs,
    #[command(flatten)]
    pub deconv: DeconvArgs,
    #[command(flatten)]
    pub noise: NoiseArgs,
    /// Row for profiles and boundary metrics (default: centre row).
    #[arg(long)]
    pub row: Option<usize>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// New output location (a directory for pipeline runs, a directory to
    /// receive the output file otherwise).
    #[arg(long)]
    pub out: PathBuf,
}
