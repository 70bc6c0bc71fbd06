//! `unmix`: simulate, unmix and analyze fluorescence spectra.
//!
//! Exit codes: 0 success, 1 failed `--check`, 2 I/O error, 3 invalid input,
//! 4 wavelength grid mismatch.

mod commands;
mod error;
mod meta;
mod plot;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use unmix_core::Algorithm;

use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "unmix",
    version,
    about = "Sparse nonnegative unmixing of fluorescence spectra"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Export the built-in library, or validate and normalize a library CSV.
    Library(LibraryArgs),
    /// Simulate labelled spectra with Poisson-like noise.
    Simulate(SimulateArgs),
    /// Estimate abundances for a batch of spectra.
    Unmix(UnmixArgs),
    /// Analyze the noise distribution of a batch of spectra.
    Noise(NoiseArgs),
    /// Compare solvers on a simulated corpus.
    Bench(BenchArgs),
    /// Render CSV outputs as SVG charts.
    Plot(PlotArgs),
}

#[derive(Debug, Args)]
pub struct LibraryArgs {
    /// Library CSV to load; the built-in library when omitted.
    #[arg(long)]
    pub library: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub library: Option<PathBuf>,
    /// JSON simulation config; flags below override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Draw noise as Normal(s, s) instead of Normal(0, s).
    #[arg(long)]
    pub literal_noise: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SolverArgs {
    #[arg(long, value_parser = parse_algo, default_value = "nnls")]
    pub algo: Algorithm,
    #[arg(long, default_value_t = 0.0)]
    pub lambda: f64,
    #[arg(long, default_value_t = 0.9)]
    pub mu: f64,
    #[arg(long, default_value_t = 1e-6)]
    pub eps: f64,
    #[arg(long, default_value_t = 5000)]
    pub max_iters: usize,
    /// Step numerator c in eta_t = c / sqrt(t).
    #[arg(long, default_value_t = 0.01)]
    pub step: f64,
    /// SNNLS momentum with `+ B^T (s - Bc)`, which ascends the data term.
    #[arg(long)]
    pub literal_signs: bool,
}

#[derive(Debug, Args)]
pub struct UnmixArgs {
    #[arg(long)]
    pub library: Option<PathBuf>,
    #[arg(long)]
    pub spectra: PathBuf,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Ground-truth abundances (`spectrum_id,<names>`) for error metrics.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Resample the library onto the spectra grid when they differ.
    #[arg(long)]
    pub resample: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct NoiseArgs {
    #[arg(long)]
    pub spectra: PathBuf,
    /// High-pass cutoff as a fraction of the sampling rate.
    #[arg(long, default_value_t = 0.1)]
    pub cutoff: f64,
    #[arg(long, default_value_t = 50)]
    pub bins: usize,
    /// Multiply spectra by this factor first, e.g. to convert to counts.
    #[arg(long, default_value_t = 1.0)]
    pub scale: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long)]
    pub library: Option<PathBuf>,
    /// JSON bench config; flags below override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub repetitions: Option<usize>,
    /// Exit with status 1 if an expected ordering fails.
    #[arg(long)]
    pub check: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    /// Library, spectra or noise CSV.
    #[arg(long)]
    pub input: PathBuf,
    /// Output directory for the SVG files.
    #[arg(long)]
    pub out: PathBuf,
    /// Draw at most this many spectra from a batch.
    #[arg(long, default_value_t = 20)]
    pub max_curves: usize,
}

fn parse_algo(s: &str) -> Result<Algorithm, String> {
    s.parse().map_err(|e: unmix_core::Error| e.to_string())
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("UNMIX_THREADS") else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        CliError::Usage(format!(
            "UNMIX_THREADS must be a positive integer, got '{raw}'"
        ))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Usage(format!("cannot configure {n} threads: {e}")))
}

fn run(cli: Cli) -> Result<(), CliError> {
    configure_threads()?;
    match cli.command {
        Command::Library(a) => commands::library(&a),
        Command::Simulate(a) => commands::simulate(&a),
        Command::Unmix(a) => commands::unmix(&a),
        Command::Noise(a) => commands::noise(&a),
        Command::Bench(a) => commands::bench(&a),
        Command::Plot(a) => plot::run(&a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() {
                error::EXIT_VALIDATION
            } else {
                0
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
