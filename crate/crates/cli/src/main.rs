//! Batch front end for the waveguide-emitter simulator. Every command
//! reads one config file, writes CSV (and SVG) results into --out, and
//! prints its headline numbers; reruns with the same inputs produce
//! byte-identical files. Exit codes: 0 success, 2 input error, 3
//! numerical failure.

mod config;
mod plot;
mod run;

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "wgqed",
    version,
    about = "Transmission spectra, photon correlations, and parameter fits \
             for two-level emitters coupled to a waveguide"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
pub struct RunArgs {
    /// Configuration file (TOML)
    #[arg(long)]
    pub config: PathBuf,
    /// Directory for output files
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Override the sampling seed from the config
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads for internal parallel maps (default: all cores)
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Measured spectrum CSV (detuning_GHz, T_over_T0[, sigma])
    #[arg(long)]
    pub data: PathBuf,
}

#[derive(Args)]
pub struct WaveguideArgs {
    /// Configuration file (TOML)
    #[arg(long)]
    pub config: PathBuf,
    /// Directory for output files
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// White-light transmission CSV (wavelength_nm, intensity)
    #[arg(long)]
    pub white_light: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Transmission spectrum over the detuning grid
    Spectrum(RunArgs),
    /// Intensity autocorrelation of the transmitted laser
    G2(RunArgs),
    /// Resonant dip versus drive strength
    Saturate(RunArgs),
    /// Posterior sampling of single-dot parameters from measured data
    Fit(FitArgs),
    /// Autocorrelation of collected emission under incoherent pumping
    PlG2(RunArgs),
    /// Fringe analysis of a white-light spectrum and the photon budget
    Waveguide(WaveguideArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Spectrum(args) => run::cmd_spectrum(args),
        Command::G2(args) => run::cmd_g2(args),
        Command::Saturate(args) => run::cmd_saturate(args),
        Command::Fit(args) => run::cmd_fit(args),
        Command::PlG2(args) => run::cmd_pl_g2(args),
        Command::Waveguide(args) => run::cmd_waveguide(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
