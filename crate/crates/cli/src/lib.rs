//! Command-line front end for the two-photon spectrum simulator.

pub mod commands;
pub mod config;
pub mod output;
pub mod plot;

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use thiserror::Error;

pub use commands::run;
pub use config::RunConfig;

/// Prefix of the environment variables that override configuration values.
pub const ENV_PREFIX: &str = "TPSIM_";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] tpsim::Error),
    #[error("I/O error at {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("sensor and direct integration disagree: {0}")]
    Disagreement(String),
    #[error("{0}")]
    Other(String),
}

impl CliError {
    /// 2 configuration, 3 convergence, 4 I/O, 1 anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Core(e) if e.is_convergence() => 3,
            CliError::Core(e) => match root_cause(e) {
                tpsim::Error::InvalidParameter { .. }
                | tpsim::Error::InvalidGrid(_)
                | tpsim::Error::SensorBackAction { .. } => 2,
                _ => 1,
            },
            CliError::Io { .. } => 4,
            _ => 1,
        }
    }
}

fn root_cause(mut e: &tpsim::Error) -> &tpsim::Error {
    while let tpsim::Error::Point { source, .. } = e {
        e = source;
    }
    e
}

#[derive(Debug, Parser)]
#[command(name = "tpsim", version, about = "Frequency-filtered two-photon spectra of a driven two-level emitter")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// TOML run configuration (defaults to the resonant Omega/2pi = 2.2 GHz setup)
    #[arg(long, global = true, env = "TPSIM_CONFIG")]
    pub config: Option<PathBuf>,

    /// Output directory
    #[arg(long, global = true, env = "TPSIM_OUT")]
    pub out: Option<PathBuf>,

    /// Worker threads for map sweeps
    #[arg(long, global = true, env = "TPSIM_WORKERS")]
    pub workers: Option<usize>,

    /// Detector timing response FWHM in ps
    #[arg(long, global = true, env = "TPSIM_IRF", value_name = "PS")]
    pub irf: Option<f64>,

    /// Spectral-diffusion FWHM in GHz
    #[arg(long, global = true, env = "TPSIM_DIFFUSION", value_name = "GHZ")]
    pub diffusion: Option<f64>,

    /// Points per map axis
    #[arg(long, global = true, env = "TPSIM_GRID", value_name = "N")]
    pub grid: Option<usize>,

    /// Half-width of the map axes in GHz
    #[arg(long, global = true, env = "TPSIM_RANGE", value_name = "GHZ")]
    pub range: Option<f64>,

    /// Skip gnuplot script generation
    #[arg(long, global = true, env = "TPSIM_NO_PLOTS")]
    pub no_plots: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Filtered one-photon spectrum
    Spectrum,
    /// Two-colour g2(tau) (optionally swept over detuning)
    G2tau,
    /// Zero-delay two-photon spectrum map
    Tps,
    /// Cauchy-Schwarz ratio map
    Csmap,
    /// Dressed-state amplitudes, Mollow peaks and feature catalog
    Dressed,
    /// Cross-check the sensor method against direct integration
    Validate,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Spectrum => "spectrum",
            Command::G2tau => "g2tau",
            Command::Tps => "tps",
            Command::Csmap => "csmap",
            Command::Dressed => "dressed",
            Command::Validate => "validate",
        }
    }
}

impl Cli {
    /// Load the configuration and apply flag and environment overrides.
    pub fn resolve_config(&self) -> Result<RunConfig, CliError> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::builtin(),
        };
        if let Some(out) = &self.out {
            cfg.output.directory = out.clone();
        }
        if let Some(w) = self.workers {
            cfg.workers = w;
        }
        if let Some(irf) = self.irf {
            cfg.post.irf_fwhm_ps = Some(irf);
        }
        if let Some(d) = self.diffusion {
            cfg.post.diffusion_width_ghz = Some(d);
        }
        if let Some(n) = self.grid {
            cfg.grid.n_points = n;
        }
        if let Some(r) = self.range {
            cfg.grid.range_ghz = Some(r);
        }
        if self.no_plots {
            cfg.output.emit_plots = false;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}
