//! Run configuration: a TOML file with strict key checking.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tpsim::emitter::EmitterParams;
use tpsim::filtered::{FilterSpec, SensorConfig};
use tpsim::maps::{MapGrid, DEFAULT_MAP_POINTS, DEFAULT_MAX_GRID};
use tpsim::postprocess::{DiffusionSpec, IrfSpec};

use crate::CliError;

/// Filter bandwidth used for maps and spectra by default.
pub const DEFAULT_BANDWIDTH_GHZ: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_workers")]
    pub workers: usize,
    pub emitter: EmitterParams,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub filters: Vec<FilterSpec>,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<TauConfig>,
    #[serde(default)]
    pub post: PostConfig,
    #[serde(default)]
    pub sensor: SensorSection,
    #[serde(default)]
    pub output: OutputConfig,
}

fn default_workers() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default = "default_points")]
    pub n_points: usize,
    /// Half-width of the frequency axes; defaults to 2 Omega.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub range_ghz: Option<f64>,
    #[serde(default = "default_bandwidth")]
    pub bandwidth_ghz: f64,
    #[serde(default = "default_max_points")]
    pub max_points: usize,
}

fn default_points() -> usize {
    DEFAULT_MAP_POINTS
}

fn default_bandwidth() -> f64 {
    DEFAULT_BANDWIDTH_GHZ
}

fn default_max_points() -> usize {
    DEFAULT_MAX_GRID
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            n_points: DEFAULT_MAP_POINTS,
            range_ghz: None,
            bandwidth_ghz: DEFAULT_BANDWIDTH_GHZ,
            max_points: DEFAULT_MAX_GRID,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TauConfig {
    pub min_ns: f64,
    pub max_ns: f64,
    pub n_points: usize,
    /// Optional sweep of emitter detunings, one trace each.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detunings_ghz: Option<Vec<f64>>,
}

impl TauConfig {
    pub fn grid(&self) -> Vec<f64> {
        let m = (self.n_points - 1) as f64;
        (0..self.n_points)
            .map(|i| self.min_ns + (self.max_ns - self.min_ns) * i as f64 / m)
            .collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PostConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub irf_fwhm_ps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diffusion_width_ghz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diffusion_samples: Option<usize>,
}

impl PostConfig {
    pub fn irf(&self) -> Option<IrfSpec> {
        self.irf_fwhm_ps.map(|fwhm_ps| IrfSpec { fwhm_ps })
    }

    pub fn diffusion(&self) -> Option<DiffusionSpec> {
        self.diffusion_width_ghz.map(|width_ghz| DiffusionSpec {
            width_ghz,
            n_samples: self.diffusion_samples.unwrap_or(DiffusionSpec::DEFAULT_SAMPLES),
        })
    }
}

/// Sensor coupling sequence; the default is derived from the narrowest filter.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon_sequence: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
}

impl SensorSection {
    pub fn resolve(&self, filters: &[FilterSpec]) -> SensorConfig {
        let mut cfg = SensorConfig::for_filters(filters);
        if let Some(seq) = &self.epsilon_sequence {
            cfg.epsilon_sequence = seq.clone();
        }
        if let Some(tol) = self.tolerance {
            cfg.tolerance = tol;
        }
        cfg
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_directory")]
    pub directory: PathBuf,
    #[serde(default = "default_formats")]
    pub formats: Vec<Format>,
    #[serde(default = "default_true")]
    pub emit_plots: bool,
}

fn default_directory() -> PathBuf {
    PathBuf::from("out")
}

fn default_formats() -> Vec<Format> {
    vec![Format::Csv, Format::Json]
}

fn default_true() -> bool {
    true
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            directory: default_directory(),
            formats: default_formats(),
            emit_plots: true,
        }
    }
}

impl RunConfig {
    /// Configuration used when no file is given: resonant drive at
    /// Omega/2pi = 2.2 GHz.
    pub fn builtin() -> Self {
        RunConfig {
            workers: 1,
            emitter: EmitterParams {
                rabi_ghz: 2.2,
                detuning_ghz: 0.0,
                kappa_ghz: 0.2,
            },
            filters: Vec::new(),
            grid: GridConfig::default(),
            tau: None,
            post: PostConfig::default(),
            sensor: SensorSection::default(),
            output: OutputConfig::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration is always representable")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let field = |name: &str, e: tpsim::Error| CliError::Config(format!("{name}: {e}"));
        self.emitter.validate().map_err(|e| field("emitter", e))?;
        if self.workers == 0 {
            return Err(CliError::Config("workers: must be >= 1".into()));
        }
        if self.filters.len() > 2 {
            return Err(CliError::Config(format!("filters: at most two allowed, got {}", self.filters.len())));
        }
        for (k, f) in self.filters.iter().enumerate() {
            f.validate().map_err(|e| CliError::Config(format!("filters[{k}]: {e}")))?;
        }
        self.map_grid().validate().map_err(|e| field("grid", e))?;
        FilterSpec::new(0.0, self.grid.bandwidth_ghz).map_err(|e| field("grid.bandwidth_ghz", e))?;
        if self.grid.n_points > self.grid.max_points {
            return Err(CliError::Config(format!(
                "grid.n_points: {} exceeds grid.max_points = {}",
                self.grid.n_points, self.grid.max_points
            )));
        }
        if let Some(tau) = &self.tau {
            if tau.n_points < 2 || !(tau.max_ns > tau.min_ns) || !tau.min_ns.is_finite() || !tau.max_ns.is_finite() {
                return Err(CliError::Config("tau: needs n_points >= 2 and min_ns < max_ns".into()));
            }
            if let Some(d) = &tau.detunings_ghz {
                if d.is_empty() || d.iter().any(|x| !x.is_finite()) {
                    return Err(CliError::Config("tau.detunings_ghz: must be a nonempty list of finite values".into()));
                }
            }
        }
        if let Some(irf) = self.post.irf() {
            irf.validate().map_err(|e| field("post.irf_fwhm_ps", e))?;
        }
        if self.post.diffusion_samples.is_some() && self.post.diffusion_width_ghz.is_none() {
            return Err(CliError::Config("post.diffusion_samples: set without post.diffusion_width_ghz".into()));
        }
        if let Some(d) = self.post.diffusion() {
            d.validate().map_err(|e| field("post", e))?;
        }
        self.sensor
            .resolve(&self.all_filters())
            .validate()
            .map_err(|e| field("sensor", e))?;
        if self.output.formats.is_empty() {
            return Err(CliError::Config("output.formats: must not be empty".into()));
        }
        Ok(())
    }

    pub fn map_grid(&self) -> MapGrid {
        MapGrid {
            n_points: self.grid.n_points,
            range_ghz: self.grid.range_ghz.unwrap_or(2.0 * self.emitter.rabi_ghz),
        }
    }

    /// Configured filters, or a single map-bandwidth filter when none are set.
    pub fn all_filters(&self) -> Vec<FilterSpec> {
        if self.filters.is_empty() {
            vec![FilterSpec {
                center_ghz: 0.0,
                bandwidth_ghz: self.grid.bandwidth_ghz,
            }]
        } else {
            self.filters.clone()
        }
    }

    pub fn wants(&self, format: Format) -> bool {
        self.output.formats.contains(&format)
    }
}
