//! Parallel two-dimensional sweeps: two-photon spectra and the
//! Cauchy-Schwarz ratio.

use std::fmt;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::emitter::EmitterParams;
use crate::filtered::{filtered_g2_parts, FilterSpec, SensorConfig};
use crate::postprocess::{convolve_values, diffusion_average, DiffusionSpec, G2Job, IrfSpec};
use crate::units::ghz_to_angular;
use crate::{Error, Result};

/// Autocorrelations below this are treated as vanishing in the ratio map.
pub const CS_DENOMINATOR_FLOOR: f64 = 1e-9;
pub const DEFAULT_MAX_GRID: usize = 301;
pub const DEFAULT_MAP_POINTS: usize = 101;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MapKind {
    Tps,
    CsRatio,
}

/// Square frequency grid symmetric about the laser.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MapGrid {
    pub n_points: usize,
    pub range_ghz: f64,
}

impl MapGrid {
    pub fn new(n_points: usize, range_ghz: f64) -> Result<Self> {
        let grid = MapGrid { n_points, range_ghz };
        grid.validate()?;
        Ok(grid)
    }

    /// Default extent: 101 points over +-2 Omega.
    pub fn default_for(params: &EmitterParams) -> Self {
        MapGrid {
            n_points: DEFAULT_MAP_POINTS,
            range_ghz: 2.0 * params.rabi_ghz,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_points < 2 {
            return Err(Error::param("n_points", "map needs at least 2 points per axis"));
        }
        if !(self.range_ghz > 0.0 && self.range_ghz.is_finite()) {
            return Err(Error::param("range_ghz", "must be > 0"));
        }
        Ok(())
    }

    /// Axis values; mirror pairs are exact negatives and an odd grid
    /// contains zero exactly.
    pub fn axis(&self) -> Vec<f64> {
        let m = (self.n_points - 1) as f64;
        (0..self.n_points)
            .map(|i| self.range_ghz * (2.0 * i as f64 - m) / m)
            .collect()
    }

    pub fn step_ghz(&self) -> f64 {
        2.0 * self.range_ghz / (self.n_points - 1) as f64
    }
}

/// Called with (completed, total) after every point.
pub type ProgressHook = Arc<dyn Fn(usize, usize) + Send + Sync>;

#[derive(Clone)]
pub struct MapOptions {
    pub workers: usize,
    pub irf: Option<IrfSpec>,
    pub diffusion: Option<DiffusionSpec>,
    /// Defaults to [`SensorConfig::for_filters`].
    pub sensor: Option<SensorConfig>,
    pub max_grid: usize,
    pub progress: Option<ProgressHook>,
}

impl Default for MapOptions {
    fn default() -> Self {
        MapOptions {
            workers: 1,
            irf: None,
            diffusion: None,
            sensor: None,
            max_grid: DEFAULT_MAX_GRID,
            progress: None,
        }
    }
}

impl fmt::Debug for MapOptions {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MapOptions")
            .field("workers", &self.workers)
            .field("irf", &self.irf)
            .field("diffusion", &self.diffusion)
            .field("sensor", &self.sensor)
            .field("max_grid", &self.max_grid)
            .field("progress", &self.progress.is_some())
            .finish()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapMetadata {
    pub params: EmitterParams,
    pub bandwidth_ghz: f64,
    pub tau_handling: String,
    pub irf_fwhm_ps: Option<f64>,
    pub diffusion: Option<DiffusionSpec>,
    pub sensor: SensorConfig,
    pub masked: usize,
    pub total: usize,
    /// Distinct points evaluated (the mirrored half-plane).
    pub evaluated: usize,
    pub workers: usize,
    pub wall_time_s: f64,
    /// Sum of per-point compute times; divided by the wall time it gives the
    /// effective parallel speedup.
    pub point_time_s: f64,
    pub warnings: Vec<String>,
}

/// Row-major map with `nu1` as the row index; `None` marks a masked point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralMap2D {
    pub nu1_grid_ghz: Vec<f64>,
    pub nu2_grid_ghz: Vec<f64>,
    pub values: Vec<Option<f64>>,
    pub kind: MapKind,
    pub meta: MapMetadata,
}

impl SpectralMap2D {
    pub fn rows(&self) -> usize {
        self.nu1_grid_ghz.len()
    }

    pub fn cols(&self) -> usize {
        self.nu2_grid_ghz.len()
    }

    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        self.values[i * self.cols() + j]
    }

    /// Value at the grid point nearest to (nu1, nu2).
    pub fn nearest(&self, nu1: f64, nu2: f64) -> Option<f64> {
        self.get(nearest_index(&self.nu1_grid_ghz, nu1), nearest_index(&self.nu2_grid_ghz, nu2))
    }

    pub fn masked_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_none()).count()
    }

    /// Iterate (nu1, nu2, value) in row-major order.
    pub fn points(&self) -> impl Iterator<Item = (f64, f64, Option<f64>)> + '_ {
        let cols = self.cols();
        self.values
            .iter()
            .enumerate()
            .map(move |(k, v)| (self.nu1_grid_ghz[k / cols], self.nu2_grid_ghz[k % cols], *v))
    }

    pub fn validate(&self) -> Result<()> {
        if self.values.len() != self.rows() * self.cols() {
            return Err(Error::DimensionMismatch {
                expected: self.rows() * self.cols(),
                found: self.values.len(),
                context: "map values",
            });
        }
        for axis in [&self.nu1_grid_ghz, &self.nu2_grid_ghz] {
            if axis.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::InvalidGrid("map axes must be ascending".into()));
            }
        }
        if let Some(v) = self.values.iter().flatten().find(|v| !(**v >= 0.0)) {
            return Err(Error::param("values", format!("map entry {v} is negative")));
        }
        if self.kind == MapKind::CsRatio {
            for i in 0..self.rows().min(self.cols()) {
                if let Some(v) = self.get(i, i) {
                    if (v - 1.0).abs() > 1e-9 {
                        return Err(Error::param("values", format!("ratio diagonal entry {v} != 1")));
                    }
                }
            }
        }
        Ok(())
    }
}

pub(crate) fn nearest_index(axis: &[f64], x: f64) -> usize {
    axis.iter()
        .enumerate()
        .min_by(|a, b| (a.1 - x).abs().total_cmp(&(b.1 - x).abs()))
        .map(|(i, _)| i)
        .unwrap_or(0)
}

/// Results in input order with per-job compute times.
#[derive(Debug, Clone)]
pub struct ParallelRun<R> {
    pub results: Vec<R>,
    pub timings: Vec<Duration>,
    pub wall_time: Duration,
}

/// Run independent jobs on a dedicated pool of `workers` threads. The
/// output order (and thus every downstream reduction) does not depend on
/// the worker count.
pub fn run_parallel<J, R, F>(jobs: &[J], workers: usize, progress: Option<&ProgressHook>, f: F) -> Result<ParallelRun<R>>
where
    J: Sync,
    R: Send,
    F: Fn(&J) -> R + Sync,
{
    if workers == 0 {
        return Err(Error::param("workers", "must be >= 1"));
    }
    let start = Instant::now();
    if jobs.is_empty() {
        return Ok(ParallelRun {
            results: Vec::new(),
            timings: Vec::new(),
            wall_time: start.elapsed(),
        });
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::param("workers", e.to_string()))?;
    let done = AtomicUsize::new(0);
    let total = jobs.len();
    let timed: Vec<(R, Duration)> = pool.install(|| {
        jobs.par_iter()
            .map(|job| {
                let t0 = Instant::now();
                let r = f(job);
                let dt = t0.elapsed();
                let k = done.fetch_add(1, Ordering::Relaxed) + 1;
                if let Some(hook) = progress {
                    hook(k, total);
                }
                (r, dt)
            })
            .collect()
    });
    let (results, timings) = timed.into_iter().unzip();
    Ok(ParallelRun {
        results,
        timings,
        wall_time: start.elapsed(),
    })
}

/// Symmetric delay grid on [-3 FWHM, 3 FWHM] fine enough for the fastest
/// oscillation in the problem.
pub fn irf_tau_grid(params: &EmitterParams, bandwidth_ghz: f64, irf: &IrfSpec) -> Vec<f64> {
    let half = 3.0 * irf.fwhm_ns();
    let fastest = ghz_to_angular(params.generalized_rabi_ghz().max(bandwidth_ghz));
    let target = (irf.fwhm_ns() / 20.0).min(1.0 / (10.0 * fastest));
    let k = (half / target).ceil() as usize;
    let dt = half / k as f64;
    (0..=2 * k).map(|i| (i as f64 - k as f64) * dt).collect()
}

struct PointPlan {
    params: EmitterParams,
    bandwidth_ghz: f64,
    tau: Vec<f64>,
    irf: Option<IrfSpec>,
    diffusion: Option<DiffusionSpec>,
    sensor: SensorConfig,
}

impl PointPlan {
    fn evaluate(&self, nu1: f64, nu2: f64) -> Result<f64> {
        let f1 = FilterSpec::new(nu1, self.bandwidth_ghz)?;
        let f2 = FilterSpec::new(nu2, self.bandwidth_ghz)?;
        let g2 = match &self.diffusion {
            Some(spec) => {
                let job = G2Job {
                    params: self.params,
                    f1,
                    f2,
                    tau_grid: self.tau.clone(),
                    sensor: self.sensor.clone(),
                };
                diffusion_average(&job, spec)?.values
            }
            None => filtered_g2_parts(&self.params, &f1, &f2, &self.tau, &self.sensor)?.0.g2(),
        };
        match &self.irf {
            Some(irf) => Ok(convolve_values(&self.tau, &g2, irf)?[self.tau.len() / 2]),
            None => Ok(g2[0]),
        }
    }
}

/// Zero-delay two-photon spectrum g2(nu1, nu2, 0) with equal filter
/// bandwidths. Only nu1 <= nu2 is computed; the rest is mirrored.
pub fn tps_map(params: &EmitterParams, bandwidth_ghz: f64, grid: &MapGrid, options: &MapOptions) -> Result<SpectralMap2D> {
    params.validate()?;
    grid.validate()?;
    FilterSpec::new(0.0, bandwidth_ghz)?;
    if grid.n_points > options.max_grid {
        return Err(Error::param(
            "n_points",
            format!("{} exceeds the configured maximum {}", grid.n_points, options.max_grid),
        ));
    }
    if let Some(irf) = &options.irf {
        irf.validate()?;
    }
    if let Some(d) = &options.diffusion {
        d.validate()?;
    }
    let sensor = match &options.sensor {
        Some(s) => s.clone(),
        None => SensorConfig::for_filters(&[FilterSpec::new(0.0, bandwidth_ghz)?]),
    };
    sensor.validate()?;
    let plan = PointPlan {
        params: *params,
        bandwidth_ghz,
        tau: match &options.irf {
            Some(irf) => irf_tau_grid(params, bandwidth_ghz, irf),
            None => vec![0.0],
        },
        irf: options.irf,
        diffusion: options.diffusion,
        sensor: sensor.clone(),
    };

    let axis = grid.axis();
    let n = axis.len();
    let jobs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).collect();
    let run = run_parallel(&jobs, options.workers, options.progress.as_ref(), |&(i, j)| {
        plan.evaluate(axis[i], axis[j])
    })?;

    let mut values = vec![None; n * n];
    for (&(i, j), result) in jobs.iter().zip(run.results) {
        let v = match result {
            Ok(v) => Some(v),
            Err(e) if e.is_convergence() => None,
            Err(e) => {
                return Err(Error::Point {
                    nu1_ghz: axis[i],
                    nu2_ghz: axis[j],
                    source: Box::new(e),
                })
            }
        };
        values[i * n + j] = v;
        values[j * n + i] = v;
    }
    let masked = values.iter().filter(|v| v.is_none()).count();
    check_masked(masked, n * n)?;

    let mut warnings = Vec::new();
    if grid.step_ghz() > bandwidth_ghz {
        warnings.push(format!(
            "grid step {:.4} GHz exceeds the filter bandwidth {bandwidth_ghz} GHz",
            grid.step_ghz()
        ));
    }
    let meta = MapMetadata {
        params: *params,
        bandwidth_ghz,
        tau_handling: match &options.irf {
            Some(irf) => format!(
                "g2 on {} delays over +-{:.4} ns, convolved with the IRF, sampled at tau = 0",
                plan.tau.len(),
                3.0 * irf.fwhm_ns()
            ),
            None => "g2 at tau = 0".into(),
        },
        irf_fwhm_ps: options.irf.map(|i| i.fwhm_ps),
        diffusion: options.diffusion,
        sensor,
        masked,
        total: n * n,
        evaluated: jobs.len(),
        workers: options.workers,
        wall_time_s: run.wall_time.as_secs_f64(),
        point_time_s: run.timings.iter().map(Duration::as_secs_f64).sum(),
        warnings,
    };
    Ok(SpectralMap2D {
        nu1_grid_ghz: axis.clone(),
        nu2_grid_ghz: axis,
        values,
        kind: MapKind::Tps,
        meta,
    })
}

fn check_masked(masked: usize, total: usize) -> Result<()> {
    if masked * 100 > total {
        Err(Error::TooManyMasked { masked, total })
    } else {
        Ok(())
    }
}

/// Cauchy-Schwarz ratio R = g2(1,2)^2 / (g2(1,1) g2(2,2)).
pub fn cs_map(params: &EmitterParams, bandwidth_ghz: f64, grid: &MapGrid, options: &MapOptions) -> Result<SpectralMap2D> {
    cs_from_tps(&tps_map(params, bandwidth_ghz, grid, options)?)
}

/// Ratio map from an existing square two-photon spectrum; the
/// autocorrelations are read off its diagonal.
pub fn cs_from_tps(tps: &SpectralMap2D) -> Result<SpectralMap2D> {
    if tps.kind != MapKind::Tps || tps.nu1_grid_ghz != tps.nu2_grid_ghz {
        return Err(Error::InvalidGrid("ratio map needs a square two-photon spectrum".into()));
    }
    let n = tps.rows();
    let auto: Vec<Option<f64>> = (0..n)
        .map(|i| tps.get(i, i).filter(|v| *v >= CS_DENOMINATOR_FLOOR))
        .collect();
    let mut values = vec![None; n * n];
    for i in 0..n {
        for j in 0..n {
            values[i * n + j] = if i == j {
                auto[i].map(|_| 1.0)
            } else {
                match (tps.get(i, j), auto[i], auto[j]) {
                    (Some(g), Some(a), Some(b)) => Some(g * g / (a * b)),
                    _ => None,
                }
            };
        }
    }
    let mut meta = tps.meta.clone();
    meta.masked = values.iter().filter(|v| v.is_none()).count();
    let unresolved = auto.iter().filter(|a| a.is_none()).count() - (0..n).filter(|&i| tps.get(i, i).is_none()).count();
    if unresolved > 0 {
        meta.warnings.push(format!("{unresolved} autocorrelations vanish; rows masked"));
    }
    check_masked(meta.masked, n * n)?;
    Ok(SpectralMap2D {
        nu1_grid_ghz: tps.nu1_grid_ghz.clone(),
        nu2_grid_ghz: tps.nu2_grid_ghz.clone(),
        values,
        kind: MapKind::CsRatio,
        meta,
    })
}
