//! Detector timing response and spectral-diffusion averaging.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::emitter::EmitterParams;
use crate::filtered::{filtered_g2_parts, normalize_peak, spectrum_flux, FilterSpec, SensorConfig};
use crate::quantum::uniform_step;
use crate::trace::{CorrelationTrace, TraceMetadata};
use crate::units::ps_to_ns;
use crate::{Error, Result};

const FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949_3; // 2 sqrt(2 ln 2)

/// Gaussian detector-pair timing response on the delay axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IrfSpec {
    pub fwhm_ps: f64,
}

impl IrfSpec {
    pub fn new(fwhm_ps: f64) -> Result<Self> {
        let irf = IrfSpec { fwhm_ps };
        irf.validate()?;
        Ok(irf)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fwhm_ps > 0.0 && self.fwhm_ps.is_finite()) {
            return Err(Error::param("irf_fwhm_ps", format!("must be > 0, got {}", self.fwhm_ps)));
        }
        Ok(())
    }

    pub fn fwhm_ns(&self) -> f64 {
        ps_to_ns(self.fwhm_ps)
    }

    pub fn sigma_ns(&self) -> f64 {
        self.fwhm_ns() / FWHM_PER_SIGMA
    }
}

/// Gaussian distribution of emitter-frequency offsets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiffusionSpec {
    /// Full width at half maximum in GHz.
    pub width_ghz: f64,
    #[serde(default = "DiffusionSpec::default_samples")]
    pub n_samples: usize,
}

impl DiffusionSpec {
    pub const DEFAULT_SAMPLES: usize = 21;

    fn default_samples() -> usize {
        Self::DEFAULT_SAMPLES
    }

    pub fn new(width_ghz: f64, n_samples: usize) -> Result<Self> {
        let spec = DiffusionSpec { width_ghz, n_samples };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.width_ghz >= 0.0 && self.width_ghz.is_finite()) {
            return Err(Error::param("diffusion_width_ghz", "must be >= 0"));
        }
        if self.n_samples < 5 || self.n_samples.is_multiple_of(2) {
            return Err(Error::param("n_samples", format!("must be odd and >= 5, got {}", self.n_samples)));
        }
        Ok(())
    }

    /// Offsets (GHz) and normalized weights of the Gauss-Hermite rule.
    pub fn quadrature(&self) -> Vec<(f64, f64)> {
        if self.width_ghz == 0.0 {
            return vec![(0.0, 1.0)];
        }
        let sigma = self.width_ghz / FWHM_PER_SIGMA;
        gauss_hermite(self.n_samples)
            .into_iter()
            .map(|(x, w)| (std::f64::consts::SQRT_2 * sigma * x, w / std::f64::consts::PI.sqrt()))
            .collect()
    }
}

/// Gauss-Hermite nodes and weights (weight function exp(-x^2)) by the
/// Golub-Welsch eigenvalue method.
pub fn gauss_hermite(n: usize) -> Vec<(f64, f64)> {
    let mut jacobi = nalgebra::DMatrix::<f64>::zeros(n, n);
    for k in 1..n {
        let b = (k as f64 / 2.0).sqrt();
        jacobi[(k - 1, k)] = b;
        jacobi[(k, k - 1)] = b;
    }
    let eig = nalgebra::SymmetricEigen::new(jacobi);
    let mut nodes: Vec<(f64, f64)> = (0..n)
        .map(|k| {
            let v0 = eig.eigenvectors[(0, k)];
            (eig.eigenvalues[k], std::f64::consts::PI.sqrt() * v0 * v0)
        })
        .collect();
    nodes.sort_by(|a, b| a.0.total_cmp(&b.0));
    // exact symmetry of the rule
    for k in 0..n / 2 {
        let (x, w) = (0.5 * (nodes[n - 1 - k].0 - nodes[k].0), 0.5 * (nodes[k].1 + nodes[n - 1 - k].1));
        nodes[k] = (-x, w);
        nodes[n - 1 - k] = (x, w);
    }
    if n % 2 == 1 {
        nodes[n / 2].0 = 0.0;
    }
    nodes
}

/// Convolve a uniformly sampled trace with a unit-area Gaussian along tau.
/// Samples beyond the grid are taken equal to the nearest edge value.
pub fn convolve_irf(trace: &CorrelationTrace, irf: &IrfSpec) -> Result<CorrelationTrace> {
    irf.validate()?;
    let values = convolve_values(&trace.tau_ns, &trace.values, irf)?;
    let mut meta = trace.meta.clone();
    meta.irf_fwhm_ps = Some(irf.fwhm_ps);
    CorrelationTrace::new(trace.tau_ns.clone(), values, meta)
}

pub(crate) fn convolve_values(tau: &[f64], values: &[f64], irf: &IrfSpec) -> Result<Vec<f64>> {
    let dt = uniform_step(tau).ok_or_else(|| Error::InvalidGrid("IRF convolution needs a uniform grid of >= 3 delays".into()))?;
    let span = tau[tau.len() - 1] - tau[0];
    if span < 5.0 * irf.fwhm_ns() {
        return Err(Error::InvalidGrid(format!(
            "delay span {span:.4} ns narrower than 5 x IRF FWHM ({:.4} ns)",
            5.0 * irf.fwhm_ns()
        )));
    }
    let sigma = irf.sigma_ns();
    let reach = ((6.0 * sigma / dt).ceil() as usize).min(tau.len());
    let mut kernel: Vec<f64> = (0..=reach)
        .map(|k| {
            let x = k as f64 * dt / sigma;
            (-0.5 * x * x).exp()
        })
        .collect();
    let total = kernel[0] + 2.0 * kernel[1..].iter().sum::<f64>();
    kernel.iter_mut().for_each(|w| *w /= total);

    let n = values.len() as isize;
    let at = |i: isize| values[i.clamp(0, n - 1) as usize];
    Ok((0..n)
        .map(|i| {
            let mut acc = kernel[0] * at(i);
            for (k, w) in kernel.iter().enumerate().skip(1) {
                let k = k as isize;
                acc += w * (at(i - k) + at(i + k));
            }
            acc
        })
        .collect())
}

/// A computation that depends on the emitter detuning and whose output is
/// a ratio of count rates. `evaluate` returns the rates as a flat vector;
/// `finish` forms the output from ensemble-averaged rates.
pub trait DetuningJob: Sync {
    type Output;

    fn nominal(&self) -> EmitterParams;

    /// Narrowest spectral feature (GHz) the average must resolve.
    fn finest_feature_ghz(&self) -> f64;

    fn evaluate(&self, params: &EmitterParams) -> Result<Vec<f64>>;

    fn finish(&self, rates: Vec<f64>, diffusion: Option<&DiffusionSpec>) -> Result<Self::Output>;
}

/// Per-offset rate vectors and their weighted mean.
#[derive(Debug, Clone)]
pub struct Ensemble {
    pub offsets_ghz: Vec<f64>,
    pub weights: Vec<f64>,
    pub members: Vec<Vec<f64>>,
    pub mean: Vec<f64>,
}

/// Evaluate the job at every quadrature offset (in parallel) and average
/// the rate vectors in a fixed order.
pub fn diffusion_ensemble<J: DetuningJob>(job: &J, spec: &DiffusionSpec) -> Result<Ensemble> {
    spec.validate()?;
    if spec.width_ghz > 0.0 && spec.width_ghz / spec.n_samples as f64 >= job.finest_feature_ghz() {
        return Err(Error::param(
            "n_samples",
            format!(
                "{} samples cannot resolve a {} GHz distribution against {} GHz features",
                spec.n_samples,
                spec.width_ghz,
                job.finest_feature_ghz()
            ),
        ));
    }
    let nominal = job.nominal();
    let rule = spec.quadrature();
    // the emitter moves by +x: delta = w_L - (w_0 + x)
    let members: Vec<Vec<f64>> = rule
        .par_iter()
        .map(|(x, _)| job.evaluate(&nominal.with_detuning(nominal.detuning_ghz - x)))
        .collect::<Result<_>>()?;
    let len = members[0].len();
    let mut mean = vec![0.0; len];
    for ((_, w), m) in rule.iter().zip(&members) {
        for (acc, v) in mean.iter_mut().zip(m) {
            *acc += w * v;
        }
    }
    Ok(Ensemble {
        offsets_ghz: rule.iter().map(|(x, _)| *x).collect(),
        weights: rule.iter().map(|(_, w)| *w).collect(),
        members,
        mean,
    })
}

/// Diffusion-averaged output: rates are averaged first, ratios formed last.
pub fn diffusion_average<J: DetuningJob>(job: &J, spec: &DiffusionSpec) -> Result<J::Output> {
    let ensemble = diffusion_ensemble(job, spec)?;
    job.finish(ensemble.mean, Some(spec))
}

/// Peak-normalized filtered spectrum as a detuning job.
#[derive(Debug, Clone)]
pub struct SpectrumJob {
    pub params: EmitterParams,
    pub bandwidth_ghz: f64,
    pub nu_grid: Vec<f64>,
    pub sensor: SensorConfig,
}

impl DetuningJob for SpectrumJob {
    type Output = Vec<(f64, f64)>;

    fn nominal(&self) -> EmitterParams {
        self.params
    }

    fn finest_feature_ghz(&self) -> f64 {
        self.bandwidth_ghz.min(self.params.kappa_ghz)
    }

    fn evaluate(&self, params: &EmitterParams) -> Result<Vec<f64>> {
        spectrum_flux(params, self.bandwidth_ghz, &self.nu_grid, &self.sensor)
    }

    fn finish(&self, rates: Vec<f64>, _: Option<&DiffusionSpec>) -> Result<Self::Output> {
        Ok(normalize_peak(&self.nu_grid, &rates))
    }
}

/// Two-colour g2(tau) as a detuning job; rates are the coincidence
/// numerator per delay followed by the two filter fluxes.
#[derive(Debug, Clone)]
pub struct G2Job {
    pub params: EmitterParams,
    pub f1: FilterSpec,
    pub f2: FilterSpec,
    pub tau_grid: Vec<f64>,
    pub sensor: SensorConfig,
}

impl DetuningJob for G2Job {
    type Output = CorrelationTrace;

    fn nominal(&self) -> EmitterParams {
        self.params
    }

    fn finest_feature_ghz(&self) -> f64 {
        self.f1.bandwidth_ghz.min(self.f2.bandwidth_ghz)
    }

    fn evaluate(&self, params: &EmitterParams) -> Result<Vec<f64>> {
        let (parts, _) = filtered_g2_parts(params, &self.f1, &self.f2, &self.tau_grid, &self.sensor)?;
        let mut rates = parts.numerator;
        rates.push(parts.flux1);
        rates.push(parts.flux2);
        Ok(rates)
    }

    fn finish(&self, rates: Vec<f64>, diffusion: Option<&DiffusionSpec>) -> Result<Self::Output> {
        let n = self.tau_grid.len();
        let norm = rates[n] * rates[n + 1];
        let values = rates[..n].iter().map(|v| (v / norm).max(0.0)).collect();
        let meta = TraceMetadata {
            params: Some(self.params),
            filters: vec![self.f1, self.f2],
            method: "sensor".into(),
            diffusion_width_ghz: diffusion.map(|d| d.width_ghz),
            ..Default::default()
        };
        CorrelationTrace::new(self.tau_grid.clone(), values, meta)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat_trace(n: usize, dt: f64, f: impl Fn(f64) -> f64) -> CorrelationTrace {
        let tau: Vec<f64> = (0..n).map(|i| (i as f64 - (n / 2) as f64) * dt).collect();
        let values = tau.iter().map(|t| f(*t)).collect();
        CorrelationTrace::new(tau, values, TraceMetadata::default()).unwrap()
    }

    #[test]
    fn hermite_rule_integrates_moments() {
        let rule = gauss_hermite(21);
        let sum: f64 = rule.iter().map(|(_, w)| w).sum();
        assert!((sum - std::f64::consts::PI.sqrt()).abs() < 1e-12);
        let second: f64 = rule.iter().map(|(x, w)| w * x * x).sum();
        assert!((second - std::f64::consts::PI.sqrt() / 2.0).abs() < 1e-12);
        let odd: f64 = rule.iter().map(|(x, w)| w * x.powi(3)).sum();
        assert!(odd.abs() < 1e-12);
    }

    #[test]
    fn diffusion_rule_has_requested_width() {
        let spec = DiffusionSpec::new(1.0, 21).unwrap();
        let rule = spec.quadrature();
        let var: f64 = rule.iter().map(|(x, w)| w * x * x).sum();
        let sigma = 1.0 / FWHM_PER_SIGMA;
        assert!((var - sigma * sigma).abs() < 1e-12);
        assert_eq!(DiffusionSpec::new(0.0, 21).unwrap().quadrature(), vec![(0.0, 1.0)]);
    }

    #[test]
    fn diffusion_spec_validation() {
        assert!(DiffusionSpec::new(1.0, 4).is_err());
        assert!(DiffusionSpec::new(1.0, 6).is_err());
        assert!(DiffusionSpec::new(-1.0, 21).is_err());
    }

    #[test]
    fn narrow_kernel_is_identity() {
        let dt = 0.01;
        let trace = flat_trace(201, dt, |t| 1.0 + (7.0 * t).sin());
        // 0.1 dt in ps
        let out = convolve_irf(&trace, &IrfSpec::new(0.1 * dt * 1e3).unwrap()).unwrap();
        for (a, b) in trace.values.iter().zip(&out.values) {
            assert!((a - b).abs() < 1e-6);
        }
        assert_eq!(out.meta.irf_fwhm_ps, Some(0.1 * dt * 1e3));
    }

    #[test]
    fn constant_trace_unchanged() {
        let trace = flat_trace(301, 0.005, |_| 1.0);
        let out = convolve_irf(&trace, &IrfSpec::new(80.0).unwrap()).unwrap();
        assert!(out.values.iter().all(|v| (v - 1.0).abs() < 1e-14));
    }

    #[test]
    fn grid_requirements() {
        let trace = flat_trace(21, 0.01, |_| 1.0);
        assert!(matches!(convolve_irf(&trace, &IrfSpec::new(350.0).unwrap()), Err(Error::InvalidGrid(_))));
        let mut uneven = flat_trace(301, 0.01, |_| 1.0);
        uneven.tau_ns[10] += 0.003;
        assert!(convolve_irf(&uneven, &IrfSpec::new(80.0).unwrap()).is_err());
        assert!(IrfSpec::new(0.0).is_err());
    }
}
