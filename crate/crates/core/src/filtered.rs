//! Frequency-filtered correlations by the sensor method.
//!
//! Each filter is a weakly coupled sensor mode at the filter center with
//! decay equal to the filter bandwidth (a Lorentzian passband). Filtered
//! one- and two-photon averages are sensor populations and coincidences in
//! the limit of vanishing coupling. Sensor excitations of order n scale as
//! eps^n, so the generator is solved in the frame `diag(eps^n)`, where
//! every unknown is of unit size.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::emitter::EmitterParams;
use crate::quantum::{build_lindblad, regression_with, steady_state_full, Operator, Propagator, SteadyState, Superoperator};
use crate::trace::{CorrelationTrace, TraceMetadata};
use crate::units::ghz_to_angular;
use crate::{Error, Result};

/// One Lorentzian filter: laser-relative center and FWHM, both nu in GHz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterSpec {
    pub center_ghz: f64,
    #[serde(default = "FilterSpec::default_bandwidth_ghz")]
    pub bandwidth_ghz: f64,
}

impl FilterSpec {
    pub const DEFAULT_BANDWIDTH_GHZ: f64 = 0.5;

    fn default_bandwidth_ghz() -> f64 {
        Self::DEFAULT_BANDWIDTH_GHZ
    }

    pub fn new(center_ghz: f64, bandwidth_ghz: f64) -> Result<Self> {
        let f = FilterSpec {
            center_ghz,
            bandwidth_ghz,
        };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.center_ghz.is_finite() {
            return Err(Error::param("center_ghz", "must be finite"));
        }
        if !(self.bandwidth_ghz > 0.0 && self.bandwidth_ghz.is_finite()) {
            return Err(Error::param(
                "bandwidth_ghz",
                format!("must be > 0, got {}", self.bandwidth_ghz),
            ));
        }
        Ok(())
    }

    pub fn center(&self) -> f64 {
        ghz_to_angular(self.center_ghz)
    }

    pub fn bandwidth(&self) -> f64 {
        ghz_to_angular(self.bandwidth_ghz)
    }
}

/// Coupling sequence for the vanishing-coupling limit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorConfig {
    /// Strictly decreasing couplings in rad/ns.
    pub epsilon_sequence: Vec<f64>,
    /// Relative change between consecutive couplings accepted as converged.
    pub tolerance: f64,
}

impl SensorConfig {
    pub const DEFAULT_TOLERANCE: f64 = 1e-3;
    pub const DEFAULT_RELATIVE_COUPLING: f64 = 1e-3;

    /// `eps = Gamma_min/1000 * {1, 1/2, 1/4}`.
    pub fn for_filters(filters: &[FilterSpec]) -> Self {
        let gmin = filters
            .iter()
            .map(FilterSpec::bandwidth)
            .fold(f64::INFINITY, f64::min);
        let e0 = gmin * Self::DEFAULT_RELATIVE_COUPLING;
        SensorConfig {
            epsilon_sequence: vec![e0, e0 / 2.0, e0 / 4.0],
            tolerance: Self::DEFAULT_TOLERANCE,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epsilon_sequence.len() < 2 {
            return Err(Error::param("epsilon_sequence", "needs at least two couplings"));
        }
        if self.epsilon_sequence.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
            return Err(Error::param("epsilon_sequence", "couplings must be positive"));
        }
        if self.epsilon_sequence.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::param("epsilon_sequence", "must be strictly decreasing"));
        }
        if !(self.tolerance > 0.0 && self.tolerance <= 0.1) {
            return Err(Error::param("tolerance", "must lie in (0, 0.1]"));
        }
        Ok(())
    }
}

/// Sensor Hilbert space truncation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SensorKind {
    /// Two-level sensors, one excitation each.
    TwoLevel,
    /// Bosonic sensors truncated at two excitations in total; needed when
    /// the same sensor mode must absorb two photons.
    Bosonic,
}

/// Emitter coupled to its sensors, with the operators needed to read it.
#[derive(Debug, Clone)]
pub struct SensorSystem {
    pub liouvillian: Superoperator,
    pub emitter_lowering: Operator,
    pub sensors: Vec<Operator>,
    pub epsilon: f64,
}

impl SensorSystem {
    pub fn number(&self, k: usize) -> Operator {
        &self.sensors[k].dag() * &self.sensors[k]
    }
}

/// Basis states `(e, n_1, .., n_k)` in lexicographic order, emitter most
/// significant. For two-level sensors this is the Kronecker order
/// emitter (x) sensor1 (x) sensor2.
fn sensor_basis(n_sensors: usize, kind: SensorKind) -> Vec<(usize, Vec<usize>)> {
    let max_each = match kind {
        SensorKind::TwoLevel => 1,
        SensorKind::Bosonic => 2,
    };
    let mut occupations: Vec<Vec<usize>> = vec![vec![]];
    for _ in 0..n_sensors {
        occupations = occupations
            .into_iter()
            .flat_map(|occ| {
                (0..=max_each).map(move |n| {
                    let mut o = occ.clone();
                    o.push(n);
                    o
                })
            })
            .collect();
    }
    if kind == SensorKind::Bosonic {
        occupations.retain(|o| o.iter().sum::<usize>() <= 2);
    }
    let mut basis = Vec::new();
    for e in 0..2 {
        for o in &occupations {
            basis.push((e, o.clone()));
        }
    }
    basis
}

pub fn build_sensor_system(
    params: &EmitterParams,
    filters: &[FilterSpec],
    epsilon: f64,
    kind: SensorKind,
) -> Result<SensorSystem> {
    params.validate()?;
    if filters.is_empty() {
        return Err(Error::param("filters", "at least one filter is required"));
    }
    for f in filters {
        f.validate()?;
    }
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(Error::param("epsilon", format!("must be >= 0, got {epsilon}")));
    }
    let gmin = filters
        .iter()
        .map(FilterSpec::bandwidth)
        .fold(f64::INFINITY, f64::min);
    if epsilon >= gmin / 10.0 {
        return Err(Error::SensorBackAction {
            epsilon,
            limit: gmin / 10.0,
        });
    }

    let basis = sensor_basis(filters.len(), kind);
    let dim = basis.len();
    let index = |e: usize, occ: &[usize]| basis.iter().position(|(be, bo)| *be == e && bo == occ);

    let mut sigma = nalgebra::DMatrix::<Complex64>::zeros(dim, dim);
    let mut sensors = vec![nalgebra::DMatrix::<Complex64>::zeros(dim, dim); filters.len()];
    for (col, (e, occ)) in basis.iter().enumerate() {
        if *e == 1 {
            if let Some(row) = index(0, occ) {
                sigma[(row, col)] = Complex64::new(1.0, 0.0);
            }
        }
        for (k, sensor) in sensors.iter_mut().enumerate() {
            if occ[k] > 0 {
                let mut lower = occ.clone();
                lower[k] -= 1;
                if let Some(row) = index(*e, &lower) {
                    sensor[(row, col)] = Complex64::new((occ[k] as f64).sqrt(), 0.0);
                }
            }
        }
    }
    let sigma = Operator::from_matrix(sigma)?;
    let sensors: Vec<Operator> = sensors.into_iter().map(Operator::from_matrix).collect::<Result<_>>()?;

    let sd = sigma.dag();
    let mut h = &(&sd * &sigma).scale(-params.detuning()) + &(&sigma + &sd).scale(0.5 * params.rabi());
    for (sensor, f) in sensors.iter().zip(filters) {
        let n = &sensor.dag() * sensor;
        let coupling = &(&sd * sensor) + &(&sensor.dag() * &sigma);
        h = &(&h + &n.scale(f.center())) + &coupling.scale(epsilon);
    }
    let mut jumps = vec![(sigma.clone(), params.kappa())];
    for (sensor, f) in sensors.iter().zip(filters) {
        jumps.push((sensor.clone(), f.bandwidth()));
    }
    let mut liouvillian = build_lindblad(&h, &jumps)?;
    if epsilon > 0.0 {
        let scale = basis
            .iter()
            .map(|(_, occ)| epsilon.powi(occ.iter().sum::<usize>() as i32))
            .collect();
        liouvillian = liouvillian.with_scaling(scale)?;
    }
    Ok(SensorSystem {
        liouvillian,
        emitter_lowering: sigma,
        sensors,
        epsilon,
    })
}

/// Emitter (x) two-level sensor 1 (x) two-level sensor 2 (dimension 8).
pub fn build_composite(params: &EmitterParams, f1: &FilterSpec, f2: &FilterSpec, epsilon: f64) -> Result<Superoperator> {
    Ok(build_sensor_system(params, &[*f1, *f2], epsilon, SensorKind::TwoLevel)?.liouvillian)
}

/// Outcome of the vanishing-coupling extrapolation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitInfo {
    pub epsilon: f64,
    pub residual: f64,
    pub history: Vec<f64>,
}

/// Evaluate along the coupling sequence until consecutive fingerprints
/// agree to the configured relative tolerance.
pub(crate) fn epsilon_limit<T>(
    cfg: &SensorConfig,
    mut eval: impl FnMut(f64) -> Result<(T, Vec<f64>)>,
) -> Result<(T, LimitInfo)> {
    cfg.validate()?;
    let mut history = Vec::new();
    let mut previous: Option<Vec<f64>> = None;
    for &eps in &cfg.epsilon_sequence {
        let (value, print) = eval(eps)?;
        if let Some(prev) = &previous {
            let change = relative_change(prev, &print);
            history.push(change);
            if change < cfg.tolerance {
                return Ok((
                    value,
                    LimitInfo {
                        epsilon: eps,
                        residual: change,
                        history,
                    },
                ));
            }
        }
        previous = Some(print);
    }
    Err(Error::NonConvergent {
        history,
        tolerance: cfg.tolerance,
    })
}

fn relative_change(a: &[f64], b: &[f64]) -> f64 {
    let floor = b.iter().fold(0.0f64, |m, v| m.max(v.abs())) * 1e-12;
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / y.abs().max(floor).max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max)
}

fn flux(ss: &SteadyState, sys: &SensorSystem, k: usize) -> f64 {
    ss.rho.expectation(&sys.number(k)).re
}

fn require_flux(value: f64, what: &str) -> Result<f64> {
    if value > 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(Error::VanishingFlux(format!("{what} = {value:e}")))
    }
}

/// Zero-delay coincidence and single-filter fluxes with the coupling
/// stripped off: `joint = <n1 n2>/eps^4`, `flux_k = <n_k>/eps^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoincidenceParts {
    pub joint: f64,
    pub flux1: f64,
    pub flux2: f64,
}

impl CoincidenceParts {
    pub fn g2(&self) -> f64 {
        self.joint / (self.flux1 * self.flux2)
    }

    fn fingerprint(&self) -> Vec<f64> {
        vec![self.joint, self.flux1, self.flux2]
    }
}

pub fn coincidence_parts_at(params: &EmitterParams, f1: &FilterSpec, f2: &FilterSpec, epsilon: f64) -> Result<CoincidenceParts> {
    let sys = build_sensor_system(params, &[*f1, *f2], epsilon, SensorKind::TwoLevel)?;
    let ss = steady_state_full(&sys.liouvillian)?;
    let n12 = &sys.number(0) * &sys.number(1);
    let e2 = epsilon * epsilon;
    let parts = CoincidenceParts {
        joint: ss.rho.expectation(&n12).re / (e2 * e2),
        flux1: require_flux(flux(&ss, &sys, 0), "<n1>")? / e2,
        flux2: require_flux(flux(&ss, &sys, 1), "<n2>")? / e2,
    };
    Ok(parts)
}

/// [`CoincidenceParts`] in the vanishing-coupling limit.
pub fn coincidence_parts(
    params: &EmitterParams,
    f1: &FilterSpec,
    f2: &FilterSpec,
    cfg: &SensorConfig,
) -> Result<(CoincidenceParts, LimitInfo)> {
    epsilon_limit(cfg, |eps| {
        let parts = coincidence_parts_at(params, f1, f2, eps)?;
        Ok((parts, parts.fingerprint()))
    })
}

/// Filtered zero-delay g2 in the vanishing-coupling limit.
pub fn filtered_g2_zero(params: &EmitterParams, f1: &FilterSpec, f2: &FilterSpec, cfg: &SensorConfig) -> Result<(f64, LimitInfo)> {
    let (parts, info) = coincidence_parts(params, f1, f2, cfg)?;
    Ok((parts.g2(), info))
}

/// Filtered photon flux `<n>/eps^2` through a single filter.
pub fn filtered_flux(params: &EmitterParams, filter: &FilterSpec, cfg: &SensorConfig) -> Result<(f64, LimitInfo)> {
    epsilon_limit(cfg, |eps| {
        let sys = build_sensor_system(params, &[*filter], eps, SensorKind::TwoLevel)?;
        let ss = steady_state_full(&sys.liouvillian)?;
        let v = flux(&ss, &sys, 0) / (eps * eps);
        Ok((v, vec![v]))
    })
}

/// Unnormalized spectrum: filtered flux at every grid frequency.
pub fn spectrum_flux(params: &EmitterParams, bandwidth_ghz: f64, nu_grid: &[f64], cfg: &SensorConfig) -> Result<Vec<f64>> {
    nu_grid
        .iter()
        .map(|&nu| Ok(filtered_flux(params, &FilterSpec::new(nu, bandwidth_ghz)?, cfg)?.0))
        .collect()
}

/// Peak-normalized filtered one-photon spectrum.
pub fn filtered_spectrum(params: &EmitterParams, bandwidth_ghz: f64, nu_grid: &[f64]) -> Result<Vec<(f64, f64)>> {
    let probe = FilterSpec::new(0.0, bandwidth_ghz)?;
    filtered_spectrum_with(params, bandwidth_ghz, nu_grid, &SensorConfig::for_filters(&[probe]))
}

pub fn filtered_spectrum_with(
    params: &EmitterParams,
    bandwidth_ghz: f64,
    nu_grid: &[f64],
    cfg: &SensorConfig,
) -> Result<Vec<(f64, f64)>> {
    if nu_grid.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidGrid("frequency grid must be finite".into()));
    }
    let raw = spectrum_flux(params, bandwidth_ghz, nu_grid, cfg)?;
    Ok(normalize_peak(nu_grid, &raw))
}

pub fn normalize_peak(nu_grid: &[f64], raw: &[f64]) -> Vec<(f64, f64)> {
    let peak = raw.iter().copied().fold(0.0f64, f64::max);
    let scale = if peak > 0.0 { 1.0 / peak } else { 0.0 };
    nu_grid.iter().zip(raw).map(|(nu, v)| (*nu, v * scale)).collect()
}

fn undersampling_warning(params: &EmitterParams, filters: &[FilterSpec], tau_grid: &[f64]) -> Option<String> {
    let fastest = filters
        .iter()
        .map(FilterSpec::bandwidth)
        .fold(ghz_to_angular(params.generalized_rabi_ghz()), f64::max);
    let limit = 1.0 / (10.0 * fastest);
    let coarsest = tau_grid.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    (coarsest > limit).then(|| {
        format!("delay grid step {coarsest:.4} ns exceeds {limit:.4} ns; oscillations are undersampled")
    })
}

fn check_signed_grid(tau_grid: &[f64]) -> Result<()> {
    if tau_grid.is_empty() {
        return Err(Error::InvalidGrid("empty delay grid".into()));
    }
    if tau_grid.iter().any(|t| !t.is_finite()) {
        return Err(Error::InvalidGrid("delays must be finite".into()));
    }
    if tau_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidGrid("delays must be strictly ascending".into()));
    }
    Ok(())
}

/// Split a signed ascending grid into ascending |tau| lists for the
/// negative and nonnegative halves.
fn split_grid(tau_grid: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let neg: Vec<f64> = tau_grid.iter().rev().filter(|t| **t < 0.0).map(|t| -t).collect();
    let pos: Vec<f64> = tau_grid.iter().copied().filter(|t| *t >= 0.0).collect();
    (neg, pos)
}

fn merge_grid(neg: Vec<f64>, pos: Vec<f64>) -> Vec<f64> {
    neg.into_iter().rev().chain(pos).collect()
}

/// Two-colour correlation before normalization: `numerator[k]` is
/// `<s1^dag(0) s2^dag(tau_k) s2(tau_k) s1(0)>/eps^4` (roles exchanged for
/// negative delays) and `flux_k = <n_k>/eps^2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct G2Parts {
    pub numerator: Vec<f64>,
    pub flux1: f64,
    pub flux2: f64,
}

impl G2Parts {
    pub fn g2(&self) -> Vec<f64> {
        let norm = self.flux1 * self.flux2;
        self.numerator.iter().map(|v| (v / norm).max(0.0)).collect()
    }

    fn fingerprint(&self) -> Vec<f64> {
        let mut v = self.numerator.clone();
        v.push(self.flux1);
        v.push(self.flux2);
        v
    }
}

/// [`G2Parts`] on a signed delay grid in the vanishing-coupling limit.
pub fn filtered_g2_parts(
    params: &EmitterParams,
    f1: &FilterSpec,
    f2: &FilterSpec,
    tau_grid: &[f64],
    cfg: &SensorConfig,
) -> Result<(G2Parts, LimitInfo)> {
    check_signed_grid(tau_grid)?;
    // g2(f1, f2, tau) = g2(f2, f1, -tau): evaluate in one canonical filter
    // order so that the identity holds bit for bit
    if (f2.center_ghz, f2.bandwidth_ghz) < (f1.center_ghz, f1.bandwidth_ghz) {
        let mirrored: Vec<f64> = tau_grid.iter().rev().map(|t| -t).collect();
        let (parts, info) = filtered_g2_parts(params, f2, f1, &mirrored, cfg)?;
        let swapped = G2Parts {
            numerator: parts.numerator.into_iter().rev().collect(),
            flux1: parts.flux2,
            flux2: parts.flux1,
        };
        return Ok((swapped, info));
    }
    let (neg, pos) = split_grid(tau_grid);
    let only_zero = tau_grid.iter().all(|t| *t == 0.0);

    epsilon_limit(cfg, |eps| {
        let sys = build_sensor_system(params, &[*f1, *f2], eps, SensorKind::TwoLevel)?;
        let l = &sys.liouvillian;
        let ss = steady_state_full(l)?;
        let e2 = eps * eps;
        let e4 = e2 * e2;
        let flux1 = require_flux(flux(&ss, &sys, 0), "<n1>")? / e2;
        let flux2 = require_flux(flux(&ss, &sys, 1), "<n2>")? / e2;
        let numerator = if only_zero {
            let n12 = &sys.number(0) * &sys.number(1);
            vec![ss.rho.expectation(&n12).re / e4]
        } else {
            let prop = Propagator::new(l);
            let (s1, s2) = (&sys.sensors[0], &sys.sensors[1]);
            let forward = regression_with(&prop, l, &ss.frame, s1, &s1.dag(), &sys.number(1), &pos)?;
            let backward = regression_with(&prop, l, &ss.frame, s2, &s2.dag(), &sys.number(0), &neg)?;
            merge_grid(
                backward.iter().map(|z| z.re / e4).collect(),
                forward.iter().map(|z| z.re / e4).collect(),
            )
        };
        let parts = G2Parts {
            numerator,
            flux1,
            flux2,
        };
        let print = parts.fingerprint();
        Ok((parts, print))
    })
}

/// Two-colour g2(tau) with `tau = T2 - T1`: the photon through `f1` is
/// detected first for positive delays.
pub fn filtered_g2(
    params: &EmitterParams,
    f1: &FilterSpec,
    f2: &FilterSpec,
    tau_grid: &[f64],
    cfg: &SensorConfig,
) -> Result<CorrelationTrace> {
    let (parts, info) = filtered_g2_parts(params, f1, f2, tau_grid, cfg)?;
    let mut meta = TraceMetadata {
        params: Some(*params),
        filters: vec![*f1, *f2],
        method: "sensor".into(),
        epsilon: Some(info.epsilon),
        extrapolation_residual: Some(info.residual),
        ..Default::default()
    };
    meta.warnings.extend(undersampling_warning(params, &[*f1, *f2], tau_grid));
    CorrelationTrace::new(tau_grid.to_vec(), parts.g2(), meta)
}

/// Autocorrelation of the two filter outputs recombined on a beam splitter,
/// `b = (s_red + e^{i phi} s_blue)/sqrt(2)`.
pub fn recombined_sideband_g2(
    params: &EmitterParams,
    f_red: &FilterSpec,
    f_blue: &FilterSpec,
    tau_grid: &[f64],
    cfg: &SensorConfig,
    phase: f64,
) -> Result<CorrelationTrace> {
    check_signed_grid(tau_grid)?;
    let mut abs: Vec<f64> = tau_grid.iter().map(|t| t.abs()).collect();
    abs.sort_by(f64::total_cmp);
    abs.dedup();

    let (values, info) = epsilon_limit(cfg, |eps| {
        let sys = build_sensor_system(params, &[*f_red, *f_blue], eps, SensorKind::Bosonic)?;
        let l = &sys.liouvillian;
        let ss = steady_state_full(l)?;
        let rot = Complex64::from_polar(1.0, phase);
        let b = Operator::from_matrix(
            (sys.sensors[0].matrix() + sys.sensors[1].matrix().map(|z| z * rot)).map(|z| z * std::f64::consts::FRAC_1_SQRT_2),
        )?;
        let nb = &b.dag() * &b;
        let flux_b = require_flux(ss.rho.expectation(&nb).re, "<b^dag b>")?;
        let prop = Propagator::new(l);
        let raw = regression_with(&prop, l, &ss.frame, &b, &b.dag(), &nb, &abs)?;
        let at_abs: Vec<f64> = raw.iter().map(|z| z.re / (flux_b * flux_b)).collect();
        // single-mode autocorrelation: even in tau by stationarity
        let values: Vec<f64> = tau_grid
            .iter()
            .map(|t| at_abs[abs.partition_point(|a| *a < t.abs())])
            .collect();
        Ok((values.clone(), values))
    })?;

    let mut meta = TraceMetadata {
        params: Some(*params),
        filters: vec![*f_red, *f_blue],
        method: format!("sensor/recombined(phase={phase})"),
        epsilon: Some(info.epsilon),
        extrapolation_residual: Some(info.residual),
        ..Default::default()
    };
    if let Ok(peaks) = crate::emitter::mollow_peaks(params) {
        let off_red = (f_red.center_ghz - peaks[0]).abs() > f_red.bandwidth_ghz;
        let off_blue = (f_blue.center_ghz - peaks[2]).abs() > f_blue.bandwidth_ghz;
        if off_red || off_blue {
            meta.warnings.push("filters are not centred on the Mollow sidebands".into());
        }
    }
    meta.warnings.extend(undersampling_warning(params, &[*f_red, *f_blue], tau_grid));
    CorrelationTrace::new(tau_grid.to_vec(), values.into_iter().map(|v| v.max(0.0)).collect(), meta)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_couplings_follow_narrowest_filter() {
        let f = [FilterSpec::new(0.0, 2.0).unwrap(), FilterSpec::new(1.0, 0.5).unwrap()];
        let cfg = SensorConfig::for_filters(&f);
        let e0 = f[1].bandwidth() * 1e-3;
        assert_eq!(cfg.epsilon_sequence, vec![e0, e0 / 2.0, e0 / 4.0]);
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn sensor_config_validation() {
        let bad = |seq: Vec<f64>, tolerance: f64| SensorConfig { epsilon_sequence: seq, tolerance }.validate().is_err();
        assert!(bad(vec![1e-3], 1e-3));
        assert!(bad(vec![1e-3, 2e-3], 1e-3));
        assert!(bad(vec![1e-3, -1e-4], 1e-3));
        assert!(bad(vec![1e-3, 1e-4], 0.5));
    }

    #[test]
    fn epsilon_limit_stops_at_first_agreement() {
        let cfg = SensorConfig { epsilon_sequence: vec![4.0, 2.0, 1.0, 0.5], tolerance: 1e-3 };
        let (value, info) = epsilon_limit(&cfg, |e| Ok((e, vec![1.0 + 1e-3 * e * e]))).unwrap();
        // changes 1.2e-2, 3.0e-3, 7.5e-4
        assert_eq!(value, 0.5);
        assert_eq!(info.history.len(), 3);
        assert!(info.residual < 1e-3);
    }

    #[test]
    fn normalize_peak_handles_zero_spectrum() {
        assert_eq!(normalize_peak(&[0.0, 1.0], &[2.0, 4.0]), vec![(0.0, 0.5), (1.0, 1.0)]);
        assert_eq!(normalize_peak(&[0.0], &[0.0]), vec![(0.0, 0.0)]);
    }
}
