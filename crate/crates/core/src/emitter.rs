//! The coherently driven two-level emitter.
//!
//! Rotating frame at the laser frequency, basis order (g, e):
//! `H = -delta s^dag s + (Omega/2)(s + s^dag)` with `delta = w_L - w_0`, and
//! radiative decay `s` at rate kappa.

use serde::{Deserialize, Serialize};

use crate::quantum::{build_lindblad, regression_with, steady_state_full, Operator, Propagator, Superoperator};
use crate::trace::{CorrelationTrace, TraceMetadata};
use crate::units::ghz_to_angular;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmitterParams {
    /// Omega / 2pi in GHz.
    pub rabi_ghz: f64,
    /// delta / 2pi in GHz, laser minus emitter.
    #[serde(default)]
    pub detuning_ghz: f64,
    /// kappa / 2pi in GHz.
    #[serde(default = "EmitterParams::default_kappa_ghz")]
    pub kappa_ghz: f64,
}

impl EmitterParams {
    pub const DEFAULT_KAPPA_GHZ: f64 = 0.2;

    fn default_kappa_ghz() -> f64 {
        Self::DEFAULT_KAPPA_GHZ
    }

    pub fn new(rabi_ghz: f64, detuning_ghz: f64, kappa_ghz: f64) -> Result<Self> {
        let p = EmitterParams {
            rabi_ghz,
            detuning_ghz,
            kappa_ghz,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rabi_ghz >= 0.0 && self.rabi_ghz.is_finite()) {
            return Err(Error::param("rabi_ghz", format!("must be >= 0, got {}", self.rabi_ghz)));
        }
        if !self.detuning_ghz.is_finite() {
            return Err(Error::param("detuning_ghz", "must be finite"));
        }
        if !(self.kappa_ghz > 0.0 && self.kappa_ghz.is_finite()) {
            return Err(Error::param("kappa_ghz", format!("must be > 0, got {}", self.kappa_ghz)));
        }
        Ok(())
    }

    pub fn with_detuning(&self, detuning_ghz: f64) -> Self {
        EmitterParams { detuning_ghz, ..*self }
    }

    pub fn rabi(&self) -> f64 {
        ghz_to_angular(self.rabi_ghz)
    }

    pub fn detuning(&self) -> f64 {
        ghz_to_angular(self.detuning_ghz)
    }

    pub fn kappa(&self) -> f64 {
        ghz_to_angular(self.kappa_ghz)
    }

    /// Generalized Rabi frequency Omega' / 2pi in GHz.
    pub fn generalized_rabi_ghz(&self) -> f64 {
        self.rabi_ghz.hypot(self.detuning_ghz)
    }

    pub fn hamiltonian(&self) -> Operator {
        let s = Operator::lowering();
        let n = &s.dag() * &s;
        let drive = &s + &s.dag();
        &n.scale(-self.detuning()) + &drive.scale(0.5 * self.rabi())
    }

    pub fn liouvillian(&self) -> Result<Superoperator> {
        self.validate()?;
        build_lindblad(&self.hamiltonian(), &[(Operator::lowering(), self.kappa())])
    }

    /// Optical-Bloch steady-state excited population
    /// `(Omega^2/4) / (delta^2 + kappa^2/4 + Omega^2/2)`.
    pub fn excited_population(&self) -> f64 {
        let (w, d, k) = (self.rabi(), self.detuning(), self.kappa());
        (w * w / 4.0) / (d * d + k * k / 4.0 + w * w / 2.0)
    }
}

/// Dressed-state amplitudes `|1> = c|g> - s|e>`, `|2> = s|g> + c|e>`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DressedStates {
    pub c: f64,
    pub s: f64,
    pub omega_prime_ghz: f64,
}

pub fn dressed_states(params: &EmitterParams) -> Result<DressedStates> {
    params.validate()?;
    let omega_prime = params.generalized_rabi_ghz();
    if omega_prime == 0.0 {
        return Err(Error::DegenerateDressing);
    }
    let d = params.detuning_ghz;
    // clamp protects the far-detuned limit against rounding below zero
    let c2 = ((omega_prime + d) / (2.0 * omega_prime)).clamp(0.0, 1.0);
    let s2 = ((omega_prime - d) / (2.0 * omega_prime)).clamp(0.0, 1.0);
    Ok(DressedStates {
        c: c2.sqrt(),
        s: s2.sqrt(),
        omega_prime_ghz: omega_prime,
    })
}

/// Mollow triplet positions (GHz, laser relative): `[-Omega', 0, +Omega']`.
pub fn mollow_peaks(params: &EmitterParams) -> Result<[f64; 3]> {
    let w = dressed_states(params)?.omega_prime_ghz;
    Ok([-w, 0.0, w])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FeatureClass {
    /// Sideband pairs, real intermediate dressed state.
    A,
    /// Both photons from the central line.
    B,
    /// Central line with one sideband.
    C,
    /// Two-photon leapfrog decay through a virtual state.
    D,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Statistics {
    Antibunching,
    Uncorrelated,
    PartialAntibunching,
    Bunching,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TpsFeature {
    pub label: String,
    pub class: FeatureClass,
    pub nu1_ghz: f64,
    pub nu2_ghz: f64,
    pub expected: Statistics,
}

const ROMAN: [&str; 8] = ["i", "ii", "iii", "iv", "v", "vi", "vii", "viii"];

/// Nominal positions of the resonant two-photon-spectrum features.
pub fn feature_catalog(params: &EmitterParams) -> Result<Vec<TpsFeature>> {
    params.validate()?;
    if params.detuning_ghz != 0.0 {
        return Err(Error::param(
            "detuning_ghz",
            "the feature catalog is defined on resonance only",
        ));
    }
    if params.rabi_ghz == 0.0 {
        return Err(Error::DegenerateDressing);
    }
    let w = params.rabi_ghz;
    let mut out = Vec::with_capacity(17);
    let mut push = |class, idx: Option<usize>, nu1, nu2, expected| {
        let label = match idx {
            Some(i) => format!("{class:?}_{}", ROMAN[i]),
            None => format!("{class:?}"),
        };
        out.push(TpsFeature {
            label,
            class,
            nu1_ghz: nu1,
            nu2_ghz: nu2,
            expected,
        });
    };

    use FeatureClass::*;
    use Statistics::*;
    push(A, Some(0), w, w, Antibunching);
    push(A, Some(1), -w, -w, Antibunching);
    push(A, Some(2), w, -w, Bunching);
    push(A, Some(3), -w, w, Bunching);
    push(B, None, 0.0, 0.0, Uncorrelated);
    push(C, Some(0), 0.0, w, PartialAntibunching);
    push(C, Some(1), 0.0, -w, PartialAntibunching);
    push(C, Some(2), w, 0.0, PartialAntibunching);
    push(C, Some(3), -w, 0.0, PartialAntibunching);
    for (i, (a, b)) in LEAPFROG_POINTS.iter().enumerate() {
        push(D, Some(i), a * w, b * w, Bunching);
    }
    Ok(out)
}

/// Leapfrog points in units of Omega.
const LEAPFROG_POINTS: [(f64, f64); 8] = [
    (0.5, 0.5),
    (-0.5, -0.5),
    (1.5, -0.5),
    (-0.5, 1.5),
    (-1.5, 0.5),
    (0.5, -1.5),
    (1.5, -1.5),
    (-1.5, 1.5),
];

fn closed_form_applicable(params: &EmitterParams) -> bool {
    params.detuning_ghz == 0.0 && params.rabi() > params.kappa() / 4.0
}

/// Resonant closed form
/// `g2(tau) = 1 - exp(-3k|tau|/4)[cos(W tau) + 3k/(4W) sin(W|tau|)]`,
/// `W = sqrt(Omega^2 - k^2/16)`.
pub fn unfiltered_g2_closed_form(params: &EmitterParams, tau_ns: &[f64]) -> Result<Vec<f64>> {
    params.validate()?;
    if params.detuning_ghz != 0.0 {
        return Err(Error::param("detuning_ghz", "closed form requires resonant drive"));
    }
    let (w, k) = (params.rabi(), params.kappa());
    if w <= k / 4.0 {
        return Err(Error::param("rabi_ghz", "overdamped regime (Omega <= kappa/4)"));
    }
    let wr = (w * w - k * k / 16.0).sqrt();
    Ok(tau_ns
        .iter()
        .map(|t| {
            let t = t.abs();
            1.0 - (-0.75 * k * t).exp() * ((wr * t).cos() + 0.75 * k / wr * (wr * t).sin())
        })
        .collect())
}

/// Unfiltered g2 through the regression theorem, any detuning.
pub fn unfiltered_g2_numerical(params: &EmitterParams, tau_ns: &[f64]) -> Result<Vec<f64>> {
    let l = params.liouvillian()?;
    let ss = steady_state_full(&l)?;
    let pop = ss.rho.population(1);
    if pop <= 0.0 {
        return Err(Error::VanishingFlux("undriven emitter has no excited population".into()));
    }
    let s = Operator::lowering();
    let n = &s.dag() * &s;
    let prop = Propagator::new(&l);
    // the autocorrelation is even in tau
    let mut abs: Vec<f64> = tau_ns.iter().map(|t| t.abs()).collect();
    abs.sort_by(f64::total_cmp);
    abs.dedup();
    let vals = regression_with(&prop, &l, &ss.frame, &s, &s.dag(), &n, &abs)?;
    Ok(tau_ns
        .iter()
        .map(|t| {
            let k = abs.partition_point(|a| *a < t.abs());
            (vals[k].re / (pop * pop)).max(0.0)
        })
        .collect())
}

/// Unfiltered intensity autocorrelation on a (possibly signed) delay grid.
pub fn unfiltered_g2(params: &EmitterParams, tau_ns: &[f64]) -> Result<CorrelationTrace> {
    let (values, method) = if closed_form_applicable(params) {
        (unfiltered_g2_closed_form(params, tau_ns)?, "closed-form")
    } else {
        (unfiltered_g2_numerical(params, tau_ns)?, "regression")
    };
    let meta = TraceMetadata {
        params: Some(*params),
        method: format!("unfiltered/{method}"),
        ..Default::default()
    };
    CorrelationTrace::new(tau_ns.to_vec(), values, meta)
}
