//! Brute-force evaluation of the filtered two-photon correlation at zero
//! delay, straight from its time-domain definition.
//!
//! The quadruple integral over emission times of
//! `<T-[a^dag(t1) a^dag(t2)] T+[a(t3) a(t4)]>` with exponential filter
//! kernels is discretized on a uniform grid. Summing over every index
//! quadruple is organised as a sweep in time that tracks, for each subset
//! of the four operators already inserted, the partially contracted
//! emitter operator. This is an exact re-association of the grid sum: its
//! cost is 3^4 small products per step instead of N^3.

use nalgebra::{Matrix2, Matrix4, Vector4};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::emitter::EmitterParams;
use crate::filtered::FilterSpec;
use crate::quantum::{steady_state, DensityOperator, Propagator};
use crate::{Error, Result};

type C = Complex64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleConfig {
    /// Detection time T1 = T2 (ns); the emitter starts in |g> at t = 0.
    pub t_max_ns: f64,
    pub dt_ns: f64,
    /// Start of the integration window; transients must have decayed by then.
    pub steady_start_ns: f64,
}

impl OracleConfig {
    /// Window `20/min(G1, G2, k)`, a `40/k` settling time and
    /// `dt = 1/(steps_per_period * max(W', G1, G2, k))`.
    pub fn for_point(params: &EmitterParams, f1: &FilterSpec, f2: &FilterSpec, steps_per_period: f64) -> Self {
        let (slow, fast) = rate_bounds(params, f1, f2);
        let steady_start_ns = 40.0 / params.kappa();
        OracleConfig {
            t_max_ns: steady_start_ns + 20.0 / slow,
            dt_ns: 1.0 / (steps_per_period * fast),
            steady_start_ns,
        }
    }

    pub fn validate(&self, params: &EmitterParams, f1: &FilterSpec, f2: &FilterSpec) -> Result<()> {
        let (slow, fast) = rate_bounds(params, f1, f2);
        if !(self.dt_ns > 0.0) || self.dt_ns >= 1.0 / (10.0 * fast) {
            return Err(Error::OracleResolution(format!(
                "dt {} ns must be below {:.4e} ns",
                self.dt_ns,
                1.0 / (10.0 * fast)
            )));
        }
        if !(self.steady_start_ns >= 0.0) || self.t_max_ns <= self.steady_start_ns + 10.0 / slow {
            return Err(Error::OracleResolution(format!(
                "window [{}, {}] ns shorter than 10/min rate = {:.3} ns",
                self.steady_start_ns,
                self.t_max_ns,
                10.0 / slow
            )));
        }
        Ok(())
    }

    pub fn halved(&self) -> Self {
        OracleConfig {
            dt_ns: self.dt_ns / 2.0,
            ..*self
        }
    }
}

fn rate_bounds(params: &EmitterParams, f1: &FilterSpec, f2: &FilterSpec) -> (f64, f64) {
    let rates = [
        crate::units::ghz_to_angular(params.generalized_rabi_ghz()),
        f1.bandwidth(),
        f2.bandwidth(),
        params.kappa(),
    ];
    let slow = rates[1].min(rates[2]).min(rates[3]);
    let fast = rates.iter().copied().fold(0.0, f64::max);
    (slow, fast)
}

/// Side of the density operator an emitter operator acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Side {
    /// `a(t)`, left multiplication.
    Ket,
    /// `a^dag(t)`, right multiplication.
    Bra,
}

fn sigma() -> Matrix2<C> {
    Matrix2::new(C::new(0.0, 0.0), C::new(1.0, 0.0), C::new(0.0, 0.0), C::new(0.0, 0.0))
}

fn insert(side: Side, m: &Matrix2<C>) -> Matrix2<C> {
    match side {
        Side::Ket => sigma() * m,
        Side::Bra => m * sigma().adjoint(),
    }
}

fn insert_adjoint(side: Side, m: &Matrix2<C>) -> Matrix2<C> {
    match side {
        Side::Ket => sigma().adjoint() * m,
        Side::Bra => m * sigma(),
    }
}

fn to_vec(m: &Matrix2<C>) -> Vector4<C> {
    Vector4::new(m[(0, 0)], m[(1, 0)], m[(0, 1)], m[(1, 1)])
}

fn from_vec(v: &Vector4<C>) -> Matrix2<C> {
    Matrix2::new(v[0], v[2], v[1], v[3])
}

struct EmitterDynamics {
    params: EmitterParams,
    propagator: Propagator,
}

impl EmitterDynamics {
    fn new(params: &EmitterParams) -> Result<Self> {
        let l = params.liouvillian()?;
        Ok(EmitterDynamics {
            params: *params,
            propagator: Propagator::new(&l),
        })
    }

    fn step(&self, t: f64) -> Matrix4<C> {
        let m = self.propagator.matrix(t);
        Matrix4::from_fn(|i, j| m[(i, j)])
    }
}

/// `<T-[s^dag(t1) s^dag(t2)] T+[s(t3) s(t4)]>` in the steady state.
///
/// Creation operators are ordered with later times to the right,
/// annihilation operators with later times to the left; the correlator is
/// evaluated by inserting operators in chronological order and propagating
/// between insertions.
pub fn four_time_correlator(params: &EmitterParams, times: [f64; 4]) -> Result<C> {
    let dyns = EmitterDynamics::new(params)?;
    let rho = steady_state(&params.liouvillian()?)?;
    forward_chain(&dyns, &rho, times)
}

fn chronological(times: [f64; 4]) -> Result<Vec<(f64, Side)>> {
    if times.iter().any(|t| !(*t >= 0.0 && t.is_finite())) {
        return Err(Error::param("times", "must be finite and nonnegative"));
    }
    let sides = [Side::Bra, Side::Bra, Side::Ket, Side::Ket];
    let mut events: Vec<(f64, Side)> = times.into_iter().zip(sides).collect();
    events.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(events)
}

fn forward_chain(dyns: &EmitterDynamics, rho: &DensityOperator, times: [f64; 4]) -> Result<C> {
    let events = chronological(times)?;
    let r = rho.matrix();
    let mut m = Matrix2::new(r[(0, 0)], r[(0, 1)], r[(1, 0)], r[(1, 1)]);
    let mut now = events[0].0;
    for (t, side) in events {
        if t > now {
            m = from_vec(&(dyns.step(t - now) * to_vec(&m)));
            now = t;
        }
        m = insert(side, &m);
    }
    Ok(m.trace())
}

/// Same correlator through the adjoint chain: the identity is propagated
/// backwards with the adjoint maps and paired with the steady state.
pub fn four_time_correlator_adjoint(params: &EmitterParams, times: [f64; 4]) -> Result<C> {
    let dyns = EmitterDynamics::new(params)?;
    let rho = steady_state(&params.liouvillian()?)?;
    let events = chronological(times)?;
    let mut w = Matrix2::<C>::identity();
    let mut now = events[events.len() - 1].0;
    for &(t, side) in events.iter().rev() {
        if t < now {
            w = from_vec(&(dyns.step(now - t).adjoint() * to_vec(&w)));
            now = t;
        }
        w = insert_adjoint(side, &w);
    }
    let r = rho.matrix();
    let rho2 = Matrix2::new(r[(0, 0)], r[(0, 1)], r[(1, 0)], r[(1, 1)]);
    Ok(w.adjoint().component_mul(&rho2.transpose()).sum())
}

/// One emitter operator of the filtered integral and its kernel
/// `exp(-G (T - t)/2) exp(+-i w t)`.
#[derive(Debug, Clone, Copy)]
struct KernelOp {
    side: Side,
    bandwidth: f64,
    center: f64,
}

impl KernelOp {
    fn weight(&self, t_rel: f64) -> C {
        // t_rel = t - T <= 0
        let phase = match self.side {
            Side::Ket => self.center * t_rel,
            Side::Bra => -self.center * t_rel,
        };
        C::from_polar((0.5 * self.bandwidth * t_rel).exp(), phase)
    }
}

fn kernel_pair(f: &FilterSpec) -> [KernelOp; 2] {
    [
        KernelOp {
            side: Side::Bra,
            bandwidth: f.bandwidth(),
            center: f.center(),
        },
        KernelOp {
            side: Side::Ket,
            bandwidth: f.bandwidth(),
            center: f.center(),
        },
    ]
}

/// Discretized multiple integral of the kernel-weighted, time-ordered
/// correlator over all operators in `ops`, each integrated over
/// `[steady_start, t_max]` with trapezoid weights.
fn filtered_moment(dyns: &EmitterDynamics, ops: &[KernelOp], cfg: &OracleConfig) -> Result<C> {
    let k = ops.len();
    let full = (1usize << k) - 1;
    let window = cfg.t_max_ns - cfg.steady_start_ns;
    let steps = (window / cfg.dt_ns).round() as usize;
    let dt = window / steps as f64;
    let stepper = dyns.step(dt);

    // settle from the ground state
    let mut rho0 = Matrix2::<C>::zeros();
    rho0[(0, 0)] = C::new(1.0, 0.0);
    let settled = dyns.step(cfg.steady_start_ns) * to_vec(&rho0);

    let mut acc = vec![Matrix2::<C>::zeros(); full + 1];
    acc[0] = from_vec(&settled);
    let mut weights = vec![C::new(0.0, 0.0); k];
    for n in 0..=steps {
        if n > 0 {
            for m in acc.iter_mut() {
                *m = from_vec(&(stepper * to_vec(m)));
            }
        }
        let t_rel = (n as f64 - steps as f64) * dt;
        let quad = if n == 0 || n == steps { 0.5 * dt } else { dt };
        for (w, op) in weights.iter_mut().zip(ops) {
            *w = op.weight(t_rel) * quad;
        }
        // descending subsets so sources are read before they are updated
        for set in (1..=full).rev() {
            let mut sum = Matrix2::<C>::zeros();
            // proper nonempty subsets `a` of `set` inserted at this instant
            let mut a = set;
            while a > 0 {
                let mut m = acc[set & !a];
                let mut w = C::new(1.0, 0.0);
                for (i, op) in ops.iter().enumerate() {
                    if a & (1 << i) != 0 {
                        m = insert(op.side, &m);
                        w *= weights[i];
                    }
                }
                sum += m * w;
                a = (a - 1) & set;
            }
            acc[set] += sum;
        }
    }
    Ok(acc[full].trace())
}

/// Oracle result with the raw moments it was formed from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleValue {
    pub g2: f64,
    pub two_photon: f64,
    pub one_photon: [f64; 2],
    pub steps: usize,
}

/// Filtered g2 at zero delay from the discretized time-domain integral.
///
/// The common prefactor `G1 G2 / (2 pi)^2` of the two-photon moment equals
/// the product of the one-photon prefactors and cancels in the ratio.
pub fn direct_g2_zero(params: &EmitterParams, f1: &FilterSpec, f2: &FilterSpec, cfg: &OracleConfig) -> Result<OracleValue> {
    params.validate()?;
    f1.validate()?;
    f2.validate()?;
    cfg.validate(params, f1, f2)?;
    let dyns = EmitterDynamics::new(params)?;
    let [a1dag, a1] = kernel_pair(f1);
    let [a2dag, a2] = kernel_pair(f2);
    let two = filtered_moment(&dyns, &[a1dag, a2dag, a2, a1], cfg)?;
    let one1 = filtered_moment(&dyns, &[a1dag, a1], cfg)?;
    let one2 = filtered_moment(&dyns, &[a2dag, a2], cfg)?;
    if !(one1.re > 0.0 && one2.re > 0.0) {
        return Err(Error::VanishingFlux(format!(
            "oracle one-photon moments {:.3e}, {:.3e} at {:?}",
            one1.re, one2.re, dyns.params
        )));
    }
    let window = cfg.t_max_ns - cfg.steady_start_ns;
    Ok(OracleValue {
        g2: two.re / (one1.re * one2.re),
        two_photon: two.re,
        one_photon: [one1.re, one2.re],
        steps: (window / cfg.dt_ns).round() as usize,
    })
}
