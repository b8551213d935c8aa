use nalgebra::DVector;
use num_complex::Complex64;

use super::expm::expm;
use super::operator::{vectorize, CMatrix, DensityOperator, Operator, C0, C1};
use super::superop::{check_state_dim, Superoperator};
use crate::{Error, Result};

/// Eigenvector conditioning above which the series route is used instead.
pub const MAX_EIGEN_CONDITION: f64 = 1e8;

#[derive(Debug, Clone)]
enum Route {
    Spectral {
        vectors: CMatrix,
        inverse: CMatrix,
        eigenvalues: Vec<Complex64>,
        condition: f64,
    },
    Series,
}

/// Evaluates `exp(L t)` in the generator's working frame.
///
/// One eigendecomposition serves every delay; when the eigenvector basis
/// is too ill-conditioned (near-defective generators) each delay falls
/// back to a scaling-and-squaring Padé exponential.
#[derive(Debug, Clone)]
pub struct Propagator {
    generator: CMatrix,
    route: Route,
}

impl Propagator {
    pub fn new(l: &Superoperator) -> Self {
        let generator = l.matrix().clone();
        let route = spectral_route(&generator).unwrap_or(Route::Series);
        Propagator { generator, route }
    }

    /// Always use the Padé route.
    pub fn series(l: &Superoperator) -> Self {
        Propagator {
            generator: l.matrix().clone(),
            route: Route::Series,
        }
    }

    pub fn is_spectral(&self) -> bool {
        matches!(self.route, Route::Spectral { .. })
    }

    /// 1-norm condition number of the eigenvector basis, when used.
    pub fn condition(&self) -> Option<f64> {
        match &self.route {
            Route::Spectral { condition, .. } => Some(*condition),
            Route::Series => None,
        }
    }

    /// `exp(L t)` as a dense matrix in the working frame.
    pub fn matrix(&self, t: f64) -> CMatrix {
        match &self.route {
            Route::Spectral {
                vectors,
                inverse,
                eigenvalues,
                ..
            } => {
                let mut scaled = vectors.clone();
                for (c, lam) in eigenvalues.iter().enumerate() {
                    let f = (lam * t).exp();
                    scaled.column_mut(c).iter_mut().for_each(|z| *z *= f);
                }
                scaled * inverse
            }
            Route::Series => expm(&self.generator.map(|z| z * t)),
        }
    }

    pub fn apply(&self, t: f64, x: &DVector<Complex64>) -> DVector<Complex64> {
        match &self.route {
            Route::Spectral {
                vectors,
                inverse,
                eigenvalues,
                ..
            } => {
                let mut c = inverse * x;
                for (z, lam) in c.iter_mut().zip(eigenvalues) {
                    *z *= (lam * t).exp();
                }
                vectors * c
            }
            Route::Series => self.matrix(t) * x,
        }
    }
}

fn spectral_route(a: &CMatrix) -> Option<Route> {
    let n = a.nrows();
    let schur = nalgebra::linalg::Schur::try_new(a.clone(), 1e-15, 10_000)?;
    let (q, t) = schur.unpack();
    let tnorm = t.iter().fold(0.0f64, |m, z| m.max(z.norm())).max(f64::MIN_POSITIVE);
    let smin = f64::EPSILON * tnorm;

    // eigenvectors of the triangular factor by back substitution
    let mut y = CMatrix::zeros(n, n);
    for k in 0..n {
        let lam = t[(k, k)];
        y[(k, k)] = C1;
        for j in (0..k).rev() {
            let mut acc = C0;
            for l in (j + 1)..=k {
                acc += t[(j, l)] * y[(l, k)];
            }
            let mut denom = t[(j, j)] - lam;
            if denom.norm() < smin {
                denom = Complex64::new(smin, 0.0);
            }
            y[(j, k)] = -acc / denom;
        }
    }
    let mut vectors = q * y;
    for mut col in vectors.column_iter_mut() {
        let norm = col.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            return None;
        }
        col.iter_mut().for_each(|z| *z /= norm);
    }
    let inverse = vectors.clone().try_inverse()?;
    let one_norm = |m: &CMatrix| {
        m.column_iter()
            .map(|c| c.iter().map(|z| z.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    };
    let condition = one_norm(&vectors) * one_norm(&inverse);
    if !condition.is_finite() || condition > MAX_EIGEN_CONDITION {
        return None;
    }
    let eigenvalues = (0..n).map(|i| t[(i, i)]).collect();
    Some(Route::Spectral {
        vectors,
        inverse,
        eigenvalues,
        condition,
    })
}

/// `rho(t) = exp(L t) rho0`.
pub fn propagate(l: &Superoperator, rho0: &DensityOperator, t: f64) -> Result<DensityOperator> {
    if t < 0.0 || !t.is_finite() {
        return Err(Error::NegativeTime(t));
    }
    check_state_dim(l, rho0)?;
    if t == 0.0 {
        return Ok(rho0.clone());
    }
    let prop = Propagator::new(l);
    let x = prop.apply(t, &l.to_frame(rho0.matrix()));
    let rho = l.from_frame(&x);
    Ok(DensityOperator::new_unchecked((&rho + rho.adjoint()).map(|z| z * 0.5)))
}

/// Quantum-regression two-time average
/// `value(tau) = Tr[O exp(L tau)(A rho_ss B)]` for every delay in the grid.
pub fn regression_correlator(
    l: &Superoperator,
    rho_ss: &DensityOperator,
    pre: &Operator,
    post: &Operator,
    observable: &Operator,
    tau_grid: &[f64],
) -> Result<Vec<Complex64>> {
    let prop = Propagator::new(l);
    regression_with(&prop, l, &l.to_frame(rho_ss.matrix()), pre, post, observable, tau_grid)
}

/// [`regression_correlator`] with a prebuilt propagator and a steady state
/// already in the working frame.
pub fn regression_with(
    prop: &Propagator,
    l: &Superoperator,
    rho_frame: &DVector<Complex64>,
    pre: &Operator,
    post: &Operator,
    observable: &Operator,
    tau_grid: &[f64],
) -> Result<Vec<Complex64>> {
    let dim = l.dim();
    for (op, what) in [(pre, "pre operator"), (post, "post operator"), (observable, "observable")] {
        if op.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: op.dim(),
                context: what,
            });
        }
    }
    validate_tau_grid(tau_grid)?;
    if tau_grid.is_empty() {
        return Ok(Vec::new());
    }

    let x = super::operator::unvectorize(rho_frame, dim);
    let sandwich = l.left_in_frame(pre) * x * l.right_in_frame(post);
    let mut y = vectorize(&sandwich);
    let weights = vectorize(&l.observable_in_frame(observable));
    let read = |v: &DVector<Complex64>| weights.iter().zip(v.iter()).map(|(w, z)| w * z).sum::<Complex64>();

    let mut out = Vec::with_capacity(tau_grid.len());
    if let Some(step) = uniform_step(tau_grid) {
        let stepper = prop.matrix(step);
        if tau_grid[0] > 0.0 {
            y = prop.apply(tau_grid[0], &y);
        }
        out.push(read(&y));
        for _ in 1..tau_grid.len() {
            y = &stepper * &y;
            out.push(read(&y));
        }
    } else {
        for &tau in tau_grid {
            let v = if tau == 0.0 { y.clone() } else { prop.apply(tau, &y) };
            out.push(read(&v));
        }
    }
    Ok(out)
}

pub(crate) fn validate_tau_grid(grid: &[f64]) -> Result<()> {
    if grid.iter().any(|t| !t.is_finite() || *t < 0.0) {
        return Err(Error::InvalidGrid("delays must be finite and nonnegative".into()));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidGrid("delays must be strictly ascending".into()));
    }
    Ok(())
}

/// Common spacing of a grid, if it is uniform to 1e-9 relative.
pub(crate) fn uniform_step(grid: &[f64]) -> Option<f64> {
    if grid.len() < 3 {
        return None;
    }
    let step = (grid[grid.len() - 1] - grid[0]) / (grid.len() - 1) as f64;
    let uniform = grid
        .windows(2)
        .all(|w| ((w[1] - w[0]) - step).abs() <= 1e-9 * step.abs().max(1e-300));
    uniform.then_some(step)
}
