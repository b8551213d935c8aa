use nalgebra::DVector;
use num_complex::Complex64;

use super::operator::{unvectorize, vectorize, CMatrix, DensityOperator, Operator, C0, C1};
use crate::{Error, Result};

const HERMITIAN_TOL: f64 = 1e-12;
const STEADY_RESIDUAL_TOL: f64 = 1e-10;
const PIVOT_RATIO_TOL: f64 = 1e-14;

/// Liouvillian generator acting on column-stacked density operators.
///
/// The generator may be stored in a rescaled frame: with a positive
/// diagonal `D = diag(d)` on the Hilbert space, the stored matrix acts on
/// `x = vec(D^-1 rho D^-1)`. This is an exact similarity transform (the
/// spectrum is unchanged); it keeps hierarchies of very small coherences,
/// such as weakly coupled sensor modes, at unit scale in every solve.
#[derive(Debug, Clone)]
pub struct Superoperator {
    dim: usize,
    scale: Vec<f64>,
    matrix: CMatrix,
}

impl Superoperator {
    /// Wrap a physical (unscaled) generator matrix of size dim^2 x dim^2.
    pub fn from_matrix(dim: usize, matrix: CMatrix) -> Result<Self> {
        if matrix.nrows() != dim * dim || matrix.ncols() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                found: matrix.nrows(),
                context: "superoperator matrix",
            });
        }
        Ok(Superoperator {
            dim,
            scale: vec![1.0; dim],
            matrix,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Generator in the (possibly rescaled) working frame.
    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn scaling(&self) -> &[f64] {
        &self.scale
    }

    /// Re-express the generator in the frame `diag(scale)`.
    pub fn with_scaling(mut self, scale: Vec<f64>) -> Result<Self> {
        if scale.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: scale.len(),
                context: "scaling vector",
            });
        }
        if scale.iter().any(|&d| !(d > 0.0 && d.is_finite())) {
            return Err(Error::param("scaling", "entries must be positive and finite"));
        }
        // ratio of new to old pair scale, per vec index
        let ratio: Vec<f64> = (0..self.dim * self.dim)
            .map(|k| {
                let (i, j) = (k % self.dim, k / self.dim);
                (scale[i] * scale[j]) / (self.scale[i] * self.scale[j])
            })
            .collect();
        let n = self.dim * self.dim;
        for b in 0..n {
            for a in 0..n {
                let z = self.matrix[(a, b)];
                if z != C0 {
                    self.matrix[(a, b)] = z * (ratio[b] / ratio[a]);
                }
            }
        }
        self.scale = scale;
        Ok(self)
    }

    #[inline]
    pub(crate) fn pair_scale(&self, k: usize) -> f64 {
        self.scale[k % self.dim] * self.scale[k / self.dim]
    }

    /// Physical operator to working-frame vector.
    pub fn to_frame(&self, rho: &CMatrix) -> DVector<Complex64> {
        let mut v = vectorize(rho);
        for (k, z) in v.iter_mut().enumerate() {
            *z /= self.pair_scale(k);
        }
        v
    }

    /// Working-frame vector to physical operator.
    pub fn from_frame(&self, x: &DVector<Complex64>) -> CMatrix {
        let mut v = x.clone();
        for (k, z) in v.iter_mut().enumerate() {
            *z *= self.pair_scale(k);
        }
        unvectorize(&v, self.dim)
    }

    /// Operator `A` expressed for left multiplication in the working frame
    /// (`D^-1 A D`).
    pub(crate) fn left_in_frame(&self, op: &Operator) -> CMatrix {
        let m = op.matrix();
        CMatrix::from_fn(self.dim, self.dim, |i, k| m[(i, k)] * (self.scale[k] / self.scale[i]))
    }

    /// Operator `B` expressed for right multiplication in the working frame
    /// (`D B D^-1`).
    pub(crate) fn right_in_frame(&self, op: &Operator) -> CMatrix {
        let m = op.matrix();
        CMatrix::from_fn(self.dim, self.dim, |l, j| m[(l, j)] * (self.scale[l] / self.scale[j]))
    }

    /// Trace functional `x -> Tr[O rho]` in the working frame, returned as
    /// the weight matrix `W` with `Tr[O rho] = sum_ij W_ij x_ij`.
    pub(crate) fn observable_in_frame(&self, op: &Operator) -> CMatrix {
        let m = op.matrix();
        CMatrix::from_fn(self.dim, self.dim, |i, j| m[(j, i)] * (self.scale[i] * self.scale[j]))
    }

    /// Apply the physical generator: returns L(rho).
    pub fn apply(&self, rho: &CMatrix) -> CMatrix {
        let x = self.to_frame(rho);
        self.from_frame(&(&self.matrix * x))
    }

    /// Eigenvalues of the generator (frame independent).
    pub fn eigenvalues(&self) -> Vec<Complex64> {
        let schur = nalgebra::linalg::Schur::new(self.matrix.clone());
        let (_, t) = schur.unpack();
        (0..t.nrows()).map(|i| t[(i, i)]).collect()
    }
}

/// Build the Lindblad generator
/// `L(rho) = -i[H, rho] + sum_k r_k (J_k rho J_k^dag - {J_k^dag J_k, rho}/2)`.
///
/// `H` and rates are angular frequencies (rad/ns).
pub fn build_lindblad(hamiltonian: &Operator, jumps: &[(Operator, f64)]) -> Result<Superoperator> {
    let dim = hamiltonian.dim();
    let herm = hamiltonian.hermiticity_defect();
    if herm > HERMITIAN_TOL {
        return Err(Error::NonHermitian(herm));
    }
    let id = CMatrix::identity(dim, dim);
    let h = hamiltonian.matrix();
    let minus_i = Complex64::new(0.0, -1.0);
    // column stacking: vec(A rho B) = (B^T kron A) vec(rho)
    let mut l = (id.kronecker(h) - h.transpose().kronecker(&id)) * minus_i;
    for (jump, rate) in jumps {
        if jump.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: jump.dim(),
                context: "jump operator",
            });
        }
        if !(*rate > 0.0 && rate.is_finite()) {
            return Err(Error::param("rate", format!("jump rate must be positive, got {rate}")));
        }
        let j = jump.matrix();
        let jdj = j.adjoint() * j;
        let term = j.conjugate().kronecker(j)
            - id.kronecker(&jdj).map(|z| z * 0.5)
            - jdj.transpose().kronecker(&id).map(|z| z * 0.5);
        l += term.map(|z| z * *rate);
    }
    Superoperator::from_matrix(dim, l)
}

/// Working-frame steady state together with its physical density operator.
#[derive(Debug, Clone)]
pub struct SteadyState {
    pub rho: DensityOperator,
    /// Same state in the generator's working frame.
    pub frame: DVector<Complex64>,
    pub residual: f64,
}

/// Unique steady state of `L`, returned as a density operator.
pub fn steady_state(l: &Superoperator) -> Result<DensityOperator> {
    Ok(steady_state_full(l)?.rho)
}

/// Solves `L x = 0` with one equation replaced by the trace condition.
pub fn steady_state_full(l: &Superoperator) -> Result<SteadyState> {
    let dim = l.dim();
    let n = dim * dim;
    let mut a = l.matrix().clone();
    // replace the equation of the best-scaled population by Tr rho = 1
    let anchor = (0..dim)
        .max_by(|&i, &j| l.scale[i].total_cmp(&l.scale[j]).then(j.cmp(&i)))
        .unwrap_or(0);
    let row = anchor + anchor * dim;
    for c in 0..n {
        a[(row, c)] = C0;
    }
    for i in 0..dim {
        a[(row, i + i * dim)] = Complex64::new(l.scale[i] * l.scale[i], 0.0);
    }
    let mut b = DVector::from_element(n, C0);
    b[row] = C1;

    let lu = a.lu();
    let u = lu.u();
    let (mut umin, mut umax) = (f64::INFINITY, 0.0f64);
    for i in 0..n {
        let p = u[(i, i)].norm();
        umin = umin.min(p);
        umax = umax.max(p);
    }
    if umax == 0.0 || umin / umax < PIVOT_RATIO_TOL {
        return Err(Error::NoUniqueSteadyState(format!(
            "bordered generator is singular (pivot ratio {:.2e})",
            if umax == 0.0 { 0.0 } else { umin / umax }
        )));
    }
    let x = lu
        .solve(&b)
        .ok_or_else(|| Error::NoUniqueSteadyState("singular bordered generator".into()))?;

    let lx = l.matrix() * &x;
    let norm = l.matrix().iter().fold(0.0f64, |m, z| m.max(z.norm())).max(1.0);
    let residual = lx.iter().fold(0.0f64, |m, z| m.max(z.norm())) / norm;
    if residual > STEADY_RESIDUAL_TOL {
        return Err(Error::IllConditioned {
            residual,
            tolerance: STEADY_RESIDUAL_TOL,
        });
    }

    let mut rho = l.from_frame(&x);
    rho = (&rho + rho.adjoint()).map(|z| z * 0.5);
    let frame = l.to_frame(&rho);
    let rho = DensityOperator::new_unchecked(rho);
    Ok(SteadyState { rho, frame, residual })
}

pub(crate) fn check_state_dim(l: &Superoperator, rho: &DensityOperator) -> Result<()> {
    if rho.dim() != l.dim() {
        return Err(Error::DimensionMismatch {
            expected: l.dim(),
            found: rho.dim(),
            context: "density operator vs generator",
        });
    }
    Ok(())
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::operator::DensityOperator;

    fn decay(gamma: f64) -> Superoperator {
        let sm = Operator::lowering();
        build_lindblad(&Operator::zeros(2), &[(sm, gamma)]).unwrap()
    }

    #[test]
    fn frame_round_trip_and_spectrum_invariance() {
        let l = decay(1.3);
        let before = l.eigenvalues();
        let scaled = l.clone().with_scaling(vec![1.0, 1e-3]).unwrap();
        let rho = DensityOperator::basis_state(2, 1).matrix().clone();
        let back = scaled.from_frame(&scaled.to_frame(&rho));
        assert!((back - rho).camax() < 1e-15);
        let mut after = scaled.eigenvalues();
        let mut before = before;
        let key = |z: &Complex64| (z.re, z.im);
        before.sort_by(|a, b| key(a).partial_cmp(&key(b)).unwrap());
        after.sort_by(|a, b| key(a).partial_cmp(&key(b)).unwrap());
        for (a, b) in before.iter().zip(&after) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn scaling_rejects_bad_input() {
        assert!(decay(1.0).with_scaling(vec![1.0]).is_err());
        assert!(decay(1.0).with_scaling(vec![1.0, 0.0]).is_err());
    }

    #[test]
    fn pure_decay_relaxes_to_ground() {
        let rho = steady_state(&decay(0.7)).unwrap();
        assert!((rho.population(0) - 1.0).abs() < 1e-12);
    }
}
