use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;

pub(crate) const C0: Complex64 = Complex64::new(0.0, 0.0);
pub(crate) const C1: Complex64 = Complex64::new(1.0, 0.0);

/// Dense complex operator on a `dim`-dimensional Hilbert space.
#[derive(Debug, Clone, PartialEq)]
pub struct Operator(CMatrix);

impl Operator {
    pub fn from_matrix(m: CMatrix) -> Result<Self> {
        if m.nrows() != m.ncols() || m.nrows() == 0 {
            return Err(Error::DimensionMismatch {
                expected: m.nrows(),
                found: m.ncols(),
                context: "operator must be square and nonempty",
            });
        }
        Ok(Operator(m))
    }

    /// Row-major entries, `dim * dim` of them.
    pub fn from_row_major(dim: usize, entries: &[Complex64]) -> Result<Self> {
        if entries.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                found: entries.len(),
                context: "row-major operator entries",
            });
        }
        Self::from_matrix(DMatrix::from_row_slice(dim, dim, entries))
    }

    pub fn identity(dim: usize) -> Self {
        Operator(CMatrix::identity(dim, dim))
    }

    pub fn zeros(dim: usize) -> Self {
        Operator(CMatrix::zeros(dim, dim))
    }

    /// Two-level lowering operator |g><e| with basis order (g, e).
    pub fn lowering() -> Self {
        let mut m = CMatrix::zeros(2, 2);
        m[(0, 1)] = C1;
        Operator(m)
    }

    /// Truncated bosonic annihilation operator on levels 0..levels.
    pub fn annihilation(levels: usize) -> Self {
        let mut m = CMatrix::zeros(levels, levels);
        for n in 1..levels {
            m[(n - 1, n)] = Complex64::new((n as f64).sqrt(), 0.0);
        }
        Operator(m)
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    pub fn dag(&self) -> Self {
        Operator(self.0.adjoint())
    }

    pub fn kron(&self, other: &Operator) -> Self {
        Operator(self.0.kronecker(&other.0))
    }

    pub fn scale(&self, factor: f64) -> Self {
        Operator(self.0.map(|z| z * factor))
    }

    /// max |M - M^dag| over all entries.
    pub fn hermiticity_defect(&self) -> f64 {
        hermiticity_defect(&self.0)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_defect() <= tol
    }

    pub fn trace(&self) -> Complex64 {
        self.0.trace()
    }
}

impl std::ops::Add for &Operator {
    type Output = Operator;
    fn add(self, rhs: &Operator) -> Operator {
        Operator(&self.0 + &rhs.0)
    }
}

impl std::ops::Mul for &Operator {
    type Output = Operator;
    fn mul(self, rhs: &Operator) -> Operator {
        Operator(&self.0 * &rhs.0)
    }
}

pub(crate) fn hermiticity_defect(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// A validated density operator: unit trace, hermitian, positive up to
/// numerical tolerance.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityOperator(CMatrix);

impl DensityOperator {
    pub const TRACE_TOL: f64 = 1e-10;
    pub const HERMITIAN_TOL: f64 = 1e-10;
    pub const POSITIVITY_TOL: f64 = 1e-9;

    pub fn new(m: CMatrix) -> Result<Self> {
        let rho = DensityOperator::new_unchecked(m);
        rho.validate()?;
        Ok(rho)
    }

    /// Pure state |k><k|.
    pub fn basis_state(dim: usize, k: usize) -> Self {
        let mut m = CMatrix::zeros(dim, dim);
        m[(k, k)] = C1;
        DensityOperator(m)
    }

    pub(crate) fn new_unchecked(m: CMatrix) -> Self {
        DensityOperator(m)
    }

    pub fn validate(&self) -> Result<()> {
        let tr = self.0.trace();
        if (tr - C1).norm() > Self::TRACE_TOL {
            return Err(Error::param("density operator", format!("trace {tr} != 1")));
        }
        let herm = hermiticity_defect(&self.0);
        if herm > Self::HERMITIAN_TOL {
            return Err(Error::param(
                "density operator",
                format!("not hermitian (defect {herm:.3e})"),
            ));
        }
        let min_eig = self.min_eigenvalue();
        if min_eig < -Self::POSITIVITY_TOL {
            return Err(Error::param(
                "density operator",
                format!("negative eigenvalue {min_eig:.3e}"),
            ));
        }
        Ok(())
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let herm = (&self.0 + self.0.adjoint()).map(|z| z * 0.5);
        SymmetricEigen::new(herm)
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn expectation(&self, op: &Operator) -> Complex64 {
        (op.matrix() * &self.0).trace()
    }

    pub fn population(&self, k: usize) -> f64 {
        self.0[(k, k)].re
    }
}

/// Column-stacking vectorization: `vec(rho)[i + j*dim] = rho[i, j]`.
pub fn vectorize(m: &CMatrix) -> nalgebra::DVector<Complex64> {
    nalgebra::DVector::from_column_slice(m.as_slice())
}

/// Inverse of [`vectorize`].
pub fn unvectorize(v: &nalgebra::DVector<Complex64>, dim: usize) -> CMatrix {
    CMatrix::from_column_slice(dim, dim, v.as_slice())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lowering_squares_to_zero() {
        let s = Operator::lowering();
        let s2 = &s * &s;
        assert!(s2.matrix().iter().all(|z| *z == C0));
        let n = &s.dag() * &s;
        assert_eq!(n.matrix()[(1, 1)], C1);
    }

    #[test]
    fn vectorization_is_column_stacking() {
        let m = CMatrix::from_fn(3, 3, |i, j| Complex64::new(i as f64, j as f64));
        let v = vectorize(&m);
        assert_eq!(v[1 + 2 * 3], m[(1, 2)]);
        assert_eq!(unvectorize(&v, 3), m);
    }

    #[test]
    fn row_major_length_checked() {
        assert!(Operator::from_row_major(2, &[C1; 3]).is_err());
        let op = Operator::from_row_major(2, &[C0, C1, C0, C0]).unwrap();
        assert_eq!(op, Operator::lowering());
    }

    #[test]
    fn density_validation_rejects_bad_states() {
        let mut m = CMatrix::zeros(2, 2);
        m[(0, 0)] = Complex64::new(1.2, 0.0);
        m[(1, 1)] = Complex64::new(-0.2, 0.0);
        assert!(DensityOperator::new(m).is_err());
        let mut m = CMatrix::zeros(2, 2);
        m[(0, 0)] = Complex64::new(0.5, 0.0);
        m[(1, 1)] = Complex64::new(0.5, 0.0);
        m[(0, 1)] = Complex64::new(0.1, 0.0);
        assert!(DensityOperator::new(m).is_err());
    }

    #[test]
    fn annihilation_matches_two_level_lowering() {
        assert_eq!(Operator::annihilation(2), Operator::lowering());
        let a = Operator::annihilation(3);
        assert!((a.matrix()[(1, 2)].re - 2f64.sqrt()).abs() < 1e-15);
    }
}
