//! Dense open-system machinery: Lindblad generators, steady states,
//! propagation and quantum-regression correlators.
//!
//! Vectorization is column stacking throughout: `vec(rho)[i + j*dim]`.

mod expm;
mod operator;
mod propagate;
mod superop;

pub use expm::expm;
pub use operator::{unvectorize, vectorize, CMatrix, DensityOperator, Operator};
pub use propagate::{propagate, regression_correlator, regression_with, Propagator, MAX_EIGEN_CONDITION};
pub(crate) use propagate::uniform_step;
pub use superop::{build_lindblad, steady_state, steady_state_full, SteadyState, Superoperator};

