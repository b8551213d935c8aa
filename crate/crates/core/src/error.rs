use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found} ({context})")]
    DimensionMismatch {
        expected: usize,
        found: usize,
        context: &'static str,
    },

    #[error("hamiltonian is not hermitian (max |H - H^dag| = {0:.3e})")]
    NonHermitian(f64),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("no unique steady state: {0}")]
    NoUniqueSteadyState(String),

    #[error("steady state residual {residual:.3e} exceeds tolerance {tolerance:.1e}")]
    IllConditioned { residual: f64, tolerance: f64 },

    #[error("negative propagation time {0} ns")]
    NegativeTime(f64),

    #[error("degenerate dressed states: generalized Rabi frequency vanishes")]
    DegenerateDressing,

    #[error("sensor back-action regime: coupling {epsilon:.3e} rad/ns >= {limit:.3e} rad/ns")]
    SensorBackAction { epsilon: f64, limit: f64 },

    #[error("sensor limit did not converge (relative changes {history:?}, tolerance {tolerance:.1e})")]
    NonConvergent { history: Vec<f64>, tolerance: f64 },

    #[error("vanishing photon flux through a filter ({0})")]
    VanishingFlux(String),

    #[error("invalid delay grid: {0}")]
    InvalidGrid(String),

    #[error("oracle resolution violated: {0}")]
    OracleResolution(String),

    #[error("{masked} of {total} map points masked (limit 1%)")]
    TooManyMasked { masked: usize, total: usize },

    #[error("point ({nu1_ghz:.4}, {nu2_ghz:.4}) GHz failed: {source}")]
    Point {
        nu1_ghz: f64,
        nu2_ghz: f64,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// True for failures of the vanishing-coupling extrapolation or the
    /// linear solves underneath it.
    pub fn is_convergence(&self) -> bool {
        match self {
            Error::NonConvergent { .. }
            | Error::NoUniqueSteadyState(_)
            | Error::IllConditioned { .. }
            | Error::TooManyMasked { .. }
            | Error::VanishingFlux(_) => true,
            Error::Point { source, .. } => source.is_convergence(),
            _ => false,
        }
    }
}
