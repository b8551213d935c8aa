use serde::{Deserialize, Serialize};

use crate::emitter::EmitterParams;
use crate::filtered::FilterSpec;
use crate::{Error, Result};

/// Post-processing and numerical provenance carried with every trace.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TraceMetadata {
    pub params: Option<EmitterParams>,
    pub filters: Vec<FilterSpec>,
    pub method: String,
    pub irf_fwhm_ps: Option<f64>,
    pub diffusion_width_ghz: Option<f64>,
    /// Sensor coupling (rad/ns) at which the vanishing-coupling limit was accepted.
    pub epsilon: Option<f64>,
    /// Relative change between the last two couplings of the sequence.
    pub extrapolation_residual: Option<f64>,
    pub warnings: Vec<String>,
}

/// g2(tau) sampled on an ascending delay grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationTrace {
    pub tau_ns: Vec<f64>,
    pub values: Vec<f64>,
    pub meta: TraceMetadata,
}

impl CorrelationTrace {
    pub fn new(tau_ns: Vec<f64>, values: Vec<f64>, meta: TraceMetadata) -> Result<Self> {
        let trace = CorrelationTrace { tau_ns, values, meta };
        trace.validate()?;
        Ok(trace)
    }

    pub fn validate(&self) -> Result<()> {
        if self.tau_ns.len() != self.values.len() {
            return Err(Error::InvalidGrid(format!(
                "{} delays but {} values",
                self.tau_ns.len(),
                self.values.len()
            )));
        }
        if self.tau_ns.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidGrid("delays must be strictly ascending".into()));
        }
        if let Some(v) = self.values.iter().find(|v| !(**v >= -1e-9)) {
            return Err(Error::param("trace", format!("negative or NaN correlation value {v}")));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Value at the delay closest to `tau`.
    pub fn at(&self, tau: f64) -> Option<f64> {
        self.tau_ns
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - tau).abs().total_cmp(&(b.1 - tau).abs()))
            .map(|(i, _)| self.values[i])
    }

    /// (delay, value) of the global maximum.
    pub fn argmax(&self) -> Option<(f64, f64)> {
        self.values
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, v)| (self.tau_ns[i], *v))
    }

    /// Mirror image tau -> -tau.
    pub fn reversed(&self) -> CorrelationTrace {
        CorrelationTrace {
            tau_ns: self.tau_ns.iter().rev().map(|t| -t).collect(),
            values: self.values.iter().rev().copied().collect(),
            meta: self.meta.clone(),
        }
    }
}
