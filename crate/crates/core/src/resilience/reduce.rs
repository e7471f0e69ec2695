use serde::{Deserialize, Serialize};

use super::dynamics::{steady_state_with, CouplingFn, DynamicsSpec, SelfDynamics, SteadyState, SteadyStateOptions};
use super::ResilienceError;

/// Degree-moment mean-field reduction of a network dynamics to one
/// effective state: `dx/dt = f(x) + β_eff H(x, x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Reduced1d {
    pub f: SelfDynamics,
    pub h: CouplingFn,
    pub beta_eff: f64,
}

/// `β_eff = <s_out s_in> / <s>` where `s_in` are row sums and `s_out` are
/// column sums of `A`.
pub fn reduce_1d(spec: &DynamicsSpec) -> Result<Reduced1d, ResilienceError> {
    let total: f64 = spec.adjacency.iter().map(|(_, _, w)| w).sum();
    if spec.node_count() == 0 || total <= 0.0 {
        return Err(ResilienceError::EmptyNetwork);
    }
    let s_in = spec.adjacency.row_sums();
    let s_out = spec.adjacency.col_sums();
    let cross: f64 = s_in.iter().zip(&s_out).map(|(a, b)| a * b).sum();
    Ok(Reduced1d {
        f: spec.f,
        h: spec.h,
        beta_eff: cross / total,
    })
}

/// `x_eff = 1ᵀ A x / 1ᵀ A 1`.
pub fn effective_state(spec: &DynamicsSpec, x: &[f64]) -> f64 {
    let s_out = spec.adjacency.col_sums();
    let total: f64 = s_out.iter().sum();
    s_out.iter().zip(x).map(|(s, v)| s * v).sum::<f64>() / total
}

impl Reduced1d {
    pub fn rhs(&self, x: f64) -> f64 {
        self.f.eval(x) + self.beta_eff * self.h.eval(x, x)
    }

    pub fn steady_state(&self, x0: f64, opts: SteadyStateOptions) -> Result<SteadyState, ResilienceError> {
        steady_state_with(|x| vec![self.rhs(x[0])], &[x0], opts)
    }

    /// Same reduction with `β_eff` replaced.
    pub fn with_beta(&self, beta_eff: f64) -> Self {
        Self { beta_eff, ..*self }
    }
}
