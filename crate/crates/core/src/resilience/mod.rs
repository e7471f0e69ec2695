//! Interdependent percolation, coupled network dynamics, perturbations and
//! intervention planning.

pub mod cascade;
mod dynamics;
mod giant;
mod interventions;
mod percolation;
mod perturb;
mod reduce;
mod report;

pub use dynamics::{
    integrate_dynamics, steady_state, CouplingFn, DynamicsSpec, SelfDynamics, SteadyState, SteadyStateOptions,
    Trajectory, BLOW_UP,
};
pub use giant::{er_giant, GiantComponentFn};
pub use interventions::{
    enumerate_interventions, percolate_network, predicted_delta_s, InterventionCandidate, InterventionFamily,
    NetworkPercolation,
};
pub use percolation::{
    cold_sweep, critical_point, hysteresis_sweep, linspace, solve_percolation, solve_percolation_from, sweep,
    total_giant, Hysteresis, PercolationOptions, PercolationProblem, PercolationSolution, SweepPoint,
    COLLAPSE_THRESHOLD,
};
pub use perturb::{apply_perturbation, apply_perturbation_mapped, Action, DepRef, LinkRef, NodeRef, Perturbed, Rewire};
pub use reduce::{effective_state, reduce_1d, Reduced1d};
pub use report::{
    assess, er_sweep_table, format_sweep_table, AssessConfig, ErSweep, ResilienceReport, SweepParam, SweepRow,
};

use crate::netcore::NetError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ResilienceError {
    #[error("no convergence after {iterations} iterations (last residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("no collapse transition inside [{lo}, {hi}]")]
    NoTransition { lo: f64, hi: f64 },
    #[error("invalid percolation problem: {0}")]
    InvalidProblem(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("invalid action: {0}")]
    InvalidAction(String),
    #[error("state diverged at t = {time}")]
    BlowUp { time: f64 },
    #[error("network has no edges")]
    EmptyNetwork,
    #[error(transparent)]
    Net(#[from] NetError),
}
