//! Cellular-automaton node dynamics and Hamiltonian-constrained learning.

mod automaton;
mod hamiltonian;

pub use automaton::{
    classify_trajectory, evolve, negative_entropy, orderliness, ring_neighborhoods, ring_units, step_discrete,
    trajectory_dump, unit_occupancy, Boundary, CcaStateField, CcaUnit, Classification, CoupledLogisticRule,
    ElementaryRule, IdentityRule, MajorityRule, Rule, RuleClass, CHAOS_CHANGE_RATE, DEFAULT_WINDOW,
};
pub use hamiltonian::{
    hamiltonian_step, harmonic_dataset, hnn_loss, hnn_loss_mlp, train_hnn, ConstantEnergy, Energy, HamiltonianMode,
    HnnSample, MlpEnergy, QuadraticEnergy,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CcaError {
    #[error("rule produced a non-finite state for unit {unit}")]
    NonFinite { unit: usize },
    #[error("unit {unit} references missing neighbor {neighbor}")]
    InvalidNeighbor { unit: usize, neighbor: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("history of {got} fields is shorter than the window {needed}")]
    HistoryTooShort { needed: usize, got: usize },
    #[error("distribution sums to {0}, not 1")]
    Unnormalized(f64),
    #[error("non-finite energy gradient")]
    NonFiniteGradient,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
