//! Minimal differentiable blocks shared by the observe, orient and decide
//! stages. All arithmetic is `f64`; gradients come from [`autodiff`].

pub mod autodiff;
pub mod checkpoint;
mod dense;
mod gat;
mod gating;
pub mod gradcheck;
mod gru;
mod ode;
mod params;

pub use autodiff::{dot, sum, Real, Tape, Var};
pub use dense::{glu, Activation, DenseParams, ELU_ALPHA, LEAKY_RELU_SLOPE};
pub use gat::{multi_head_attend, Attended, AttentionHead, HeadCombine};
pub use gating::{gated_aggregator, log_softmax, mixture_dispatch, softmax, top_k, Expert};
pub use gradcheck::{grad_check, value_and_grad, GradCheckReport, Objective};
pub use gru::GruParams;
pub use ode::{neural_ode_integrate, rk4_step};
pub use params::{flatten, gradient_of, lift, param_count, sgd_step, unflatten, Mat, ParamTree};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NnError {
    #[error("node {0} has an empty neighborhood")]
    EmptyNeighborhood(usize),
    #[error("non-finite state at step {step}")]
    NonFinite { step: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}
