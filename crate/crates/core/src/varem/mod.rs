//! Variational EM over knowledge-graph triples with weighted logical rules.

mod inference;
mod model;
mod rules;
mod store;

pub use inference::{
    e_step, elbo, exact_marginals, joint_log_prob, log_evidence, log_partition, m_step, pl_gradient,
    pseudo_log_likelihood, run_em, scores, Blanket, EStepOptions, EmTrace, MStepOptions, MStepResult, Posteriors,
    MAX_ENUMERATION_VARS,
};
pub use model::{ConstantScorer, EmbeddingModel, Scorer, TableScorer};
pub use rules::{Atom, Grounding, Rule, RuleSet};
pub use store::{Triple, TripleStore};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum VarEmError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("unknown id in {0}")]
    UnknownId(String),
    #[error("duplicate triple {0}")]
    Duplicate(String),
    #[error("score {score} of variable {var} is outside (0, 1)")]
    ScoreOutOfRange { var: usize, score: f64 },
    #[error("{variables} variables exceed the enumeration limit {max}")]
    TooLarge { variables: usize, max: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
