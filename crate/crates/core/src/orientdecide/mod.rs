//! Event graphs, hierarchical attention, judgment sequence and plan ranking.

mod attention;
mod decide;
mod events;

pub use attention::{
    cross_session_gat, cross_subgraph_gat, intra_session_gat, Attention, GlobalHead, NullPolicy, SessionHead,
    TemporalHead,
};
pub use decide::{
    candidate_features, decision_loss, fit_theta, rank_candidates, DecisionPlan, Evidence, Judgment, JudgmentState,
    OrientConfig, OrientDecideModel, PlanStatus, RankedCandidate, CANDIDATE_FEATURES,
};
pub use events::{
    build_event_graph, EventGraph, EventKind, EventNode, NodeSignals, Session, SubgraphKind, EVENT_FEATURES,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OrientError {
    #[error("{0:?} session has no events")]
    EmptySession(SubgraphKind),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
