//! Closed-loop resilience engine: observation, orientation, decision and
//! supervised action over a multilayer industrial-chain network, with an
//! append-only event log and an HTTP service.

pub mod api;
pub mod config;
mod engine;
pub mod scenario;
pub mod state;
pub mod store;

pub use config::{EngineConfig, Mode};
pub use engine::{load_network, what_if, Ack, Engine, TickOutcome, WhatIf, WhatIfPoint};
pub use state::{audit, replay, Event, LogRecord, OodaState, Phase, ReplayError};

use brain_core::netcore::NetError;
use brain_core::observe::ObserveError;
use brain_core::orientdecide::OrientError;
use brain_core::resilience::ResilienceError;

#[derive(Debug, thiserror::Error)]
pub enum EngineError {
    #[error("config: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(String),
    #[error("unknown plan {0}")]
    UnknownPlan(String),
    #[error("conflict: {0}")]
    Conflict(String),
    #[error("bad request: {0}")]
    BadRequest(String),
    #[error("engine stopped")]
    Stopped,
    #[error(transparent)]
    Replay(#[from] ReplayError),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Observe(#[from] ObserveError),
    #[error(transparent)]
    Orient(#[from] OrientError),
    #[error(transparent)]
    Resilience(#[from] ResilienceError),
}
