//! Single-writer command loop and the HTTP surface.
//!
//! All mutations go through one thread that owns the [`Engine`]; handlers
//! read immutable state snapshots published after every command.

use std::collections::BTreeSet;
use std::convert::Infallible;
use std::sync::Arc;
use std::time::Duration;

use axum::extract::{Path, Query, State};
use axum::http::{HeaderMap, StatusCode};
use axum::response::sse::{Event as SseEvent, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use brain_core::netcore::io::NetworkDoc;
use brain_core::orientdecide::{JudgmentState, PlanStatus};
use brain_core::resilience::{Action, NodeRef, ResilienceError};
use futures::Stream;
use serde::{Deserialize, Serialize};
use tokio::sync::{broadcast, mpsc, oneshot, watch};

use crate::config::Mode;
use crate::engine::{what_if, Ack, Engine, TickOutcome, WhatIf};
use crate::state::{Alert, ExecutedAction, LogRecord, OodaState, Phase, Plan, TickReport};
use crate::EngineError;

pub const API_VERSION: u32 = 1;
pub const TOKEN_HEADER: &str = "x-brain-token";
const EVENT_BUFFER: usize = 1024;

type Reply<T> = oneshot::Sender<Result<T, EngineError>>;

enum Command {
    Tick(Reply<TickOutcome>),
    Approve {
        id: String,
        candidate: Option<String>,
        note: Option<String>,
        reply: Reply<Ack>,
    },
    Reject {
        id: String,
        reason: String,
        reply: Reply<Ack>,
    },
    SetMode(Mode, Reply<()>),
    Shutdown(Reply<()>),
}

/// Cloneable client of the command loop.
#[derive(Clone)]
pub struct Handle {
    tx: mpsc::Sender<Command>,
    snapshot: watch::Receiver<Arc<OodaState>>,
    events: broadcast::Sender<LogRecord>,
    occupation: f64,
    token: Option<String>,
}

/// Moves `engine` onto its own thread and returns a handle to it.
pub fn spawn(mut engine: Engine) -> Handle {
    let (tx, mut rx) = mpsc::channel::<Command>(64);
    let (events, _) = broadcast::channel(EVENT_BUFFER);
    let sink = events.clone();
    engine.subscribe(move |r| {
        let _ = sink.send(r.clone());
    });
    let (snap_tx, snapshot) = watch::channel(Arc::new(engine.state().clone()));
    let occupation = engine.config().decide.occupation;
    let token = engine.config().api_token.clone();
    std::thread::spawn(move || {
        while let Some(cmd) = rx.blocking_recv() {
            let stop = matches!(cmd, Command::Shutdown(_));
            let publish = |engine: &Engine| {
                let _ = snap_tx.send(Arc::new(engine.state().clone()));
            };
            match cmd {
                Command::Tick(r) => {
                    let res = engine.tick();
                    publish(&engine);
                    let _ = r.send(res);
                }
                Command::Approve {
                    id,
                    candidate,
                    note,
                    reply,
                } => {
                    let res = engine.approve(&id, candidate, note);
                    publish(&engine);
                    let _ = reply.send(res);
                }
                Command::Reject { id, reason, reply } => {
                    let res = engine.reject(&id, reason);
                    publish(&engine);
                    let _ = reply.send(res);
                }
                Command::SetMode(m, r) => {
                    let res = engine.set_mode(m);
                    publish(&engine);
                    let _ = r.send(res);
                }
                Command::Shutdown(r) => {
                    let res = engine.flush().and_then(|_| engine.write_snapshot().map(|_| ()));
                    publish(&engine);
                    let _ = r.send(res);
                }
            }
            if stop {
                break;
            }
        }
    });
    Handle {
        tx,
        snapshot,
        events,
        occupation,
        token,
    }
}

impl Handle {
    async fn call<T>(&self, make: impl FnOnce(Reply<T>) -> Command) -> Result<T, EngineError> {
        let (reply, rx) = oneshot::channel();
        self.tx.send(make(reply)).await.map_err(|_| EngineError::Stopped)?;
        rx.await.map_err(|_| EngineError::Stopped)?
    }

    pub async fn tick(&self) -> Result<TickOutcome, EngineError> {
        self.call(Command::Tick).await
    }

    pub async fn approve(&self, id: &str, candidate: Option<String>, note: Option<String>) -> Result<Ack, EngineError> {
        let id = id.to_string();
        self.call(|reply| Command::Approve {
            id,
            candidate,
            note,
            reply,
        })
        .await
    }

    pub async fn reject(&self, id: &str, reason: String) -> Result<Ack, EngineError> {
        let id = id.to_string();
        self.call(|reply| Command::Reject { id, reason, reply }).await
    }

    pub async fn set_mode(&self, mode: Mode) -> Result<(), EngineError> {
        self.call(|r| Command::SetMode(mode, r)).await
    }

    /// Flushes the log and writes a state snapshot; the loop then exits.
    pub async fn shutdown(&self) -> Result<(), EngineError> {
        self.call(Command::Shutdown).await
    }

    pub fn state(&self) -> Arc<OodaState> {
        self.snapshot.borrow().clone()
    }

    pub fn subscribe(&self) -> broadcast::Receiver<LogRecord> {
        self.events.subscribe()
    }
}

/// Ticks every `period` until the loop stops.
pub fn spawn_ticker(handle: Handle, period: Duration) -> tokio::task::JoinHandle<()> {
    tokio::spawn(async move {
        let mut every = tokio::time::interval(period);
        every.tick().await;
        loop {
            every.tick().await;
            match handle.tick().await {
                Ok(o) if o.alert.is_some() => tracing::warn!(tick = o.tick, alert = ?o.alert, "alert raised"),
                Ok(o) => tracing::debug!(tick = o.tick, "tick"),
                Err(EngineError::Stopped) => break,
                Err(e) => tracing::error!(error = %e, "tick failed"),
            }
        }
    })
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Envelope<T> {
    pub version: u32,
    pub data: T,
}

fn ok<T: Serialize>(data: T) -> Response {
    Json(Envelope {
        version: API_VERSION,
        data,
    })
    .into_response()
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ErrorBody {
    pub version: u32,
    pub error: String,
}

struct ApiError(StatusCode, String);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (
            self.0,
            Json(ErrorBody {
                version: API_VERSION,
                error: self.1,
            }),
        )
            .into_response()
    }
}

impl From<EngineError> for ApiError {
    fn from(e: EngineError) -> Self {
        let code = match &e {
            EngineError::UnknownPlan(_) => StatusCode::NOT_FOUND,
            EngineError::Conflict(_) => StatusCode::CONFLICT,
            EngineError::BadRequest(_) | EngineError::Resilience(ResilienceError::InvalidAction(_)) => {
                StatusCode::UNPROCESSABLE_ENTITY
            }
            EngineError::Stopped => StatusCode::SERVICE_UNAVAILABLE,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError(code, e.to_string())
    }
}

fn authorize(h: &Handle, headers: &HeaderMap) -> Result<(), ApiError> {
    match &h.token {
        None => Ok(()),
        Some(t) if headers.get(TOKEN_HEADER).and_then(|v| v.to_str().ok()) == Some(t.as_str()) => Ok(()),
        Some(_) => Err(ApiError(
            StatusCode::UNAUTHORIZED,
            format!("missing or wrong {TOKEN_HEADER}"),
        )),
    }
}

pub fn router(h: Handle) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/network", get(network))
        .route("/state", get(state))
        .route("/alerts", get(alerts))
        .route("/plans", get(plans))
        .route("/plans/{id}/approve", post(approve))
        .route("/plans/{id}/reject", post(reject))
        .route("/whatif", post(whatif))
        .route("/reports/{tick}", get(report))
        .route("/events", get(events))
        .with_state(h)
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub version: String,
    pub tick: u64,
    pub phase: Phase,
}

async fn health(State(h): State<Handle>) -> Response {
    let s = h.state();
    ok(Health {
        status: "ok".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        tick: s.tick,
        phase: s.phase,
    })
}

async fn network(State(h): State<Handle>) -> Response {
    let s = h.state();
    ok(s.network.as_ref().map(NetworkDoc::from))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct StateView {
    pub seq: u64,
    pub phase: Phase,
    pub tick: u64,
    pub mode: Mode,
    pub network_version: u64,
    pub nodes: usize,
    pub protected: BTreeSet<NodeRef>,
    pub active_alerts: Vec<Alert>,
    pub pending_plans: Vec<String>,
    pub approved_plans: Vec<String>,
    pub executed: Vec<ExecutedAction>,
    pub detector_armed: bool,
    pub detector_history: Vec<f64>,
    pub judgment: JudgmentState,
    pub last_report: Option<TickReport>,
}

impl StateView {
    pub fn of(s: &OodaState) -> Self {
        Self {
            seq: s.seq,
            phase: s.phase,
            tick: s.tick,
            mode: s.mode,
            network_version: s.network_version,
            nodes: s.network.as_ref().map_or(0, |n| n.total_nodes()),
            protected: s.protected.clone(),
            active_alerts: s.active_alerts().cloned().collect(),
            pending_plans: s.pending_plans().map(|p| p.id().to_string()).collect(),
            approved_plans: s.approved_queue().iter().map(|p| p.id().to_string()).collect(),
            executed: s.executed.clone(),
            detector_armed: s.detector.armed,
            detector_history: s.detector.history.iter().copied().collect(),
            judgment: s.judgment.clone(),
            last_report: s.reports.values().next_back().cloned(),
        }
    }
}

async fn state(State(h): State<Handle>) -> Response {
    ok(StateView::of(&h.state()))
}

#[derive(Debug, Deserialize)]
struct AlertQuery {
    active: Option<bool>,
}

async fn alerts(State(h): State<Handle>, Query(q): Query<AlertQuery>) -> Response {
    let s = h.state();
    let v: Vec<&Alert> = s
        .alerts
        .iter()
        .filter(|a| q.active.is_none_or(|x| a.active == x))
        .collect();
    ok(v)
}

#[derive(Debug, Deserialize)]
struct PlanQuery {
    status: Option<PlanStatus>,
}

async fn plans(State(h): State<Handle>, Query(q): Query<PlanQuery>) -> Response {
    let s = h.state();
    let v: Vec<&Plan> = s
        .plans
        .iter()
        .filter(|p| q.status.is_none_or(|x| p.status() == x))
        .collect();
    ok(v)
}

#[derive(Debug, Default, Serialize, Deserialize)]
pub struct ApproveRequest {
    pub candidate: Option<String>,
    pub note: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Decision {
    pub ack: Ack,
    pub plan: Plan,
}

fn body_or_default<T: Default + for<'de> Deserialize<'de>>(body: &str) -> Result<T, ApiError> {
    if body.trim().is_empty() {
        return Ok(T::default());
    }
    serde_json::from_str(body).map_err(|e| ApiError(StatusCode::BAD_REQUEST, e.to_string()))
}

fn decided(h: &Handle, id: &str, ack: Ack) -> Result<Response, ApiError> {
    let s = h.state();
    let plan = s
        .plan(id)
        .cloned()
        .ok_or_else(|| ApiError(StatusCode::NOT_FOUND, format!("unknown plan {id}")))?;
    Ok(ok(Decision { ack, plan }))
}

async fn approve(
    State(h): State<Handle>,
    Path(id): Path<String>,
    headers: HeaderMap,
    body: String,
) -> Result<Response, ApiError> {
    authorize(&h, &headers)?;
    let req: ApproveRequest = body_or_default(&body)?;
    let ack = h.approve(&id, req.candidate, req.note).await?;
    decided(&h, &id, ack)
}

#[derive(Debug, Default, Serialize, Deserialize)]
pub struct RejectRequest {
    pub reason: Option<String>,
}

async fn reject(
    State(h): State<Handle>,
    Path(id): Path<String>,
    headers: HeaderMap,
    body: String,
) -> Result<Response, ApiError> {
    authorize(&h, &headers)?;
    let req: RejectRequest = body_or_default(&body)?;
    let ack = h
        .reject(&id, req.reason.unwrap_or_else(|| "rejected by operator".into()))
        .await?;
    decided(&h, &id, ack)
}

#[derive(Debug, Serialize, Deserialize)]
pub struct WhatIfRequest {
    #[serde(flatten)]
    pub action: Action,
    pub occupation: Option<f64>,
}

async fn whatif(State(h): State<Handle>, headers: HeaderMap, body: String) -> Result<Response, ApiError> {
    authorize(&h, &headers)?;
    let req: WhatIfRequest =
        serde_json::from_str(&body).map_err(|e| ApiError(StatusCode::BAD_REQUEST, e.to_string()))?;
    let occupation = req.occupation.unwrap_or(h.occupation);
    if !(0.0..=1.0).contains(&occupation) {
        return Err(ApiError(
            StatusCode::UNPROCESSABLE_ENTITY,
            "occupation must lie in [0, 1]".into(),
        ));
    }
    let snapshot = h.state();
    let result: Result<WhatIf, EngineError> = tokio::task::spawn_blocking(move || {
        let net = snapshot.network.as_ref().ok_or(EngineError::Stopped)?;
        what_if(net, &req.action, occupation, 11)
    })
    .await
    .map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;
    Ok(ok(result?))
}

async fn report(State(h): State<Handle>, Path(tick): Path<u64>) -> Result<Response, ApiError> {
    let s = h.state();
    s.reports
        .get(&tick)
        .map(ok)
        .ok_or_else(|| ApiError(StatusCode::NOT_FOUND, format!("no report for tick {tick}")))
}

async fn events(State(h): State<Handle>) -> Sse<impl Stream<Item = Result<SseEvent, Infallible>>> {
    let rx = h.subscribe();
    let s = h.state();
    let hello = SseEvent::default()
        .event("hello")
        .json_data(serde_json::json!({ "version": API_VERSION, "seq": s.seq, "tick": s.tick }))
        .expect("json");
    let first = futures::stream::once(async move { Ok(hello) });
    let rest = futures::stream::unfold(rx, |mut rx| async move {
        loop {
            match rx.recv().await {
                Ok(rec) => {
                    let ev = SseEvent::default()
                        .event(rec.event.kind())
                        .id(rec.seq.to_string())
                        .json_data(&rec)
                        .expect("json");
                    return Some((Ok(ev), rx));
                }
                Err(broadcast::error::RecvError::Lagged(_)) => continue,
                Err(broadcast::error::RecvError::Closed) => return None,
            }
        }
    });
    Sse::new(futures::StreamExt::chain(first, rest)).keep_alive(KeepAlive::default())
}
