//! Loop state, the event vocabulary and the reducer that folds one into the
//! other. Live ticks and replay go through the same [`OodaState::apply`].

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use brain_core::netcore::io::NetworkDoc;
use brain_core::netcore::MultilayerNetwork;
use brain_core::orientdecide::{DecisionPlan, JudgmentState, PlanStatus};
use brain_core::resilience::{apply_perturbation, Action, NodeRef};
use serde::{Deserialize, Serialize};

use crate::config::Mode;

/// Reports kept in memory; older ones are dropped.
pub const REPORT_RETENTION: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    #[default]
    Idle,
    Observe,
    Orient,
    Decide,
    Act,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Minor,
    Major,
    Critical,
}

impl Severity {
    pub fn from_z(z: f64, threshold: f64) -> Self {
        if z >= 3.0 * threshold {
            Severity::Critical
        } else if z >= 1.5 * threshold {
            Severity::Major
        } else {
            Severity::Minor
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Alert {
    pub id: String,
    pub tick: u64,
    pub severity: Severity,
    /// Global indices of the current-event nodes.
    pub nodes: Vec<usize>,
    pub theta_p: f64,
    pub z: f64,
    pub event_graph: String,
    pub active: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Actor {
    Operator,
    Autonomous,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Plan {
    #[serde(flatten)]
    pub plan: DecisionPlan,
    pub alert_id: String,
    /// Candidate chosen at approval; the top-ranked one when unset.
    pub selected: Option<String>,
    pub approved_by: Option<Actor>,
    pub note: Option<String>,
}

impl Plan {
    pub fn id(&self) -> &str {
        &self.plan.plan_id
    }

    pub fn status(&self) -> PlanStatus {
        self.plan.status
    }

    pub fn chosen(&self) -> Option<&brain_core::orientdecide::RankedCandidate> {
        match &self.selected {
            Some(id) => self.plan.candidates.iter().find(|c| &c.candidate.id == id),
            None => self.plan.candidates.first(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutedAction {
    pub tick: u64,
    pub plan_id: String,
    pub candidate_id: String,
    pub action: Action,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct EventGraphSummary {
    pub current: Vec<usize>,
    pub source: Vec<usize>,
    pub target: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TickReport {
    pub tick: u64,
    pub theta_p: f64,
    pub theta_z1: f64,
    pub theta_z3: f64,
    pub q_eff_max: f64,
    /// Absent until the detector has enough history.
    pub z: Option<f64>,
    pub events: EventGraphSummary,
    pub alert: Option<String>,
    pub plan: Option<String>,
    pub executed: Vec<String>,
    pub failed: Option<String>,
}

impl TickReport {
    fn empty(tick: u64) -> Self {
        Self {
            tick,
            theta_p: 0.0,
            theta_z1: 0.0,
            theta_z3: 0.0,
            q_eff_max: 0.0,
            z: None,
            events: EventGraphSummary::default(),
            alert: None,
            plan: None,
            executed: Vec::new(),
            failed: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct Detector {
    pub window: usize,
    pub history: VecDeque<f64>,
    pub armed: bool,
}

impl Detector {
    /// `(x - mean) / max(std, min_sigma)` over the trailing history, once
    /// it holds at least `min_history` values.
    pub fn z_score(&self, x: f64, min_history: usize, min_sigma: f64) -> Option<f64> {
        self.moments(min_history, min_sigma).map(|(mean, sd)| (x - mean) / sd)
    }

    fn moments(&self, min_history: usize, min_sigma: f64) -> Option<(f64, f64)> {
        let n = self.history.len();
        if n < min_history.max(2) {
            return None;
        }
        let mean = self.history.iter().sum::<f64>() / n as f64;
        let var = self.history.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
        Some((mean, var.sqrt().max(min_sigma)))
    }

    /// Value entered into the history: `x` winsorized to `mean ± clip·sd`.
    pub fn admit(&self, x: f64, clip: f64, min_history: usize, min_sigma: f64) -> f64 {
        match self.moments(min_history, min_sigma) {
            Some((mean, sd)) => x.clamp(mean - clip * sd, mean + clip * sd),
            None => x,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Event {
    Initialized {
        mode: Mode,
        detector_window: usize,
        network: NetworkDoc,
    },
    ModeChanged {
        mode: Mode,
    },
    TickStarted {
        tick: u64,
    },
    Observed {
        report: TickReport,
        /// Value appended to the detector history.
        admitted: f64,
        armed: bool,
    },
    Oriented {
        tick: u64,
        judgment: JudgmentState,
        events: EventGraphSummary,
    },
    AlertRaised {
        alert: Alert,
    },
    PlanProposed {
        plan: Plan,
    },
    Decided {
        tick: u64,
    },
    PlanApproved {
        plan_id: String,
        candidate: Option<String>,
        actor: Actor,
        note: Option<String>,
    },
    PlanRejected {
        plan_id: String,
        reason: String,
    },
    ActionExecuted {
        executed: ExecutedAction,
    },
    ActionFailed {
        tick: u64,
        plan_id: String,
        error: String,
    },
    TickCompleted {
        tick: u64,
    },
    TickFailed {
        tick: u64,
        error: String,
    },
}

impl Event {
    pub fn kind(&self) -> &'static str {
        match self {
            Event::Initialized { .. } => "initialized",
            Event::ModeChanged { .. } => "mode_changed",
            Event::TickStarted { .. } => "tick_started",
            Event::Observed { .. } => "observed",
            Event::Oriented { .. } => "oriented",
            Event::AlertRaised { .. } => "alert_raised",
            Event::PlanProposed { .. } => "plan_proposed",
            Event::Decided { .. } => "decided",
            Event::PlanApproved { .. } => "plan_approved",
            Event::PlanRejected { .. } => "plan_rejected",
            Event::ActionExecuted { .. } => "action_executed",
            Event::ActionFailed { .. } => "action_failed",
            Event::TickCompleted { .. } => "tick_completed",
            Event::TickFailed { .. } => "tick_failed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub seq: u64,
    pub event: Event,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ReplayError {
    #[error("record {seq}: expected sequence number {expected}")]
    Sequence { seq: u64, expected: u64 },
    #[error("record {seq}: {kind} not allowed in phase {phase:?}")]
    Phase { seq: u64, kind: &'static str, phase: Phase },
    #[error("record {seq}: {msg}")]
    Invalid { seq: u64, msg: String },
    #[error("line {line}: {msg}")]
    Corrupt { line: usize, msg: String },
}

mod network_serde {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(net: &Option<MultilayerNetwork>, s: S) -> Result<S::Ok, S::Error> {
        net.as_ref().map(NetworkDoc::from).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<MultilayerNetwork>, D::Error> {
        Option::<NetworkDoc>::deserialize(d)?
            .map(|doc| MultilayerNetwork::try_from(doc).map_err(serde::de::Error::custom))
            .transpose()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct OodaState {
    /// Sequence number of the last applied record.
    pub seq: u64,
    pub phase: Phase,
    /// Last tick started.
    pub tick: u64,
    pub mode: Mode,
    #[serde(with = "network_serde")]
    pub network: Option<MultilayerNetwork>,
    pub protected: BTreeSet<NodeRef>,
    pub alerts: Vec<Alert>,
    pub plans: Vec<Plan>,
    pub executed: Vec<ExecutedAction>,
    pub detector: Detector,
    pub judgment: JudgmentState,
    pub reports: BTreeMap<u64, TickReport>,
    /// Bumped whenever an action changes the network.
    pub network_version: u64,
    approval_order: BTreeMap<String, u64>,
    approvals: u64,
}

impl OodaState {
    pub fn plan(&self, id: &str) -> Option<&Plan> {
        self.plans.iter().find(|p| p.id() == id)
    }

    fn plan_mut(&mut self, id: &str, seq: u64) -> Result<&mut Plan, ReplayError> {
        self.plans
            .iter_mut()
            .find(|p| p.id() == id)
            .ok_or_else(|| ReplayError::Invalid {
                seq,
                msg: format!("unknown plan {id}"),
            })
    }

    pub fn pending_plans(&self) -> impl Iterator<Item = &Plan> {
        self.plans.iter().filter(|p| p.status() == PlanStatus::Proposed)
    }

    /// Approved plans waiting for the next act phase, in approval order.
    pub fn approved_queue(&self) -> Vec<&Plan> {
        let mut v: Vec<&Plan> = self
            .plans
            .iter()
            .filter(|p| p.status() == PlanStatus::Approved)
            .collect();
        v.sort_by_key(|p| self.approval_order.get(p.id()).copied().unwrap_or(u64::MAX));
        v
    }

    fn report_mut(&mut self, tick: u64) -> &mut TickReport {
        self.reports.entry(tick).or_insert_with(|| TickReport::empty(tick))
    }

    pub fn apply(&mut self, rec: &LogRecord) -> Result<(), ReplayError> {
        let seq = rec.seq;
        if seq != self.seq + 1 {
            return Err(ReplayError::Sequence {
                seq,
                expected: self.seq + 1,
            });
        }
        let kind = rec.event.kind();
        let phase_err = |phase| ReplayError::Phase { seq, kind, phase };
        let invalid = |msg: String| ReplayError::Invalid { seq, msg };
        let in_tick = |p: Phase| p != Phase::Idle;
        match &rec.event {
            Event::Initialized {
                mode,
                detector_window,
                network,
            } => {
                if self.seq != 0 {
                    return Err(invalid("initialized after the first record".into()));
                }
                let net = MultilayerNetwork::try_from(network.clone()).map_err(|e| invalid(e.to_string()))?;
                self.mode = *mode;
                self.network = Some(net);
                self.detector = Detector {
                    window: *detector_window,
                    history: VecDeque::new(),
                    armed: true,
                };
            }
            _ if self.network.is_none() => return Err(invalid("record before initialization".into())),
            Event::ModeChanged { mode } => {
                if self.phase != Phase::Idle {
                    return Err(phase_err(self.phase));
                }
                self.mode = *mode;
            }
            Event::TickStarted { tick } => {
                if self.phase != Phase::Idle {
                    return Err(phase_err(self.phase));
                }
                if *tick != self.tick + 1 {
                    return Err(invalid(format!("tick {tick} follows {}", self.tick)));
                }
                self.tick = *tick;
                self.phase = Phase::Observe;
            }
            Event::Observed {
                report,
                admitted,
                armed,
            } => {
                if self.phase != Phase::Observe {
                    return Err(phase_err(self.phase));
                }
                if report.tick != self.tick {
                    return Err(invalid(format!(
                        "report for tick {} during tick {}",
                        report.tick, self.tick
                    )));
                }
                if !admitted.is_finite() {
                    return Err(invalid(format!("non-finite detector value {admitted}")));
                }
                self.detector.history.push_back(*admitted);
                while self.detector.history.len() > self.detector.window {
                    self.detector.history.pop_front();
                }
                self.detector.armed = *armed;
                self.reports.insert(report.tick, report.clone());
                while self.reports.len() > REPORT_RETENTION {
                    self.reports.pop_first();
                }
                self.phase = Phase::Orient;
            }
            Event::Oriented { tick, judgment, events } => {
                if self.phase != Phase::Orient {
                    return Err(phase_err(self.phase));
                }
                self.judgment = judgment.clone();
                self.report_mut(*tick).events = events.clone();
                self.phase = Phase::Decide;
            }
            Event::AlertRaised { alert } => {
                if self.phase != Phase::Decide {
                    return Err(phase_err(self.phase));
                }
                self.report_mut(alert.tick).alert = Some(alert.id.clone());
                self.alerts.push(alert.clone());
            }
            Event::PlanProposed { plan } => {
                if self.phase != Phase::Decide {
                    return Err(phase_err(self.phase));
                }
                if self.plan(plan.id()).is_some() {
                    return Err(invalid(format!("duplicate plan {}", plan.id())));
                }
                let tick = self.tick;
                self.report_mut(tick).plan = Some(plan.id().to_string());
                self.plans.push(plan.clone());
            }
            Event::Decided { .. } => {
                if self.phase != Phase::Decide {
                    return Err(phase_err(self.phase));
                }
                self.phase = Phase::Act;
            }
            Event::PlanApproved {
                plan_id,
                candidate,
                actor,
                note,
            } => {
                if !matches!(self.phase, Phase::Idle | Phase::Decide) {
                    return Err(phase_err(self.phase));
                }
                let order = self.approvals;
                let p = self.plan_mut(plan_id, seq)?;
                if p.status() != PlanStatus::Proposed {
                    return Err(invalid(format!("plan {plan_id} is {:?}", p.status())));
                }
                if let Some(c) = candidate {
                    if !p.plan.candidates.iter().any(|r| &r.candidate.id == c) {
                        return Err(invalid(format!("plan {plan_id} has no candidate {c}")));
                    }
                }
                p.plan.status = PlanStatus::Approved;
                p.selected = candidate.clone();
                p.approved_by = Some(*actor);
                p.note = note.clone();
                self.approval_order.insert(plan_id.clone(), order);
                self.approvals += 1;
            }
            Event::PlanRejected { plan_id, reason } => {
                if self.phase != Phase::Idle {
                    return Err(phase_err(self.phase));
                }
                let p = self.plan_mut(plan_id, seq)?;
                if !matches!(p.status(), PlanStatus::Proposed | PlanStatus::Approved) {
                    return Err(invalid(format!("plan {plan_id} is {:?}", p.status())));
                }
                p.plan.status = PlanStatus::Rejected;
                p.note = Some(reason.clone());
                let alert = p.alert_id.clone();
                self.approval_order.remove(plan_id);
                self.resolve_alert(&alert);
            }
            Event::ActionExecuted { executed } => {
                if self.phase != Phase::Act {
                    return Err(phase_err(self.phase));
                }
                let p = self.plan_mut(&executed.plan_id, seq)?;
                if p.status() != PlanStatus::Approved {
                    return Err(invalid(format!("plan {} executed without approval", executed.plan_id)));
                }
                if p.chosen().map(|c| c.candidate.id.as_str()) != Some(executed.candidate_id.as_str()) {
                    return Err(invalid(format!(
                        "plan {} did not select {}",
                        executed.plan_id, executed.candidate_id
                    )));
                }
                p.plan.status = PlanStatus::Executed;
                let alert = p.alert_id.clone();
                match &executed.action {
                    Action::Protect { nodes } => self.protected.extend(nodes.iter().copied()),
                    action => {
                        let net = self.network.as_ref().expect("initialized");
                        self.network = Some(apply_perturbation(net, action).map_err(|e| invalid(e.to_string()))?);
                        self.network_version += 1;
                    }
                }
                self.approval_order.remove(&executed.plan_id);
                self.resolve_alert(&alert);
                let tick = self.tick;
                self.report_mut(tick).executed.push(executed.plan_id.clone());
                self.executed.push(executed.clone());
            }
            Event::ActionFailed { plan_id, error, .. } => {
                if self.phase != Phase::Act {
                    return Err(phase_err(self.phase));
                }
                let p = self.plan_mut(plan_id, seq)?;
                if p.status() != PlanStatus::Approved {
                    return Err(invalid(format!("plan {plan_id} is {:?}", p.status())));
                }
                p.plan.status = PlanStatus::Rejected;
                p.note = Some(format!("execution failed: {error}"));
                self.approval_order.remove(plan_id);
            }
            Event::TickCompleted { tick } => {
                if self.phase != Phase::Act {
                    return Err(phase_err(self.phase));
                }
                if *tick != self.tick {
                    return Err(invalid(format!("completed tick {tick} during tick {}", self.tick)));
                }
                self.phase = Phase::Idle;
            }
            Event::TickFailed { tick, error } => {
                if !in_tick(self.phase) || *tick != self.tick {
                    return Err(phase_err(self.phase));
                }
                self.report_mut(*tick).failed = Some(error.clone());
                self.phase = Phase::Idle;
            }
        }
        self.seq = seq;
        Ok(())
    }

    fn resolve_alert(&mut self, id: &str) {
        if let Some(a) = self.alerts.iter_mut().find(|a| a.id == id) {
            a.active = false;
        }
    }

    pub fn active_alerts(&self) -> impl Iterator<Item = &Alert> {
        self.alerts.iter().filter(|a| a.active)
    }
}

/// Folds `records` from the empty state, stopping at the first bad one.
pub fn replay<'a>(records: impl IntoIterator<Item = &'a LogRecord>) -> Result<OodaState, ReplayError> {
    let mut s = OodaState::default();
    for r in records {
        s.apply(r)?;
    }
    Ok(s)
}

/// Every execution is preceded by an approval of the same plan.
pub fn audit(records: &[LogRecord]) -> Result<(), String> {
    let mut approved = BTreeSet::new();
    for r in records {
        match &r.event {
            Event::PlanApproved { plan_id, .. } => {
                approved.insert(plan_id.clone());
            }
            Event::ActionExecuted { executed } if !approved.contains(&executed.plan_id) => {
                return Err(format!(
                    "record {}: plan {} executed without approval",
                    r.seq, executed.plan_id
                ));
            }
            _ => {}
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn detector(values: &[f64]) -> Detector {
        Detector {
            window: 50,
            history: values.iter().copied().collect(),
            armed: true,
        }
    }

    #[test]
    fn z_score_needs_history() {
        let d = detector(&[1.0, 2.0, 3.0]);
        assert_eq!(d.z_score(2.0, 4, 1e-9), None);
        let z = d.z_score(4.0, 3, 1e-9).unwrap();
        assert!((z - 2.0 / (2.0f64 / 3.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn flat_history_uses_sigma_floor() {
        let d = detector(&[5.0; 10]);
        assert_eq!(d.z_score(5.5, 10, 0.1), Some(5.0));
    }

    #[test]
    fn admit_winsorizes_outliers() {
        let d = detector(&[0.0, 2.0, 0.0, 2.0]);
        assert_eq!(d.admit(100.0, 3.0, 4, 1e-9), 4.0);
        assert_eq!(d.admit(-100.0, 3.0, 4, 1e-9), -2.0);
        assert_eq!(d.admit(1.5, 3.0, 4, 1e-9), 1.5);
        assert_eq!(d.admit(100.0, 3.0, 5, 1e-9), 100.0);
    }

    #[test]
    fn severity_bands() {
        assert_eq!(Severity::from_z(3.1, 3.0), Severity::Minor);
        assert_eq!(Severity::from_z(4.5, 3.0), Severity::Major);
        assert_eq!(Severity::from_z(9.0, 3.0), Severity::Critical);
    }

    #[test]
    fn event_kind_matches_tag() {
        let e = Event::TickStarted { tick: 3 };
        let v = serde_json::to_value(&e).unwrap();
        assert_eq!(v["type"], e.kind());
    }
}
