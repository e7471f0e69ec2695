//! The observe, orient, decide, act loop.

use brain_core::netcore::io::NetworkDoc;
use brain_core::netcore::{self, MultilayerNetwork};
use brain_core::observe::{
    forward, monitoring_losses, train_observe, ObserveConfig, ObserveLabels, ObservePipeline, SnapshotWindow,
    TrainOptions,
};
use brain_core::orientdecide::{
    build_event_graph, DecisionPlan, EventGraph, NodeSignals, OrientConfig, OrientDecideModel, PlanStatus, SubgraphKind,
};
use brain_core::resilience::{
    apply_perturbation, enumerate_interventions, linspace, percolate_network, predicted_delta_s, Action,
    NetworkPercolation, PercolationOptions,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::{EngineConfig, Mode, ScenarioConfig};
use crate::scenario::{generate_network, load_share, Scenario, Topology};
use crate::state::{
    Actor, Alert, Event, EventGraphSummary, ExecutedAction, LogRecord, OodaState, Plan, Severity, TickReport,
};
use crate::store::RunStore;
use crate::EngineError;

type Listener = Box<dyn FnMut(&LogRecord) + Send>;

/// Ring of `n` nodes used to calibrate the observation pipeline.
const CALIBRATION_NODES: usize = 12;
const CALIBRATION_WINDOWS: usize = 8;

pub struct Engine {
    cfg: EngineConfig,
    state: OodaState,
    scenario: Scenario,
    observe: ObservePipeline,
    orient: OrientDecideModel,
    topology: Option<(u64, Topology)>,
    store: Option<RunStore>,
    log: Vec<LogRecord>,
    listeners: Vec<Listener>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TickOutcome {
    pub tick: u64,
    pub alert: Option<String>,
    pub plan: Option<String>,
    pub executed: Vec<String>,
    pub failed: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ack {
    Applied,
    /// The plan was already in the requested state.
    Unchanged,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WhatIfPoint {
    pub occupation: f64,
    pub before: f64,
    pub after: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WhatIf {
    pub action: Action,
    pub delta_s: f64,
    pub before: NetworkPercolation,
    pub after: NetworkPercolation,
    pub sweep: Vec<WhatIfPoint>,
}

/// Evaluates `action` on a copy of `net`; `delta_s` is
/// [`predicted_delta_s`] at uniform `occupation`.
pub fn what_if(
    net: &MultilayerNetwork,
    action: &Action,
    occupation: f64,
    points: usize,
) -> Result<WhatIf, EngineError> {
    let opts = PercolationOptions::default();
    let m = net.layers().len();
    let phi = vec![occupation; m];
    let changed = apply_perturbation(net, action)?;
    let before = percolate_network(net, &phi, opts)?;
    let after = percolate_network(&changed, &phi, opts)?;
    let delta_s = predicted_delta_s(net, action, &phi, opts)?;
    let mut sweep = Vec::with_capacity(points);
    for x in linspace(0.0, 1.0, points) {
        let p = vec![x; m];
        sweep.push(WhatIfPoint {
            occupation: x,
            before: percolate_network(net, &p, opts)?.fraction(),
            after: percolate_network(&changed, &p, opts)?.fraction(),
        });
    }
    Ok(WhatIf {
        action: action.clone(),
        delta_s,
        before,
        after,
        sweep,
    })
}

fn observe_config(cfg: &EngineConfig) -> ObserveConfig {
    ObserveConfig {
        kt: cfg.observe.kernel,
        c_in: cfg.observe.channels,
        c_h: cfg.observe.hidden,
        c_out: cfg.observe.out,
        classes: 2,
    }
}

/// Fits the pipeline so that `P` follows each node's share of the window
/// load, on spiked windows over a small ring.
fn calibrate(cfg: &EngineConfig, rng: &mut ChaCha8Rng) -> Result<ObservePipeline, EngineError> {
    let init = ObservePipeline::init(observe_config(cfg), rng);
    if cfg.observe.calibration_epochs == 0 {
        return Ok(init);
    }
    let n = CALIBRATION_NODES;
    let ring: Vec<(usize, usize, f64)> = (0..n).map(|i| (i, (i + 1) % n, 1.0)).collect();
    let net = MultilayerNetwork::single(netcore::Layer::uniform(
        "ring",
        n,
        netcore::ElementKind::Enterprise,
        &ring,
    )?);
    let topo = Topology::of(&net)?;
    let mut data = Vec::with_capacity(CALIBRATION_WINDOWS);
    for w in 0..CALIBRATION_WINDOWS {
        let frames = cfg.observe.frames as u64;
        let spikes = if w == 0 { 0 } else { 1 + w % 2 };
        let injections = (0..spikes)
            .map(|_| crate::config::Injection {
                tick: rng.random_range(1..=frames),
                node: rng.random_range(0..n),
                duration: frames,
                magnitude: rng.random_range(2.0..12.0),
            })
            .collect();
        let sc = Scenario::new(
            rng.random(),
            ScenarioConfig {
                injections,
                ..cfg.scenario.clone()
            },
            cfg.observe.frames,
            cfg.observe.channels,
        );
        let window = sc.window(frames, &topo)?;
        let classes = (0..n)
            .map(|i| usize::from(sc.cfg.injections.iter().any(|inj| inj.node == i)))
            .collect();
        let density = load_share(&window);
        data.push((window, ObserveLabels { classes, density }));
    }
    let opts = TrainOptions {
        lr: 0.05,
        epochs: cfg.observe.calibration_epochs,
        penalty: 0.0,
    };
    let (fitted, _) = train_observe(&init, &data, &topo.spatial, &topo.couplings, opts)?;
    Ok(fitted)
}

fn summarize(graph: &EventGraph) -> EventGraphSummary {
    let nodes = |k| graph.session(k).map(|s| s.nodes()).unwrap_or_default();
    EventGraphSummary {
        current: nodes(SubgraphKind::Current),
        source: nodes(SubgraphKind::Source),
        target: nodes(SubgraphKind::Target),
    }
}

pub fn load_network(cfg: &EngineConfig) -> Result<MultilayerNetwork, EngineError> {
    match &cfg.network {
        Some(p) => Ok(netcore::io::read_file(p)?),
        None => generate_network(&cfg.generator, cfg.seed),
    }
}

impl Engine {
    fn build(cfg: EngineConfig, store: Option<RunStore>) -> Result<Self, EngineError> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let observe = calibrate(&cfg, &mut rng)?;
        let orient = OrientDecideModel::init(OrientConfig::default(), &mut rng);
        let scenario = Scenario::new(
            cfg.seed.wrapping_add(1),
            cfg.scenario.clone(),
            cfg.observe.frames,
            cfg.observe.channels,
        );
        Ok(Self {
            cfg,
            state: OodaState::default(),
            scenario,
            observe,
            orient,
            topology: None,
            store,
            log: Vec::new(),
            listeners: Vec::new(),
        })
    }

    /// In-memory engine; the log is kept in [`Engine::log`].
    pub fn new(cfg: EngineConfig) -> Result<Self, EngineError> {
        let net = load_network(&cfg)?;
        Self::with_network(cfg, net)
    }

    pub fn with_network(cfg: EngineConfig, net: MultilayerNetwork) -> Result<Self, EngineError> {
        let mut e = Self::build(cfg, None)?;
        e.initialize(&net)?;
        Ok(e)
    }

    /// Persistent engine under `cfg.data_dir`, resuming an existing log.
    pub fn open(cfg: EngineConfig) -> Result<Self, EngineError> {
        let (store, records) = RunStore::open(&cfg.data_dir)?;
        let mut e = Self::build(cfg, Some(store))?;
        if records.is_empty() {
            let net = load_network(&e.cfg)?;
            e.initialize(&net)?;
            e.flush()?;
        } else {
            for r in &records {
                e.state.apply(r)?;
            }
        }
        Ok(e)
    }

    fn initialize(&mut self, net: &MultilayerNetwork) -> Result<(), EngineError> {
        self.emit(Event::Initialized {
            mode: self.cfg.mode,
            detector_window: self.cfg.alerts.window,
            network: NetworkDoc::from(net),
        })
    }

    pub fn config(&self) -> &EngineConfig {
        &self.cfg
    }

    pub fn state(&self) -> &OodaState {
        &self.state
    }

    pub fn network(&self) -> &MultilayerNetwork {
        self.state.network.as_ref().expect("engine is initialized")
    }

    /// Records emitted by an in-memory engine.
    pub fn log(&self) -> &[LogRecord] {
        &self.log
    }

    pub fn orient_model(&self) -> &OrientDecideModel {
        &self.orient
    }

    pub fn subscribe(&mut self, f: impl FnMut(&LogRecord) + Send + 'static) {
        self.listeners.push(Box::new(f));
    }

    fn emit(&mut self, event: Event) -> Result<(), EngineError> {
        let rec = LogRecord {
            seq: self.state.seq + 1,
            event,
        };
        self.state.apply(&rec)?;
        match &mut self.store {
            Some(s) => s.append(&rec)?,
            None => self.log.push(rec.clone()),
        }
        for l in &mut self.listeners {
            l(&rec);
        }
        Ok(())
    }

    pub fn flush(&mut self) -> Result<(), EngineError> {
        match &mut self.store {
            Some(s) => s.flush(),
            None => Ok(()),
        }
    }

    pub fn write_snapshot(&self) -> Result<Option<std::path::PathBuf>, EngineError> {
        self.store.as_ref().map(|s| s.write_snapshot(&self.state)).transpose()
    }

    pub fn set_mode(&mut self, mode: Mode) -> Result<(), EngineError> {
        if self.state.mode != mode {
            self.emit(Event::ModeChanged { mode })?;
            self.flush()?;
        }
        Ok(())
    }

    fn topology(&mut self) -> Result<Topology, EngineError> {
        let v = self.state.network_version;
        if let Some((ver, t)) = &self.topology {
            if *ver == v {
                return Ok(t.clone());
            }
        }
        let t = Topology::of(self.network())?;
        self.topology = Some((v, t.clone()));
        Ok(t)
    }

    /// The window the next tick will observe.
    pub fn window(&mut self, tick: u64) -> Result<SnapshotWindow, EngineError> {
        let topo = self.topology()?;
        self.scenario.window(tick, &topo)
    }

    pub fn tick(&mut self) -> Result<TickOutcome, EngineError> {
        let tick = self.state.tick + 1;
        self.emit(Event::TickStarted { tick })?;
        if let Err(e) = self.run_phases(tick) {
            if let EngineError::Replay(_) = e {
                return Err(e);
            }
            self.emit(Event::TickFailed {
                tick,
                error: e.to_string(),
            })?;
        } else {
            self.emit(Event::TickCompleted { tick })?;
        }
        self.flush()?;
        if self.cfg.snapshot_every > 0 && tick % self.cfg.snapshot_every == 0 {
            self.write_snapshot()?;
        }
        let r = self.state.reports.get(&tick);
        Ok(TickOutcome {
            tick,
            alert: r.and_then(|r| r.alert.clone()),
            plan: r.and_then(|r| r.plan.clone()),
            executed: r.map(|r| r.executed.clone()).unwrap_or_default(),
            failed: r.and_then(|r| r.failed.clone()),
        })
    }

    pub fn run(&mut self, ticks: u64) -> Result<Vec<TickOutcome>, EngineError> {
        (0..ticks).map(|_| self.tick()).collect()
    }

    fn run_phases(&mut self, tick: u64) -> Result<(), EngineError> {
        let a = self.cfg.alerts.clone();
        let topo = self.topology()?;
        let n = topo.out_links.len();

        let window = self.scenario.window(tick, &topo)?;
        let out = forward(&self.observe, &window, &topo.spatial)?;
        let labels = ObserveLabels {
            classes: vec![0; n],
            density: vec![1.0 / n as f64; n],
        };
        let summary = monitoring_losses(&out, &labels, &topo.couplings, self.cfg.observe.penalty)?;
        let z = self.state.detector.z_score(summary.theta_p, a.min_history, a.min_sigma);
        let admitted = self
            .state
            .detector
            .admit(summary.theta_p, a.z_threshold, a.min_history, a.min_sigma);
        let armed = self.state.detector.armed;
        let fire = armed && z.is_some_and(|z| z > a.z_threshold);
        let armed_after = if fire {
            false
        } else {
            armed || z.is_some_and(|z| z < a.rearm_z)
        };
        self.emit(Event::Observed {
            report: TickReport {
                tick,
                theta_p: summary.theta_p,
                theta_z1: summary.theta_z1,
                theta_z3: summary.theta_z3,
                q_eff_max: summary.q_eff_max,
                z,
                events: EventGraphSummary::default(),
                alert: None,
                plan: None,
                executed: Vec::new(),
                failed: None,
            },
            admitted,
            armed: armed_after,
        })?;

        let share = load_share(&window);
        let signals = NodeSignals {
            contribution: share.iter().map(|s| s * n as f64).collect(),
            density: share,
            coupling: topo.couplings.clone(),
        };
        let graph = build_event_graph(&signals, &topo.out_links, self.cfg.events.threshold, tick)?;
        let mut judgment = self.state.judgment.clone();
        let step = self.orient.step(&mut judgment, &graph)?;
        let events = summarize(&graph);
        self.emit(Event::Oriented {
            tick,
            judgment: judgment.clone(),
            events: events.clone(),
        })?;

        if fire {
            let z = z.expect("fired");
            let alert = Alert {
                id: format!("alert-{tick}"),
                tick,
                severity: Severity::from_z(z, a.z_threshold),
                nodes: events.current.clone(),
                theta_p: summary.theta_p,
                z,
                event_graph: format!("eg-{tick}"),
                active: true,
            };
            let alert_id = alert.id.clone();
            self.emit(Event::AlertRaised { alert })?;
            let phi = vec![self.cfg.decide.occupation; self.network().layers().len()];
            let candidates = enumerate_interventions(
                self.network(),
                &phi,
                self.cfg.decide.budget,
                PercolationOptions::default(),
            )?;
            let h = match &step {
                Some(j) => j.h_t.clone(),
                None if judgment.h.len() == self.orient.hidden_dim() => judgment.h.clone(),
                None => vec![0.0; self.orient.hidden_dim()],
            };
            let ranked = self.orient.rank(&h, &candidates)?;
            let plan = Plan {
                plan: DecisionPlan {
                    plan_id: format!("plan-{tick}"),
                    created_at: tick,
                    candidates: ranked,
                    evidence: step.map(|j| j.evidence).unwrap_or_default(),
                    status: PlanStatus::Proposed,
                },
                alert_id,
                selected: None,
                approved_by: None,
                note: None,
            };
            let plan_id = plan.plan.plan_id.clone();
            let has_candidates = !plan.plan.candidates.is_empty();
            self.emit(Event::PlanProposed { plan })?;
            if self.state.mode == Mode::Autonomous && has_candidates {
                self.emit(Event::PlanApproved {
                    plan_id,
                    candidate: None,
                    actor: Actor::Autonomous,
                    note: None,
                })?;
            }
        }
        self.emit(Event::Decided { tick })?;

        let queue: Vec<(String, Option<(String, Action)>)> = self
            .state
            .approved_queue()
            .into_iter()
            .map(|p| {
                (
                    p.id().to_string(),
                    p.chosen().map(|c| (c.candidate.id.clone(), c.candidate.action.clone())),
                )
            })
            .collect();
        for (plan_id, chosen) in queue {
            let outcome = match chosen {
                None => Err("plan has no candidates".to_string()),
                Some((candidate_id, action)) => {
                    let check = match &action {
                        Action::Protect { .. } => Ok(()),
                        a => apply_perturbation(self.network(), a)
                            .map(|_| ())
                            .map_err(|e| e.to_string()),
                    };
                    check.map(|()| (candidate_id, action))
                }
            };
            match outcome {
                Ok((candidate_id, action)) => self.emit(Event::ActionExecuted {
                    executed: ExecutedAction {
                        tick,
                        plan_id,
                        candidate_id,
                        action,
                    },
                })?,
                Err(error) => self.emit(Event::ActionFailed { tick, plan_id, error })?,
            }
        }
        Ok(())
    }

    pub fn approve(
        &mut self,
        plan_id: &str,
        candidate: Option<String>,
        note: Option<String>,
    ) -> Result<Ack, EngineError> {
        let p = self
            .state
            .plan(plan_id)
            .ok_or_else(|| EngineError::UnknownPlan(plan_id.to_string()))?;
        match p.status() {
            PlanStatus::Approved | PlanStatus::Executed => return Ok(Ack::Unchanged),
            PlanStatus::Rejected => {
                return Err(EngineError::Conflict(format!("plan {plan_id} was rejected")));
            }
            PlanStatus::Proposed => {}
        }
        if let Some(c) = &candidate {
            if !p.plan.candidates.iter().any(|r| &r.candidate.id == c) {
                return Err(EngineError::BadRequest(format!("plan {plan_id} has no candidate {c}")));
            }
        } else if p.plan.candidates.is_empty() {
            return Err(EngineError::Conflict(format!("plan {plan_id} has no candidates")));
        }
        self.emit(Event::PlanApproved {
            plan_id: plan_id.to_string(),
            candidate,
            actor: Actor::Operator,
            note,
        })?;
        self.flush()?;
        Ok(Ack::Applied)
    }

    pub fn reject(&mut self, plan_id: &str, reason: String) -> Result<Ack, EngineError> {
        let p = self
            .state
            .plan(plan_id)
            .ok_or_else(|| EngineError::UnknownPlan(plan_id.to_string()))?;
        match p.status() {
            PlanStatus::Rejected => return Ok(Ack::Unchanged),
            PlanStatus::Executed => {
                return Err(EngineError::Conflict(format!("plan {plan_id} was already executed")));
            }
            PlanStatus::Proposed | PlanStatus::Approved => {}
        }
        self.emit(Event::PlanRejected {
            plan_id: plan_id.to_string(),
            reason,
        })?;
        self.flush()?;
        Ok(Ack::Applied)
    }

    pub fn what_if(&self, action: &Action) -> Result<WhatIf, EngineError> {
        what_if(self.network(), action, self.cfg.decide.occupation, 11)
    }
}
