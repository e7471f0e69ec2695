use rand::Rng;
use serde::{Deserialize, Serialize};

use super::attention::{
    cross_session_gat, cross_subgraph_gat, intra_session_gat, GlobalHead, NullPolicy, SessionHead, TemporalHead,
};
use super::events::{EventGraph, SubgraphKind, EVENT_FEATURES};
use super::OrientError;
use crate::nnblocks::{dot, GruParams, Mat, ParamTree, Real};
use crate::resilience::{InterventionCandidate, InterventionFamily};

/// `-Σ [y log σ(θ·h) + (1-y) log(1-σ(θ·h))] + λ |θ|₂`.
pub fn decision_loss<T: Real>(
    states: &[Vec<f64>],
    labels: &[bool],
    theta: &[T],
    lambda: f64,
) -> Result<T, OrientError> {
    if states.len() != labels.len() {
        return Err(OrientError::Dimension {
            expected: states.len(),
            got: labels.len(),
        });
    }
    if theta.is_empty() {
        return Err(OrientError::InvalidArgument("empty parameter vector".into()));
    }
    let anchor = theta[0];
    let mut total = anchor * 0.0;
    for (h, &y) in states.iter().zip(labels) {
        if h.len() != theta.len() {
            return Err(OrientError::Dimension {
                expected: theta.len(),
                got: h.len(),
            });
        }
        let hv: Vec<T> = h.iter().map(|&x| anchor.lift(x)).collect();
        let z = dot(theta, &hv);
        total = total - if y { z.log_sigmoid() } else { (-z).log_sigmoid() };
    }
    let sq = theta.iter().fold(anchor * 0.0, |a, &t| a + t * t);
    if sq.value() > 0.0 {
        total = total + sq.sqrt() * lambda;
    }
    Ok(total)
}

/// Candidate features appended to `h_T` when scoring:
/// `[ΔS, S_pred, autonomy, rewire, protect]`.
pub const CANDIDATE_FEATURES: usize = 5;

pub fn candidate_features(c: &InterventionCandidate) -> [f64; CANDIDATE_FEATURES] {
    let fam = |f| if c.family == f { 1.0 } else { 0.0 };
    [
        c.delta_s,
        c.predicted_s,
        fam(InterventionFamily::Autonomy),
        fam(InterventionFamily::DegreeMatchedRewire),
        fam(InterventionFamily::Protection),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedCandidate {
    pub candidate: InterventionCandidate,
    /// `σ(θ · [h_T ⊕ features])`, in (0, 1).
    pub score: f64,
}

/// Scores every candidate and sorts by score descending, ties by id.
pub fn rank_candidates(
    h_t: &[f64],
    candidates: &[InterventionCandidate],
    theta: &[f64],
) -> Result<Vec<RankedCandidate>, OrientError> {
    if theta.len() != h_t.len() + CANDIDATE_FEATURES {
        return Err(OrientError::Dimension {
            expected: h_t.len() + CANDIDATE_FEATURES,
            got: theta.len(),
        });
    }
    let mut ranked: Vec<RankedCandidate> = candidates
        .iter()
        .map(|c| {
            let z: f64 = h_t
                .iter()
                .chain(&candidate_features(c))
                .zip(theta)
                .map(|(a, b)| a * b)
                .sum();
            RankedCandidate {
                candidate: c.clone(),
                score: 1.0 / (1.0 + (-z.clamp(-30.0, 30.0)).exp()),
            }
        })
        .collect();
    ranked.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then_with(|| a.candidate.id.cmp(&b.candidate.id))
    });
    Ok(ranked)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanStatus {
    Proposed,
    Approved,
    Rejected,
    Executed,
}

/// Which subgraph session contributed, with its global attention weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evidence {
    pub subgraph: SubgraphKind,
    pub tick: u64,
    pub nodes: Vec<usize>,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionPlan {
    pub plan_id: String,
    pub created_at: u64,
    pub candidates: Vec<RankedCandidate>,
    pub evidence: Vec<Evidence>,
    pub status: PlanStatus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrientConfig {
    pub heads: usize,
    pub d1: usize,
    pub d2: usize,
    pub d3: usize,
    pub hidden: usize,
    pub lookback: [usize; 3],
    pub null_policy: NullPolicy,
}

impl Default for OrientConfig {
    fn default() -> Self {
        Self {
            heads: 2,
            d1: 4,
            d2: 4,
            d3: 4,
            hidden: 8,
            lookback: [3, 3, 3],
            null_policy: NullPolicy::Mask,
        }
    }
}

/// Session, temporal and subgraph attention feeding a GRU, plus the plan
/// scoring vector `θ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrientDecideModel<T = f64> {
    pub session_heads: Vec<SessionHead<T>>,
    /// One head set per subgraph kind.
    pub temporal: Vec<Vec<TemporalHead<T>>>,
    pub global: Vec<GlobalHead<T>>,
    pub nulls: Vec<Mat<T>>,
    pub gru: GruParams<T>,
    pub theta: Mat<T>,
    pub lookback: [usize; 3],
    pub null_policy: NullPolicy,
}

impl<T: Copy> ParamTree<T> for OrientDecideModel<T> {
    type Of<U: Copy> = OrientDecideModel<U>;
    fn map<U: Copy>(&self, f: &mut dyn FnMut(T) -> U) -> OrientDecideModel<U> {
        OrientDecideModel {
            session_heads: self.session_heads.map(f),
            temporal: self.temporal.map(f),
            global: self.global.map(f),
            nulls: self.nulls.map(f),
            gru: self.gru.map(f),
            theta: self.theta.map(f),
            lookback: self.lookback,
            null_policy: self.null_policy,
        }
    }
}

impl OrientDecideModel<f64> {
    pub fn init<R: Rng + ?Sized>(cfg: OrientConfig, rng: &mut R) -> Self {
        let h1 = cfg.heads * cfg.d1;
        let h2 = cfg.heads * cfg.d2;
        let h3 = cfg.heads * cfg.d3;
        Self {
            session_heads: (0..cfg.heads)
                .map(|_| SessionHead::init(EVENT_FEATURES, cfg.d1, rng))
                .collect(),
            temporal: (0..3)
                .map(|_| (0..cfg.heads).map(|_| TemporalHead::init(h1, cfg.d2, rng)).collect())
                .collect(),
            global: (0..cfg.heads).map(|_| GlobalHead::init(h2, cfg.d3, rng)).collect(),
            nulls: (0..3).map(|_| Mat::zeros(h2, 1)).collect(),
            gru: GruParams::init(h3, cfg.hidden, rng),
            theta: Mat::glorot(1, cfg.hidden + CANDIDATE_FEATURES, rng),
            lookback: cfg.lookback,
            null_policy: cfg.null_policy,
        }
    }

    pub fn hidden_dim(&self) -> usize {
        self.gru.hidden_dim()
    }

    /// Advances the judgment state on one event graph. Quiet ticks leave the
    /// state untouched and return `None`.
    pub fn step(&self, state: &mut JudgmentState, graph: &EventGraph) -> Result<Option<Judgment>, OrientError> {
        if graph.is_empty() {
            return Ok(None);
        }
        if state.h.len() != self.hidden_dim() {
            state.h = vec![0.0; self.hidden_dim()];
        }
        let mut h2: [Option<Vec<f64>>; 3] = [None, None, None];
        for session in &graph.sessions {
            let k = session.subgraph.index();
            let h1 = intra_session_gat(&self.session_heads, session)?.output;
            let hist = &mut state.history[k];
            hist.insert(0, h1);
            hist.truncate(self.lookback[k] + 1);
            h2[k] = Some(cross_session_gat(&self.temporal[k], hist, self.lookback[k])?.output);
        }
        let nulls = [
            self.nulls[0].data.clone(),
            self.nulls[1].data.clone(),
            self.nulls[2].data.clone(),
        ];
        let (att, kinds) = cross_subgraph_gat(&self.global, &h2, &nulls, self.null_policy)?;
        let heads = att.weights.len() as f64;
        let evidence = graph
            .sessions
            .iter()
            .map(|s| {
                let pos = kinds.iter().position(|&k| k == s.subgraph).unwrap();
                Evidence {
                    subgraph: s.subgraph,
                    tick: s.tick,
                    nodes: s.nodes(),
                    weight: att.weights.iter().map(|w| w[pos]).sum::<f64>() / heads,
                }
            })
            .collect();
        state.h = self.gru.step(&att.output, &state.h);
        state.last_tick = Some(graph.tick);
        Ok(Some(Judgment {
            h_t: state.h.clone(),
            embedding: att.output,
            evidence,
        }))
    }

    pub fn rank(&self, h_t: &[f64], candidates: &[InterventionCandidate]) -> Result<Vec<RankedCandidate>, OrientError> {
        rank_candidates(h_t, candidates, &self.theta.data)
    }
}

/// Rolling per-subgraph session states (most recent first) and the GRU
/// hidden state.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct JudgmentState {
    pub history: [Vec<Vec<f64>>; 3],
    pub h: Vec<f64>,
    pub last_tick: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Judgment {
    pub h_t: Vec<f64>,
    /// Subgraph-level event embedding fed to the GRU.
    pub embedding: Vec<f64>,
    pub evidence: Vec<Evidence>,
}

/// Gradient descent on [`decision_loss`] in `θ`.
pub fn fit_theta(
    states: &[Vec<f64>],
    labels: &[bool],
    theta0: &[f64],
    lambda: f64,
    lr: f64,
    epochs: usize,
) -> Result<(Vec<f64>, Vec<f64>), OrientError> {
    let mut theta = theta0.to_vec();
    let mut curve = Vec::with_capacity(epochs);
    for _ in 0..epochs {
        let tape = crate::nnblocks::Tape::new();
        let vars = tape.vars(&theta);
        let loss = decision_loss(states, labels, &vars, lambda)?;
        curve.push(loss.value());
        let g = tape.gradient(loss).wrt_all(&vars);
        for (t, g) in theta.iter_mut().zip(g) {
            *t -= lr * g;
        }
    }
    Ok((theta, curve))
}
