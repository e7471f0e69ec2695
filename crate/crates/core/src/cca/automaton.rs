use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::CcaError;
use crate::netcore::ElementKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleClass {
    Stationary,
    Periodic,
    Chaotic,
    Complex,
}

/// One automaton cell. `neighborhood` is ordered; `None` marks a missing
/// neighbor at a free boundary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CcaUnit {
    pub id: usize,
    pub kind: ElementKind,
    pub position: Vec<f64>,
    pub neighborhood: Vec<Option<usize>>,
    pub rule_class: RuleClass,
    pub gamma: f64,
}

/// Scalar state of every unit at one step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CcaStateField {
    pub states: Vec<f64>,
}

impl CcaStateField {
    pub fn new(states: Vec<f64>) -> Self {
        Self { states }
    }

    /// Fraction of units in each discrete state `0..n_states` (states are
    /// rounded and clamped into range).
    pub fn occupancy(&self, n_states: usize) -> Vec<f64> {
        let mut p = vec![0.0; n_states];
        if self.states.is_empty() || n_states == 0 {
            return p;
        }
        for &s in &self.states {
            let k = (s.round().max(0.0) as usize).min(n_states - 1);
            p[k] += 1.0;
        }
        let n = self.states.len() as f64;
        p.iter_mut().for_each(|v| *v /= n);
        p
    }
}

/// Fraction of steps that `unit` spends in each discrete state.
pub fn unit_occupancy(history: &[CcaStateField], unit: usize, n_states: usize) -> Vec<f64> {
    CcaStateField::new(history.iter().map(|f| f.states[unit]).collect()).occupancy(n_states)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    Cyclic,
    Free,
}

/// Ring neighborhoods `[i - r, .., i - 1, i + 1, .., i + r]`.
pub fn ring_neighborhoods(n: usize, radius: usize, boundary: Boundary) -> Vec<Vec<Option<usize>>> {
    (0..n)
        .map(|i| {
            let offsets = (1..=radius)
                .rev()
                .map(|d| -(d as isize))
                .chain((1..=radius).map(|d| d as isize));
            offsets
                .map(|o| {
                    let j = i as isize + o;
                    match boundary {
                        Boundary::Cyclic => Some(j.rem_euclid(n as isize) as usize),
                        Boundary::Free => (0..n as isize).contains(&j).then_some(j as usize),
                    }
                })
                .collect()
        })
        .collect()
}

/// Units on a ring with the given neighborhoods.
pub fn ring_units(
    n: usize,
    radius: usize,
    boundary: Boundary,
    kind: ElementKind,
    rule_class: RuleClass,
    gamma: f64,
) -> Vec<CcaUnit> {
    ring_neighborhoods(n, radius, boundary)
        .into_iter()
        .enumerate()
        .map(|(id, neighborhood)| CcaUnit {
            id,
            kind,
            position: vec![id as f64],
            neighborhood,
            rule_class,
            gamma,
        })
        .collect()
}

/// Local update `s_i' = f(s_i, s_N(i), γ)`. Missing neighbors are `None`.
pub trait Rule: Sync {
    fn apply(&self, own: f64, neighbors: &[Option<f64>], gamma: f64) -> f64;
}

pub struct IdentityRule;

impl Rule for IdentityRule {
    fn apply(&self, own: f64, _: &[Option<f64>], _: f64) -> f64 {
        own
    }
}

/// Binary majority over the unit and its present neighbors; ties keep the
/// current state.
pub struct MajorityRule;

impl Rule for MajorityRule {
    fn apply(&self, own: f64, neighbors: &[Option<f64>], _: f64) -> f64 {
        let present: Vec<f64> = std::iter::once(own)
            .chain(neighbors.iter().flatten().copied())
            .collect();
        let ones = present.iter().filter(|&&s| s >= 0.5).count();
        let zeros = present.len() - ones;
        match ones.cmp(&zeros) {
            std::cmp::Ordering::Greater => 1.0,
            std::cmp::Ordering::Less => 0.0,
            std::cmp::Ordering::Equal => own,
        }
    }
}

/// Wolfram elementary rule on `[left, right]` neighborhoods; a missing
/// neighbor reads as 0.
pub struct ElementaryRule(pub u8);

impl Rule for ElementaryRule {
    fn apply(&self, own: f64, neighbors: &[Option<f64>], _: f64) -> f64 {
        let bit = |s: Option<f64>| usize::from(s.unwrap_or(0.0) >= 0.5);
        let l = bit(neighbors.first().copied().flatten());
        let r = bit(neighbors.get(1).copied().flatten());
        let idx = 4 * l + 2 * bit(Some(own)) + r;
        f64::from((self.0 >> idx) & 1)
    }
}

/// Diffusively coupled logistic maps: `(1 - ε) g(s) + ε mean g(s_N)` with
/// `g(s) = γ s (1 - s)`.
pub struct CoupledLogisticRule {
    pub epsilon: f64,
}

impl Rule for CoupledLogisticRule {
    fn apply(&self, own: f64, neighbors: &[Option<f64>], gamma: f64) -> f64 {
        let g = |s: f64| gamma * s * (1.0 - s);
        let present: Vec<f64> = neighbors.iter().flatten().map(|&s| g(s)).collect();
        if present.is_empty() {
            return g(own);
        }
        let mean = present.iter().sum::<f64>() / present.len() as f64;
        (1.0 - self.epsilon) * g(own) + self.epsilon * mean
    }
}

/// One synchronous update: every unit reads only the previous field.
pub fn step_discrete(
    field: &CcaStateField,
    units: &[CcaUnit],
    rule: &dyn Rule,
    gamma: f64,
) -> Result<CcaStateField, CcaError> {
    if units.len() != field.states.len() {
        return Err(CcaError::DimensionMismatch {
            expected: units.len(),
            got: field.states.len(),
        });
    }
    if !gamma.is_finite() {
        return Err(CcaError::InvalidArgument(format!(
            "control parameter {gamma} is not finite"
        )));
    }
    let n = units.len();
    let mut next = Vec::with_capacity(n);
    let mut buf = Vec::new();
    for (i, u) in units.iter().enumerate() {
        buf.clear();
        for nb in &u.neighborhood {
            match nb {
                Some(j) if *j >= n => {
                    return Err(CcaError::InvalidNeighbor {
                        unit: u.id,
                        neighbor: *j,
                    })
                }
                Some(j) => buf.push(Some(field.states[*j])),
                None => buf.push(None),
            }
        }
        let s = rule.apply(field.states[i], &buf, gamma);
        if !s.is_finite() {
            return Err(CcaError::NonFinite { unit: u.id });
        }
        next.push(s);
    }
    Ok(CcaStateField::new(next))
}

/// Runs `steps` updates and returns the history including the initial field.
pub fn evolve(
    initial: CcaStateField,
    units: &[CcaUnit],
    rule: &dyn Rule,
    gamma: f64,
    steps: usize,
) -> Result<Vec<CcaStateField>, CcaError> {
    let mut history = Vec::with_capacity(steps + 1);
    history.push(initial);
    for _ in 0..steps {
        let next = step_discrete(history.last().unwrap(), units, rule, gamma)?;
        history.push(next);
    }
    Ok(history)
}

pub const DEFAULT_WINDOW: usize = 64;
/// Per-step change rate above which a cycle-free trajectory is chaotic.
pub const CHAOS_CHANGE_RATE: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub class: RuleClass,
    pub period: Option<usize>,
    /// Mean fraction of units that change state per step in the window.
    pub change_rate: f64,
}

/// Classifies the last `window` fields: stationary if identical, periodic
/// with the smallest period `≤ window / 2`, otherwise chaotic when the
/// change rate exceeds [`CHAOS_CHANGE_RATE`] and complex below it.
pub fn classify_trajectory(history: &[CcaStateField], window: usize) -> Result<Classification, CcaError> {
    if window < 2 || history.len() < window {
        return Err(CcaError::HistoryTooShort {
            needed: window.max(2),
            got: history.len(),
        });
    }
    let w = &history[history.len() - window..];
    let steps = window - 1;
    let changed: usize = w
        .windows(2)
        .map(|p| p[0].states.iter().zip(&p[1].states).filter(|(a, b)| a != b).count())
        .sum();
    let units = w[0].states.len().max(1);
    let change_rate = changed as f64 / (steps * units) as f64;
    if w.iter().all(|f| f.states == w[0].states) {
        return Ok(Classification {
            class: RuleClass::Stationary,
            period: Some(1),
            change_rate,
        });
    }
    for p in 2..=window / 2 {
        if (p..window).all(|t| w[t].states == w[t - p].states) {
            return Ok(Classification {
                class: RuleClass::Periodic,
                period: Some(p),
                change_rate,
            });
        }
    }
    let class = if change_rate > CHAOS_CHANGE_RATE {
        RuleClass::Chaotic
    } else {
        RuleClass::Complex
    };
    Ok(Classification {
        class,
        period: None,
        change_rate,
    })
}

/// One `step<TAB>unit<TAB>state` line per record, step-major.
pub fn trajectory_dump(history: &[CcaStateField]) -> String {
    let mut out = String::from("step\tunit\tstate\n");
    for (t, f) in history.iter().enumerate() {
        for (u, s) in f.states.iter().enumerate() {
            writeln!(out, "{t}\t{u}\t{s}").unwrap();
        }
    }
    out
}

/// Shannon entropy `-Σ p log p` of a normalized distribution.
pub fn negative_entropy(p: &[f64]) -> Result<f64, CcaError> {
    let total: f64 = p.iter().sum();
    if p.is_empty() || p.iter().any(|&v| !(v >= 0.0)) || (total - 1.0).abs() > 1e-9 {
        return Err(CcaError::Unnormalized(total));
    }
    Ok(p.iter()
        .filter(|&&v| v > 0.0)
        .map(|&v| -v * v.ln())
        .sum::<f64>()
        .max(0.0))
}

/// `log n - entropy`: 0 for uniform, `log n` for one-hot.
pub fn orderliness(p: &[f64]) -> Result<f64, CcaError> {
    Ok((p.len() as f64).ln() - negative_entropy(p)?)
}
