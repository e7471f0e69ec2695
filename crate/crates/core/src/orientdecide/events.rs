use serde::{Deserialize, Serialize};

use super::OrientError;
use crate::observe::SituationSummary;

/// Event node types, each with its own transform in the session attention.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    /// P: elevated activity spreading into a node.
    Propagation,
    /// R: a downstream node exposed through supply links.
    Resource,
    /// F: a node whose density crossed the threshold.
    Failure,
    /// C: a downstream node exposed through a dependency coupling.
    Coupling,
}

impl EventKind {
    pub const ALL: [EventKind; 4] = [
        EventKind::Propagation,
        EventKind::Resource,
        EventKind::Failure,
        EventKind::Coupling,
    ];

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubgraphKind {
    Current,
    Source,
    Target,
}

impl SubgraphKind {
    pub const ALL: [SubgraphKind; 3] = [SubgraphKind::Current, SubgraphKind::Source, SubgraphKind::Target];

    pub fn index(self) -> usize {
        self as usize
    }
}

/// Width of [`EventNode::features`]: `[contribution, density, coupling, 1]`.
pub const EVENT_FEATURES: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventNode {
    pub node: usize,
    pub kind: EventKind,
    pub features: Vec<f64>,
}

/// An h-session: the events of one subgraph at one tick.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub subgraph: SubgraphKind,
    pub tick: u64,
    pub events: Vec<EventNode>,
}

impl Session {
    /// Initial session state: mean of its event features.
    pub fn initial_state(&self) -> Vec<f64> {
        let mut acc = vec![0.0; EVENT_FEATURES];
        for e in &self.events {
            for (a, f) in acc.iter_mut().zip(&e.features) {
                *a += f;
            }
        }
        let n = self.events.len().max(1) as f64;
        acc.into_iter().map(|a| a / n).collect()
    }

    pub fn nodes(&self) -> Vec<usize> {
        self.events.iter().map(|e| e.node).collect()
    }
}

/// Current, source and target sessions joined at the current session,
/// which is the anchor. An empty graph means a quiet tick.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventGraph {
    pub tick: u64,
    pub sessions: Vec<Session>,
}

impl EventGraph {
    pub fn is_empty(&self) -> bool {
        self.sessions.is_empty()
    }

    pub fn session(&self, kind: SubgraphKind) -> Option<&Session> {
        self.sessions.iter().find(|s| s.subgraph == kind)
    }

    pub fn anchor(&self) -> Option<&Session> {
        self.session(SubgraphKind::Current)
    }
}

/// Per-node inputs to event detection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeSignals {
    /// Density relative to uniform, `N * P_i`.
    pub contribution: Vec<f64>,
    pub density: Vec<f64>,
    /// Strongest dependency coupling incident on each node.
    pub coupling: Vec<f64>,
}

impl NodeSignals {
    pub fn from_summary(summary: &SituationSummary, coupling: &[f64]) -> Result<Self, OrientError> {
        let n = summary.p.len();
        if coupling.len() != n {
            return Err(OrientError::Dimension {
                expected: n,
                got: coupling.len(),
            });
        }
        Ok(Self {
            contribution: summary.p.iter().map(|p| p * n as f64).collect(),
            density: summary.p.clone(),
            coupling: coupling.to_vec(),
        })
    }

    fn features(&self, i: usize) -> Vec<f64> {
        vec![self.contribution[i], self.density[i], self.coupling[i], 1.0]
    }
}

/// Threshold detector.
///
/// - current: nodes with contribution above `threshold` (failure events)
/// - source: other nodes with an out-link into a current node and
///   contribution above `threshold / 2` (propagation events)
/// - target: remaining nodes reached by an out-link from a current node and
///   contribution above `threshold / 2`; coupling events when the node has a
///   positive coupling, resource events otherwise
///
/// `out_links[i]` lists the successors of node `i`.
pub fn build_event_graph(
    signals: &NodeSignals,
    out_links: &[Vec<usize>],
    threshold: f64,
    tick: u64,
) -> Result<EventGraph, OrientError> {
    let n = signals.contribution.len();
    for len in [signals.density.len(), signals.coupling.len(), out_links.len()] {
        if len != n {
            return Err(OrientError::Dimension { expected: n, got: len });
        }
    }
    if let Some(&j) = out_links.iter().flatten().find(|&&j| j >= n) {
        return Err(OrientError::InvalidArgument(format!("link to missing node {j}")));
    }
    let c = &signals.contribution;
    let current: Vec<usize> = (0..n).filter(|&i| c[i] > threshold).collect();
    if current.is_empty() {
        return Ok(EventGraph {
            tick,
            sessions: Vec::new(),
        });
    }
    let is_current = |i: usize| c[i] > threshold;
    let elevated = |i: usize| !is_current(i) && c[i] > threshold / 2.0;
    let source: Vec<usize> = (0..n)
        .filter(|&j| elevated(j) && out_links[j].iter().any(|&k| is_current(k)))
        .collect();
    let mut target: Vec<usize> = current
        .iter()
        .flat_map(|&i| out_links[i].iter().copied())
        .filter(|&j| elevated(j) && !source.contains(&j))
        .collect();
    target.sort_unstable();
    target.dedup();

    let session = |subgraph, nodes: &[usize], kind: &dyn Fn(usize) -> EventKind| Session {
        subgraph,
        tick,
        events: nodes
            .iter()
            .map(|&i| EventNode {
                node: i,
                kind: kind(i),
                features: signals.features(i),
            })
            .collect(),
    };
    let mut sessions = vec![session(SubgraphKind::Current, &current, &|_| EventKind::Failure)];
    if !source.is_empty() {
        sessions.push(session(SubgraphKind::Source, &source, &|_| EventKind::Propagation));
    }
    if !target.is_empty() {
        sessions.push(session(SubgraphKind::Target, &target, &|i| {
            if signals.coupling[i] > 0.0 {
                EventKind::Coupling
            } else {
                EventKind::Resource
            }
        }));
    }
    Ok(EventGraph { tick, sessions })
}
