//! Three attention levels: events inside a session, a session's history
//! across ticks, and the current/source/target subgraphs.
//!
//! Every level scores with `σ(a · [q ⊕ k])` and normalises the sigmoid
//! scores to sum to one.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::events::{EventKind, Session, SubgraphKind};
use super::OrientError;
use crate::nnblocks::{dot, Activation, Mat, ParamTree, Real};

#[derive(Debug, Clone, PartialEq)]
pub struct Attention<T = f64> {
    /// One weight vector per head.
    pub weights: Vec<Vec<T>>,
    /// Head outputs concatenated.
    pub output: Vec<T>,
}

fn normalized_sigmoid<T: Real>(scores: &[T]) -> Vec<T> {
    let s: Vec<T> = scores.iter().map(|x| x.sigmoid()).collect();
    let mut total = s[0];
    for &x in &s[1..] {
        total = total + x;
    }
    s.into_iter().map(|x| x / total).collect()
}

fn weighted_sum<T: Real>(weights: &[T], values: &[Vec<T>]) -> Vec<T> {
    let mut acc: Vec<T> = values[0].iter().map(|&v| v * weights[0]).collect();
    for (w, v) in weights.iter().zip(values).skip(1) {
        for (a, &x) in acc.iter_mut().zip(v) {
            *a = *a + x * *w;
        }
    }
    acc
}

fn score<T: Real>(attention: &Mat<T>, q: &[T], k: &[T]) -> T {
    let a = attention.as_slice();
    dot(&a[..q.len()], q) + dot(&a[q.len()..], k)
}

/// Session-level head with one transform per event kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionHead<T = f64> {
    pub session: Mat<T>,
    pub kinds: Vec<Mat<T>>,
    pub attention: Mat<T>,
    pub activation: Activation,
}

impl<T: Copy> ParamTree<T> for SessionHead<T> {
    type Of<U: Copy> = SessionHead<U>;
    fn map<U: Copy>(&self, f: &mut dyn FnMut(T) -> U) -> SessionHead<U> {
        SessionHead {
            session: self.session.map(f),
            kinds: self.kinds.map(f),
            attention: self.attention.map(f),
            activation: self.activation,
        }
    }
}

impl SessionHead<f64> {
    pub fn init<R: Rng + ?Sized>(input: usize, output: usize, rng: &mut R) -> Self {
        Self {
            session: Mat::glorot(output, input, rng),
            kinds: EventKind::ALL.iter().map(|_| Mat::glorot(output, input, rng)).collect(),
            attention: Mat::glorot(2 * output, 1, rng),
            activation: Activation::Tanh,
        }
    }
}

/// Attention of the session node over its events; output
/// `⊕_k act(Σ_i a_i W_kind(i) f_i)`.
pub fn intra_session_gat<T: Real>(heads: &[SessionHead<T>], session: &Session) -> Result<Attention<T>, OrientError> {
    if session.events.is_empty() {
        return Err(OrientError::EmptySession(session.subgraph));
    }
    if heads.is_empty() {
        return Err(OrientError::InvalidArgument("no attention heads".into()));
    }
    let anchor = heads[0].attention.as_slice()[0];
    let h0: Vec<T> = session.initial_state().into_iter().map(|x| anchor.lift(x)).collect();
    let feats: Vec<Vec<T>> = session
        .events
        .iter()
        .map(|e| e.features.iter().map(|&x| anchor.lift(x)).collect())
        .collect();
    let mut weights = Vec::with_capacity(heads.len());
    let mut output = Vec::new();
    for h in heads {
        let q = h.session.mul_vec(&h0);
        let vals: Vec<Vec<T>> = session
            .events
            .iter()
            .zip(&feats)
            .map(|(e, f)| h.kinds[e.kind.index()].mul_vec(f))
            .collect();
        let scores: Vec<T> = vals.iter().map(|v| score(&h.attention, &q, v)).collect();
        let w = normalized_sigmoid(&scores);
        output.extend(h.activation.apply_all(&weighted_sum(&w, &vals)));
        weights.push(w);
    }
    Ok(Attention { weights, output })
}

/// Temporal head: query from the current state, keys and values from the
/// lagged states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemporalHead<T = f64> {
    pub query: Mat<T>,
    pub key: Mat<T>,
    pub value: Mat<T>,
    pub attention: Mat<T>,
}

impl<T: Copy> ParamTree<T> for TemporalHead<T> {
    type Of<U: Copy> = TemporalHead<U>;
    fn map<U: Copy>(&self, f: &mut dyn FnMut(T) -> U) -> TemporalHead<U> {
        TemporalHead {
            query: self.query.map(f),
            key: self.key.map(f),
            value: self.value.map(f),
            attention: self.attention.map(f),
        }
    }
}

impl TemporalHead<f64> {
    pub fn init<R: Rng + ?Sized>(input: usize, output: usize, rng: &mut R) -> Self {
        Self {
            query: Mat::glorot(output, input, rng),
            key: Mat::glorot(output, input, rng),
            value: Mat::glorot(output, input, rng),
            attention: Mat::glorot(2 * output, 1, rng),
        }
    }
}

/// Attention over lags `0..=lookback` of one subgraph's session states.
/// `history[0]` is the current state, `history[t]` the state `t` ticks ago;
/// lags beyond the recorded history are skipped.
pub fn cross_session_gat<T: Real>(
    heads: &[TemporalHead<T>],
    history: &[Vec<T>],
    lookback: usize,
) -> Result<Attention<T>, OrientError> {
    if history.is_empty() {
        return Err(OrientError::InvalidArgument("session history is empty".into()));
    }
    if heads.is_empty() {
        return Err(OrientError::InvalidArgument("no attention heads".into()));
    }
    let lags = &history[..history.len().min(lookback + 1)];
    let mut weights = Vec::with_capacity(heads.len());
    let mut output = Vec::new();
    for h in heads {
        let q = h.query.mul_vec(&lags[0]);
        let scores: Vec<T> = lags
            .iter()
            .map(|x| score(&h.attention, &q, &h.key.mul_vec(x)))
            .collect();
        let w = normalized_sigmoid(&scores);
        let vals: Vec<Vec<T>> = lags.iter().map(|x| h.value.mul_vec(x)).collect();
        output.extend(weighted_sum(&w, &vals));
        weights.push(w);
    }
    Ok(Attention { weights, output })
}

/// Subgraph-level head; one transform shared by query and keys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalHead<T = f64> {
    pub transform: Mat<T>,
    pub attention: Mat<T>,
}

impl<T: Copy> ParamTree<T> for GlobalHead<T> {
    type Of<U: Copy> = GlobalHead<U>;
    fn map<U: Copy>(&self, f: &mut dyn FnMut(T) -> U) -> GlobalHead<U> {
        GlobalHead {
            transform: self.transform.map(f),
            attention: self.attention.map(f),
        }
    }
}

impl GlobalHead<f64> {
    pub fn init<R: Rng + ?Sized>(input: usize, output: usize, rng: &mut R) -> Self {
        Self {
            transform: Mat::glorot(output, input, rng),
            attention: Mat::glorot(2 * output, 1, rng),
        }
    }
}

/// Treatment of absent subgraphs in [`cross_subgraph_gat`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NullPolicy {
    /// Drop absent subgraphs; weights renormalise over the rest.
    #[default]
    Mask,
    /// Substitute the learned null embedding and attend to it.
    Embed,
}

/// Attention from the current subgraph over all three subgraphs. `h2` is
/// indexed by [`SubgraphKind::index`]; `nulls` holds one embedding per kind.
/// The returned weights list only the subgraphs attended to, in kind order.
pub fn cross_subgraph_gat<T: Real>(
    heads: &[GlobalHead<T>],
    h2: &[Option<Vec<T>>; 3],
    nulls: &[Vec<T>; 3],
    policy: NullPolicy,
) -> Result<(Attention<T>, Vec<SubgraphKind>), OrientError> {
    if heads.is_empty() {
        return Err(OrientError::InvalidArgument("no attention heads".into()));
    }
    let mut kinds = Vec::new();
    let mut inputs: Vec<&[T]> = Vec::new();
    for kind in SubgraphKind::ALL {
        match (&h2[kind.index()], policy) {
            (Some(v), _) => {
                kinds.push(kind);
                inputs.push(v);
            }
            (None, NullPolicy::Embed) => {
                kinds.push(kind);
                inputs.push(&nulls[kind.index()]);
            }
            (None, NullPolicy::Mask) => {}
        }
    }
    if kinds.first() != Some(&SubgraphKind::Current) {
        return Err(OrientError::EmptySession(SubgraphKind::Current));
    }
    let mut weights = Vec::with_capacity(heads.len());
    let mut output = Vec::new();
    for h in heads {
        let vals: Vec<Vec<T>> = inputs.iter().map(|x| h.transform.mul_vec(x)).collect();
        let scores: Vec<T> = vals.iter().map(|v| score(&h.attention, &vals[0], v)).collect();
        let w = normalized_sigmoid(&scores);
        output.extend(weighted_sum(&w, &vals));
        weights.push(w);
    }
    Ok((Attention { weights, output }, kinds))
}
