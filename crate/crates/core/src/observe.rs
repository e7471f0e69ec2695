//! Spatio-temporal situation awareness.
//!
//! A window of `k` frames over `N` nodes with `C_in` channels goes through a
//! gated temporal convolution (Z1), one degree-normalised graph convolution
//! (Z2), a second gated temporal convolution (Z3) and a dense head whose
//! softmax over nodes gives the density distribution `P`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::nnblocks::{
    glu, gradient_of, lift, log_softmax, sgd_step, softmax, Activation, DenseParams, Mat, ParamTree, Real, Tape,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ObserveError {
    #[error("window of {k} frames is too short for kernel {kt} (need {need})")]
    WindowTooShort { k: usize, kt: usize, need: usize },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("labels cover {got} nodes, window has {expected}")]
    LabelMismatch { expected: usize, got: usize },
    #[error("non-finite input at frame {frame}, node {node}")]
    NonFinite { frame: usize, node: usize },
    #[error("training diverged at epoch {epoch}: loss {loss}")]
    Diverged { epoch: usize, loss: f64 },
    #[error("record line {line}: {msg}")]
    Record { line: usize, msg: String },
}

/// Abort threshold for [`train_observe`].
pub const DIVERGENCE_LOSS: f64 = 1e6;
pub const DEFAULT_COUPLING_PENALTY: f64 = 0.1;

/// `k x N x C_in` frames.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotWindow {
    pub frames: Vec<Vec<Vec<f64>>>,
    pub timestamps: Vec<f64>,
}

impl SnapshotWindow {
    pub fn new(frames: Vec<Vec<Vec<f64>>>, timestamps: Vec<f64>) -> Result<Self, ObserveError> {
        if frames.is_empty() || frames[0].is_empty() || frames[0][0].is_empty() {
            return Err(ObserveError::Shape(
                "window needs at least one frame, node and channel".into(),
            ));
        }
        if timestamps.len() != frames.len() {
            return Err(ObserveError::Shape(format!(
                "{} timestamps for {} frames",
                timestamps.len(),
                frames.len()
            )));
        }
        let (n, c) = (frames[0].len(), frames[0][0].len());
        for (t, f) in frames.iter().enumerate() {
            if f.len() != n {
                return Err(ObserveError::Shape(format!(
                    "frame {t} has {} nodes, expected {n}",
                    f.len()
                )));
            }
            for (i, x) in f.iter().enumerate() {
                if x.len() != c {
                    return Err(ObserveError::Shape(format!(
                        "frame {t} node {i} has {} channels",
                        x.len()
                    )));
                }
                if x.iter().any(|v| !v.is_finite()) {
                    return Err(ObserveError::NonFinite { frame: t, node: i });
                }
            }
        }
        Ok(Self { frames, timestamps })
    }

    pub fn k(&self) -> usize {
        self.frames.len()
    }

    pub fn nodes(&self) -> usize {
        self.frames[0].len()
    }

    pub fn channels(&self) -> usize {
        self.frames[0][0].len()
    }
}

/// One `t, node_id, c_1..c_C [, label]` record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub t: f64,
    pub node: usize,
    pub values: Vec<f64>,
    pub label: Option<usize>,
}

/// Parses comma-separated records with `channels` value columns and an
/// optional trailing integer label. `#` lines are comments.
pub fn parse_records(text: &str, channels: usize) -> Result<Vec<Record>, ObserveError> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |msg: String| ObserveError::Record { line: n + 1, msg };
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        if cols.len() != channels + 2 && cols.len() != channels + 3 {
            return Err(err(format!(
                "expected {} or {} fields, got {}",
                channels + 2,
                channels + 3,
                cols.len()
            )));
        }
        let t = cols[0].parse().map_err(|e| err(format!("time: {e}")))?;
        let node = cols[1].parse().map_err(|e| err(format!("node id: {e}")))?;
        let values = cols[2..2 + channels]
            .iter()
            .map(|s| s.parse::<f64>().map_err(|e| err(format!("value: {e}"))))
            .collect::<Result<_, _>>()?;
        let label = match cols.get(2 + channels) {
            Some(s) => Some(s.parse().map_err(|e| err(format!("label: {e}")))?),
            None => None,
        };
        out.push(Record { t, node, values, label });
    }
    Ok(out)
}

/// Groups records by timestamp into a window over nodes `0..nodes`. Every
/// timestamp must carry every node exactly once. Returns the window and the
/// labels of the last frame, when all nodes have one.
pub fn window_from_records(
    records: &[Record],
    nodes: usize,
) -> Result<(SnapshotWindow, Option<Vec<usize>>), ObserveError> {
    let mut times: Vec<f64> = records.iter().map(|r| r.t).collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    let channels = records.first().map_or(0, |r| r.values.len());
    let mut frames = vec![vec![None; nodes]; times.len()];
    let mut labels = vec![None; nodes];
    for r in records {
        let f = times.binary_search_by(|t| t.total_cmp(&r.t)).unwrap();
        if r.node >= nodes || frames[f][r.node].is_some() {
            return Err(ObserveError::Shape(format!(
                "bad or repeated node {} at t={}",
                r.node, r.t
            )));
        }
        frames[f][r.node] = Some(r.values.clone());
        if f + 1 == times.len() {
            labels[r.node] = r.label;
        }
    }
    let frames = frames
        .into_iter()
        .enumerate()
        .map(|(f, row)| {
            row.into_iter()
                .enumerate()
                .map(|(i, v)| v.ok_or_else(|| ObserveError::Shape(format!("node {i} missing at t={}", times[f]))))
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<Vec<_>, _>>()?;
    if frames.iter().flatten().any(|v| v.len() != channels) {
        return Err(ObserveError::Shape("records disagree on channel count".into()));
    }
    let labels = labels.into_iter().collect::<Option<Vec<_>>>();
    Ok((SnapshotWindow::new(frames, times)?, labels))
}

/// `Â = D⁻¹ (A + I)` in row form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpatialGraph {
    rows: Vec<Vec<(usize, f64)>>,
}

impl SpatialGraph {
    /// Builds from a weighted edge list on `n` nodes; edges are treated as
    /// undirected.
    pub fn from_edges(n: usize, edges: &[(usize, usize, f64)]) -> Result<Self, ObserveError> {
        let mut dense = vec![vec![0.0; n]; n];
        for &(i, j, w) in edges {
            if i >= n || j >= n || !(w >= 0.0) {
                return Err(ObserveError::Shape(format!("bad edge ({i}, {j}, {w})")));
            }
            dense[i][j] += w;
            if i != j {
                dense[j][i] += w;
            }
        }
        let rows = dense
            .into_iter()
            .enumerate()
            .map(|(i, mut row)| {
                row[i] += 1.0;
                let d: f64 = row.iter().sum();
                row.into_iter()
                    .enumerate()
                    .filter(|&(_, w)| w != 0.0)
                    .map(|(j, w)| (j, w / d))
                    .collect()
            })
            .collect();
        Ok(Self { rows })
    }

    pub fn nodes(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }
}

/// Gated temporal convolution: `GLU(W_a x + b_a, W_b x + b_b)` over each
/// run of `K_t` consecutive frames, shared across nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemporalGlu<T = f64> {
    pub linear: DenseParams<T>,
    pub gate: DenseParams<T>,
}

impl<T: Copy> ParamTree<T> for TemporalGlu<T> {
    type Of<U: Copy> = TemporalGlu<U>;
    fn map<U: Copy>(&self, f: &mut dyn FnMut(T) -> U) -> TemporalGlu<U> {
        TemporalGlu {
            linear: self.linear.map(f),
            gate: self.gate.map(f),
        }
    }
}

impl<T: Real> TemporalGlu<T> {
    fn apply(&self, x: &[Vec<Vec<T>>], kt: usize) -> Vec<Vec<Vec<T>>> {
        let (k, n) = (x.len(), x[0].len());
        (0..=k - kt)
            .map(|t| {
                (0..n)
                    .map(|i| {
                        let stacked: Vec<T> = (t..t + kt).flat_map(|s| x[s][i].iter().copied()).collect();
                        glu(&self.linear.forward(&stacked), &self.gate.forward(&stacked))
                    })
                    .collect()
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObserveConfig {
    pub kt: usize,
    pub c_in: usize,
    pub c_h: usize,
    pub c_out: usize,
    pub classes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservePipeline<T = f64> {
    pub kt: usize,
    pub temporal1: TemporalGlu<T>,
    /// `C_h x C_h` spatial mixing weights.
    pub spatial: Mat<T>,
    pub temporal2: TemporalGlu<T>,
    /// `C_out -> 1` density score per node.
    pub density: DenseParams<T>,
    /// Node-state classifiers on pooled Z1 and Z3.
    pub head1: DenseParams<T>,
    pub head3: DenseParams<T>,
}

impl<T: Copy> ParamTree<T> for ObservePipeline<T> {
    type Of<U: Copy> = ObservePipeline<U>;
    fn map<U: Copy>(&self, f: &mut dyn FnMut(T) -> U) -> ObservePipeline<U> {
        ObservePipeline {
            kt: self.kt,
            temporal1: self.temporal1.map(f),
            spatial: self.spatial.map(f),
            temporal2: self.temporal2.map(f),
            density: self.density.map(f),
            head1: self.head1.map(f),
            head3: self.head3.map(f),
        }
    }
}

impl ObservePipeline<f64> {
    pub fn init<R: Rng + ?Sized>(cfg: ObserveConfig, rng: &mut R) -> Self {
        let tglu = |input: usize, out: usize, rng: &mut R| TemporalGlu {
            linear: DenseParams::init(cfg.kt * input, out, Activation::Identity, rng),
            gate: DenseParams::init(cfg.kt * input, out, Activation::Identity, rng),
        };
        Self {
            kt: cfg.kt,
            temporal1: tglu(cfg.c_in, cfg.c_h, rng),
            spatial: Mat::glorot(cfg.c_h, cfg.c_h, rng),
            temporal2: tglu(cfg.c_h, cfg.c_out, rng),
            density: DenseParams::init(cfg.c_out, 1, Activation::Identity, rng),
            head1: DenseParams::init(cfg.c_h, cfg.classes, Activation::Identity, rng),
            head3: DenseParams::init(cfg.c_out, cfg.classes, Activation::Identity, rng),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObserveOutputs<T = f64> {
    /// `(k-K_t+1) x N x C_h`
    pub z1: Vec<Vec<Vec<T>>>,
    /// `(k-K_t+1) x N x C_h`
    pub z2: Vec<Vec<Vec<T>>>,
    /// `(k-2K_t+2) x N x C_out`
    pub z3: Vec<Vec<Vec<T>>>,
    pub p: Vec<T>,
    pub class_logits1: Vec<Vec<T>>,
    pub class_logits3: Vec<Vec<T>>,
}

fn frame_mean<T: Real>(z: &[Vec<Vec<T>>], node: usize) -> Vec<T> {
    let mut acc = z[0][node].clone();
    for f in &z[1..] {
        for (a, &b) in acc.iter_mut().zip(&f[node]) {
            *a = *a + b;
        }
    }
    acc.into_iter().map(|a| a / z.len() as f64).collect()
}

pub fn forward<T: Real>(
    p: &ObservePipeline<T>,
    window: &SnapshotWindow,
    graph: &SpatialGraph,
) -> Result<ObserveOutputs<T>, ObserveError> {
    let (k, n, kt) = (window.k(), window.nodes(), p.kt);
    if kt == 0 || k + 1 < 2 * kt {
        return Err(ObserveError::WindowTooShort {
            k,
            kt,
            need: (2 * kt).saturating_sub(1),
        });
    }
    if graph.nodes() != n {
        return Err(ObserveError::Shape(format!(
            "graph has {} nodes, window {n}",
            graph.nodes()
        )));
    }
    if p.temporal1.linear.input_dim() != kt * window.channels() {
        return Err(ObserveError::Shape(format!(
            "pipeline expects {} input channels, window has {}",
            p.temporal1.linear.input_dim() / kt,
            window.channels()
        )));
    }
    let anchor = p.spatial.data[0];
    let x: Vec<Vec<Vec<T>>> = window
        .frames
        .iter()
        .map(|f| f.iter().map(|c| c.iter().map(|&v| anchor.lift(v)).collect()).collect())
        .collect();
    let z1 = p.temporal1.apply(&x, kt);
    let z2: Vec<Vec<Vec<T>>> = z1
        .iter()
        .map(|frame| {
            (0..n)
                .map(|i| {
                    let row = graph.row(i);
                    let mut agg: Vec<T> = frame[row[0].0].iter().map(|&v| v * row[0].1).collect();
                    for &(j, w) in &row[1..] {
                        for (a, &b) in agg.iter_mut().zip(&frame[j]) {
                            *a = *a + b * w;
                        }
                    }
                    p.spatial.mul_vec(&agg).into_iter().map(Real::relu).collect()
                })
                .collect()
        })
        .collect();
    let z3 = p.temporal2.apply(&z2, kt);
    let scores: Vec<T> = (0..n).map(|i| p.density.forward(&frame_mean(&z3, i))[0]).collect();
    let class_logits1 = (0..n).map(|i| p.head1.forward(&frame_mean(&z1, i))).collect();
    let class_logits3 = (0..n).map(|i| p.head3.forward(&frame_mean(&z3, i))).collect();
    Ok(ObserveOutputs {
        z1,
        z2,
        z3,
        p: softmax(&scores),
        class_logits1,
        class_logits3,
    })
}

/// Supervision for one window: a class per node and a target density
/// distribution over nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObserveLabels {
    pub classes: Vec<usize>,
    pub density: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SituationSummary {
    pub theta_z1: f64,
    pub theta_z3: f64,
    /// Density cross-entropy plus `penalty * q_eff_max`.
    pub theta_p: f64,
    pub q_eff_max: f64,
    pub p: Vec<f64>,
}

impl SituationSummary {
    pub fn total(&self) -> f64 {
        self.theta_z1 + self.theta_z3 + self.theta_p
    }
}

/// `q_eff(i) = q_i (1 - rank_i / (N-1))` where `rank_i` is the ascending
/// rank of `P_i`.
pub fn effective_coupling(p: &[f64], couplings: &[f64]) -> Vec<f64> {
    let n = p.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| p[a].total_cmp(&p[b]).then(a.cmp(&b)));
    let mut q = vec![0.0; n];
    for (rank, &i) in order.iter().enumerate() {
        let r = if n > 1 { rank as f64 / (n - 1) as f64 } else { 0.0 };
        q[i] = couplings[i] * (1.0 - r);
    }
    q
}

fn check_labels(n: usize, classes: usize, labels: &ObserveLabels, couplings: &[f64]) -> Result<(), ObserveError> {
    for len in [labels.classes.len(), labels.density.len(), couplings.len()] {
        if len != n {
            return Err(ObserveError::LabelMismatch { expected: n, got: len });
        }
    }
    if let Some(&c) = labels.classes.iter().find(|&&c| c >= classes) {
        return Err(ObserveError::Shape(format!("class {c} out of {classes}")));
    }
    Ok(())
}

fn losses<T: Real>(out: &ObserveOutputs<T>, labels: &ObserveLabels, couplings: &[f64], penalty: f64) -> (T, T, T, f64) {
    let n = out.p.len();
    let ce = |logits: &[Vec<T>]| {
        let mut acc = -log_softmax(&logits[0])[labels.classes[0]];
        for i in 1..n {
            acc = acc - log_softmax(&logits[i])[labels.classes[i]];
        }
        acc / n as f64
    };
    let (t1, t3) = (ce(&out.class_logits1), ce(&out.class_logits3));
    let pv: Vec<f64> = out.p.iter().map(|x| x.value()).collect();
    let q_max = effective_coupling(&pv, couplings).into_iter().fold(0.0, f64::max);
    let mut tp = out.p[0] * 0.0 + penalty * q_max;
    for i in 0..n {
        if labels.density[i] != 0.0 {
            tp = tp - out.p[i].ln() * labels.density[i];
        }
    }
    (t1, t3, tp, q_max)
}

/// Node-class cross-entropies (mean over nodes) on both heads, and the
/// density cross-entropy with the coupling penalty.
pub fn monitoring_losses(
    out: &ObserveOutputs,
    labels: &ObserveLabels,
    couplings: &[f64],
    penalty: f64,
) -> Result<SituationSummary, ObserveError> {
    let classes = out.class_logits1.first().map_or(0, Vec::len);
    check_labels(out.p.len(), classes, labels, couplings)?;
    let (theta_z1, theta_z3, theta_p, q_eff_max) = losses(out, labels, couplings, penalty);
    Ok(SituationSummary {
        theta_z1,
        theta_z3,
        theta_p,
        q_eff_max,
        p: out.p.clone(),
    })
}

/// Differentiable total loss for one window.
pub fn total_loss<T: Real>(
    p: &ObservePipeline<T>,
    window: &SnapshotWindow,
    graph: &SpatialGraph,
    labels: &ObserveLabels,
    couplings: &[f64],
    penalty: f64,
) -> Result<T, ObserveError> {
    let out = forward(p, window, graph)?;
    check_labels(out.p.len(), p.head1.output_dim(), labels, couplings)?;
    let (a, b, c, _) = losses(&out, labels, couplings, penalty);
    Ok(a + b + c)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainOptions {
    pub lr: f64,
    pub epochs: usize,
    pub penalty: f64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            lr: 0.05,
            epochs: 200,
            penalty: DEFAULT_COUPLING_PENALTY,
        }
    }
}

/// Full-batch gradient descent on the mean total loss. Returns the fitted
/// pipeline and the loss before each epoch.
pub fn train_observe(
    init: &ObservePipeline,
    data: &[(SnapshotWindow, ObserveLabels)],
    graph: &SpatialGraph,
    couplings: &[f64],
    opts: TrainOptions,
) -> Result<(ObservePipeline, Vec<f64>), ObserveError> {
    if data.is_empty() {
        return Err(ObserveError::Shape("no training windows".into()));
    }
    let mut p = init.clone();
    let mut curve = Vec::with_capacity(opts.epochs);
    for epoch in 0..opts.epochs {
        let tape = Tape::new();
        let lp = lift(&p, &tape);
        let mut total = None;
        for (w, l) in data {
            let li = total_loss(&lp, w, graph, l, couplings, opts.penalty)?;
            total = Some(match total {
                None => li,
                Some(t) => t + li,
            });
        }
        let total = total.unwrap() / data.len() as f64;
        let loss = total.value();
        if !loss.is_finite() || loss > DIVERGENCE_LOSS {
            return Err(ObserveError::Diverged { epoch, loss });
        }
        curve.push(loss);
        let grad = gradient_of(&lp, &tape.gradient(total));
        p = sgd_step(&p, &grad, opts.lr);
    }
    Ok((p, curve))
}

/// Fraction of nodes whose Z3-head argmax equals the label.
pub fn node_accuracy(
    p: &ObservePipeline,
    data: &[(SnapshotWindow, ObserveLabels)],
    graph: &SpatialGraph,
) -> Result<f64, ObserveError> {
    let (mut hit, mut total) = (0usize, 0usize);
    for (w, l) in data {
        let out = forward(p, w, graph)?;
        for (logits, &y) in out.class_logits3.iter().zip(&l.classes) {
            let arg = (0..logits.len())
                .max_by(|&a, &b| logits[a].total_cmp(&logits[b]))
                .unwrap();
            hit += usize::from(arg == y);
            total += 1;
        }
    }
    Ok(hit as f64 / total.max(1) as f64)
}
