use rand::Rng;
use serde::{Deserialize, Serialize};

use super::CcaError;
use crate::nnblocks::{flatten, gradient_of, lift, sgd_step, Mat, ParamTree, Real, Tape};

/// Sign convention of the Hamiltonian flow.
///
/// `Canonical`: `dv/dt = ∂H/∂s`, `ds/dt = -∂H/∂v` (energy conserving).
/// `Literal`: `dv/dt = ∂H/∂s`, `ds/dt = +∂H/∂v`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HamiltonianMode {
    #[default]
    Canonical,
    Literal,
}

/// Scalar energy over positions `v` and states `s` of equal dimension.
pub trait Energy {
    fn energy(&self, v: &[f64], s: &[f64]) -> f64;
    /// `(∂H/∂v, ∂H/∂s)`.
    fn gradient(&self, v: &[f64], s: &[f64]) -> (Vec<f64>, Vec<f64>);
}

/// `½ (|v|² + |s|²)`.
pub struct QuadraticEnergy;

impl Energy for QuadraticEnergy {
    fn energy(&self, v: &[f64], s: &[f64]) -> f64 {
        0.5 * v.iter().chain(s).map(|x| x * x).sum::<f64>()
    }
    fn gradient(&self, v: &[f64], s: &[f64]) -> (Vec<f64>, Vec<f64>) {
        (v.to_vec(), s.to_vec())
    }
}

pub struct ConstantEnergy(pub f64);

impl Energy for ConstantEnergy {
    fn energy(&self, _: &[f64], _: &[f64]) -> f64 {
        self.0
    }
    fn gradient(&self, v: &[f64], s: &[f64]) -> (Vec<f64>, Vec<f64>) {
        (vec![0.0; v.len()], vec![0.0; s.len()])
    }
}

/// `H(z) = w2 · tanh(W1 z + b1)` with `z = [v; s]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpEnergy<T = f64> {
    pub w1: Mat<T>,
    pub b1: Mat<T>,
    pub w2: Mat<T>,
}

impl<T: Copy> ParamTree<T> for MlpEnergy<T> {
    type Of<U: Copy> = MlpEnergy<U>;
    fn map<U: Copy>(&self, f: &mut dyn FnMut(T) -> U) -> MlpEnergy<U> {
        MlpEnergy {
            w1: self.w1.map(f),
            b1: self.b1.map(f),
            w2: self.w2.map(f),
        }
    }
}

impl MlpEnergy<f64> {
    pub fn init<R: Rng + ?Sized>(dim: usize, hidden: usize, rng: &mut R) -> Self {
        Self {
            w1: Mat::glorot(hidden, 2 * dim, rng),
            b1: Mat::zeros(hidden, 1),
            w2: Mat::glorot(1, hidden, rng),
        }
    }
}

impl<T: Real> MlpEnergy<T> {
    pub fn dim(&self) -> usize {
        self.w1.cols / 2
    }

    fn pre(&self, z: &[T]) -> Vec<T> {
        self.w1
            .mul_vec(z)
            .into_iter()
            .zip(&self.b1.data)
            .map(|(a, &b)| a + b)
            .collect()
    }

    pub fn energy_of(&self, z: &[T]) -> T {
        let a = self.pre(z);
        let mut acc = self.w2.data[0] * a[0].tanh();
        for k in 1..a.len() {
            acc = acc + self.w2.data[k] * a[k].tanh();
        }
        acc
    }

    /// `∇_z H = W1ᵀ (w2 ∘ (1 - tanh²(W1 z + b1)))`.
    pub fn grad_of(&self, z: &[T]) -> Vec<T> {
        let a = self.pre(z);
        let inner: Vec<T> = a
            .iter()
            .zip(&self.w2.data)
            .map(|(&ak, &wk)| {
                let t = ak.tanh();
                wk * (-(t * t) + 1.0)
            })
            .collect();
        self.w1.tmul_vec(&inner)
    }
}

impl Energy for MlpEnergy<f64> {
    fn energy(&self, v: &[f64], s: &[f64]) -> f64 {
        let z: Vec<f64> = v.iter().chain(s).copied().collect();
        self.energy_of(&z)
    }
    fn gradient(&self, v: &[f64], s: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let z: Vec<f64> = v.iter().chain(s).copied().collect();
        let g = self.grad_of(&z);
        let (gv, gs) = g.split_at(v.len());
        (gv.to_vec(), gs.to_vec())
    }
}

fn flow(h: &dyn Energy, mode: HamiltonianMode, v: &[f64], s: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let (gv, gs) = h.gradient(v, s);
    let ds = match mode {
        HamiltonianMode::Canonical => gv.iter().map(|g| -g).collect(),
        HamiltonianMode::Literal => gv,
    };
    (gs, ds)
}

/// One implicit-midpoint step (symplectic for the canonical flow), solved
/// by fixed-point iteration.
pub fn hamiltonian_step(
    h: &dyn Energy,
    mode: HamiltonianMode,
    v: &[f64],
    s: &[f64],
    dt: f64,
) -> Result<(Vec<f64>, Vec<f64>), CcaError> {
    if !(dt > 0.0) {
        return Err(CcaError::InvalidArgument(format!("step size {dt} must be positive")));
    }
    if v.len() != s.len() {
        return Err(CcaError::DimensionMismatch {
            expected: v.len(),
            got: s.len(),
        });
    }
    let (dv, ds) = flow(h, mode, v, s);
    let mut v1: Vec<f64> = v.iter().zip(&dv).map(|(a, d)| a + dt * d).collect();
    let mut s1: Vec<f64> = s.iter().zip(&ds).map(|(a, d)| a + dt * d).collect();
    for _ in 0..100 {
        let vm: Vec<f64> = v.iter().zip(&v1).map(|(a, b)| 0.5 * (a + b)).collect();
        let sm: Vec<f64> = s.iter().zip(&s1).map(|(a, b)| 0.5 * (a + b)).collect();
        let (dv, ds) = flow(h, mode, &vm, &sm);
        if dv.iter().chain(&ds).any(|g| !g.is_finite()) {
            return Err(CcaError::NonFiniteGradient);
        }
        let nv: Vec<f64> = v.iter().zip(&dv).map(|(a, d)| a + dt * d).collect();
        let ns: Vec<f64> = s.iter().zip(&ds).map(|(a, d)| a + dt * d).collect();
        let change = nv
            .iter()
            .zip(&v1)
            .chain(ns.iter().zip(&s1))
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        v1 = nv;
        s1 = ns;
        if change <= 1e-15 * (1.0 + v1.iter().chain(&s1).fold(0.0f64, |m, x| m.max(x.abs()))) {
            break;
        }
    }
    Ok((v1, s1))
}

/// Observed phase-space sample `(v, s, dv/dt, ds/dt)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HnnSample {
    pub v: Vec<f64>,
    pub s: Vec<f64>,
    pub dv: Vec<f64>,
    pub ds: Vec<f64>,
}

/// Batch-mean residual loss.
///
/// Canonical: `|∂H/∂s - dv|² + |∂H/∂v + ds|²`.
/// Literal: `|∂H/∂s - dv| - |∂H/∂v - ds|` (unsquared norms, may be negative).
pub fn hnn_loss(h: &dyn Energy, batch: &[HnnSample], mode: HamiltonianMode) -> Result<f64, CcaError> {
    if batch.is_empty() {
        return Err(CcaError::InvalidArgument("empty batch".into()));
    }
    let total: f64 = batch
        .iter()
        .map(|b| {
            let (gv, gs) = h.gradient(&b.v, &b.s);
            residual_terms(&gv, &gs, b, mode, |x| x, f64::sqrt)
        })
        .sum();
    Ok(total / batch.len() as f64)
}

fn residual_terms<T: Copy + std::ops::Add<Output = T> + std::ops::Sub<Output = T> + std::ops::Mul<Output = T>>(
    gv: &[T],
    gs: &[T],
    b: &HnnSample,
    mode: HamiltonianMode,
    konst: impl Fn(f64) -> T,
    sqrt: impl Fn(T) -> T,
) -> T {
    let sq = |a: T| a * a;
    let mut first = konst(0.0);
    for (g, d) in gs.iter().zip(&b.dv) {
        first = first + sq(*g - konst(*d));
    }
    let mut second = konst(0.0);
    for (g, d) in gv.iter().zip(&b.ds) {
        second = match mode {
            HamiltonianMode::Canonical => second + sq(*g + konst(*d)),
            HamiltonianMode::Literal => second + sq(*g - konst(*d)),
        };
    }
    match mode {
        HamiltonianMode::Canonical => first + second,
        HamiltonianMode::Literal => sqrt(first) - sqrt(second),
    }
}

/// [`hnn_loss`] for an MLP energy over any [`Real`], so parameter gradients
/// can be taken through the input gradient.
pub fn hnn_loss_mlp<T: Real>(p: &MlpEnergy<T>, batch: &[HnnSample], mode: HamiltonianMode) -> T {
    let anchor = p.w2.data[0];
    let mut total = anchor * 0.0;
    for b in batch {
        let z: Vec<T> = b.v.iter().chain(&b.s).map(|&x| anchor.lift(x)).collect();
        let g = p.grad_of(&z);
        let (gv, gs) = g.split_at(b.v.len());
        total = total + residual_terms(gv, gs, b, mode, |c| anchor.lift(c), |x: T| x.sqrt());
    }
    total / batch.len() as f64
}

/// Plain gradient descent on [`hnn_loss_mlp`]; returns the final
/// parameters and the loss before each step.
pub fn train_hnn(
    init: &MlpEnergy,
    batch: &[HnnSample],
    mode: HamiltonianMode,
    lr: f64,
    steps: usize,
) -> Result<(MlpEnergy, Vec<f64>), CcaError> {
    if batch.is_empty() {
        return Err(CcaError::InvalidArgument("empty batch".into()));
    }
    let mut p = init.clone();
    let mut losses = Vec::with_capacity(steps);
    for _ in 0..steps {
        let tape = Tape::new();
        let lp = lift(&p, &tape);
        let loss = hnn_loss_mlp(&lp, batch, mode);
        let grad = gradient_of(&lp, &tape.gradient(loss));
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(CcaError::NonFiniteGradient);
        }
        losses.push(loss.value());
        p = sgd_step(&p, &grad, lr);
    }
    debug_assert_eq!(flatten(&p).len(), flatten(init).len());
    Ok((p, losses))
}

/// Harmonic-oscillator samples with canonical derivatives `(s, -v)`.
pub fn harmonic_dataset<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<HnnSample> {
    (0..n)
        .map(|_| {
            let v = rng.random_range(-1.0..1.0);
            let s = rng.random_range(-1.0..1.0);
            HnnSample {
                v: vec![v],
                s: vec![s],
                dv: vec![s],
                ds: vec![-v],
            }
        })
        .collect()
}
