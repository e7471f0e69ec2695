use serde::{Deserialize, Serialize};

use super::ResilienceError;
use crate::netcore::CsrMatrix;

/// States beyond this magnitude abort integration.
pub const BLOW_UP: f64 = 1e9;

/// Self-dynamics `f(x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SelfDynamics {
    /// `-a x`
    Linear { a: f64 },
    /// `x (1 - x / K)`
    Logistic { k: f64 },
    /// `B + x (1 - x / K)(x / C - 1)`: logistic growth with an Allee threshold `C`.
    Mutualistic { b: f64, c: f64, k: f64 },
}

impl SelfDynamics {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            Self::Linear { a } => -a * x,
            Self::Logistic { k } => x * (1.0 - x / k),
            Self::Mutualistic { b, c, k } => b + x * (1.0 - x / k) * (x / c - 1.0),
        }
    }
}

/// Pairwise coupling `H(x_i, x_j)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CouplingFn {
    Zero,
    Constant {
        value: f64,
    },
    /// `x_j`
    Linear,
    /// `x_i x_j / (D + x_j)`
    Saturating {
        d: f64,
    },
}

impl CouplingFn {
    pub fn eval(&self, xi: f64, xj: f64) -> f64 {
        match *self {
            Self::Zero => 0.0,
            Self::Constant { value } => value,
            Self::Linear => xj,
            Self::Saturating { d } => xi * xj / (d + xj),
        }
    }
}

/// `dx_i/dt = f(x_i) + Σ_j A_ij H(x_i, x_j)`; `A` may be asymmetric.
#[derive(Debug, Clone, PartialEq)]
pub struct DynamicsSpec {
    pub f: SelfDynamics,
    pub h: CouplingFn,
    pub adjacency: CsrMatrix,
}

impl DynamicsSpec {
    pub fn new(f: SelfDynamics, h: CouplingFn, adjacency: CsrMatrix) -> Result<Self, ResilienceError> {
        if adjacency.rows() != adjacency.cols() {
            return Err(ResilienceError::InvalidArgument("adjacency must be square".into()));
        }
        if adjacency.iter().any(|(_, _, w)| !(w >= 0.0 && w.is_finite())) {
            return Err(ResilienceError::InvalidArgument(
                "adjacency must be finite and non-negative".into(),
            ));
        }
        Ok(Self { f, h, adjacency })
    }

    pub fn node_count(&self) -> usize {
        self.adjacency.rows()
    }

    pub fn rhs(&self, x: &[f64]) -> Vec<f64> {
        (0..x.len())
            .map(|i| {
                let coupling: f64 = self.adjacency.row(i).map(|(j, a)| a * self.h.eval(x[i], x[j])).sum();
                self.f.eval(x[i]) + coupling
            })
            .collect()
    }

    fn check_state(&self, x0: &[f64]) -> Result<(), ResilienceError> {
        if x0.len() != self.node_count() {
            return Err(ResilienceError::InvalidArgument(format!(
                "state has {} entries for {} nodes",
                x0.len(),
                self.node_count()
            )));
        }
        Ok(())
    }
}

pub(crate) fn rk4(rhs: impl Fn(&[f64]) -> Vec<f64>, x: &[f64], dt: f64) -> Vec<f64> {
    let shift = |k: &[f64], s: f64| -> Vec<f64> { x.iter().zip(k).map(|(a, b)| a + s * b).collect() };
    let k1 = rhs(x);
    let k2 = rhs(&shift(&k1, dt / 2.0));
    let k3 = rhs(&shift(&k2, dt / 2.0));
    let k4 = rhs(&shift(&k3, dt));
    (0..x.len())
        .map(|i| x[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn last(&self) -> &[f64] {
        self.states.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

/// Fixed-step RK4 from `t = 0` to `t_end`. The step is `t_end / n` with
/// `n = round(t_end / dt)`, so the trajectory lands exactly on `t_end`.
pub fn integrate_dynamics(spec: &DynamicsSpec, x0: &[f64], t_end: f64, dt: f64) -> Result<Trajectory, ResilienceError> {
    spec.check_state(x0)?;
    integrate_with(|x| spec.rhs(x), x0, t_end, dt)
}

pub(crate) fn integrate_with(
    rhs: impl Fn(&[f64]) -> Vec<f64>,
    x0: &[f64],
    t_end: f64,
    dt: f64,
) -> Result<Trajectory, ResilienceError> {
    if !(dt > 0.0) || !(t_end >= 0.0) {
        return Err(ResilienceError::InvalidArgument(format!(
            "need dt > 0 and t_end >= 0, got {dt}, {t_end}"
        )));
    }
    let steps = ((t_end / dt).round() as usize).max(usize::from(t_end > 0.0));
    let h = if steps > 0 { t_end / steps as f64 } else { 0.0 };
    let mut times = vec![0.0];
    let mut states = vec![x0.to_vec()];
    let mut x = x0.to_vec();
    for s in 1..=steps {
        x = rk4(&rhs, &x, h);
        let t = s as f64 * h;
        if x.iter().any(|v| !v.is_finite() || v.abs() > BLOW_UP) {
            return Err(ResilienceError::BlowUp { time: t });
        }
        times.push(t);
        states.push(x.clone());
    }
    Ok(Trajectory { times, states })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadyStateOptions {
    /// Convergence threshold on `‖dx/dt‖∞`.
    pub tol: f64,
    pub dt: f64,
    pub max_time: f64,
    /// Kick used for the stability probe, relative to `max(|x_i|, 1)`.
    pub kick: f64,
}

impl Default for SteadyStateOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            dt: 0.01,
            max_time: 1e4,
            kick: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteadyState {
    pub x: Vec<f64>,
    /// Whether `‖dx/dt‖∞ < tol` was reached before `max_time`.
    pub stationary: bool,
    /// Whether both `+kick` and `-kick` perturbations re-converge to `x`.
    pub stable: bool,
    pub residual: f64,
    pub time: f64,
}

struct Relaxed {
    x: Vec<f64>,
    converged: bool,
    residual: f64,
    time: f64,
}

fn relax(rhs: &impl Fn(&[f64]) -> Vec<f64>, x0: &[f64], opts: &SteadyStateOptions) -> Result<Relaxed, ResilienceError> {
    let mut x = x0.to_vec();
    let mut t = 0.0;
    let norm = |v: &[f64]| v.iter().fold(0.0f64, |m, a| m.max(a.abs()));
    let mut residual = norm(&rhs(&x));
    while residual >= opts.tol && t < opts.max_time {
        x = rk4(rhs, &x, opts.dt);
        t += opts.dt;
        if x.iter().any(|v| !v.is_finite() || v.abs() > BLOW_UP) {
            return Err(ResilienceError::BlowUp { time: t });
        }
        residual = norm(&rhs(&x));
    }
    Ok(Relaxed {
        x,
        converged: residual < opts.tol,
        residual,
        time: t,
    })
}

/// Integrates until the residual drops below `tol`, then probes stability
/// with `±kick` perturbations, relative to `max(|x_i|, 1)`.
///
/// A bounded run that never settles is reported as non-stationary rather
/// than as an error; divergence is an error.
pub fn steady_state(spec: &DynamicsSpec, x0: &[f64], opts: SteadyStateOptions) -> Result<SteadyState, ResilienceError> {
    spec.check_state(x0)?;
    steady_state_with(|x| spec.rhs(x), x0, opts)
}

pub(crate) fn steady_state_with(
    rhs: impl Fn(&[f64]) -> Vec<f64>,
    x0: &[f64],
    opts: SteadyStateOptions,
) -> Result<SteadyState, ResilienceError> {
    if !(opts.tol > 0.0 && opts.dt > 0.0 && opts.max_time > 0.0) {
        return Err(ResilienceError::InvalidArgument(
            "steady-state options must be positive".into(),
        ));
    }
    let base = relax(&rhs, x0, &opts)?;
    let mut stable = base.converged;
    if stable {
        for sign in [1.0, -1.0] {
            let kicked: Vec<f64> = base
                .x
                .iter()
                .map(|&v| v + sign * opts.kick * v.abs().max(1.0))
                .collect();
            let kick_size = kicked
                .iter()
                .zip(&base.x)
                .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            let back = match relax(&rhs, &kicked, &opts) {
                Ok(r) => r,
                Err(_) => {
                    stable = false;
                    break;
                }
            };
            let dist = back
                .x
                .iter()
                .zip(&base.x)
                .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            if !back.converged || dist > 0.1 * kick_size {
                stable = false;
                break;
            }
        }
    }
    Ok(SteadyState {
        x: base.x,
        stationary: base.converged,
        stable,
        residual: base.residual,
        time: base.time,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ring(n: usize) -> CsrMatrix {
        let t: Vec<_> = (0..n)
            .flat_map(|i| [(i, (i + 1) % n, 1.0), ((i + 1) % n, i, 1.0)])
            .collect();
        CsrMatrix::from_triplets(n, n, &t)
    }

    #[test]
    fn decay_to_zero() {
        let spec = DynamicsSpec::new(SelfDynamics::Linear { a: 1.0 }, CouplingFn::Zero, ring(5)).unwrap();
        let ss = steady_state(&spec, &[3.0, -1.0, 0.5, 2.0, 7.0], Default::default()).unwrap();
        assert!(ss.x.iter().all(|v| v.abs() < 1e-9));
        assert!(ss.stationary && ss.stable);
    }

    #[test]
    fn constant_coupling_gives_degree() {
        let a = CsrMatrix::from_triplets(3, 3, &[(0, 1, 1.0), (1, 0, 1.0), (0, 2, 1.0), (2, 0, 1.0)]);
        let spec = DynamicsSpec::new(SelfDynamics::Linear { a: 1.0 }, CouplingFn::Constant { value: 1.0 }, a).unwrap();
        let ss = steady_state(&spec, &[0.0; 3], Default::default()).unwrap();
        for (v, k) in ss.x.iter().zip([2.0, 1.0, 1.0]) {
            assert!((v - k).abs() < 1e-9);
        }
    }

    #[test]
    fn logistic_reaches_capacity() {
        let spec = DynamicsSpec::new(
            SelfDynamics::Logistic { k: 1.0 },
            CouplingFn::Zero,
            CsrMatrix::zeros(1, 1),
        )
        .unwrap();
        let tr = integrate_dynamics(&spec, &[0.1], 30.0, 0.01).unwrap();
        let analytic = 1.0 / (1.0 + 9.0 * (-30.0f64).exp());
        assert!((tr.last()[0] - analytic).abs() < 1e-10);
        assert!((tr.last()[0] - 1.0).abs() < 1e-6);
        assert_eq!(*tr.times.last().unwrap(), 30.0);
    }

    #[test]
    fn growth_blows_up() {
        let spec = DynamicsSpec::new(
            SelfDynamics::Linear { a: -1.0 },
            CouplingFn::Zero,
            CsrMatrix::zeros(1, 1),
        )
        .unwrap();
        assert!(matches!(
            steady_state(&spec, &[1.0], Default::default()),
            Err(ResilienceError::BlowUp { .. })
        ));
        assert!(matches!(
            integrate_dynamics(&spec, &[1.0], 100.0, 0.1),
            Err(ResilienceError::BlowUp { time }) if time > 20.0 && time < 21.0
        ));
    }

    #[test]
    fn fourth_order_convergence() {
        let spec = DynamicsSpec::new(
            SelfDynamics::Linear { a: 1.0 },
            CouplingFn::Zero,
            CsrMatrix::zeros(1, 1),
        )
        .unwrap();
        let err = |dt: f64| (integrate_dynamics(&spec, &[1.0], 1.0, dt).unwrap().last()[0] - (-1f64).exp()).abs();
        let ratio = err(0.1) / err(0.05);
        assert!((ratio - 16.0).abs() < 2.0, "{ratio}");
    }

    #[test]
    fn allee_unstable_threshold() {
        // b = 0: x = C is an unstable equilibrium between 0 and K.
        let spec = DynamicsSpec::new(
            SelfDynamics::Mutualistic { b: 0.0, c: 1.0, k: 5.0 },
            CouplingFn::Zero,
            CsrMatrix::zeros(1, 1),
        )
        .unwrap();
        let ss = steady_state(&spec, &[1.0], Default::default()).unwrap();
        assert!(ss.stationary && !ss.stable);
        let hi = steady_state(&spec, &[1.5], Default::default()).unwrap();
        assert!((hi.x[0] - 5.0).abs() < 1e-9 && hi.stable);
    }
}
