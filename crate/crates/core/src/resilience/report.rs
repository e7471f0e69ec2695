use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::dynamics::{steady_state, CouplingFn, DynamicsSpec, SelfDynamics, SteadyStateOptions};
use super::interventions::{enumerate_interventions, percolate_network, InterventionCandidate};
use super::percolation::{critical_point, hysteresis_sweep, PercolationOptions, PercolationProblem};
use super::reduce::{effective_state, reduce_1d, Reduced1d};
use super::ResilienceError;
use crate::netcore::{build_supra_adjacency, IntraLayerOperator, MultilayerNetwork};

#[derive(Debug, Clone, PartialEq)]
pub struct AssessConfig {
    /// Occupation per layer; all ones when absent.
    pub phi: Option<Vec<f64>>,
    pub f: SelfDynamics,
    pub h: CouplingFn,
    /// Uniform initial state for the dynamics.
    pub x0: f64,
    pub budget: usize,
    pub percolation: PercolationOptions,
    pub steady: SteadyStateOptions,
}

impl Default for AssessConfig {
    fn default() -> Self {
        Self {
            phi: None,
            f: SelfDynamics::Mutualistic { b: 0.1, c: 1.0, k: 5.0 },
            h: CouplingFn::Saturating { d: 5.0 },
            x0: 5.0,
            budget: 3,
            percolation: PercolationOptions::default(),
            steady: SteadyStateOptions {
                tol: 1e-8,
                max_time: 500.0,
                ..SteadyStateOptions::default()
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResilienceReport {
    pub s: Vec<f64>,
    /// Giant-component node fraction over the whole network.
    pub total_s: f64,
    pub percolation_converged: bool,
    /// Uniform occupation below which the giant component collapses.
    pub critical_occupation: Option<f64>,
    pub steady_state: Vec<f64>,
    pub stationary: bool,
    pub stable: bool,
    /// `x_eff` of the full steady state.
    pub x_eff: Option<f64>,
    pub beta_eff: Option<f64>,
    /// Steady state of the reduced scalar dynamics.
    pub reduced_x_eff: Option<f64>,
    pub candidates: Vec<InterventionCandidate>,
}

/// Percolation, critical occupation, steady state on the supra-adjacency,
/// the 1-D reduction and intervention candidates for `net`.
pub fn assess(net: &MultilayerNetwork, cfg: &AssessConfig) -> Result<ResilienceReport, ResilienceError> {
    let m = net.layers().len();
    let phi = cfg.phi.clone().unwrap_or_else(|| vec![1.0; m]);
    let perc = percolate_network(net, &phi, cfg.percolation)?;
    let critical_occupation = match critical_point(
        |v| PercolationProblem::from_network(net, &phi.iter().map(|p| p * v).collect::<Vec<_>>()),
        0.0,
        1.0,
        1e-3,
        cfg.percolation,
    ) {
        Ok(v) => Some(v),
        Err(ResilienceError::NoTransition { .. }) => None,
        Err(e) => return Err(e),
    };
    let supra = build_supra_adjacency(net, &IntraLayerOperator::Identity)?;
    let spec = DynamicsSpec::new(cfg.f, cfg.h, supra.matrix)?;
    let n = spec.node_count();
    let ss = if n > 0 {
        steady_state(&spec, &vec![cfg.x0; n], cfg.steady)?
    } else {
        super::SteadyState {
            x: Vec::new(),
            stationary: true,
            stable: true,
            residual: 0.0,
            time: 0.0,
        }
    };
    let (x_eff, beta_eff, reduced_x_eff) = match reduce_1d(&spec) {
        Ok(r) => {
            let red = r.steady_state(cfg.x0, cfg.steady)?;
            (
                Some(effective_state(&spec, &ss.x)),
                Some(r.beta_eff),
                red.stationary.then_some(red.x[0]),
            )
        }
        Err(ResilienceError::EmptyNetwork) => (None, None, None),
        Err(e) => return Err(e),
    };
    let candidates = enumerate_interventions(net, &phi, cfg.budget.max(1), cfg.percolation)?;
    Ok(ResilienceReport {
        total_s: perc.fraction(),
        s: perc.s,
        percolation_converged: perc.converged,
        critical_occupation,
        steady_state: ss.x,
        stationary: ss.stationary,
        stable: ss.stable,
        x_eff,
        beta_eff,
        reduced_x_eff,
        candidates,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    /// Mean degree `c` of every layer.
    MeanDegree,
    /// Coupling `q` between every pair of layers.
    Coupling,
    /// Occupation `φ` of every layer.
    Occupation,
}

impl FromStr for SweepParam {
    type Err = ResilienceError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "c" | "mean_degree" => Ok(Self::MeanDegree),
            "q" | "coupling" => Ok(Self::Coupling),
            "phi" | "occupation" => Ok(Self::Occupation),
            other => Err(ResilienceError::InvalidArgument(format!(
                "unknown sweep parameter {other:?}"
            ))),
        }
    }
}

/// Erdős–Rényi multilayer system whose fixed values are overridden by the
/// swept parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErSweep {
    pub layers: usize,
    pub c: f64,
    pub q: f64,
    pub phi: f64,
}

impl ErSweep {
    pub fn problem(&self, param: SweepParam, v: f64) -> Result<PercolationProblem, ResilienceError> {
        let (c, q, phi) = match param {
            SweepParam::MeanDegree => (v, self.q, self.phi),
            SweepParam::Coupling => (self.c, v, self.phi),
            SweepParam::Occupation => (self.c, self.q, v),
        };
        PercolationProblem::erdos_renyi(&vec![c; self.layers.max(1)], q, phi)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    /// `up` or `down`.
    pub branch: String,
    pub param: f64,
    pub s: Vec<f64>,
    pub x_eff: f64,
    pub beta_eff: f64,
    pub converged: bool,
}

/// Hysteresis sweep with the reduced dynamics evaluated at every point.
///
/// `β_eff` is the mean over layers of the branching ratio of the randomly
/// thinned layer, `x c + 1` for occupation `x`; `x_eff` is the reduced
/// steady state from `x0` (NaN when it does not settle).
pub fn er_sweep_table(
    base: ErSweep,
    param: SweepParam,
    values: &[f64],
    f: SelfDynamics,
    h: CouplingFn,
    x0: f64,
    opts: PercolationOptions,
) -> Result<Vec<SweepRow>, ResilienceError> {
    let hyst = hysteresis_sweep(|v| base.problem(param, v), values, opts)?;
    let steady = SteadyStateOptions {
        tol: 1e-9,
        max_time: 1e3,
        ..SteadyStateOptions::default()
    };
    let mut rows = Vec::new();
    for (branch, points) in [("down", &hyst.down), ("up", &hyst.up)] {
        for p in points {
            let problem = base.problem(param, p.param)?;
            let beta_eff = problem
                .giant
                .iter()
                .zip(&p.x)
                .map(|(g, x)| x * (g.branching_ratio() - 1.0) + 1.0)
                .sum::<f64>()
                / p.x.len() as f64;
            let red = Reduced1d { f, h, beta_eff };
            let x_eff = match red.steady_state(x0, steady) {
                Ok(ss) if ss.stationary => ss.x[0],
                _ => f64::NAN,
            };
            rows.push(SweepRow {
                branch: branch.to_string(),
                param: p.param,
                s: p.s.clone(),
                x_eff,
                beta_eff,
                converged: p.converged,
            });
        }
    }
    Ok(rows)
}

/// Delimited table with a header row.
pub fn format_sweep_table(rows: &[SweepRow], delimiter: char) -> String {
    let layers = rows.first().map_or(0, |r| r.s.len());
    let mut header = vec!["branch".to_string(), "param".to_string()];
    header.extend((1..=layers).map(|i| format!("S_{i}")));
    header.extend(["x_eff", "beta_eff", "converged"].map(String::from));
    let d = delimiter.to_string();
    let mut out = header.join(&d);
    out.push('\n');
    for r in rows {
        let mut cells = vec![r.branch.clone(), format!("{}", r.param)];
        cells.extend(r.s.iter().map(|s| format!("{s:.6}")));
        cells.push(format!("{:.6}", r.x_eff));
        cells.push(format!("{:.6}", r.beta_eff));
        cells.push(r.converged.to_string());
        writeln!(out, "{}", cells.join(&d)).unwrap();
    }
    out
}
