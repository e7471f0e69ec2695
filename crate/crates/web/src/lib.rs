//! Browser demo over `brain-core`.
//!
//! Every export takes plain numbers and returns a JSON string, so the page
//! needs no bindings beyond `wasm-bindgen`'s generated glue.

use brain_core::cca::{
    classify_trajectory, evolve, ring_units, Boundary, CcaError, CcaStateField, ElementaryRule, RuleClass,
};
use brain_core::netcore::{CsrMatrix, ElementKind};
use brain_core::resilience::cascade::sample_er;
use brain_core::resilience::{
    critical_point, effective_state, hysteresis_sweep, linspace, reduce_1d, steady_state, CouplingFn, DynamicsSpec,
    PercolationOptions, PercolationProblem, ResilienceError, SelfDynamics, SteadyStateOptions,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use wasm_bindgen::prelude::*;

pub const MAX_NODES: usize = 5000;
pub const MAX_CELLS: usize = 400;
pub const MAX_STEPS: usize = 400;

#[derive(Debug, thiserror::Error)]
pub enum DemoError {
    #[error(transparent)]
    Resilience(#[from] ResilienceError),
    #[error(transparent)]
    Automaton(#[from] CcaError),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

fn check(ok: bool, msg: impl FnOnce() -> String) -> Result<(), DemoError> {
    if ok {
        Ok(())
    } else {
        Err(DemoError::InvalidArgument(msg()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Branches {
    pub param: Vec<f64>,
    /// Giant component of the first layer, sweeping upward from collapse.
    pub up: Vec<f64>,
    /// Same, sweeping downward from full occupation.
    pub down: Vec<f64>,
    pub critical: Option<f64>,
}

/// Both hysteresis branches of `layers` identical ER layers over the mean
/// degree range `[from, to]`.
pub fn sweep_branches(
    layers: usize,
    from: f64,
    to: f64,
    points: usize,
    q: f64,
    phi: f64,
) -> Result<Branches, DemoError> {
    check((1..=4).contains(&layers), || {
        format!("layers must be 1..=4, got {layers}")
    })?;
    check((2..=200).contains(&points), || {
        format!("points must be 2..=200, got {points}")
    })?;
    check(from >= 0.0 && to > from, || {
        format!("need 0 <= from < to, got [{from}, {to}]")
    })?;
    let make = |c: f64| PercolationProblem::erdos_renyi(&vec![c; layers], q, phi);
    let opts = PercolationOptions::default();
    let values = linspace(from, to, points);
    let h = hysteresis_sweep(make, &values, opts)?;
    let alive = |s: &[f64]| s.iter().all(|&v| v > brain_core::resilience::COLLAPSE_THRESHOLD);
    let critical = match (h.down.first(), h.down.last()) {
        (Some(lo), Some(hi)) if !alive(&lo.s) && alive(&hi.s) => Some(critical_point(make, from, to, 1e-3, opts)?),
        _ => None,
    };
    Ok(Branches {
        param: h.up.iter().map(|p| p.param).collect(),
        up: h.up.iter().map(|p| p.s[0]).collect(),
        down: h.down.iter().map(|p| p.s[0]).collect(),
        critical,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Reduction {
    pub beta_eff: f64,
    pub reduced: f64,
    pub x_eff: f64,
    pub mean: f64,
    /// Full steady state, sorted ascending.
    pub states: Vec<f64>,
}

/// Mutualistic dynamics on a sampled ER graph, full network against its
/// one-dimensional reduction.
pub fn reduce_er(nodes: usize, mean_degree: f64, seed: u64) -> Result<Reduction, DemoError> {
    check((2..=MAX_NODES).contains(&nodes), || {
        format!("nodes must be 2..={MAX_NODES}, got {nodes}")
    })?;
    check(mean_degree > 0.0 && mean_degree < nodes as f64, || {
        format!("bad mean degree {mean_degree}")
    })?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t: Vec<(usize, usize, f64)> = sample_er(nodes, mean_degree, &mut rng)
        .iter()
        .enumerate()
        .flat_map(|(i, nb)| nb.iter().map(move |&j| (i, j, 1.0)))
        .collect();
    t.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
    t.dedup_by(|a, b| a.0 == b.0 && a.1 == b.1);
    let spec = DynamicsSpec::new(
        SelfDynamics::Mutualistic { b: 0.1, c: 1.0, k: 5.0 },
        CouplingFn::Saturating { d: 5.0 },
        CsrMatrix::from_triplets(nodes, nodes, &t),
    )?;
    let opts = SteadyStateOptions {
        tol: 1e-8,
        ..Default::default()
    };
    let red = reduce_1d(&spec)?;
    let full = steady_state(&spec, &vec![1.0; nodes], opts)?;
    let reduced = red.steady_state(1.0, opts)?.x[0];
    let mut states = full.x.clone();
    states.sort_by(f64::total_cmp);
    Ok(Reduction {
        beta_eff: red.beta_eff,
        reduced,
        x_eff: effective_state(&spec, &full.x),
        mean: full.x.iter().sum::<f64>() / nodes as f64,
        states,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Evolution {
    /// One row of 0/1 cells per step, initial row first.
    pub rows: Vec<Vec<u8>>,
    pub class: RuleClass,
    pub period: Option<usize>,
    pub change_rate: f64,
}

/// Elementary automaton on a cyclic ring from a random initial row.
pub fn evolve_ring(cells: usize, rule: u8, steps: usize, seed: u64) -> Result<Evolution, DemoError> {
    check((3..=MAX_CELLS).contains(&cells), || {
        format!("cells must be 3..={MAX_CELLS}, got {cells}")
    })?;
    check((2..=MAX_STEPS).contains(&steps), || {
        format!("steps must be 2..={MAX_STEPS}, got {steps}")
    })?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let init = CcaStateField::new((0..cells).map(|_| f64::from(u8::from(rng.random_bool(0.5)))).collect());
    let units = ring_units(
        cells,
        1,
        Boundary::Cyclic,
        ElementKind::Enterprise,
        RuleClass::Complex,
        0.0,
    );
    let history = evolve(init, &units, &ElementaryRule(rule), 0.0, steps)?;
    let c = classify_trajectory(&history, (steps + 1).min(64))?;
    Ok(Evolution {
        rows: history
            .iter()
            .map(|f| f.states.iter().map(|&s| u8::from(s >= 0.5)).collect())
            .collect(),
        class: c.class,
        period: c.period,
        change_rate: c.change_rate,
    })
}

fn to_js<T: Serialize>(r: Result<T, DemoError>) -> Result<String, JsValue> {
    let v = r.map_err(|e| JsValue::from_str(&e.to_string()))?;
    serde_json::to_string(&v).map_err(|e| JsValue::from_str(&e.to_string()))
}

#[wasm_bindgen(js_name = sweep)]
pub fn sweep_js(layers: usize, from: f64, to: f64, points: usize, q: f64, phi: f64) -> Result<String, JsValue> {
    to_js(sweep_branches(layers, from, to, points, q, phi))
}

#[wasm_bindgen(js_name = reduce)]
pub fn reduce_js(nodes: usize, mean_degree: f64, seed: u32) -> Result<String, JsValue> {
    to_js(reduce_er(nodes, mean_degree, seed.into()))
}

#[wasm_bindgen(js_name = automaton)]
pub fn automaton_js(cells: usize, rule: u8, steps: usize, seed: u32) -> Result<String, JsValue> {
    to_js(evolve_ring(cells, rule, steps, seed.into()))
}
