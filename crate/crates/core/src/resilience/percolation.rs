use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::giant::GiantComponentFn;
use super::ResilienceError;
use crate::netcore::MultilayerNetwork;

/// Threshold below which a giant component counts as collapsed.
pub const COLLAPSE_THRESHOLD: f64 = 1e-3;

/// Interdependent percolation on `m` layers.
///
/// `coupling[j][i]` is `q_ji`, the fraction of layer-`i` nodes that depend
/// on a node of layer `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PercolationProblem {
    pub phi: Vec<f64>,
    pub giant: Vec<GiantComponentFn>,
    pub coupling: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PercolationOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub damping: f64,
}

impl Default for PercolationOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 200_000,
            damping: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PercolationSolution {
    /// Giant-component fraction `S_i = x_i g_i(x_i)` per layer.
    pub s: Vec<f64>,
    pub x: Vec<f64>,
    /// `y[j][i]`: occupation of layer `j` seen from its dependants in `i`.
    pub y: Vec<Vec<f64>>,
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
}

impl PercolationProblem {
    pub fn new(phi: Vec<f64>, giant: Vec<GiantComponentFn>, coupling: Vec<Vec<f64>>) -> Result<Self, ResilienceError> {
        let m = phi.len();
        if m == 0 {
            return Err(ResilienceError::InvalidProblem("no layers".into()));
        }
        if giant.len() != m || coupling.len() != m || coupling.iter().any(|r| r.len() != m) {
            return Err(ResilienceError::InvalidProblem(format!(
                "expected {m} layers throughout"
            )));
        }
        if let Some(p) = phi.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(ResilienceError::InvalidProblem(format!(
                "occupation {p} outside [0, 1]"
            )));
        }
        for (j, row) in coupling.iter().enumerate() {
            for (i, &q) in row.iter().enumerate() {
                if !(0.0..=1.0).contains(&q) || (i == j && q != 0.0) {
                    return Err(ResilienceError::InvalidProblem(format!(
                        "invalid coupling q[{j}][{i}] = {q}"
                    )));
                }
            }
        }
        Ok(Self { phi, giant, coupling })
    }

    /// Layers with Erdős–Rényi degrees and a uniform coupling `q` between
    /// every ordered pair of distinct layers.
    pub fn erdos_renyi(mean_degrees: &[f64], q: f64, phi: f64) -> Result<Self, ResilienceError> {
        let m = mean_degrees.len();
        let coupling = (0..m)
            .map(|j| (0..m).map(|i| if i == j { 0.0 } else { q }).collect())
            .collect();
        Self::new(
            vec![phi; m],
            mean_degrees.iter().map(|&c| GiantComponentFn::erdos_renyi(c)).collect(),
            coupling,
        )
    }

    /// Degree-distribution functionals and aggregate couplings read from an
    /// explicit network.
    pub fn from_network(net: &MultilayerNetwork, phi: &[f64]) -> Result<Self, ResilienceError> {
        let m = net.layers().len();
        if phi.len() != m {
            return Err(ResilienceError::InvalidProblem(format!(
                "expected {m} occupations, got {}",
                phi.len()
            )));
        }
        let giant = net
            .layers()
            .iter()
            .map(|l| GiantComponentFn::from_degrees(&l.degrees()))
            .collect();
        let coupling = (0..m)
            .map(|j| {
                (0..m)
                    .map(|i| if i == j { 0.0 } else { net.layer_coupling(j, i) })
                    .collect()
            })
            .collect();
        Self::new(phi.to_vec(), giant, coupling)
    }

    pub fn layer_count(&self) -> usize {
        self.phi.len()
    }

    pub fn with_phi(&self, phi: f64) -> Self {
        Self {
            phi: vec![phi; self.phi.len()],
            ..self.clone()
        }
    }
}

/// Solves the interdependent fixed point by damped iteration from `x = φ`.
pub fn solve_percolation(
    p: &PercolationProblem,
    opts: PercolationOptions,
) -> Result<PercolationSolution, ResilienceError> {
    let sol = iterate(p, opts, None)?;
    if sol.converged {
        Ok(sol)
    } else {
        Err(ResilienceError::NoConvergence {
            iterations: sol.iterations,
            residual: sol.residual,
        })
    }
}

/// Like [`solve_percolation`], but starts from `start` (warm start) when
/// given and reports non-convergence through the `converged` flag.
pub fn solve_percolation_from(
    p: &PercolationProblem,
    opts: PercolationOptions,
    start: Option<&PercolationSolution>,
) -> Result<PercolationSolution, ResilienceError> {
    iterate(p, opts, start)
}

fn iterate(
    p: &PercolationProblem,
    opts: PercolationOptions,
    start: Option<&PercolationSolution>,
) -> Result<PercolationSolution, ResilienceError> {
    if !(opts.tol > 0.0) || !(0.0..1.0).contains(&opts.damping) {
        return Err(ResilienceError::InvalidArgument(format!(
            "need tol > 0 and damping in [0, 1), got {} and {}",
            opts.tol, opts.damping
        )));
    }
    let m = p.layer_count();
    let (mut x, mut y) = match start {
        Some(s) if s.x.len() == m => (s.x.clone(), s.y.clone()),
        _ => (p.phi.clone(), (0..m).map(|j| vec![p.phi[j]; m]).collect::<Vec<_>>()),
    };
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        iterations += 1;
        let g: Vec<f64> = (0..m).map(|j| p.giant[j].eval(x[j])).collect();
        // factor[j][i]: survival factor that layer j imposes on layer i.
        let factor: Vec<Vec<f64>> = (0..m)
            .map(|j| {
                (0..m)
                    .map(|i| {
                        let q = p.coupling[j][i];
                        if i == j || q == 0.0 {
                            1.0
                        } else {
                            q * y[j][i] * g[j] - q + 1.0
                        }
                    })
                    .collect()
            })
            .collect();
        let new_x: Vec<f64> = (0..m)
            .map(|i| p.phi[i] * (0..m).map(|j| factor[j][i]).product::<f64>())
            .collect();
        // Cavity product: occupation of j excluding the factor from i.
        let new_y: Vec<Vec<f64>> = (0..m)
            .map(|j| {
                (0..m)
                    .map(|i| {
                        p.phi[j]
                            * (0..m)
                                .filter(|&k| k != i && k != j)
                                .map(|k| factor[k][j])
                                .product::<f64>()
                    })
                    .collect()
            })
            .collect();
        residual = 0.0;
        let a = opts.damping;
        for i in 0..m {
            residual = f64::max(residual, (new_x[i] - x[i]).abs());
            x[i] = a * x[i] + (1.0 - a) * new_x[i];
            for j in 0..m {
                residual = f64::max(residual, (new_y[j][i] - y[j][i]).abs());
                y[j][i] = a * y[j][i] + (1.0 - a) * new_y[j][i];
            }
        }
        if residual < opts.tol {
            break;
        }
    }
    let s = (0..m).map(|i| (x[i] * p.giant[i].eval(x[i])).clamp(0.0, 1.0)).collect();
    Ok(PercolationSolution {
        s,
        x,
        y,
        iterations,
        residual,
        converged: residual < opts.tol,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub param: f64,
    pub s: Vec<f64>,
    pub x: Vec<f64>,
    pub converged: bool,
}

/// Solves along `values` in order, warm-starting each point from the
/// previous solution; the first point starts from `x = φ`.
pub fn sweep<F>(make: F, values: &[f64], opts: PercolationOptions) -> Result<Vec<SweepPoint>, ResilienceError>
where
    F: Fn(f64) -> Result<PercolationProblem, ResilienceError>,
{
    let mut prev: Option<PercolationSolution> = None;
    let mut out = Vec::with_capacity(values.len());
    for &v in values {
        let p = make(v)?;
        let sol = solve_percolation_from(&p, opts, prev.as_ref())?;
        out.push(SweepPoint {
            param: v,
            s: sol.s.clone(),
            x: sol.x.clone(),
            converged: sol.converged,
        });
        prev = Some(sol);
    }
    Ok(out)
}

/// Upward and downward warm-started sweeps; both are listed in ascending
/// parameter order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hysteresis {
    pub up: Vec<SweepPoint>,
    pub down: Vec<SweepPoint>,
}

impl Hysteresis {
    /// Largest gap between the two branches in any layer.
    pub fn max_gap(&self) -> f64 {
        self.up
            .iter()
            .zip(&self.down)
            .flat_map(|(u, d)| u.s.iter().zip(&d.s).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max)
    }
}

pub fn hysteresis_sweep<F>(make: F, values: &[f64], opts: PercolationOptions) -> Result<Hysteresis, ResilienceError>
where
    F: Fn(f64) -> Result<PercolationProblem, ResilienceError> + Sync,
{
    let mut asc = values.to_vec();
    asc.sort_by(f64::total_cmp);
    let desc: Vec<f64> = asc.iter().rev().copied().collect();
    let (up, down) = rayon::join(|| sweep(&make, &asc, opts), || sweep(&make, &desc, opts));
    let mut down = down?;
    down.reverse();
    Ok(Hysteresis { up: up?, down })
}

/// Evenly spaced grid from `from` to `to` inclusive.
pub fn linspace(from: f64, to: f64, steps: usize) -> Vec<f64> {
    match steps {
        0 => Vec::new(),
        1 => vec![from],
        _ => (0..steps)
            .map(|k| from + (to - from) * k as f64 / (steps - 1) as f64)
            .collect(),
    }
}

/// Total giant-component fraction across layers.
pub fn total_giant(s: &[f64]) -> f64 {
    s.iter().sum::<f64>() / s.len().max(1) as f64
}

/// Bisection for the parameter value at which the giant component
/// collapses below [`COLLAPSE_THRESHOLD`], to within `tol`.
pub fn critical_point<F>(make: F, lo: f64, hi: f64, tol: f64, opts: PercolationOptions) -> Result<f64, ResilienceError>
where
    F: Fn(f64) -> Result<PercolationProblem, ResilienceError>,
{
    if !(tol > 0.0) || !(hi > lo) {
        return Err(ResilienceError::InvalidArgument(format!(
            "need tol > 0 and hi > lo, got [{lo}, {hi}]"
        )));
    }
    let alive = |v: f64| -> Result<bool, ResilienceError> {
        let sol = solve_percolation_from(&make(v)?, opts, None)?;
        Ok(total_giant(&sol.s) >= COLLAPSE_THRESHOLD)
    };
    let (mut a, mut b) = (lo, hi);
    let alive_a = alive(a)?;
    if alive_a == alive(b)? {
        return Err(ResilienceError::NoTransition { lo, hi });
    }
    while b - a > tol {
        let mid = 0.5 * (a + b);
        if alive(mid)? == alive_a {
            a = mid;
        } else {
            b = mid;
        }
    }
    Ok(0.5 * (a + b))
}

/// Sweeps evaluated independently (no warm start) in parallel.
pub fn cold_sweep<F>(make: F, values: &[f64], opts: PercolationOptions) -> Result<Vec<SweepPoint>, ResilienceError>
where
    F: Fn(f64) -> Result<PercolationProblem, ResilienceError> + Sync,
{
    values
        .par_iter()
        .map(|&v| {
            let sol = solve_percolation_from(&make(v)?, opts, None)?;
            Ok(SweepPoint {
                param: v,
                s: sol.s,
                x: sol.x,
                converged: sol.converged,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::resilience::giant::er_giant;

    fn opts() -> PercolationOptions {
        PercolationOptions::default()
    }

    #[test]
    fn single_layer_er() {
        let p = PercolationProblem::erdos_renyi(&[2.0], 0.0, 1.0).unwrap();
        let sol = solve_percolation(&p, opts()).unwrap();
        assert_eq!(sol.x, vec![1.0]);
        let mut s: f64 = 0.5;
        for _ in 0..10_000 {
            s = 1.0 - (-2.0 * s).exp();
        }
        assert!((sol.s[0] - s).abs() < 1e-12);
    }

    #[test]
    fn annihilation() {
        let p = PercolationProblem::erdos_renyi(&[3.0, 3.0], 0.5, 0.0).unwrap();
        assert_eq!(solve_percolation(&p, opts()).unwrap().s, vec![0.0, 0.0]);
    }

    #[test]
    fn partial_coupling_matches_pair_equations() {
        // Two layers, phi = (p1, 1): x2 = 1 - q (1 - p1 g1(x1)), x1 = p1 (1 - q (1 - g2(x2))).
        let (c, q, p1) = (3.0, 0.6, 0.8);
        let p = PercolationProblem::new(
            vec![p1, 1.0],
            vec![GiantComponentFn::erdos_renyi(c); 2],
            vec![vec![0.0, q], vec![q, 0.0]],
        )
        .unwrap();
        let sol = solve_percolation(&p, opts()).unwrap();
        let (x1, x2) = (sol.x[0], sol.x[1]);
        assert!((x2 - (1.0 - q * (1.0 - p1 * er_giant(c * x1)))).abs() < 1e-8);
        assert!((x1 - p1 * (1.0 - q * (1.0 - er_giant(c * x2)))).abs() < 1e-8);
    }

    #[test]
    fn fully_coupled_pair_threshold() {
        // For q = 1, S = g^2 with g = 1 - exp(-c g^2); collapse below c ~ 2.4554.
        let cc = critical_point(
            |c| PercolationProblem::erdos_renyi(&[c, c], 1.0, 1.0),
            2.0,
            3.0,
            1e-3,
            opts(),
        )
        .unwrap();
        assert!((cc - 2.4554).abs() < 2e-3, "{cc}");
        let above =
            solve_percolation(&PercolationProblem::erdos_renyi(&[2.5, 2.5], 1.0, 1.0).unwrap(), opts()).unwrap();
        assert!(above.s[0] > 0.3);
    }

    #[test]
    fn hysteresis_has_two_branches() {
        let grid = linspace(1.5, 3.5, 21);
        let h = hysteresis_sweep(|c| PercolationProblem::erdos_renyi(&[c, c], 1.0, 1.0), &grid, opts()).unwrap();
        assert!(h.max_gap() > 0.3);
        assert!(h.up.iter().all(|p| p.s[0] < COLLAPSE_THRESHOLD));
        assert!(h.down.last().unwrap().s[0] > 0.8);
    }

    #[test]
    fn rejects_invalid() {
        assert!(PercolationProblem::erdos_renyi(&[2.0], 0.0, 1.5).is_err());
        assert!(PercolationProblem::new(vec![1.0], vec![GiantComponentFn::erdos_renyi(2.0)], vec![vec![0.5]]).is_err());
        let p = PercolationProblem::erdos_renyi(&[2.0], 0.0, 1.0).unwrap();
        let bad = PercolationOptions { tol: 0.0, ..opts() };
        assert!(solve_percolation(&p, bad).is_err());
    }

    #[test]
    fn reports_non_convergence() {
        let p = PercolationProblem::erdos_renyi(&[2.46, 2.46], 1.0, 1.0).unwrap();
        let tight = PercolationOptions { max_iter: 3, ..opts() };
        assert!(matches!(
            solve_percolation(&p, tight),
            Err(ResilienceError::NoConvergence { iterations: 3, .. })
        ));
    }
}
