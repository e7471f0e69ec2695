//! Monte-Carlo cascading failure on explicit graphs, used to validate the
//! mean-field percolation solver.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::netcore::MultilayerNetwork;

/// Explicit interdependent system: adjacency lists per layer and
/// one-directional dependencies `(layer_a, node_a, layer_b, node_b)`
/// meaning `node_a` fails when `node_b` fails.
#[derive(Debug, Clone, Default)]
pub struct ExplicitSystem {
    pub layers: Vec<Vec<Vec<usize>>>,
    pub deps: Vec<(usize, usize, usize, usize)>,
}

/// Runs alternating giant-component pruning and dependency failure until
/// nothing changes; returns the surviving fraction per layer.
pub fn cascade_oracle(sys: &ExplicitSystem, mut alive: Vec<Vec<bool>>) -> Vec<f64> {
    loop {
        let mut changed = false;
        for (adj, live) in sys.layers.iter().zip(alive.iter_mut()) {
            changed |= keep_giant(adj, live);
        }
        for &(la, a, lb, b) in &sys.deps {
            if alive[la][a] && !alive[lb][b] {
                alive[la][a] = false;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    alive
        .iter()
        .map(|l| {
            if l.is_empty() {
                0.0
            } else {
                l.iter().filter(|&&a| a).count() as f64 / l.len() as f64
            }
        })
        .collect()
}

/// Kills alive nodes outside the largest alive component. Returns whether
/// anything changed.
fn keep_giant(adj: &[Vec<usize>], alive: &mut [bool]) -> bool {
    let n = adj.len();
    let mut comp = vec![usize::MAX; n];
    let mut best = (0usize, usize::MAX);
    let mut stack = Vec::new();
    let mut id = 0;
    for s in 0..n {
        if !alive[s] || comp[s] != usize::MAX {
            continue;
        }
        let mut size = 0;
        comp[s] = id;
        stack.push(s);
        while let Some(v) = stack.pop() {
            size += 1;
            for &w in &adj[v] {
                if alive[w] && comp[w] == usize::MAX {
                    comp[w] = id;
                    stack.push(w);
                }
            }
        }
        if size > best.0 {
            best = (size, id);
        }
        id += 1;
    }
    let mut changed = false;
    for v in 0..n {
        if alive[v] && comp[v] != best.1 {
            alive[v] = false;
            changed = true;
        }
    }
    changed
}

/// Erdős–Rényi graph with `round(c n / 2)` uniformly random edges
/// (self-loops rejected).
pub fn sample_er<R: Rng>(n: usize, mean_degree: f64, rng: &mut R) -> Vec<Vec<usize>> {
    let mut adj = vec![Vec::new(); n];
    if n < 2 {
        return adj;
    }
    let m = (mean_degree * n as f64 / 2.0).round() as usize;
    let mut placed = 0;
    while placed < m {
        let a = rng.random_range(0..n);
        let b = rng.random_range(0..n);
        if a != b {
            adj[a].push(b);
            adj[b].push(a);
            placed += 1;
        }
    }
    adj
}

/// Occupation mask with each node kept independently with probability `phi`.
pub fn sample_occupation<R: Rng>(n: usize, phi: f64, rng: &mut R) -> Vec<bool> {
    (0..n).map(|_| phi >= 1.0 || rng.random::<f64>() < phi).collect()
}

/// Two ER layers of `n` nodes; a random fraction `q` of node indices are
/// paired one-to-one across layers with mutual dependencies.
pub fn sample_er_pair<R: Rng>(n: usize, c: [f64; 2], q: f64, rng: &mut R) -> ExplicitSystem {
    let layers = vec![sample_er(n, c[0], rng), sample_er(n, c[1], rng)];
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    let paired = (q * n as f64).round() as usize;
    let mut deps = Vec::with_capacity(2 * paired);
    for &i in &idx[..paired] {
        deps.push((0, i, 1, i));
        deps.push((1, i, 0, i));
    }
    ExplicitSystem { layers, deps }
}

/// Mean surviving fraction per layer over `seeds`, one independent sample
/// pair per seed, evaluated in parallel.
pub fn monte_carlo_er_pair(n: usize, c: [f64; 2], q: f64, phi: f64, seeds: &[u64]) -> Vec<f64> {
    let runs: Vec<Vec<f64>> = seeds
        .par_iter()
        .map(|&seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let sys = sample_er_pair(n, c, q, &mut rng);
            let alive = vec![sample_occupation(n, phi, &mut rng), sample_occupation(n, phi, &mut rng)];
            cascade_oracle(&sys, alive)
        })
        .collect();
    mean_runs(&runs)
}

/// Mean giant-component fraction of single ER graphs over `seeds`.
pub fn monte_carlo_er(n: usize, c: f64, phi: f64, seeds: &[u64]) -> f64 {
    let runs: Vec<Vec<f64>> = seeds
        .par_iter()
        .map(|&seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let sys = ExplicitSystem {
                layers: vec![sample_er(n, c, &mut rng)],
                deps: Vec::new(),
            };
            let alive = vec![sample_occupation(n, phi, &mut rng)];
            cascade_oracle(&sys, alive)
        })
        .collect();
    mean_runs(&runs)[0]
}

fn mean_runs(runs: &[Vec<f64>]) -> Vec<f64> {
    let m = runs.first().map_or(0, Vec::len);
    (0..m)
        .map(|i| runs.iter().map(|r| r[i]).sum::<f64>() / runs.len() as f64)
        .collect()
}

/// Explicit system read from a network; each dependency is active with
/// probability equal to its coupling `q`.
pub fn explicit_from_network<R: Rng>(net: &MultilayerNetwork, rng: &mut R) -> ExplicitSystem {
    ExplicitSystem {
        layers: net.layers().iter().map(|l| l.neighbor_lists()).collect(),
        deps: net
            .deps()
            .iter()
            .filter(|d| d.q >= 1.0 || rng.random::<f64>() < d.q)
            .map(|d| (d.layer_a, d.node_a, d.layer_b, d.node_b))
            .collect(),
    }
}
