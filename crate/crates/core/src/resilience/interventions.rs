use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::percolation::{solve_percolation_from, PercolationOptions, PercolationProblem};
use super::perturb::{apply_perturbation, Action, DepRef, NodeRef, Rewire};
use super::ResilienceError;
use crate::netcore::MultilayerNetwork;

/// Giant-component outcome on an explicit network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkPercolation {
    pub s: Vec<f64>,
    /// `Σ_i N_i S_i`: expected number of nodes in the giant components.
    pub giant_nodes: f64,
    pub total_nodes: usize,
    pub converged: bool,
}

impl NetworkPercolation {
    pub fn fraction(&self) -> f64 {
        if self.total_nodes == 0 {
            0.0
        } else {
            self.giant_nodes / self.total_nodes as f64
        }
    }
}

pub fn percolate_network(
    net: &MultilayerNetwork,
    phi: &[f64],
    opts: PercolationOptions,
) -> Result<NetworkPercolation, ResilienceError> {
    let problem = PercolationProblem::from_network(net, phi)?;
    let sol = solve_percolation_from(&problem, opts, None)?;
    let giant_nodes = sol
        .s
        .iter()
        .zip(net.layers())
        .map(|(s, l)| s * l.node_count() as f64)
        .sum();
    Ok(NetworkPercolation {
        s: sol.s,
        giant_nodes,
        total_nodes: net.total_nodes(),
        converged: sol.converged,
    })
}

/// Change in giant-component node count after `action`, as a fraction of
/// the original node count.
pub fn predicted_delta_s(
    net: &MultilayerNetwork,
    action: &Action,
    phi: &[f64],
    opts: PercolationOptions,
) -> Result<f64, ResilienceError> {
    let before = percolate_network(net, phi, opts)?;
    let after = percolate_network(&apply_perturbation(net, action)?, phi, opts)?;
    Ok(delta(&before, &after))
}

fn delta(before: &NetworkPercolation, after: &NetworkPercolation) -> f64 {
    if before.total_nodes == 0 {
        0.0
    } else {
        (after.giant_nodes - before.giant_nodes) / before.total_nodes as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InterventionFamily {
    /// Make high-degree dependent nodes autonomous (coupling 0).
    Autonomy,
    /// Move the most degree-mismatched dependencies to degree-matched supports.
    DegreeMatchedRewire,
    /// Shield high-degree nodes from removal.
    Protection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterventionCandidate {
    pub id: String,
    pub family: InterventionFamily,
    pub k: usize,
    pub action: Action,
    pub predicted_s: f64,
    pub delta_s: f64,
}

fn sizes(budget: usize) -> Vec<usize> {
    let mut v = vec![1, budget.div_ceil(2), budget];
    v.dedup();
    v
}

/// Nodes ordered by decreasing degree, ties by (layer, node).
fn by_degree(net: &MultilayerNetwork) -> Vec<(NodeRef, usize)> {
    let mut all: Vec<(NodeRef, usize)> = net
        .layers()
        .iter()
        .enumerate()
        .flat_map(|(m, l)| {
            l.degrees()
                .into_iter()
                .enumerate()
                .map(move |(node, d)| (NodeRef { layer: m, node }, d))
        })
        .collect();
    all.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    all
}

/// Candidate interventions of three families at sizes `1`, `⌈budget/2⌉`
/// and `budget`, each scored by re-solving percolation on the modified
/// network. Sorted by decreasing `delta_s`, ties by id.
pub fn enumerate_interventions(
    net: &MultilayerNetwork,
    phi: &[f64],
    budget: usize,
    opts: PercolationOptions,
) -> Result<Vec<InterventionCandidate>, ResilienceError> {
    if budget == 0 {
        return Err(ResilienceError::InvalidArgument("budget must be at least 1".into()));
    }
    let before = percolate_network(net, phi, opts)?;
    let ranked = by_degree(net);
    let degrees: Vec<Vec<usize>> = net.layers().iter().map(|l| l.degrees()).collect();
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    let mut push =
        |family: InterventionFamily, k: usize, action: Action, phi: Vec<f64>| -> Result<(), ResilienceError> {
            if k == 0 || !seen.insert((family, k)) {
                return Ok(());
            }
            let after = percolate_network(&apply_perturbation(net, &action)?, &phi, opts)?;
            let tag = match family {
                InterventionFamily::Autonomy => "autonomy",
                InterventionFamily::DegreeMatchedRewire => "rewire",
                InterventionFamily::Protection => "protect",
            };
            out.push(InterventionCandidate {
                id: format!("{tag}-{k}"),
                family,
                k,
                action,
                predicted_s: after.giant_nodes / before.total_nodes.max(1) as f64,
                delta_s: delta(&before, &after),
            });
            Ok(())
        };

    let dependent: HashSet<NodeRef> = net
        .deps()
        .iter()
        .filter(|d| d.q > 0.0)
        .map(|d| NodeRef {
            layer: d.layer_a,
            node: d.node_a,
        })
        .collect();
    let hubs: Vec<NodeRef> = ranked.iter().map(|r| r.0).filter(|n| dependent.contains(n)).collect();

    let mut mismatched: Vec<(usize, DepRef)> = net
        .deps()
        .iter()
        .filter(|d| d.q > 0.0)
        .map(|d| {
            (
                degrees[d.layer_a][d.node_a].abs_diff(degrees[d.layer_b][d.node_b]),
                DepRef::from(d),
            )
        })
        .filter(|(gap, _)| *gap > 0)
        .collect();
    mismatched.sort_by(|a, b| {
        b.0.cmp(&a.0)
            .then((a.1.layer_a, a.1.node_a, a.1.layer_b, a.1.node_b).cmp(&(
                b.1.layer_a,
                b.1.node_a,
                b.1.layer_b,
                b.1.node_b,
            )))
    });

    for k in sizes(budget) {
        {
            let chosen: HashSet<NodeRef> = hubs.iter().take(k).copied().collect();
            let pairs = net
                .deps()
                .iter()
                .filter(|d| {
                    d.q > 0.0
                        && chosen.contains(&NodeRef {
                            layer: d.layer_a,
                            node: d.node_a,
                        })
                })
                .map(DepRef::from)
                .collect();
            push(
                InterventionFamily::Autonomy,
                chosen.len(),
                Action::SetCoupling { pairs, q: 0.0 },
                phi.to_vec(),
            )?;
        }

        let moves: Vec<Rewire> = mismatched
            .iter()
            .take(k)
            .filter_map(|(_, dep)| {
                let target = degrees[dep.layer_a][dep.node_a];
                let taken: HashSet<usize> = net
                    .deps()
                    .iter()
                    .filter(|d| d.layer_a == dep.layer_a && d.node_a == dep.node_a && d.layer_b == dep.layer_b)
                    .map(|d| d.node_b)
                    .collect();
                (0..degrees[dep.layer_b].len())
                    .filter(|&v| !taken.contains(&v) && !(dep.layer_a == dep.layer_b && v == dep.node_a))
                    .min_by_key(|&v| (degrees[dep.layer_b][v].abs_diff(target), v))
                    .filter(|&v| {
                        degrees[dep.layer_b][v].abs_diff(target) < degrees[dep.layer_b][dep.node_b].abs_diff(target)
                    })
                    .map(|v| Rewire { dep: *dep, node_b: v })
            })
            .collect();
        {
            let n = moves.len();
            push(
                InterventionFamily::DegreeMatchedRewire,
                n,
                Action::RewireDependencies { moves },
                phi.to_vec(),
            )?;
        }

        {
            let nodes: Vec<NodeRef> = ranked.iter().take(k).map(|r| r.0).collect();
            let mut protected_phi = phi.to_vec();
            for (m, p) in protected_phi.iter_mut().enumerate() {
                let n = net.layers()[m].node_count();
                let c = nodes.iter().filter(|r| r.layer == m).count();
                if n > 0 {
                    *p += (1.0 - *p) * c as f64 / n as f64;
                }
            }
            push(
                InterventionFamily::Protection,
                nodes.len(),
                Action::Protect { nodes },
                protected_phi,
            )?;
        }
    }
    out.sort_by(|a, b| b.delta_s.total_cmp(&a.delta_s).then_with(|| a.id.cmp(&b.id)));
    Ok(out)
}
