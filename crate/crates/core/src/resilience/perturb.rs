use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::ResilienceError;
use crate::netcore::{CsrMatrix, Dependency, Hyperedge, Layer, MultilayerNetwork};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeRef {
    pub layer: usize,
    pub node: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LinkRef {
    pub layer: usize,
    pub from: usize,
    pub to: usize,
}

/// Dependency endpoints: `(layer_a, node_a)` depends on `(layer_b, node_b)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DepRef {
    pub layer_a: usize,
    pub node_a: usize,
    pub layer_b: usize,
    pub node_b: usize,
}

impl From<&Dependency> for DepRef {
    fn from(d: &Dependency) -> Self {
        Self {
            layer_a: d.layer_a,
            node_a: d.node_a,
            layer_b: d.layer_b,
            node_b: d.node_b,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rewire {
    pub dep: DepRef,
    /// New supporting node in `dep.layer_b`.
    pub node_b: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum Action {
    RemoveNodes {
        nodes: Vec<NodeRef>,
    },
    RemoveLinks {
        links: Vec<LinkRef>,
    },
    /// Multiplies intra-layer edge weights of `layer` (all layers if absent).
    ScaleWeights {
        factor: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        layer: Option<usize>,
    },
    /// Sets `q` on the listed dependencies, creating those that are missing.
    SetCoupling {
        pairs: Vec<DepRef>,
        q: f64,
    },
    RewireDependencies {
        moves: Vec<Rewire>,
    },
    /// Marks nodes as protected against removal. The topology is unchanged;
    /// callers keep the protected set.
    Protect {
        nodes: Vec<NodeRef>,
    },
}

/// Result of a perturbation together with the old-to-new node index map.
#[derive(Debug, Clone, PartialEq)]
pub struct Perturbed {
    pub net: MultilayerNetwork,
    pub node_map: Vec<Vec<Option<usize>>>,
}

pub fn apply_perturbation(net: &MultilayerNetwork, action: &Action) -> Result<MultilayerNetwork, ResilienceError> {
    apply_perturbation_mapped(net, action).map(|p| p.net)
}

fn check_node(net: &MultilayerNetwork, layer: usize, node: usize) -> Result<(), ResilienceError> {
    let l = net
        .layers()
        .get(layer)
        .ok_or_else(|| ResilienceError::InvalidAction(format!("no layer {layer}")))?;
    if node >= l.node_count() {
        return Err(ResilienceError::InvalidAction(format!(
            "no node {node} in layer {layer}"
        )));
    }
    Ok(())
}

fn identity_map(net: &MultilayerNetwork) -> Vec<Vec<Option<usize>>> {
    net.layers()
        .iter()
        .map(|l| (0..l.node_count()).map(Some).collect())
        .collect()
}

pub fn apply_perturbation_mapped(net: &MultilayerNetwork, action: &Action) -> Result<Perturbed, ResilienceError> {
    match action {
        Action::RemoveNodes { nodes } => remove_nodes(net, nodes),
        Action::RemoveLinks { links } => {
            let mut drop: HashMap<usize, HashSet<(usize, usize)>> = HashMap::new();
            for l in links {
                check_node(net, l.layer, l.from)?;
                check_node(net, l.layer, l.to)?;
                let layer = &net.layers()[l.layer];
                if layer.adjacency().get(l.from, l.to) == 0.0 {
                    return Err(ResilienceError::InvalidAction(format!(
                        "no link {} -> {} in layer {}",
                        l.from, l.to, l.layer
                    )));
                }
                let set = drop.entry(l.layer).or_default();
                set.insert((l.from, l.to));
                if !layer.directed {
                    set.insert((l.to, l.from));
                }
            }
            let layers = net
                .layers()
                .iter()
                .enumerate()
                .map(|(m, layer)| match drop.get(&m) {
                    None => layer.clone(),
                    Some(set) => {
                        let t: Vec<_> = layer
                            .adjacency()
                            .iter()
                            .filter(|&(i, j, _)| !set.contains(&(i, j)))
                            .collect();
                        let n = layer.node_count();
                        layer.with_adjacency(CsrMatrix::from_triplets(n, n, &t), layer.kinds().to_vec())
                    }
                })
                .collect();
            rebuild(net, layers, net.deps().to_vec(), identity_map(net))
        }
        Action::ScaleWeights { factor, layer } => {
            if !(factor.is_finite() && *factor >= 0.0) {
                return Err(ResilienceError::InvalidAction(format!("invalid scale factor {factor}")));
            }
            if let Some(m) = layer {
                if *m >= net.layers().len() {
                    return Err(ResilienceError::InvalidAction(format!("no layer {m}")));
                }
            }
            let layers = net
                .layers()
                .iter()
                .enumerate()
                .map(|(m, l)| {
                    if layer.is_none_or(|target| target == m) {
                        l.with_adjacency(l.adjacency().map_values(|_, _, w| w * factor), l.kinds().to_vec())
                    } else {
                        l.clone()
                    }
                })
                .collect();
            rebuild(net, layers, net.deps().to_vec(), identity_map(net))
        }
        Action::SetCoupling { pairs, q } => {
            if !(0.0..=1.0).contains(q) {
                return Err(ResilienceError::InvalidAction(format!("coupling {q} outside [0, 1]")));
            }
            let mut deps = net.deps().to_vec();
            for p in pairs {
                check_node(net, p.layer_a, p.node_a)?;
                check_node(net, p.layer_b, p.node_b)?;
                let mut found = false;
                for d in deps.iter_mut().filter(|d| DepRef::from(&**d) == *p) {
                    d.q = *q;
                    found = true;
                }
                if !found {
                    deps.push(Dependency {
                        layer_a: p.layer_a,
                        node_a: p.node_a,
                        layer_b: p.layer_b,
                        node_b: p.node_b,
                        q: *q,
                    });
                }
            }
            rebuild(net, net.layers().to_vec(), deps, identity_map(net))
        }
        Action::RewireDependencies { moves } => {
            let mut deps = net.deps().to_vec();
            for mv in moves {
                check_node(net, mv.dep.layer_b, mv.node_b)?;
                let d = deps
                    .iter_mut()
                    .find(|d| DepRef::from(&**d) == mv.dep)
                    .ok_or_else(|| ResilienceError::InvalidAction(format!("no dependency {:?}", mv.dep)))?;
                d.node_b = mv.node_b;
            }
            rebuild(net, net.layers().to_vec(), deps, identity_map(net))
        }
        Action::Protect { nodes } => {
            for n in nodes {
                check_node(net, n.layer, n.node)?;
            }
            Ok(Perturbed {
                net: net.clone(),
                node_map: identity_map(net),
            })
        }
    }
}

fn remove_nodes(net: &MultilayerNetwork, nodes: &[NodeRef]) -> Result<Perturbed, ResilienceError> {
    let mut removed = HashSet::new();
    for n in nodes {
        check_node(net, n.layer, n.node)?;
        removed.insert((n.layer, n.node));
    }
    let node_map: Vec<Vec<Option<usize>>> = net
        .layers()
        .iter()
        .enumerate()
        .map(|(m, l)| {
            let mut next = 0;
            (0..l.node_count())
                .map(|v| {
                    if removed.contains(&(m, v)) {
                        None
                    } else {
                        next += 1;
                        Some(next - 1)
                    }
                })
                .collect()
        })
        .collect();
    let layers = net
        .layers()
        .iter()
        .enumerate()
        .map(|(m, l)| {
            let map = &node_map[m];
            let kinds: Vec<_> = (0..l.node_count())
                .filter(|&v| map[v].is_some())
                .map(|v| l.kinds()[v])
                .collect();
            let t: Vec<_> = l
                .adjacency()
                .iter()
                .filter_map(|(i, j, w)| Some((map[i]?, map[j]?, w)))
                .collect();
            l.with_adjacency(CsrMatrix::from_triplets(kinds.len(), kinds.len(), &t), kinds)
        })
        .collect();
    let deps = net
        .deps()
        .iter()
        .filter_map(|d| {
            Some(Dependency {
                node_a: node_map[d.layer_a][d.node_a]?,
                node_b: node_map[d.layer_b][d.node_b]?,
                ..*d
            })
        })
        .collect();
    rebuild(net, layers, deps, node_map)
}

fn rebuild(
    net: &MultilayerNetwork,
    layers: Vec<Layer>,
    deps: Vec<Dependency>,
    node_map: Vec<Vec<Option<usize>>>,
) -> Result<Perturbed, ResilienceError> {
    let old_offsets = net.offsets();
    let mut new_offsets = vec![0];
    for l in &layers {
        new_offsets.push(new_offsets.last().unwrap() + l.node_count());
    }
    let global = |g: usize| -> Option<usize> {
        let m = old_offsets.partition_point(|&o| o <= g) - 1;
        Some(new_offsets[m] + node_map[m][g - old_offsets[m]]?)
    };
    let hyperedges = net
        .hyperedges()
        .iter()
        .filter_map(|h| {
            let vertices: Vec<usize> = h.vertices.iter().filter_map(|&v| global(v)).collect();
            (!vertices.is_empty()).then_some(Hyperedge {
                vertices,
                weight: h.weight,
            })
        })
        .collect();
    let net = MultilayerNetwork::new(layers, deps, hyperedges).map_err(ResilienceError::Net)?;
    Ok(Perturbed { net, node_map })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netcore::ElementKind;

    fn sample() -> MultilayerNetwork {
        let a = Layer::uniform("a", 3, ElementKind::Enterprise, &[(0, 1, 2.0), (1, 2, 4.0)]).unwrap();
        let b = Layer::uniform("b", 2, ElementKind::RawMaterial, &[(0, 1, 1.0)]).unwrap();
        let deps = vec![
            Dependency {
                layer_a: 0,
                node_a: 1,
                layer_b: 1,
                node_b: 0,
                q: 1.0,
            },
            Dependency {
                layer_a: 1,
                node_a: 1,
                layer_b: 0,
                node_b: 2,
                q: 0.5,
            },
        ];
        let h = vec![Hyperedge {
            vertices: vec![1, 2, 3],
            weight: 1.0,
        }];
        MultilayerNetwork::new(vec![a, b], deps, h).unwrap()
    }

    #[test]
    fn remove_none_is_identity() {
        let net = sample();
        assert_eq!(
            apply_perturbation(&net, &Action::RemoveNodes { nodes: vec![] }).unwrap(),
            net
        );
    }

    #[test]
    fn remove_all_empties_layers() {
        let net = sample();
        let nodes = net
            .layers()
            .iter()
            .enumerate()
            .flat_map(|(m, l)| (0..l.node_count()).map(move |node| NodeRef { layer: m, node }))
            .collect();
        let out = apply_perturbation(&net, &Action::RemoveNodes { nodes }).unwrap();
        assert!(out.layers().iter().all(|l| l.node_count() == 0));
        assert!(out.deps().is_empty() && out.hyperedges().is_empty());
    }

    #[test]
    fn remove_middle_node_renumbers() {
        let net = sample();
        let p = apply_perturbation_mapped(
            &net,
            &Action::RemoveNodes {
                nodes: vec![NodeRef { layer: 0, node: 1 }],
            },
        )
        .unwrap();
        assert_eq!(p.node_map[0], vec![Some(0), None, Some(1)]);
        assert_eq!(p.net.layers()[0].edges(), vec![]);
        assert_eq!(p.net.deps().len(), 1);
        assert_eq!(p.net.deps()[0].node_b, 1);
        // Global vertices 1,2,3 -> {removed, 1, 2}.
        assert_eq!(p.net.hyperedges()[0].vertices, vec![1, 2]);
    }

    #[test]
    fn halve_weights() {
        let net = sample();
        let out = apply_perturbation(
            &net,
            &Action::ScaleWeights {
                factor: 0.5,
                layer: None,
            },
        )
        .unwrap();
        for (l0, l1) in net.layers().iter().zip(out.layers()) {
            for ((_, _, w0), (_, _, w1)) in l0.adjacency().iter().zip(l1.adjacency().iter()) {
                assert_eq!(w1, w0 * 0.5);
            }
        }
        assert_eq!(net.layers()[0].adjacency().get(1, 2), 4.0);
    }

    #[test]
    fn coupling_and_links() {
        let net = sample();
        let dep = DepRef::from(&net.deps()[0]);
        let out = apply_perturbation(
            &net,
            &Action::SetCoupling {
                pairs: vec![dep],
                q: 0.0,
            },
        )
        .unwrap();
        assert_eq!(out.deps()[0].q, 0.0);
        let out = apply_perturbation(
            &net,
            &Action::RemoveLinks {
                links: vec![LinkRef {
                    layer: 0,
                    from: 2,
                    to: 1,
                }],
            },
        )
        .unwrap();
        assert_eq!(out.layers()[0].edges().len(), 1);
        assert!(apply_perturbation(
            &net,
            &Action::RemoveLinks {
                links: vec![LinkRef {
                    layer: 0,
                    from: 0,
                    to: 2
                }]
            }
        )
        .is_err());
    }

    #[test]
    fn invalid_ids_rejected() {
        let net = sample();
        assert!(apply_perturbation(
            &net,
            &Action::RemoveNodes {
                nodes: vec![NodeRef { layer: 0, node: 9 }]
            }
        )
        .is_err());
        assert!(apply_perturbation(
            &net,
            &Action::Protect {
                nodes: vec![NodeRef { layer: 5, node: 0 }]
            }
        )
        .is_err());
        assert!(apply_perturbation(
            &net,
            &Action::ScaleWeights {
                factor: -1.0,
                layer: None
            }
        )
        .is_err());
    }

    #[test]
    fn action_json_shape() {
        let a = Action::RemoveNodes {
            nodes: vec![NodeRef { layer: 0, node: 3 }],
        };
        let j = serde_json::to_string(&a).unwrap();
        assert_eq!(j, r#"{"action":"remove_nodes","nodes":[{"layer":0,"node":3}]}"#);
        assert_eq!(serde_json::from_str::<Action>(&j).unwrap(), a);
    }
}
