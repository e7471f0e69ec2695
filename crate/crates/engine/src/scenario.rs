//! Scripted observation source and topology helpers.

use brain_core::netcore::{Dependency, ElementKind, Layer, MultilayerNetwork};
use brain_core::observe::{SnapshotWindow, SpatialGraph};
use brain_core::resilience::cascade::sample_er;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::config::{GeneratorConfig, Injection, ScenarioConfig};
use crate::EngineError;

/// Two ER layers of `cfg.nodes` nodes with one-to-one mutual dependencies of
/// strength `cfg.coupling`.
pub fn generate_network(cfg: &GeneratorConfig, seed: u64) -> Result<MultilayerNetwork, EngineError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = cfg.nodes;
    let layer = |name: &str, kind: ElementKind, rng: &mut ChaCha8Rng| {
        let adj = sample_er(n, cfg.mean_degree, rng);
        let mut edges: Vec<(usize, usize, f64)> = adj
            .iter()
            .enumerate()
            .flat_map(|(i, nb)| nb.iter().filter(move |&&j| i < j).map(move |&j| (i, j, 1.0)))
            .collect();
        edges.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        edges.dedup_by(|a, b| a.0 == b.0 && a.1 == b.1);
        Layer::uniform(name, n, kind, &edges)
    };
    let supply = layer("supply", ElementKind::Enterprise, &mut rng)?;
    let logistics = layer("logistics", ElementKind::Logistics, &mut rng)?;
    let deps = if cfg.coupling > 0.0 {
        (0..n)
            .flat_map(|i| {
                [
                    Dependency {
                        layer_a: 0,
                        node_a: i,
                        layer_b: 1,
                        node_b: i,
                        q: cfg.coupling,
                    },
                    Dependency {
                        layer_a: 1,
                        node_a: i,
                        layer_b: 0,
                        node_b: i,
                        q: cfg.coupling,
                    },
                ]
            })
            .collect()
    } else {
        Vec::new()
    };
    Ok(MultilayerNetwork::new(vec![supply, logistics], deps, Vec::new())?)
}

/// Derived per-tick inputs over the global node index.
#[derive(Debug, Clone)]
pub struct Topology {
    pub spatial: SpatialGraph,
    /// Successors: intra-layer neighbours plus dependants of each node.
    pub out_links: Vec<Vec<usize>>,
    /// Largest coupling under which each node depends on another.
    pub couplings: Vec<f64>,
}

impl Topology {
    pub fn of(net: &MultilayerNetwork) -> Result<Self, EngineError> {
        let offsets = net.offsets();
        let n = net.total_nodes();
        let mut edges = Vec::new();
        let mut out_links = vec![Vec::new(); n];
        for (m, layer) in net.layers().iter().enumerate() {
            for (i, j, w) in layer.edges() {
                let (a, b) = (offsets[m] + i, offsets[m] + j);
                edges.push((a, b, w));
                out_links[a].push(b);
                if !layer.directed {
                    out_links[b].push(a);
                }
            }
        }
        let mut couplings = vec![0.0f64; n];
        for d in net.deps() {
            let a = offsets[d.layer_a] + d.node_a;
            let b = offsets[d.layer_b] + d.node_b;
            if d.q > 0.0 {
                out_links[b].push(a);
            }
            couplings[a] = couplings[a].max(d.q);
        }
        for l in &mut out_links {
            l.sort_unstable();
            l.dedup();
        }
        Ok(Self {
            spatial: SpatialGraph::from_edges(n, &edges)?,
            out_links,
            couplings,
        })
    }
}

/// Deterministic synthetic load readings: every node reads `1 + noise`
/// per channel; injected nodes add `magnitude`, their direct neighbours
/// `spread * magnitude`.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub seed: u64,
    pub cfg: ScenarioConfig,
    pub frames: usize,
    pub channels: usize,
}

fn frame_seed(seed: u64, tau: i64) -> u64 {
    seed ^ (tau as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15).rotate_left(17)
}

impl Scenario {
    pub fn new(seed: u64, cfg: ScenarioConfig, frames: usize, channels: usize) -> Self {
        Self {
            seed,
            cfg,
            frames,
            channels,
        }
    }

    pub fn active(&self, tau: i64) -> impl Iterator<Item = &Injection> {
        self.cfg
            .injections
            .iter()
            .filter(move |inj| tau >= inj.tick as i64 && tau < (inj.tick + inj.duration) as i64)
    }

    /// Load of every node at frame time `tau`.
    pub fn frame(&self, tau: i64, topo: &Topology) -> Vec<Vec<f64>> {
        let n = topo.out_links.len();
        let mut rng = ChaCha8Rng::seed_from_u64(frame_seed(self.seed, tau));
        let noise = Normal::new(0.0, self.cfg.noise.max(0.0)).expect("finite noise");
        let mut f: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..self.channels).map(|_| 1.0 + noise.sample(&mut rng)).collect())
            .collect();
        for inj in self.active(tau) {
            if inj.node >= n {
                continue;
            }
            for v in &mut f[inj.node] {
                *v += inj.magnitude;
            }
            for &j in &topo.out_links[inj.node] {
                for v in &mut f[j] {
                    *v += self.cfg.spread * inj.magnitude;
                }
            }
        }
        f
    }

    /// Frames `tick - frames + 1 ..= tick`.
    pub fn window(&self, tick: u64, topo: &Topology) -> Result<SnapshotWindow, EngineError> {
        let start = tick as i64 - self.frames as i64 + 1;
        let taus: Vec<i64> = (start..=tick as i64).collect();
        let frames = taus.iter().map(|&t| self.frame(t, topo)).collect();
        Ok(SnapshotWindow::new(frames, taus.iter().map(|&t| t as f64).collect())?)
    }
}

/// Share of the total window load carried by each node.
pub fn load_share(window: &SnapshotWindow) -> Vec<f64> {
    let n = window.nodes();
    let mut load = vec![0.0; n];
    for f in &window.frames {
        for (i, x) in f.iter().enumerate() {
            load[i] += x.iter().sum::<f64>();
        }
    }
    let total: f64 = load.iter().map(|v| v.max(0.0)).sum();
    if total <= 0.0 {
        return vec![1.0 / n as f64; n];
    }
    load.into_iter().map(|v| v.max(0.0) / total).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> (MultilayerNetwork, Topology) {
        let net = generate_network(
            &GeneratorConfig {
                nodes: 20,
                mean_degree: 3.0,
                coupling: 0.5,
            },
            1,
        )
        .unwrap();
        let topo = Topology::of(&net).unwrap();
        (net, topo)
    }

    #[test]
    fn dependants_follow_their_supports() {
        let (net, topo) = small();
        assert_eq!(net.total_nodes(), 40);
        assert!(topo.out_links[0].contains(&20));
        assert!(topo.out_links[20].contains(&0));
        assert!(topo.couplings.iter().all(|&q| q == 0.5));
    }

    #[test]
    fn windows_overlap_consistently() {
        let (_, topo) = small();
        let s = Scenario::new(3, ScenarioConfig::default(), 4, 2);
        let a = s.window(10, &topo).unwrap();
        let b = s.window(11, &topo).unwrap();
        assert_eq!(a.frames[1..], b.frames[..3]);
    }

    #[test]
    fn injection_raises_node_and_neighbours() {
        let (_, topo) = small();
        let cfg = ScenarioConfig {
            noise: 0.0,
            spread: 0.2,
            injections: vec![Injection {
                tick: 5,
                node: 0,
                duration: 2,
                magnitude: 10.0,
            }],
        };
        let s = Scenario::new(3, cfg, 1, 1);
        assert_eq!(s.frame(4, &topo)[0][0], 1.0);
        let f = s.frame(5, &topo);
        assert_eq!(f[0][0], 11.0);
        let nb = topo.out_links[0][0];
        assert_eq!(f[nb][0], 3.0);
        assert_eq!(s.frame(7, &topo)[0][0], 1.0);
    }
}
