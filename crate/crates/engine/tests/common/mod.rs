#![allow(dead_code)]

use brain_engine::config::Injection;
use brain_engine::scenario::{generate_network, Topology};
use brain_engine::{EngineConfig, Mode};

pub const HUB_TICK: u64 = 60;

pub fn config(nodes: usize, mode: Mode) -> EngineConfig {
    let mut cfg = EngineConfig::default();
    cfg.generator.nodes = nodes;
    cfg.mode = mode;
    cfg.tick_interval_ms = 0;
    cfg
}

/// Global index of the node with the most out-links.
pub fn hub(cfg: &EngineConfig) -> usize {
    let net = generate_network(&cfg.generator, cfg.seed).unwrap();
    let topo = Topology::of(&net).unwrap();
    (0..topo.out_links.len())
        .max_by_key(|&i| (topo.out_links[i].len(), std::cmp::Reverse(i)))
        .unwrap()
}

/// Config with a hub spike at [`HUB_TICK`].
pub fn hub_config(nodes: usize, mode: Mode) -> EngineConfig {
    let mut cfg = config(nodes, mode);
    let node = hub(&cfg);
    cfg.scenario.injections.push(Injection {
        tick: HUB_TICK,
        node,
        duration: 10,
        magnitude: 5.0,
    });
    cfg
}
