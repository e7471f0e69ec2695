//! Engine configuration.
//!
//! TOML file, every key optional:
//!
//! ```toml
//! port = 7878
//! data_dir = "brain-data"
//! network = "chain.json"      # generated two-layer ER pair when absent
//! mode = "supervised"         # or "autonomous"
//! seed = 7
//! tick_interval_ms = 1000     # 0 disables the background ticker
//! snapshot_every = 100
//! api_token = "secret"        # required in x-brain-token for POSTs when set
//!
//! [generator]
//! nodes = 250
//! mean_degree = 4.0
//! coupling = 0.5
//!
//! [alerts]
//! window = 50
//! z_threshold = 3.0
//! rearm_z = 1.0
//! min_history = 50
//! min_sigma = 1e-9
//!
//! [observe]
//! frames = 6
//! kernel = 2
//! channels = 2
//! hidden = 4
//! out = 4
//! penalty = 0.1
//! calibration_epochs = 120
//!
//! [events]
//! threshold = 3.0
//!
//! [decide]
//! budget = 4
//! occupation = 1.0
//!
//! [scenario]
//! noise = 0.05
//! spread = 0.15
//! [[scenario.injections]]
//! tick = 60
//! node = 0
//! duration = 10
//! magnitude = 10.0
//! ```
//!
//! `BRAIN_PORT` and `BRAIN_DATA_DIR` override `port` and `data_dir`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::EngineError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Autonomous,
    #[default]
    Supervised,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorConfig {
    /// Nodes per layer.
    pub nodes: usize,
    pub mean_degree: f64,
    pub coupling: f64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            nodes: 250,
            mean_degree: 4.0,
            coupling: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AlertConfig {
    /// Trailing ticks used for the z-score.
    pub window: usize,
    pub z_threshold: f64,
    /// The detector re-arms once the z-score falls below this.
    pub rearm_z: f64,
    pub min_history: usize,
    pub min_sigma: f64,
}

impl Default for AlertConfig {
    fn default() -> Self {
        Self {
            window: 50,
            z_threshold: 3.0,
            rearm_z: 1.0,
            min_history: 50,
            min_sigma: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ObserveSection {
    pub frames: usize,
    pub kernel: usize,
    pub channels: usize,
    pub hidden: usize,
    pub out: usize,
    pub penalty: f64,
    pub calibration_epochs: usize,
}

impl Default for ObserveSection {
    fn default() -> Self {
        Self {
            frames: 6,
            kernel: 2,
            channels: 2,
            hidden: 4,
            out: 4,
            penalty: brain_core::observe::DEFAULT_COUPLING_PENALTY,
            calibration_epochs: 120,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EventSection {
    /// Contribution above which a node is a current event.
    pub threshold: f64,
}

impl Default for EventSection {
    fn default() -> Self {
        Self { threshold: 3.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DecideSection {
    pub budget: usize,
    /// Occupation used for every layer when scoring interventions.
    pub occupation: f64,
}

impl Default for DecideSection {
    fn default() -> Self {
        Self {
            budget: 4,
            occupation: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Injection {
    pub tick: u64,
    /// Global node index.
    pub node: usize,
    pub duration: u64,
    pub magnitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    pub noise: f64,
    /// Fraction of an injected magnitude seen by direct neighbours.
    pub spread: f64,
    pub injections: Vec<Injection>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            noise: 0.05,
            spread: 0.15,
            injections: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EngineConfig {
    pub port: u16,
    pub data_dir: PathBuf,
    pub network: Option<PathBuf>,
    pub mode: Mode,
    pub seed: u64,
    pub tick_interval_ms: u64,
    pub snapshot_every: u64,
    pub api_token: Option<String>,
    pub generator: GeneratorConfig,
    pub alerts: AlertConfig,
    pub observe: ObserveSection,
    pub events: EventSection,
    pub decide: DecideSection,
    pub scenario: ScenarioConfig,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            port: 7878,
            data_dir: PathBuf::from("brain-data"),
            network: None,
            mode: Mode::Supervised,
            seed: 7,
            tick_interval_ms: 1000,
            snapshot_every: 100,
            api_token: None,
            generator: GeneratorConfig::default(),
            alerts: AlertConfig::default(),
            observe: ObserveSection::default(),
            events: EventSection::default(),
            decide: DecideSection::default(),
            scenario: ScenarioConfig::default(),
        }
    }
}

impl EngineConfig {
    pub fn parse(text: &str) -> Result<Self, EngineError> {
        toml::from_str(text).map_err(|e| EngineError::Config(e.to_string()))
    }

    /// Reads `path` (defaults when `None`) and applies environment overrides.
    pub fn load(path: Option<&Path>) -> Result<Self, EngineError> {
        let mut cfg = match path {
            Some(p) => {
                let text =
                    std::fs::read_to_string(p).map_err(|e| EngineError::Config(format!("{}: {e}", p.display())))?;
                let mut cfg = Self::parse(&text)?;
                if let (Some(net), Some(dir)) = (&cfg.network, p.parent()) {
                    if net.is_relative() {
                        cfg.network = Some(dir.join(net));
                    }
                }
                cfg
            }
            None => Self::default(),
        };
        cfg.apply_env(|k| std::env::var(k).ok())?;
        Ok(cfg)
    }

    pub fn apply_env(&mut self, get: impl Fn(&str) -> Option<String>) -> Result<(), EngineError> {
        if let Some(p) = get("BRAIN_PORT") {
            self.port = p
                .parse()
                .map_err(|_| EngineError::Config(format!("BRAIN_PORT={p:?} is not a port")))?;
        }
        if let Some(d) = get("BRAIN_DATA_DIR") {
            self.data_dir = PathBuf::from(d);
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        let bad = |m: &str| Err(EngineError::Config(m.to_string()));
        if self.alerts.window < 2 || self.alerts.min_history < 2 {
            return bad("alerts.window and alerts.min_history must be at least 2");
        }
        if self.alerts.min_history > self.alerts.window {
            return bad("alerts.min_history cannot exceed alerts.window");
        }
        if self.alerts.rearm_z >= self.alerts.z_threshold {
            return bad("alerts.rearm_z must be below alerts.z_threshold");
        }
        if self.observe.kernel == 0 || self.observe.frames + 1 < 2 * self.observe.kernel {
            return bad("observe.frames too short for observe.kernel");
        }
        if self.observe.channels == 0 || self.observe.hidden == 0 || self.observe.out == 0 {
            return bad("observe dimensions must be positive");
        }
        if self.decide.budget == 0 {
            return bad("decide.budget must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.decide.occupation) {
            return bad("decide.occupation must lie in [0, 1]");
        }
        if self.network.is_none() && self.generator.nodes < 2 {
            return bad("generator.nodes must be at least 2");
        }
        Ok(())
    }
}
