//! JSON interchange format for multilayer networks.
//!
//! ```json
//! {
//!   "format": 1,
//!   "layers": [
//!     { "name": "supply", "directed": false,
//!       "kinds": ["enterprise", "logistics"],
//!       "edges": [[0, 1, 1.0]] }
//!   ],
//!   "deps": [[0, 1, 1, 0, 0.5]],
//!   "hyperedges": [{ "vertices": [0, 1], "weight": 1.0 }]
//! }
//! ```
//!
//! `deps` entries are `[layer_a, node_a, layer_b, node_b, q]` meaning node
//! `node_a` of `layer_a` depends on `node_b` of `layer_b`. Hyperedge
//! vertices use the global index (layer offset + node). Undirected layers
//! list each edge once with `i <= j`.

use serde::{Deserialize, Serialize};

use super::multilayer::{Dependency, ElementKind, Hyperedge, Layer, MultilayerNetwork};
use super::NetError;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkDoc {
    pub format: u32,
    pub layers: Vec<LayerDoc>,
    #[serde(default)]
    pub deps: Vec<(usize, usize, usize, usize, f64)>,
    #[serde(default)]
    pub hyperedges: Vec<Hyperedge>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerDoc {
    pub name: String,
    #[serde(default)]
    pub directed: bool,
    pub kinds: Vec<ElementKind>,
    #[serde(default)]
    pub edges: Vec<(usize, usize, f64)>,
}

impl From<&MultilayerNetwork> for NetworkDoc {
    fn from(net: &MultilayerNetwork) -> Self {
        Self {
            format: FORMAT_VERSION,
            layers: net
                .layers()
                .iter()
                .map(|l| LayerDoc {
                    name: l.name.clone(),
                    directed: l.directed,
                    kinds: l.kinds().to_vec(),
                    edges: l.edges(),
                })
                .collect(),
            deps: net
                .deps()
                .iter()
                .map(|d| (d.layer_a, d.node_a, d.layer_b, d.node_b, d.q))
                .collect(),
            hyperedges: net.hyperedges().to_vec(),
        }
    }
}

impl TryFrom<NetworkDoc> for MultilayerNetwork {
    type Error = NetError;

    fn try_from(doc: NetworkDoc) -> Result<Self, NetError> {
        if doc.format != FORMAT_VERSION {
            return Err(NetError::UnsupportedFormat(doc.format));
        }
        let layers = doc
            .layers
            .into_iter()
            .map(|l| Layer::new(l.name, l.kinds, &l.edges, l.directed))
            .collect::<Result<Vec<_>, _>>()?;
        let deps = doc
            .deps
            .into_iter()
            .map(|(layer_a, node_a, layer_b, node_b, q)| Dependency {
                layer_a,
                node_a,
                layer_b,
                node_b,
                q,
            })
            .collect();
        MultilayerNetwork::new(layers, deps, doc.hyperedges)
    }
}

pub fn to_json(net: &MultilayerNetwork) -> String {
    serde_json::to_string_pretty(&NetworkDoc::from(net)).expect("network serializes")
}

pub fn from_json(text: &str) -> Result<MultilayerNetwork, NetError> {
    let doc: NetworkDoc = serde_json::from_str(text).map_err(|e| NetError::Parse(e.to_string()))?;
    doc.try_into()
}

pub fn read_file(path: &std::path::Path) -> Result<MultilayerNetwork, NetError> {
    let text = std::fs::read_to_string(path).map_err(|e| NetError::Io(e.to_string()))?;
    from_json(&text)
}

pub fn write_file(net: &MultilayerNetwork, path: &std::path::Path) -> Result<(), NetError> {
    std::fs::write(path, to_json(net)).map_err(|e| NetError::Io(e.to_string()))
}
