use serde::{Deserialize, Serialize};

use super::hypergraph::Hypergraph;
use super::sparse::CsrMatrix;
use super::NetError;

/// The twelve element kinds a node of an industrial chain can represent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ElementKind {
    RawMaterial,
    Market,
    Technology,
    Policy,
    Innovation,
    Enterprise,
    Product,
    Logistics,
    Information,
    Capital,
    Talent,
    Service,
}

impl ElementKind {
    pub const ALL: [ElementKind; 12] = [
        ElementKind::RawMaterial,
        ElementKind::Market,
        ElementKind::Technology,
        ElementKind::Policy,
        ElementKind::Innovation,
        ElementKind::Enterprise,
        ElementKind::Product,
        ElementKind::Logistics,
        ElementKind::Information,
        ElementKind::Capital,
        ElementKind::Talent,
        ElementKind::Service,
    ];

    pub fn index(self) -> usize {
        Self::ALL.iter().position(|k| *k == self).unwrap()
    }
}

/// One layer of a multilayer network: a weighted adjacency over its nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub name: String,
    pub directed: bool,
    kinds: Vec<ElementKind>,
    adjacency: CsrMatrix,
}

impl Layer {
    /// Builds a layer from `[i, j, w]` edges. Undirected layers store both
    /// `A_ij` and `A_ji`.
    pub fn new(
        name: impl Into<String>,
        kinds: Vec<ElementKind>,
        edges: &[(usize, usize, f64)],
        directed: bool,
    ) -> Result<Self, NetError> {
        let n = kinds.len();
        let mut triplets = Vec::with_capacity(edges.len() * 2);
        for &(i, j, w) in edges {
            if i >= n || j >= n {
                return Err(NetError::NodeOutOfRange {
                    node: i.max(j),
                    count: n,
                });
            }
            if !w.is_finite() || w < 0.0 {
                return Err(NetError::InvalidWeight(w));
            }
            triplets.push((i, j, w));
            if !directed && i != j {
                triplets.push((j, i, w));
            }
        }
        let mut seen = std::collections::HashSet::new();
        for &(i, j, _) in &triplets {
            if !seen.insert((i, j)) {
                return Err(NetError::DuplicateEdge(i, j));
            }
        }
        Ok(Self {
            name: name.into(),
            directed,
            kinds,
            adjacency: CsrMatrix::from_triplets(n, n, &triplets),
        })
    }

    pub fn uniform(
        name: impl Into<String>,
        n: usize,
        kind: ElementKind,
        edges: &[(usize, usize, f64)],
    ) -> Result<Self, NetError> {
        Self::new(name, vec![kind; n], edges, false)
    }

    pub fn node_count(&self) -> usize {
        self.kinds.len()
    }

    pub fn kinds(&self) -> &[ElementKind] {
        &self.kinds
    }

    pub fn adjacency(&self) -> &CsrMatrix {
        &self.adjacency
    }

    /// Edge list in canonical order: all stored entries for directed
    /// layers, the upper triangle for undirected ones.
    pub fn edges(&self) -> Vec<(usize, usize, f64)> {
        self.adjacency
            .iter()
            .filter(|&(i, j, _)| self.directed || i <= j)
            .collect()
    }

    /// Unweighted degree of each node on the symmetrized structure.
    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0usize; self.node_count()];
        for (i, j, _) in self.edges() {
            if i == j {
                continue;
            }
            deg[i] += 1;
            deg[j] += 1;
        }
        deg
    }

    /// Symmetric neighbor lists (ignores direction and self loops).
    pub fn neighbor_lists(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.node_count()];
        for (i, j, _) in self.edges() {
            if i == j {
                continue;
            }
            out[i].push(j);
            out[j].push(i);
        }
        for l in &mut out {
            l.sort_unstable();
            l.dedup();
        }
        out
    }

    pub(crate) fn with_adjacency(&self, adjacency: CsrMatrix, kinds: Vec<ElementKind>) -> Self {
        Self {
            name: self.name.clone(),
            directed: self.directed,
            kinds,
            adjacency,
        }
    }
}

/// Interdependency: node `node_a` in `layer_a` depends on node `node_b` in
/// `layer_b` with coupling strength `q`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Dependency {
    pub layer_a: usize,
    pub node_a: usize,
    pub layer_b: usize,
    pub node_b: usize,
    pub q: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperedge {
    pub vertices: Vec<usize>,
    pub weight: f64,
}

/// Immutable multilayer network with interlayer dependencies and optional
/// hyperedges over the global (layer-offset) vertex index space.
#[derive(Debug, Clone, PartialEq)]
pub struct MultilayerNetwork {
    layers: Vec<Layer>,
    deps: Vec<Dependency>,
    hyperedges: Vec<Hyperedge>,
}

impl MultilayerNetwork {
    pub fn new(layers: Vec<Layer>, deps: Vec<Dependency>, hyperedges: Vec<Hyperedge>) -> Result<Self, NetError> {
        if layers.is_empty() {
            return Err(NetError::NoLayers);
        }
        for d in &deps {
            for (layer, node) in [(d.layer_a, d.node_a), (d.layer_b, d.node_b)] {
                let l = layers.get(layer).ok_or(NetError::LayerOutOfRange(layer))?;
                if node >= l.node_count() {
                    return Err(NetError::NodeOutOfRange {
                        node,
                        count: l.node_count(),
                    });
                }
            }
            if !(0.0..=1.0).contains(&d.q) {
                return Err(NetError::InvalidCoupling(d.q));
            }
            if d.layer_a == d.layer_b && d.node_a == d.node_b {
                return Err(NetError::SelfDependency {
                    layer: d.layer_a,
                    node: d.node_a,
                });
            }
        }
        let total: usize = layers.iter().map(Layer::node_count).sum();
        for h in &hyperedges {
            if h.vertices.is_empty() {
                return Err(NetError::EmptyHyperedge);
            }
            if let Some(&v) = h.vertices.iter().find(|&&v| v >= total) {
                return Err(NetError::NodeOutOfRange { node: v, count: total });
            }
            if !(h.weight > 0.0 && h.weight.is_finite()) {
                return Err(NetError::InvalidWeight(h.weight));
            }
        }
        Ok(Self {
            layers,
            deps,
            hyperedges,
        })
    }

    pub fn single(layer: Layer) -> Self {
        Self {
            layers: vec![layer],
            deps: Vec::new(),
            hyperedges: Vec::new(),
        }
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn deps(&self) -> &[Dependency] {
        &self.deps
    }

    pub fn hyperedges(&self) -> &[Hyperedge] {
        &self.hyperedges
    }

    /// Offset of each layer in the global vertex index, plus the total.
    pub fn offsets(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.layers.len() + 1);
        let mut acc = 0;
        out.push(0);
        for l in &self.layers {
            acc += l.node_count();
            out.push(acc);
        }
        out
    }

    pub fn total_nodes(&self) -> usize {
        self.layers.iter().map(Layer::node_count).sum()
    }

    pub fn global_index(&self, layer: usize, node: usize) -> usize {
        self.offsets()[layer] + node
    }

    /// Hypergraph over all global vertices formed by the stored hyperedges.
    pub fn hypergraph(&self) -> Result<Hypergraph, NetError> {
        Hypergraph::new(
            self.total_nodes(),
            self.hyperedges.iter().map(|h| h.vertices.clone()).collect(),
            self.hyperedges.iter().map(|h| h.weight).collect(),
        )
    }

    /// Mean coupling `q_ji` that layer `i` receives from layer `j`: the sum
    /// of `q` over dependencies of `i`-nodes on `j`-nodes, divided by the
    /// node count of `i`, clipped to 1.
    pub fn layer_coupling(&self, j: usize, i: usize) -> f64 {
        let n = self.layers[i].node_count();
        if n == 0 {
            return 0.0;
        }
        let s: f64 = self
            .deps
            .iter()
            .filter(|d| d.layer_a == i && d.layer_b == j)
            .map(|d| d.q)
            .sum();
        (s / n as f64).min(1.0)
    }
}

/// Operator multiplying each diagonal block of the supra-adjacency.
#[derive(Debug, Clone, Default, PartialEq)]
pub enum IntraLayerOperator {
    #[default]
    Identity,
    /// One diagonal scaling vector per layer; block `m` becomes `A[m] * diag(t[m])`.
    Diagonal(Vec<Vec<f64>>),
}

/// Block matrix with layer adjacencies on the diagonal and dependency
/// couplings off the diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct SupraAdjacency {
    pub offsets: Vec<usize>,
    pub matrix: CsrMatrix,
}

pub fn build_supra_adjacency(net: &MultilayerNetwork, op: &IntraLayerOperator) -> Result<SupraAdjacency, NetError> {
    let offsets = net.offsets();
    let total = *offsets.last().unwrap();
    if let IntraLayerOperator::Diagonal(scales) = op {
        if scales.len() != net.layers().len() || scales.iter().zip(net.layers()).any(|(s, l)| s.len() != l.node_count())
        {
            return Err(NetError::DimensionMismatch {
                expected: total,
                got: scales.iter().map(Vec::len).sum(),
            });
        }
    }
    let mut t = Vec::new();
    for (m, layer) in net.layers().iter().enumerate() {
        let o = offsets[m];
        for (i, j, w) in layer.adjacency().iter() {
            let w = match op {
                IntraLayerOperator::Identity => w,
                IntraLayerOperator::Diagonal(s) => w * s[m][j],
            };
            t.push((o + i, o + j, w));
        }
    }
    for d in net.deps() {
        t.push((offsets[d.layer_a] + d.node_a, offsets[d.layer_b] + d.node_b, d.q));
    }
    Ok(SupraAdjacency {
        offsets,
        matrix: CsrMatrix::from_triplets(total, total, &t),
    })
}

impl SupraAdjacency {
    pub fn layer_block(&self, alpha: usize) -> CsrMatrix {
        let (a, b) = (self.offsets[alpha], self.offsets[alpha + 1]);
        self.matrix.block(a, a, b - a, b - a)
    }

    pub fn coupling_block(&self, alpha: usize, beta: usize) -> CsrMatrix {
        let (a0, a1) = (self.offsets[alpha], self.offsets[alpha + 1]);
        let (b0, b1) = (self.offsets[beta], self.offsets[beta + 1]);
        self.matrix.block(a0, b0, a1 - a0, b1 - b0)
    }

    /// Splits back into diagonal blocks and dependency entries.
    pub fn decompose(&self) -> (Vec<CsrMatrix>, Vec<Dependency>) {
        let m = self.offsets.len() - 1;
        let blocks = (0..m).map(|a| self.layer_block(a)).collect();
        let mut deps = Vec::new();
        for a in 0..m {
            for b in 0..m {
                if a == b {
                    continue;
                }
                for (i, j, q) in self.coupling_block(a, b).iter() {
                    deps.push(Dependency {
                        layer_a: a,
                        node_a: i,
                        layer_b: b,
                        node_b: j,
                        q,
                    });
                }
            }
        }
        (blocks, deps)
    }
}
