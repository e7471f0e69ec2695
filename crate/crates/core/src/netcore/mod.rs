//! Multilayer network and hypergraph data model.

mod hypergraph;
pub mod io;
mod multilayer;
mod sparse;

pub use hypergraph::{
    build_incidence, hypergraph_laplacian, min_eigenvalue, quadratic_form, regularizer_omega, Hypergraph,
    HypergraphLaplacian, Incidence, LaplacianOptions,
};
pub use multilayer::{
    build_supra_adjacency, Dependency, ElementKind, Hyperedge, IntraLayerOperator, Layer, MultilayerNetwork,
    SupraAdjacency,
};
pub use sparse::CsrMatrix;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NetError {
    #[error("hyperedge has no vertices")]
    EmptyHyperedge,
    #[error("vertex {0} has zero degree")]
    IsolatedVertex(usize),
    #[error("node index {node} out of range for {count} nodes")]
    NodeOutOfRange { node: usize, count: usize },
    #[error("layer index {0} out of range")]
    LayerOutOfRange(usize),
    #[error("invalid weight {0}")]
    InvalidWeight(f64),
    #[error("coupling {0} outside [0, 1]")]
    InvalidCoupling(f64),
    #[error("node {node} of layer {layer} depends on itself")]
    SelfDependency { layer: usize, node: usize },
    #[error("duplicate edge ({0}, {1})")]
    DuplicateEdge(usize, usize),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("network has no layers")]
    NoLayers,
    #[error("unsupported network format version {0}")]
    UnsupportedFormat(u32),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("io error: {0}")]
    Io(String),
}
