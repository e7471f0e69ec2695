//! Resilience modelling for industrial-chain networks.
//!
//! The crate is organised bottom-up:
//!
//! - [`netcore`]: multilayer networks, hypergraphs, Laplacians, supra-adjacency
//! - [`cca`]: cellular-automaton node dynamics and Hamiltonian learning
//! - [`varem`]: variational EM over knowledge-graph triples with weighted rules
//! - [`nnblocks`]: small differentiable blocks (dense, gating, GAT, GRU, RK4)
//! - [`observe`]: spatio-temporal observation pipeline and monitoring losses
//! - [`orientdecide`]: event graphs, hierarchical attention, plan ranking
//! - [`resilience`]: interdependent percolation, coupled dynamics, interventions
//! - [`streams`]: drifting synthetic streams and evaluation metrics

pub mod cca;
pub mod netcore;
pub mod nnblocks;
pub mod observe;
pub mod orientdecide;
pub mod resilience;
pub mod streams;
pub mod varem;
