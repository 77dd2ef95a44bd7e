//! Network Lasso for localized linear regression on networked data.
//!
//! Each node of a weighted graph carries its own linear weight vector. Given
//! labels on a few nodes, [`solver::solve`] minimizes the absolute training
//! error plus `lambda` times the total variation of the weights with a
//! diagonally preconditioned primal-dual method. [`ncc::check_ncc`] certifies,
//! through maximum flows, when the labeled nodes are placed well enough for a
//! piecewise-constant truth to be recovered.

pub mod error;
pub mod graph;
pub mod model;
pub mod solver;
pub mod flow;
pub mod ncc;
pub mod datagen;
pub mod baseline;
pub mod io;
pub mod experiment;

pub use error::{Error, Result};
pub use graph::{Edge, EdgeSignal, EmpiricalGraph, NodeSignal};
pub use model::{NetworkDataset, NoiseKind, NoiseSpec, Partition};
pub use ncc::NccReport;
pub use solver::{SolverConfig, SolverResult};
