//! Exponential-family random graph models with local dependence.
//!
//! Nodes are partitioned into blocks; edges in different block-based
//! subgraphs are independent, and each subgraph follows an exponential
//! family in its own sufficient statistics. The crate covers model
//! specification, per-subgraph Metropolis sampling, Monte-Carlo maximum
//! likelihood, exact enumeration for small subgraphs, Fisher-information
//! estimation with Wald intervals, and simulation-study drivers.

pub mod cli;
pub mod config;
pub mod diagnostics;
pub mod error;
pub mod exact;
pub mod graph;
pub mod inference;
pub mod io;
pub mod linalg;
pub mod mcmle;
pub mod model;
pub mod par;
pub mod rng;
pub mod sampler;
pub mod studies;

pub use error::{Error, Result};
pub use graph::{BlockPartition, LocalGraph, SubgraphRef};
pub use model::{ModelSpec, ParamVector, StatVector, StatisticTerm};
