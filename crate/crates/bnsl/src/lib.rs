//! Structure learning for discrete Bayesian networks.
//!
//! The crate covers the full pipeline: data handling and contingency
//! counting, G2 independence testing and BIC scoring, partially directed
//! graph algebra with constraint-based orientation, stable and partitioned
//! skeleton estimation, p-value thresholding over a solution path, hybrid
//! greedy initialization, tabu-augmented hill-climbing, benchmark network
//! simulation, and structural evaluation metrics.

pub mod cluster;
pub mod data;
pub mod error;
pub mod eval;
pub mod graph;
pub mod hgi;
pub mod path;
pub mod search;
pub mod sim;
pub mod skeleton;
pub mod stats;

pub use data::Dataset;
pub use graph::{Pdag, SeparationRecord, VStructure};
pub use sim::BayesNet;
