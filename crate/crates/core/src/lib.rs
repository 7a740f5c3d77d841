//! Quantum Markov chains on the comb graph for Ising-type nearest-neighbour
//! interactions: graph geometry, local operator algebra, transition kernels,
//! boundary fields, state evaluation and a brute-force reference.

pub mod algebra;
pub mod battery;
pub mod boundary;
pub mod cli;
pub mod config;
pub mod engine;
pub mod error;
pub mod graph;
pub mod kernels;
pub mod oracle;
pub mod verify;

pub use algebra::{LocalOperator, SiteMatrix, C64};
pub use boundary::BoundaryField;
pub use config::Limits;
pub use engine::Observable;
pub use error::{Error, Result};
pub use graph::Vertex;
pub use kernels::{model_params, ModelParams};
