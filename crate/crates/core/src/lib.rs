#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod config;
pub mod env_model;
pub mod error;
pub mod limit_laws;
pub mod occupancy;
pub mod quadrature;
pub mod seeds;
pub mod stats;
pub mod traps;
pub mod verify;
pub mod walk;

pub use env_model::{sample_environment, solve_tail_index, Environment, EnvironmentModel, ModelSpec};
pub use error::{Error, Result};
pub use occupancy::{compute_rho, RhoProfile, TailEstimate};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
