//! Penalized model-based Pontryagin control for a cruise-control problem
//! with a safety-gap state constraint.
//!
//! - [`types`]: validated parameter blocks and trajectory records
//! - [`config`]: flat `section.key = value` scenario files
//! - [`hamiltonian`]: pointwise Hamiltonian minimization over an interval and
//!   plant/model equivalence checks
//! - [`cruise_law`]: closed-form unconstrained and boundary-arc laws
//! - [`simulation`]: zero-order-hold closed-loop runs and cost accounting
//! - [`oracle`]: brute-force references (grid scan, finite differences,
//!   RK4, shooting)
//! - [`report`]: CSV trajectories, equivalence report and self-checks
//! - [`cli`]: command-line entry point

pub mod cli;
pub mod config;
pub mod cruise_law;
pub mod error;
pub mod hamiltonian;
pub mod oracle;
pub mod report;
pub mod simulation;
pub mod types;

pub use error::{Error, Result};
pub use types::*;
