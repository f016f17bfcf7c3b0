//! Hierarchical vehicle routing toolkit: a genetic search over
//! customer-to-depot assignments whose fitness comes from a learned
//! per-subproblem cost predictor, with a built-in single-depot routing
//! heuristic for labeling and for routing the final candidates.
//!
//! The crate covers multi-depot routing end to end and the
//! location-routing extension, together with the analytical cost
//! estimators, data-generation phases, and the benchmark harness used
//! to evaluate everything.

pub mod bench;
pub mod clrp;
pub mod cvrp;
pub mod datagen;
pub mod error;
pub mod estimators;
pub mod ga;
pub mod geom;
pub mod instances;
pub mod nn;

pub use error::{Error, Result};
