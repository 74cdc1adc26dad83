//! Proactive placement and chaining of virtual network functions over CDN
//! surrogate servers.
//!
//! The crate is organised bottom-up:
//!
//! - [`topology`] and [`workload`] describe the network and the service requests,
//! - [`paths`] routes load over the physical graph,
//! - [`placement`] holds the solution model and judges solutions (feasibility,
//!   delay, cost, metrics),
//! - [`exact`] finds cost-optimal placements on small instances,
//! - [`sir`] ranks surrogates with a personalized PageRank, and [`cpvnf`] uses
//!   that rank to place chains heuristically,
//! - [`experiment`] runs seeded scenarios and writes CSV metrics.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cpvnf;
pub mod error;
pub mod exact;
pub mod experiment;
mod io;
pub mod paths;
pub mod placement;
pub mod sir;
pub mod topology;
pub mod workload;

pub use error::{Error, Result};
