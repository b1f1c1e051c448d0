//! Cycle-level model of a superconductor SFQ systolic CNN accelerator
//! with a heterogeneous scratchpad memory system.
//!
//! The crate is organized around the flow of an experiment:
//!
//! - [`memtech`]: cryogenic memory technology tables and array-level
//!   latency/energy/area models, including shift-register seek semantics.
//! - [`htree`]: SFQ passive-transmission-line H-trees and the pipelined
//!   CMOS-SFQ random-access array, with a design-space explorer.
//! - [`workload`]: CNN layer configs, weight-stationary access traces,
//!   per-layer instruction DAGs, memory objects and lifespans.
//! - [`compiler`]: the 0/1 allocation/prefetch program over DAG edges, a
//!   branch-and-bound solver with an exhaustive oracle mode, LP-format
//!   export, and an independent schedule validator.
//! - [`sim`]: the deterministic cycle-level simulator with stall and
//!   energy breakdowns, including the cryocooler overhead.
//! - [`config`]: accelerator profiles and experiment configuration.

pub mod compiler;
pub mod config;
pub mod error;
pub mod htree;
pub mod memtech;
pub mod sim;
pub mod workload;
pub mod units;

pub use error::{Error, Result};
