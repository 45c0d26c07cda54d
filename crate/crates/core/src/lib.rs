//! Max-min offered-capacity-to-traffic-ratio (OCTR) resource allocation for
//! NOMA multibeam satellite downlinks.
//!
//! The pipeline is: [`scenario`] builds a geometry-driven channel instance,
//! [`scheduler`] groups terminals into timeslots, [`precoder`] computes a
//! per-slot MMSE precoder, and [`solver`] balances beam powers so every beam
//! reaches the same minimum OCTR. [`harness`] holds brute-force oracles and
//! the Monte-Carlo experiment runner.

// Negated comparisons reject NaN along with the out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod harness;
pub mod noma;
pub mod precoder;
pub mod scenario;
pub mod scheduler;
pub mod solver;

pub use error::{Error, Result};
pub use noma::AccessScheme;
pub use scenario::{Scenario, ScenarioConfig};
pub use scheduler::{jopdt, oma_baseline, Assignment, GroupingKind, GroupingStrategy, JopdtOptions, P5Method};
pub use solver::{jopd, SolveResult, SolverOptions};
