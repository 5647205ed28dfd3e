//! Curvature-constrained vector field guidance for nonholonomic robots.
//!
//! The crate builds a blended planar field whose integral curves have
//! bounded curvature and converge to a loiter circle through the target,
//! a saturated tracking controller that follows the field without ever
//! exceeding the curvature limit outside a small disk, a unicycle simulator,
//! a Monte Carlo metrics harness, and fixed-wing setpoint conversion.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod controller;
pub mod error;
pub mod fixedwing;
pub mod format;
pub mod geometry;
pub mod metrics;
pub mod scenario;
pub mod simulator;
pub mod vfield;

pub use controller::{control, ControlOutput, ControlParams};
pub use error::{CvfError, Result};
pub use metrics::{run_monte_carlo, MetricsReport, MonteCarloConfig};
pub use scenario::{load_scenario, Scenario};
pub use simulator::{simulate, ConvergenceReport, SimConfig, Trajectory};
pub use geometry::{wrap_angle, Configuration, Vec2};
pub use vfield::{CvfParams, FieldGeometry, RegionId};
