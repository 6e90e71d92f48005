//! Model-free adaptive control on the equivalent dynamic linearization model.
//!
//! * [`edlm`]: pseudo-gradient, increment windows, Taylor pseudo-gradients.
//! * [`estimator`]: projection estimate of the pseudo-gradient.
//! * [`controller`]: one-step, iterative, polynomial-cost and box-constrained laws.
//! * [`analysis`]: closed-loop poles and static tracking error.
//! * [`plants`]: benchmark plants and reference trajectories.
//! * [`harness`]: scenarios, the simulation loop, metrics and CSV traces.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod controller;
pub mod edlm;
pub mod error;
pub mod estimator;
pub mod harness;
pub mod plants;

pub use analysis::{
    build_t, lambda_sweep, poles, static_error_power, static_error_ramp, ClosedLoopPolynomial,
    Polynomial, StabilityReport, StaticErrorLimit, SweepRow, Verdict,
};
pub use controller::{ControlDecision, ControlMode, ControllerConfig, PgSource};
pub use edlm::{
    Argument, IncrementWindow, PartialDerivativeTable, PgVector, PseudoOrders, Regressor,
    SignalHistory, Truncation,
};
pub use error::{MfacError, Result};
pub use estimator::{EstimatorConfig, EstimatorState, ResetPolicy};
pub use harness::{run, Metrics, Scenario, SimTrace, Termination, TraceRow};
pub use plants::{Plant, PlantSpec, Trajectory};
