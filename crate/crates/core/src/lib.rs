//! Adaptive backstepping control of a planar bicopter.
//!
//! The thrust is dynamically extended with two integrators so that the
//! plant becomes a four-block pure-feedback cascade with an invertible
//! input map. A backstepping design on that cascade, with four parameter
//! adaptation laws for the unknown inverse mass and inertia, produces the
//! control `u = [F'', M]`. The [`sim`] module co-integrates plant,
//! compensator and estimates with fixed-step RK4.

pub mod adaptation;
pub mod controller;
pub mod extended;
pub mod model;
pub mod sim;
pub mod trajectory;

pub type Vec2 = nalgebra::Vector2<f64>;
pub type Mat2 = nalgebra::Matrix2<f64>;

pub use adaptation::{adaptation_derivatives, EstimateRates};
pub use controller::{
    BackstepErrors, CompensatorState, ControlError, ControlLaw, ControlOutput, Controller,
    EstimateState, Gains, GainsError, EPS_SING,
};
pub use extended::{ExtState3, ExtState4, ThetaTrue};
pub use model::{PhysicalParams, PlantState, Wrench};
pub use sim::{
    lyapunov_eval, rk4_step, run_closed_loop, ClosedLoop, ConfigError, LogRecord, Scenario,
    SimAbort, SimConfig, SimError, SimRun, SimState, StartMode,
};
pub use trajectory::{EllipseParams, HilbertPlan, Reference, Trajectory, TrajectorySample};
