//! Closed-loop simulation.
//!
//! Plant (6 states), compensator (`F`, `F'`) and estimates (4) form one
//! 12-dimensional ODE, advanced with fixed-step RK4. The control is
//! re-evaluated at every RK4 stage.

use std::fmt;
use std::str::FromStr;

use nalgebra::SVector;
use thiserror::Error;

use crate::controller::{
    controller_derivatives, BackstepErrors, CompensatorState, ControlError, ControlLaw,
    ControlOutput, Controller, EstimateState, Gains, GainsError, EPS_SING,
};
use crate::extended::{self, ExtState3, ThetaTrue};
use crate::model::{self, ParamError, PhysicalParams, PlantState, Wrench};
use crate::trajectory::{
    EllipseParams, HilbertPlan, Reference, Trajectory, TrajectoryError, TrajectorySample,
};
use crate::Vec2;

mod rk4;

pub use rk4::{rk4_step, try_rk4_step};

pub type StateVec = SVector<f64, 12>;

pub const HOVER_DURATION: f64 = 15.0;
pub const ELLIPSE_DURATION: f64 = 40.0;
/// Hold time appended after the last Hilbert segment.
pub const HILBERT_HOLD: f64 = 5.0;

/// Full simulation state.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SimState {
    pub plant: PlantState,
    pub comp: CompensatorState,
    pub est: EstimateState,
}

impl SimState {
    pub fn to_vector(&self) -> StateVec {
        let p = self.plant.to_array();
        StateVec::from_column_slice(&[
            p[0],
            p[1],
            p[2],
            p[3],
            p[4],
            p[5],
            self.comp.thrust,
            self.comp.thrust_rate,
            self.est.theta1,
            self.est.vartheta1,
            self.est.varphi1,
            self.est.theta2,
        ])
    }

    pub fn from_vector(x: &StateVec) -> Self {
        Self {
            plant: PlantState::from_array([x[0], x[1], x[2], x[3], x[4], x[5]]),
            comp: CompensatorState {
                thrust: x[6],
                thrust_rate: x[7],
            },
            est: EstimateState {
                theta1: x[8],
                vartheta1: x[9],
                varphi1: x[10],
                theta2: x[11],
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Scenario {
    Hover { point: Vec2 },
    Ellipse(EllipseParams),
    Hilbert { order: u32, side: f64, v_max: f64, a_max: f64 },
}

impl Scenario {
    pub fn hover() -> Self {
        Scenario::Hover { point: Vec2::zeros() }
    }

    pub fn ellipse() -> Self {
        Scenario::Ellipse(EllipseParams::default())
    }

    pub fn hilbert() -> Self {
        Scenario::Hilbert {
            order: 2,
            side: 4.0,
            v_max: 1.0,
            a_max: 1.0,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Scenario::Hover { .. } => "hover",
            Scenario::Ellipse(_) => "ellipse",
            Scenario::Hilbert { .. } => "hilbert",
        }
    }

    /// Scenario with default parameters, by name.
    pub fn by_name(name: &str) -> Option<Self> {
        match name {
            "hover" => Some(Self::hover()),
            "ellipse" => Some(Self::ellipse()),
            "hilbert" => Some(Self::hilbert()),
            _ => None,
        }
    }

    pub fn build_reference(&self) -> Result<Trajectory, TrajectoryError> {
        match *self {
            Scenario::Hover { point } => Ok(Trajectory::Hover(point)),
            Scenario::Ellipse(p) => {
                p.validate()?;
                Ok(Trajectory::Ellipse(p))
            }
            Scenario::Hilbert {
                order,
                side,
                v_max,
                a_max,
            } => Ok(Trajectory::Hilbert(HilbertPlan::build(order, side, v_max, a_max)?)),
        }
    }

    /// Initial displacement from the reference start: the hover scenario
    /// starts one metre off in each axis, the tracking scenarios on it.
    pub fn default_offset(&self) -> Vec2 {
        match self {
            Scenario::Hover { .. } => Vec2::new(1.0, 1.0),
            _ => Vec2::zeros(),
        }
    }
}

/// How the tracking scenarios choose the initial state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StartMode {
    /// Match the reference: its velocity, the attitude and thrust that give
    /// its acceleration, and the rates that give its jerk (as far as those
    /// derivatives are fed forward), all under the initial estimates.
    #[default]
    Reference,
    /// At rest, level, hovering thrust `g / Theta1_hat`.
    Rest,
}

impl fmt::Display for StartMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StartMode::Reference => "reference",
            StartMode::Rest => "rest",
        })
    }
}

impl FromStr for StartMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "reference" => Ok(StartMode::Reference),
            "rest" => Ok(StartMode::Rest),
            other => Err(format!("unknown start mode `{other}` (expected reference or rest)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error(transparent)]
    Params(#[from] ParamError),
    #[error(transparent)]
    Gains(#[from] GainsError),
    #[error(transparent)]
    Trajectory(#[from] TrajectoryError),
    #[error("{name} = {value}: {reason}")]
    OutOfRange {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub params: PhysicalParams,
    pub gains: Gains,
    pub law: ControlLaw,
    /// Feed reference derivatives into the exact law. Only derivatives up
    /// to the reference's continuity order are used.
    pub feedforward: bool,
    pub scenario: Scenario,
    pub start: StartMode,
    /// Initial position minus reference start; `None` takes the scenario default.
    pub offset: Option<Vec2>,
    /// Overrides of the initial `F` and `F'`.
    pub thrust0: Option<f64>,
    pub thrust_rate0: Option<f64>,
    pub estimates: EstimateState,
    pub dt: f64,
    /// `None` takes the scenario default.
    pub duration: Option<f64>,
    /// Log every `decimation`-th step.
    pub decimation: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self::for_scenario(Scenario::ellipse())
    }
}

impl SimConfig {
    pub fn for_scenario(scenario: Scenario) -> Self {
        Self {
            params: PhysicalParams::default(),
            gains: Gains::default(),
            law: ControlLaw::default(),
            feedforward: true,
            scenario,
            start: StartMode::default(),
            offset: None,
            thrust0: None,
            thrust_rate0: None,
            estimates: EstimateState::default(),
            dt: 1e-3,
            duration: None,
            decimation: 10,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.params.validate()?;
        self.gains.validate()?;
        self.scenario.build_reference()?;
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(ConfigError::OutOfRange {
                name: "dt",
                value: self.dt,
                reason: "must be positive and finite",
            });
        }
        if let Some(d) = self.duration {
            if !(d.is_finite() && d >= self.dt) {
                return Err(ConfigError::OutOfRange {
                    name: "duration",
                    value: d,
                    reason: "must be finite and at least dt",
                });
            }
        }
        if self.decimation == 0 {
            return Err(ConfigError::OutOfRange {
                name: "decimation",
                value: 0.0,
                reason: "must be at least 1",
            });
        }
        let finite = [
            ("thrust0", self.thrust0),
            ("thrust_rate0", self.thrust_rate0),
            ("theta1_hat", Some(self.estimates.theta1)),
            ("vartheta1_hat", Some(self.estimates.vartheta1)),
            ("varphi1_hat", Some(self.estimates.varphi1)),
            ("theta2_hat", Some(self.estimates.theta2)),
            ("offset_r1", self.offset.map(|o| o[0])),
            ("offset_r2", self.offset.map(|o| o[1])),
        ];
        for (name, value) in finite {
            if let Some(v) = value.filter(|v| !v.is_finite()) {
                return Err(ConfigError::OutOfRange {
                    name,
                    value: v,
                    reason: "must be finite",
                });
            }
        }
        Ok(())
    }

    pub fn controller(&self) -> Controller {
        Controller::new(self.gains, self.params.gravity, self.law)
    }

    /// Run length: the explicit duration, or the scenario default.
    pub fn run_duration(&self, reference: &Trajectory) -> f64 {
        self.duration.unwrap_or(match reference {
            Trajectory::Hover(_) => HOVER_DURATION,
            Trajectory::Ellipse(_) => ELLIPSE_DURATION,
            Trajectory::Hilbert(plan) => plan.duration() + HILBERT_HOLD,
        })
    }

    /// Highest reference derivative handed to the controller.
    pub fn feedforward_order(&self, reference: &Trajectory) -> usize {
        if self.feedforward {
            reference.continuity_order()
        } else {
            0
        }
    }

    /// Whether the design guarantees `V4' <= 0` for this configuration:
    /// the exact law, with every reference derivative it differentiates
    /// either zero or fed forward.
    pub fn descent_guaranteed(&self) -> bool {
        let Ok(reference) = self.scenario.build_reference() else {
            return false;
        };
        self.law == ControlLaw::Exact
            && (reference.is_constant() || self.feedforward_order(&reference) >= 4)
    }
}

/// `V4 = 1/2 sum |e_i|^2 + sum 1/(2 gamma_i) (estimate_i - truth_i)^2`.
pub fn lyapunov_eval(errors: &BackstepErrors, est: &EstimateState, truth: &ThetaTrue, k: &Gains) -> f64 {
    let t1 = est.theta1 - truth.inv_mass;
    let v1 = est.vartheta1 - truth.inv_mass;
    let p1 = est.varphi1 - truth.inv_mass;
    let t2 = est.theta2 - truth.inv_inertia;
    0.5 * errors.sum_squares()
        + 0.5 * (t1 * t1 / k.gamma1 + v1 * v1 / k.gamma2 + p1 * p1 / k.gamma3 + t2 * t2 / k.gamma4)
}

/// One row of telemetry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogRecord {
    pub t: f64,
    pub plant: PlantState,
    pub comp: CompensatorState,
    /// `[F'', M]`.
    pub u: Vec2,
    /// Left and right rotor forces.
    pub rotor: (f64, f64),
    pub error_norms: [f64; 4],
    pub est: EstimateState,
    pub v4: f64,
}

impl LogRecord {
    pub fn state(&self) -> SimState {
        SimState {
            plant: self.plant,
            comp: self.comp,
            est: self.est,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    Config(#[from] ConfigError),
    #[error("t = {t}: {source}")]
    SingularInputMap { t: f64, source: ControlError },
    #[error("t = {t}: state is no longer finite")]
    NumericalDivergence { t: f64 },
}

/// A run that stopped early, with everything logged up to that point.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("{error}")]
pub struct SimAbort {
    pub error: SimError,
    pub records: Vec<LogRecord>,
}

impl From<SimError> for SimAbort {
    fn from(error: SimError) -> Self {
        Self {
            error,
            records: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimRun {
    pub records: Vec<LogRecord>,
    pub truth: ThetaTrue,
    pub duration: f64,
    pub steps: usize,
}

/// The assembled closed-loop vector field for one configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedLoop {
    pub params: PhysicalParams,
    pub truth: ThetaTrue,
    pub controller: Controller,
    pub reference: Trajectory,
    pub feedforward_order: usize,
}

impl ClosedLoop {
    pub fn new(cfg: &SimConfig) -> Result<Self, ConfigError> {
        cfg.validate()?;
        let reference = cfg.scenario.build_reference()?;
        Ok(Self {
            params: cfg.params,
            truth: ThetaTrue::from_params(&cfg.params),
            controller: cfg.controller(),
            feedforward_order: cfg.feedforward_order(&reference),
            reference,
        })
    }

    /// Reference as seen by the controller.
    pub fn reference_at(&self, t: f64) -> TrajectorySample {
        self.reference.sample(t).truncated(self.feedforward_order)
    }

    pub fn evaluate(&self, t: f64, s: &SimState) -> Result<ControlOutput, ControlError> {
        self.controller
            .evaluate(&s.plant, &s.comp, &s.est, &self.reference_at(t))
    }

    pub fn derivative(&self, t: f64, x: &StateVec) -> Result<StateVec, ControlError> {
        let s = SimState::from_vector(x);
        let out = self.evaluate(t, &s)?;
        let wrench = Wrench {
            thrust: s.comp.thrust,
            moment: out.u[1],
        };
        let p = model::plant_derivative(&s.plant, &wrench, &self.params);
        let c = controller_derivatives(&s.comp, &out.u);
        let r = out.rates;
        Ok(StateVec::from_column_slice(&[
            p[0],
            p[1],
            p[2],
            p[3],
            p[4],
            p[5],
            c.thrust,
            c.thrust_rate,
            r.theta1,
            r.vartheta1,
            r.varphi1,
            r.theta2,
        ]))
    }

    pub fn lyapunov(&self, errors: &BackstepErrors, est: &EstimateState) -> f64 {
        lyapunov_eval(errors, est, &self.truth, &self.controller.gains)
    }

    pub fn record(&self, t: f64, s: &SimState) -> Result<LogRecord, ControlError> {
        let out = self.evaluate(t, s)?;
        let wrench = Wrench {
            thrust: s.comp.thrust,
            moment: out.u[1],
        };
        // The arm length was validated with the rest of the parameters.
        let rotor = model::mix_forces(&wrench, self.params.arm_length).unwrap_or((f64::NAN, f64::NAN));
        Ok(LogRecord {
            t,
            plant: s.plant,
            comp: s.comp,
            u: out.u,
            rotor,
            error_norms: out.errors.norms(),
            est: s.est,
            v4: self.lyapunov(&out.errors, &s.est),
        })
    }

    /// Initial state for `cfg` (see [`StartMode`]).
    pub fn initial_state(&self, cfg: &SimConfig) -> Result<SimState, SimError> {
        let est = cfg.estimates;
        if est.theta1.is_nan() || est.theta1.abs() < EPS_SING {
            return Err(SimError::SingularInputMap {
                t: 0.0,
                source: ControlError::SingularInputMap {
                    thrust: cfg.thrust0.unwrap_or(f64::NAN),
                    theta1_hat: est.theta1,
                    theta2_hat: est.theta2,
                    det: 0.0,
                },
            });
        }
        let r = self.reference_at(0.0);
        let pos = r.pos + cfg.offset.unwrap_or(cfg.scenario.default_offset());
        let gravity = extended::f2_const(self.params.gravity);
        let (vel, x3, x4) = match cfg.start {
            StartMode::Rest => (
                Vec2::zeros(),
                ExtState3 {
                    thrust: self.params.gravity / est.theta1,
                    theta: 0.0,
                },
                Vec2::zeros(),
            ),
            StartMode::Reference => {
                // g2(F, theta) Theta1_hat = acc - f2
                let g2 = (r.acc - gravity) / est.theta1;
                let theta = if g2[0] == 0.0 { 0.0 } else { (-g2[0]).atan2(g2[1]) };
                let x3 = ExtState3 {
                    thrust: g2.norm(),
                    theta,
                };
                // G2 x4 Theta1_hat = jerk
                let x4 = extended::g2_jacobian(&x3)
                    .try_inverse()
                    .map_or(Vec2::zeros(), |inv| inv * r.jerk / est.theta1);
                (r.vel, x3, x4)
            }
        };
        Ok(SimState {
            plant: PlantState {
                r1: pos[0],
                r2: pos[1],
                v1: vel[0],
                v2: vel[1],
                theta: x3.theta,
                omega: x4[1],
            },
            comp: CompensatorState {
                thrust: cfg.thrust0.unwrap_or(x3.thrust),
                thrust_rate: cfg.thrust_rate0.unwrap_or(x4[0]),
            },
            est,
        })
    }
}

fn sign_flip(before: f64, after: f64) -> bool {
    before.signum() != after.signum()
}

/// Runs the configured scenario to completion.
///
/// Aborts with [`SimError::SingularInputMap`] when a guard fails at any
/// stage, or when `F`, `Theta1_hat` or `Theta2_hat` changes sign across a
/// step (the continuous trajectory must then pass through the singular
/// set, even if the step jumped over it). Non-finite states abort with
/// [`SimError::NumericalDivergence`].
pub fn run_closed_loop(cfg: &SimConfig) -> Result<SimRun, SimAbort> {
    let lp = ClosedLoop::new(cfg).map_err(SimError::from)?;
    let duration = cfg.run_duration(&lp.reference);
    let steps = ((duration / cfg.dt).round() as usize).max(1);
    let mut state = lp.initial_state(cfg)?;
    let mut records = Vec::with_capacity(steps / cfg.decimation + 2);

    let singular = |t: f64, source: ControlError, records: Vec<LogRecord>| SimAbort {
        error: SimError::SingularInputMap { t, source },
        records,
    };

    match lp.record(0.0, &state) {
        Ok(r) => records.push(r),
        Err(e) => return Err(singular(0.0, e, records)),
    }

    let mut x = state.to_vector();
    for i in 0..steps {
        let t = i as f64 * cfg.dt;
        let t_next = (i + 1) as f64 * cfg.dt;
        let (mut failed_at, mut stage_finite) = (t, true);
        let step = try_rk4_step(
            |tt, y| {
                failed_at = tt;
                stage_finite = y.iter().all(|v| v.is_finite());
                lp.derivative(tt, y)
            },
            t,
            &x,
            cfg.dt,
        );
        let x_next = match step {
            Ok(x_next) => x_next,
            // A blown-up stage trips the guards too; report the blow-up.
            Err(_) if !stage_finite => {
                return Err(SimAbort {
                    error: SimError::NumericalDivergence { t: failed_at },
                    records,
                })
            }
            Err(e) => return Err(singular(failed_at, e, records)),
        };
        if !x_next.iter().all(|v| v.is_finite()) {
            return Err(SimAbort {
                error: SimError::NumericalDivergence { t: t_next },
                records,
            });
        }
        let next = SimState::from_vector(&x_next);
        if sign_flip(state.comp.thrust, next.comp.thrust)
            || sign_flip(state.est.theta1, next.est.theta1)
            || sign_flip(state.est.theta2, next.est.theta2)
        {
            let source = ControlError::SingularInputMap {
                thrust: next.comp.thrust,
                theta1_hat: next.est.theta1,
                theta2_hat: next.est.theta2,
                det: next.est.theta1.powi(2) * next.est.theta2 * next.comp.thrust,
            };
            return Err(singular(t_next, source, records));
        }
        x = x_next;
        state = next;
        if (i + 1) % cfg.decimation == 0 || i + 1 == steps {
            match lp.record(t_next, &state) {
                Ok(r) => records.push(r),
                Err(e) => return Err(singular(t_next, e, records)),
            }
        }
    }
    Ok(SimRun {
        records,
        truth: lp.truth,
        duration,
        steps,
    })
}
