//! Backstepping error system and control law for the extended bicopter.
//!
//! The virtual controls of the third and fourth steps are defined through
//! the estimate errors, which contain the unknown true parameter. Written
//! out, the unknown cancels, and `e3`, `e4` become closed forms in the
//! state and the estimates. Those closed forms are what this module
//! computes; [`Controller::xi2`] and [`Controller::xi3`] give the pieces
//! of the definitional forms for checking against a known truth.
//!
//! Two laws are available:
//!
//! * [`ControlLaw::Exact`] (default) is derived so that along closed-loop
//!   trajectories `V4' = -sum k_i |e_i|^2` holds for any reference whose
//!   derivatives are supplied up to fourth order. It is written in error
//!   coordinates `v = x2 - r'`, `a = f2 - r''`.
//! * [`ControlLaw::Literal`] is the formula set as typeset in the original
//!   derivation, in absolute coordinates. Several of its terms do not match
//!   the derivation, and it does not make `V4` decrease.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::adaptation::{self, EstimateRates};
use crate::extended;
use crate::model::PlantState;
use crate::trajectory::TrajectorySample;
use crate::{Mat2, Vec2};

/// Threshold below which `|F|`, `|Theta1_hat|` and `|Theta2_hat|` count as
/// singular. The inverted matrix must also satisfy `|det| >= EPS_SING^3`.
pub const EPS_SING: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GainsError {
    #[error("gain {name} must be positive and finite, got {value}")]
    NotPositive { name: &'static str, value: f64 },
}

/// Backstepping gains `k1..k4` and adaptation gains `gamma1..gamma4`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gains {
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    pub k4: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub gamma3: f64,
    pub gamma4: f64,
}

impl Default for Gains {
    fn default() -> Self {
        Self {
            k1: 5.0,
            k2: 5.0,
            k3: 4.0,
            k4: 4.0,
            gamma1: 1.0,
            gamma2: 0.05,
            gamma3: 0.05,
            gamma4: 0.1,
        }
    }
}

impl Gains {
    pub fn validate(&self) -> Result<(), GainsError> {
        for (name, value) in self.named() {
            if !(value.is_finite() && value > 0.0) {
                return Err(GainsError::NotPositive { name, value });
            }
        }
        Ok(())
    }

    pub fn named(&self) -> [(&'static str, f64); 8] {
        [
            ("k1", self.k1),
            ("k2", self.k2),
            ("k3", self.k3),
            ("k4", self.k4),
            ("gamma1", self.gamma1),
            ("gamma2", self.gamma2),
            ("gamma3", self.gamma3),
            ("gamma4", self.gamma4),
        ]
    }

    /// `k1 - k2`.
    pub fn kappa12(&self) -> f64 {
        self.k1 - self.k2
    }

    /// `k1 + k2`.
    pub fn big_k12(&self) -> f64 {
        self.k1 + self.k2
    }
}

/// Estimates of `1/m` (three independent copies) and `1/J`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateState {
    pub theta1: f64,
    pub vartheta1: f64,
    pub varphi1: f64,
    pub theta2: f64,
}

impl Default for EstimateState {
    fn default() -> Self {
        Self {
            theta1: 0.5,
            vartheta1: 0.5,
            varphi1: 0.5,
            theta2: 40.0,
        }
    }
}

impl EstimateState {
    pub fn is_finite(&self) -> bool {
        [self.theta1, self.vartheta1, self.varphi1, self.theta2]
            .iter()
            .all(|x| x.is_finite())
    }
}

/// Thrust and thrust rate carried by the dynamic extension.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CompensatorState {
    pub thrust: f64,
    pub thrust_rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ControlLaw {
    Literal,
    #[default]
    Exact,
}

impl ControlLaw {
    /// Coefficient tying `vartheta1_hat` into `e4` and its adaptation law.
    pub fn coupling(&self, k: &Gains) -> f64 {
        match self {
            ControlLaw::Literal => k.kappa12(),
            ControlLaw::Exact => k.big_k12(),
        }
    }
}

impl fmt::Display for ControlLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ControlLaw::Literal => "literal",
            ControlLaw::Exact => "exact",
        })
    }
}

impl FromStr for ControlLaw {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "literal" => Ok(ControlLaw::Literal),
            "exact" => Ok(ControlLaw::Exact),
            other => Err(format!("unknown control law `{other}` (expected literal or exact)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BackstepErrors {
    pub e1: Vec2,
    pub e2: Vec2,
    pub e3: Vec2,
    pub e4: Vec2,
}

impl BackstepErrors {
    pub fn norms(&self) -> [f64; 4] {
        [self.e1.norm(), self.e2.norm(), self.e3.norm(), self.e4.norm()]
    }

    pub fn sum_squares(&self) -> f64 {
        [self.e1, self.e2, self.e3, self.e4]
            .iter()
            .map(|e| e.norm_squared())
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ControlError {
    #[error(
        "singular input map: F = {thrust:e}, theta1_hat = {theta1_hat:e}, \
         theta2_hat = {theta2_hat:e}, det = {det:e}"
    )]
    SingularInputMap {
        thrust: f64,
        theta1_hat: f64,
        theta2_hat: f64,
        det: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlOutput {
    /// `[F'', M]`.
    pub u: Vec2,
    pub errors: BackstepErrors,
    /// `B` in `Theta1_hat G2 diag(1, Theta2_hat) u = -B`.
    pub bracket: Vec2,
    /// `Theta1_hat G2 diag(1, Theta2_hat)`.
    pub input_matrix: Mat2,
    /// `Theta1_hat^2 Theta2_hat F`, the determinant of `input_matrix`.
    pub det: f64,
    pub rates: EstimateRates,
}

impl ControlOutput {
    /// `|A u + B| / (|A| |u| + |B|)`.
    pub fn relative_residual(&self) -> f64 {
        let lhs = self.input_matrix * self.u;
        let scale = self.input_matrix.norm() * self.u.norm() + self.bracket.norm();
        (lhs + self.bracket).norm() / scale.max(f64::MIN_POSITIVE)
    }
}

/// Everything the error and control formulas need at one instant.
struct Frame {
    x4: Vec2,
    e1: Vec2,
    /// Position term of `xi2`: `x1` for the literal law, `e1` otherwise.
    lead: Vec2,
    /// Velocity in error coordinates.
    v: Vec2,
    /// Drift in error coordinates, and its first two time derivatives.
    a: Vec2,
    a_dot: Vec2,
    a_ddot: Vec2,
    g2: Vec2,
    jac: Mat2,
    jac_dot: Mat2,
    g2g2t: Mat2,
}

/// Gains, gravity and law choice; the controller itself is stateless.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Controller {
    pub gains: Gains,
    pub gravity: f64,
    pub law: ControlLaw,
}

impl Controller {
    pub fn new(gains: Gains, gravity: f64, law: ControlLaw) -> Self {
        Self { gains, gravity, law }
    }

    fn frame(&self, s: &PlantState, c: &CompensatorState, r: &TrajectorySample) -> Frame {
        let (x1, x2, x3, x4) = extended::extended_coordinates(s, c.thrust, c.thrust_rate);
        let f2 = extended::f2_const(self.gravity);
        let e1 = x1 - r.pos;
        let (lead, v, a, a_dot, a_ddot) = match self.law {
            ControlLaw::Literal => (x1, x2, f2, Vec2::zeros(), Vec2::zeros()),
            ControlLaw::Exact => (e1, x2 - r.vel, f2 - r.acc, -r.jerk, -r.snap),
        };
        let g2 = extended::g2_map(&x3);
        Frame {
            x4: x4.as_vec(),
            e1,
            lead,
            v,
            a,
            a_dot,
            a_ddot,
            g2,
            jac: extended::g2_jacobian(&x3),
            jac_dot: extended::g2_jacobian_dot(&x3, &x4),
            g2g2t: g2 * g2.transpose(),
        }
    }

    fn errors_in(&self, f: &Frame, est: &EstimateState) -> BackstepErrors {
        let k = &self.gains;
        let coupling = self.law.coupling(k);
        let e2 = f.v + k.k1 * f.e1;
        let e3 = f.lead + f.a + f.g2 * est.theta1 + k.k1 * f.v + k.k2 * e2;
        let e4 = 2.0 * f.v
            + k.k1 * f.e1
            + f.a_dot
            + f.jac * f.x4 * est.theta1
            + k.gamma1 * f.g2g2t * e2
            + coupling * (f.a + f.g2 * est.vartheta1)
            + k.k1 * k.k2 * f.v
            + k.k3 * e3;
        BackstepErrors { e1: f.e1, e2, e3, e4 }
    }

    /// Backstepping errors in their computable, estimate-substituted form.
    pub fn compute_errors(
        &self,
        s: &PlantState,
        c: &CompensatorState,
        est: &EstimateState,
        r: &TrajectorySample,
    ) -> BackstepErrors {
        self.errors_in(&self.frame(s, c, r), est)
    }

    /// `xi2` evaluated with the true `Theta1`; `e3 = g2 (Theta1_hat - Theta1) + xi2 + k2 e2`.
    pub fn xi2(
        &self,
        s: &PlantState,
        c: &CompensatorState,
        r: &TrajectorySample,
        theta1_true: f64,
    ) -> Vec2 {
        let f = self.frame(s, c, r);
        f.lead + f.a + f.g2 * theta1_true + self.gains.k1 * f.v
    }

    /// `xi3` evaluated with the true `Theta1`;
    /// `e4 = coupling g2 (vartheta1_hat - Theta1) + xi3 + k3 e3`.
    pub fn xi3(
        &self,
        s: &PlantState,
        c: &CompensatorState,
        est: &EstimateState,
        r: &TrajectorySample,
        theta1_true: f64,
    ) -> Vec2 {
        let f = self.frame(s, c, r);
        let k = &self.gains;
        let e2 = f.v + k.k1 * f.e1;
        2.0 * f.v
            + k.k1 * f.e1
            + f.a_dot
            + f.jac * f.x4 * est.theta1
            + k.gamma1 * f.g2g2t * e2
            + self.law.coupling(k) * (f.a + f.g2 * theta1_true)
            + k.k1 * k.k2 * f.v
    }

    fn bracket(&self, f: &Frame, est: &EstimateState, e: &BackstepErrors, rates: &EstimateRates) -> Vec2 {
        let k = &self.gains;
        let big = k.big_k12();
        let weight = adaptation::varphi1_weight(&f.g2, k);
        let jx4 = f.jac * f.x4;
        let common = k.k4 * e.e4
            + e.e3
            + (f.jac_dot + k.k3 * f.jac) * f.x4 * est.theta1
            + big * jx4 * est.vartheta1
            + big * f.g2 * rates.vartheta1;
        match self.law {
            ControlLaw::Literal => {
                let x2 = f.v;
                common
                    + weight * (f.a + f.g2 * est.varphi1)
                    + ((k.k3 * (k.k1 * k.k2 + 1.0) + k.k1) * Mat2::identity() + k.gamma1 * f.g2g2t) * x2
                    + (jx4 - k.k3 * f.g2) * rates.theta1
                    + 2.0 * k.gamma1 * jx4 * f.g2.dot(&(x2 + k.k1 * f.e1))
            }
            ControlLaw::Exact => {
                common
                    + weight * (f.a + f.g2 * est.varphi1)
                    + ((k.k1 + k.k3 * (1.0 + k.k1 * k.k2)) * Mat2::identity()
                        + k.gamma1 * k.k1 * f.g2g2t)
                        * f.v
                    + f.a_ddot
                    + (big + k.k3) * f.a_dot
                    + (2.0 * jx4 + k.k3 * f.g2) * rates.theta1
                    + k.gamma1 * f.g2 * jx4.dot(&e.e2)
            }
        }
    }

    fn law_in(
        &self,
        f: &Frame,
        c: &CompensatorState,
        est: &EstimateState,
        errors: BackstepErrors,
    ) -> Result<ControlOutput, ControlError> {
        let det = est.theta1 * est.theta1 * est.theta2 * c.thrust;
        // NaN counts as singular.
        let small = |x: f64, eps: f64| x.is_nan() || x.abs() < eps;
        let singular = [c.thrust, est.theta1, est.theta2]
            .iter()
            .any(|&x| small(x, EPS_SING))
            || small(det, EPS_SING.powi(3));
        if singular {
            return Err(ControlError::SingularInputMap {
                thrust: c.thrust,
                theta1_hat: est.theta1,
                theta2_hat: est.theta2,
                det,
            });
        }
        let k = &self.gains;
        let theta1 = adaptation::theta1_rate(&errors.e2, &f.g2, k);
        let vartheta1 = adaptation::vartheta1_rate(self.law.coupling(k), &errors.e3, &f.g2, k);
        let partial = EstimateRates {
            theta1,
            vartheta1,
            ..Default::default()
        };
        let bracket = self.bracket(f, est, &errors, &partial);
        let input_matrix = est.theta1 * f.jac * Mat2::from_diagonal(&Vec2::new(1.0, est.theta2));
        let u = input_matrix
            .lu()
            .solve(&(-bracket))
            .ok_or(ControlError::SingularInputMap {
                thrust: c.thrust,
                theta1_hat: est.theta1,
                theta2_hat: est.theta2,
                det,
            })?;
        let rates = EstimateRates {
            varphi1: adaptation::varphi1_rate(&errors.e4, &f.g2, k),
            theta2: adaptation::theta2_rate(&errors.e4, &f.jac, u[1], est.theta1, k),
            ..partial
        };
        Ok(ControlOutput {
            u,
            errors,
            bracket,
            input_matrix,
            det,
            rates,
        })
    }

    /// Control `u = -(Theta1_hat G2 diag(1, Theta2_hat))^-1 B` for already
    /// computed errors, together with the four estimate rates.
    pub fn control_law(
        &self,
        s: &PlantState,
        c: &CompensatorState,
        est: &EstimateState,
        r: &TrajectorySample,
        errors: &BackstepErrors,
    ) -> Result<ControlOutput, ControlError> {
        self.law_in(&self.frame(s, c, r), c, est, *errors)
    }

    /// Errors and control in one pass.
    pub fn evaluate(
        &self,
        s: &PlantState,
        c: &CompensatorState,
        est: &EstimateState,
        r: &TrajectorySample,
    ) -> Result<ControlOutput, ControlError> {
        let f = self.frame(s, c, r);
        let errors = self.errors_in(&f, est);
        self.law_in(&f, c, est, errors)
    }
}

/// Derivative of the compensator state: `(F', F'') = (F', u1)`.
pub fn controller_derivatives(c: &CompensatorState, u: &Vec2) -> CompensatorState {
    CompensatorState {
        thrust: c.thrust_rate,
        thrust_rate: u[0],
    }
}
