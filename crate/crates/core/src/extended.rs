//! Dynamically extended bicopter in pure-feedback form.
//!
//! Treating the thrust as the output of a double integrator turns the
//! plant into the cascade
//!
//! ```text
//! x1' = x2
//! x2' = f2 + g2(x3) Theta1
//! x3' = x4
//! x4' = diag(1, Theta2) u
//! ```
//!
//! with `x1 = [r1, r2]`, `x2 = [r1', r2']`, `x3 = [F, theta]`,
//! `x4 = [F', theta']`, `u = [F'', M]` and `Theta = [1/m, 1/J]`.
//!
//! Without the extension the input `[F, M]` enters the velocity and
//! roll-rate equations through the 3x2 map returned by
//! [`pre_extension_input_map`], which has rank 2 and no inverse, so plain
//! backstepping cannot assign all three accelerations. After the extension
//! the input map `diag(1, Theta2)` is square and invertible.

use nalgebra::Matrix3x2;

use crate::model::{ParamError, PhysicalParams, PlantState};
use crate::{Mat2, Vec2};

/// `x3 = [F, theta]`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ExtState3 {
    pub thrust: f64,
    pub theta: f64,
}

/// `x4 = [F', theta']`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ExtState4 {
    pub thrust_rate: f64,
    pub omega: f64,
}

impl ExtState3 {
    pub fn as_vec(&self) -> Vec2 {
        Vec2::new(self.thrust, self.theta)
    }

    pub fn from_vec(v: &Vec2) -> Self {
        Self {
            thrust: v[0],
            theta: v[1],
        }
    }
}

impl ExtState4 {
    pub fn as_vec(&self) -> Vec2 {
        Vec2::new(self.thrust_rate, self.omega)
    }

    pub fn from_vec(v: &Vec2) -> Self {
        Self {
            thrust_rate: v[0],
            omega: v[1],
        }
    }
}

/// The true inverse mass and inverse inertia. Only known to the simulator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaTrue {
    pub inv_mass: f64,
    pub inv_inertia: f64,
}

impl ThetaTrue {
    pub fn new(inv_mass: f64, inv_inertia: f64) -> Result<Self, ParamError> {
        Ok(Self {
            inv_mass: crate::model::require_positive("inv_mass", inv_mass)?,
            inv_inertia: crate::model::require_positive("inv_inertia", inv_inertia)?,
        })
    }

    pub fn from_params(p: &PhysicalParams) -> Self {
        Self {
            inv_mass: p.mass.recip(),
            inv_inertia: p.inertia.recip(),
        }
    }
}

/// Splits the plant and compensator states into the extended coordinates.
pub fn extended_coordinates(
    s: &PlantState,
    thrust: f64,
    thrust_rate: f64,
) -> (Vec2, Vec2, ExtState3, ExtState4) {
    (
        Vec2::new(s.r1, s.r2),
        Vec2::new(s.v1, s.v2),
        ExtState3 {
            thrust,
            theta: s.theta,
        },
        ExtState4 {
            thrust_rate,
            omega: s.omega,
        },
    )
}

/// Gravity drift `f2 = [0, -g]`.
pub fn f2_const(gravity: f64) -> Vec2 {
    Vec2::new(0.0, -gravity)
}

/// Thrust direction scaled by thrust, `g2(x3) = F [-sin(theta), cos(theta)]`.
pub fn g2_map(x3: &ExtState3) -> Vec2 {
    let (sin, cos) = x3.theta.sin_cos();
    Vec2::new(-sin * x3.thrust, cos * x3.thrust)
}

/// Jacobian of [`g2_map`] with columns ordered like `x3`:
/// `[dg2/dF, dg2/dtheta]`, so that `d/dt g2 = G2 x4`. Its determinant is `F`.
pub fn g2_jacobian(x3: &ExtState3) -> Mat2 {
    let (sin, cos) = x3.theta.sin_cos();
    let f = x3.thrust;
    Mat2::new(-sin, -f * cos, cos, -f * sin)
}

/// Time derivative of [`g2_jacobian`] along `x3' = x4`.
pub fn g2_jacobian_dot(x3: &ExtState3, x4: &ExtState4) -> Mat2 {
    let (sin, cos) = x3.theta.sin_cos();
    let (f, f_dot, w) = (x3.thrust, x4.thrust_rate, x4.omega);
    Mat2::new(
        -cos * w,
        -f_dot * cos + f * sin * w,
        -sin * w,
        -f_dot * sin - f * cos * w,
    )
}

/// Input map of `[v1', v2', omega']` with respect to `[F, M]` before the
/// extension (mass and inertia factored out).
pub fn pre_extension_input_map(theta: f64) -> Matrix3x2<f64> {
    let (sin, cos) = theta.sin_cos();
    Matrix3x2::new(-sin, 0.0, cos, 0.0, 0.0, 1.0)
}
