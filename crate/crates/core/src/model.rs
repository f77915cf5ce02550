//! Planar bicopter rigid-body model.
//!
//! Two rotors at distance `l` from the centre of mass produce thrusts `f1`
//! (left) and `f2` (right). They act on the body through the total thrust
//! `F = f1 + f2` and the roll moment `M = (f2 - f1) l`:
//!
//! ```text
//! m r1'' = -F sin(theta)
//! m r2'' =  F cos(theta) - m g
//! J theta'' = M
//! ```

use thiserror::Error;

pub const DEFAULT_GRAVITY: f64 = 9.81;
pub const DEFAULT_ARM_LENGTH: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamError {
    #[error("{name} must be positive and finite, got {value}")]
    NotPositive { name: &'static str, value: f64 },
}

pub(crate) fn require_positive(name: &'static str, value: f64) -> Result<f64, ParamError> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(ParamError::NotPositive { name, value })
    }
}

/// Physical constants of the vehicle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalParams {
    /// Mass [kg].
    pub mass: f64,
    /// Roll inertia [kg m^2].
    pub inertia: f64,
    /// Gravitational acceleration [m/s^2].
    pub gravity: f64,
    /// Rotor arm length [m]. Only used to split the wrench into rotor forces.
    pub arm_length: f64,
}

impl Default for PhysicalParams {
    fn default() -> Self {
        Self {
            mass: 1.0,
            inertia: 0.2,
            gravity: DEFAULT_GRAVITY,
            arm_length: DEFAULT_ARM_LENGTH,
        }
    }
}

impl PhysicalParams {
    pub fn validate(&self) -> Result<(), ParamError> {
        require_positive("m", self.mass)?;
        require_positive("J", self.inertia)?;
        require_positive("g", self.gravity)?;
        require_positive("arm_length", self.arm_length)?;
        Ok(())
    }
}

/// Position, velocity, roll angle and roll rate.
///
/// The roll angle is never wrapped; it stays continuous over full turns.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PlantState {
    pub r1: f64,
    pub r2: f64,
    pub v1: f64,
    pub v2: f64,
    pub theta: f64,
    pub omega: f64,
}

impl PlantState {
    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|x| x.is_finite())
    }

    pub fn to_array(&self) -> [f64; 6] {
        [self.r1, self.r2, self.v1, self.v2, self.theta, self.omega]
    }

    pub fn from_array(a: [f64; 6]) -> Self {
        Self {
            r1: a[0],
            r2: a[1],
            v1: a[2],
            v2: a[3],
            theta: a[4],
            omega: a[5],
        }
    }
}

/// Total thrust and roll moment.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Wrench {
    /// Total thrust [N].
    pub thrust: f64,
    /// Roll moment [N m].
    pub moment: f64,
}

/// Time derivative of [`PlantState`], in the same field order.
pub fn plant_derivative(s: &PlantState, w: &Wrench, p: &PhysicalParams) -> [f64; 6] {
    let (sin, cos) = s.theta.sin_cos();
    [
        s.v1,
        s.v2,
        -w.thrust * sin / p.mass,
        w.thrust * cos / p.mass - p.gravity,
        s.omega,
        w.moment / p.inertia,
    ]
}

/// Splits a wrench into the left and right rotor forces.
pub fn mix_forces(w: &Wrench, arm_length: f64) -> Result<(f64, f64), ParamError> {
    let l = require_positive("arm_length", arm_length)?;
    let per_rotor = w.moment / l;
    Ok((0.5 * (w.thrust - per_rotor), 0.5 * (w.thrust + per_rotor)))
}

/// Inverse of [`mix_forces`].
pub fn unmix_forces(f1: f64, f2: f64, arm_length: f64) -> Result<Wrench, ParamError> {
    let l = require_positive("arm_length", arm_length)?;
    Ok(Wrench {
        thrust: f1 + f2,
        moment: (f2 - f1) * l,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn hover_is_an_equilibrium() {
        let p = PhysicalParams::default();
        let w = Wrench {
            thrust: p.mass * p.gravity,
            moment: 0.0,
        };
        let d = plant_derivative(&PlantState::default(), &w, &p);
        assert_eq!(d, [0.0; 6]);
    }

    #[test]
    fn double_hover_thrust_accelerates_up_at_g() {
        let p = PhysicalParams::default();
        let w = Wrench {
            thrust: 19.62,
            moment: 0.0,
        };
        let d = plant_derivative(&PlantState::default(), &w, &p);
        assert_abs_diff_eq!(d[2], 0.0);
        assert_abs_diff_eq!(d[3], 9.81, epsilon = 1e-12);
        assert_abs_diff_eq!(d[5], 0.0);
    }

    #[test]
    fn quarter_turn_thrust_is_horizontal() {
        let p = PhysicalParams::default();
        let s = PlantState {
            theta: FRAC_PI_2,
            ..Default::default()
        };
        let w = Wrench {
            thrust: 1.0,
            moment: 0.2,
        };
        let d = plant_derivative(&s, &w, &p);
        assert_abs_diff_eq!(d[2], -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(d[3], -9.81, epsilon = 1e-12);
        assert_abs_diff_eq!(d[5], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn mixing_examples() {
        let hover = Wrench {
            thrust: 10.0,
            moment: 0.0,
        };
        assert_eq!(mix_forces(&hover, 0.5).unwrap(), (5.0, 5.0));
        let rolling = Wrench {
            thrust: 10.0,
            moment: 1.0,
        };
        assert_eq!(mix_forces(&rolling, 0.5).unwrap(), (4.0, 6.0));
        assert_eq!(mix_forces(&Wrench::default(), 0.5).unwrap(), (0.0, 0.0));

        assert_eq!(unmix_forces(5.0, 5.0, 0.5).unwrap(), hover);
        assert_eq!(unmix_forces(4.0, 6.0, 0.5).unwrap(), rolling);
        assert_eq!(unmix_forces(0.0, 0.0, 0.5).unwrap(), Wrench::default());
    }

    #[test]
    fn non_positive_arm_length_is_rejected() {
        assert!(mix_forces(&Wrench::default(), 0.0).is_err());
        assert!(mix_forces(&Wrench::default(), -1.0).is_err());
        assert!(unmix_forces(1.0, 1.0, 0.0).is_err());
        assert!(unmix_forces(1.0, 1.0, f64::NAN).is_err());
    }

    #[test]
    fn params_validation_names_the_field() {
        let p = PhysicalParams {
            inertia: 0.0,
            ..Default::default()
        };
        assert_eq!(
            p.validate(),
            Err(ParamError::NotPositive {
                name: "J",
                value: 0.0
            })
        );
    }

    proptest! {
        #[test]
        fn mix_unmix_round_trip(
            thrust in -50.0f64..50.0,
            moment in -10.0f64..10.0,
            l in 1e-3f64..=2.0,
        ) {
            let w = Wrench { thrust, moment };
            let (f1, f2) = mix_forces(&w, l).unwrap();
            let back = unmix_forces(f1, f2, l).unwrap();
            let scale = thrust.abs().max(moment.abs() / l).max(1.0);
            prop_assert!((back.thrust - thrust).abs() <= 1e-12 * scale);
            prop_assert!((back.moment - moment).abs() <= 1e-12 * scale * l.max(1.0));
        }

        #[test]
        fn accelerations_are_linear_in_the_wrench(
            theta in -10.0f64..10.0,
            a in -3.0f64..3.0,
            b in -3.0f64..3.0,
            w1 in (-30.0f64..30.0, -5.0f64..5.0),
            w2 in (-30.0f64..30.0, -5.0f64..5.0),
        ) {
            // Gravity is an affine offset; drop it to test the linear part.
            let p = PhysicalParams { gravity: 0.0, ..Default::default() };
            let s = PlantState { theta, ..Default::default() };
            let w1 = Wrench { thrust: w1.0, moment: w1.1 };
            let w2 = Wrench { thrust: w2.0, moment: w2.1 };
            let combo = Wrench {
                thrust: a * w1.thrust + b * w2.thrust,
                moment: a * w1.moment + b * w2.moment,
            };
            let d1 = plant_derivative(&s, &w1, &p);
            let d2 = plant_derivative(&s, &w2, &p);
            let dc = plant_derivative(&s, &combo, &p);
            for i in [2, 3, 5] {
                let expected = a * d1[i] + b * d2[i];
                let scale = 1.0 + (a * d1[i]).abs() + (b * d2[i]).abs();
                prop_assert!((dc[i] - expected).abs() <= 1e-12 * scale);
            }
        }
    }
}
