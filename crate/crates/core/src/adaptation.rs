//! Adaptation laws for the four parameter estimates.
//!
//! Each law is chosen so that the coefficient of its estimate error in the
//! Lyapunov derivative vanishes: e.g. for `Theta1_hat` the coefficient is
//! `g2' e2 - Theta1_hat' / gamma1`. No projection is applied; estimates
//! that drift toward zero are caught by the controller's singularity guard.

use crate::controller::{BackstepErrors, ControlLaw, EstimateState, Gains};
use crate::extended::{self, ExtState3};
use crate::{Mat2, Vec2};

/// Time derivatives of [`EstimateState`], field for field.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EstimateRates {
    pub theta1: f64,
    pub vartheta1: f64,
    pub varphi1: f64,
    pub theta2: f64,
}

/// `k3 K12 + k1 k2 + 2`, the scalar part of the `varphi1_hat` weight.
pub fn varphi1_base(k: &Gains) -> f64 {
    k.k3 * k.big_k12() + k.k1 * k.k2 + 2.0
}

/// `(k3 K12 + k1 k2 + 2) I + gamma1 g2 g2'`.
pub fn varphi1_weight(g2: &Vec2, k: &Gains) -> Mat2 {
    varphi1_base(k) * Mat2::identity() + k.gamma1 * g2 * g2.transpose()
}

pub fn theta1_rate(e2: &Vec2, g2: &Vec2, k: &Gains) -> f64 {
    k.gamma1 * g2.dot(e2)
}

pub fn vartheta1_rate(coupling: f64, e3: &Vec2, g2: &Vec2, k: &Gains) -> f64 {
    k.gamma2 * coupling * g2.dot(e3)
}

/// `gamma3 g2' (c + gamma1 g2 g2') e4`, computed as
/// `gamma3 (c + gamma1 |g2|^2) g2' e4`; the two agree because
/// `g2' (g2 g2') = (g2' g2) g2'`.
pub fn varphi1_rate(e4: &Vec2, g2: &Vec2, k: &Gains) -> f64 {
    k.gamma3 * (varphi1_base(k) + k.gamma1 * g2.norm_squared()) * g2.dot(e4)
}

/// `gamma4 Theta1_hat [0 u2] G2' e4`.
pub fn theta2_rate(e4: &Vec2, jac: &Mat2, u2: f64, theta1_hat: f64, k: &Gains) -> f64 {
    k.gamma4 * theta1_hat * u2 * jac.column(1).dot(e4)
}

/// All four estimate rates at one instant.
pub fn adaptation_derivatives(
    law: ControlLaw,
    err: &BackstepErrors,
    x3: &ExtState3,
    u2: f64,
    est: &EstimateState,
    k: &Gains,
) -> EstimateRates {
    let g2 = extended::g2_map(x3);
    let jac = extended::g2_jacobian(x3);
    EstimateRates {
        theta1: theta1_rate(&err.e2, &g2, k),
        vartheta1: vartheta1_rate(law.coupling(k), &err.e3, &g2, k),
        varphi1: varphi1_rate(&err.e4, &g2, k),
        theta2: theta2_rate(&err.e4, &jac, u2, est.theta1, k),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn errs(e2: Vec2, e3: Vec2, e4: Vec2) -> BackstepErrors {
        BackstepErrors {
            e1: Vec2::zeros(),
            e2,
            e3,
            e4,
        }
    }

    #[test]
    fn zero_errors_freeze_estimates() {
        let x3 = ExtState3 {
            thrust: 9.0,
            theta: 0.3,
        };
        for law in [ControlLaw::Literal, ControlLaw::Exact] {
            let r = adaptation_derivatives(
                law,
                &BackstepErrors::default(),
                &x3,
                2.5,
                &EstimateState::default(),
                &Gains::default(),
            );
            assert_eq!(r, EstimateRates::default());
        }
    }

    #[test]
    fn theta1_rate_example() {
        let k = Gains {
            gamma1: 1.0,
            ..Default::default()
        };
        let x3 = ExtState3 {
            thrust: 2.0,
            theta: 0.0,
        };
        let r = adaptation_derivatives(
            ControlLaw::Literal,
            &errs(Vec2::new(0.0, 0.5), Vec2::zeros(), Vec2::zeros()),
            &x3,
            0.0,
            &EstimateState::default(),
            &k,
        );
        assert_abs_diff_eq!(r.theta1, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn equal_k1_k2_switches_off_literal_vartheta1() {
        let x3 = ExtState3 {
            thrust: 4.0,
            theta: -1.1,
        };
        let e = errs(Vec2::new(1.0, 2.0), Vec2::new(-3.0, 7.0), Vec2::new(0.4, 0.1));
        let k = Gains::default();
        assert_eq!(k.kappa12(), 0.0);
        let r = adaptation_derivatives(ControlLaw::Literal, &e, &x3, 1.0, &EstimateState::default(), &k);
        assert_eq!(r.vartheta1, 0.0);
    }

    #[test]
    fn matrix_and_scalar_forms_of_varphi1_weight_agree() {
        let g2 = Vec2::new(-3.0, 4.0);
        let e4 = Vec2::new(0.7, -0.2);
        let k = Gains::default();
        let matrix = k.gamma3 * g2.dot(&(varphi1_weight(&g2, &k) * e4));
        assert_abs_diff_eq!(varphi1_rate(&e4, &g2, &k), matrix, epsilon = 1e-12 * matrix.abs());
    }

    proptest! {
        // In the Lyapunov derivative each estimate error multiplies a
        // bracket; the laws make every bracket zero.
        #[test]
        fn lyapunov_cross_terms_cancel(
            thrust in -30.0f64..30.0,
            theta in -7.0f64..7.0,
            e in prop::array::uniform6(-50.0f64..50.0),
            e4 in (-500.0f64..500.0, -500.0f64..500.0),
            u2 in -100.0f64..100.0,
            theta1_hat in -2.0f64..2.0,
            g in prop::array::uniform8(0.01f64..10.0),
            literal in any::<bool>(),
        ) {
            let k = Gains { k1: g[0], k2: g[1], k3: g[2], k4: g[3], gamma1: g[4], gamma2: g[5], gamma3: g[6], gamma4: g[7] };
            let law = if literal { ControlLaw::Literal } else { ControlLaw::Exact };
            let x3 = ExtState3 { thrust, theta };
            let err = errs(Vec2::new(e[0], e[1]), Vec2::new(e[2], e[3]), Vec2::new(e4.0, e4.1));
            let est = EstimateState { theta1: theta1_hat, ..Default::default() };
            let r = adaptation_derivatives(law, &err, &x3, u2, &est, &k);
            let g2 = extended::g2_map(&x3);
            let jac = extended::g2_jacobian(&x3);

            let close = |lhs: f64, rhs: f64, scale: f64| (lhs - rhs).abs() <= 1e-15 * scale.max(1.0);

            let b1 = g2.dot(&err.e2);
            prop_assert!(close(b1, r.theta1 / k.gamma1, g2[0].abs() * err.e2[0].abs() + g2[1].abs() * err.e2[1].abs()));

            let c = law.coupling(&k);
            let b2 = c * g2.dot(&err.e3);
            prop_assert!(close(b2, r.vartheta1 / k.gamma2, c.abs() * (g2[0].abs() * err.e3[0].abs() + g2[1].abs() * err.e3[1].abs())));

            let w = varphi1_weight(&g2, &k);
            let b3 = g2.dot(&(w * err.e4));
            let s3 = (g2.abs().transpose() * w.abs() * err.e4.abs())[0];
            prop_assert!(close(b3, r.varphi1 / k.gamma3, s3));

            let sel = Vec2::new(0.0, u2);
            let b4 = theta1_hat * sel.dot(&(jac.transpose() * err.e4));
            let s4 = (theta1_hat * u2).abs() * (jac[(0, 1)].abs() * err.e4[0].abs() + jac[(1, 1)].abs() * err.e4[1].abs());
            prop_assert!(close(b4, r.theta2 / k.gamma4, s4));
        }
    }
}
