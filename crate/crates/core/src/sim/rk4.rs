use nalgebra::SVector;

/// One classical fourth-order Runge-Kutta step of `x' = f(t, x)`.
pub fn rk4_step<const N: usize, F>(mut f: F, t: f64, x: &SVector<f64, N>, h: f64) -> SVector<f64, N>
where
    F: FnMut(f64, &SVector<f64, N>) -> SVector<f64, N>,
{
    let k1 = f(t, x);
    let k2 = f(t + 0.5 * h, &(x + 0.5 * h * k1));
    let k3 = f(t + 0.5 * h, &(x + 0.5 * h * k2));
    let k4 = f(t + h, &(x + h * k3));
    x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
}

/// [`rk4_step`] for a right-hand side that can fail at any stage.
pub fn try_rk4_step<const N: usize, E, F>(
    mut f: F,
    t: f64,
    x: &SVector<f64, N>,
    h: f64,
) -> Result<SVector<f64, N>, E>
where
    F: FnMut(f64, &SVector<f64, N>) -> Result<SVector<f64, N>, E>,
{
    let k1 = f(t, x)?;
    let k2 = f(t + 0.5 * h, &(x + 0.5 * h * k1))?;
    let k3 = f(t + 0.5 * h, &(x + 0.5 * h * k2))?;
    let k4 = f(t + h, &(x + h * k3))?;
    Ok(x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{Vector1, Vector2};

    fn decay_error(h: f64) -> f64 {
        let steps = (1.0 / h).round() as usize;
        let mut x = Vector1::new(1.0);
        for i in 0..steps {
            x = rk4_step(|_, y| -y, i as f64 * h, &x, h);
        }
        (x[0] - (-1.0f64).exp()).abs()
    }

    #[test]
    fn one_step_of_exponential_decay() {
        let x = rk4_step(|_, y: &Vector1<f64>| -y, 0.0, &Vector1::new(1.0), 0.1);
        assert!((x[0] - (-0.1f64).exp()).abs() < 1e-7);
        assert!((x[0] - 0.9048375).abs() < 1e-7);
    }

    #[test]
    fn zero_field_keeps_state() {
        let x0 = Vector2::new(3.0, -4.0);
        let x = rk4_step(|_, _| Vector2::zeros(), 2.0, &x0, 0.5);
        assert_eq!(x, x0);
    }

    #[test]
    fn global_error_is_fourth_order() {
        for h in [0.1, 0.05, 0.025] {
            let ratio = decay_error(h) / decay_error(h / 2.0);
            assert!((ratio / 16.0 - 1.0).abs() < 0.1, "h = {h}: ratio {ratio}");
        }
    }

    #[test]
    fn constant_acceleration_is_integrated_exactly() {
        // x = [F, F'], F'' = u1 constant.
        let (f0, fd0, u1) = (2.0, -1.5, 3.25);
        let h = 0.01;
        let mut x = Vector2::new(f0, fd0);
        for i in 0..500 {
            x = rk4_step(|_, y: &Vector2<f64>| Vector2::new(y[1], u1), i as f64 * h, &x, h);
        }
        let t = 5.0;
        assert!((x[0] - (f0 + fd0 * t + 0.5 * u1 * t * t)).abs() < 1e-10);
        assert!((x[1] - (fd0 + u1 * t)).abs() < 1e-10);
    }

    #[test]
    fn failing_stage_aborts_the_step() {
        let r: Result<Vector1<f64>, &str> = try_rk4_step(
            |t, y| if t > 0.0 { Err("late stage") } else { Ok(-y) },
            0.0,
            &Vector1::new(1.0),
            0.1,
        );
        assert_eq!(r, Err("late stage"));
    }
}
