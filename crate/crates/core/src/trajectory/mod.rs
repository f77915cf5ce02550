//! Reference trajectories: a fixed hover point, the tilted ellipse and a
//! Hilbert-curve path flown with rest-to-rest trapezoidal speed profiles.

use thiserror::Error;

use crate::Vec2;

mod hilbert;

pub use hilbert::{hilbert_cells, HilbertPlan, SegmentProfile};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrajectoryError {
    #[error("Hilbert order {0} is not supported (expected 1..=5)")]
    UnsupportedOrder(u32),
    #[error("{name} must be positive and finite, got {value}")]
    NotPositive { name: &'static str, value: f64 },
    #[error("ellipse angular rate must be positive, got {0}")]
    NonPositiveRate(f64),
}

/// Reference position and its first four time derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TrajectorySample {
    pub pos: Vec2,
    pub vel: Vec2,
    pub acc: Vec2,
    pub jerk: Vec2,
    pub snap: Vec2,
}

impl TrajectorySample {
    pub fn at_rest(pos: Vec2) -> Self {
        Self {
            pos,
            ..Default::default()
        }
    }

    /// Copy with every derivative above `order` set to zero.
    pub fn truncated(&self, order: usize) -> Self {
        let mut out = *self;
        let keep = |k: usize, v: Vec2| if k <= order { v } else { Vec2::zeros() };
        out.vel = keep(1, self.vel);
        out.acc = keep(2, self.acc);
        out.jerk = keep(3, self.jerk);
        out.snap = keep(4, self.snap);
        out
    }

    pub fn is_finite(&self) -> bool {
        [self.pos, self.vel, self.acc, self.jerk, self.snap]
            .iter()
            .all(|v| v.iter().all(|x| x.is_finite()))
    }
}

/// A time-parameterized reference.
pub trait Reference {
    fn sample(&self, t: f64) -> TrajectorySample;

    /// Highest derivative that is continuous in time. Derivatives above this
    /// order jump, so a tracking law should not differentiate through them.
    fn continuity_order(&self) -> usize;
}

pub fn hover_sample(point: Vec2) -> TrajectorySample {
    TrajectorySample::at_rest(point)
}

/// Tilted ellipse through the origin.
///
/// `r(t) = c - A [cos(wt), sin(wt)]` with centre `c = a [cos(phi), sin(phi)]`
/// and `A = [[a cos(phi), b sin(phi)], [a sin(phi), -b cos(phi)]]`, so the
/// path starts at the origin at `t = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EllipseParams {
    /// Tilt of the major axis [rad].
    pub phi: f64,
    /// Angular rate [rad/s].
    pub omega: f64,
    /// Semi-major axis [m].
    pub a: f64,
    /// Semi-minor axis [m].
    pub b: f64,
}

impl Default for EllipseParams {
    fn default() -> Self {
        Self {
            phi: std::f64::consts::FRAC_PI_4,
            omega: 0.3,
            a: 5.0,
            b: 3.0,
        }
    }
}

impl EllipseParams {
    pub fn validate(&self) -> Result<(), TrajectoryError> {
        if !(self.omega.is_finite() && self.omega > 0.0) {
            return Err(TrajectoryError::NonPositiveRate(self.omega));
        }
        for (name, value) in [("ellipse a", self.a), ("ellipse b", self.b)] {
            if !(value.is_finite() && value > 0.0) {
                return Err(TrajectoryError::NotPositive { name, value });
            }
        }
        Ok(())
    }

    pub fn period(&self) -> f64 {
        std::f64::consts::TAU / self.omega
    }
}

pub fn ellipse_sample(t: f64, p: &EllipseParams) -> TrajectorySample {
    let (sp, cp) = p.phi.sin_cos();
    let (s, c) = (p.omega * t).sin_cos();
    let centre = Vec2::new(p.a * cp, p.a * sp);
    let shape = crate::Mat2::new(-p.a * cp, -p.b * sp, -p.a * sp, p.b * cp);

    // d/dt [cos, sin] = w [-sin, cos]: each derivative rotates by a quarter
    // turn and scales by w.
    let mut phase = Vec2::new(c, s);
    let mut derivs = [Vec2::zeros(); 5];
    for (k, d) in derivs.iter_mut().enumerate() {
        *d = shape * phase;
        if k == 0 {
            *d += centre;
        }
        phase = p.omega * Vec2::new(-phase[1], phase[0]);
    }
    TrajectorySample {
        pos: derivs[0],
        vel: derivs[1],
        acc: derivs[2],
        jerk: derivs[3],
        snap: derivs[4],
    }
}

/// The references the simulator knows how to fly.
#[derive(Debug, Clone, PartialEq)]
pub enum Trajectory {
    Hover(Vec2),
    Ellipse(EllipseParams),
    Hilbert(HilbertPlan),
}

impl Reference for Trajectory {
    fn sample(&self, t: f64) -> TrajectorySample {
        match self {
            Trajectory::Hover(p) => hover_sample(*p),
            Trajectory::Ellipse(e) => ellipse_sample(t, e),
            Trajectory::Hilbert(plan) => plan.sample(t),
        }
    }

    fn continuity_order(&self) -> usize {
        match self {
            Trajectory::Hover(_) | Trajectory::Ellipse(_) => 4,
            Trajectory::Hilbert(_) => 1,
        }
    }
}

impl Trajectory {
    /// True when the reference never moves.
    pub fn is_constant(&self) -> bool {
        matches!(self, Trajectory::Hover(_))
    }
}
