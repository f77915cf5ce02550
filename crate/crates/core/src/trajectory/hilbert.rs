use super::{TrajectoryError, TrajectorySample};
use crate::Vec2;

/// Grid cells of a Hilbert curve of the given order, in visiting order.
///
/// Built recursively: the order-`n` curve is four copies of the order-`n-1`
/// curve, transposed in the lower-left quadrant and anti-transposed in the
/// lower-right one so the copies join end to end.
pub fn hilbert_cells(order: u32) -> Vec<(u32, u32)> {
    let mut cells = vec![(0u32, 0u32)];
    for level in 0..order {
        let s = 1u32 << level;
        let mut next = Vec::with_capacity(cells.len() * 4);
        next.extend(cells.iter().map(|&(x, y)| (y, x)));
        next.extend(cells.iter().map(|&(x, y)| (x, y + s)));
        next.extend(cells.iter().map(|&(x, y)| (x + s, y + s)));
        next.extend(cells.iter().map(|&(x, y)| (2 * s - 1 - y, s - 1 - x)));
        cells = next;
    }
    cells
}

/// Rest-to-rest trapezoidal timing of one straight segment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentProfile {
    pub t_start: f64,
    pub from: Vec2,
    pub to: Vec2,
    /// Unit direction of travel.
    pub dir: Vec2,
    pub length: f64,
    pub accel_time: f64,
    pub cruise_time: f64,
    /// Speed reached at the end of the acceleration ramp.
    pub peak_speed: f64,
    pub accel: f64,
}

impl SegmentProfile {
    fn new(t_start: f64, from: Vec2, to: Vec2, v_max: f64, a_max: f64) -> Self {
        let delta = to - from;
        let length = delta.norm();
        // Triangular when the segment is too short to reach v_max.
        let peak_speed = v_max.min((length * a_max).sqrt());
        let accel_time = peak_speed / a_max;
        let cruise_time = ((length - peak_speed * peak_speed / a_max) / peak_speed).max(0.0);
        Self {
            t_start,
            from,
            to,
            dir: delta / length,
            length,
            accel_time,
            cruise_time,
            peak_speed,
            accel: a_max,
        }
    }

    pub fn duration(&self) -> f64 {
        2.0 * self.accel_time + self.cruise_time
    }

    pub fn t_end(&self) -> f64 {
        self.t_start + self.duration()
    }

    /// Distance, speed and signed acceleration along the segment at local time `tau`.
    fn along(&self, tau: f64) -> (f64, f64, f64) {
        let (ta, tc, a, v) = (self.accel_time, self.cruise_time, self.accel, self.peak_speed);
        if tau <= ta {
            (0.5 * a * tau * tau, a * tau, a)
        } else if tau <= ta + tc {
            (0.5 * a * ta * ta + v * (tau - ta), v, 0.0)
        } else {
            let left = (self.duration() - tau).max(0.0);
            (self.length - 0.5 * a * left * left, a * left, -a)
        }
    }

    fn sample(&self, t: f64) -> TrajectorySample {
        let tau = t - self.t_start;
        let (dist, speed, acc) = self.along(tau);
        // Measure the deceleration phase from the far end so the segment
        // lands exactly on its endpoint.
        let pos = if dist * 2.0 > self.length {
            self.to - (self.length - dist) * self.dir
        } else {
            self.from + dist * self.dir
        };
        TrajectorySample {
            pos,
            vel: speed * self.dir,
            acc: acc * self.dir,
            ..Default::default()
        }
    }
}

/// Waypoints on the cell centres of a Hilbert curve over `[0, side]^2`,
/// joined by straight rest-to-rest segments.
#[derive(Debug, Clone, PartialEq)]
pub struct HilbertPlan {
    pub waypoints: Vec<Vec2>,
    pub segments: Vec<SegmentProfile>,
    pub v_max: f64,
    pub a_max: f64,
}

impl HilbertPlan {
    pub fn build(order: u32, side: f64, v_max: f64, a_max: f64) -> Result<Self, TrajectoryError> {
        if !(1..=5).contains(&order) {
            return Err(TrajectoryError::UnsupportedOrder(order));
        }
        for (name, value) in [("hilbert side", side), ("v_max", v_max), ("a_max", a_max)] {
            if !(value.is_finite() && value > 0.0) {
                return Err(TrajectoryError::NotPositive { name, value });
            }
        }
        let cell = side / f64::from(1u32 << order);
        let waypoints: Vec<Vec2> = hilbert_cells(order)
            .into_iter()
            .map(|(x, y)| Vec2::new((f64::from(x) + 0.5) * cell, (f64::from(y) + 0.5) * cell))
            .collect();

        let mut segments = Vec::with_capacity(waypoints.len() - 1);
        let mut t = 0.0;
        for pair in waypoints.windows(2) {
            let seg = SegmentProfile::new(t, pair[0], pair[1], v_max, a_max);
            t = seg.t_end();
            segments.push(seg);
        }
        Ok(Self {
            waypoints,
            segments,
            v_max,
            a_max,
        })
    }

    pub fn duration(&self) -> f64 {
        self.segments.last().map_or(0.0, SegmentProfile::t_end)
    }

    pub fn path_length(&self) -> f64 {
        self.segments.iter().map(|s| s.length).sum()
    }

    pub fn sample(&self, t: f64) -> TrajectorySample {
        if t <= 0.0 || self.segments.is_empty() {
            return TrajectorySample::at_rest(self.waypoints[0]);
        }
        if t >= self.duration() {
            return TrajectorySample::at_rest(*self.waypoints.last().unwrap());
        }
        let idx = self.segments.partition_point(|s| s.t_start <= t) - 1;
        self.segments[idx].sample(t)
    }
}
