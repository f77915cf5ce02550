//! Invariant checks on a finished log.
//!
//! The log carries the full closed-loop state, so the controller can be
//! re-evaluated, and the run replayed, under the configuration that produced it.

use std::fmt;

use debak_core::sim::{try_rk4_step, ClosedLoop, ConfigError, LogRecord, SimConfig};

/// Relative tolerance of the control residual.
pub const RESIDUAL_TOL: f64 = 1e-10;
/// Relative slack allowed per logged step in the Lyapunov descent check.
pub const DESCENT_TOL: f64 = 1e-8;
/// Relative tolerance for re-computed error norms and `V4`.
pub const RECOMPUTE_TOL: f64 = 1e-9;
/// Relative tolerance when replaying the log from its own rows.
pub const REPLAY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    Pass,
    Fail,
    Skipped,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub outcome: Outcome,
    pub detail: String,
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.outcome {
            Outcome::Pass => "PASS",
            Outcome::Fail => "FAIL",
            Outcome::Skipped => "SKIP",
        };
        write!(f, "{tag} {}: {}", self.name, self.detail)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub checks: Vec<Check>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.outcome != Outcome::Fail)
    }
}

fn check(name: &'static str, ok: bool, detail: String) -> Check {
    Check {
        name,
        outcome: if ok { Outcome::Pass } else { Outcome::Fail },
        detail,
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

/// Runs every check on `records`, which must come from a run of `cfg`.
pub fn validate(records: &[LogRecord], cfg: &SimConfig) -> Result<Report, ConfigError> {
    let lp = ClosedLoop::new(cfg)?;
    let mut checks = Vec::new();

    // Control residual of the logged u, and recomputed diagnostics.
    let mut worst_residual = 0.0f64;
    let mut worst_recompute = 0.0f64;
    let mut singular = None;
    for r in records {
        match lp.evaluate(r.t, &r.state()) {
            Ok(out) => {
                let lhs = out.input_matrix * r.u + out.bracket;
                let scale = out.input_matrix.norm() * r.u.norm() + out.bracket.norm();
                worst_residual = worst_residual.max(lhs.norm() / scale.max(f64::MIN_POSITIVE));
                let norms = out.errors.norms();
                for (logged, again) in r.error_norms.iter().zip(norms) {
                    worst_recompute = worst_recompute.max(rel(*logged, again));
                }
                worst_recompute = worst_recompute.max(rel(r.v4, lp.lyapunov(&out.errors, &r.est)));
            }
            Err(e) => {
                singular.get_or_insert((r.t, e));
            }
        }
    }
    if let Some((t, e)) = singular {
        checks.push(check("control residual", false, format!("t = {t}: {e}")));
    } else {
        checks.push(check(
            "control residual",
            worst_residual <= RESIDUAL_TOL,
            format!("max relative residual {worst_residual:.3e} (tol {RESIDUAL_TOL:e})"),
        ));
        checks.push(check(
            "diagnostics",
            worst_recompute <= RECOMPUTE_TOL,
            format!("max relative mismatch of e1..e4, V4 {worst_recompute:.3e} (tol {RECOMPUTE_TOL:e})"),
        ));
    }

    // Lyapunov descent, where the design guarantees it.
    if cfg.descent_guaranteed() {
        let rise = records
            .windows(2)
            .find(|w| w[1].v4 > w[0].v4 + DESCENT_TOL * w[0].v4.max(1.0));
        checks.push(match rise {
            Some(w) => check(
                "lyapunov descent",
                false,
                format!("V4 rises from {} to {} at t = {}", w[0].v4, w[1].v4, w[1].t),
            ),
            None => check("lyapunov descent", true, format!("V4 non-increasing over {} rows", records.len())),
        });
    } else {
        checks.push(Check {
            name: "lyapunov descent",
            outcome: Outcome::Skipped,
            detail: "not guaranteed for this law/reference combination".into(),
        });
    }

    checks.push(replay(records, &lp, cfg.dt));
    Ok(Report { checks })
}

/// Re-integrates from every logged row to the next and compares the full
/// state. The log is bit-exact, so a faithful run reproduces itself.
fn replay(records: &[LogRecord], lp: &ClosedLoop, dt: f64) -> Check {
    const NAME: &str = "replay consistency";
    let mut worst = (0.0f64, 0.0);
    for w in records.windows(2) {
        let (k0, k1) = ((w[0].t / dt).round() as usize, (w[1].t / dt).round() as usize);
        if k1 <= k0 {
            return check(NAME, false, format!("time does not advance at t = {}", w[1].t));
        }
        let mut x = w[0].state().to_vector();
        for k in k0..k1 {
            match try_rk4_step(|t, y| lp.derivative(t, y), k as f64 * dt, &x, dt) {
                Ok(next) => x = next,
                Err(e) => return check(NAME, false, format!("t = {}: {e}", k as f64 * dt)),
            }
        }
        let logged = w[1].state().to_vector();
        let miss = (x - logged).norm() / logged.norm().max(1.0);
        if miss.is_nan() || miss > worst.0 {
            worst = (miss, w[1].t);
        }
    }
    check(
        NAME,
        worst.0 <= REPLAY_TOL,
        format!(
            "worst state mismatch {:.3e} (t = {}) over {} intervals (tol {REPLAY_TOL:e})",
            worst.0,
            worst.1,
            records.len().saturating_sub(1)
        ),
    )
}
