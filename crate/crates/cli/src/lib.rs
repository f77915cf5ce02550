//! Command-line front end: `debak simulate` and `debak validate`.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use debak_core::sim::{run_closed_loop, SimError};

pub mod config;
pub mod telemetry;
pub mod validate;

pub use config::{parse_config, ConfigParseError, RunSpec};
pub use telemetry::{read_csv, write_csv, HEADER};

pub const EXIT_IO: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_SINGULAR: u8 = 3;
pub const EXIT_DIVERGED: u8 = 4;
pub const EXIT_INVALID: u8 = 5;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "DEBAK_OUT_DIR";

#[derive(Debug, Parser)]
#[command(name = "debak", version, about = "Adaptive backstepping bicopter simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a closed-loop scenario and write its telemetry CSV.
    Simulate {
        #[command(flatten)]
        run: RunArgs,
        /// Output CSV [default: $DEBAK_OUT_DIR/<scenario>.csv, else ./<scenario>.csv].
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a telemetry CSV against the invariants of the run that produced it.
    Validate {
        /// Telemetry CSV written by `simulate`.
        csv: PathBuf,
        #[command(flatten)]
        run: RunArgs,
    },
}

/// Options shared by both subcommands, which must describe the same run.
#[derive(Debug, Args)]
pub struct RunArgs {
    /// hover, ellipse or hilbert.
    #[arg(long)]
    pub scenario: Option<String>,
    /// `key = value` config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub duration: Option<f64>,
    /// on or off.
    #[arg(long)]
    pub feedforward: Option<String>,
    #[arg(long)]
    pub decimation: Option<usize>,
    /// exact or literal.
    #[arg(long)]
    pub law: Option<String>,
    #[arg(long)]
    pub k1: Option<f64>,
    #[arg(long)]
    pub k2: Option<f64>,
    #[arg(long)]
    pub k3: Option<f64>,
    #[arg(long)]
    pub k4: Option<f64>,
    #[arg(long)]
    pub gamma1: Option<f64>,
    #[arg(long)]
    pub gamma2: Option<f64>,
    #[arg(long)]
    pub gamma3: Option<f64>,
    #[arg(long)]
    pub gamma4: Option<f64>,
    /// Initial estimate of 1/m.
    #[arg(long)]
    pub theta1_hat: Option<f64>,
    #[arg(long)]
    pub vartheta1_hat: Option<f64>,
    #[arg(long)]
    pub varphi1_hat: Option<f64>,
    /// Initial estimate of 1/J.
    #[arg(long)]
    pub theta2_hat: Option<f64>,
    /// Any config key, as `key=value`; may be repeated.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

impl RunArgs {
    pub fn spec(&self) -> Result<RunSpec, String> {
        let mut overrides = Vec::new();
        let mut push = |key: &str, value: Option<String>| {
            if let Some(v) = value {
                overrides.push((key.to_string(), v));
            }
        };
        push("dt", self.dt.map(|v| v.to_string()));
        push("duration", self.duration.map(|v| v.to_string()));
        push("feedforward", self.feedforward.clone());
        push("decimation", self.decimation.map(|v| v.to_string()));
        push("law", self.law.clone());
        for (key, value) in [
            ("k1", self.k1),
            ("k2", self.k2),
            ("k3", self.k3),
            ("k4", self.k4),
            ("gamma1", self.gamma1),
            ("gamma2", self.gamma2),
            ("gamma3", self.gamma3),
            ("gamma4", self.gamma4),
            ("theta1_hat", self.theta1_hat),
            ("vartheta1_hat", self.vartheta1_hat),
            ("varphi1_hat", self.varphi1_hat),
            ("theta2_hat", self.theta2_hat),
        ] {
            push(key, value.map(|v| v.to_string()));
        }
        for item in &self.set {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| format!("--set expects KEY=VALUE, got `{item}`"))?;
            overrides.push((k.trim().to_string(), v.trim().to_string()));
        }
        Ok(RunSpec {
            scenario: self.scenario.clone(),
            config: self.config.clone(),
            overrides,
        })
    }
}

fn default_out(scenario: &str) -> PathBuf {
    let dir = std::env::var_os(OUT_DIR_ENV).map_or_else(|| PathBuf::from("."), PathBuf::from);
    dir.join(format!("{scenario}.csv"))
}

fn fail(code: u8, msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("debak: {msg}");
    ExitCode::from(code)
}

fn resolve(run: &RunArgs) -> Result<debak_core::SimConfig, ExitCode> {
    let spec = run.spec().map_err(|e| fail(EXIT_CONFIG, e))?;
    spec.resolve().map_err(|e| {
        let code = if matches!(e, ConfigParseError::Io { .. }) {
            EXIT_IO
        } else {
            EXIT_CONFIG
        };
        fail(code, e)
    })
}

fn simulate(run: &RunArgs, out: Option<&Path>) -> ExitCode {
    let cfg = match resolve(run) {
        Ok(cfg) => cfg,
        Err(code) => return code,
    };
    let path = out.map_or_else(|| default_out(cfg.scenario.name()), Path::to_path_buf);
    let (records, error) = match run_closed_loop(&cfg) {
        Ok(r) => (r.records, None),
        Err(abort) => (abort.records, Some(abort.error)),
    };
    if !records.is_empty() {
        if let Err(e) = write_csv(&records, &path) {
            return fail(EXIT_IO, e);
        }
    }
    match error {
        None => {
            let last = records.last().expect("a completed run logs its final step");
            let mut err = std::io::stderr();
            // Nothing useful to do if stderr is closed.
            let _ = writeln!(
                err,
                "{}: {} rows to {} (t = {}, |e1| = {:.3e}, V4 = {:.6e})",
                cfg.scenario.name(),
                records.len(),
                path.display(),
                last.t,
                last.error_norms[0],
                last.v4
            );
            ExitCode::SUCCESS
        }
        Some(e) => {
            let code = match e {
                SimError::Config(_) => EXIT_CONFIG,
                SimError::SingularInputMap { .. } => EXIT_SINGULAR,
                SimError::NumericalDivergence { .. } => EXIT_DIVERGED,
            };
            if !records.is_empty() {
                eprintln!("debak: partial log ({} rows) written to {}", records.len(), path.display());
            }
            fail(code, format!("run aborted: {e}"))
        }
    }
}

fn validate_csv(csv: &Path, run: &RunArgs) -> ExitCode {
    let cfg = match resolve(run) {
        Ok(cfg) => cfg,
        Err(code) => return code,
    };
    let records = match read_csv(csv) {
        Ok(r) => r,
        Err(e @ telemetry::TelemetryError::Io { .. }) => return fail(EXIT_IO, e),
        Err(e) => return fail(EXIT_INVALID, e),
    };
    let report = match validate::validate(&records, &cfg) {
        Ok(r) => r,
        Err(e) => return fail(EXIT_CONFIG, e),
    };
    for c in &report.checks {
        println!("{c}");
    }
    if report.passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_INVALID)
    }
}

/// Entry point shared by the binary and tests.
pub fn run(cli: Cli) -> ExitCode {
    match &cli.command {
        Command::Simulate { run, out } => simulate(run, out.as_deref()),
        Command::Validate { csv, run } => validate_csv(csv, run),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_are_distinct() {
        let codes = [EXIT_IO, EXIT_CONFIG, EXIT_SINGULAR, EXIT_DIVERGED, EXIT_INVALID];
        for (i, a) in codes.iter().enumerate() {
            assert_ne!(*a, 0);
            for b in &codes[i + 1..] {
                assert_ne!(a, b);
            }
        }
    }

    #[test]
    fn flags_become_overrides() {
        let cli = Cli::try_parse_from([
            "debak", "simulate", "--scenario", "hover", "--dt", "0.002", "--gamma4", "0.2", "--theta1-hat",
            "0.7", "--set", "theta2_hat=10", "--feedforward", "off",
        ])
        .unwrap();
        let Command::Simulate { run, .. } = cli.command else { panic!() };
        let cfg = run.spec().unwrap().resolve().unwrap();
        assert_eq!(cfg.dt, 0.002);
        assert_eq!(cfg.gains.gamma4, 0.2);
        assert_eq!(cfg.estimates.theta1, 0.7);
        assert_eq!(cfg.estimates.theta2, 10.0);
        assert!(!cfg.feedforward);
        assert_eq!(cfg.scenario.name(), "hover");
    }

    #[test]
    fn malformed_set_is_rejected() {
        let cli = Cli::try_parse_from(["debak", "simulate", "--set", "k1"]).unwrap();
        let Command::Simulate { run, .. } = cli.command else { panic!() };
        assert!(run.spec().is_err());
    }
}
