//! Line-oriented `key = value` run configuration.
//!
//! ```text
//! # comments run to the end of the line
//! scenario = hilbert
//! gamma4 = 0.2
//! feedforward = off
//! ```
//!
//! Settings are layered: built-in defaults, then a config file, then
//! command-line overrides, each later layer winning. Unknown keys are
//! rejected. Range checks run once all layers are applied.

use std::fmt;
use std::path::{Path, PathBuf};

use debak_core::sim::{ConfigError, Scenario, SimConfig, StartMode};
use debak_core::{ControlLaw, EllipseParams, Vec2};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigParseError {
    #[error("{origin}: expected `key = value`, got `{text}`")]
    Syntax { origin: Origin, text: String },
    #[error("{origin}: unknown key `{key}`")]
    UnknownKey { origin: Origin, key: String },
    #[error("{origin}: invalid value `{value}` for `{key}` (expected {expected})")]
    BadValue {
        origin: Origin,
        key: String,
        value: String,
        expected: &'static str,
    },
    #[error("invalid configuration: {0}")]
    Range(#[from] ConfigError),
    #[error("cannot read config {path}: {message}")]
    Io { path: PathBuf, message: String },
}

impl ConfigParseError {
    /// Line number for errors raised while reading a config file.
    pub fn line(&self) -> Option<usize> {
        match self {
            ConfigParseError::Syntax { origin, .. }
            | ConfigParseError::UnknownKey { origin, .. }
            | ConfigParseError::BadValue { origin, .. } => match origin {
                Origin::Line(n) => Some(*n),
                Origin::Override => None,
            },
            _ => None,
        }
    }
}

/// Where a setting came from, for error messages.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Origin {
    Line(usize),
    Override,
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Origin::Line(n) => write!(f, "line {n}"),
            Origin::Override => f.write_str("override"),
        }
    }
}

/// Every configurable quantity, including the parameters of the
/// scenarios that are not selected.
#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub scenario: String,
    pub base: SimConfig,
    pub hover_point: Vec2,
    pub ellipse: EllipseParams,
    pub hilbert_order: u32,
    pub hilbert_side: f64,
    pub v_max: f64,
    pub a_max: f64,
    /// Explicit initial offsets; unset components keep the scenario default.
    pub offset: [Option<f64>; 2],
}

impl Default for Settings {
    fn default() -> Self {
        let Scenario::Hilbert {
            order,
            side,
            v_max,
            a_max,
        } = Scenario::hilbert()
        else {
            unreachable!("Scenario::hilbert builds a Hilbert scenario")
        };
        Self {
            scenario: "ellipse".into(),
            base: SimConfig::default(),
            hover_point: Vec2::zeros(),
            ellipse: EllipseParams::default(),
            hilbert_order: order,
            hilbert_side: side,
            v_max,
            a_max,
            offset: [None, None],
        }
    }
}

pub const KEYS: &[&str] = &[
    "scenario",
    "law",
    "feedforward",
    "start",
    "m",
    "J",
    "g",
    "l",
    "k1",
    "k2",
    "k3",
    "k4",
    "gamma1",
    "gamma2",
    "gamma3",
    "gamma4",
    "theta1_hat",
    "vartheta1_hat",
    "varphi1_hat",
    "theta2_hat",
    "offset_r1",
    "offset_r2",
    "thrust0",
    "thrust_rate0",
    "dt",
    "duration",
    "decimation",
    "hover_r1",
    "hover_r2",
    "ellipse_phi_deg",
    "ellipse_omega",
    "ellipse_a",
    "ellipse_b",
    "hilbert_order",
    "hilbert_side",
    "v_max",
    "a_max",
];

fn parse_bool(v: &str) -> Option<bool> {
    match v {
        "true" | "on" | "yes" | "1" => Some(true),
        "false" | "off" | "no" | "0" => Some(false),
        _ => None,
    }
}

impl Settings {
    /// Applies one `key = value` setting.
    pub fn apply(&mut self, key: &str, value: &str, origin: Origin) -> Result<(), ConfigParseError> {
        let bad = |expected: &'static str| ConfigParseError::BadValue {
            origin,
            key: key.to_string(),
            value: value.to_string(),
            expected,
        };
        let num = || value.parse::<f64>().map_err(|_| bad("a number"));
        // Caught here, rather than by the final validation, so the error
        // can point at the line.
        let pos = || {
            num().and_then(|v| {
                if v > 0.0 && v.is_finite() {
                    Ok(v)
                } else {
                    Err(bad("a positive number"))
                }
            })
        };
        let cfg = &mut self.base;
        match key {
            "scenario" => {
                Scenario::by_name(value).ok_or_else(|| bad("hover, ellipse or hilbert"))?;
                self.scenario = value.to_string();
            }
            "law" => cfg.law = value.parse::<ControlLaw>().map_err(|_| bad("literal or exact"))?,
            "feedforward" => cfg.feedforward = parse_bool(value).ok_or_else(|| bad("on or off"))?,
            "start" => cfg.start = value.parse::<StartMode>().map_err(|_| bad("reference or rest"))?,
            "m" => cfg.params.mass = pos()?,
            "J" => cfg.params.inertia = pos()?,
            "g" => cfg.params.gravity = num()?,
            "l" => cfg.params.arm_length = pos()?,
            "k1" => cfg.gains.k1 = pos()?,
            "k2" => cfg.gains.k2 = pos()?,
            "k3" => cfg.gains.k3 = pos()?,
            "k4" => cfg.gains.k4 = pos()?,
            "gamma1" => cfg.gains.gamma1 = pos()?,
            "gamma2" => cfg.gains.gamma2 = pos()?,
            "gamma3" => cfg.gains.gamma3 = pos()?,
            "gamma4" => cfg.gains.gamma4 = pos()?,
            "theta1_hat" => cfg.estimates.theta1 = num()?,
            "vartheta1_hat" => cfg.estimates.vartheta1 = num()?,
            "varphi1_hat" => cfg.estimates.varphi1 = num()?,
            "theta2_hat" => cfg.estimates.theta2 = num()?,
            "offset_r1" => self.offset[0] = Some(num()?),
            "offset_r2" => self.offset[1] = Some(num()?),
            "thrust0" => cfg.thrust0 = Some(num()?),
            "thrust_rate0" => cfg.thrust_rate0 = Some(num()?),
            "dt" => cfg.dt = pos()?,
            "duration" => cfg.duration = Some(num()?),
            "decimation" => cfg.decimation = value.parse().map_err(|_| bad("a non-negative integer"))?,
            "hover_r1" => self.hover_point[0] = num()?,
            "hover_r2" => self.hover_point[1] = num()?,
            "ellipse_phi_deg" => self.ellipse.phi = num()?.to_radians(),
            "ellipse_omega" => self.ellipse.omega = num()?,
            "ellipse_a" => self.ellipse.a = num()?,
            "ellipse_b" => self.ellipse.b = num()?,
            "hilbert_order" => self.hilbert_order = value.parse().map_err(|_| bad("an integer"))?,
            "hilbert_side" => self.hilbert_side = num()?,
            "v_max" => self.v_max = num()?,
            "a_max" => self.a_max = num()?,
            _ => {
                return Err(ConfigParseError::UnknownKey {
                    origin,
                    key: key.to_string(),
                })
            }
        }
        Ok(())
    }

    /// Applies every setting of a config file.
    pub fn apply_text(&mut self, text: &str) -> Result<(), ConfigParseError> {
        for (idx, raw) in text.lines().enumerate() {
            let origin = Origin::Line(idx + 1);
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .filter(|(k, v)| !k.is_empty() && !v.is_empty())
                .ok_or_else(|| ConfigParseError::Syntax {
                    origin,
                    text: raw.trim().to_string(),
                })?;
            self.apply(key, value, origin)?;
        }
        Ok(())
    }

    /// The selected scenario with its parameters.
    pub fn scenario(&self) -> Scenario {
        match self.scenario.as_str() {
            "hover" => Scenario::Hover {
                point: self.hover_point,
            },
            "hilbert" => Scenario::Hilbert {
                order: self.hilbert_order,
                side: self.hilbert_side,
                v_max: self.v_max,
                a_max: self.a_max,
            },
            _ => Scenario::Ellipse(self.ellipse),
        }
    }

    /// Final, range-checked simulation config.
    pub fn build(&self) -> Result<SimConfig, ConfigParseError> {
        let scenario = self.scenario();
        let offset = (self.offset != [None, None]).then(|| {
            let d = scenario.default_offset();
            Vec2::new(self.offset[0].unwrap_or(d[0]), self.offset[1].unwrap_or(d[1]))
        });
        let cfg = SimConfig {
            scenario,
            offset,
            ..self.base.clone()
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Parses a config file's text on top of the defaults.
pub fn parse_config(text: &str) -> Result<SimConfig, ConfigParseError> {
    let mut s = Settings::default();
    s.apply_text(text)?;
    s.build()
}

/// What a command line asks for: scenario, optional config file, and
/// `key = value` overrides.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunSpec {
    pub scenario: Option<String>,
    pub config: Option<PathBuf>,
    pub overrides: Vec<(String, String)>,
}

impl RunSpec {
    /// Defaults, then the config file, then the scenario flag and overrides.
    pub fn resolve(&self) -> Result<SimConfig, ConfigParseError> {
        let mut s = Settings::default();
        if let Some(path) = &self.config {
            s.apply_text(&read_config(path)?)?;
        }
        if let Some(name) = &self.scenario {
            s.apply("scenario", name, Origin::Override)?;
        }
        for (k, v) in &self.overrides {
            s.apply(k, v, Origin::Override)?;
        }
        s.build()
    }
}

fn read_config(path: &Path) -> Result<String, ConfigParseError> {
    std::fs::read_to_string(path).map_err(|e| ConfigParseError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use debak_core::{EstimateState, Gains, PhysicalParams};

    #[test]
    fn empty_text_gives_defaults() {
        let cfg = parse_config("").unwrap();
        assert_eq!(cfg.params, PhysicalParams::default());
        assert_eq!(cfg.params.mass, 1.0);
        assert_eq!(cfg.params.inertia, 0.2);
        assert_eq!(cfg.gains, Gains::default());
        assert_eq!((cfg.gains.k1, cfg.gains.k2, cfg.gains.k3, cfg.gains.k4), (5.0, 5.0, 4.0, 4.0));
        assert_eq!(cfg.estimates, EstimateState::default());
        assert_eq!(cfg.scenario, Scenario::ellipse());
        assert_eq!(cfg.dt, 1e-3);
        assert_eq!(cfg.decimation, 10);
    }

    #[test]
    fn single_override() {
        let cfg = parse_config("gamma4 = 0.2\n").unwrap();
        assert_eq!(cfg.gains.gamma4, 0.2);
        assert_eq!(
            cfg.gains,
            Gains {
                gamma4: 0.2,
                ..Default::default()
            }
        );
    }

    #[test]
    fn non_positive_values_name_the_line() {
        for (text, key) in [("dt = -0.1", "dt"), ("m = 0", "m"), ("J = -1", "J"), ("k3 = 0", "k3"), ("gamma2 = -0.5", "gamma2")] {
            let err = parse_config(&format!("# c\n{text}")).unwrap_err();
            assert!(matches!(&err, ConfigParseError::BadValue { key: k, .. } if k == key), "{err}");
            assert_eq!(err.line(), Some(2));
        }
    }

    #[test]
    fn errors_carry_line_numbers() {
        let err = parse_config("# header\n\nk1 = 3\nbogus = 1\n").unwrap_err();
        assert_eq!(err.line(), Some(4));
        assert!(err.to_string().starts_with("line 4: unknown key `bogus`"));

        let err = parse_config("k1 = 3\nk2 5\n").unwrap_err();
        assert_eq!(err.line(), Some(2));

        let err = parse_config("k1 = fast").unwrap_err();
        assert!(matches!(err, ConfigParseError::BadValue { .. }));
        assert_eq!(err.line(), Some(1));
    }

    #[test]
    fn comments_and_whitespace() {
        let cfg = parse_config("  scenario = hilbert   # trailing\n\t# only comment\nlaw=literal\n").unwrap();
        assert_eq!(cfg.scenario, Scenario::hilbert());
        assert_eq!(cfg.law, ControlLaw::Literal);
    }

    #[test]
    fn range_errors_name_the_field() {
        for (text, field) in [
            ("g = -9.81", "g "),
            ("decimation = 0", "decimation"),
            ("duration = 0", "duration"),
            ("ellipse_omega = 0", "rate"),
            ("scenario = hilbert\nv_max = 0", "v_max"),
        ] {
            let err = parse_config(text).unwrap_err();
            assert!(matches!(err, ConfigParseError::Range(_)), "{text}: {err}");
            assert!(err.to_string().contains(field), "{text}: {err}");
        }
    }

    #[test]
    fn scenario_parameters_follow_the_selected_scenario() {
        let cfg = parse_config("ellipse_phi_deg = 30\nellipse_omega = 0.5\n").unwrap();
        let Scenario::Ellipse(p) = cfg.scenario else { panic!() };
        assert!((p.phi - 30f64.to_radians()).abs() < 1e-15);
        assert_eq!(p.omega, 0.5);

        // Parameters of an unselected scenario are kept but unused.
        let cfg = parse_config("hilbert_side = 8\nscenario = hover\nhover_r1 = 2").unwrap();
        assert_eq!(
            cfg.scenario,
            Scenario::Hover {
                point: Vec2::new(2.0, 0.0)
            }
        );
    }

    #[test]
    fn overrides_beat_file_beat_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        std::fs::write(&path, "k1 = 3\nk2 = 2\nscenario = hover\n").unwrap();
        let spec = RunSpec {
            scenario: None,
            config: Some(path.clone()),
            overrides: vec![("k2".into(), "7".into())],
        };
        let cfg = spec.resolve().unwrap();
        assert_eq!((cfg.gains.k1, cfg.gains.k2, cfg.gains.k3), (3.0, 7.0, 4.0));
        assert_eq!(cfg.scenario, Scenario::hover());

        let spec = RunSpec {
            scenario: Some("ellipse".into()),
            config: Some(path),
            overrides: vec![],
        };
        assert_eq!(spec.resolve().unwrap().scenario, Scenario::ellipse());
    }

    #[test]
    fn unknown_override_is_rejected() {
        let spec = RunSpec {
            overrides: vec![("k9".into(), "1".into())],
            ..Default::default()
        };
        assert!(matches!(spec.resolve(), Err(ConfigParseError::UnknownKey { .. })));
    }

    #[test]
    fn every_listed_key_is_accepted() {
        for key in KEYS {
            let value = match *key {
                "scenario" => "hover",
                "law" => "exact",
                "feedforward" => "on",
                "start" => "rest",
                "decimation" | "hilbert_order" => "2",
                _ => "1.5",
            };
            Settings::default().apply(key, value, Origin::Override).unwrap();
        }
    }

    #[test]
    fn offsets_start_from_the_scenario_default() {
        let cfg = parse_config("offset_r2 = 0.25\nscenario = hover").unwrap();
        assert_eq!(cfg.offset, Some(Vec2::new(1.0, 0.25)));
        assert_eq!(parse_config("").unwrap().offset, None);
    }
}
