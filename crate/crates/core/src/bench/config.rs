//! Configuration file loading.
//!
//! The config is TOML with three sections, `[scenario]`, `[noise]`, and
//! `[solver]`; unknown keys anywhere are errors. See the README for the full
//! schema and defaults.

use std::path::Path;

use serde::Deserialize;

use crate::dynamics::{IntegratorConfig, StepMode};
use crate::scenario::{ScenarioKind, ScenarioSpec, SourceSpec};
use crate::{Error, Result, DEFAULT_ONSET_TIME, DEFAULT_PROPAGATION_SPEED};

/// Solver-side knobs: loss/penalty parameters, the integrator, and whether
/// the squared-loss control runs alongside.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub gamma: f64,
    pub rho: f64,
    pub integrator: IntegratorConfig,
    pub baseline: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            gamma: crate::formulation::DEFAULT_GAMMA,
            rho: crate::formulation::DEFAULT_RHO,
            integrator: IntegratorConfig::default(),
            baseline: true,
        }
    }
}

/// Fully parsed configuration: scenario, common noise level, solver.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub scenario: ScenarioSpec,
    pub sigma: f64,
    pub solver: SolverConfig,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FileSchema {
    scenario: ScenarioSection,
    noise: NoiseSection,
    #[serde(default)]
    solver: SolverSection,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioSection {
    kind: String,
    #[serde(default = "default_region_side")]
    region_side: f64,
    sensors: usize,
    #[serde(default)]
    source: Option<SourceField>,
    #[serde(default)]
    nlos: Vec<NlosEntry>,
    #[serde(default)]
    nlos_redraw: bool,
    #[serde(default = "default_trials")]
    trials: usize,
    #[serde(default)]
    seed: u64,
    #[serde(default = "default_onset")]
    onset_time: f64,
    #[serde(default = "default_speed")]
    propagation_speed: f64,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum SourceField {
    Coordinates(Vec<f64>),
    Keyword(String),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct NlosEntry {
    sensor: usize,
    omega: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct NoiseSection {
    sigma: f64,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct SolverSection {
    gamma: Option<f64>,
    rho: Option<f64>,
    tau: Option<f64>,
    horizon: Option<f64>,
    record_stride: Option<f64>,
    mode: Option<String>,
    rel_tol: Option<f64>,
    abs_tol: Option<f64>,
    tau_max: Option<f64>,
    baseline: Option<bool>,
}

fn default_region_side() -> f64 {
    20.0
}
fn default_trials() -> usize {
    100
}
fn default_onset() -> f64 {
    DEFAULT_ONSET_TIME
}
fn default_speed() -> f64 {
    DEFAULT_PROPAGATION_SPEED
}

/// Parses a config file and validates every section.
pub fn load_config(path: &Path) -> Result<BenchConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text)
}

/// [`load_config`] on an in-memory string.
pub fn parse_config(text: &str) -> Result<BenchConfig> {
    let file: FileSchema =
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;

    let kind = match file.scenario.kind.as_str() {
        "deterministic-perimeter" => ScenarioKind::DeterministicPerimeter,
        "random-square" => ScenarioKind::RandomSquare,
        other => {
            return Err(Error::Config(format!(
                "unknown scenario kind {other:?}; expected \
                 \"deterministic-perimeter\" or \"random-square\""
            )))
        }
    };
    let source = match (file.scenario.source, kind) {
        (Some(SourceField::Coordinates(p)), _) => SourceSpec::Fixed(p),
        (Some(SourceField::Keyword(word)), _) if word == "random" => SourceSpec::Random,
        (Some(SourceField::Keyword(word)), _) => {
            return Err(Error::Config(format!(
                "source must be coordinates or \"random\", got {word:?}"
            )))
        }
        (None, ScenarioKind::RandomSquare) => SourceSpec::Random,
        (None, ScenarioKind::DeterministicPerimeter) => {
            return Err(Error::Config(
                "deterministic-perimeter scenarios need a source".into(),
            ))
        }
    };

    let scenario = ScenarioSpec {
        kind,
        region_side: file.scenario.region_side,
        sensors: file.scenario.sensors,
        source,
        nlos_pattern: file
            .scenario
            .nlos
            .iter()
            .map(|e| (e.sensor, e.omega))
            .collect(),
        nlos_redraw: file.scenario.nlos_redraw,
        trials: file.scenario.trials,
        seed: file.scenario.seed,
        onset_time: file.scenario.onset_time,
        propagation_speed: file.scenario.propagation_speed,
    };
    scenario.validate()?;

    if !(file.noise.sigma >= 0.0) {
        return Err(Error::Config(format!(
            "sigma must be nonnegative, got {}",
            file.noise.sigma
        )));
    }

    let defaults = SolverConfig::default();
    let default_integrator = defaults.integrator;
    let s = file.solver;
    let mode = match s.mode.as_deref() {
        None | Some("adaptive") => {
            let (rel_default, abs_default, taumax_default) = match default_integrator.mode {
                StepMode::Adaptive {
                    rel_tol,
                    abs_tol,
                    tau_max,
                } => (rel_tol, abs_tol, tau_max),
                StepMode::Fixed => (1e-5, 1e-9, 1e-2),
            };
            StepMode::Adaptive {
                rel_tol: s.rel_tol.unwrap_or(rel_default),
                abs_tol: s.abs_tol.unwrap_or(abs_default),
                tau_max: s.tau_max.unwrap_or(taumax_default),
            }
        }
        Some("fixed") => StepMode::Fixed,
        Some(other) => {
            return Err(Error::Config(format!(
                "unknown integrator mode {other:?}; expected \"adaptive\" or \"fixed\""
            )))
        }
    };
    let integrator = IntegratorConfig {
        tau: s.tau.unwrap_or(default_integrator.tau),
        horizon: s.horizon.unwrap_or(default_integrator.horizon),
        record_stride: s.record_stride.unwrap_or(default_integrator.record_stride),
        alpha: 1.0,
        mode,
    };
    integrator.validate()?;

    let solver = SolverConfig {
        gamma: s.gamma.unwrap_or(defaults.gamma),
        rho: s.rho.unwrap_or(defaults.rho),
        integrator,
        baseline: s.baseline.unwrap_or(defaults.baseline),
    };
    if !(solver.gamma > 0.0) {
        return Err(Error::Config(format!(
            "gamma must be positive, got {}",
            solver.gamma
        )));
    }
    if !(solver.rho > 0.0) {
        return Err(Error::Config(format!(
            "rho must be positive, got {}",
            solver.rho
        )));
    }

    Ok(BenchConfig {
        scenario,
        sigma: file.noise.sigma,
        solver,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXAMPLE: &str = r#"
[scenario]
kind = "deterministic-perimeter"
region_side = 20.0
sensors = 8
source = [2.0, 3.0]
nlos = [{ sensor = 1, omega = 5.0 }, { sensor = 5, omega = 5.0 }]
trials = 100
seed = 42

[noise]
sigma = 0.31622776601683794

[solver]
gamma = 100.0
rho = 5.0
horizon = 40.0
"#;

    #[test]
    fn parses_the_reference_config() {
        let cfg = parse_config(EXAMPLE).unwrap();
        assert_eq!(cfg.scenario.kind, ScenarioKind::DeterministicPerimeter);
        assert_eq!(cfg.scenario.sensors, 8);
        assert_eq!(cfg.scenario.nlos_pattern, vec![(1, 5.0), (5, 5.0)]);
        assert_eq!(cfg.scenario.trials, 100);
        assert_eq!(cfg.solver.gamma, 100.0);
        assert_eq!(cfg.solver.integrator.horizon, 40.0);
        assert!((cfg.sigma * cfg.sigma - 0.1).abs() < 1e-15);
        assert!(cfg.solver.baseline);
    }

    #[test]
    fn unknown_keys_are_errors() {
        let bad = EXAMPLE.replace("seed = 42", "seed = 42\nwhatever = 1");
        let err = parse_config(&bad).unwrap_err();
        assert!(matches!(err, Error::Config(_)), "{err}");
        let bad = EXAMPLE.replace("sigma = 0.3", "sigmaa = 0.3");
        assert!(parse_config(&bad).is_err());
    }

    #[test]
    fn random_source_keyword() {
        let text = r#"
[scenario]
kind = "random-square"
sensors = 10
source = "random"

[noise]
sigma = 0.1
"#;
        let cfg = parse_config(text).unwrap();
        assert_eq!(cfg.scenario.kind, ScenarioKind::RandomSquare);
        assert_eq!(cfg.scenario.source, SourceSpec::Random);
        // defaults fill in
        assert_eq!(cfg.scenario.region_side, 20.0);
        assert_eq!(cfg.scenario.trials, 100);
    }

    #[test]
    fn missing_source_on_deterministic_is_an_error() {
        let text = r#"
[scenario]
kind = "deterministic-perimeter"
sensors = 8

[noise]
sigma = 0.1
"#;
        assert!(parse_config(text).is_err());
    }

    #[test]
    fn fixed_mode_round_trip() {
        let text = r#"
[scenario]
kind = "deterministic-perimeter"
sensors = 8
source = [2.0, 3.0]

[noise]
sigma = 0.0

[solver]
mode = "fixed"
tau = 1e-5
"#;
        let cfg = parse_config(text).unwrap();
        assert_eq!(cfg.solver.integrator.mode, StepMode::Fixed);
        assert_eq!(cfg.solver.integrator.tau, 1e-5);
    }

    #[test]
    fn bad_values_rejected() {
        for (from, to) in [
            ("sensors = 8", "sensors = 2"),
            ("sigma = 0.31622776601683794", "sigma = -1.0"),
            ("gamma = 100.0", "gamma = 0.0"),
            ("rho = 5.0", "rho = -2.0"),
            ("kind = \"deterministic-perimeter\"", "kind = \"circle\""),
        ] {
            let bad = EXAMPLE.replace(from, to);
            assert!(parse_config(&bad).is_err(), "{from} -> {to} should fail");
        }
    }
}
