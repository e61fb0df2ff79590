//! Scenario files: nested JSON, unknown keys rejected.

use std::fs;
use std::path::Path;

use dihedral_core::integrate::IntegratorConfig;
use dihedral_core::model::{e_hat, McGeheeState, ModelParams, DEFAULT_EPSILON, KLEIN};
use dihedral_core::transforms::{mcgehee_from_cartesian, SHELL_TOL};
use dihedral_core::CartesianState;
use serde::Deserialize;

use crate::CliError;

/// Relative mismatch allowed between the declared `h` and the energy of a
/// Cartesian initial state.
pub const ENERGY_MATCH_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default = "default_name")]
    pub name: String,
    #[serde(default)]
    pub model: ModelSection,
    pub initial: Option<Initial>,
    #[serde(default)]
    pub integrator: IntegratorSection,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default = "default_outputs")]
    pub outputs: Vec<Output>,
    #[serde(default)]
    pub scan: ScanSection,
}

fn default_name() -> String {
    "scenario".into()
}

fn default_outputs() -> Vec<Output> {
    vec![Output::Trajectory, Output::Events]
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub l: u32,
    pub h: f64,
    pub epsilon: f64,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            l: KLEIN,
            h: 0.0,
            epsilon: DEFAULT_EPSILON,
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(untagged)]
pub enum Initial {
    McGehee(McGeheeInitial),
    Cartesian(CartesianInitial),
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McGeheeInitial {
    pub r: f64,
    pub alpha: f64,
    pub psi: f64,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CartesianInitial {
    pub q1: f64,
    pub q2: f64,
    pub p1: f64,
    pub p2: f64,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegratorSection {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    pub event_tol: f64,
}

impl Default for IntegratorSection {
    fn default() -> Self {
        let d = IntegratorConfig::default();
        Self {
            rel_tol: d.rel_tol,
            abs_tol: d.abs_tol,
            max_step: d.max_step,
            event_tol: d.event_tol,
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub horizon: f64,
    pub max_collisions: usize,
    pub seed: u64,
}

impl Default for RunSection {
    fn default() -> Self {
        let d = IntegratorConfig::default();
        Self {
            horizon: d.horizon,
            max_collisions: d.max_collisions,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Output {
    Trajectory,
    Events,
    Projections,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanSection {
    /// Boundedness probe: number of random initial conditions.
    pub n_ics: usize,
    /// Boundedness probe: start the first orbit on the homothetic ray.
    pub include_homothetic: bool,
    /// Sign sweep: number of sampled states.
    pub samples: usize,
    /// Smoothing convergence: the smoothings compared.
    pub epsilons: Vec<f64>,
    /// Smoothing convergence: time after the first collision.
    pub delay: f64,
}

impl Default for ScanSection {
    fn default() -> Self {
        Self {
            n_ics: 64,
            include_homothetic: false,
            samples: 10_000,
            epsilons: vec![1e-5, 1e-6, 1e-7],
            delay: 0.05,
        }
    }
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let scenario: Scenario = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            if path == "." {
                e.inner().to_string()
            } else {
                format!("key '{path}': {}", e.inner())
            }
        })?;
        scenario.validate()?;
        Ok(scenario)
    }

    fn validate(&self) -> Result<(), String> {
        self.params()?;
        self.integrator_config()
            .validate()
            .map_err(|e| format!("integrator/run: {e}"))?;
        if self.scan.epsilons.iter().any(|e| !(*e >= 0.0)) {
            return Err("key 'scan.epsilons': smoothings must be non-negative".into());
        }
        Ok(())
    }

    pub fn params(&self) -> Result<ModelParams, String> {
        let m = self.model;
        ModelParams::new(m.l, m.h, m.epsilon).map_err(|e| format!("key 'model': {e}"))
    }

    pub fn integrator_config(&self) -> IntegratorConfig {
        let i = self.integrator;
        IntegratorConfig {
            rel_tol: i.rel_tol,
            abs_tol: i.abs_tol,
            max_step: i.max_step,
            event_tol: i.event_tol,
            horizon: self.run.horizon,
            max_collisions: self.run.max_collisions,
        }
    }

    /// The initial state in McGehee form, checked against the energy level.
    pub fn initial_state(&self) -> Result<McGeheeState, CliError> {
        let params = self.params().map_err(CliError::Config)?;
        let initial = self
            .initial
            .ok_or_else(|| CliError::Config("key 'initial' is required".into()))?;
        let state = match initial {
            Initial::McGehee(m) => McGeheeState::new(m.r, m.alpha, m.psi),
            Initial::Cartesian(c) => {
                let cs = CartesianState::new([c.q1, c.q2], [c.p1, c.p2]);
                let (s, h) = mcgehee_from_cartesian(&cs, params.l)
                    .map_err(|e| CliError::Config(format!("key 'initial': {e}")))?;
                if (h - params.h).abs() > ENERGY_MATCH_TOL * params.h.abs().max(1.0) {
                    return Err(CliError::Config(format!(
                        "key 'initial': the Cartesian state has energy {h}, but model.h = {}",
                        params.h
                    )));
                }
                s
            }
        };
        if !(state.r > 0.0) {
            return Err(CliError::Config(format!(
                "key 'initial.r': {} must be positive",
                state.r
            )));
        }
        let ehat = e_hat(params.h, state.r, state.alpha, params.l)
            .map_err(|e| CliError::Config(format!("key 'initial.alpha': {e}")))?;
        if ehat < -SHELL_TOL {
            return Err(CliError::Config(format!(
                "key 'initial': state is off the energy shell h = {} (Ehat = {ehat:e})",
                params.h
            )));
        }
        Ok(state)
    }
}
