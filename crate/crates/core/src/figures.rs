//! The four published orbits and the qualitative checks each must pass.

use std::f64::consts::FRAC_PI_4;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::analysis::{sundman_funnel_check, FunnelReport};
use crate::error::{Error, Result};
use crate::integrate::{integrate_generalized, GeneralizedSolution, IntegratorConfig, Terminal};
use crate::model::{CartesianState, EventKind, McGeheeState, ModelParams, DEFAULT_EPSILON, KLEIN};
use crate::transforms::{angular_momentum, full_configuration};

/// Relative energy drift allowed in a figure run.
pub const ENERGY_DRIFT_MAX: f64 = 1e-6;
/// Absolute angular momentum allowed for the reconstructed configuration.
pub const ANGULAR_MOMENTUM_MAX: f64 = 1e-8;
/// Collision radius regarded as close to total collapse.
pub const NEAR_COLLAPSE_R: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Figure {
    Ejection,
    Pseudolemniscata,
    TurningPoint,
    Transmission,
}

impl Figure {
    pub const ALL: [Figure; 4] = [
        Figure::Ejection,
        Figure::Pseudolemniscata,
        Figure::TurningPoint,
        Figure::Transmission,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Figure::Ejection => "ejection",
            Figure::Pseudolemniscata => "pseudolemniscata",
            Figure::TurningPoint => "turning_point",
            Figure::Transmission => "transmission",
        }
    }

    pub fn initial_condition(self) -> McGeheeState {
        match self {
            Figure::Ejection => McGeheeState::new(0.3, FRAC_PI_4 + 1e-2, FRAC_PI_4),
            Figure::Pseudolemniscata => McGeheeState::new(1.002_645_34, 0.041_492_04, 2.543_448_46),
            Figure::TurningPoint => McGeheeState::new(2.05, 0.01, FRAC_PI_4),
            Figure::Transmission => McGeheeState::new(2.05, 0.01, 3.0 * FRAC_PI_4),
        }
    }

    /// Tight-tolerance settings used to reproduce the figure.
    pub fn config(self) -> IntegratorConfig {
        let horizon = match self {
            Figure::Ejection | Figure::Pseudolemniscata => 12.0,
            Figure::TurningPoint => 2.0,
            Figure::Transmission => 4.0,
        };
        IntegratorConfig {
            rel_tol: 1e-12,
            abs_tol: 1e-14,
            horizon,
            max_collisions: 400,
            ..IntegratorConfig::default()
        }
    }

    pub fn params(self) -> ModelParams {
        ModelParams {
            l: KLEIN,
            h: 0.0,
            epsilon: DEFAULT_EPSILON,
        }
    }
}

impl fmt::Display for Figure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Figure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Figure::ALL
            .into_iter()
            .find(|f| f.name() == s || f.name().replace('_', "-") == s)
            .ok_or_else(|| {
                Error::InvalidInput(format!(
                    "unknown figure '{s}' (expected one of ejection, pseudolemniscata, turning_point, transmission)"
                ))
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        Check {
            name: name.to_string(),
            passed,
            detail,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FigureRun {
    pub figure: Figure,
    pub initial: McGeheeState,
    pub config: IntegratorConfig,
    pub solution: GeneralizedSolution,
    pub energy_drift: f64,
    pub max_angular_momentum: f64,
    pub funnel: Option<FunnelReport>,
    pub checks: Vec<Check>,
}

impl FigureRun {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Largest `|L|` of the reconstructed `2l`-vortex configuration along the orbit.
pub fn max_angular_momentum(sol: &GeneralizedSolution) -> f64 {
    sol.orbit_points()
        .iter()
        .map(|p| {
            let c = CartesianState {
                q: p.q,
                p: p.p,
                sigma: 0.0,
            };
            angular_momentum(&full_configuration(&c, sol.params.l)).abs()
        })
        .fold(0.0, f64::max)
}

/// Whether the largest element is strictly inside the sequence and exceeds
/// both ends.
pub fn has_interior_maximum(xs: &[f64]) -> bool {
    let Some((k, &max)) = xs.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)) else {
        return false;
    };
    k > 0 && k + 1 < xs.len() && max > xs[0] && max > xs[xs.len() - 1]
}

fn shape_checks(
    figure: Figure,
    sol: &GeneralizedSolution,
    funnel: Option<&FunnelReport>,
) -> Vec<Check> {
    let positions = sol.collision_axis_positions();
    match figure {
        Figure::Ejection => {
            let radii = sol.collision_radii();
            let min_r = radii.iter().copied().fold(f64::INFINITY, f64::min);
            vec![
                Check::new(
                    "collisions >= 2",
                    radii.len() >= 2,
                    format!("{} collisions", radii.len()),
                ),
                Check::new(
                    "collision near total collapse",
                    min_r < NEAR_COLLAPSE_R,
                    format!("min collision r = {min_r:.4}, required < {NEAR_COLLAPSE_R}"),
                ),
            ]
        }
        Figure::TurningPoint => {
            let leading: Vec<f64> = positions
                .iter()
                .take_while(|(k, x)| *k == EventKind::BinaryCollisionQ2 && *x > 0.0)
                .map(|(_, x)| *x)
                .collect();
            vec![Check::new(
                "interior maximum of collision radii on the positive q1 semi-axis",
                has_interior_maximum(&leading),
                format!(
                    "{} leading collisions, max r = {:.4}",
                    leading.len(),
                    leading.iter().copied().fold(0.0, f64::max)
                ),
            )]
        }
        Figure::Transmission => {
            let first_cross = positions
                .iter()
                .position(|(k, _)| *k == EventKind::BinaryCollisionQ1);
            let before_positive = first_cross.is_some_and(|i| {
                i > 0
                    && positions[..i]
                        .iter()
                        .all(|(k, x)| *k == EventKind::BinaryCollisionQ2 && *x > 0.0)
            });
            let after_negative = first_cross.is_some_and(|i| {
                positions[i + 1..]
                    .iter()
                    .any(|(k, x)| *k == EventKind::BinaryCollisionQ2 && *x < 0.0)
            });
            vec![Check::new(
                "wall crossing at alpha = pi/2, then collisions on the negative q1 semi-axis",
                before_positive && after_negative,
                format!(
                    "first q1 = 0 collision at index {first_cross:?} of {}",
                    positions.len()
                ),
            )]
        }
        Figure::Pseudolemniscata => {
            let f = funnel.expect("computed for this figure");
            vec![Check::new(
                "collapse approach near (pi/4, 5pi/4)",
                f.passed(),
                format!(
                    "terminal {:?}, min r = {:.4}, final folded angles ({:.4}, {:.4})",
                    sol.terminal,
                    sol.min_r(),
                    f.final_angles[0],
                    f.final_angles[1]
                ),
            )]
        }
    }
}

/// Runs a figure with an explicit configuration.
pub fn run_figure_with(figure: Figure, cfg: &IntegratorConfig) -> Result<FigureRun> {
    let initial = figure.initial_condition();
    let solution = integrate_generalized(initial, &figure.params(), cfg)?;
    let energy_drift = solution.energy_drift();
    let max_angular_momentum = max_angular_momentum(&solution);
    let funnel = (figure == Figure::Pseudolemniscata).then(|| sundman_funnel_check(&solution));
    let mut checks = vec![Check::new(
        "integration succeeded",
        !matches!(solution.terminal, Terminal::Error(_)),
        format!(
            "terminal {:?} at zeta = {:.3}",
            solution.terminal,
            solution.final_zeta()
        ),
    )];
    checks.extend(shape_checks(figure, &solution, funnel.as_ref()));
    checks.push(Check::new(
        "energy drift",
        energy_drift < ENERGY_DRIFT_MAX,
        format!("{energy_drift:.3e}"),
    ));
    checks.push(Check::new(
        "angular momentum",
        max_angular_momentum < ANGULAR_MOMENTUM_MAX,
        format!("{max_angular_momentum:.3e}"),
    ));
    Ok(FigureRun {
        figure,
        initial,
        config: *cfg,
        solution,
        energy_drift,
        max_angular_momentum,
        funnel,
        checks,
    })
}

pub fn run_figure(figure: Figure) -> Result<FigureRun> {
    run_figure_with(figure, &figure.config())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for f in Figure::ALL {
            assert_eq!(f.name().parse::<Figure>().unwrap(), f);
        }
        assert_eq!(
            "turning-point".parse::<Figure>().unwrap(),
            Figure::TurningPoint
        );
        assert!("lemniscate".parse::<Figure>().is_err());
    }

    #[test]
    fn interior_maximum() {
        assert!(has_interior_maximum(&[1.0, 3.0, 2.0]));
        assert!(!has_interior_maximum(&[1.0, 2.0, 3.0]));
        assert!(!has_interior_maximum(&[3.0, 2.0, 1.0]));
        assert!(!has_interior_maximum(&[]));
    }

    #[test]
    fn turning_point_figure() {
        let run = run_figure(Figure::TurningPoint).unwrap();
        assert!(run.passed(), "{:#?}", run.checks);
    }

    #[test]
    fn transmission_figure() {
        let run = run_figure(Figure::Transmission).unwrap();
        assert!(run.passed(), "{:#?}", run.checks);
    }
}
