//! Adaptive integration, binary-collision detection and generalized
//! solutions continued through collisions by transmission.
//!
//! A generalized solution alternates two kinds of segments. Away from the
//! binary-collision walls the McGehee field is integrated in `zeta`. Inside a
//! guard band around a wall the state is handed to Newton's equations with the
//! smoothed potential, written in coordinates scaled by `L = phi1(r)` at the
//! hand-off. The potential gradient is homogeneous of degree -1, so the scaled
//! system is the original one with smoothing `epsilon` measured relative to
//! `L`. This keeps collisions arbitrarily close to total collapse resolvable.

pub mod ode;

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::dynamics::{vf_mcgehee_general, vf_mcgehee_klein, FieldKind, VectorFieldSpec};
use crate::error::{Error, Result};
use crate::model::{
    e_hat, fold_angle, fold_state, gamma_sq, CartesianState, Event, EventKind, McGeheeState,
    ModelParams, PhaseState, Sample, TimeVariable, Trajectory, KLEIN,
};
use crate::transforms::{
    ehat_from_momentum, hamiltonian_scaled, hamiltonian_smoothed, log_phi1, momentum_norm,
    smoothed_potential, solve_r_from_log_radius,
};
use ode::{first_crossing, Control, Options, Outcome, System};

/// Entering this distance from a wall hands the orbit to the Cartesian solver.
pub const GUARD_BAND: f64 = 0.05;
/// Leaving this distance from a wall hands it back.
pub const GUARD_BAND_EXIT: f64 = 0.06;
/// Radius below which an orbit in the collapse funnel is terminated.
pub const COLLAPSE_RADIUS: f64 = 1e-4;
/// Half-width of the collapse funnel around `(pi/4, 5pi/4)`.
pub const COLLAPSE_FUNNEL: f64 = 0.1;
/// `Ehat` and `|dpsi/dzeta|` thresholds of the zero-velocity asymptote.
pub const ZERO_VELOCITY_STOP: f64 = 1e-10;
/// Local minima of `Ehat` below this value are reported as touches.
pub const ZERO_VELOCITY_TOUCH: f64 = 1e-3;

const SCALE_MIN: f64 = 0.5;
const SCALE_MAX: f64 = 2.0;
const SIGMA_SPAN: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    pub event_tol: f64,
    pub horizon: f64,
    pub max_collisions: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            max_step: 0.5,
            event_tol: 1e-10,
            horizon: 50.0,
            max_collisions: 64,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("rel_tol", self.rel_tol),
            ("abs_tol", self.abs_tol),
            ("max_step", self.max_step),
            ("event_tol", self.event_tol),
        ];
        for (name, v) in positive {
            if !(v > 0.0) {
                return Err(Error::InvalidInput(format!(
                    "{name} = {v} must be positive"
                )));
            }
        }
        if !(self.horizon >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "horizon = {} must be non-negative",
                self.horizon
            )));
        }
        Ok(())
    }

    pub(crate) fn options(&self) -> Options {
        Options {
            rel_tol: self.rel_tol,
            abs_tol: self.abs_tol,
            max_step: self.max_step,
            ..Options::default()
        }
    }
}

impl System for VectorFieldSpec {
    fn dim(&self) -> usize {
        VectorFieldSpec::dim(self)
    }

    fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) -> Result<()> {
        self.eval(y, dy)
    }
}

fn time_variable(kind: FieldKind) -> TimeVariable {
    match kind {
        FieldKind::CartesianSmoothed | FieldKind::HomotheticRadial { .. } => TimeVariable::Sigma,
        _ => TimeVariable::Zeta,
    }
}

/// Integrates `field` from `state0` over `[0, cfg.horizon]`.
pub fn integrate(
    field: &VectorFieldSpec,
    state0: &[f64],
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    cfg.validate()?;
    if state0.len() != field.dim() {
        return Err(Error::InvalidInput(format!(
            "state has {} components, field needs {}",
            state0.len(),
            field.dim()
        )));
    }
    let sol = ode::solve(field, 0.0, state0, cfg.horizon, &cfg.options(), |_, _| {
        Ok(Control::Continue)
    })?;
    Ok(Trajectory {
        time_variable: time_variable(field.kind),
        samples: sol.samples,
        events: Vec::new(),
    })
}

/// Distance of `alpha` from the nearest binary-collision wall.
pub fn wall_distance(alpha: f64, l: u32) -> f64 {
    let w = PI / l as f64;
    let a = fold_angle(alpha, l);
    a.min(w - a)
}

fn wall_kind(wall_index: i64) -> EventKind {
    if wall_index.rem_euclid(2) == 0 {
        EventKind::BinaryCollisionQ2
    } else {
        EventKind::BinaryCollisionQ1
    }
}

/// First binary collision on `traj`: a wall crossing of the unfolded shape
/// angle for McGehee trajectories, a sign change of `q1` or `q2` for
/// Cartesian ones.
pub fn detect_binary_collision(traj: &Trajectory, l: u32, event_tol: f64) -> Option<Event> {
    let cartesian = traj.time_variable == TimeVariable::Sigma
        && traj.samples.first().is_some_and(|s| s.y.len() >= 4);
    let w = PI / l as f64;
    for pair in traj.samples.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        if cartesian {
            let mut best: Option<(f64, usize)> = None;
            for i in 0..2 {
                if let Some(t) = first_crossing(a, b, |y| y[i], event_tol) {
                    if best.is_none_or(|(tb, _)| t < tb) {
                        best = Some((t, i));
                    }
                }
            }
            if let Some((t, i)) = best {
                let y = crate::model::hermite(a, b, t);
                let c = CartesianState {
                    q: [y[0], y[1]],
                    p: [y[2], y[3]],
                    sigma: t,
                };
                let kind = if i == 0 {
                    EventKind::BinaryCollisionQ1
                } else {
                    EventKind::BinaryCollisionQ2
                };
                return Some(Event {
                    kind,
                    time: t,
                    state_before: PhaseState::Cartesian(c),
                    state_after: PhaseState::Cartesian(c),
                    location: Some(c.q),
                });
            }
        } else {
            let (ja, jb) = ((a.y[1] / w).floor(), (b.y[1] / w).floor());
            if ja == jb {
                continue;
            }
            let wall_index = if b.y[1] > a.y[1] { ja + 1.0 } else { ja };
            let wall = wall_index * w;
            let t = first_crossing(a, b, |y| y[1] - wall, event_tol)?;
            let y = crate::model::hermite(a, b, t);
            let s = McGeheeState::new(y[0], y[1], y[2]);
            let e = Event {
                kind: wall_kind(wall_index as i64),
                time: t,
                state_before: PhaseState::McGehee(s),
                state_after: PhaseState::McGehee(s),
                location: None,
            };
            let after = transmit(&e, l).ok()?;
            return Some(Event {
                state_after: after,
                ..e
            });
        }
    }
    None
}

/// Continuation through a binary collision.
///
/// McGehee states are reflected across the wall they sit on and returned in
/// the fundamental domain; at the wall the momentum angle is perpendicular
/// to it, so the reflection shifts `psi` by `pi`. Cartesian states pass
/// through unchanged: the colliding coordinate continues oddly through zero
/// with its velocity, the other one smoothly.
pub fn transmit(e: &Event, l: u32) -> Result<PhaseState> {
    if !e.kind.is_binary_collision() {
        return Err(Error::InvalidInput(format!(
            "{:?} is not a binary-collision event",
            e.kind
        )));
    }
    match e.state_before {
        PhaseState::McGehee(s) => {
            let w = PI / l as f64;
            let wall = (s.alpha / w).round() * w;
            let (alpha, psi) = fold_state(2.0 * wall - s.alpha, 2.0 * wall - s.psi, l);
            Ok(PhaseState::McGehee(McGeheeState::new(s.r, alpha, psi)))
        }
        PhaseState::Cartesian(c) => Ok(PhaseState::Cartesian(c)),
    }
}

/// Maximum relative deviation of `H_eps` along a Cartesian trajectory.
pub fn energy_drift(traj: &Trajectory, params: &ModelParams) -> Result<f64> {
    let mut h0 = None;
    let mut worst: f64 = 0.0;
    for s in &traj.samples {
        let h = hamiltonian_smoothed(&CartesianState::from_slice(&s.y), params)?;
        let h0 = *h0.get_or_insert(h);
        worst = worst.max((h - h0).abs() / h0.abs().max(1.0));
    }
    Ok(worst)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "reason", content = "message", rename_all = "snake_case")]
pub enum Terminal {
    Horizon,
    CollapseApproach,
    ZeroVelocityAsymptote,
    CollisionLimit,
    Error(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "coordinates", rename_all = "snake_case")]
pub enum SegmentKind {
    /// Samples are `[r, alpha, psi]` (unfolded) in time `zeta`.
    #[serde(rename = "mcgehee")]
    McGehee { h: f64 },
    /// Samples are `[q1/L, q2/L, p1, p2, zeta]` in time `sigma / L`.
    Cartesian { log_scale: f64, epsilon: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Segment {
    pub kind: SegmentKind,
    pub trajectory: Trajectory,
}

/// One sample of a generalized solution in every coordinate system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OrbitPoint {
    pub zeta: f64,
    pub r: f64,
    pub alpha: f64,
    pub alpha_folded: f64,
    pub psi: f64,
    /// Physical position; underflows to zero very close to total collapse.
    pub q: [f64; 2],
    pub p: [f64; 2],
    pub ehat: f64,
    /// Energy: the segment level on McGehee segments, `H_eps` on Cartesian
    /// ones.
    pub h: f64,
    pub segment: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeneralizedSolution {
    pub params: ModelParams,
    pub segments: Vec<Segment>,
    pub collisions: Vec<Event>,
    /// Collisions, zero-velocity touches and the terminal event, by time.
    pub events: Vec<Event>,
    pub terminal: Terminal,
    /// Largest `|h - h0|` introduced by re-deriving `h` at hand-backs from
    /// the Cartesian solver.
    pub energy_bookkeeping: f64,
}

fn unwrap_near(angle: f64, reference: f64) -> f64 {
    angle + 2.0 * PI * ((reference - angle) / (2.0 * PI)).round()
}

struct ScaledCartesian {
    params: ModelParams,
    log_scale: f64,
}

impl ScaledCartesian {
    fn r_of(&self, q: [f64; 2]) -> f64 {
        solve_r_from_log_radius(self.log_scale + q[0].hypot(q[1]).ln())
    }
}

impl System for ScaledCartesian {
    fn dim(&self) -> usize {
        5
    }

    fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) -> Result<()> {
        let q = [y[0], y[1]];
        let (_, g) = smoothed_potential(q, self.params.epsilon, self.params.l)?;
        let gsq = gamma_sq(self.params.l);
        dy[0] = y[2] / gsq;
        dy[1] = y[3] / gsq;
        dy[2] = g[0];
        dy[3] = g[1];
        let rho = q[0].hypot(q[1]);
        let pn = y[2].hypot(y[3]);
        let r = self.r_of(q);
        let rate = gsq.sqrt() / (r * r * rho * pn);
        if !rate.is_finite() {
            return Err(Error::Singularity(
                "zero momentum in the scaled solver".into(),
            ));
        }
        dy[4] = rate;
        Ok(())
    }

    fn controlled(&self, i: usize) -> bool {
        i < 4
    }
}

struct McGeheeField {
    params: ModelParams,
}

impl McGeheeField {
    fn eval(&self, y: &[f64]) -> Result<[f64; 3]> {
        let s = McGeheeState::new(y[0], y[1], y[2]);
        if self.params.l == KLEIN {
            vf_mcgehee_klein(s, self.params.h)
        } else {
            vf_mcgehee_general(s, &self.params)
        }
    }
}

impl System for McGeheeField {
    fn dim(&self) -> usize {
        3
    }

    fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) -> Result<()> {
        if !(y[0] >= 0.0) {
            return Err(crate::error::domain("negative radius"));
        }
        dy.copy_from_slice(&self.eval(y)?);
        Ok(())
    }
}

/// Whether the folded `(alpha, psi)` lies in the collapse funnel.
pub fn in_collapse_funnel(alpha: f64, psi: f64, l: u32) -> bool {
    let (a, p) = fold_state(alpha, psi, l);
    let central = PI / (2.0 * l as f64);
    let target = central + PI;
    let dpsi = (p - target).rem_euclid(2.0 * PI);
    let dpsi = dpsi.min(2.0 * PI - dpsi);
    (a - central).abs() < COLLAPSE_FUNNEL && dpsi < COLLAPSE_FUNNEL
}

enum McGeheeEnd {
    Guard,
    Collapse,
    ZeroVelocity,
    Horizon,
}

enum CartesianEnd {
    Exit,
    Rescale,
    Horizon,
    CollisionLimit,
}

/// Integrates a generalized solution from `state0` (unfolded angles) on the
/// energy level `params.h`, continuing through binary collisions.
pub fn integrate_generalized(
    state0: McGeheeState,
    params: &ModelParams,
    cfg: &IntegratorConfig,
) -> Result<GeneralizedSolution> {
    cfg.validate()?;
    let l = params.l;
    if !(state0.r > 0.0) {
        return Err(Error::InvalidInput(format!(
            "initial r = {} must be positive",
            state0.r
        )));
    }
    let ehat0 = e_hat(params.h, state0.r, state0.alpha, l)?;
    if ehat0 < 0.0 {
        return Err(Error::InvalidInput(format!(
            "initial state is off the energy shell: Ehat = {ehat0:e}"
        )));
    }

    let mut sol = GeneralizedSolution {
        params: *params,
        segments: Vec::new(),
        collisions: Vec::new(),
        events: Vec::new(),
        terminal: Terminal::Horizon,
        energy_bookkeeping: 0.0,
    };
    let mut s = state0;
    let mut h = params.h;
    let mut zeta = 0.0;
    // Cartesian scaled restart: (q, p, log_scale)
    let mut pending: Option<([f64; 2], [f64; 2], f64)> = None;

    if cfg.horizon == 0.0 {
        let y = s.to_array();
        let field = McGeheeField {
            params: ModelParams { h, ..*params },
        };
        let dy = field.eval(&y).unwrap_or([0.0; 3]);
        let mut traj = Trajectory::new(TimeVariable::Zeta);
        traj.samples.push(Sample {
            t: 0.0,
            y: y.to_vec(),
            dy: dy.to_vec(),
        });
        sol.segments.push(Segment {
            kind: SegmentKind::McGehee { h },
            trajectory: traj,
        });
        finish(&mut sol, zeta);
        return Ok(sol);
    }

    loop {
        let cartesian = pending.is_some() || wall_distance(s.alpha, l) < GUARD_BAND;
        if !cartesian {
            let seg_params = ModelParams { h, ..*params };
            match mcgehee_segment(s, zeta, &seg_params, cfg) {
                Ok((traj, end)) => {
                    let last = traj.last().expect("non-empty").clone();
                    zeta = last.t;
                    s = McGeheeState::from_slice(&last.y);
                    sol.segments.push(Segment {
                        kind: SegmentKind::McGehee { h },
                        trajectory: traj,
                    });
                    match end {
                        McGeheeEnd::Guard => {}
                        McGeheeEnd::Collapse => {
                            sol.terminal = Terminal::CollapseApproach;
                            break;
                        }
                        McGeheeEnd::ZeroVelocity => {
                            sol.terminal = Terminal::ZeroVelocityAsymptote;
                            break;
                        }
                        McGeheeEnd::Horizon => break,
                    }
                }
                Err(e) => {
                    sol.terminal = Terminal::Error(e.to_string());
                    break;
                }
            }
        } else {
            let (q, p, log_scale) = match pending.take() {
                Some(x) => x,
                None => {
                    let ehat = e_hat(h, s.r, s.alpha, l)?.max(0.0);
                    let pn = momentum_norm(ehat, s.r, l);
                    let (sa, ca) = s.alpha.sin_cos();
                    let (sp, cp) = s.psi.sin_cos();
                    ([ca, sa], [pn * cp, pn * sp], log_phi1(s.r))
                }
            };
            let remaining = cfg.max_collisions.saturating_sub(sol.collisions.len());
            match cartesian_segment(q, p, log_scale, zeta, s, params, cfg, remaining) {
                Ok((traj, collisions, end, exit_state)) => {
                    let last = traj.last().expect("non-empty").clone();
                    zeta = last.y[4];
                    s = exit_state;
                    sol.collisions.extend(collisions);
                    sol.segments.push(Segment {
                        kind: SegmentKind::Cartesian {
                            log_scale,
                            epsilon: params.epsilon,
                        },
                        trajectory: traj,
                    });
                    match end {
                        CartesianEnd::Exit => {
                            let q = [last.y[0], last.y[1]];
                            let p = [last.y[2], last.y[3]];
                            match hamiltonian_scaled(q, p, log_scale, l) {
                                Ok(hn) => {
                                    sol.energy_bookkeeping =
                                        sol.energy_bookkeeping.max((hn - params.h).abs());
                                    h = hn;
                                }
                                Err(e) => {
                                    sol.terminal = Terminal::Error(e.to_string());
                                    break;
                                }
                            }
                        }
                        CartesianEnd::Rescale => {
                            let q = [last.y[0], last.y[1]];
                            let rho = q[0].hypot(q[1]);
                            pending = Some((
                                [q[0] / rho, q[1] / rho],
                                [last.y[2], last.y[3]],
                                log_scale + rho.ln(),
                            ));
                        }
                        CartesianEnd::Horizon => break,
                        CartesianEnd::CollisionLimit => {
                            sol.terminal = Terminal::CollisionLimit;
                            break;
                        }
                    }
                }
                Err(e) => {
                    sol.terminal = Terminal::Error(e.to_string());
                    break;
                }
            }
        }
    }
    finish(&mut sol, zeta);
    Ok(sol)
}

fn finish(sol: &mut GeneralizedSolution, zeta: f64) {
    let points = sol.orbit_points();
    let mut events = sol.collisions.clone();
    for w in points.windows(3) {
        let (a, b, c) = (&w[0], &w[1], &w[2]);
        if b.ehat < ZERO_VELOCITY_TOUCH && b.ehat <= a.ehat && b.ehat < c.ehat {
            let st = PhaseState::McGehee(McGeheeState::new(b.r, b.alpha, b.psi));
            events.push(Event {
                kind: EventKind::ZeroVelocityTouch,
                time: b.zeta,
                state_before: st,
                state_after: st,
                location: Some(b.q),
            });
        }
    }
    if let Some(last) = points.last() {
        let st = PhaseState::McGehee(McGeheeState::new(last.r, last.alpha, last.psi));
        let kind = match sol.terminal {
            Terminal::CollapseApproach => Some(EventKind::TotalCollapseApproach),
            Terminal::Horizon => Some(EventKind::HorizonReached),
            _ => None,
        };
        if let Some(kind) = kind {
            events.push(Event {
                kind,
                time: zeta,
                state_before: st,
                state_after: st,
                location: Some(last.q),
            });
        }
    }
    events.sort_by(|a, b| a.time.total_cmp(&b.time));
    sol.events = events;
}

fn mcgehee_segment(
    s: McGeheeState,
    zeta0: f64,
    params: &ModelParams,
    cfg: &IntegratorConfig,
) -> Result<(Trajectory, McGeheeEnd)> {
    let l = params.l;
    let field = McGeheeField { params: *params };
    let mut end = McGeheeEnd::Horizon;
    let sol = ode::solve(
        &field,
        zeta0,
        &s.to_array(),
        cfg.horizon,
        &cfg.options(),
        |a, b| {
            if let Some(t) =
                first_crossing(a, b, |y| wall_distance(y[1], l) - GUARD_BAND, cfg.event_tol)
            {
                end = McGeheeEnd::Guard;
                return Ok(Control::StopAt(t));
            }
            let y = &b.y;
            if y[0] < COLLAPSE_RADIUS && in_collapse_funnel(y[1], y[2], l) {
                end = McGeheeEnd::Collapse;
                return Ok(Control::StopAt(b.t));
            }
            let ehat = e_hat(params.h, y[0], y[1], l)?;
            if ehat < ZERO_VELOCITY_STOP && b.dy[2].abs() < ZERO_VELOCITY_STOP {
                end = McGeheeEnd::ZeroVelocity;
                return Ok(Control::StopAt(b.t));
            }
            Ok(Control::Continue)
        },
    )?;
    if sol.outcome == Outcome::Reached {
        end = McGeheeEnd::Horizon;
    }
    Ok((
        Trajectory {
            time_variable: TimeVariable::Zeta,
            samples: sol.samples,
            events: Vec::new(),
        },
        end,
    ))
}

/// McGehee image of a scaled Cartesian sample, unfolded near `reference`.
fn scaled_to_mcgehee(y: &[f64], log_scale: f64, reference: McGeheeState) -> McGeheeState {
    let rho = y[0].hypot(y[1]);
    let r = solve_r_from_log_radius(log_scale + rho.ln());
    let alpha = unwrap_near(y[1].atan2(y[0]), reference.alpha);
    let psi = unwrap_near(y[3].atan2(y[2]), reference.psi);
    McGeheeState::new(r, alpha, psi)
}

#[allow(clippy::too_many_arguments)]
fn cartesian_segment(
    q: [f64; 2],
    p: [f64; 2],
    log_scale: f64,
    zeta0: f64,
    reference: McGeheeState,
    params: &ModelParams,
    cfg: &IntegratorConfig,
    collisions_left: usize,
) -> Result<(Trajectory, Vec<Event>, CartesianEnd, McGeheeState)> {
    let l = params.l;
    let sys = ScaledCartesian {
        params: *params,
        log_scale,
    };
    let y0 = [q[0], q[1], p[0], p[1], zeta0];
    let mut end = CartesianEnd::Horizon;
    let mut collisions = Vec::new();
    let mut tracked = reference;
    let tol = cfg.event_tol;
    let alpha_of = |y: &[f64]| y[1].atan2(y[0]);

    let opts = Options {
        max_step: f64::INFINITY,
        ..cfg.options()
    };
    let sol = ode::solve(&sys, 0.0, &y0, SIGMA_SPAN, &opts, |a, b| {
        let mut stop: Option<(f64, CartesianEnd)> = None;
        let mut consider = |t: Option<f64>, why: CartesianEnd| {
            if let Some(t) = t {
                if stop.as_ref().is_none_or(|(ts, _)| t < *ts) {
                    stop = Some((t, why));
                }
            }
        };
        consider(
            first_crossing(
                a,
                b,
                |y| wall_distance(alpha_of(y), l) - GUARD_BAND_EXIT,
                tol,
            ),
            CartesianEnd::Exit,
        );
        consider(
            first_crossing(a, b, |y| (y[0].hypot(y[1]) / SCALE_MIN).ln(), tol),
            CartesianEnd::Rescale,
        );
        consider(
            first_crossing(a, b, |y| (y[0].hypot(y[1]) / SCALE_MAX).ln(), tol),
            CartesianEnd::Rescale,
        );
        consider(
            first_crossing(a, b, |y| y[4] - cfg.horizon, tol),
            CartesianEnd::Horizon,
        );

        let limit = stop.as_ref().map_or(b.t, |(t, _)| *t);
        let mut hits: Vec<(f64, usize)> = (0..2)
            .filter_map(|i| first_crossing(a, b, |y| y[i], tol).map(|t| (t, i)))
            .filter(|(t, _)| *t <= limit)
            .collect();
        hits.sort_by(|x, y| x.0.total_cmp(&y.0));
        for (t, i) in hits {
            if collisions.len() >= collisions_left {
                stop = Some((t, CartesianEnd::CollisionLimit));
                break;
            }
            let y = crate::model::hermite(a, b, t);
            let before = scaled_to_mcgehee(&y, log_scale, tracked);
            let kind = if i == 0 {
                EventKind::BinaryCollisionQ1
            } else {
                EventKind::BinaryCollisionQ2
            };
            let e = Event {
                kind,
                time: y[4],
                state_before: PhaseState::McGehee(before),
                state_after: PhaseState::McGehee(before),
                location: Some([y[0] * log_scale.exp(), y[1] * log_scale.exp()]),
            };
            let after = transmit(&e, l)?;
            collisions.push(Event {
                state_after: after,
                ..e
            });
        }
        tracked = scaled_to_mcgehee(&b.y, log_scale, tracked);
        Ok(match stop {
            Some((t, why)) => {
                end = why;
                Control::StopAt(t)
            }
            None => Control::Continue,
        })
    })?;
    if sol.outcome == Outcome::Reached {
        return Err(Error::StepBudget {
            t: SIGMA_SPAN,
            steps: 0,
            state: sol.samples.last().map(|s| s.y.clone()).unwrap_or_default(),
        });
    }
    let last = sol.samples.last().expect("non-empty");
    let exit_state = scaled_to_mcgehee(&last.y, log_scale, tracked);
    Ok((
        Trajectory {
            time_variable: TimeVariable::Sigma,
            samples: sol.samples,
            events: Vec::new(),
        },
        collisions,
        end,
        exit_state,
    ))
}

impl GeneralizedSolution {
    /// All samples mapped to a common description, angles unfolded
    /// continuously along the orbit.
    pub fn orbit_points(&self) -> Vec<OrbitPoint> {
        let l = self.params.l;
        let mut out = Vec::new();
        let mut reference: Option<McGeheeState> = None;
        for (k, seg) in self.segments.iter().enumerate() {
            for smp in &seg.trajectory.samples {
                let point = match seg.kind {
                    SegmentKind::McGehee { h } => {
                        let s = McGeheeState::from_slice(&smp.y);
                        let ehat = e_hat(h, s.r, s.alpha, l).unwrap_or(f64::NAN);
                        let rho = crate::transforms::phi1(s.r);
                        let pn = momentum_norm(ehat, s.r, l);
                        let (sa, ca) = s.alpha.sin_cos();
                        let (sp, cp) = s.psi.sin_cos();
                        OrbitPoint {
                            zeta: smp.t,
                            r: s.r,
                            alpha: s.alpha,
                            alpha_folded: fold_angle(s.alpha, l),
                            psi: s.psi,
                            q: [rho * ca, rho * sa],
                            p: [pn * cp, pn * sp],
                            ehat,
                            h,
                            segment: k,
                        }
                    }
                    SegmentKind::Cartesian { log_scale, epsilon } => {
                        let refs = reference.unwrap_or_else(|| {
                            McGeheeState::new(
                                0.0,
                                smp.y[1].atan2(smp.y[0]),
                                smp.y[3].atan2(smp.y[2]),
                            )
                        });
                        let s = scaled_to_mcgehee(&smp.y, log_scale, refs);
                        let pn = smp.y[2].hypot(smp.y[3]);
                        let scale = log_scale.exp();
                        let q = [smp.y[0], smp.y[1]];
                        let h = smoothed_potential(q, epsilon, l)
                            .map(|(u, _)| {
                                0.5 * pn * pn / gamma_sq(l) - u + (2 * l - 1) as f64 * log_scale
                            })
                            .unwrap_or(f64::NAN);
                        OrbitPoint {
                            zeta: smp.y[4],
                            r: s.r,
                            alpha: s.alpha,
                            alpha_folded: fold_angle(s.alpha, l),
                            psi: s.psi,
                            q: [q[0] * scale, q[1] * scale],
                            p: [smp.y[2], smp.y[3]],
                            ehat: ehat_from_momentum(pn, s.r, l),
                            h,
                            segment: k,
                        }
                    }
                };
                let s = McGeheeState::new(point.r, point.alpha, point.psi);
                reference = Some(s);
                out.push(point);
            }
        }
        out
    }

    /// Radii of the binary collisions in order.
    pub fn collision_radii(&self) -> Vec<f64> {
        self.collisions
            .iter()
            .filter_map(|e| match e.state_before {
                PhaseState::McGehee(s) => Some(s.r),
                PhaseState::Cartesian(_) => None,
            })
            .collect()
    }

    /// Signed position of each collision along the axis it happens on.
    pub fn collision_axis_positions(&self) -> Vec<(EventKind, f64)> {
        self.collisions
            .iter()
            .filter_map(|e| match e.state_before {
                PhaseState::McGehee(s) => {
                    let (sa, ca) = s.alpha.sin_cos();
                    let sign = match e.kind {
                        EventKind::BinaryCollisionQ2 => ca.signum(),
                        _ => sa.signum(),
                    };
                    Some((e.kind, sign * s.r))
                }
                PhaseState::Cartesian(_) => None,
            })
            .collect()
    }

    /// Maximum relative deviation of the energy column from its first value.
    pub fn energy_drift(&self) -> f64 {
        let pts = self.orbit_points();
        let h0 = match pts.first() {
            Some(p) => p.h,
            None => return 0.0,
        };
        pts.iter()
            .map(|p| (p.h - h0).abs() / h0.abs().max(1.0))
            .fold(0.0, f64::max)
    }

    pub fn max_r(&self) -> f64 {
        self.orbit_points().iter().map(|p| p.r).fold(0.0, f64::max)
    }

    pub fn min_r(&self) -> f64 {
        self.orbit_points()
            .iter()
            .map(|p| p.r)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn final_zeta(&self) -> f64 {
        self.orbit_points().last().map_or(0.0, |p| p.zeta)
    }

    pub fn succeeded(&self) -> bool {
        !matches!(self.terminal, Terminal::Error(_))
    }
}
