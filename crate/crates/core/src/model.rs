//! Domain types, the dihedral logarithmic potential and the geometry of the
//! energy hypersurfaces.
//!
//! All quantities are dimensionless. The squared circulation of every vortex
//! is fixed to `2*pi/l`, so that `Gamma^{-1} = l/(2*pi) * Id`.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use serde::Serialize;

use crate::error::{domain, Error, Result};

/// Dihedral order of the Klein four-group `D_2`.
pub const KLEIN: u32 = 2;

/// Default potential smoothing length.
pub const DEFAULT_EPSILON: f64 = 1e-6;

/// Upper end of the radial scan used to locate zero-velocity points.
pub const ZERO_VELOCITY_SCAN_MAX: f64 = 10.0;
const ZERO_VELOCITY_SCAN_MIN: f64 = 1e-3;
const ZERO_VELOCITY_SCAN_POINTS: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModelParams {
    /// Dihedral order, `l >= 2`.
    pub l: u32,
    /// Total energy level.
    pub h: f64,
    /// Potential smoothing length, `>= 0`.
    pub epsilon: f64,
}

impl ModelParams {
    pub fn new(l: u32, h: f64, epsilon: f64) -> Result<Self> {
        if l < 2 {
            return Err(Error::InvalidInput(format!("dihedral order l = {l} < 2")));
        }
        if !(epsilon >= 0.0) || !h.is_finite() {
            return Err(Error::InvalidInput(format!(
                "need finite h and epsilon >= 0, got h = {h}, epsilon = {epsilon}"
            )));
        }
        Ok(Self { l, h, epsilon })
    }

    /// Klein group parameters with the default smoothing.
    pub fn klein(h: f64) -> Self {
        Self {
            l: KLEIN,
            h,
            epsilon: DEFAULT_EPSILON,
        }
    }

    /// Squared circulation of each vortex, `2*pi/l`.
    pub fn gamma_sq(&self) -> f64 {
        gamma_sq(self.l)
    }
}

pub fn gamma_sq(l: u32) -> f64 {
    2.0 * PI / l as f64
}

/// Regularized coordinates: blow-up radius, shape angle, momentum angle.
///
/// `alpha` is stored unfolded; see [`fold_state`] for the fundamental-domain
/// representative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McGeheeState {
    pub r: f64,
    pub alpha: f64,
    pub psi: f64,
}

impl McGeheeState {
    pub const fn new(r: f64, alpha: f64, psi: f64) -> Self {
        Self { r, alpha, psi }
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.r, self.alpha, self.psi]
    }

    pub fn from_slice(y: &[f64]) -> Self {
        Self::new(y[0], y[1], y[2])
    }

    pub fn folded_alpha(&self, l: u32) -> f64 {
        fold_angle(self.alpha, l)
    }

    /// Same physical configuration with `alpha` in the fundamental domain.
    pub fn folded(&self, l: u32) -> Self {
        let (alpha, psi) = fold_state(self.alpha, self.psi, l);
        Self::new(self.r, alpha, psi)
    }
}

/// Position and momentum of the representative vortex.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CartesianState {
    pub q: [f64; 2],
    pub p: [f64; 2],
    /// Arc-length time.
    pub sigma: f64,
}

impl CartesianState {
    pub const fn new(q: [f64; 2], p: [f64; 2]) -> Self {
        Self { q, p, sigma: 0.0 }
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.q[0], self.q[1], self.p[0], self.p[1]]
    }

    pub fn from_slice(y: &[f64]) -> Self {
        Self::new([y[0], y[1]], [y[2], y[3]])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeVariable {
    Sigma,
    Tau,
    Zeta,
}

/// One accepted integrator point. `dy` is the vector field at `(t, y)` and
/// makes cubic Hermite dense output possible between consecutive samples.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Sample {
    pub t: f64,
    pub y: Vec<f64>,
    pub dy: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub time_variable: TimeVariable,
    pub samples: Vec<Sample>,
    pub events: Vec<Event>,
}

impl Trajectory {
    pub fn new(time_variable: TimeVariable) -> Self {
        Self {
            time_variable,
            samples: Vec::new(),
            events: Vec::new(),
        }
    }

    pub fn first(&self) -> Option<&Sample> {
        self.samples.first()
    }

    pub fn last(&self) -> Option<&Sample> {
        self.samples.last()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Cubic Hermite interpolation on the step containing `t`.
    pub fn interpolate(&self, t: f64) -> Option<Vec<f64>> {
        let s = &self.samples;
        if s.is_empty() || t < s[0].t || t > s[s.len() - 1].t {
            return None;
        }
        let i = match s.binary_search_by(|x| x.t.total_cmp(&t)) {
            Ok(i) => return Some(s[i].y.clone()),
            Err(i) => i,
        };
        Some(hermite(&s[i - 1], &s[i], t))
    }
}

pub(crate) fn hermite(a: &Sample, b: &Sample, t: f64) -> Vec<f64> {
    let h = b.t - a.t;
    let th = (t - a.t) / h;
    let th2 = th * th;
    let th3 = th2 * th;
    let h00 = 2.0 * th3 - 3.0 * th2 + 1.0;
    let h10 = th3 - 2.0 * th2 + th;
    let h01 = -2.0 * th3 + 3.0 * th2;
    let h11 = th3 - th2;
    (0..a.y.len())
        .map(|k| h00 * a.y[k] + h10 * h * a.dy[k] + h01 * b.y[k] + h11 * h * b.dy[k])
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    /// Pairwise collision on the `q2` axis: `q1 = 0`, `alpha` at the `pi/2` wall.
    BinaryCollisionQ1,
    /// Pairwise collision on the `q1` axis: `q2 = 0`, `alpha` at the `0` wall.
    BinaryCollisionQ2,
    ZeroVelocityTouch,
    TotalCollapseApproach,
    HorizonReached,
}

impl EventKind {
    pub fn is_binary_collision(self) -> bool {
        matches!(self, Self::BinaryCollisionQ1 | Self::BinaryCollisionQ2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "coordinates", rename_all = "snake_case")]
pub enum PhaseState {
    #[serde(rename = "mcgehee")]
    McGehee(McGeheeState),
    Cartesian(CartesianState),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Event {
    pub kind: EventKind,
    pub time: f64,
    pub state_before: PhaseState,
    pub state_after: PhaseState,
    /// Unfolded physical position of the representative vortex, when known.
    pub location: Option<[f64; 2]>,
}

/// Representative of `alpha` in the closed fundamental arc `[0, pi/l]`.
pub fn fold_angle(alpha: f64, l: u32) -> f64 {
    fold_state(alpha, 0.0, l).0
}

/// Applies the group element that brings `alpha` into `[0, pi/l]` to both
/// angles. Rotations shift `psi`; reflections mirror it about the same axis.
pub fn fold_state(alpha: f64, psi: f64, l: u32) -> (f64, f64) {
    let w = PI / l as f64;
    let t = alpha.rem_euclid(2.0 * w);
    // rotation by -(alpha - t)
    let rotated_psi = psi + (t - alpha);
    if t <= w {
        (t, rotated_psi)
    } else {
        // then the reflection theta -> 2w - theta
        (2.0 * w - t, 2.0 * w - rotated_psi)
    }
}

fn r2_log_r(r: f64) -> f64 {
    if r == 0.0 {
        0.0
    } else {
        r * r * r.ln()
    }
}

fn check_shape(alpha: f64, l: u32) -> Result<f64> {
    let s = (l as f64 * alpha).sin().abs();
    let a = fold_angle(alpha, l);
    if !(s > 0.0) || a == 0.0 || a >= PI / l as f64 {
        return Err(domain(format!(
            "shape angle {alpha} lies on a binary-collision wall of D_{l}"
        )));
    }
    Ok(s)
}

/// Angular part of the dihedral potential, `-log(2l sin(l alpha))`.
pub fn u_angular(alpha: f64, l: u32) -> Result<f64> {
    let s = check_shape(alpha, l)?;
    Ok(-(2.0 * l as f64 * s).ln())
}

/// Dihedral potential of the representative vortex at `q`.
pub fn u_cartesian(q: [f64; 2], l: u32) -> Result<f64> {
    let rho = q[0].hypot(q[1]);
    if rho == 0.0 {
        return Err(Error::Singularity("total collapse q = 0".into()));
    }
    let alpha = q[1].atan2(q[0]);
    let ua = u_angular(alpha, l).map_err(|_| {
        Error::Singularity(format!("q = ({}, {}) is on the collision set", q[0], q[1]))
    })?;
    Ok(ua - (2 * l - 1) as f64 * rho.ln())
}

/// Gradient of the potential at the unit-circle point of angle `alpha`.
pub fn grad_u_shape(alpha: f64, l: u32) -> Result<[f64; 2]> {
    check_shape(alpha, l)?;
    let lf = l as f64;
    let (s, c) = alpha.sin_cos();
    let radial = -(2.0 * lf - 1.0);
    let tangential = -lf / (lf * alpha).tan();
    Ok([radial * c - tangential * s, radial * s + tangential * c])
}

/// Gradient of the potential at `q`; homogeneous of degree -1.
pub fn grad_u_cartesian(q: [f64; 2], l: u32) -> Result<[f64; 2]> {
    let rho = q[0].hypot(q[1]);
    if rho == 0.0 {
        return Err(Error::Singularity("total collapse q = 0".into()));
    }
    let g = grad_u_shape(q[1].atan2(q[0]), l).map_err(|_| {
        Error::Singularity(format!("q = ({}, {}) is on the collision set", q[0], q[1]))
    })?;
    Ok([g[0] / rho, g[1] / rho])
}

/// Radial part of the rescaled kinetic energy, `2[h r^2 + (2l-1)(1 - r^2 log r)]`.
pub fn e_radial(h: f64, r: f64, l: u32) -> f64 {
    2.0 * (h * r * r + (2 * l - 1) as f64 * (1.0 - r2_log_r(r)))
}

/// Rescaled kinetic energy `Ehat(h, r, alpha)`; motion is possible where it
/// is non-negative.
pub fn e_hat(h: f64, r: f64, alpha: f64, l: u32) -> Result<f64> {
    if r == 0.0 {
        return Ok(e_radial(h, 0.0, l));
    }
    Ok(e_radial(h, r, l) + 2.0 * r * r * u_angular(alpha, l)?)
}

/// Root `rbar > 0` of `r -> Ehat(h, r, alpha)`, or `None` when the scan over
/// `(0, 10]` finds no sign change.
pub fn zero_velocity_radius(h: f64, alpha: f64, l: u32) -> Option<f64> {
    let f = |r: f64| e_hat(h, r, alpha, l).ok();
    let ratio = (ZERO_VELOCITY_SCAN_MAX / ZERO_VELOCITY_SCAN_MIN)
        .powf(1.0 / (ZERO_VELOCITY_SCAN_POINTS - 1) as f64);
    let mut lo = ZERO_VELOCITY_SCAN_MIN;
    let mut f_lo = f(lo)?;
    for k in 1..ZERO_VELOCITY_SCAN_POINTS {
        let hi = if k == ZERO_VELOCITY_SCAN_POINTS - 1 {
            ZERO_VELOCITY_SCAN_MAX
        } else {
            lo * ratio
        };
        let f_hi = f(hi)?;
        if f_lo == 0.0 {
            return Some(lo);
        }
        if f_lo.signum() != f_hi.signum() {
            return Some(bisect(|r| f(r).unwrap_or(f64::NAN), lo, hi, f_lo));
        }
        lo = hi;
        f_lo = f_hi;
    }
    None
}

/// Bisection down to adjacent floating-point numbers.
pub(crate) fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, f_lo: f64) -> f64 {
    let s_lo = f_lo.signum();
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if fm.signum() == s_lo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Upper bound on the shape angle of an escaping orbit at radius `r` (l = 2):
/// `g(r) = asin(exp(E0(r) / 2r^2) / 4) / 2`. `None` when the `asin` argument
/// exceeds one and there is no constraint.
pub fn g_bound(r: f64) -> Option<f64> {
    if !(r > 0.0) {
        return None;
    }
    let e0 = 6.0 * (1.0 - r2_log_r(r));
    let arg = 0.25 * (e0 / (2.0 * r * r)).exp();
    (arg <= 1.0).then(|| 0.5 * arg.asin())
}

/// The regular `2l`-gon: `(alpha_c, U''(alpha_c)) = (pi/(2l), l^2)`.
pub fn central_configuration(l: u32) -> (f64, f64) {
    let lf = l as f64;
    (PI / (2.0 * lf), lf * lf)
}

/// Slope `m(alpha)` whose arctangent is the momentum angle on the
/// zero-velocity rest curves. Returns `+inf` at `alpha = 0`.
pub fn m_slope(alpha: f64) -> f64 {
    let (s, c) = alpha.sin_cos();
    if s == 0.0 {
        return f64::INFINITY;
    }
    c * (s * s + 1.0) / (s * (c * c + 1.0))
}

/// Momentum angle of the rest curve `P3` over `alpha`.
pub fn p3_psi(alpha: f64) -> f64 {
    m_slope(alpha).atan()
}

/// Smoothed Klein potential and its gradient:
/// `-1/2 log((4 q1^2 + e^2)(4 q2^2 + e^2)(4|q|^2 + e^2))`.
pub fn u_smoothed(q: [f64; 2], epsilon: f64) -> Result<(f64, [f64; 2])> {
    let e2 = epsilon * epsilon;
    let a = 4.0 * q[0] * q[0] + e2;
    let b = 4.0 * q[1] * q[1] + e2;
    let c = 4.0 * (q[0] * q[0] + q[1] * q[1]) + e2;
    if a == 0.0 || b == 0.0 || c == 0.0 {
        return Err(Error::Singularity(format!(
            "unsmoothed potential at q = ({}, {}) on the collision set",
            q[0], q[1]
        )));
    }
    let value = -0.5 * (a.ln() + b.ln() + c.ln());
    let grad = [
        -4.0 * q[0] * (1.0 / a + 1.0 / c),
        -4.0 * q[1] * (1.0 / b + 1.0 / c),
    ];
    Ok((value, grad))
}

/// Smoothed potential for any order, summed over the non-trivial group
/// elements: `-sum_g 1/2 log(|q - g q|^2 + e^2)`.
pub fn u_smoothed_orbit(q: [f64; 2], epsilon: f64, l: u32) -> Result<(f64, [f64; 2])> {
    let e2 = epsilon * epsilon;
    let mut value = 0.0;
    let mut grad = [0.0; 2];
    for g in group_elements(l).into_iter().skip(1) {
        // d = (I - g) q
        let m = [[1.0 - g[0][0], -g[0][1]], [-g[1][0], 1.0 - g[1][1]]];
        let d = [
            m[0][0] * q[0] + m[0][1] * q[1],
            m[1][0] * q[0] + m[1][1] * q[1],
        ];
        let n2 = d[0] * d[0] + d[1] * d[1] + e2;
        if n2 == 0.0 {
            return Err(Error::Singularity(format!(
                "unsmoothed potential at q = ({}, {}) on the collision set",
                q[0], q[1]
            )));
        }
        value -= 0.5 * n2.ln();
        // grad of 1/2 log n2 is (I - g)^T d / n2
        grad[0] -= (m[0][0] * d[0] + m[1][0] * d[1]) / n2;
        grad[1] -= (m[0][1] * d[0] + m[1][1] * d[1]) / n2;
    }
    Ok((value, grad))
}

/// The `2l` planar matrices of `D_l`: rotations first (identity at index 0),
/// then the reflections `z -> zeta^j conj(z)`.
pub fn group_elements(l: u32) -> Vec<[[f64; 2]; 2]> {
    // exact zeros at multiples of pi/2 keep axis reflections exact
    let snap = |x: f64| if x.abs() < 1e-15 { 0.0 } else { x };
    let mut out = Vec::with_capacity(2 * l as usize);
    for j in 0..l {
        let (s, c) = (2.0 * PI * j as f64 / l as f64).sin_cos();
        let (s, c) = (snap(s), snap(c));
        out.push([[c, -s], [s, c]]);
    }
    for j in 0..l {
        let (s, c) = (2.0 * PI * j as f64 / l as f64).sin_cos();
        let (s, c) = (snap(s), snap(c));
        out.push([[c, s], [s, -c]]);
    }
    out
}

/// Binary-collision walls of the Klein fundamental domain.
pub const KLEIN_WALLS: [f64; 2] = [0.0, FRAC_PI_2];

/// Homothetic ray angle of the Klein problem.
pub const KLEIN_CENTRAL: f64 = FRAC_PI_4;

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_6, FRAC_PI_8};

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + b.abs())
    }

    #[test]
    fn u_angular_at_central_configuration() {
        assert!(close(u_angular(FRAC_PI_4, 2).unwrap(), -(4f64.ln()), 1e-15));
        assert!(close(u_angular(FRAC_PI_6, 3).unwrap(), -(6f64.ln()), 1e-15));
        // negative for every l, despite the opposite claim for l >= 4
        let v = u_angular(FRAC_PI_8, 4).unwrap();
        assert!(close(v, -(8f64.ln()), 1e-15));
        assert!(v < 0.0);
    }

    #[test]
    fn u_angular_rejects_walls() {
        assert!(u_angular(0.0, 2).is_err());
        assert!(u_angular(FRAC_PI_2, 2).is_err());
        assert!(u_angular(PI / 3.0, 3).is_err());
    }

    #[test]
    fn u_cartesian_examples() {
        // -log(8 sqrt 2) = -(3 log 2 + log 2 / 2)
        let expected = -(3.5 * 2f64.ln());
        assert!(close(u_cartesian([1.0, 1.0], 2).unwrap(), expected, 1e-15));
        assert!(close(expected, -2.426_015_131_959_808_6, 1e-15));
        let (s, c) = FRAC_PI_4.sin_cos();
        assert!(close(u_cartesian([c, s], 2).unwrap(), -(4f64.ln()), 1e-14));
        let (s, c) = FRAC_PI_6.sin_cos();
        assert!(close(u_cartesian([c, s], 3).unwrap(), -(6f64.ln()), 1e-14));
        assert!(u_cartesian([1.0, 0.0], 2).is_err());
        assert!(u_cartesian([0.0, 0.0], 2).is_err());
    }

    #[test]
    fn klein_potential_closed_form() {
        for &q in &[[0.3f64, 0.7f64], [-1.2, 0.4], [2.0, -3.0]] {
            let closed = -(8.0 * q[0].hypot(q[1]) * (q[0] * q[1]).abs()).ln();
            assert!(close(u_cartesian(q, 2).unwrap(), closed, 1e-14));
        }
    }

    #[test]
    fn grad_u_shape_examples() {
        let g = grad_u_shape(FRAC_PI_4, 2).unwrap();
        let v = -1.5 * 2f64.sqrt();
        assert!(close(g[0], v, 1e-15) && close(g[1], v, 1e-15));
        let g = grad_u_shape(FRAC_PI_6, 2).unwrap();
        assert!(close(g[0], -2.020_725_942_163_690_7, 1e-14));
        assert!(close(g[1], -2.5, 1e-14));
        assert!(grad_u_shape(0.0, 2).is_err());
    }

    #[test]
    fn e_radial_examples() {
        assert_eq!(e_radial(0.0, 1.0, 2), 6.0);
        assert_eq!(e_radial(1.0, 1.0, 2), 8.0);
        for l in 2..6 {
            assert_eq!(e_radial(-3.0, 0.0, l), 2.0 * (2 * l - 1) as f64);
        }
    }

    #[test]
    fn e_hat_examples() {
        assert_eq!(e_hat(5.0, 0.0, 1.0, 2).unwrap(), 6.0);
        assert_eq!(e_hat(5.0, 0.0, 0.0, 2).unwrap(), 6.0);
        assert!(close(
            e_hat(0.0, 1.0, FRAC_PI_4, 2).unwrap(),
            3.227_411_277_760_219,
            1e-15
        ));
        assert!(e_hat(0.0, 1.0, 0.0, 2).is_err());
    }

    #[test]
    fn zero_velocity_radius_examples() {
        let rbar = zero_velocity_radius(0.0, FRAC_PI_4, 2).unwrap();
        assert!((rbar - 1.225_709_379_622_021_5).abs() < 1e-12);
        assert!(e_hat(0.0, rbar, FRAC_PI_4, 2).unwrap().abs() < 1e-13);
        for &a in &[0.1, 0.3, 0.6] {
            let x = zero_velocity_radius(0.7, a, 2).unwrap();
            let y = zero_velocity_radius(0.7, FRAC_PI_2 - a, 2).unwrap();
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_velocity_radius_grows_toward_the_walls() {
        // The angular term -2 r^2 log(4 sin 2 alpha) is positive near a wall,
        // which pushes the root outward until it leaves the scan range.
        let mut prev = zero_velocity_radius(0.0, FRAC_PI_4, 2).unwrap();
        for &a in &[0.5, 0.3, 0.1, 0.03, 0.01] {
            let r = zero_velocity_radius(0.0, a, 2).unwrap();
            assert!(r > prev, "alpha = {a}: {r} <= {prev}");
            prev = r;
        }
        assert!(zero_velocity_radius(0.0, 1e-12, 2).is_none());
    }

    #[test]
    fn g_bound_examples() {
        assert!(g_bound(0.5).is_none());
        let g = g_bound(10.0).unwrap();
        assert!((g * 8000.0 - 1.0).abs() < 0.05);
        let mut prev = f64::INFINITY;
        let mut r = 2.0;
        while r < 50.0 {
            if let Some(g) = g_bound(r) {
                assert!(g < prev);
                prev = g;
            }
            r += 0.25;
        }
    }

    #[test]
    fn g_bound_hits_quarter_pi_where_the_argument_is_one() {
        // exp(E0 / 2r^2) = 4 <=> 3/r^2 - 3 log r = log 4
        let f = |r: f64| 3.0 / (r * r) - 3.0 * r.ln() - 4f64.ln();
        let r = bisect(f, 1.0, 3.0, f(1.0));
        assert!((g_bound(r * (1.0 + 1e-14)).unwrap() - FRAC_PI_4).abs() < 1e-6);
    }

    #[test]
    fn central_configuration_values() {
        assert_eq!(central_configuration(2), (FRAC_PI_4, 4.0));
        let (a, d2) = central_configuration(3);
        assert!(close(a, FRAC_PI_6, 1e-15) && d2 == 9.0);
    }

    #[test]
    fn m_slope_examples() {
        assert!(close(m_slope(FRAC_PI_4), 1.0, 1e-15));
        assert!(close(m_slope(FRAC_PI_6), 5.0 * 3f64.sqrt() / 7.0, 1e-15));
        for &a in &[0.1, 0.4, 1.2] {
            assert!(close(m_slope(a) * m_slope(FRAC_PI_2 - a), 1.0, 1e-14));
        }
        assert!(m_slope(0.0).is_infinite());
    }

    #[test]
    fn smoothed_potential_regular_on_axes() {
        let (v, g) = u_smoothed([0.0, 0.7], 1e-3).unwrap();
        assert!(v.is_finite() && g[0].is_finite() && g[1].is_finite());
        assert!(u_smoothed([0.0, 0.7], 0.0).is_err());
    }

    #[test]
    fn smoothed_potential_matches_group_sum() {
        for &q in &[[0.3, 0.7], [1.0, 1.0], [0.0, 0.2], [-0.4, 1.3]] {
            let (a, ga) = u_smoothed(q, 1e-2).unwrap();
            let (b, gb) = u_smoothed_orbit(q, 1e-2, 2).unwrap();
            assert!(close(a, b, 1e-14));
            assert!(close(ga[0], gb[0], 1e-13) && close(ga[1], gb[1], 1e-13));
        }
    }

    #[test]
    fn group_sum_is_the_dihedral_potential() {
        for l in 2..7 {
            for &q in &[[0.3, 0.1], [1.5, 0.2], [0.05, 0.01]] {
                let (v, g) = u_smoothed_orbit(q, 0.0, l).unwrap();
                assert!(close(v, u_cartesian(q, l).unwrap(), 1e-12), "l = {l}");
                let ge = grad_u_cartesian(q, l).unwrap();
                assert!(close(g[0], ge[0], 1e-10) && close(g[1], ge[1], 1e-10));
            }
        }
    }

    #[test]
    fn folding() {
        let w = FRAC_PI_2;
        assert!(close(fold_angle(0.3, 2), 0.3, 1e-15));
        assert!(close(fold_angle(-0.3, 2), 0.3, 1e-15));
        assert!(close(fold_angle(w + 0.3, 2), w - 0.3, 1e-15));
        assert!(close(fold_angle(PI + 0.3, 2), 0.3, 1e-15));
        assert!(close(fold_angle(PI / 3.0 + 0.1, 3), PI / 3.0 - 0.1, 1e-14));
        // reflection across the q1 axis mirrors the momentum angle
        let (a, p) = fold_state(-0.2, -1.4, 2);
        assert!(close(a, 0.2, 1e-15) && close(p, 1.4, 1e-15));
        // at the wall the mirror of psi = -pi/2 is psi + pi
        let (_, p) = fold_state(-1e-9, -FRAC_PI_2, 2);
        assert!(close(p, FRAC_PI_2, 1e-15));
        // reflection across the q2 axis: theta -> pi - theta
        let (a, p) = fold_state(w + 0.1, 3.0, 2);
        assert!(close(a, w - 0.1, 1e-15) && close(p, PI - 3.0, 1e-15));
    }
}
