//! Vector fields of the problem.
//!
//! McGehee fields use the rescaled time `zeta`; the Cartesian field uses the
//! physical time `sigma`. They are related by
//! `d sigma = r^2 exp(-1/r^2) sqrt(Ehat) d zeta`.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
use std::sync::OnceLock;

use serde::Serialize;

use crate::error::{domain, Error, Result};
use crate::model::{e_hat, fold_angle, gamma_sq, grad_u_shape, McGeheeState, ModelParams};
use crate::transforms::smoothed_potential;

/// McGehee fields refuse evaluation this close to a binary-collision wall.
pub const WALL_EXCLUSION: f64 = 1e-9;

/// Admissible `|Ehat|` on the zero-velocity manifold.
pub const ZERO_VELOCITY_TOL: f64 = 1e-8;

/// `|cos(psi - alpha)|` below which `r` is not a usable time.
pub const TURNING_POINT_TOL: f64 = 1e-6;

/// `sqrt(l / 2pi)`, the speed factor of the McGehee fields.
pub fn speed(l: u32) -> f64 {
    (1.0 / gamma_sq(l)).sqrt()
}

fn k_klein() -> f64 {
    1.0 / PI.sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FieldKind {
    McgeheeGeneral,
    McgeheeKlein,
    CollisionManifold,
    ZeroVelocityManifold,
    CartesianSmoothed,
    LinearizedHeterocline,
    HomotheticRadial { mu: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VectorFieldSpec {
    pub kind: FieldKind,
    pub params: ModelParams,
}

impl VectorFieldSpec {
    pub fn new(kind: FieldKind, params: ModelParams) -> Self {
        Self { kind, params }
    }

    pub fn dim(&self) -> usize {
        match self.kind {
            FieldKind::CollisionManifold | FieldKind::HomotheticRadial { .. } => 2,
            FieldKind::CartesianSmoothed => 4,
            _ => 3,
        }
    }

    pub fn eval(&self, y: &[f64], dy: &mut [f64]) -> Result<()> {
        let p = &self.params;
        match self.kind {
            FieldKind::McgeheeGeneral => {
                dy.copy_from_slice(&vf_mcgehee_general(McGeheeState::from_slice(y), p)?)
            }
            FieldKind::McgeheeKlein => {
                dy.copy_from_slice(&vf_mcgehee_klein(McGeheeState::from_slice(y), p.h)?)
            }
            FieldKind::CollisionManifold => dy.copy_from_slice(&vf_collision_manifold(y[0], y[1])),
            FieldKind::ZeroVelocityManifold => {
                dy.copy_from_slice(&vf_zero_velocity(McGeheeState::from_slice(y), p.h)?)
            }
            FieldKind::CartesianSmoothed => {
                dy.copy_from_slice(&vf_cartesian_smoothed([y[0], y[1]], [y[2], y[3]], p)?)
            }
            FieldKind::LinearizedHeterocline => {
                dy.copy_from_slice(&vf_linearized_heterocline(y[0], y[1], y[2], p.h))
            }
            FieldKind::HomotheticRadial { mu } => {
                dy.copy_from_slice(&homothetic_radial(y[0], y[1], mu)?)
            }
        }
        Ok(())
    }
}

fn check_wall(alpha: f64, l: u32) -> Result<()> {
    let w = PI / l as f64;
    let a = fold_angle(alpha, l);
    if a < WALL_EXCLUSION || a > w - WALL_EXCLUSION {
        return Err(domain(format!(
            "shape angle {alpha} is within {WALL_EXCLUSION:e} of a binary-collision wall"
        )));
    }
    Ok(())
}

/// McGehee field for any dihedral order. Accepts unfolded angles.
pub fn vf_mcgehee_general(s: McGeheeState, p: &ModelParams) -> Result<[f64; 3]> {
    let k = speed(p.l);
    if s.r == 0.0 {
        let ehat = 2.0 * (2 * p.l - 1) as f64;
        return Ok([0.0, k * ehat * (s.psi - s.alpha).sin(), 0.0]);
    }
    check_wall(s.alpha, p.l)?;
    let ehat = e_hat(p.h, s.r, s.alpha, p.l)?;
    let g = grad_u_shape(s.alpha, p.l)?;
    let (sp, cp) = s.psi.sin_cos();
    let d = s.psi - s.alpha;
    let r2 = s.r * s.r;
    Ok([
        k * s.r * r2 / (r2 + 2.0) * ehat * d.cos(),
        k * ehat * d.sin(),
        k * r2 * (g[1] * cp - g[0] * sp),
    ])
}

/// `2 cos(psi + alpha) / sin(2 alpha) - sin(psi - alpha)`, with the cosine
/// written as `-sin(psi + alpha - pi/2)` so that it vanishes exactly on the
/// homothetic ray `alpha = psi = pi/4`.
fn klein_bracket(alpha: f64, psi: f64) -> f64 {
    -2.0 * (psi + alpha - FRAC_PI_2).sin() / (2.0 * alpha).sin() - (psi - alpha).sin()
}

/// McGehee field of the Klein (`l = 2`) problem. Accepts unfolded angles.
pub fn vf_mcgehee_klein(s: McGeheeState, h: f64) -> Result<[f64; 3]> {
    let k = k_klein();
    if s.r == 0.0 {
        return Ok([0.0, 6.0 * k * (s.psi - s.alpha).sin(), 0.0]);
    }
    check_wall(s.alpha, 2)?;
    let ehat = e_hat(h, s.r, s.alpha, 2)?;
    let d = s.psi - s.alpha;
    let r2 = s.r * s.r;
    Ok([
        k * s.r * r2 / (r2 + 2.0) * ehat * d.cos(),
        k * ehat * d.sin(),
        -k * r2 * klein_bracket(s.alpha, s.psi),
    ])
}

/// Restriction of the Klein field to the total-collision manifold `r = 0`.
pub fn vf_collision_manifold(alpha: f64, psi: f64) -> [f64; 2] {
    [6.0 * k_klein() * (psi - alpha).sin(), 0.0]
}

/// Exact solution of the collision-manifold flow through `(alpha0, psi0)`.
/// For `sin(psi0 - alpha0) = 0` the point is at rest.
pub fn collision_manifold_closed_form(alpha0: f64, psi0: f64, zeta: f64) -> f64 {
    let c = 6.0 * k_klein();
    let d0 = psi0 - alpha0;
    let u0 = d0 - 2.0 * PI * (d0 / (2.0 * PI)).round();
    if u0.abs() >= PI {
        return alpha0;
    }
    let offset = d0 - u0;
    psi0 - offset - 2.0 * ((0.5 * u0).tan() * (-c * zeta).exp()).atan()
}

/// Flow on the zero-velocity manifold `Ehat = 0`: only `psi` moves.
pub fn vf_zero_velocity(s: McGeheeState, h: f64) -> Result<[f64; 3]> {
    check_wall(s.alpha, 2)?;
    let ehat = e_hat(h, s.r, s.alpha, 2)?;
    if ehat.abs() > ZERO_VELOCITY_TOL {
        return Err(domain(format!(
            "state is not on the zero-velocity manifold: Ehat = {ehat:e}"
        )));
    }
    Ok([
        0.0,
        0.0,
        -k_klein() * s.r * s.r * klein_bracket(s.alpha, s.psi),
    ])
}

/// Newton's equations `q' = p / Gamma^2`, `p' = grad U_eps(q)` in physical
/// time.
pub fn vf_cartesian_smoothed(q: [f64; 2], p: [f64; 2], params: &ModelParams) -> Result<[f64; 4]> {
    let (_, g) = smoothed_potential(q, params.epsilon, params.l)?;
    let inv = 1.0 / gamma_sq(params.l);
    Ok([inv * p[0], inv * p[1], g[0], g[1]])
}

/// Linearization about the homothetic ray in the transverse variables
/// `(beta, phi)`.
pub fn vf_linearized_heterocline(r: f64, beta: f64, phi: f64, h: f64) -> [f64; 3] {
    let ehat = heterocline_ehat(h, r);
    let r2 = r * r;
    [
        -ehat * r * r2 / (r2 + 2.0),
        -ehat * phi,
        -r2 * (3.0 * phi + 4.0 * beta),
    ]
}

/// `Ehat(h, r, pi/4)`.
pub fn heterocline_ehat(h: f64, r: f64) -> f64 {
    e_hat(h, r, FRAC_PI_4, 2).expect("pi/4 is interior")
}

/// Frozen-`r` eigenstructure of the transverse block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HeteroclineEigen {
    /// Contracting eigenvalue `-r(S + 3r)/2`, `S = sqrt(16 Ehat + 9 r^2)`.
    pub lambda1: f64,
    /// `r(S - 3r)/2`.
    pub lambda2: f64,
    /// Eigenvector of `lambda1` in `(r, beta, phi)` coordinates.
    pub contracting: [f64; 3],
}

pub fn linearized_heterocline_eigen(r: f64, h: f64) -> HeteroclineEigen {
    let ehat = heterocline_ehat(h, r);
    let s = (16.0 * ehat + 9.0 * r * r).sqrt();
    HeteroclineEigen {
        lambda1: -r * (s + 3.0 * r) / 2.0,
        lambda2: r * (s - 3.0 * r) / 2.0,
        contracting: [0.0, 2.0 * ehat, r * (s + 3.0 * r)],
    }
}

/// Radial equation `rho'' = mu / rho` of a homothetic orbit.
pub fn homothetic_radial(rho: f64, rho_dot: f64, mu: f64) -> Result<[f64; 2]> {
    if rho == 0.0 {
        return Err(Error::Singularity("homothetic radius rho = 0".into()));
    }
    Ok([rho_dot, mu / rho])
}

/// `1/2 rho'^2 - mu log rho`, conserved by [`homothetic_radial`].
pub fn homothetic_energy(rho: f64, rho_dot: f64, mu: f64) -> f64 {
    0.5 * rho_dot * rho_dot - mu * rho.ln()
}

/// Sign in front of `dalpha/dr = +-((r^2+2)/r^3) tan(psi - alpha)`, chosen
/// once by comparing both candidates with the ratio of Klein field components.
pub fn time_eliminated_sign() -> f64 {
    static SIGN: OnceLock<f64> = OnceLock::new();
    *SIGN.get_or_init(|| {
        let (r, alpha, psi, h) = (0.7, 0.5, 0.9, 0.0);
        let f = vf_mcgehee_klein(McGeheeState::new(r, alpha, psi), h).expect("interior point");
        let ratio = f[1] / f[0];
        let base = (r * r + 2.0) / (r * r * r) * (psi - alpha).tan();
        if (ratio - base).abs() <= (ratio + base).abs() {
            1.0
        } else {
            -1.0
        }
    })
}

/// Orbit equations with `r` as the independent variable:
/// `(dalpha/dr, dpsi/dr)`.
pub fn vf_time_eliminated(alpha: f64, psi: f64, r: f64, h: f64) -> Result<[f64; 2]> {
    if !(r > 0.0) {
        return Err(domain(format!("r = {r} must be positive")));
    }
    check_wall(alpha, 2)?;
    let d = psi - alpha;
    let c = d.cos();
    if c.abs() < TURNING_POINT_TOL {
        return Err(Error::TurningPoint { cos: c });
    }
    let ehat = e_hat(h, r, alpha, 2)?;
    if !(ehat > 0.0) {
        return Err(domain(format!("Ehat = {ehat:e} must be positive")));
    }
    let r2 = r * r;
    let dalpha = time_eliminated_sign() * (r2 + 2.0) / (r2 * r) * d.tan();
    let dpsi = -(r2 + 2.0) / (r * ehat) * klein_bracket(alpha, psi) / c;
    Ok([dalpha, dpsi])
}

/// `d sigma / d zeta = r^2 exp(-1/r^2) sqrt(Ehat)`.
pub fn dsigma_dzeta(r: f64, ehat: f64) -> f64 {
    r * r * (-1.0 / (r * r)).exp() * ehat.max(0.0).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_8;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + b.abs())
    }

    #[test]
    fn klein_field_examples() {
        let f = vf_mcgehee_klein(McGeheeState::new(1.0, FRAC_PI_4, FRAC_PI_4), 0.0).unwrap();
        assert!(close(f[0], 0.606_957_274_912_289_9, 1e-14));
        assert_eq!((f[1], f[2]), (0.0, 0.0));

        let f = vf_mcgehee_klein(McGeheeState::new(0.0, 0.3, 1.2), 4.0).unwrap();
        assert_eq!(f[0], 0.0);
        assert_eq!(f[2], 0.0);
        assert!(close(f[1], 6.0 / PI.sqrt() * 0.9f64.sin(), 1e-15));

        assert!(vf_mcgehee_klein(McGeheeState::new(1.0, 0.0, 0.3), 0.0).is_err());
        assert!(vf_mcgehee_klein(McGeheeState::new(1.0, FRAC_PI_2, 0.3), 0.0).is_err());
    }

    #[test]
    fn klein_bracket_matches_printed_form() {
        for &(a, p) in &[(0.3f64, 1.0f64), (1.2, -2.0), (0.7, 4.0)] {
            let printed = 2.0 * (p + a).cos() / (2.0 * a).sin() - (p - a).sin();
            assert!(close(klein_bracket(a, p), printed, 1e-13));
        }
    }

    #[test]
    fn general_field_reduces_to_klein() {
        let params = ModelParams::klein(0.3);
        for i in 1..20 {
            for j in 0..20 {
                let s = McGeheeState::new(0.1 * i as f64, 0.075 * i as f64, 0.33 * j as f64);
                let a = vf_mcgehee_general(s, &params).unwrap();
                let b = vf_mcgehee_klein(s, 0.3).unwrap();
                for k in 0..3 {
                    assert!(close(a[k], b[k], 1e-12), "{s:?}");
                }
            }
        }
    }

    #[test]
    fn general_field_on_the_collision_manifold() {
        for l in 2..6 {
            let p = ModelParams::new(l, -1.0, 0.0).unwrap();
            let f = vf_mcgehee_general(McGeheeState::new(0.0, 0.2, 1.0), &p).unwrap();
            let expected = speed(l) * 2.0 * (2 * l - 1) as f64 * 0.8f64.sin();
            assert_eq!((f[0], f[2]), (0.0, 0.0));
            assert!(close(f[1], expected, 1e-15));
            // homothetic ray
            let a = PI / (2.0 * l as f64);
            let f = vf_mcgehee_general(McGeheeState::new(0.5, a, a), &p).unwrap();
            assert!(f[1].abs() < 1e-15 && f[2].abs() < 1e-14);
        }
    }

    #[test]
    fn collision_manifold_examples() {
        assert_eq!(vf_collision_manifold(0.4, 0.4), [0.0, 0.0]);
        assert!(vf_collision_manifold(0.4, 0.4 + PI)[0].abs() < 1e-14);
        assert!(close(
            vf_collision_manifold(0.0, FRAC_PI_2)[0],
            6.0 / PI.sqrt(),
            1e-15
        ));
    }

    #[test]
    fn closed_form_limits() {
        for &(a0, p0) in &[(0.0, FRAC_PI_2), (1.0, 0.2), (0.3, 5.0), (-2.0, 2.0)] {
            assert!(close(
                collision_manifold_closed_form(a0, p0, 0.0),
                a0,
                1e-15
            ));
            // the unfolded limit is the nearest copy of psi0
            let lim = collision_manifold_closed_form(a0, p0, 40.0);
            let turns = (lim - p0) / (2.0 * PI);
            assert!((turns - turns.round()).abs() < 1e-14);
            assert!((lim - a0).abs() < PI);
            // derivative check
            let h = 1e-6;
            let z = 0.2;
            let num = (collision_manifold_closed_form(a0, p0, z + h)
                - collision_manifold_closed_form(a0, p0, z - h))
                / (2.0 * h);
            let a = collision_manifold_closed_form(a0, p0, z);
            assert!(close(num, vf_collision_manifold(a, p0)[0], 1e-8));
        }
    }

    #[test]
    fn zero_velocity_field() {
        let rbar = crate::model::zero_velocity_radius(0.0, 0.5, 2).unwrap();
        let psi3 = crate::model::p3_psi(0.5);
        for psi in [psi3, psi3 + PI] {
            let f = vf_zero_velocity(McGeheeState::new(rbar, 0.5, psi), 0.0).unwrap();
            assert_eq!(&f[..2], &[0.0, 0.0]);
            assert!(f[2].abs() < 1e-14);
        }
        assert!(vf_zero_velocity(McGeheeState::new(1.0, 0.5, 0.0), 0.0).is_err());
    }

    #[test]
    fn cartesian_force_is_the_potential_gradient() {
        let params = ModelParams::new(2, 0.0, 1e-3).unwrap();
        let q = [0.4, -0.9];
        let f = vf_cartesian_smoothed(q, [1.0, 2.0], &params).unwrap();
        assert!(close(f[0], 1.0 / PI, 1e-15));
        let h = 1e-6;
        let u = |x: [f64; 2]| smoothed_potential(x, 1e-3, 2).unwrap().0;
        let d1 = (u([q[0] + h, q[1]]) - u([q[0] - h, q[1]])) / (2.0 * h);
        let d2 = (u([q[0], q[1] + h]) - u([q[0], q[1] - h])) / (2.0 * h);
        assert!(close(f[2], d1, 1e-7) && close(f[3], d2, 1e-7));
    }

    #[test]
    fn cartesian_central_force() {
        let params = ModelParams::new(2, 0.0, 0.0).unwrap();
        let f = vf_cartesian_smoothed([0.3, 0.3], [1.0, 1.0], &params).unwrap();
        assert!((f[2] - f[3]).abs() < 1e-14);
        assert!(vf_cartesian_smoothed([0.0, 0.3], [1.0, 1.0], &params).is_err());
    }

    #[test]
    fn linearized_heterocline() {
        let f = vf_linearized_heterocline(0.5, 0.0, 0.0, 0.0);
        assert_eq!((f[1], f[2]), (0.0, 0.0));
        for &(r, h) in &[(0.3, 0.0), (0.9, -1.0), (1.1, 0.5)] {
            let e = linearized_heterocline_eigen(r, h);
            let ehat = heterocline_ehat(h, r);
            assert!(close(e.lambda1 * e.lambda2, -4.0 * ehat * r * r, 1e-12));
            // J v = lambda1 v on the (beta, phi) block
            let v = e.contracting;
            let jv = [-ehat * v[2], -r * r * (3.0 * v[2] + 4.0 * v[1])];
            assert!(close(jv[0], e.lambda1 * v[1], 1e-12));
            assert!(close(jv[1], e.lambda1 * v[2], 1e-12));
        }
    }

    #[test]
    fn homothetic() {
        assert_eq!(homothetic_radial(2.0, 0.5, 3.0).unwrap(), [0.5, 1.5]);
        assert!(homothetic_radial(0.0, 0.5, 3.0).is_err());
    }

    #[test]
    fn time_eliminated_matches_field_ratio() {
        assert_eq!(time_eliminated_sign(), 1.0);
        for &(r, a, p, h) in &[
            (0.5, 0.3, 0.6, 0.0),
            (1.0, 1.1, 0.2, -1.0),
            (0.2, 0.7, 3.5, 1.0),
        ] {
            let f = vf_mcgehee_klein(McGeheeState::new(r, a, p), h).unwrap();
            let g = vf_time_eliminated(a, p, r, h).unwrap();
            assert!(close(g[0], f[1] / f[0], 1e-10));
            assert!(close(g[1], f[2] / f[0], 1e-10));
        }
        let t = vf_time_eliminated(0.4, 0.4, 0.8, 0.0).unwrap();
        assert_eq!(t[0], 0.0);
        assert!(matches!(
            vf_time_eliminated(0.3, 0.3 + FRAC_PI_2, 0.8, 0.0),
            Err(Error::TurningPoint { .. })
        ));
        assert!(vf_time_eliminated(FRAC_PI_8, FRAC_PI_8, 0.8, 0.0).is_ok());
    }
}
