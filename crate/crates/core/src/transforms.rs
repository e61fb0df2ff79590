//! Maps between Cartesian phase space and McGehee coordinates, and the full
//! `2l`-vortex configuration generated by the representative vortex.

use serde::Serialize;

use crate::error::{domain, Result};
use crate::model::{
    e_hat, gamma_sq, group_elements, u_angular, u_cartesian, u_smoothed, u_smoothed_orbit,
    CartesianState, McGeheeState, ModelParams, KLEIN,
};

/// Tolerated negative excursion of `Ehat` before a state counts as off-shell.
pub const SHELL_TOL: f64 = 1e-10;

const LOG_DOMAIN_BELOW: f64 = 1e-8;

/// `phi1(r) = r exp(-1/r^2)`, the radial blow-up map.
pub fn phi1(r: f64) -> f64 {
    if r <= 0.0 {
        0.0
    } else {
        r * (-1.0 / (r * r)).exp()
    }
}

/// `log phi1(r)`, finite even where `phi1` underflows.
pub fn log_phi1(r: f64) -> f64 {
    r.ln() - 1.0 / (r * r)
}

/// Inverse of [`phi1`]: the unique `r >= 0` with `r exp(-1/r^2) = rho`.
pub fn solve_r_from_radius(rho: f64) -> f64 {
    if !(rho > 0.0) {
        return 0.0;
    }
    if rho < LOG_DOMAIN_BELOW {
        return solve_r_from_log_radius(rho.ln());
    }
    // phi1(r) < r, so rho is a lower bracket
    let mut lo = rho;
    let mut hi = rho + 2.0;
    while phi1(hi) < rho {
        lo = hi;
        hi *= 2.0;
    }
    let mut r = 0.5 * (lo + hi);
    for _ in 0..100 {
        let f = phi1(r) - rho;
        if f == 0.0 {
            return r;
        }
        if f < 0.0 {
            lo = r;
        } else {
            hi = r;
        }
        let df = (-1.0 / (r * r)).exp() * (1.0 + 2.0 / (r * r));
        let newton = r - f / df;
        let next = if newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (next - r).abs() <= 1e-16 * r {
            return next;
        }
        r = next;
    }
    r
}

/// Inverse of [`log_phi1`]; handles radii far below the smallest positive
/// double.
pub fn solve_r_from_log_radius(log_rho: f64) -> f64 {
    if log_rho == f64::NEG_INFINITY {
        return 0.0;
    }
    let mut lo = 0.0_f64;
    let mut hi = 1.0_f64;
    while log_phi1(hi) < log_rho {
        lo = hi;
        hi *= 2.0;
    }
    // log_phi1 is increasing and concave: Newton iterates approach the root
    // from below, bisection keeps them bracketed.
    let mut r = if log_rho < -1.0 {
        (1.0 / -log_rho).sqrt().clamp(lo, hi)
    } else {
        0.5 * (lo + hi)
    };
    for _ in 0..100 {
        let f = log_phi1(r) - log_rho;
        if f == 0.0 {
            return r;
        }
        if f < 0.0 {
            lo = r;
        } else {
            hi = r;
        }
        let df = 1.0 / r + 2.0 / (r * r * r);
        let newton = r - f / df;
        let next = if newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (next - r).abs() <= 4.0 * f64::EPSILON * r {
            return next;
        }
        r = next;
    }
    r
}

/// Momentum modulus on the energy shell: `sqrt(Ehat * 2pi/l) / r`.
pub fn momentum_norm(ehat: f64, r: f64, l: u32) -> f64 {
    (ehat.max(0.0) * gamma_sq(l)).sqrt() / r
}

/// `Ehat` recovered from the momentum modulus, `l r^2 |p|^2 / 2pi`.
pub fn ehat_from_momentum(p_norm: f64, r: f64, l: u32) -> f64 {
    r * r * p_norm * p_norm / gamma_sq(l)
}

pub fn cartesian_from_mcgehee(s: McGeheeState, h: f64, l: u32) -> Result<CartesianState> {
    if !(s.r > 0.0) {
        return Err(domain(format!("r = {} has no Cartesian image", s.r)));
    }
    let ehat = e_hat(h, s.r, s.alpha, l)?;
    if ehat < -SHELL_TOL {
        return Err(domain(format!(
            "state ({}, {}, {}) is off the energy shell h = {h}: Ehat = {ehat:e}",
            s.r, s.alpha, s.psi
        )));
    }
    let rho = phi1(s.r);
    let pn = momentum_norm(ehat, s.r, l);
    let (sa, ca) = s.alpha.sin_cos();
    let (sp, cp) = s.psi.sin_cos();
    Ok(CartesianState::new(
        [rho * ca, rho * sa],
        [pn * cp, pn * sp],
    ))
}

/// Classical Hamiltonian `(l/4pi)|p|^2 - U(q)`.
pub fn hamiltonian(c: &CartesianState, l: u32) -> Result<f64> {
    Ok(kinetic(c.p, l) - u_cartesian(c.q, l)?)
}

/// Smoothed Hamiltonian `H_eps`; equals [`hamiltonian`] when `epsilon = 0`.
pub fn hamiltonian_smoothed(c: &CartesianState, params: &ModelParams) -> Result<f64> {
    let (u, _) = smoothed_potential(c.q, params.epsilon, params.l)?;
    Ok(kinetic(c.p, params.l) - u)
}

pub(crate) fn smoothed_potential(q: [f64; 2], epsilon: f64, l: u32) -> Result<(f64, [f64; 2])> {
    if l == KLEIN {
        u_smoothed(q, epsilon)
    } else {
        u_smoothed_orbit(q, epsilon, l)
    }
}

fn kinetic(p: [f64; 2], l: u32) -> f64 {
    0.5 * (p[0] * p[0] + p[1] * p[1]) / gamma_sq(l)
}

/// Returns the McGehee state and the energy level `h` of `c`.
pub fn mcgehee_from_cartesian(c: &CartesianState, l: u32) -> Result<(McGeheeState, f64)> {
    let rho = c.q[0].hypot(c.q[1]);
    if rho == 0.0 {
        return Err(domain(
            "q = 0 (total collapse) has no McGehee preimage with r > 0",
        ));
    }
    let r = solve_r_from_radius(rho);
    let alpha = c.q[1].atan2(c.q[0]);
    let psi = c.p[1].atan2(c.p[0]);
    let h = hamiltonian(c, l)?;
    Ok((McGeheeState::new(r, alpha, psi), h))
}

/// Energy level of a state given in scaled Cartesian form: position `q / L`
/// with `log L = log_scale`, momentum unscaled.
pub fn hamiltonian_scaled(q: [f64; 2], p: [f64; 2], log_scale: f64, l: u32) -> Result<f64> {
    let rho = q[0].hypot(q[1]);
    let alpha = q[1].atan2(q[0]);
    let u = u_angular(alpha, l)? - (2 * l - 1) as f64 * (log_scale + rho.ln());
    Ok(kinetic(p, l) - u)
}

/// All `2l` vortices generated by the representative one.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FullConfiguration {
    pub l: u32,
    pub positions: Vec<[f64; 2]>,
    pub momenta: Vec<[f64; 2]>,
}

pub fn full_configuration(c: &CartesianState, l: u32) -> FullConfiguration {
    let apply = |g: &[[f64; 2]; 2], v: [f64; 2]| {
        [
            g[0][0] * v[0] + g[0][1] * v[1],
            g[1][0] * v[0] + g[1][1] * v[1],
        ]
    };
    let group = group_elements(l);
    FullConfiguration {
        l,
        positions: group.iter().map(|g| apply(g, c.q)).collect(),
        momenta: group.iter().map(|g| apply(g, c.p)).collect(),
    }
}

/// `sum_j Gamma_j^{-1} (q_j x p_j)`.
pub fn angular_momentum(f: &FullConfiguration) -> f64 {
    let inv_gamma = 1.0 / gamma_sq(f.l);
    f.positions
        .iter()
        .zip(&f.momenta)
        .map(|(q, p)| inv_gamma * (q[0] * p[1] - q[1] * p[0]))
        .sum()
}

/// Circulation-weighted mean position.
pub fn center_of_vorticity(f: &FullConfiguration) -> [f64; 2] {
    let w = gamma_sq(f.l);
    let total = w * f.positions.len() as f64;
    let mut c = [0.0; 2];
    for q in &f.positions {
        c[0] += w * q[0];
        c[1] += w * q[1];
    }
    [c[0] / total, c[1] / total]
}
