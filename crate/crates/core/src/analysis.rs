//! Rest points of the Klein field and their spectra, the homothetic
//! heteroclinics, and sampling probes of the global dynamics.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{speed, vf_mcgehee_klein, FieldKind, VectorFieldSpec};
use crate::error::{Error, Result};
use crate::integrate::ode::{self, first_crossing, Control, System};
use crate::integrate::{
    integrate_generalized, GeneralizedSolution, IntegratorConfig, Terminal, COLLAPSE_FUNNEL,
    COLLAPSE_RADIUS,
};
use crate::model::{
    e_hat, fold_state, p3_psi, zero_velocity_radius, McGeheeState, ModelParams, Sample,
    TimeVariable, Trajectory, KLEIN,
};

/// Eigenvalues below this modulus count as zero.
pub const ZERO_EIGENVALUE: f64 = 1e-5;

/// Lower end of the radius range of random initial conditions.
pub const PROBE_R_MIN: f64 = 0.25;

/// Number of shape angles scanned for the outer zero-velocity radius.
pub const OUTER_RADIUS_SAMPLES: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RestCurve {
    P1,
    P2,
    P3,
    P4,
}

impl RestCurve {
    pub const ALL: [RestCurve; 4] = [RestCurve::P1, RestCurve::P2, RestCurve::P3, RestCurve::P4];

    /// Dimensions of the stable, unstable and center manifolds.
    pub fn table_dims(self) -> ManifoldDims {
        let (stable, unstable, center) = match self {
            RestCurve::P1 => (1, 0, 2),
            RestCurve::P2 => (0, 1, 2),
            RestCurve::P3 | RestCurve::P4 => (1, 1, 1),
        };
        ManifoldDims {
            stable,
            unstable,
            center,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ManifoldDims {
    pub stable: usize,
    pub unstable: usize,
    pub center: usize,
}

impl ManifoldDims {
    /// Counts eigenvalues by the sign of their real part.
    pub fn from_spectrum(spectrum: &[Complex64]) -> Self {
        let mut d = ManifoldDims {
            stable: 0,
            unstable: 0,
            center: 0,
        };
        for z in spectrum {
            if z.re < -ZERO_EIGENVALUE {
                d.stable += 1;
            } else if z.re > ZERO_EIGENVALUE {
                d.unstable += 1;
            } else {
                d.center += 1;
            }
        }
        d
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RestPoint {
    pub curve: RestCurve,
    pub state: McGeheeState,
    pub spectrum_analytic: [Complex64; 3],
    /// NaN when the Jacobian could not be evaluated.
    pub spectrum_numeric: [Complex64; 3],
    pub manifold_dims: ManifoldDims,
}

impl RestPoint {
    pub fn new(curve: RestCurve, state: McGeheeState, h: f64) -> Self {
        let field = VectorFieldSpec::new(FieldKind::McgeheeKlein, ModelParams::klein(h));
        let spectrum_numeric = jacobian_numeric(&field, &state.to_array())
            .map(|j| eigenvalues(&j))
            .unwrap_or([Complex64::new(f64::NAN, f64::NAN); 3]);
        RestPoint {
            curve,
            state,
            spectrum_analytic: spectrum_analytic(curve, state, h),
            spectrum_numeric,
            manifold_dims: curve.table_dims(),
        }
    }

    /// Largest mismatch between the analytic and numerical spectra under the
    /// best pairing.
    pub fn spectrum_mismatch(&self) -> f64 {
        spectrum_distance(&self.spectrum_analytic, &self.spectrum_numeric)
    }
}

/// Midpoints of `n` equal cells of `(0, pi/2)`, with the one nearest to
/// `pi/4` replaced by `pi/4`.
pub fn sample_alphas(n: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n)
        .map(|i| (i as f64 + 0.5) * FRAC_PI_2 / n as f64)
        .collect();
    if let Some(k) = (0..n).min_by(|&a, &b| {
        (v[a] - FRAC_PI_4)
            .abs()
            .total_cmp(&(v[b] - FRAC_PI_4).abs())
    }) {
        v[k] = FRAC_PI_4;
    }
    v
}

/// Samples of the four rest-point curves at energy `h`. `P3`/`P4` are
/// omitted where the zero-velocity radius does not exist.
pub fn rest_point_curves(h: f64, n_samples: usize) -> Vec<RestPoint> {
    sample_alphas(n_samples)
        .par_iter()
        .flat_map_iter(|&a| {
            let mut v = vec![
                RestPoint::new(RestCurve::P1, McGeheeState::new(0.0, a, a), h),
                RestPoint::new(RestCurve::P2, McGeheeState::new(0.0, a, a + PI), h),
            ];
            if let Some(rbar) = zero_velocity_radius(h, a, KLEIN) {
                let psi = p3_psi(a);
                v.push(RestPoint::new(
                    RestCurve::P3,
                    McGeheeState::new(rbar, a, psi),
                    h,
                ));
                v.push(RestPoint::new(
                    RestCurve::P4,
                    McGeheeState::new(rbar, a, psi + PI),
                    h,
                ));
            }
            v
        })
        .collect()
}

/// The `mu2`, `mu3` eigenvalues at a point of `P3`.
fn p3_mu(s: McGeheeState, h: f64) -> (f64, f64) {
    let (r, a, p) = (s.r, s.alpha, s.psi);
    let r2 = r * r;
    let sq = PI.sqrt();
    let e6 = (6.0 / r2 + 2.0 * h).exp();
    let e3 = (3.0 / r2 + h).exp();
    let mu2 = -2.0
        * r2
        * (3.0 * (p - a).cos() * e6 + 64.0 * (2.0 * a).cos() * (p + a).cos() * r2 * r2 * r2)
        / (e6 * sq);
    let mu3 = r2 * ((p - a).cos() * e3 + 8.0 * (p + a).sin() * r2 * r) / (e3 * sq);
    (mu2, mu3)
}

/// Closed-form spectrum of a rest point. On `P4` the `P3` formulas are
/// evaluated at the partner point `psi - pi` and negated.
pub fn spectrum_analytic(curve: RestCurve, state: McGeheeState, h: f64) -> [Complex64; 3] {
    let c = |x: f64| Complex64::new(x, 0.0);
    let lambda = 6.0 / PI.sqrt();
    match curve {
        RestCurve::P1 => [c(lambda), c(0.0), c(0.0)],
        RestCurve::P2 => [c(-lambda), c(0.0), c(0.0)],
        RestCurve::P3 => {
            let (mu2, mu3) = p3_mu(state, h);
            [c(0.0), c(mu2), c(mu3)]
        }
        RestCurve::P4 => {
            let partner = McGeheeState::new(state.r, state.alpha, state.psi - PI);
            let (mu2, mu3) = p3_mu(partner, h);
            [c(0.0), c(-mu2), c(-mu3)]
        }
    }
}

/// Finite-difference Jacobian of a three-dimensional field, with step
/// `1e-6 max(1, |state|)`; one-sided in `r` where `r - step < 0`.
pub fn jacobian_numeric(field: &VectorFieldSpec, state: &[f64]) -> Result<Matrix3<f64>> {
    if field.dim() != 3 || state.len() != 3 {
        return Err(Error::InvalidInput(
            "the Jacobian needs a three-dimensional field".into(),
        ));
    }
    let norm = state.iter().map(|x| x * x).sum::<f64>().sqrt();
    let step = 1e-6 * norm.max(1.0);
    let eval = |y: [f64; 3]| -> Result<Vector3<f64>> {
        let mut dy = [0.0; 3];
        field.eval(&y, &mut dy)?;
        Ok(Vector3::from(dy))
    };
    let base = [state[0], state[1], state[2]];
    let shifted = |j: usize, d: f64| {
        let mut y = base;
        y[j] += d;
        y
    };
    let mut jac = Matrix3::zeros();
    for j in 0..3 {
        let col = if j == 0 && base[0] - step < 0.0 {
            let f0 = eval(base)?;
            let f1 = eval(shifted(j, step))?;
            let f2 = eval(shifted(j, 2.0 * step))?;
            (4.0 * f1 - 3.0 * f0 - f2) / (2.0 * step)
        } else {
            (eval(shifted(j, step))? - eval(shifted(j, -step))?) / (2.0 * step)
        };
        jac.set_column(j, &col);
    }
    Ok(jac)
}

/// Eigenvalues ordered by real, then imaginary part.
pub fn eigenvalues(m: &Matrix3<f64>) -> [Complex64; 3] {
    let ev = m.complex_eigenvalues();
    let mut out = [ev[0], ev[1], ev[2]];
    out.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    out
}

/// Unit null vector of `m - lambda I` for a real eigenvalue `lambda`.
pub fn eigenvector(m: &Matrix3<f64>, lambda: f64) -> [f64; 3] {
    let a = m - Matrix3::identity() * lambda;
    let svd = a.svd(false, true);
    let v_t = svd.v_t.expect("requested");
    let k = svd.singular_values.imin();
    let row = v_t.row(k);
    [row[0], row[1], row[2]]
}

/// Largest pairwise difference under the best matching of two spectra.
pub fn spectrum_distance(a: &[Complex64; 3], b: &[Complex64; 3]) -> f64 {
    const PERMS: [[usize; 3]; 6] = [
        [0, 1, 2],
        [0, 2, 1],
        [1, 0, 2],
        [1, 2, 0],
        [2, 0, 1],
        [2, 1, 0],
    ];
    PERMS
        .iter()
        .map(|p| (0..3).map(|i| (a[i] - b[p[i]]).norm()).fold(0.0, f64::max))
        .fold(f64::INFINITY, f64::min)
}

/// Table dimensions of `rp`, after checking them against the signs of the
/// numerical spectrum.
pub fn classify_rest_point(rp: &RestPoint) -> Result<ManifoldDims> {
    let table = rp.curve.table_dims();
    let numeric = ManifoldDims::from_spectrum(&rp.spectrum_numeric);
    if numeric != table {
        return Err(Error::Classification(format!(
            "{:?} at alpha = {}: numerical spectrum {:?} gives {:?}, expected {:?}",
            rp.curve, rp.state.alpha, rp.spectrum_numeric, numeric, table
        )));
    }
    Ok(table)
}

/// `|J t|` for the unit tangent `t` of the `P3` curve at `alpha`.
pub fn p3_tangent_residual(h: f64, alpha: f64) -> Result<f64> {
    let point = |a: f64| -> Result<[f64; 3]> {
        let r = zero_velocity_radius(h, a, KLEIN)
            .ok_or_else(|| Error::Domain(format!("no zero-velocity radius at alpha = {a}")))?;
        Ok([r, a, p3_psi(a)])
    };
    let d = 1e-5;
    let (p, m) = (point(alpha + d)?, point(alpha - d)?);
    let t = Vector3::new(p[0] - m[0], p[1] - m[1], p[2] - m[2]).normalize();
    let field = VectorFieldSpec::new(FieldKind::McgeheeKlein, ModelParams::klein(h));
    let j = jacobian_numeric(&field, &point(alpha)?)?;
    Ok((j * t).norm())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Heterocline {
    /// Ejection from `(0, pi/4, pi/4)` to the zero-velocity manifold.
    Eta13,
    /// Collision from the zero-velocity manifold to `(0, pi/4, 5pi/4)`.
    Eta24,
}

impl Heterocline {
    pub fn psi(self) -> f64 {
        match self {
            Heterocline::Eta13 => FRAC_PI_4,
            Heterocline::Eta24 => FRAC_PI_4 + PI,
        }
    }
}

struct RadialHeterocline {
    sign: f64,
    h: f64,
}

impl System for RadialHeterocline {
    fn dim(&self) -> usize {
        1
    }

    fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) -> Result<()> {
        let r = y[0];
        let r2 = r * r;
        let ehat = e_hat(self.h, r, FRAC_PI_4, KLEIN)?;
        dy[0] = self.sign * speed(KLEIN) * r * r2 / (r2 + 2.0) * ehat;
        Ok(())
    }
}

/// Integrates a homothetic heterocline as a scalar equation for `r` over
/// `[0, cfg.horizon]`; `eta24` also stops at [`COLLAPSE_RADIUS`].
pub fn heteroclinic_eta(
    direction: Heterocline,
    h: f64,
    r0: f64,
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    cfg.validate()?;
    let rbar = zero_velocity_radius(h, FRAC_PI_4, KLEIN)
        .ok_or_else(|| Error::InvalidInput(format!("no zero-velocity radius at h = {h}")))?;
    if !(r0 > 0.0 && r0 < rbar) || !(e_hat(h, r0, FRAC_PI_4, KLEIN)? > 0.0) {
        return Err(Error::InvalidInput(format!(
            "r0 = {r0} must lie in (0, {rbar}) with positive Ehat"
        )));
    }
    let sys = RadialHeterocline {
        sign: match direction {
            Heterocline::Eta13 => 1.0,
            Heterocline::Eta24 => -1.0,
        },
        h,
    };
    let sol = ode::solve(&sys, 0.0, &[r0], cfg.horizon, &cfg.options(), |a, b| {
        if direction == Heterocline::Eta24 {
            if let Some(t) = first_crossing(a, b, |y| y[0] - COLLAPSE_RADIUS, cfg.event_tol) {
                return Ok(Control::StopAt(t));
            }
        }
        Ok(Control::Continue)
    })?;
    let psi = direction.psi();
    let mut traj = Trajectory::new(TimeVariable::Zeta);
    traj.samples = sol
        .samples
        .into_iter()
        .map(|s| Sample {
            t: s.t,
            y: vec![s.y[0], FRAC_PI_4, psi],
            dy: vec![s.dy[0], 0.0, 0.0],
        })
        .collect();
    Ok(traj)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FunnelReport {
    pub collapsed: bool,
    /// Folded `(alpha, psi)` at the end of the orbit.
    pub final_angles: [f64; 2],
    /// Sup-distance of the folded angles from `(pi/4, 5pi/4)` at the end.
    pub final_distance: f64,
    pub within_funnel: bool,
    /// `(r, distance)` along the orbit.
    pub profile: Vec<[f64; 2]>,
}

impl FunnelReport {
    pub fn passed(&self) -> bool {
        self.collapsed && self.within_funnel
    }
}

fn funnel_distance(alpha: f64, psi: f64) -> (f64, [f64; 2]) {
    let (a, p) = fold_state(alpha, psi, KLEIN);
    let dp = (p - 5.0 * FRAC_PI_4).rem_euclid(2.0 * PI);
    let dp = dp.min(2.0 * PI - dp);
    ((a - FRAC_PI_4).abs().max(dp), [a, p.rem_euclid(2.0 * PI)])
}

/// Checks that a collapsing orbit ends inside the funnel around the
/// reachable total-collision point `(0, pi/4, 5pi/4)`.
pub fn sundman_funnel_check(sol: &GeneralizedSolution) -> FunnelReport {
    let points = sol.orbit_points();
    let profile: Vec<[f64; 2]> = points
        .iter()
        .map(|p| [p.r, funnel_distance(p.alpha, p.psi).0])
        .collect();
    let (final_distance, final_angles) = points
        .last()
        .map(|p| funnel_distance(p.alpha, p.psi))
        .unwrap_or((f64::INFINITY, [f64::NAN; 2]));
    FunnelReport {
        collapsed: sol.terminal == Terminal::CollapseApproach,
        final_angles,
        final_distance,
        within_funnel: final_distance < COLLAPSE_FUNNEL,
        profile,
    }
}

/// Largest zero-velocity radius over [`OUTER_RADIUS_SAMPLES`] midpoints of
/// `(0, pi/2)`.
pub fn outer_radius(h: f64) -> f64 {
    (0..OUTER_RADIUS_SAMPLES)
        .filter_map(|i| {
            let a = (i as f64 + 0.5) * FRAC_PI_2 / OUTER_RADIUS_SAMPLES as f64;
            zero_velocity_radius(h, a, KLEIN)
        })
        .fold(0.0, f64::max)
}

/// Uniform over the admissible `(r, alpha)` region with `r >= PROBE_R_MIN`
/// (rejection sampling up to `r_max`), momentum angle uniform.
pub fn random_on_shell(rng: &mut impl Rng, h: f64, r_max: f64) -> McGeheeState {
    loop {
        let a = rng.gen_range(1e-3..FRAC_PI_2 - 1e-3);
        let r = rng.gen_range(PROBE_R_MIN..r_max);
        let psi = rng.gen_range(0.0..2.0 * PI);
        if e_hat(h, r, a, KLEIN).is_ok_and(|e| e > 0.0) {
            return McGeheeState::new(r, a, psi);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeOrbit {
    pub initial: McGeheeState,
    pub sup_r: f64,
    pub collisions: usize,
    pub terminal: Terminal,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeStats {
    pub h: f64,
    pub seed: u64,
    /// `2 r_outer`.
    pub bound: f64,
    pub orbits: Vec<ProbeOrbit>,
    pub max_sup_r: f64,
    pub median_sup_r: f64,
    pub collided_fraction: f64,
    /// Indices of orbits whose radius exceeded the bound.
    pub exceeding: Vec<usize>,
    pub failed: Vec<usize>,
}

/// Integrates `n_ics` random on-shell generalized solutions (in parallel,
/// deterministic given `seed`) and collects radius and collision statistics.
/// With `include_homothetic`, the first orbit starts on `eta13`.
pub fn boundedness_probe(
    h: f64,
    n_ics: usize,
    cfg: &IntegratorConfig,
    seed: u64,
    include_homothetic: bool,
) -> Result<ProbeStats> {
    if n_ics == 0 {
        return Err(Error::InvalidInput("n_ics must be at least 1".into()));
    }
    cfg.validate()?;
    let r_outer = outer_radius(h);
    if !(r_outer > PROBE_R_MIN) {
        return Err(Error::InvalidInput(format!(
            "no admissible region at h = {h}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ics: Vec<McGeheeState> = (0..n_ics)
        .map(|i| {
            if include_homothetic && i == 0 {
                McGeheeState::new(PROBE_R_MIN, FRAC_PI_4, FRAC_PI_4)
            } else {
                random_on_shell(&mut rng, h, r_outer)
            }
        })
        .collect();
    let params = ModelParams::klein(h);
    let orbits: Vec<ProbeOrbit> = ics
        .par_iter()
        .map(|&s| match integrate_generalized(s, &params, cfg) {
            Ok(sol) => ProbeOrbit {
                initial: s,
                sup_r: sol.max_r(),
                collisions: sol.collisions.len(),
                terminal: sol.terminal.clone(),
            },
            Err(e) => ProbeOrbit {
                initial: s,
                sup_r: f64::NAN,
                collisions: 0,
                terminal: Terminal::Error(e.to_string()),
            },
        })
        .collect();
    let bound = 2.0 * r_outer;
    let mut sups: Vec<f64> = orbits
        .iter()
        .map(|o| o.sup_r)
        .filter(|r| r.is_finite())
        .collect();
    sups.sort_by(f64::total_cmp);
    let median_sup_r = if sups.is_empty() {
        f64::NAN
    } else if sups.len() % 2 == 1 {
        sups[sups.len() / 2]
    } else {
        0.5 * (sups[sups.len() / 2 - 1] + sups[sups.len() / 2])
    };
    Ok(ProbeStats {
        h,
        seed,
        bound,
        max_sup_r: sups.last().copied().unwrap_or(f64::NAN),
        median_sup_r,
        collided_fraction: orbits.iter().filter(|o| o.collisions > 0).count() as f64 / n_ics as f64,
        exceeding: (0..n_ics).filter(|&i| orbits[i].sup_r >= bound).collect(),
        failed: (0..n_ics)
            .filter(|&i| matches!(orbits[i].terminal, Terminal::Error(_)))
            .collect(),
        orbits,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SignReport {
    pub samples: usize,
    pub alpha_violations: usize,
    pub psi_violations: usize,
    pub r_violations: usize,
}

impl SignReport {
    pub fn violations(&self) -> usize {
        self.alpha_violations + self.psi_violations + self.r_violations
    }
}

/// Whether `x` lies in `(lo, lo + pi)` modulo `2 pi`; `None` within `1e-9`
/// of either end.
fn upper_half(x: f64, lo: f64) -> Option<bool> {
    let d = (x - lo).rem_euclid(2.0 * PI);
    let margin = 1e-9;
    if d < margin || (d - PI).abs() < margin || 2.0 * PI - d < margin {
        return None;
    }
    Some(d < PI)
}

/// Samples the interior of the Hill region and checks the sign rules of the
/// Klein field: `alpha` grows for `alpha < psi < alpha + pi`, `psi` grows
/// for `atan m(alpha) < psi < atan m(alpha) + pi`, and `r` follows the sign
/// of `cos(psi - alpha)`.
pub fn sign_region_check(n_samples: usize, seed: u64) -> SignReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = SignReport {
        samples: 0,
        alpha_violations: 0,
        psi_violations: 0,
        r_violations: 0,
    };
    while report.samples < n_samples {
        let a = rng.gen_range(0.01..FRAC_PI_2 - 0.01);
        let Some(rbar) = zero_velocity_radius(0.0, a, KLEIN) else {
            continue;
        };
        let r = rng.gen_range(0.05..rbar);
        let psi = rng.gen_range(0.0..2.0 * PI);
        let Ok(f) = vf_mcgehee_klein(McGeheeState::new(r, a, psi), 0.0) else {
            continue;
        };
        if e_hat(0.0, r, a, KLEIN).map_or(true, |e| e <= 0.0) {
            continue;
        }
        report.samples += 1;
        if upper_half(psi, a).is_some_and(|up| up != (f[1] > 0.0)) {
            report.alpha_violations += 1;
        }
        if upper_half(psi, p3_psi(a)).is_some_and(|up| up != (f[2] > 0.0)) {
            report.psi_violations += 1;
        }
        if upper_half(psi, a - FRAC_PI_2).is_some_and(|up| up != (f[0] > 0.0)) {
            report.r_violations += 1;
        }
    }
    report
}

/// Shape angles on an `n`-point grid (excluding `pi/4`) where both angular
/// derivatives vanish with `psi - alpha` in `{0, pi}` at positive `Ehat`.
/// An empty result means the homothetic ray is the only balanced direction.
pub fn homothetic_exclusivity(h: f64, n: usize, tol: f64) -> Vec<f64> {
    sample_alphas(n)
        .into_iter()
        .filter(|&a| a != FRAC_PI_4)
        .filter(|&a| {
            let Some(rbar) = zero_velocity_radius(h, a, KLEIN) else {
                return false;
            };
            [a, a + PI].iter().any(|&psi| {
                vf_mcgehee_klein(McGeheeState::new(0.5 * rbar, a, psi), h)
                    .is_ok_and(|f| f[1].abs() < tol && f[2].abs() < tol)
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpsilonReport {
    pub epsilons: Vec<f64>,
    /// Time of the first collision in the first run.
    pub collision_zeta: f64,
    pub sample_zeta: f64,
    /// Unfolded `(r, alpha, psi)` at `sample_zeta` for each smoothing.
    pub states: Vec<[f64; 3]>,
    /// Distances between consecutive states.
    pub differences: Vec<f64>,
}

impl EpsilonReport {
    pub fn converging(&self) -> bool {
        self.differences.windows(2).all(|w| w[1] < w[0])
    }
}

/// Compares generalized solutions with different smoothings at a fixed time
/// `delay` after the first collision.
pub fn epsilon_convergence(
    state0: McGeheeState,
    h: f64,
    epsilons: &[f64],
    delay: f64,
    cfg: &IntegratorConfig,
) -> Result<EpsilonReport> {
    let first = epsilons
        .first()
        .ok_or_else(|| Error::InvalidInput("no smoothing values".into()))?;
    let params = |eps: f64| ModelParams::new(KLEIN, h, eps);
    let probe = integrate_generalized(
        state0,
        &params(*first)?,
        &IntegratorConfig {
            max_collisions: 1,
            ..*cfg
        },
    )?;
    let collision_zeta = probe.collisions.first().map(|e| e.time).ok_or_else(|| {
        Error::InvalidInput("the orbit has no collision within the horizon".into())
    })?;
    let sample_zeta = collision_zeta + delay;
    let states = epsilons
        .iter()
        .map(|&eps| {
            let run_cfg = IntegratorConfig {
                horizon: sample_zeta,
                max_collisions: usize::MAX,
                ..*cfg
            };
            let sol = integrate_generalized(state0, &params(eps)?, &run_cfg)?;
            let p = *sol.orbit_points().last().expect("non-empty");
            Ok([p.r, p.alpha, p.psi])
        })
        .collect::<Result<Vec<_>>>()?;
    let differences = states
        .windows(2)
        .map(|w| {
            (0..3)
                .map(|i| (w[0][i] - w[1][i]).powi(2))
                .sum::<f64>()
                .sqrt()
        })
        .collect();
    Ok(EpsilonReport {
        epsilons: epsilons.to_vec(),
        collision_zeta,
        sample_zeta,
        states,
        differences,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::vf_mcgehee_klein;

    const K: f64 = 0.564_189_583_547_756_3; // 1/sqrt(pi)

    #[test]
    fn sample_grid_contains_central_angle() {
        for n in [1, 2, 7, 64] {
            let a = sample_alphas(n);
            assert_eq!(a.len(), n);
            assert!(a.contains(&FRAC_PI_4));
            assert!(a.iter().all(|&x| x > 0.0 && x < FRAC_PI_2));
        }
    }

    #[test]
    fn rest_points_have_small_residual() {
        for h in [-1.0, 0.0, 1.0] {
            let pts = rest_point_curves(h, 16);
            assert!(pts.iter().any(|p| p.curve == RestCurve::P3));
            for p in &pts {
                let f = vf_mcgehee_klein(p.state, h).unwrap();
                let res = f.iter().map(|x| x.abs()).fold(0.0, f64::max);
                assert!(res < 1e-10, "{:?} {:?} residual {res:e}", p.curve, p.state);
            }
        }
    }

    #[test]
    fn central_p3_point() {
        let p3 = rest_point_curves(0.0, 1)
            .into_iter()
            .find(|p| p.curve == RestCurve::P3)
            .unwrap();
        assert!((p3.state.r - 1.225_709_379_622_021_5).abs() < 1e-12);
        assert!((p3.state.psi - FRAC_PI_4).abs() < 1e-15);
    }

    #[test]
    fn analytic_collision_spectrum() {
        let s = spectrum_analytic(RestCurve::P1, McGeheeState::new(0.0, 0.3, 0.3), 5.0);
        assert!((s[0].re - 3.385_137_501_286_538).abs() < 1e-12);
        let s2 = spectrum_analytic(RestCurve::P2, McGeheeState::new(0.0, 0.3, 0.3 + PI), -2.0);
        assert_eq!(s2[0].re, -s[0].re);
    }

    #[test]
    fn numeric_collision_spectrum() {
        let field = VectorFieldSpec::new(FieldKind::McgeheeKlein, ModelParams::klein(0.0));
        let j = jacobian_numeric(&field, &[0.0, 0.4, 0.4]).unwrap();
        let ev = eigenvalues(&j);
        let nonzero = ev.iter().find(|z| z.norm() > 1e-3).unwrap();
        assert!((nonzero.re.abs() - 6.0 * K).abs() < 1e-5);
        assert_eq!(ev.iter().filter(|z| z.norm() < 1e-5).count(), 2);
    }

    #[test]
    fn p3_signs_and_unstable_direction() {
        for p in rest_point_curves(0.0, 9)
            .iter()
            .filter(|p| p.curve == RestCurve::P3)
        {
            let s = p.spectrum_analytic;
            assert!(s[1].re < 0.0 && s[2].re > 0.0, "{:?}", p.state);
            assert!(p.spectrum_mismatch() < 1e-4, "{:?}", p);
            assert_eq!(classify_rest_point(p).unwrap(), p.curve.table_dims());
        }
        let field = VectorFieldSpec::new(FieldKind::McgeheeKlein, ModelParams::klein(0.0));
        let rbar = zero_velocity_radius(0.0, 0.5, KLEIN).unwrap();
        let j = jacobian_numeric(&field, &[rbar, 0.5, p3_psi(0.5)]).unwrap();
        let mu3 = eigenvalues(&j)[2].re;
        let v = eigenvector(&j, mu3);
        assert!(v[0].abs() < 1e-5 && v[1].abs() < 1e-5, "{v:?}");
    }

    #[test]
    fn p3_tangent_is_null() {
        for a in [0.3, FRAC_PI_4, 1.1] {
            assert!(p3_tangent_residual(0.0, a).unwrap() < 1e-4);
        }
    }

    #[test]
    fn classification_rejects_wrong_signs() {
        let mut p = RestPoint::new(RestCurve::P3, McGeheeState::new(1.0, 0.5, 0.5), 0.0);
        p.spectrum_numeric = [Complex64::new(1.0, 0.0); 3];
        assert!(matches!(
            classify_rest_point(&p),
            Err(Error::Classification(_))
        ));
    }

    #[test]
    fn eta13_converges_to_rest_point() {
        let cfg = IntegratorConfig::default();
        let traj = heteroclinic_eta(Heterocline::Eta13, 0.0, 0.3, &cfg).unwrap();
        let rs: Vec<f64> = traj.samples.iter().map(|s| s.y[0]).collect();
        assert!(rs.windows(2).all(|w| w[1] >= w[0]));
        let rbar = zero_velocity_radius(0.0, FRAC_PI_4, KLEIN).unwrap();
        assert!((rs.last().unwrap() - rbar).abs() < 1e-6);
        assert!(traj
            .samples
            .iter()
            .all(|s| s.y[1] == FRAC_PI_4 && s.y[2] == FRAC_PI_4));
    }

    #[test]
    fn eta24_reaches_collapse_funnel() {
        let cfg = IntegratorConfig {
            horizon: 1e9,
            max_step: f64::INFINITY,
            ..Default::default()
        };
        let traj = heteroclinic_eta(Heterocline::Eta24, 0.0, 1.0, &cfg).unwrap();
        let rs: Vec<f64> = traj.samples.iter().map(|s| s.y[0]).collect();
        assert!(rs.windows(2).all(|w| w[1] <= w[0]));
        assert!((rs.last().unwrap() - COLLAPSE_RADIUS).abs() < 1e-8);
        let sol = GeneralizedSolution {
            params: ModelParams::klein(0.0),
            segments: vec![crate::integrate::Segment {
                kind: crate::integrate::SegmentKind::McGehee { h: 0.0 },
                trajectory: traj,
            }],
            collisions: Vec::new(),
            events: Vec::new(),
            terminal: Terminal::CollapseApproach,
            energy_bookkeeping: 0.0,
        };
        let report = sundman_funnel_check(&sol);
        assert!(report.passed());
        assert!(report.final_distance < 1e-12);
    }

    #[test]
    fn eta_rejects_bad_start() {
        let cfg = IntegratorConfig::default();
        assert!(heteroclinic_eta(Heterocline::Eta13, 0.0, 2.0, &cfg).is_err());
        assert!(heteroclinic_eta(Heterocline::Eta13, 0.0, 0.0, &cfg).is_err());
    }

    #[test]
    fn sign_rules_hold() {
        let report = sign_region_check(2000, 7);
        assert_eq!(report.samples, 2000);
        assert_eq!(report.violations(), 0, "{report:?}");
    }

    #[test]
    fn only_central_direction_is_balanced() {
        assert!(homothetic_exclusivity(0.0, 400, 1e-10).is_empty());
        let f = vf_mcgehee_klein(McGeheeState::new(0.6, FRAC_PI_4, FRAC_PI_4), 0.0).unwrap();
        assert_eq!((f[1], f[2]), (0.0, 0.0));
    }

    #[test]
    fn random_states_are_on_shell() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let s = random_on_shell(&mut rng, 0.0, 5.0);
            assert!(e_hat(0.0, s.r, s.alpha, KLEIN).unwrap() > 0.0);
            assert!(s.r >= PROBE_R_MIN);
        }
    }

    #[test]
    fn outer_radius_exceeds_central_radius() {
        let r = outer_radius(0.0);
        assert!(r > 1.2257 && r.is_finite());
    }
}
