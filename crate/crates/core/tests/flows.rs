use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use approx::assert_relative_eq;
use dihedral_core::analysis::{epsilon_convergence, heteroclinic_eta, Heterocline};
use dihedral_core::dynamics::{
    collision_manifold_closed_form, dsigma_dzeta, vf_mcgehee_klein, FieldKind, VectorFieldSpec,
};
use dihedral_core::integrate::{
    energy_drift, integrate, integrate_generalized, wall_distance, IntegratorConfig, SegmentKind,
    Terminal,
};
use dihedral_core::model::{
    e_hat, fold_angle, zero_velocity_radius, CartesianState, McGeheeState, ModelParams, KLEIN,
};
use dihedral_core::transforms::{
    cartesian_from_mcgehee, center_of_vorticity, full_configuration, mcgehee_from_cartesian,
};

fn tight(horizon: f64) -> IntegratorConfig {
    IntegratorConfig {
        rel_tol: 1e-12,
        abs_tol: 1e-14,
        horizon,
        ..IntegratorConfig::default()
    }
}

fn cartesian_spec(epsilon: f64) -> VectorFieldSpec {
    VectorFieldSpec::new(
        FieldKind::CartesianSmoothed,
        ModelParams::new(KLEIN, 0.0, epsilon).unwrap(),
    )
}

fn mcgehee_of(y: &[f64]) -> [f64; 3] {
    mcgehee_from_cartesian(&CartesianState::from_slice(y), KLEIN)
        .unwrap()
        .0
        .to_array()
}

fn angle_diff(a: f64, b: f64) -> f64 {
    (a - b + PI).rem_euclid(2.0 * PI) - PI
}

#[test]
fn cartesian_flow_is_tangent_to_the_klein_field() {
    let s0 = McGeheeState::new(1.0, 0.6, 2.0);
    let c0 = cartesian_from_mcgehee(s0, 0.0, KLEIN).unwrap();
    let spec = cartesian_spec(0.0);
    let traj = integrate(&spec, &c0.to_array(), &tight(0.02)).unwrap();
    let mut checked = 0;
    for k in 0..100 {
        let sigma = 0.02 * k as f64 / 99.0;
        let y = traj.interpolate(sigma).unwrap();
        let (m, h) = mcgehee_from_cartesian(&CartesianState::from_slice(&y), KLEIN).unwrap();
        assert!(wall_distance(m.alpha, KLEIN) > 1e-3);
        let mut dy = [0.0; 4];
        spec.eval(&y, &mut dy).unwrap();
        let step = 1e-7;
        let shift = |sgn: f64| -> Vec<f64> { (0..4).map(|i| y[i] + sgn * step * dy[i]).collect() };
        let (a, b) = (mcgehee_of(&shift(1.0)), mcgehee_of(&shift(-1.0)));
        let pulled: Vec<f64> = (0..3)
            .map(|i| angle_diff(a[i], b[i]) / (2.0 * step))
            .collect();
        let f = vf_mcgehee_klein(m, h).unwrap();
        let rate = 1.0 / dsigma_dzeta(m.r, e_hat(h, m.r, m.alpha, KLEIN).unwrap());
        let scale = f.iter().map(|x| (x * rate).abs()).fold(1.0, f64::max);
        for i in 0..3 {
            let residual = (pulled[i] - f[i] * rate).abs() / scale;
            assert!(
                residual < 1e-6,
                "component {i} at sigma {sigma}: {residual:e}"
            );
        }
        checked += 1;
    }
    assert_eq!(checked, 100);
}

#[test]
fn composite_time_rescaling_matches_cartesian_flow() {
    let s0 = McGeheeState::new(1.0, 0.6, 2.0);
    let zeta_end = 0.3;
    let mc = integrate(
        &VectorFieldSpec::new(FieldKind::McgeheeKlein, ModelParams::klein(0.0)),
        &s0.to_array(),
        &tight(zeta_end),
    )
    .unwrap();
    let n = 2000;
    let rate = |t: f64| {
        let y = mc.interpolate(t).unwrap();
        dsigma_dzeta(y[0], e_hat(0.0, y[0], y[1], KLEIN).unwrap())
    };
    let dz = zeta_end / n as f64;
    let sigma_end: f64 = (0..n)
        .map(|i| {
            let (a, b) = (i as f64 * dz, (i + 1) as f64 * dz);
            dz / 6.0 * (rate(a) + 4.0 * rate(0.5 * (a + b)) + rate(b))
        })
        .sum();
    let c0 = cartesian_from_mcgehee(s0, 0.0, KLEIN).unwrap();
    let cart = integrate(&cartesian_spec(0.0), &c0.to_array(), &tight(sigma_end)).unwrap();
    let end_c = mcgehee_of(&cart.last().unwrap().y);
    let end_m = &mc.last().unwrap().y;
    assert!(end_m
        .iter()
        .zip(&s0.to_array())
        .any(|(a, b)| (a - b).abs() > 0.1));
    for i in 0..3 {
        assert!(
            angle_diff(end_c[i], end_m[i]).abs() < 1e-7,
            "{end_c:?} vs {end_m:?}"
        );
    }
}

#[test]
fn smoothed_energy_is_conserved_over_unit_sigma_window() {
    let params = ModelParams::new(KLEIN, 0.0, 1e-6).unwrap();
    let c0 = cartesian_from_mcgehee(McGeheeState::new(1.0, 0.6, 2.0), 0.0, KLEIN).unwrap();
    let traj = integrate(&cartesian_spec(1e-6), &c0.to_array(), &tight(10.0)).unwrap();
    assert_relative_eq!(traj.last().unwrap().t, 10.0, max_relative = 1e-12);
    let drift = energy_drift(&traj, &params).unwrap();
    assert!(drift <= 1e-8, "drift {drift:e}");
}

#[test]
fn energy_drift_grows_with_tolerance() {
    let params = ModelParams::new(KLEIN, 0.0, 1e-6).unwrap();
    let c0 = cartesian_from_mcgehee(McGeheeState::new(1.0, 0.6, 2.0), 0.0, KLEIN).unwrap();
    let drifts: Vec<f64> = [1e-10, 1e-8, 1e-6]
        .iter()
        .map(|&rel_tol| {
            let cfg = IntegratorConfig {
                rel_tol,
                abs_tol: rel_tol * 1e-2,
                horizon: 2.0,
                ..IntegratorConfig::default()
            };
            let traj = integrate(&cartesian_spec(1e-6), &c0.to_array(), &cfg).unwrap();
            energy_drift(&traj, &params).unwrap()
        })
        .collect();
    assert!(drifts.windows(2).all(|w| w[0] < w[1]), "{drifts:?}");
}

#[test]
fn center_of_vorticity_stays_at_origin() {
    let c0 = cartesian_from_mcgehee(McGeheeState::new(1.0, 0.6, 2.0), 0.0, KLEIN).unwrap();
    let traj = integrate(&cartesian_spec(1e-6), &c0.to_array(), &tight(1.0)).unwrap();
    let centre = |t: f64| {
        let y = traj.interpolate(t).unwrap();
        center_of_vorticity(&full_configuration(&CartesianState::from_slice(&y), KLEIN))
    };
    let dt = 0.01;
    for k in 1..99 {
        let t = k as f64 * dt;
        let (a, b, c) = (centre(t - dt), centre(t), centre(t + dt));
        for i in 0..2 {
            assert!(b[i].abs() < 1e-12);
            assert!((a[i] - 2.0 * b[i] + c[i]).abs() / (dt * dt) < 1e-8);
        }
    }
}

#[test]
fn homothetic_ray_is_invariant() {
    for r0 in [0.1, 0.3, 0.8] {
        let s0 = [r0, FRAC_PI_4, FRAC_PI_4];
        let spec = VectorFieldSpec::new(FieldKind::McgeheeKlein, ModelParams::klein(0.0));
        let traj = integrate(&spec, &s0, &tight(20.0)).unwrap();
        for s in &traj.samples {
            assert!((s.y[1] - FRAC_PI_4).abs() < 1e-9);
            assert!((s.y[2] - FRAC_PI_4).abs() < 1e-9);
        }
    }
}

#[test]
fn heterocline_satisfies_radial_equation() {
    let k = 1.0 / PI.sqrt();
    for h in [-1.0, 0.0, 1.0] {
        let traj = heteroclinic_eta(Heterocline::Eta13, h, 0.3, &tight(20.0)).unwrap();
        for s in &traj.samples {
            let r = s.y[0];
            let r2 = r * r;
            let ehat = 2.0 * (h * r2 + 3.0 * (1.0 - r2 * r.ln())) - 2.0 * r2 * 4f64.ln();
            let expected = k * r * r2 / (r2 + 2.0) * ehat;
            assert!((s.dy[0] - expected).abs() <= 1e-12 * (1.0 + expected.abs()));
            let full = vf_mcgehee_klein(McGeheeState::new(r, FRAC_PI_4, FRAC_PI_4), h).unwrap();
            assert!((full[0] - expected).abs() <= 1e-12 * (1.0 + expected.abs()));
        }
        let rbar = zero_velocity_radius(h, FRAC_PI_4, KLEIN).unwrap();
        let rs: Vec<f64> = traj.samples.iter().map(|s| s.y[0]).collect();
        assert!(rs.windows(2).all(|w| w[1] >= w[0] - 1e-12));
        assert!(rs.iter().all(|&r| r <= rbar * (1.0 + 1e-12)));
    }
}

#[test]
fn collision_manifold_flow_pairs_rest_points() {
    let spec = VectorFieldSpec::new(FieldKind::CollisionManifold, ModelParams::klein(0.0));
    for psi0 in [0.3, FRAC_PI_4, 1.2] {
        let alpha0 = fold_angle(psi0 + 0.7, KLEIN);
        let forward = integrate(&spec, &[alpha0, psi0], &tight(10.0)).unwrap();
        let a_end = forward.last().unwrap().y[0];
        assert!(
            (a_end - psi0).abs() < 1e-6,
            "forward limit {a_end} vs {psi0}"
        );
        let expected = collision_manifold_closed_form(alpha0, psi0, 10.0);
        assert!((a_end - expected).abs() < 1e-8);
        let mut back = [0.0; 2];
        spec.eval(&[psi0 + PI - 1e-3, psi0], &mut back).unwrap();
        assert!(back[0] < 0.0, "P2 partner must repel backward: {back:?}");
    }
}

#[test]
fn generalized_segments_keep_alpha_off_the_walls() {
    let params = ModelParams::klein(0.0);
    let sol = integrate_generalized(
        McGeheeState::new(2.05, 0.01, FRAC_PI_4),
        &params,
        &tight(1.0),
    )
    .unwrap();
    assert!(!sol.collisions.is_empty());
    for seg in &sol.segments {
        if let SegmentKind::McGehee { .. } = seg.kind {
            for s in &seg.trajectory.samples {
                let a = fold_angle(s.y[1], KLEIN);
                assert!(a > 0.0 && a < FRAC_PI_2, "folded alpha {a}");
            }
        }
    }
}

#[test]
fn smoothing_limit_is_cauchy() {
    let report = epsilon_convergence(
        McGeheeState::new(2.05, 0.01, FRAC_PI_4),
        0.0,
        &[1e-5, 1e-6, 1e-7],
        0.05,
        &tight(1.0),
    )
    .unwrap();
    assert!(report.converging(), "{:?}", report.differences);
}

#[test]
fn pseudolemniscata_shooting_recovers_published_angle() {
    let (r0, a0) = (1.002_645_34, 0.041_492_04);
    let params = ModelParams::klein(0.0);
    let cfg = IntegratorConfig {
        max_collisions: 1,
        ..tight(40.0)
    };
    let collides = |psi: f64| {
        let sol = integrate_generalized(McGeheeState::new(r0, a0, psi), &params, &cfg).unwrap();
        assert!(!matches!(sol.terminal, Terminal::Error(_)));
        sol.collisions.first().map(|e| e.kind)
    };
    let (mut lo, mut hi) = (2.5434, 2.5435);
    let side = collides(lo);
    assert_ne!(side, collides(hi));
    for _ in 0..30 {
        let mid = 0.5 * (lo + hi);
        if collides(mid) == side {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    assert!((0.5 * (lo + hi) - 2.543_448_46).abs() < 5e-8, "{lo} {hi}");
}
