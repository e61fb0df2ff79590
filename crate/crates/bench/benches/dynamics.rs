use std::f64::consts::FRAC_PI_4;
use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use dihedral_core::analysis::rest_point_curves;
use dihedral_core::dynamics::{vf_cartesian_smoothed, vf_mcgehee_klein};
use dihedral_core::figures::Figure;
use dihedral_core::integrate::{integrate_generalized, IntegratorConfig};
use dihedral_core::model::{McGeheeState, ModelParams};
use dihedral_core::transforms::{cartesian_from_mcgehee, mcgehee_from_cartesian};

fn vector_fields(c: &mut Criterion) {
    let s = McGeheeState::new(0.8, 0.6, 2.0);
    c.bench_function("vf_mcgehee_klein", |b| {
        b.iter(|| vf_mcgehee_klein(black_box(s), black_box(0.0)))
    });
    let params = ModelParams::klein(0.0);
    c.bench_function("vf_cartesian_smoothed", |b| {
        b.iter(|| vf_cartesian_smoothed(black_box([0.3, 0.2]), black_box([1.0, -0.5]), &params))
    });
}

fn transforms(c: &mut Criterion) {
    let s = McGeheeState::new(0.8, 0.6, 2.0);
    c.bench_function("mcgehee_round_trip", |b| {
        b.iter(|| {
            let cs = cartesian_from_mcgehee(black_box(s), 0.0, 2).unwrap();
            mcgehee_from_cartesian(&cs, 2).unwrap()
        })
    });
}

fn orbits(c: &mut Criterion) {
    let mut group = c.benchmark_group("generalized");
    group.sample_size(10);
    for figure in [Figure::TurningPoint, Figure::Transmission] {
        group.bench_function(figure.name(), |b| {
            b.iter(|| {
                integrate_generalized(
                    figure.initial_condition(),
                    &figure.params(),
                    &figure.config(),
                )
                .unwrap()
            })
        });
    }
    let cfg = IntegratorConfig {
        horizon: 20.0,
        ..IntegratorConfig::default()
    };
    group.bench_function("homothetic_default_tolerance", |b| {
        b.iter(|| {
            integrate_generalized(
                McGeheeState::new(0.3, FRAC_PI_4, FRAC_PI_4),
                &ModelParams::klein(0.0),
                &cfg,
            )
            .unwrap()
        })
    });
    group.finish();
}

fn rest_points(c: &mut Criterion) {
    c.bench_function("rest_point_curves_64", |b| {
        b.iter(|| rest_point_curves(black_box(0.0), 64))
    });
}

criterion_group!(benches, vector_fields, transforms, orbits, rest_points);
criterion_main!(benches);
