use std::f64::consts::PI;
use std::path::Path;

use dihedral_core::analysis::{
    boundedness_probe, classify_rest_point, epsilon_convergence, rest_point_curves,
    sign_region_check, RestCurve, RestPoint,
};
use dihedral_core::figures::{run_figure, Figure, FigureRun};
use dihedral_core::integrate::{integrate_generalized, Terminal};
use dihedral_core::model::{e_hat, KLEIN};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{Output, Scenario};
use crate::export::{
    ensure_dir, write_csv, write_events, write_json, write_projections, write_trajectory,
    EVENTS_FILE, TRAJECTORY_FILE,
};
use crate::CliError;

#[derive(Debug, Serialize)]
struct RunSummary<'a> {
    name: &'a str,
    terminal: &'a Terminal,
    final_zeta: f64,
    samples: usize,
    collisions: usize,
    energy_drift: f64,
    energy_bookkeeping: f64,
    min_r: f64,
    max_r: f64,
}

pub fn simulate(config: &Path, out_dir: &Path) -> Result<(), CliError> {
    let scenario = Scenario::load(config)?;
    let state = scenario.initial_state()?;
    let params = scenario.params().map_err(CliError::Config)?;
    let cfg = scenario.integrator_config();
    let sol = integrate_generalized(state, &params, &cfg)
        .map_err(|e| CliError::Runtime(format!("integration failed: {e}")))?;
    let dir = out_dir.join(&scenario.name);
    ensure_dir(&dir)?;
    let points = sol.orbit_points();
    for output in &scenario.outputs {
        match output {
            Output::Trajectory => write_trajectory(&dir.join(TRAJECTORY_FILE), &points)?,
            Output::Events => write_events(&dir.join(EVENTS_FILE), &sol.events)?,
            Output::Projections => {
                write_projections(&dir, &points)?;
            }
        }
    }
    let summary = RunSummary {
        name: &scenario.name,
        terminal: &sol.terminal,
        final_zeta: sol.final_zeta(),
        samples: points.len(),
        collisions: sol.collisions.len(),
        energy_drift: sol.energy_drift(),
        energy_bookkeeping: sol.energy_bookkeeping,
        min_r: sol.min_r(),
        max_r: sol.max_r(),
    };
    write_json(&dir.join("summary.json"), &summary)?;
    println!(
        "{}: {} samples, {} collisions, terminal {:?}, energy drift {:.3e}",
        scenario.name,
        points.len(),
        sol.collisions.len(),
        sol.terminal,
        summary.energy_drift
    );
    match &sol.terminal {
        Terminal::Error(msg) => Err(CliError::Runtime(format!("integration stopped: {msg}"))),
        _ => Ok(()),
    }
}

#[derive(Debug, Serialize)]
struct RestPointRow {
    curve: &'static str,
    alpha: f64,
    r: f64,
    psi: f64,
    analytic_1_re: f64,
    analytic_1_im: f64,
    analytic_2_re: f64,
    analytic_2_im: f64,
    analytic_3_re: f64,
    analytic_3_im: f64,
    numeric_1_re: f64,
    numeric_1_im: f64,
    numeric_2_re: f64,
    numeric_2_im: f64,
    numeric_3_re: f64,
    numeric_3_im: f64,
    spectrum_mismatch: f64,
    stable: usize,
    unstable: usize,
    center: usize,
    classification: &'static str,
}

fn curve_name(c: RestCurve) -> &'static str {
    match c {
        RestCurve::P1 => "P1",
        RestCurve::P2 => "P2",
        RestCurve::P3 => "P3",
        RestCurve::P4 => "P4",
    }
}

impl From<&RestPoint> for RestPointRow {
    fn from(rp: &RestPoint) -> Self {
        let (a, n) = (rp.spectrum_analytic, rp.spectrum_numeric);
        let dims = rp.manifold_dims;
        Self {
            curve: curve_name(rp.curve),
            alpha: rp.state.alpha,
            r: rp.state.r,
            psi: rp.state.psi,
            analytic_1_re: a[0].re,
            analytic_1_im: a[0].im,
            analytic_2_re: a[1].re,
            analytic_2_im: a[1].im,
            analytic_3_re: a[2].re,
            analytic_3_im: a[2].im,
            numeric_1_re: n[0].re,
            numeric_1_im: n[0].im,
            numeric_2_re: n[1].re,
            numeric_2_im: n[1].im,
            numeric_3_re: n[2].re,
            numeric_3_im: n[2].im,
            spectrum_mismatch: rp.spectrum_mismatch(),
            stable: dims.stable,
            unstable: dims.unstable,
            center: dims.center,
            classification: if classify_rest_point(rp).is_ok() {
                "matches"
            } else {
                "conflict"
            },
        }
    }
}

pub fn restpoints(h: f64, n: usize, out: &Path) -> Result<(), CliError> {
    if n == 0 {
        return Err(CliError::Config("--n must be at least 1".into()));
    }
    if !h.is_finite() {
        return Err(CliError::Config(format!("--h must be finite, got {h}")));
    }
    let mut points = rest_point_curves(h, n);
    points.sort_by_key(|p| RestCurve::ALL.iter().position(|&c| c == p.curve));
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        ensure_dir(parent)?;
    }
    write_csv(out, points.iter().map(RestPointRow::from))?;
    let conflicts = points
        .iter()
        .filter(|p| classify_rest_point(p).is_err())
        .count();
    println!(
        "{} rest points at h = {h} written to {} ({conflicts} classification conflicts)",
        points.len(),
        out.display()
    );
    Ok(())
}

/// Parses `RxA`, both at least 2.
pub fn parse_grid(s: &str) -> Result<(usize, usize), String> {
    let (r, a) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("grid '{s}' must look like 200x100"))?;
    let parse = |t: &str| {
        t.trim()
            .parse::<usize>()
            .map_err(|e| format!("grid '{s}': {e}"))
    };
    let (r, a) = (parse(r)?, parse(a)?);
    if r < 2 || a < 2 {
        return Err(format!("grid '{s}': both sizes must be at least 2"));
    }
    Ok((r, a))
}

#[derive(Debug, Serialize)]
struct GridRow {
    r: f64,
    alpha: f64,
    #[serde(rename = "Ehat")]
    ehat: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ZeroSegment {
    pub r_start: f64,
    pub alpha_start: f64,
    pub r_end: f64,
    pub alpha_end: f64,
}

/// Marching squares on `values[i][j]` over the axes `rs` x `alphas`, with
/// linear interpolation along cell edges.
pub fn zero_level_segments(rs: &[f64], alphas: &[f64], values: &[Vec<f64>]) -> Vec<ZeroSegment> {
    let mut out = Vec::new();
    let cross = |p: (f64, f64, f64), q: (f64, f64, f64)| -> Option<(f64, f64)> {
        if (p.2 >= 0.0) == (q.2 >= 0.0) {
            return None;
        }
        let t = p.2 / (p.2 - q.2);
        Some((p.0 + t * (q.0 - p.0), p.1 + t * (q.1 - p.1)))
    };
    for i in 0..rs.len() - 1 {
        for j in 0..alphas.len() - 1 {
            let c = |di: usize, dj: usize| (rs[i + di], alphas[j + dj], values[i + di][j + dj]);
            let (v00, v10, v11, v01) = (c(0, 0), c(1, 0), c(1, 1), c(0, 1));
            // bottom, right, top, left
            let edges = [
                cross(v00, v10),
                cross(v10, v11),
                cross(v01, v11),
                cross(v00, v01),
            ];
            let hits: Vec<(f64, f64)> = edges.iter().flatten().copied().collect();
            let mut push = |a: (f64, f64), b: (f64, f64)| {
                out.push(ZeroSegment {
                    r_start: a.0,
                    alpha_start: a.1,
                    r_end: b.0,
                    alpha_end: b.1,
                })
            };
            match hits.len() {
                2 => push(hits[0], hits[1]),
                4 => {
                    let centre = 0.25 * (v00.2 + v10.2 + v11.2 + v01.2);
                    let e = edges.map(|x| x.expect("all edges cross"));
                    if (centre >= 0.0) == (v00.2 >= 0.0) {
                        push(e[0], e[1]);
                        push(e[2], e[3]);
                    } else {
                        push(e[3], e[0]);
                        push(e[1], e[2]);
                    }
                }
                _ => {}
            }
        }
    }
    out
}

pub fn manifolds(
    h: f64,
    grid: (usize, usize),
    l: u32,
    r_max: f64,
    out_dir: &Path,
) -> Result<(), CliError> {
    if l < 2 {
        return Err(CliError::Config(format!("--l must be at least 2, got {l}")));
    }
    if !(r_max > 0.0 && r_max.is_finite()) || !h.is_finite() {
        return Err(CliError::Config(
            "--h and --r-max must be finite, --r-max positive".into(),
        ));
    }
    let (nr, na) = grid;
    let rs: Vec<f64> = (0..nr)
        .map(|i| r_max * i as f64 / (nr - 1) as f64)
        .collect();
    let width = PI / l as f64;
    let alphas: Vec<f64> = (0..na)
        .map(|j| (j as f64 + 0.5) * width / na as f64)
        .collect();
    let values = rs
        .iter()
        .map(|&r| {
            alphas
                .iter()
                .map(|&a| e_hat(h, r, a, l))
                .collect::<Result<Vec<f64>, _>>()
        })
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    ensure_dir(out_dir)?;
    write_csv(
        &out_dir.join("ehat_grid.csv"),
        rs.iter().enumerate().flat_map(|(i, &r)| {
            let values = &values;
            alphas.iter().enumerate().map(move |(j, &alpha)| GridRow {
                r,
                alpha,
                ehat: values[i][j],
            })
        }),
    )?;
    let segments = zero_level_segments(&rs, &alphas, &values);
    write_csv(&out_dir.join("zero_curve.csv"), &segments)?;
    println!(
        "{nr}x{na} grid of Ehat at h = {h}, l = {l}: {} zero-curve segments in {}",
        segments.len(),
        out_dir.display()
    );
    Ok(())
}

#[derive(Debug, Serialize)]
struct FigureReport<'a> {
    figure: Figure,
    passed: bool,
    initial: [f64; 3],
    terminal: &'a Terminal,
    final_zeta: f64,
    energy_drift: f64,
    max_angular_momentum: f64,
    collision_radii: Vec<f64>,
    checks: &'a [dihedral_core::figures::Check],
}

fn write_figure(run: &FigureRun, dir: &Path) -> Result<(), CliError> {
    ensure_dir(dir)?;
    let points = run.solution.orbit_points();
    write_projections(dir, &points)?;
    write_trajectory(&dir.join(TRAJECTORY_FILE), &points)?;
    write_events(&dir.join(EVENTS_FILE), &run.solution.events)?;
    write_json(
        &dir.join("checks.json"),
        &FigureReport {
            figure: run.figure,
            passed: run.passed(),
            initial: run.initial.to_array(),
            terminal: &run.solution.terminal,
            final_zeta: run.solution.final_zeta(),
            energy_drift: run.energy_drift,
            max_angular_momentum: run.max_angular_momentum,
            collision_radii: run.solution.collision_radii(),
            checks: &run.checks,
        },
    )
}

/// `which` is a figure name or `all`.
pub fn reproduce_figure(which: &str, out_dir: &Path) -> Result<(), CliError> {
    let figures: Vec<Figure> = if which == "all" {
        Figure::ALL.to_vec()
    } else {
        vec![which
            .parse()
            .map_err(|e: dihedral_core::Error| CliError::Config(e.to_string()))?]
    };
    let runs: Vec<(Figure, Result<(), CliError>, Option<FigureRun>)> = figures
        .par_iter()
        .map(|&f| match run_figure(f) {
            Ok(run) => (f, write_figure(&run, &out_dir.join(f.name())), Some(run)),
            Err(e) => (
                f,
                Err(CliError::Runtime(format!("{f}: integration failed: {e}"))),
                None,
            ),
        })
        .collect();
    let mut first_error = None;
    for (figure, written, run) in runs {
        if let Some(run) = &run {
            for c in &run.checks {
                println!(
                    "{figure}: [{}] {} ({})",
                    if c.passed { "ok" } else { "FAILED" },
                    c.name,
                    c.detail
                );
            }
        }
        if let Err(e) = written {
            eprintln!("{figure}: {e}");
            first_error.get_or_insert(e);
        }
    }
    first_error.map_or(Ok(()), Err)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum Probe {
    Boundedness,
    Signs,
    EpsilonConvergence,
}

#[derive(Debug, Serialize)]
struct Property {
    name: &'static str,
    passed: bool,
}

#[derive(Debug, Serialize)]
struct ScanReport<T: Serialize> {
    probe: &'static str,
    seed: u64,
    passed: bool,
    properties: Vec<Property>,
    stats: T,
}

fn finish<T: Serialize>(
    probe: &'static str,
    seed: u64,
    properties: Vec<Property>,
    stats: T,
    out_dir: &Path,
) -> Result<(), CliError> {
    ensure_dir(out_dir)?;
    let report = ScanReport {
        probe,
        seed,
        passed: properties.iter().all(|p| p.passed),
        properties,
        stats,
    };
    let path = out_dir.join(format!("{probe}_report.json"));
    write_json(&path, &report)?;
    for p in &report.properties {
        println!(
            "{probe}: [{}] {}",
            if p.passed { "ok" } else { "FAILED" },
            p.name
        );
    }
    println!("report written to {}", path.display());
    Ok(())
}

pub fn scan(probe: Probe, config: &Path, out_dir: &Path) -> Result<(), CliError> {
    let scenario = Scenario::load(config)?;
    let params = scenario.params().map_err(CliError::Config)?;
    if params.l != KLEIN {
        return Err(CliError::Config(format!(
            "key 'model.l': probes are defined for l = {KLEIN}, got {}",
            params.l
        )));
    }
    let cfg = scenario.integrator_config();
    let seed = scenario.run.seed;
    let runtime = |e: dihedral_core::Error| CliError::Runtime(e.to_string());
    match probe {
        Probe::Boundedness => {
            let n = scenario.scan.n_ics;
            if n == 0 {
                return Err(CliError::Config(
                    "key 'scan.n_ics' must be at least 1".into(),
                ));
            }
            let stats =
                boundedness_probe(params.h, n, &cfg, seed, scenario.scan.include_homothetic)
                    .map_err(runtime)?;
            let properties = vec![
                Property {
                    name: "collision_genericity",
                    passed: stats.collided_fraction >= 0.95,
                },
                Property {
                    name: "all_bounded",
                    passed: stats.exceeding.is_empty() && stats.failed.is_empty(),
                },
            ];
            finish("boundedness", seed, properties, stats, out_dir)
        }
        Probe::Signs => {
            let stats = sign_region_check(scenario.scan.samples, seed);
            let properties = vec![Property {
                name: "no_sign_violations",
                passed: stats.violations() == 0,
            }];
            finish("signs", seed, properties, stats, out_dir)
        }
        Probe::EpsilonConvergence => {
            let state = scenario.initial_state()?;
            if scenario.scan.epsilons.len() < 3 {
                return Err(CliError::Config(
                    "key 'scan.epsilons' needs at least three smoothings".into(),
                ));
            }
            let stats = epsilon_convergence(
                state,
                params.h,
                &scenario.scan.epsilons,
                scenario.scan.delay,
                &cfg,
            )
            .map_err(runtime)?;
            let properties = vec![Property {
                name: "monotone_cauchy_differences",
                passed: stats.converging(),
            }];
            finish("epsilon_convergence", seed, properties, stats, out_dir)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_parsing() {
        assert_eq!(parse_grid("200x100").unwrap(), (200, 100));
        assert_eq!(parse_grid("3X2").unwrap(), (3, 2));
        assert!(parse_grid("1x5").is_err());
        assert!(parse_grid("12").is_err());
        assert!(parse_grid("ax4").is_err());
    }

    #[test]
    fn marching_squares_on_a_linear_field() {
        let rs = [0.0, 1.0, 2.0];
        let alphas = [0.0, 1.0];
        // zero line at r = 0.5
        let values: Vec<Vec<f64>> = rs.iter().map(|&r| vec![0.5 - r; 2]).collect();
        let segs = zero_level_segments(&rs, &alphas, &values);
        assert_eq!(segs.len(), 1);
        assert!((segs[0].r_start - 0.5).abs() < 1e-15 && (segs[0].r_end - 0.5).abs() < 1e-15);
    }

    #[test]
    fn marching_squares_saddle_gives_two_segments() {
        let values = vec![vec![1.0, -1.0], vec![-1.0, 1.0]];
        let segs = zero_level_segments(&[0.0, 1.0], &[0.0, 1.0], &values);
        assert_eq!(segs.len(), 2);
    }
}
