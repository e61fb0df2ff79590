//! Dormand-Prince 5(4) with PI step control and cubic Hermite dense output.

use crate::error::{Error, Result};
use crate::model::{hermite, Sample};

pub trait System {
    fn dim(&self) -> usize;
    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) -> Result<()>;
    /// Whether component `i` takes part in local error control.
    fn controlled(&self, _i: usize) -> bool {
        true
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Options {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    pub max_steps: usize,
}

impl Default for Options {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            max_step: f64::INFINITY,
            max_steps: 5_000_000,
        }
    }
}

/// Decision returned by the per-step hook.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Control {
    Continue,
    /// Truncate the last step at the given time and stop.
    StopAt(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Reached,
    Stopped,
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub samples: Vec<Sample>,
    pub outcome: Outcome,
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 5.0;
const BETA: f64 = 0.04;

/// Integrates from `t0` to `t_end` (either direction). `hook` sees every
/// accepted step as `(previous, current)` and may stop the integration.
pub fn solve<S, H>(
    sys: &S,
    t0: f64,
    y0: &[f64],
    t_end: f64,
    opts: &Options,
    mut hook: H,
) -> Result<Solution>
where
    S: System + ?Sized,
    H: FnMut(&Sample, &Sample) -> Result<Control>,
{
    let n = sys.dim();
    assert_eq!(y0.len(), n, "state dimension");
    let mut dy0 = vec![0.0; n];
    sys.rhs(t0, y0, &mut dy0)?;
    let mut samples = vec![Sample {
        t: t0,
        y: y0.to_vec(),
        dy: dy0,
    }];
    if t_end == t0 {
        return Ok(Solution {
            samples,
            outcome: Outcome::Reached,
        });
    }
    let dir = (t_end - t0).signum();

    let mut k: Vec<Vec<f64>> = vec![vec![0.0; n]; 7];
    let mut ytmp = vec![0.0; n];
    let mut ynew = vec![0.0; n];
    let mut h = initial_step(sys, &samples[0], t_end, opts, &mut ytmp, &mut ynew)?;
    let mut err_old: f64 = 1e-4;
    let mut rejected = false;
    let mut last_error: Option<Error> = None;

    for _ in 0..opts.max_steps {
        let cur = samples.last().expect("non-empty");
        let t = cur.t;
        let remaining = (t_end - t).abs();
        if remaining <= 1e-15 * t.abs().max(1.0) {
            return Ok(Solution {
                samples,
                outcome: Outcome::Reached,
            });
        }
        let mut step = h.min(opts.max_step).min(remaining);
        let min_step = 1e-14 * t.abs().max(1.0);
        if step < min_step {
            let state = cur.y.clone();
            return Err(match last_error {
                Some(e) => Error::DomainViolation {
                    t,
                    reason: e.to_string(),
                    state,
                },
                None => Error::StepUnderflow { t, step, state },
            });
        }
        if remaining - step < 1e-12 * step {
            step = remaining;
        }

        k[0].copy_from_slice(&cur.dy);
        let mut stage_failed = None;
        for s in 1..7 {
            for i in 0..n {
                let mut acc = 0.0;
                for (j, kj) in k.iter().enumerate().take(s) {
                    acc += A[s][j] * kj[i];
                }
                ytmp[i] = cur.y[i] + dir * step * acc;
            }
            if let Err(e) = sys.rhs(t + dir * C[s] * step, &ytmp, &mut k[s]) {
                stage_failed = Some(e);
                break;
            }
        }
        if let Some(e) = stage_failed {
            last_error = Some(e);
            h = step * 0.25;
            rejected = true;
            continue;
        }
        // stage 7 evaluated at the 5th order solution (FSAL)
        ynew.copy_from_slice(&ytmp);

        let mut sum = 0.0;
        let mut count = 0usize;
        for i in 0..n {
            if !sys.controlled(i) {
                continue;
            }
            let mut e = 0.0;
            for (j, kj) in k.iter().enumerate() {
                e += E[j] * kj[i];
            }
            let sc = opts.abs_tol + opts.rel_tol * cur.y[i].abs().max(ynew[i].abs());
            let x = step * e / sc;
            sum += x * x;
            count += 1;
        }
        let err = (sum / count.max(1) as f64).sqrt();

        if !err.is_finite() {
            h = step * 0.25;
            rejected = true;
            continue;
        }
        if err <= 1.0 {
            let mut fac = SAFETY * err.max(1e-10).powf(-0.2 + 0.75 * BETA) * err_old.powf(BETA);
            fac = fac.clamp(FAC_MIN, FAC_MAX);
            if rejected {
                fac = fac.min(1.0);
            }
            err_old = err.max(1e-4);
            rejected = false;
            last_error = None;
            let next = Sample {
                t: if step == remaining {
                    t_end
                } else {
                    t + dir * step
                },
                y: ynew.clone(),
                dy: k[6].clone(),
            };
            let control = hook(cur, &next)?;
            match control {
                Control::Continue => samples.push(next),
                Control::StopAt(ts) => {
                    let cut = truncate(sys, cur, &next, ts);
                    samples.push(cut);
                    return Ok(Solution {
                        samples,
                        outcome: Outcome::Stopped,
                    });
                }
            }
            h = step * fac;
        } else {
            let fac = (SAFETY * err.powf(-0.2)).max(FAC_MIN);
            h = step * fac;
            rejected = true;
        }
    }
    let last = samples.last().expect("non-empty");
    Err(Error::StepBudget {
        t: last.t,
        steps: opts.max_steps,
        state: last.y.clone(),
    })
}

fn truncate<S: System + ?Sized>(sys: &S, a: &Sample, b: &Sample, ts: f64) -> Sample {
    if ts == b.t {
        return b.clone();
    }
    let y = hermite(a, b, ts);
    let mut dy = vec![0.0; y.len()];
    if sys.rhs(ts, &y, &mut dy).is_err() {
        dy = hermite_derivative(a, b, ts);
    }
    Sample { t: ts, y, dy }
}

fn hermite_derivative(a: &Sample, b: &Sample, t: f64) -> Vec<f64> {
    let h = b.t - a.t;
    let th = (t - a.t) / h;
    let d00 = (6.0 * th * th - 6.0 * th) / h;
    let d10 = 3.0 * th * th - 4.0 * th + 1.0;
    let d01 = -d00;
    let d11 = 3.0 * th * th - 2.0 * th;
    (0..a.y.len())
        .map(|k| d00 * a.y[k] + d10 * a.dy[k] + d01 * b.y[k] + d11 * b.dy[k])
        .collect()
}

fn initial_step<S: System + ?Sized>(
    sys: &S,
    s0: &Sample,
    t_end: f64,
    opts: &Options,
    y1: &mut [f64],
    f1: &mut [f64],
) -> Result<f64> {
    let n = s0.y.len();
    let dir = (t_end - s0.t).signum();
    let (mut d0, mut d1) = (0.0, 0.0);
    for i in 0..n {
        let sc = opts.abs_tol + opts.rel_tol * s0.y[i].abs();
        d0 += (s0.y[i] / sc).powi(2);
        d1 += (s0.dy[i] / sc).powi(2);
    }
    let (d0, d1) = ((d0 / n as f64).sqrt(), (d1 / n as f64).sqrt());
    let h0 = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    };
    let h0 = h0.min(opts.max_step).min((t_end - s0.t).abs());
    for ((y, &y0), &dy0) in y1.iter_mut().zip(s0.y.iter()).zip(s0.dy.iter()) {
        *y = y0 + dir * h0 * dy0;
    }
    if sys.rhs(s0.t + dir * h0, y1, f1).is_err() {
        return Ok(h0 * 1e-3);
    }
    let mut d2 = 0.0;
    for ((&f, &y0), &dy0) in f1.iter().zip(s0.y.iter()).zip(s0.dy.iter()) {
        let sc = opts.abs_tol + opts.rel_tol * y0.abs();
        d2 += ((f - dy0) / sc).powi(2);
    }
    let d2 = (d2 / n as f64).sqrt() / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    Ok((100.0 * h0).min(h1).min(opts.max_step))
}

/// First time in `(a.t, b.t]` where `g` along the Hermite interpolant changes
/// sign relative to `g(a)`, localized to `tol`.
pub fn first_crossing(a: &Sample, b: &Sample, g: impl Fn(&[f64]) -> f64, tol: f64) -> Option<f64> {
    const PIECES: usize = 8;
    let ga = g(&a.y);
    let s0 = ga.signum();
    let mut lo = a.t;
    for i in 1..=PIECES {
        let hi = if i == PIECES {
            b.t
        } else {
            a.t + (b.t - a.t) * i as f64 / PIECES as f64
        };
        let yh = if i == PIECES {
            b.y.clone()
        } else {
            hermite(a, b, hi)
        };
        let gh = g(&yh);
        if gh.signum() != s0 || gh == 0.0 {
            return Some(bisect_time(a, b, &g, lo, hi, s0, tol));
        }
        lo = hi;
    }
    None
}

fn bisect_time(
    a: &Sample,
    b: &Sample,
    g: &impl Fn(&[f64]) -> f64,
    mut lo: f64,
    mut hi: f64,
    s0: f64,
    tol: f64,
) -> f64 {
    while (hi - lo).abs() > tol {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        let gm = g(&hermite(a, b, mid));
        if gm.signum() == s0 && gm != 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}
