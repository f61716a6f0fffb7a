//! Dormand–Prince 5(4) with the standard fourth-order continuous extension.
//!
//! The integrator runs in either time direction, keeps one dense segment per
//! accepted step, and watches a caller-supplied scalar monitor (the blow-up
//! functional) after every accepted step.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// A first-order system `x' = f(t, x)`.
pub trait OdeSystem {
    fn dim(&self) -> usize;
    fn rhs(&self, t: f64, x: &[f64], dx: &mut [f64]) -> Result<()>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Integration stops when the monitor exceeds this value.
    pub blowup_threshold: f64,
    /// Smallest admissible step, as a fraction of `|t_end − t_0|`.
    pub min_step: f64,
    pub max_steps: usize,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        IntegratorOptions {
            rel_tol: 1e-10,
            abs_tol: 1e-10,
            blowup_threshold: 1e8,
            min_step: 1e-14,
            max_steps: 200_000,
        }
    }
}

impl IntegratorOptions {
    pub fn with_tolerance(tol: f64) -> Self {
        IntegratorOptions {
            rel_tol: tol,
            abs_tol: tol,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.rel_tol) || !positive(self.abs_tol) {
            return Err(Error::InvalidOptions(format!(
                "tolerances must be positive (rel_tol = {}, abs_tol = {})",
                self.rel_tol, self.abs_tol
            )));
        }
        if !(self.blowup_threshold > 0.0) {
            return Err(Error::InvalidOptions(
                "blowup_threshold must be positive".into(),
            ));
        }
        if !(self.min_step > 0.0 && self.min_step < 1.0) {
            return Err(Error::InvalidOptions("min_step must lie in (0, 1)".into()));
        }
        if self.max_steps == 0 {
            return Err(Error::InvalidOptions("max_steps must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    ReachedEnd,
    BlowUpDetected,
    StepUnderflow,
}

impl Termination {
    pub fn as_str(&self) -> &'static str {
        match self {
            Termination::ReachedEnd => "reached_end",
            Termination::BlowUpDetected => "blow_up_detected",
            Termination::StepUnderflow => "step_underflow",
        }
    }
}

/// Continuous extension over one accepted step `[t0, t0 + h]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseSegment {
    t0: f64,
    h: f64,
    /// Five coefficient rows of length `dim`, stored contiguously.
    coeffs: Vec<f64>,
}

impl DenseSegment {
    pub fn t_start(&self) -> f64 {
        self.t0
    }

    pub fn t_end(&self) -> f64 {
        self.t0 + self.h
    }

    pub fn step(&self) -> f64 {
        self.h
    }

    fn dim(&self) -> usize {
        self.coeffs.len() / 5
    }

    pub fn eval_into(&self, t: f64, out: &mut [f64]) {
        let n = self.dim();
        let th = (t - self.t0) / self.h;
        let th1 = 1.0 - th;
        let c = &self.coeffs;
        for i in 0..n {
            out[i] = c[i]
                + th * (c[n + i] + th1 * (c[2 * n + i] + th * (c[3 * n + i] + th1 * c[4 * n + i])));
        }
    }

    /// Time derivative of the interpolant.
    pub fn derivative_into(&self, t: f64, out: &mut [f64]) {
        let n = self.dim();
        let th = (t - self.t0) / self.h;
        let th1 = 1.0 - th;
        let c = &self.coeffs;
        for i in 0..n {
            let (r2, r3, r4, r5) = (c[n + i], c[2 * n + i], c[3 * n + i], c[4 * n + i]);
            let cc = r4 + th1 * r5;
            let b = r3 + th * cc;
            let a = r2 + th1 * b;
            let db = cc - th * r5;
            let da = -b + th1 * db;
            out[i] = (a + th * da) / self.h;
        }
    }

    /// Adds a constant to component `index` of the interpolant.
    pub(crate) fn shift_component(&mut self, index: usize, delta: f64) {
        self.coeffs[index] += delta;
    }
}

/// Raw output of [`integrate_system`].
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub dim: usize,
    pub times: Vec<f64>,
    /// Sample states, `dim` entries per time.
    pub states: Vec<f64>,
    pub segments: Vec<DenseSegment>,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    pub termination: Termination,
    /// Where the monitor crossed the threshold inside the last step.
    pub blowup_crossing: Option<f64>,
}

impl Solution {
    pub fn state(&self, k: usize) -> &[f64] {
        &self.states[k * self.dim..(k + 1) * self.dim]
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

// Dormand–Prince tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;

struct Workspace {
    k: [Vec<f64>; 7],
    tmp: Vec<f64>,
    x1: Vec<f64>,
    err: Vec<f64>,
}

impl Workspace {
    fn new(n: usize) -> Self {
        Workspace {
            k: core::array::from_fn(|_| vec![0.0; n]),
            tmp: vec![0.0; n],
            x1: vec![0.0; n],
            err: vec![0.0; n],
        }
    }
}

fn scaled_norm(v: &[f64], x: &[f64], opts: &IntegratorOptions) -> f64 {
    let n = v.len() as f64;
    let s: f64 = v
        .iter()
        .zip(x)
        .map(|(vi, xi)| {
            let sc = opts.abs_tol + opts.rel_tol * libm::fabs(*xi);
            (vi / sc) * (vi / sc)
        })
        .sum();
    libm::sqrt(s / n)
}

fn initial_step<S: OdeSystem>(
    sys: &S,
    t0: f64,
    x0: &[f64],
    f0: &[f64],
    span: f64,
    opts: &IntegratorOptions,
) -> f64 {
    let n = x0.len();
    let d0 = scaled_norm(x0, x0, opts);
    let d1 = scaled_norm(f0, x0, opts);
    let mut h0 = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    };
    h0 = h0.min(libm::fabs(span));
    let dir = span.signum();
    let mut x1 = vec![0.0; n];
    for i in 0..n {
        x1[i] = x0[i] + dir * h0 * f0[i];
    }
    let mut f1 = vec![0.0; n];
    let d2 = match sys.rhs(t0 + dir * h0, &x1, &mut f1) {
        Ok(()) => {
            let diff: Vec<f64> = f1.iter().zip(f0).map(|(a, b)| a - b).collect();
            scaled_norm(&diff, x0, opts) / h0
        }
        Err(_) => f64::INFINITY,
    };
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        libm::pow(0.01 / d1.max(d2), 0.2)
    };
    (100.0 * h0).min(h1).min(libm::fabs(span))
}

/// One trial step from `(t, x)` with first stage `f0`. Fills `ws.x1`,
/// `ws.k`, `ws.err` and returns the scaled error norm.
fn trial_step<S: OdeSystem>(
    sys: &S,
    t: f64,
    x: &[f64],
    h: f64,
    ws: &mut Workspace,
    opts: &IntegratorOptions,
) -> Result<f64> {
    let n = x.len();
    let Workspace { k, tmp, x1, err } = ws;
    let (k1, rest) = k.split_at_mut(1);
    let k1 = &k1[0];
    let [k2, k3, k4, k5, k6, k7] = rest else {
        unreachable!()
    };
    for i in 0..n {
        tmp[i] = x[i] + h * A21 * k1[i];
    }
    sys.rhs(t + C2 * h, tmp, k2)?;
    for i in 0..n {
        tmp[i] = x[i] + h * (A31 * k1[i] + A32 * k2[i]);
    }
    sys.rhs(t + C3 * h, tmp, k3)?;
    for i in 0..n {
        tmp[i] = x[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
    }
    sys.rhs(t + C4 * h, tmp, k4)?;
    for i in 0..n {
        tmp[i] = x[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
    }
    sys.rhs(t + C5 * h, tmp, k5)?;
    for i in 0..n {
        tmp[i] = x[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
    }
    sys.rhs(t + h, tmp, k6)?;
    for i in 0..n {
        x1[i] = x[i] + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
    }
    if x1.iter().any(|v| !v.is_finite()) {
        return Ok(f64::INFINITY);
    }
    sys.rhs(t + h, x1, k7)?;
    let mut s = 0.0;
    for i in 0..n {
        err[i] = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
        let sc = opts.abs_tol + opts.rel_tol * libm::fabs(x[i]).max(libm::fabs(x1[i]));
        s += (err[i] / sc) * (err[i] / sc);
    }
    let e = libm::sqrt(s / n as f64);
    Ok(if e.is_finite() { e } else { f64::INFINITY })
}

fn dense_segment(t: f64, h: f64, x: &[f64], ws: &Workspace) -> DenseSegment {
    let n = x.len();
    let mut coeffs = vec![0.0; 5 * n];
    let k = &ws.k;
    for i in 0..n {
        let ydiff = ws.x1[i] - x[i];
        let bspl = h * k[0][i] - ydiff;
        coeffs[i] = x[i];
        coeffs[n + i] = ydiff;
        coeffs[2 * n + i] = bspl;
        coeffs[3 * n + i] = ydiff - h * k[6][i] - bspl;
        coeffs[4 * n + i] = h
            * (D1 * k[0][i]
                + D3 * k[2][i]
                + D4 * k[3][i]
                + D5 * k[4][i]
                + D6 * k[5][i]
                + D7 * k[6][i]);
    }
    DenseSegment { t0: t, h, coeffs }
}

/// Integrates `sys` from `(t0, x0)` toward `t_end`.
///
/// `monitor` is evaluated at every accepted state; once it exceeds
/// `opts.blowup_threshold` (or stops being finite) the run ends with
/// [`Termination::BlowUpDetected`] and the crossing time is located on the
/// last dense segment by bisection.
pub fn integrate_system<S, F>(
    sys: &S,
    t0: f64,
    x0: &[f64],
    t_end: f64,
    opts: &IntegratorOptions,
    mut monitor: F,
) -> Result<Solution>
where
    S: OdeSystem,
    F: FnMut(f64, &[f64]) -> f64,
{
    opts.validate()?;
    let n = sys.dim();
    if x0.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: x0.len(),
        });
    }
    if !(t0.is_finite() && t_end.is_finite()) || t_end == t0 {
        return Err(Error::InvalidParameter(format!(
            "integration interval [{t0}, {t_end}] is empty or non-finite"
        )));
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteState { t: t0 });
    }
    let span = t_end - t0;
    let dir = span.signum();
    let h_min = opts.min_step * libm::fabs(span);

    let mut sol = Solution {
        dim: n,
        times: vec![t0],
        states: x0.to_vec(),
        segments: Vec::new(),
        accepted_steps: 0,
        rejected_steps: 0,
        termination: Termination::ReachedEnd,
        blowup_crossing: None,
    };
    let m0 = monitor(t0, x0);
    if !(m0 <= opts.blowup_threshold) {
        sol.termination = Termination::BlowUpDetected;
        sol.blowup_crossing = Some(t0);
        return Ok(sol);
    }

    let mut ws = Workspace::new(n);
    let mut t = t0;
    let mut x = x0.to_vec();
    sys.rhs(t, &x, &mut ws.k[0])?;
    let mut h = dir * initial_step(sys, t, &x, &ws.k[0], span, opts);
    let mut last_rejected = false;

    loop {
        if sol.accepted_steps + sol.rejected_steps >= opts.max_steps {
            return Err(Error::InvalidOptions(format!(
                "max_steps = {} exhausted at t = {t}",
                opts.max_steps
            )));
        }
        let remaining = t_end - t;
        let mut last = false;
        if libm::fabs(h) >= libm::fabs(remaining) * 0.999_999 {
            h = remaining;
            last = true;
        }
        if libm::fabs(h) < h_min && !last {
            sol.termination = Termination::StepUnderflow;
            return Ok(sol);
        }

        let err = match trial_step(sys, t, &x, h, &mut ws, opts) {
            Ok(e) => e,
            Err(Error::DomainOverflow { .. }) => f64::INFINITY,
            Err(e) => return Err(e),
        };

        if err <= 1.0 {
            let seg = dense_segment(t, h, &x, &ws);
            let t_new = if last { t_end } else { t + h };
            let m = monitor(t_new, &ws.x1);
            sol.accepted_steps += 1;
            sol.times.push(t_new);
            sol.states.extend_from_slice(&ws.x1);
            x.copy_from_slice(&ws.x1);
            t = t_new;
            let fsal = core::mem::take(&mut ws.k[6]);
            ws.k[6] = core::mem::replace(&mut ws.k[0], fsal);
            if !(m <= opts.blowup_threshold) {
                sol.blowup_crossing =
                    Some(locate_crossing(&seg, opts.blowup_threshold, &mut monitor));
                sol.segments.push(seg);
                sol.termination = Termination::BlowUpDetected;
                return Ok(sol);
            }
            sol.segments.push(seg);
            if last {
                sol.termination = Termination::ReachedEnd;
                return Ok(sol);
            }
            let mut fac = if err == 0.0 {
                FAC_MAX
            } else {
                (SAFETY * libm::pow(err, -0.2)).clamp(FAC_MIN, FAC_MAX)
            };
            if last_rejected {
                fac = fac.min(1.0);
            }
            h *= fac;
            last_rejected = false;
        } else {
            sol.rejected_steps += 1;
            let fac = if err.is_finite() {
                (SAFETY * libm::pow(err, -0.2)).clamp(FAC_MIN, 1.0)
            } else {
                0.25
            };
            h *= fac;
            last_rejected = true;
        }
    }
}

fn locate_crossing<F: FnMut(f64, &[f64]) -> f64>(
    seg: &DenseSegment,
    threshold: f64,
    monitor: &mut F,
) -> f64 {
    let mut lo = seg.t_start();
    let mut hi = seg.t_end();
    let mut buf = vec![0.0; seg.dim()];
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        seg.eval_into(mid, &mut buf);
        if monitor(mid, &buf) <= threshold {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
