//! Symmetric shooting on the round two-sphere orbit.
//!
//! With `m = λ = 0` and `h² = 1` the reduced system on `SO(3)/SO(2)` is
//!
//! ```text
//! ξ' = −2 (y')²,   y'' = e^{−2y} − ξ y'.
//! ```
//!
//! Data `y(½) = k1`, `y'(½) = 0`, `ξ(½) = 0` produce solutions with
//! `y(t) = y(1 − t)` and `ξ(t) = −ξ(1 − t)`, hence `y(0) = y(1)` and
//! `∫ξ = 0`. Two values of `k1` with the same `y(1)` give two solutions of
//! one Dirichlet problem.

use alloc::boxed::Box;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::dynamics::{self, PhaseState, SystemParams, Trajectory};
use crate::error::{Error, Result};
use crate::homspace::HomSpaceSpec;
use crate::integrator::{IntegratorOptions, Termination};

const FOLD_NOISE: f64 = 1e-9;
const BRACKET_WIDTH: f64 = 1e-6;
const LEVEL_TOL: f64 = 1e-9;
const MAX_BISECTIONS: usize = 200;

/// The two-sphere orbit in the normalization of the shooting equation
/// above. Its Ricci map is `e^{−2y}`, twice that of the unit-curvature
/// preset.
pub fn symmetric_shoot_space() -> HomSpaceSpec {
    HomSpaceSpec::new(vec![2], vec![2.0], &[], "sphere2")
        .expect("static data is valid")
        .with_monotypic_asserted(true)
}

fn shoot_params() -> SystemParams {
    SystemParams {
        m: 0.0,
        lambda: 0.0,
        h2: 1.0,
    }
}

/// Integrates from `t = ½` with `(y, L, ξ) = (k1, 0, 0)` to `t = 1` and
/// returns `y(1)` with the half trajectory.
pub fn symmetric_shoot(k1: f64, opts: &IntegratorOptions) -> Result<(f64, Trajectory)> {
    if !k1.is_finite() {
        return Err(Error::InvalidParameter("k1 must be finite".into()));
    }
    let space = symmetric_shoot_space();
    let init = PhaseState::new(0.5, vec![k1], vec![0.0], 0.0);
    let traj = dynamics::integrate(&space, &shoot_params(), &init, 1.0, opts)?;
    if traj.termination() != Termination::ReachedEnd {
        return Err(Error::ShotDiverged {
            t: traj.blowup_crossing().unwrap_or(traj.t_end()),
        });
    }
    Ok((traj.last().y[0], traj))
}

/// A symmetric shot extended to `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricSolution {
    pub k1: f64,
    pub y_end: f64,
    /// Integrated from the mirrored state at `t = 0`, with `u ≡ 0` attached.
    pub trajectory: Trajectory,
    /// `|y(0) − y(1)|` of the full trajectory.
    pub endpoint_gap: f64,
    /// `|∫₀¹ ξ|` of the full trajectory.
    pub integral_xi: f64,
    /// Largest deviation of the full trajectory from the reflection of the
    /// half shot, over the half-shot samples.
    pub mirror_error: f64,
}

/// Shoots from `t = ½`, reflects to `t = 0` via `y(0) = y(1)`,
/// `L(0) = −L(1)`, `ξ(0) = −ξ(1)`, and integrates the whole interval.
pub fn symmetric_solution(k1: f64, opts: &IntegratorOptions) -> Result<SymmetricSolution> {
    let (y_end, half) = symmetric_shoot(k1, opts)?;
    let end = half.last();
    let space = symmetric_shoot_space();
    let init = PhaseState::new(0.0, end.y.clone(), vec![-end.l[0]], -end.xi);
    let full = dynamics::integrate(&space, &shoot_params(), &init, 1.0, opts)?;
    if full.termination() != Termination::ReachedEnd {
        return Err(Error::ShotDiverged {
            t: full.blowup_crossing().unwrap_or(full.t_end()),
        });
    }
    let full = full.with_potential(0.0)?;
    let mut mirror_error = 0.0_f64;
    for s in half.samples() {
        let fwd = full.state_at(s.t)?;
        let back = full.state_at(1.0 - s.t)?;
        let errs = [
            fwd.y[0] - s.y[0],
            fwd.l[0] - s.l[0],
            fwd.xi - s.xi,
            back.y[0] - s.y[0],
            back.l[0] + s.l[0],
            back.xi + s.xi,
        ];
        for e in errs {
            mirror_error = mirror_error.max(libm::fabs(e));
        }
    }
    let last = full.last();
    Ok(SymmetricSolution {
        k1,
        y_end,
        endpoint_gap: libm::fabs(full.sample(0).y[0] - last.y[0]),
        integral_xi: libm::fabs(full.integral_xi(full.len() - 1)),
        trajectory: full,
        mirror_error,
    })
}

/// Evaluates independent shots. Implementations must return results in
/// input order.
pub trait ShotExecutor {
    fn map(&self, inputs: &[f64], f: &(dyn Fn(f64) -> Option<f64> + Sync)) -> Vec<Option<f64>>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl ShotExecutor for Sequential {
    fn map(&self, inputs: &[f64], f: &(dyn Fn(f64) -> Option<f64> + Sync)) -> Vec<Option<f64>> {
        inputs.iter().map(|&k| f(k)).collect()
    }
}

impl<E: ShotExecutor + ?Sized> ShotExecutor for Box<E> {
    fn map(&self, inputs: &[f64], f: &(dyn Fn(f64) -> Option<f64> + Sync)) -> Vec<Option<f64>> {
        (**self).map(inputs, f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanPoint {
    pub k1: f64,
    /// `None` when the shot blew up before `t = 1`.
    pub y_end: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FoldKind {
    Maximum,
    Minimum,
}

impl FoldKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            FoldKind::Maximum => "max",
            FoldKind::Minimum => "min",
        }
    }
}

/// A local extremum of `k1 ↦ y(1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fold {
    pub kind: FoldKind,
    /// Grid index of the extremal sample.
    pub index: usize,
    /// Extremum location refined by golden-section search.
    pub k1: f64,
    pub y_end: f64,
}

/// Two shots on opposite sides of a fold hitting the same `y(1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelPair {
    pub level: f64,
    pub k1_a: f64,
    pub y_a: f64,
    pub bracket_a: (f64, f64),
    pub k1_b: f64,
    pub y_b: f64,
    pub bracket_b: (f64, f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanResult {
    pub points: Vec<ScanPoint>,
    pub folds: Vec<Fold>,
    pub pairs: Vec<LevelPair>,
}

impl ScanResult {
    pub fn converged(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.points
            .iter()
            .filter_map(|p| p.y_end.map(|y| (p.k1, y)))
    }
}

fn shot(k1: f64, opts: &IntegratorOptions) -> Option<f64> {
    symmetric_shoot(k1, opts).ok().map(|(y, _)| y)
}

/// Shoots on `steps + 1` equally spaced values of `k1`, reports every local
/// extremum of `y(1)` and, for each fold, one pair of `k1` values on either
/// side that reach a common level.
pub fn nonuniqueness_scan(
    k1_min: f64,
    k1_max: f64,
    steps: usize,
    opts: &IntegratorOptions,
    exec: &dyn ShotExecutor,
) -> Result<ScanResult> {
    if !(k1_min.is_finite() && k1_max.is_finite() && k1_min < k1_max) {
        return Err(Error::InvalidParameter(format!(
            "need finite k1_min < k1_max, got [{k1_min}, {k1_max}]"
        )));
    }
    if steps < 2 {
        return Err(Error::InvalidParameter(format!(
            "steps = {steps} must be >= 2"
        )));
    }
    opts.validate()?;
    let dk = (k1_max - k1_min) / steps as f64;
    let grid: Vec<f64> = (0..=steps)
        .map(|j| {
            if j == steps {
                k1_max
            } else {
                k1_min + j as f64 * dk
            }
        })
        .collect();
    let values = exec.map(&grid, &|k| shot(k, opts));
    let points: Vec<ScanPoint> = grid
        .iter()
        .zip(&values)
        .map(|(&k1, &y_end)| ScanPoint { k1, y_end })
        .collect();
    if values.iter().all(Option::is_none) {
        return Err(Error::AllShotsDiverged);
    }

    // Work on maximal runs of consecutive converged shots.
    let mut folds = Vec::new();
    let mut pairs = Vec::new();
    let mut j = 0;
    while j < points.len() {
        if points[j].y_end.is_none() {
            j += 1;
            continue;
        }
        let start = j;
        while j < points.len() && points[j].y_end.is_some() {
            j += 1;
        }
        let run: Vec<(usize, f64, f64)> = (start..j)
            .map(|i| (i, points[i].k1, points[i].y_end.unwrap()))
            .collect();
        let run_folds = detect_folds(&run);
        for (pos, kind) in &run_folds {
            folds.push(refine_fold(&run, *pos, *kind, opts));
        }
        for (f, (pos, kind)) in run_folds.iter().enumerate() {
            let left_end = if f == 0 { 0 } else { run_folds[f - 1].0 };
            let right_end = run_folds.get(f + 1).map_or(run.len() - 1, |r| r.0);
            if let Some(pair) = level_pair(&run, *pos, *kind, left_end, right_end, opts) {
                pairs.push(pair);
            }
        }
    }
    Ok(ScanResult {
        points,
        folds,
        pairs,
    })
}

// Positions within `run` where consecutive differences change sign.
// Differences below the noise floor carry no sign.
fn detect_folds(run: &[(usize, f64, f64)]) -> Vec<(usize, FoldKind)> {
    let mut out = Vec::new();
    let mut last_sign = 0.0;
    let mut last_pos = 0;
    for w in 0..run.len().saturating_sub(1) {
        let diff = run[w + 1].2 - run[w].2;
        if libm::fabs(diff) <= FOLD_NOISE {
            continue;
        }
        let sign = diff.signum();
        if last_sign != 0.0 && sign != last_sign {
            // Extremum is the sample between the two monotone pieces with the
            // extreme value.
            let kind = if last_sign > 0.0 {
                FoldKind::Maximum
            } else {
                FoldKind::Minimum
            };
            let pick = (last_pos + 1..=w)
                .max_by(|&a, &b| {
                    let (va, vb) = (run[a].2, run[b].2);
                    let ord = va.partial_cmp(&vb).unwrap();
                    if kind == FoldKind::Maximum {
                        ord
                    } else {
                        ord.reverse()
                    }
                })
                .unwrap_or(w);
            out.push((pick, kind));
        }
        last_sign = sign;
        last_pos = w;
    }
    out
}

fn refine_fold(
    run: &[(usize, f64, f64)],
    pos: usize,
    kind: FoldKind,
    opts: &IntegratorOptions,
) -> Fold {
    let (index, k_grid, y_grid) = run[pos];
    let lo = run[pos.saturating_sub(1)].1;
    let hi = run[(pos + 1).min(run.len() - 1)].1;
    let sign = if kind == FoldKind::Maximum { -1.0 } else { 1.0 };
    let obj = |k: f64| shot(k, opts).map(|y| sign * y);
    let inv_phi = (libm::sqrt(5.0) - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = match (obj(c), obj(d)) {
        (Some(fc), Some(fd)) => (fc, fd),
        _ => {
            return Fold {
                kind,
                index,
                k1: k_grid,
                y_end: y_grid,
            }
        }
    };
    while b - a > BRACKET_WIDTH {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            match obj(c) {
                Some(v) => fc = v,
                None => break,
            }
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            match obj(d) {
                Some(v) => fd = v,
                None => break,
            }
        }
    }
    let (k1, val) = if fc < fd { (c, fc) } else { (d, fd) };
    if sign * val <= sign * y_grid {
        // Golden-section never does worse than the grid on a unimodal bracket
        // but guard against a noisy one.
        Fold {
            kind,
            index,
            k1,
            y_end: sign * val,
        }
    } else {
        Fold {
            kind,
            index,
            k1: k_grid,
            y_end: y_grid,
        }
    }
}

fn level_pair(
    run: &[(usize, f64, f64)],
    pos: usize,
    kind: FoldKind,
    left_end: usize,
    right_end: usize,
    opts: &IntegratorOptions,
) -> Option<LevelPair> {
    if pos == left_end || pos == right_end {
        return None;
    }
    let y_fold = run[pos].2;
    let (yl, yr) = (run[left_end].2, run[right_end].2);
    let reach = match kind {
        FoldKind::Minimum => yl.min(yr),
        FoldKind::Maximum => yl.max(yr),
    };
    if libm::fabs(reach - y_fold) <= FOLD_NOISE {
        return None;
    }
    let level = y_fold + 0.5 * (reach - y_fold);
    let on_side = |from: usize, to: usize| -> Option<(f64, f64)> {
        // First grid interval between `from` and `to` stepping away from the
        // fold whose values straddle the level.
        let step: isize = if to > from { 1 } else { -1 };
        let mut i = from as isize;
        while i != to as isize {
            let nxt = i + step;
            let (a, b) = (run[i as usize], run[nxt as usize]);
            if (a.2 - level) * (b.2 - level) <= 0.0 {
                return Some((a.1.min(b.1), a.1.max(b.1)));
            }
            i = nxt;
        }
        None
    };
    let bracket_a = on_side(pos, left_end)?;
    let bracket_b = on_side(pos, right_end)?;
    let (k1_a, y_a, bracket_a) = bisect_level(bracket_a, level, opts)?;
    let (k1_b, y_b, bracket_b) = bisect_level(bracket_b, level, opts)?;
    Some(LevelPair {
        level,
        k1_a,
        y_a,
        bracket_a,
        k1_b,
        y_b,
        bracket_b,
    })
}

fn bisect_level(
    (mut lo, mut hi): (f64, f64),
    level: f64,
    opts: &IntegratorOptions,
) -> Option<(f64, f64, (f64, f64))> {
    let mut f_lo = shot(lo, opts)? - level;
    let f_hi = shot(hi, opts)? - level;
    if f_lo * f_hi > 0.0 {
        return None;
    }
    let mut best = if libm::fabs(f_lo) < libm::fabs(f_hi) {
        (lo, f_lo)
    } else {
        (hi, f_hi)
    };
    for _ in 0..MAX_BISECTIONS {
        if hi - lo <= BRACKET_WIDTH && libm::fabs(best.1) <= LEVEL_TOL {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let f_mid = shot(mid, opts)? - level;
        if libm::fabs(f_mid) < libm::fabs(best.1) {
            best = (mid, f_mid);
        }
        if f_mid == 0.0 {
            lo = mid;
            hi = mid;
            break;
        }
        if f_lo * f_mid < 0.0 {
            hi = mid;
        } else {
            lo = mid;
            f_lo = f_mid;
        }
    }
    Some((best.0, best.1 + level, (lo, hi)))
}
