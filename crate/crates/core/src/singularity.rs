//! Blow-up diagnostics.
//!
//! The functional `M ≥ 0` with `M² = ξ² + tr(L²) + R(y)` is finite exactly as
//! long as a solution can be continued. Near a singular time `t_s` the
//! interesting quantity is `M(t)·|t − t_s|`, bounded whenever `M` grows no
//! faster than `1/|t − t_s|`; for spaces with every summand of dimension at
//! least two and `m > 0` this is the expected behaviour, and
//! [`analyze_blowup`] flags any run fitting a faster rate.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::dynamics::{
    self, weighted_trace, weighted_trace_sq, PhaseState, SystemParams, Trajectory,
};
use crate::error::{Error, Result};
use crate::homspace::HomSpaceSpec;
use crate::integrator::{IntegratorOptions, Termination};

/// `M` on the flat integrator layout `[y, L, ξ, ...]`.
pub(crate) fn functional_flat(space: &HomSpaceSpec, x: &[f64]) -> Result<f64> {
    let n = space.n();
    let big = space.big_r(&x[..n])?;
    let xi = x[2 * n];
    Ok(libm::sqrt(
        xi * xi + weighted_trace_sq(space.d(), &x[n..2 * n]) + big,
    ))
}

/// `M(state)` and `M·(t − origin)`.
pub fn blowup_functional(
    space: &HomSpaceSpec,
    state: &PhaseState,
    origin: f64,
) -> Result<(f64, f64)> {
    if state.n() != space.n() {
        return Err(Error::DimensionMismatch {
            expected: space.n(),
            got: state.n(),
        });
    }
    let big = space.big_r(&state.y)?;
    let m = libm::sqrt(state.xi * state.xi + weighted_trace_sq(space.d(), &state.l) + big);
    Ok((m, m * (state.t - origin)))
}

/// `dM/dt` along the flow, from `M M' = ξ ξ' + tr(L L') + ½ ∇R · L`.
pub fn functional_derivative(
    space: &HomSpaceSpec,
    params: &SystemParams,
    state: &PhaseState,
) -> Result<f64> {
    let (m, _) = blowup_functional(space, state, 0.0)?;
    if m == 0.0 {
        return Ok(0.0);
    }
    let der = dynamics::vector_field(space, params, state)?;
    let grad = space.big_r_gradient(&state.y)?;
    let d = space.d();
    let tr_ll: f64 = (0..state.n())
        .map(|i| d[i] as f64 * state.l[i] * der.dl[i])
        .sum();
    let grad_l: f64 = grad.iter().zip(&state.l).map(|(g, l)| g * l).sum();
    Ok((state.xi * der.dxi + tr_ll + 0.5 * grad_l) / m)
}

/// Empirical growth constant `s` with `|M'| ≤ s M²` along `traj`:
/// `max |M'|/M²` plus a 10% margin. The maximum is taken over the dense
/// output, 16 points per step, so that it does not depend on where the
/// integrator happened to place its samples.
pub fn growth_constant(
    space: &HomSpaceSpec,
    params: &SystemParams,
    traj: &Trajectory,
) -> Result<f64> {
    const PER_STEP: usize = 16;
    let mut s: f64 = 0.0;
    let mut visit = |state: &PhaseState| -> Result<()> {
        let (m, _) = blowup_functional(space, state, 0.0)?;
        if m > 0.0 {
            let dm = functional_derivative(space, params, state)?;
            s = s.max(libm::fabs(dm) / (m * m));
        }
        Ok(())
    };
    visit(&traj.sample(0))?;
    for seg in traj.segments() {
        for j in 1..=PER_STEP {
            let t = if j == PER_STEP {
                seg.t_end()
            } else {
                seg.t_start() + seg.step() * j as f64 / PER_STEP as f64
            };
            visit(&traj.state_at(t)?)?;
        }
    }
    Ok(1.1 * s)
}

/// `(M, M·(t − origin))` at every sample.
pub fn functional_series(traj: &Trajectory, origin: f64) -> Result<Vec<(f64, f64)>> {
    traj.samples()
        .map(|s| blowup_functional(traj.space(), &s, origin))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

impl Direction {
    fn sign(self) -> f64 {
        match self {
            Direction::Forward => 1.0,
            Direction::Backward => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlowupOptions {
    pub integrator: IntegratorOptions,
    /// Integration runs at most this far from the seed time.
    pub horizon: f64,
    /// Log-spaced evaluation points in the fit decade.
    pub fit_points: usize,
    /// Fitted exponents above this are reported as exceeding the `1/t` rate.
    pub rate_limit: f64,
}

impl Default for BlowupOptions {
    fn default() -> Self {
        BlowupOptions {
            integrator: IntegratorOptions::with_tolerance(1e-10),
            horizon: 2.0,
            fit_points: 40,
            rate_limit: 1.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Diagnostic {
    /// Some summand has dimension 1, so the rate bound need not apply.
    DimensionHypothesisNotMet,
    /// `m = 0`; the rate bound is only asserted for `m > 0`.
    ZeroBakryEmeryParameter,
    /// The fitted exponent exceeds the configured limit on a space where the
    /// `1/t` bound is expected.
    RateBoundViolated { exponent: f64, limit: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlowupReport {
    /// Estimated singular time.
    pub t_sing: f64,
    /// `sup M(t)·|t − t_sing|` over samples.
    pub sup_mt: f64,
    /// `p` in `M ≈ C |t − t_sing|^{−p}`.
    pub exponent: f64,
    pub prefactor: f64,
    /// RMS residual of the log-log fit.
    pub fit_residual: f64,
    pub fit_samples: usize,
    /// Window `(near, far)` of `|t − t_sing|` used for the fit.
    pub fit_window: (f64, f64),
    pub termination: Termination,
    pub diagnostics: Vec<Diagnostic>,
}

impl BlowupReport {
    pub fn rate_bound_violated(&self) -> bool {
        self.diagnostics
            .iter()
            .any(|d| matches!(d, Diagnostic::RateBoundViolated { .. }))
    }
}

/// Least-squares fit of `log M = log C − p log x`; returns `(p, C, rms)`.
pub fn fit_power_law(x: &[f64], m: &[f64]) -> Result<(f64, f64, f64)> {
    if x.len() != m.len() || x.len() < 2 {
        return Err(Error::InvalidParameter(
            "power-law fit needs at least two points".into(),
        ));
    }
    let lx: Vec<f64> = x.iter().map(|v| libm::log(*v)).collect();
    let lm: Vec<f64> = m.iter().map(|v| libm::log(*v)).collect();
    let k = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / k;
    let mm = lm.iter().sum::<f64>() / k;
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxm: f64 = lx.iter().zip(&lm).map(|(a, b)| (a - mx) * (b - mm)).sum();
    if !(sxx > 0.0) {
        return Err(Error::InvalidParameter(
            "power-law fit needs distinct abscissae".into(),
        ));
    }
    let slope = sxm / sxx;
    let intercept = mm - slope * mx;
    let rss: f64 = lx
        .iter()
        .zip(&lm)
        .map(|(a, b)| {
            let e = b - (intercept + slope * a);
            e * e
        })
        .sum();
    Ok((-slope, libm::exp(intercept), libm::sqrt(rss / k)))
}

/// Singular time from the collapse of the last five accepted step endpoints,
/// fit to geometric decay and summed to infinity.
pub fn estimate_singular_time(times: &[f64]) -> f64 {
    let last = *times.last().expect("nonempty");
    if times.len() < 6 {
        return last;
    }
    let tail = &times[times.len() - 5..];
    let deltas: Vec<f64> = tail.windows(2).map(|w| w[1] - w[0]).collect();
    if deltas.contains(&0.0) {
        return last;
    }
    let logs: Vec<f64> = deltas.iter().map(|d| libm::log(libm::fabs(*d))).collect();
    let k = logs.len() as f64;
    let mean_j = (k - 1.0) / 2.0;
    let mean_l = logs.iter().sum::<f64>() / k;
    let (mut num, mut den) = (0.0, 0.0);
    for (j, l) in logs.iter().enumerate() {
        num += (j as f64 - mean_j) * (l - mean_l);
        den += (j as f64 - mean_j) * (j as f64 - mean_j);
    }
    let ratio = libm::exp(num / den);
    if !(ratio > 0.0 && ratio < 1.0) {
        return last;
    }
    last + deltas[deltas.len() - 1] * ratio / (1.0 - ratio)
}

/// Integrates from `seed` in `direction` until the solution blows up, then
/// estimates the singular time, `sup M·|t − t_s|`, and the rate exponent.
pub fn analyze_blowup(
    space: &HomSpaceSpec,
    params: &SystemParams,
    seed: &PhaseState,
    direction: Direction,
    opts: &BlowupOptions,
) -> Result<(BlowupReport, Trajectory)> {
    if !(opts.horizon > 0.0) {
        return Err(Error::InvalidOptions("horizon must be positive".into()));
    }
    if opts.fit_points < 10 {
        return Err(Error::InvalidOptions(
            "fit_points must be at least 10".into(),
        ));
    }
    let t_end = seed.t + direction.sign() * opts.horizon;
    let traj = dynamics::integrate(space, params, seed, t_end, &opts.integrator)?;
    if traj.termination() == Termination::ReachedEnd {
        return Err(Error::NoSingularity { t_end });
    }
    let t_sing = estimate_singular_time(traj.times());

    let series = functional_series(&traj, t_sing)?;
    let sup_mt = series
        .iter()
        .zip(traj.times())
        .map(|((m, _), t)| m * libm::fabs(t - t_sing))
        .fold(0.0, f64::max);

    let cutoff = 0.1 * opts.integrator.blowup_threshold;
    let near_idx = series
        .iter()
        .rposition(|(m, _)| *m < cutoff)
        .ok_or_else(|| Error::InvalidParameter("no sample below the fit cutoff".into()))?;
    let near = libm::fabs(traj.times()[near_idx] - t_sing);
    let far_limit = libm::fabs(traj.t_start() - t_sing);
    let far = (10.0 * near).min(far_limit);
    if !(near > 0.0 && far > near) {
        return Err(Error::InvalidParameter(format!(
            "degenerate fit window [{near}, {far}] around t_sing = {t_sing}"
        )));
    }
    let mut xs = Vec::with_capacity(opts.fit_points);
    let mut ms = Vec::with_capacity(opts.fit_points);
    let ratio = far / near;
    for j in 0..opts.fit_points {
        let x = near * libm::pow(ratio, j as f64 / (opts.fit_points - 1) as f64);
        let t = t_sing - direction.sign() * x;
        let Ok(state) = traj.state_at(t) else {
            continue;
        };
        let (m, _) = blowup_functional(space, &state, t_sing)?;
        if m > 0.0 {
            xs.push(x);
            ms.push(m);
        }
    }
    if xs.len() < 10 {
        return Err(Error::InvalidParameter(format!(
            "only {} fit samples inside the trajectory",
            xs.len()
        )));
    }
    let (exponent, prefactor, fit_residual) = fit_power_law(&xs, &ms)?;

    let mut diagnostics = Vec::new();
    let flags = space.hypothesis_flags();
    if !flags.dimension_at_least_two {
        diagnostics.push(Diagnostic::DimensionHypothesisNotMet);
    }
    if params.m == 0.0 {
        diagnostics.push(Diagnostic::ZeroBakryEmeryParameter);
    }
    if flags.dimension_at_least_two && exponent > opts.rate_limit {
        diagnostics.push(Diagnostic::RateBoundViolated {
            exponent,
            limit: opts.rate_limit,
        });
    }
    let report = BlowupReport {
        t_sing,
        sup_mt,
        exponent,
        prefactor,
        fit_residual,
        fit_samples: xs.len(),
        fit_window: (near, far),
        termination: traj.termination(),
        diagnostics,
    };
    Ok((report, traj))
}

/// Sample maximizing `M(t)·(t − origin)` over samples with `t ≥ origin`.
/// Returns `(t, value)`, or `None` when no sample lies at or after `origin`.
pub fn anchor_scan(traj: &Trajectory, origin: f64) -> Result<Option<(f64, f64)>> {
    let mut best: Option<(f64, f64)> = None;
    for s in traj.samples() {
        if s.t < origin {
            continue;
        }
        let (_, mt) = blowup_functional(traj.space(), &s, origin)?;
        if best.is_none_or(|(_, v)| mt > v) {
            best = Some((s.t, mt));
        }
    }
    Ok(best)
}

/// One rescaled sample with derivatives in the rescaled time `s`.
#[derive(Debug, Clone, PartialEq)]
pub struct RescaledSample {
    pub s: f64,
    pub y: Vec<f64>,
    pub l: Vec<f64>,
    pub xi: f64,
    pub dy: Vec<f64>,
    pub dl: Vec<f64>,
    pub dxi: f64,
}

/// The solution viewed at scale `1/M(t_anchor)` around `t_anchor`:
/// `ỹ(s) = y(t_a + s/M_a)`, `L̃ = L/M_a`, `ξ̃ = ξ/M_a`.
#[derive(Debug, Clone, PartialEq)]
pub struct RescaledTrajectory {
    pub t_anchor: f64,
    pub m_anchor: f64,
    pub samples: Vec<RescaledSample>,
}

impl RescaledTrajectory {
    /// `M̃` of a rescaled sample: `√(ξ̃² + tr L̃² + R(ỹ)/M_a²)`.
    pub fn functional(&self, space: &HomSpaceSpec, sample: &RescaledSample) -> Result<f64> {
        let big = space.big_r(&sample.y)? / (self.m_anchor * self.m_anchor);
        Ok(libm::sqrt(
            sample.xi * sample.xi + weighted_trace_sq(space.d(), &sample.l) + big,
        ))
    }

    /// Largest residual of the rescaled system
    ///
    /// ```text
    /// ξ̃' = −tr(L̃²) − m (tr L̃ − ξ̃)² − h²λ/M_a²
    /// L̃' = −ξ̃ L̃ + h² (r(ỹ) − λ)/M_a²
    /// ỹ' = L̃
    /// ```
    pub fn residual(&self, space: &HomSpaceSpec, params: &SystemParams) -> Result<f64> {
        let d = space.d();
        let ma2 = self.m_anchor * self.m_anchor;
        let SystemParams { m, lambda, h2 } = *params;
        let mut worst: f64 = 0.0;
        for s in &self.samples {
            let r = space.ricci_map(&s.y)?;
            let skew = weighted_trace(d, &s.l) - s.xi;
            let e_xi = s.dxi + weighted_trace_sq(d, &s.l) + m * skew * skew + h2 * lambda / ma2;
            worst = worst.max(libm::fabs(e_xi));
            for (i, ri) in r.iter().enumerate() {
                let e_l = s.dl[i] + s.xi * s.l[i] - h2 * (ri - lambda) / ma2;
                let e_y = s.dy[i] - s.l[i];
                worst = worst.max(libm::fabs(e_l)).max(libm::fabs(e_y));
            }
        }
        Ok(worst)
    }
}

/// Resamples `traj` on `points` equally spaced rescaled times in
/// `[−window, window]`, dropping those that fall outside the trajectory.
/// States come from the dense output; derivatives are the right-hand side
/// at those states, which is far more accurate than differentiating the
/// interpolant when `M` varies across the window.
pub fn rescale(
    traj: &Trajectory,
    t_anchor: f64,
    window: f64,
    points: usize,
) -> Result<RescaledTrajectory> {
    let anchor = traj.state_at(t_anchor)?;
    let (m_anchor, _) = blowup_functional(traj.space(), &anchor, 0.0)?;
    if !(m_anchor > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "M(t_anchor) = {m_anchor} must be positive"
        )));
    }
    if !(window >= 0.0) {
        return Err(Error::InvalidParameter(
            "window must be non-negative".into(),
        ));
    }
    let grid: Vec<f64> = if window == 0.0 || points < 2 {
        vec![0.0]
    } else {
        (0..points)
            .map(|j| -window + 2.0 * window * j as f64 / (points - 1) as f64)
            .collect()
    };
    let mut samples = Vec::with_capacity(grid.len());
    for s in grid {
        let t = t_anchor + s / m_anchor;
        let Ok(state) = traj.state_at(t) else {
            continue;
        };
        let der = dynamics::vector_field(traj.space(), traj.params(), &state)?;
        samples.push(RescaledSample {
            s,
            y: state.y,
            l: state.l.iter().map(|v| v / m_anchor).collect(),
            xi: state.xi / m_anchor,
            dy: der.dy.iter().map(|v| v / m_anchor).collect(),
            dl: der.dl.iter().map(|v| v / (m_anchor * m_anchor)).collect(),
            dxi: der.dxi / (m_anchor * m_anchor),
        });
    }
    Ok(RescaledTrajectory {
        t_anchor,
        m_anchor,
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn functional_examples() {
        let t2 = HomSpaceSpec::torus(2).unwrap();
        for t in [0.01, 0.3, 2.0] {
            let s = PhaseState::new(t, vec![0.7], vec![1.0 / (2.0 * t)], 1.0 / t);
            let (_, mt) = blowup_functional(&t2, &s, 0.0).unwrap();
            assert_relative_eq!(mt, libm::sqrt(1.5), epsilon = 1e-14);
        }
        let zero = PhaseState::new(0.0, vec![0.0], vec![0.0], 0.0);
        assert_eq!(blowup_functional(&t2, &zero, 0.0).unwrap().0, 0.0);
        let s2 = HomSpaceSpec::sphere2();
        assert_eq!(blowup_functional(&s2, &zero, 0.0).unwrap().0, 1.0);
    }

    #[test]
    fn power_law_fit_recovers_exponent() {
        let xs: Vec<f64> = (0..20)
            .map(|j| 1e-6 * libm::pow(10.0, j as f64 / 19.0))
            .collect();
        let ms: Vec<f64> = xs.iter().map(|x| 3.0 * libm::pow(*x, -1.3)).collect();
        let (p, c, rms) = fit_power_law(&xs, &ms).unwrap();
        assert_relative_eq!(p, 1.3, epsilon = 1e-10);
        assert_relative_eq!(c, 3.0, epsilon = 1e-8);
        assert!(rms < 1e-10);
    }

    #[test]
    fn geometric_step_collapse() {
        // Steps halving toward t = 1.
        let times: Vec<f64> = (0..12).map(|k| 1.0 - libm::pow(0.5, k as f64)).collect();
        assert_relative_eq!(estimate_singular_time(&times), 1.0, epsilon = 1e-14);
        let back: Vec<f64> = times.iter().map(|t| 1.0 - t).collect();
        assert!(estimate_singular_time(&back).abs() < 1e-14);
    }

    #[test]
    fn rescale_window_zero_is_normalized() {
        let s2 = HomSpaceSpec::sphere2();
        let p = SystemParams::new(1.0, 0.3, 1.0).unwrap();
        let init = PhaseState::new(0.0, vec![0.2], vec![0.5], 1.0);
        let traj = dynamics::integrate(
            &s2,
            &p,
            &init,
            1.0,
            &IntegratorOptions::with_tolerance(1e-10),
        )
        .unwrap();
        let r = rescale(&traj, 0.4, 0.0, 50).unwrap();
        assert_eq!(r.samples.len(), 1);
        assert!((r.functional(&s2, &r.samples[0]).unwrap() - 1.0).abs() < 1e-12);
        assert!(rescale(&traj, 1.5, 1.0, 10).is_err());
    }

    #[test]
    fn regular_run_has_no_singularity() {
        let t = HomSpaceSpec::torus(1).unwrap();
        let p = SystemParams::new(0.0, 0.0, 1.0).unwrap();
        let seed = PhaseState::new(0.0, vec![0.0], vec![0.0], 0.0);
        assert!(matches!(
            analyze_blowup(&t, &p, &seed, Direction::Forward, &BlowupOptions::default()),
            Err(Error::NoSingularity { .. })
        ));
    }
}
