//! The reduced first-order system on the phase space `(y, L, ξ)`:
//!
//! ```text
//! ξ' = −tr(L²) − m (tr L − ξ)² − h²λ
//! L' = −ξ L + h² r(y) − h²λ
//! y' = L
//! ```
//!
//! Traces are weighted by the summand dimensions, `tr X = Σ d_i X_i`. The
//! potential is not a state variable; `u' = tr L − ξ` is integrated on demand
//! by [`reconstruct_u`].

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::homspace::HomSpaceSpec;
use crate::integrator::{self, DenseSegment, IntegratorOptions, OdeSystem, Solution, Termination};
use crate::singularity;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemParams {
    /// Bakry–Emery parameter, `m ≥ 0`.
    pub m: f64,
    pub lambda: f64,
    /// Squared lapse, `h² ≥ 0`; zero selects the limit system.
    pub h2: f64,
}

impl SystemParams {
    pub fn new(m: f64, lambda: f64, h2: f64) -> Result<Self> {
        let p = SystemParams { m, lambda, h2 };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.m.is_finite() && self.m >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "m = {} must be >= 0",
                self.m
            )));
        }
        if !self.lambda.is_finite() {
            return Err(Error::InvalidParameter("lambda must be finite".into()));
        }
        if !(self.h2.is_finite() && self.h2 >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "h2 = {} must be >= 0",
                self.h2
            )));
        }
        Ok(())
    }

    pub fn with_h2(self, h2: f64) -> Self {
        SystemParams { h2, ..self }
    }
}

/// A point `(t, y, L, ξ)` of the phase space.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseState {
    pub t: f64,
    pub y: Vec<f64>,
    pub l: Vec<f64>,
    pub xi: f64,
}

impl PhaseState {
    pub fn new(t: f64, y: Vec<f64>, l: Vec<f64>, xi: f64) -> Self {
        PhaseState { t, y, l, xi }
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn is_finite(&self) -> bool {
        self.t.is_finite()
            && self.xi.is_finite()
            && self.y.iter().chain(&self.l).all(|v| v.is_finite())
    }

    fn from_flat(t: f64, x: &[f64], n: usize) -> Self {
        PhaseState {
            t,
            y: x[..n].to_vec(),
            l: x[n..2 * n].to_vec(),
            xi: x[2 * n],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseDerivative {
    pub dy: Vec<f64>,
    pub dl: Vec<f64>,
    pub dxi: f64,
}

/// `Σ d_i x_i`.
pub fn weighted_trace(d: &[u32], x: &[f64]) -> f64 {
    d.iter().zip(x).map(|(di, xi)| *di as f64 * xi).sum()
}

/// `Σ d_i x_i²`.
pub fn weighted_trace_sq(d: &[u32], x: &[f64]) -> f64 {
    d.iter().zip(x).map(|(di, xi)| *di as f64 * xi * xi).sum()
}

fn check_dims(space: &HomSpaceSpec, state: &PhaseState) -> Result<()> {
    let n = space.n();
    if state.y.len() != n || state.l.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: state.y.len().max(state.l.len()),
        });
    }
    Ok(())
}

/// Right-hand side of the reduced system at `state`.
pub fn vector_field(
    space: &HomSpaceSpec,
    params: &SystemParams,
    state: &PhaseState,
) -> Result<PhaseDerivative> {
    check_dims(space, state)?;
    if !state.is_finite() {
        return Err(Error::NonFiniteState { t: state.t });
    }
    let n = space.n();
    let mut x = Vec::with_capacity(2 * n + 2);
    x.extend_from_slice(&state.y);
    x.extend_from_slice(&state.l);
    x.push(state.xi);
    x.push(0.0);
    let mut dx = vec![0.0; 2 * n + 2];
    QeSystem { space, params }.rhs(state.t, &x, &mut dx)?;
    Ok(PhaseDerivative {
        dy: dx[..n].to_vec(),
        dl: dx[n..2 * n].to_vec(),
        dxi: dx[2 * n],
    })
}

/// The reduced system on the flat layout `[y, L, ξ, ∫ξ]`.
pub(crate) struct QeSystem<'a> {
    pub space: &'a HomSpaceSpec,
    pub params: &'a SystemParams,
}

impl OdeSystem for QeSystem<'_> {
    fn dim(&self) -> usize {
        2 * self.space.n() + 2
    }

    fn rhs(&self, _t: f64, x: &[f64], dx: &mut [f64]) -> Result<()> {
        let n = self.space.n();
        let d = self.space.d();
        let (y, rest) = x.split_at(n);
        let (l, rest) = rest.split_at(n);
        let xi = rest[0];
        let SystemParams { m, lambda, h2 } = *self.params;
        let tr = weighted_trace(d, l);
        let tr2 = weighted_trace_sq(d, l);
        let (dy, drest) = dx.split_at_mut(n);
        let (dl, drest) = drest.split_at_mut(n);
        dy.copy_from_slice(l);
        if h2 != 0.0 {
            self.space.ricci_map_into(y, dl)?;
        } else {
            dl.fill(0.0);
        }
        for i in 0..n {
            dl[i] = -xi * l[i] + h2 * dl[i] - h2 * lambda;
        }
        let skew = tr - xi;
        drest[0] = -tr2 - m * skew * skew - h2 * lambda;
        drest[1] = xi;
        Ok(())
    }
}

/// An integrated solution with dense output.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    space: HomSpaceSpec,
    params: SystemParams,
    sol: Solution,
    u: Option<Vec<f64>>,
}

impl Trajectory {
    pub fn space(&self) -> &HomSpaceSpec {
        &self.space
    }

    pub fn params(&self) -> &SystemParams {
        &self.params
    }

    pub fn n(&self) -> usize {
        self.space.n()
    }

    pub fn len(&self) -> usize {
        self.sol.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sol.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.sol.times
    }

    pub fn t_start(&self) -> f64 {
        self.sol.times[0]
    }

    pub fn t_end(&self) -> f64 {
        *self.sol.times.last().expect("trajectory is nonempty")
    }

    pub fn termination(&self) -> Termination {
        self.sol.termination
    }

    pub fn accepted_steps(&self) -> usize {
        self.sol.accepted_steps
    }

    pub fn rejected_steps(&self) -> usize {
        self.sol.rejected_steps
    }

    /// Where the blow-up threshold was crossed, if it was.
    pub fn blowup_crossing(&self) -> Option<f64> {
        self.sol.blowup_crossing
    }

    pub fn sample(&self, k: usize) -> PhaseState {
        PhaseState::from_flat(self.sol.times[k], self.sol.state(k), self.n())
    }

    pub fn samples(&self) -> impl Iterator<Item = PhaseState> + '_ {
        (0..self.len()).map(|k| self.sample(k))
    }

    pub fn last(&self) -> PhaseState {
        self.sample(self.len() - 1)
    }

    /// `∫ ξ` from the first sample to sample `k`, carried by the integrator.
    pub fn integral_xi(&self, k: usize) -> f64 {
        self.sol.state(k)[2 * self.n() + 1]
    }

    pub fn u(&self) -> Option<&[f64]> {
        self.u.as_deref()
    }

    pub(crate) fn segments(&self) -> &[DenseSegment] {
        &self.sol.segments
    }

    /// Attaches the reconstructed potential with `u(first sample) = u0`.
    pub fn with_potential(mut self, u0: f64) -> Result<Self> {
        self.u = Some(reconstruct_u(&self, u0)?);
        Ok(self)
    }

    /// Copy with `ξ` shifted by `delta` at every sample and in the dense
    /// output. Derivatives are unchanged. Useful for residual diagnostics.
    pub fn with_xi_offset(&self, delta: f64) -> Self {
        let mut out = self.clone();
        let idx = 2 * self.n();
        let dim = out.sol.dim;
        for k in 0..out.sol.len() {
            out.sol.states[k * dim + idx] += delta;
        }
        for seg in &mut out.sol.segments {
            seg.shift_component(idx, delta);
        }
        out
    }

    fn contains(&self, t: f64) -> bool {
        let (a, b) = (self.t_start(), self.t_end());
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        t >= lo && t <= hi
    }

    /// Dense segment containing `t`.
    pub(crate) fn segment_at(&self, t: f64) -> Result<&DenseSegment> {
        if !self.contains(t) || self.sol.segments.is_empty() {
            return Err(Error::OutOfRange {
                t,
                start: self.t_start(),
                end: self.t_end(),
            });
        }
        let forward = self.t_end() >= self.t_start();
        let segs = &self.sol.segments;
        let idx = segs.partition_point(|s| {
            if forward {
                s.t_end() < t
            } else {
                s.t_end() > t
            }
        });
        Ok(&segs[idx.min(segs.len() - 1)])
    }

    fn flat_at(&self, t: f64) -> Result<Vec<f64>> {
        let seg = self.segment_at(t)?;
        let mut buf = vec![0.0; self.sol.dim];
        seg.eval_into(t, &mut buf);
        Ok(buf)
    }

    /// Interpolated state at `t`.
    pub fn state_at(&self, t: f64) -> Result<PhaseState> {
        Ok(PhaseState::from_flat(t, &self.flat_at(t)?, self.n()))
    }

    /// Time derivative of the dense interpolant at `t`.
    pub fn derivative_at(&self, t: f64) -> Result<PhaseDerivative> {
        let seg = self.segment_at(t)?;
        let n = self.n();
        let mut buf = vec![0.0; self.sol.dim];
        seg.derivative_into(t, &mut buf);
        Ok(PhaseDerivative {
            dy: buf[..n].to_vec(),
            dl: buf[n..2 * n].to_vec(),
            dxi: buf[2 * n],
        })
    }
}

/// Integrates from `initial` to `t_end` with adaptive Dormand–Prince steps,
/// stopping early on blow-up of the functional `M` or step collapse.
pub fn integrate(
    space: &HomSpaceSpec,
    params: &SystemParams,
    initial: &PhaseState,
    t_end: f64,
    opts: &IntegratorOptions,
) -> Result<Trajectory> {
    params.validate()?;
    check_dims(space, initial)?;
    if !initial.is_finite() {
        return Err(Error::NonFiniteState { t: initial.t });
    }
    let n = space.n();
    let mut x0 = Vec::with_capacity(2 * n + 2);
    x0.extend_from_slice(&initial.y);
    x0.extend_from_slice(&initial.l);
    x0.push(initial.xi);
    x0.push(0.0);
    let sys = QeSystem { space, params };
    let sol = integrator::integrate_system(&sys, initial.t, &x0, t_end, opts, |_, x| {
        singularity::functional_flat(space, x).unwrap_or(f64::INFINITY)
    })?;
    Ok(Trajectory {
        space: space.clone(),
        params: *params,
        sol,
        u: None,
    })
}

// Three-point Gauss–Legendre nodes on [0, 1].
const GL_NODES: [f64; 3] = [0.112_701_665_379_258_31, 0.5, 0.887_298_334_620_741_7];
const GL_WEIGHTS: [f64; 3] = [5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0];

/// Potential at every sample from `u' = tr L − ξ`, integrated on each dense
/// segment with three-point Gauss–Legendre, so that `u(first) = u0`.
pub fn reconstruct_u(traj: &Trajectory, u0: f64) -> Result<Vec<f64>> {
    if traj.is_empty() {
        return Err(Error::EmptyTrajectory);
    }
    let n = traj.n();
    let d = traj.space.d();
    let mut buf = vec![0.0; traj.sol.dim];
    let mut u = Vec::with_capacity(traj.len());
    let mut acc = u0;
    u.push(acc);
    for seg in traj.segments() {
        let mut s = 0.0;
        for (node, w) in GL_NODES.iter().zip(GL_WEIGHTS) {
            seg.eval_into(seg.t_start() + node * seg.step(), &mut buf);
            s += w * (weighted_trace(d, &buf[n..2 * n]) - buf[2 * n]);
        }
        acc += s * seg.step();
        u.push(acc);
    }
    Ok(u)
}

/// Largest absolute residuals of the unreduced equations (scalar line and
/// the `n` component lines).
#[derive(Debug, Clone, PartialEq)]
pub struct QeResidual {
    pub first: f64,
    pub second: Vec<f64>,
}

impl QeResidual {
    pub fn max(&self) -> f64 {
        self.second.iter().fold(self.first, |a, b| a.max(*b))
    }
}

/// Residuals of the unreduced second-order equations along `traj`.
///
/// Evaluated at every sample. The derivatives `y'' = L'` and `ξ'` are the
/// dense-output derivatives at the nodes, which are the right-hand sides
/// computed during integration; `u' = tr L − ξ` and `u'' = tr L' − ξ'`.
pub fn qe_residual(
    space: &HomSpaceSpec,
    params: &SystemParams,
    traj: &Trajectory,
) -> Result<QeResidual> {
    if traj.u.is_none() {
        return Err(Error::MissingPotential);
    }
    if traj.is_empty() {
        return Err(Error::EmptyTrajectory);
    }
    let n = space.n();
    if traj.n() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: traj.n(),
        });
    }
    let d = space.d();
    let SystemParams { m, lambda, h2 } = *params;
    let mut res = QeResidual {
        first: 0.0,
        second: vec![0.0; n],
    };
    let mut x = vec![0.0; traj.sol.dim];
    let mut dx = vec![0.0; traj.sol.dim];
    let mut r = vec![0.0; n];
    let mut eval = |seg: &DenseSegment, t: f64, res: &mut QeResidual| -> Result<()> {
        seg.eval_into(t, &mut x);
        seg.derivative_into(t, &mut dx);
        let (y, l, xi) = (&x[..n], &x[n..2 * n], x[2 * n]);
        let (dl, dxi) = (&dx[n..2 * n], dx[2 * n]);
        let tr = weighted_trace(d, l);
        let up = tr - xi;
        let upp = weighted_trace(d, dl) - dxi;
        let first = -(0..n)
            .map(|k| d[k] as f64 * (dl[k] + l[k] * l[k]))
            .sum::<f64>()
            + upp
            - m * up * up
            - h2 * lambda;
        res.first = res.first.max(libm::fabs(first));
        if h2 != 0.0 {
            space.ricci_map_into(y, &mut r)?;
        } else {
            r.fill(0.0);
        }
        for i in 0..n {
            let second = h2 * r[i] - l[i] * tr + up * l[i] - dl[i] - h2 * lambda;
            res.second[i] = res.second[i].max(libm::fabs(second));
        }
        Ok(())
    };
    for seg in traj.segments() {
        eval(seg, seg.t_start(), &mut res)?;
    }
    if let Some(seg) = traj.segments().last() {
        eval(seg, seg.t_end(), &mut res)?;
    }
    Ok(res)
}

/// The Einstein constant of the warped fibre attached to `(g, u)`,
///
/// ```text
/// μ = v v'' + v v' Σ d_i y_i' + (1/m − 1) v'² + λ v²,   v = e^{−m u},
/// ```
///
/// evaluated at every sample with derivatives in arclength `s = h t`; at
/// `h² = 0` derivatives are taken in `t`. The second derivative of `u` is
/// taken from the scalar line of the unreduced equations, so it is algebraic
/// in the state.
pub fn mu_invariant(params: &SystemParams, traj: &Trajectory, u: &[f64]) -> Result<Vec<f64>> {
    let SystemParams { m, lambda, h2 } = *params;
    if !(m > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "mu requires m > 0, got m = {m}"
        )));
    }
    if u.len() != traj.len() {
        return Err(Error::DimensionMismatch {
            expected: traj.len(),
            got: u.len(),
        });
    }
    let d = traj.space.d();
    let mut out = Vec::with_capacity(u.len());
    for (k, uk) in u.iter().enumerate() {
        let state = traj.sample(k);
        let der = vector_field(&traj.space, params, &state)?;
        let tr = weighted_trace(d, &state.l);
        let up = tr - state.xi;
        let upp = (0..state.n())
            .map(|i| d[i] as f64 * (der.dl[i] + state.l[i] * state.l[i]))
            .sum::<f64>()
            + m * up * up
            + h2 * lambda;
        let v = libm::exp(-m * uk);
        let vp = -m * up * v;
        let vpp = (m * m * up * up - m * upp) * v;
        let scale = if h2 > 0.0 { h2 } else { 1.0 };
        let mu = (v * vpp + v * vp * tr + (1.0 / m - 1.0) * vp * vp) / scale + lambda * v * v;
        out.push(mu);
    }
    Ok(out)
}
