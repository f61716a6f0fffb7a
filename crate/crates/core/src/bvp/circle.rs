//! Dirichlet problems on the circle orbit with `u0 = u1`.
//!
//! The potential is then constant, `ξ = L`, and the system collapses to the
//! Riccati equation `L' + L² + λ = 0` with closure `∫₀¹ L = b − a`. Writing
//! `L = w'/w` turns it into `w'' = −λ w`, `w(0) = 1`, and the closure into
//! `w(1) = e^{b−a}` with `w > 0` on `[0, 1]`.

use alloc::boxed::Box;
use alloc::format;
use alloc::vec;

use crate::dynamics::{self, PhaseState, SystemParams, Trajectory};
use crate::error::{Error, Result};
use crate::homspace::HomSpaceSpec;
use crate::integrator::{IntegratorOptions, Termination};

const PHASES: usize = 64;

/// A continuous solution on `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CircleWitness {
    pub l0: f64,
    /// Integrated witness with the constant potential attached.
    pub trajectory: Trajectory,
    /// `|y(1) − b|`.
    pub closure_error: f64,
    /// Largest residual of the unreduced equations along the witness.
    pub residual: f64,
}

/// Every sampled phase of the tangent family `L = ω tan(ω(φ − t))` blows up
/// inside the interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CircleEvidence {
    /// Distance `π/ω` between consecutive poles.
    pub pole_spacing: f64,
    pub phases_checked: usize,
    pub all_blew_up: bool,
    /// Latest detected blow-up time over all phases.
    pub latest_blowup: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CircleVerdict {
    Solvable(Box<CircleWitness>),
    Unsolvable(CircleEvidence),
}

impl CircleVerdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            CircleVerdict::Solvable(_) => "solvable",
            CircleVerdict::Unsolvable(_) => "unsolvable",
        }
    }

    pub fn is_solvable(&self) -> bool {
        matches!(self, CircleVerdict::Solvable(_))
    }
}

// `w(1) = C + L0 S` for the fundamental pair of `w'' = −λ w` at t = 1.
fn fundamental_at_one(lambda: f64) -> (f64, f64) {
    if lambda > 0.0 {
        let w = libm::sqrt(lambda);
        (libm::cos(w), libm::sin(w) / w)
    } else if lambda < 0.0 {
        let w = libm::sqrt(-lambda);
        (libm::cosh(w), libm::sinh(w) / w)
    } else {
        (1.0, 1.0)
    }
}

/// Decides solvability of the circle Dirichlet problem with `y(0) = a`,
/// `y(1) = b` and `u ≡ u0`.
///
/// A continuous solution exists iff `S(1) > 0` for the sine-type solution
/// `S` of `w'' = −λ w`, i.e. iff `λ < π²`. In that case the unique `L(0)` is
/// integrated as a witness; otherwise the tangent family is integrated on a
/// grid of phases covering one period and each blow-up is recorded.
pub fn circle_nonexistence_check(
    lambda: f64,
    a: f64,
    b: f64,
    m: f64,
    u0: f64,
    opts: &IntegratorOptions,
) -> Result<CircleVerdict> {
    if ![lambda, a, b, u0].iter().all(|v| v.is_finite()) {
        return Err(Error::InvalidParameter("circle data must be finite".into()));
    }
    let params = SystemParams::new(m, lambda, 1.0)?;
    opts.validate()?;
    let space = HomSpaceSpec::circle();
    let (c1, s1) = fundamental_at_one(lambda);
    if s1 > 0.0 {
        let l0 = (libm::exp(b - a) - c1) / s1;
        let init = PhaseState::new(0.0, vec![a], vec![l0], l0);
        let traj = dynamics::integrate(&space, &params, &init, 1.0, opts)?;
        if traj.termination() != Termination::ReachedEnd {
            return Err(Error::ShotDiverged {
                t: traj.blowup_crossing().unwrap_or(traj.t_end()),
            });
        }
        let traj = traj.with_potential(u0)?;
        let residual = dynamics::qe_residual(&space, &params, &traj)?.max();
        return Ok(CircleVerdict::Solvable(Box::new(CircleWitness {
            l0,
            closure_error: libm::fabs(traj.last().y[0] - b),
            trajectory: traj,
            residual,
        })));
    }

    let omega = libm::sqrt(lambda);
    let spacing = core::f64::consts::PI / omega;
    let mut all = true;
    let mut latest = 0.0_f64;
    for j in 0..PHASES {
        let phi = (-0.5 + (j as f64 + 0.5) / PHASES as f64) * spacing;
        let l0 = omega * libm::tan(omega * phi);
        let init = PhaseState::new(0.0, vec![a], vec![l0], l0);
        let traj = dynamics::integrate(&space, &params, &init, 1.0, opts)?;
        match (traj.termination(), traj.blowup_crossing()) {
            (Termination::BlowUpDetected, Some(t)) if t < 1.0 => latest = latest.max(t),
            (term, _) => {
                all = false;
                if term == Termination::ReachedEnd {
                    return Err(Error::InvalidParameter(format!(
                        "phase {phi} reached t = 1 for lambda = {lambda}"
                    )));
                }
            }
        }
    }
    Ok(CircleVerdict::Unsolvable(CircleEvidence {
        pole_spacing: spacing,
        phases_checked: PHASES,
        all_blew_up: all,
        latest_blowup: latest,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn boundary_cases_of_the_sine_solution() {
        let (c, s) = fundamental_at_one(0.0);
        assert_eq!((c, s), (1.0, 1.0));
        let (_, s) = fundamental_at_one(core::f64::consts::PI * core::f64::consts::PI + 1e-9);
        assert!(s < 0.0);
        let (c, s) = fundamental_at_one(-1.0);
        assert!((c - libm::cosh(1.0)).abs() < 1e-15 && (s - libm::sinh(1.0)).abs() < 1e-15);
    }

    #[test]
    fn symmetric_witness_at_nine() {
        let v = circle_nonexistence_check(9.0, 0.0, 0.0, 0.0, 0.0, &IntegratorOptions::default())
            .unwrap();
        let CircleVerdict::Solvable(w) = v else {
            panic!("expected solvable")
        };
        assert!((w.l0 - 3.0 * libm::tan(1.5)).abs() < 1e-9 * w.l0);
    }
}
