//! Dirichlet problems by shooting.
//!
//! Prescribing `y(0) = a`, `y(1) = b`, `u(0) = u0`, `u(1) = u1` is equivalent,
//! for the reduced system, to `y(0) = a`, `y(1) = b`, `∫₀¹ ξ = c` with
//! `c = Σ d_i (b_i − a_i) − (u1 − u0)`. The unknowns are `L(0)` and `ξ(0)`.
//!
//! [`solve_dirichlet`] follows a two-stage path from the exactly known zero
//! solution at `(p, h²) = (0, 0)`: first the boundary data are deformed,
//! `y(1) = a + p(b − a)` and `∫ξ = p c` for `p: 0 → 1` at `h² = 0`, then `h²`
//! is raised to its target at `p = 1`. Each continuation step is a damped
//! Newton solve warm-started from the previous point.

mod circle;
mod newton;
mod sphere;

pub use circle::{circle_nonexistence_check, CircleEvidence, CircleVerdict, CircleWitness};
pub use sphere::{
    nonuniqueness_scan, symmetric_shoot, symmetric_shoot_space, symmetric_solution, Fold, FoldKind,
    LevelPair, ScanPoint, ScanResult, Sequential, ShotExecutor, SymmetricSolution,
};

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::dynamics::{self, PhaseState, SystemParams, Trajectory};
use crate::error::{ContinuationStage, Error, Result};
use crate::homspace::HomSpaceSpec;
use crate::integrator::{IntegratorOptions, Termination};

/// Boundary values for `y` and the potential.
#[derive(Debug, Clone, PartialEq)]
pub struct DirichletData {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub u0: f64,
    pub u1: f64,
}

impl DirichletData {
    pub fn new(a: Vec<f64>, b: Vec<f64>, u0: f64, u1: f64) -> Result<Self> {
        if a.len() != b.len() {
            return Err(Error::DimensionMismatch {
                expected: a.len(),
                got: b.len(),
            });
        }
        if a.iter().chain(&b).chain([&u0, &u1]).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(
                "boundary data must be finite".into(),
            ));
        }
        Ok(DirichletData { a, b, u0, u1 })
    }

    /// Homogeneous data `a = b = 0`, `u0 = u1 = 0`.
    pub fn zero(n: usize) -> Self {
        DirichletData {
            a: vec![0.0; n],
            b: vec![0.0; n],
            u0: 0.0,
            u1: 0.0,
        }
    }

    pub fn n(&self) -> usize {
        self.a.len()
    }

    /// Integral constraint `c = Σ d_i (b_i − a_i) − (u1 − u0)`.
    pub fn c(&self, d: &[u32]) -> f64 {
        d.iter()
            .zip(self.a.iter().zip(&self.b))
            .map(|(di, (a, b))| *di as f64 * (b - a))
            .sum::<f64>()
            - (self.u1 - self.u0)
    }

    /// `y(1)` target at homotopy parameter `p`.
    pub fn target(&self, p: f64) -> Vec<f64> {
        self.a
            .iter()
            .zip(&self.b)
            .map(|(a, b)| a + p * (b - a))
            .collect()
    }

    fn check(&self, space: &HomSpaceSpec) -> Result<()> {
        if self.n() != space.n() {
            return Err(Error::DimensionMismatch {
                expected: space.n(),
                got: self.n(),
            });
        }
        Ok(())
    }
}

/// Initial slopes `L(0)` and `ξ(0)` parametrizing the shooting map.
#[derive(Debug, Clone, PartialEq)]
pub struct ShootingUnknowns {
    pub l0: Vec<f64>,
    pub xi0: f64,
}

impl ShootingUnknowns {
    pub fn zero(n: usize) -> Self {
        ShootingUnknowns {
            l0: vec![0.0; n],
            xi0: 0.0,
        }
    }

    fn to_vec(&self) -> Vec<f64> {
        let mut v = self.l0.clone();
        v.push(self.xi0);
        v
    }

    fn from_slice(x: &[f64]) -> Self {
        let n = x.len() - 1;
        ShootingUnknowns {
            l0: x[..n].to_vec(),
            xi0: x[n],
        }
    }
}

/// One converged (or failed) point on the continuation path.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuationState {
    pub p: f64,
    pub h2: f64,
    pub unknowns: ShootingUnknowns,
    pub converged: bool,
    pub newton_iters: usize,
    pub residual_norm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BvpOptions {
    pub integrator: IntegratorOptions,
    /// Max-norm tolerance on the shooting residual.
    pub bvp_tol: f64,
    pub max_newton_iters: usize,
    /// First continuation step, as a fraction of the parameter range.
    pub initial_step: f64,
    /// Steps below this fraction of the range declare a stall.
    pub min_step: f64,
    /// A solve with at most this many iterations doubles the next step.
    pub fast_iters: usize,
}

impl Default for BvpOptions {
    fn default() -> Self {
        BvpOptions {
            integrator: IntegratorOptions::with_tolerance(1e-12),
            bvp_tol: 1e-10,
            max_newton_iters: 50,
            initial_step: 0.25,
            min_step: 1e-6,
            fast_iters: 3,
        }
    }
}

impl BvpOptions {
    pub fn validate(&self) -> Result<()> {
        self.integrator.validate()?;
        if !(self.bvp_tol > 0.0) {
            return Err(Error::InvalidOptions("bvp_tol must be positive".into()));
        }
        if !(self.initial_step > 0.0 && self.initial_step <= 1.0) {
            return Err(Error::InvalidOptions(
                "initial_step must lie in (0, 1]".into(),
            ));
        }
        if !(self.min_step > 0.0 && self.min_step < self.initial_step) {
            return Err(Error::InvalidOptions(
                "min_step must lie in (0, initial_step)".into(),
            ));
        }
        if self.max_newton_iters == 0 {
            return Err(Error::InvalidOptions(
                "max_newton_iters must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// A solved Dirichlet problem.
#[derive(Debug, Clone, PartialEq)]
pub struct BvpSolution {
    /// Trajectory on `[0, 1]` with the potential attached (`u(0) = u0`).
    pub trajectory: Trajectory,
    pub dirichlet: DirichletData,
    pub params: SystemParams,
    /// Homotopy parameter the boundary conditions were imposed at.
    pub p: f64,
    pub unknowns: ShootingUnknowns,
    /// `max_i (|y_i(0) − a_i|, |y_i(1) − target_i|)`.
    pub boundary_error: f64,
    /// `|∫ξ − p c|`.
    pub integral_error: f64,
    /// Largest `h²` at which a converged solution was found.
    pub h2_reached: f64,
    pub newton_iterations: usize,
    pub path: Vec<ContinuationState>,
}

impl BvpSolution {
    /// `|u(1) − u(0) − (u1 − u0)|` from the reconstructed potential.
    pub fn potential_error(&self) -> f64 {
        let u = self.trajectory.u().expect("solutions carry u");
        libm::fabs((u[u.len() - 1] - u[0]) - (self.dirichlet.u1 - self.dirichlet.u0))
    }
}

fn shoot(
    space: &HomSpaceSpec,
    params: &SystemParams,
    a: &[f64],
    unknowns: &ShootingUnknowns,
    opts: &IntegratorOptions,
) -> Result<Trajectory> {
    let init = PhaseState::new(0.0, a.to_vec(), unknowns.l0.clone(), unknowns.xi0);
    let traj = dynamics::integrate(space, params, &init, 1.0, opts)?;
    if traj.termination() != Termination::ReachedEnd {
        return Err(Error::ShotDiverged {
            t: traj.blowup_crossing().unwrap_or(traj.t_end()),
        });
    }
    Ok(traj)
}

fn residual_of(traj: &Trajectory, target: &[f64], integral_target: f64) -> Vec<f64> {
    let end = traj.last();
    let mut res: Vec<f64> = end.y.iter().zip(target).map(|(y, t)| y - t).collect();
    res.push(traj.integral_xi(traj.len() - 1) - integral_target);
    res
}

/// `[y_i(1) − (a_i + p(b_i − a_i)); ∫₀¹ ξ − p c]` for the shot from
/// `y(0) = a`, `L(0) = unknowns.l0`, `ξ(0) = unknowns.xi0`.
pub fn shooting_residual(
    space: &HomSpaceSpec,
    params: &SystemParams,
    dirichlet: &DirichletData,
    p: f64,
    unknowns: &ShootingUnknowns,
    opts: &IntegratorOptions,
) -> Result<Vec<f64>> {
    dirichlet.check(space)?;
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidParameter(format!(
            "p = {p} must lie in [0, 1]"
        )));
    }
    if unknowns.l0.len() != space.n() {
        return Err(Error::DimensionMismatch {
            expected: space.n(),
            got: unknowns.l0.len(),
        });
    }
    let traj = shoot(space, params, &dirichlet.a, unknowns, opts)?;
    Ok(residual_of(
        &traj,
        &dirichlet.target(p),
        p * dirichlet.c(space.d()),
    ))
}

struct Problem<'a> {
    space: &'a HomSpaceSpec,
    dirichlet: &'a DirichletData,
    base: SystemParams,
    opts: &'a BvpOptions,
}

impl Problem<'_> {
    fn newton_at(&self, p: f64, h2: f64, x0: &[f64]) -> Result<newton::NewtonOutcome> {
        let params = self.base.with_h2(h2);
        let target = self.dirichlet.target(p);
        let integral_target = p * self.dirichlet.c(self.space.d());
        newton::solve(
            |x| {
                let traj = shoot(
                    self.space,
                    &params,
                    &self.dirichlet.a,
                    &ShootingUnknowns::from_slice(x),
                    &self.opts.integrator,
                )?;
                Ok(residual_of(&traj, &target, integral_target))
            },
            x0,
            self.opts.bvp_tol,
            self.opts.max_newton_iters,
        )
    }

    /// Marches one parameter from `start` to `end`, returning the last
    /// unknowns. `at(value)` maps the marched value to `(p, h²)`.
    #[allow(clippy::too_many_arguments)]
    fn march(
        &self,
        stage: ContinuationStage,
        start: f64,
        end: f64,
        x0: Vec<f64>,
        at: impl Fn(f64) -> (f64, f64),
        path: &mut Vec<ContinuationState>,
        iterations: &mut usize,
        h2_reached: &mut f64,
    ) -> Result<Vec<f64>> {
        let range = end - start;
        let mut x = x0;
        let mut current = start;
        if range == 0.0 {
            return Ok(x);
        }
        let mut step = self.opts.initial_step * range;
        let min_step = self.opts.min_step * libm::fabs(range);
        while current != end {
            let next = if libm::fabs(end - current) <= libm::fabs(step) {
                end
            } else {
                current + step
            };
            let (p, h2) = at(next);
            match self.newton_at(p, h2, &x) {
                Ok(out) => {
                    *iterations += out.iterations;
                    path.push(ContinuationState {
                        p,
                        h2,
                        unknowns: ShootingUnknowns::from_slice(&out.x),
                        converged: true,
                        newton_iters: out.iterations,
                        residual_norm: out.residual_norm(),
                    });
                    *h2_reached = h2_reached.max(h2);
                    if out.iterations <= self.opts.fast_iters {
                        step *= 2.0;
                    }
                    x = out.x;
                    current = next;
                }
                Err(e) => {
                    let (iters, residual) = match e {
                        Error::NewtonDiverged {
                            iterations,
                            residual,
                        } => (iterations, residual),
                        _ => (0, f64::INFINITY),
                    };
                    *iterations += iters;
                    path.push(ContinuationState {
                        p,
                        h2,
                        unknowns: ShootingUnknowns::from_slice(&x),
                        converged: false,
                        newton_iters: iters,
                        residual_norm: residual,
                    });
                    step *= 0.5;
                    if libm::fabs(step) < min_step {
                        return Err(Error::ContinuationStalled {
                            stage,
                            reached: current,
                            h2_reached: *h2_reached,
                        });
                    }
                }
            }
        }
        Ok(x)
    }

    fn finish(
        &self,
        p: f64,
        h2: f64,
        x: &[f64],
        path: Vec<ContinuationState>,
        newton_iterations: usize,
        h2_reached: f64,
    ) -> Result<BvpSolution> {
        let params = self.base.with_h2(h2);
        let unknowns = ShootingUnknowns::from_slice(x);
        let traj = shoot(
            self.space,
            &params,
            &self.dirichlet.a,
            &unknowns,
            &self.opts.integrator,
        )?
        .with_potential(self.dirichlet.u0)?;
        let res = residual_of(
            &traj,
            &self.dirichlet.target(p),
            p * self.dirichlet.c(self.space.d()),
        );
        let n = self.space.n();
        let first = traj.sample(0);
        let start_err = first
            .y
            .iter()
            .zip(&self.dirichlet.a)
            .fold(0.0_f64, |acc, (y, a)| acc.max(libm::fabs(y - a)));
        let end_err = res[..n]
            .iter()
            .fold(0.0_f64, |acc, v| acc.max(libm::fabs(*v)));
        Ok(BvpSolution {
            trajectory: traj,
            dirichlet: self.dirichlet.clone(),
            params,
            p,
            unknowns,
            boundary_error: start_err.max(end_err),
            integral_error: libm::fabs(res[n]),
            h2_reached,
            newton_iterations,
            path,
        })
    }
}

/// Solves the Dirichlet problem at `params.h2` by homotopy in the boundary
/// data at `h² = 0` followed by continuation in `h²`.
pub fn solve_dirichlet(
    space: &HomSpaceSpec,
    params: &SystemParams,
    dirichlet: &DirichletData,
    opts: &BvpOptions,
) -> Result<BvpSolution> {
    params.validate()?;
    opts.validate()?;
    dirichlet.check(space)?;
    let problem = Problem {
        space,
        dirichlet,
        base: *params,
        opts,
    };
    let n = space.n();
    let mut path = Vec::new();
    let mut iterations = 0;
    let mut h2_reached = 0.0;

    let base = problem.newton_at(0.0, 0.0, &vec![0.0; n + 1])?;
    path.push(ContinuationState {
        p: 0.0,
        h2: 0.0,
        unknowns: ShootingUnknowns::from_slice(&base.x),
        converged: true,
        newton_iters: base.iterations,
        residual_norm: base.residual_norm(),
    });
    iterations += base.iterations;
    let x = problem.march(
        ContinuationStage::Homotopy,
        0.0,
        1.0,
        base.x,
        |p| (p, 0.0),
        &mut path,
        &mut iterations,
        &mut h2_reached,
    )?;
    let x = problem.march(
        ContinuationStage::Lapse,
        0.0,
        params.h2,
        x,
        |h2| (1.0, h2),
        &mut path,
        &mut iterations,
        &mut h2_reached,
    )?;
    problem.finish(1.0, params.h2, &x, path, iterations, h2_reached)
}

/// The `h² = 0` limit problem, which depends only on the weights `d` and
/// `m`: `ξ' = −tr L² − m(tr L − ξ)²`, `L' = −ξ L`, with `∫L = p(b − a)` and
/// `∫ξ = p c`. Solved by homotopy from `p = 0`.
pub fn solve_limit_system(
    d: &[u32],
    m: f64,
    dirichlet: &DirichletData,
    p: f64,
    opts: &BvpOptions,
) -> Result<BvpSolution> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidParameter(format!(
            "p = {p} must lie in [0, 1]"
        )));
    }
    let space = HomSpaceSpec::flat(d.to_vec())?;
    let params = SystemParams::new(m, 0.0, 0.0)?;
    opts.validate()?;
    dirichlet.check(&space)?;
    let problem = Problem {
        space: &space,
        dirichlet,
        base: params,
        opts,
    };
    let n = space.n();
    let mut path = Vec::new();
    let mut iterations = 0;
    let mut h2_reached = 0.0;
    let base = problem.newton_at(0.0, 0.0, &vec![0.0; n + 1])?;
    path.push(ContinuationState {
        p: 0.0,
        h2: 0.0,
        unknowns: ShootingUnknowns::from_slice(&base.x),
        converged: true,
        newton_iters: base.iterations,
        residual_norm: base.residual_norm(),
    });
    iterations += base.iterations;
    let x = problem.march(
        ContinuationStage::Homotopy,
        0.0,
        p,
        base.x,
        |q| (q, 0.0),
        &mut path,
        &mut iterations,
        &mut h2_reached,
    )?;
    problem.finish(p, 0.0, &x, path, iterations, 0.0)
}

/// Newton at `p = 1` and the given `h²`, started from `guess`.
pub fn polish_dirichlet(
    space: &HomSpaceSpec,
    params: &SystemParams,
    dirichlet: &DirichletData,
    guess: &ShootingUnknowns,
    opts: &BvpOptions,
) -> Result<BvpSolution> {
    params.validate()?;
    opts.validate()?;
    dirichlet.check(space)?;
    let problem = Problem {
        space,
        dirichlet,
        base: *params,
        opts,
    };
    let out = problem.newton_at(1.0, params.h2, &guess.to_vec())?;
    let state = ContinuationState {
        p: 1.0,
        h2: params.h2,
        unknowns: ShootingUnknowns::from_slice(&out.x),
        converged: true,
        newton_iters: out.iterations,
        residual_norm: out.residual_norm(),
    };
    problem.finish(
        1.0,
        params.h2,
        &out.x,
        vec![state],
        out.iterations,
        params.h2,
    )
}
