use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct NewtonOutcome {
    pub x: Vec<f64>,
    pub residual: Vec<f64>,
    pub iterations: usize,
}

impl NewtonOutcome {
    pub fn residual_norm(&self) -> f64 {
        linalg::norm_inf(&self.residual)
    }
}

const FD_REL: f64 = 1e-7;
const ARMIJO: f64 = 1e-4;
const MAX_HALVINGS: usize = 12;

/// Damped Newton with a forward-difference Jacobian. Converges when the
/// max-norm of the residual is at most `tol`.
pub(crate) fn solve<F>(mut f: F, x0: &[f64], tol: f64, max_iter: usize) -> Result<NewtonOutcome>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    let mut x = x0.to_vec();
    let mut fx = f(&x)?;
    let n = x.len();
    for iter in 0..=max_iter {
        if linalg::norm_inf(&fx) <= tol {
            return Ok(NewtonOutcome {
                x,
                residual: fx,
                iterations: iter,
            });
        }
        if iter == max_iter {
            break;
        }
        let mut jac = Matrix::zeros(n);
        for j in 0..n {
            let h = FD_REL.max(FD_REL * libm::fabs(x[j]));
            let mut xp = x.clone();
            xp[j] += h;
            let (fp, step) = match f(&xp) {
                Ok(v) => (v, h),
                Err(_) => {
                    xp[j] = x[j] - h;
                    (f(&xp)?, -h)
                }
            };
            for i in 0..n {
                jac.set(i, j, (fp[i] - fx[i]) / step);
            }
        }
        let rhs: Vec<f64> = fx.iter().map(|v| -v).collect();
        let delta = linalg::solve(&jac, &rhs).ok_or(Error::NewtonDiverged {
            iterations: iter,
            residual: linalg::norm_inf(&fx),
        })?;
        let norm0 = linalg::norm2(&fx);
        let mut damping = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let trial: Vec<f64> = x.iter().zip(&delta).map(|(a, d)| a + damping * d).collect();
            if let Ok(ft) = f(&trial) {
                if linalg::norm2(&ft) <= (1.0 - ARMIJO * damping) * norm0 {
                    accepted = Some((trial, ft));
                    break;
                }
            }
            damping *= 0.5;
        }
        let Some((xn, fxn)) = accepted else {
            return Err(Error::NewtonDiverged {
                iterations: iter + 1,
                residual: linalg::norm_inf(&fx),
            });
        };
        x = xn;
        fx = fxn;
    }
    Err(Error::NewtonDiverged {
        iterations: max_iter,
        residual: linalg::norm_inf(&fx),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn exact_root_takes_zero_iterations() {
        let out = solve(|x| Ok(vec![x[0], x[1] * x[1]]), &[0.0, 0.0], 1e-12, 50).unwrap();
        assert_eq!(out.iterations, 0);
    }

    #[test]
    fn converges_on_nonlinear_system() {
        // x² + y² = 4, x = y.
        let out = solve(
            |x| Ok(vec![x[0] * x[0] + x[1] * x[1] - 4.0, x[0] - x[1]]),
            &[1.0, 0.5],
            1e-12,
            50,
        )
        .unwrap();
        let r = libm::sqrt(2.0);
        assert!((out.x[0] - r).abs() < 1e-10 && (out.x[1] - r).abs() < 1e-10);
    }

    #[test]
    fn reports_divergence() {
        // x² + 1 has no real root.
        let err = solve(|x| Ok(vec![x[0] * x[0] + 1.0]), &[0.3], 1e-12, 50).unwrap_err();
        assert!(matches!(err, Error::NewtonDiverged { .. }));
    }
}
