//! Homogeneous-space data and the algebraic curvature maps.
//!
//! A principal orbit `G/H` with `n` pairwise non-isomorphic isotropy summands
//! is described by the summand dimensions `d_i` and the non-negative
//! structure constants `β_i`, `γ^l_{ik}`. With log-metric coefficients `y`,
//! the orbit Ricci map is
//!
//! ```text
//! r_i(y) = β_i / (2 e^{2y_i}) + Σ_{k,l} γ^l_{ik} (e^{4y_i} − 2 e^{4y_k}) / (4 e^{2y_i + 2y_k + 2y_l})
//! ```
//!
//! and the majorant collecting every exponential magnitude is
//!
//! ```text
//! R(y) = Σ_i β_i e^{−2y_i} + Σ_{i,k,l} γ^l_{ik} e^{2y_i − 2y_k − 2y_l}.
//! ```
//!
//! Every `γ` term is evaluated as a single exponential of a summed exponent,
//! and any `|y_i|` beyond [`Y_LIMIT`] is rejected with
//! [`Error::DomainOverflow`] so that callers see blow-up instead of infinities.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Largest admissible `|y_i|` before exponentials are considered overflowed.
pub const Y_LIMIT: f64 = 300.0;

/// Structure constants of a monotypic homogeneous space.
#[derive(Debug, Clone, PartialEq)]
pub struct HomSpaceSpec {
    d: Vec<u32>,
    beta: Vec<f64>,
    /// Dense `n³` tensor, `gamma[(i * n + k) * n + l] = γ^l_{ik}`.
    gamma: Vec<f64>,
    dim: u32,
    label: String,
    monotypic_asserted: bool,
}

/// Which of the standing hypotheses a space meets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HypothesisFlags {
    /// The user asserts pairwise non-isomorphic summands. Not checkable here.
    pub monotypic_asserted: bool,
    /// Every summand has dimension at least 2.
    pub dimension_at_least_two: bool,
    /// All `β` and `γ` vanish, so `R ≡ 0` and `r ≡ 0`.
    pub degenerate: bool,
}

impl HomSpaceSpec {
    /// Builds a space from dimensions, `β`, and sparse `γ` entries `(i, k, l, value)`
    /// with zero-based indices meaning `γ^l_{ik}`. Repeated entries accumulate.
    pub fn new(
        d: Vec<u32>,
        beta: Vec<f64>,
        gamma_entries: &[(usize, usize, usize, f64)],
        label: impl Into<String>,
    ) -> Result<Self> {
        let n = d.len();
        if n == 0 {
            return Err(Error::InvalidSpace("n must be positive".into()));
        }
        if let Some(i) = d.iter().position(|&di| di == 0) {
            return Err(Error::InvalidSpace(format!("d[{i}] must be at least 1")));
        }
        if beta.len() != n {
            return Err(Error::InvalidSpace(format!(
                "beta has {} entries, expected {n}",
                beta.len()
            )));
        }
        if let Some(i) = beta.iter().position(|b| !(b.is_finite() && *b >= 0.0)) {
            return Err(Error::InvalidSpace(format!(
                "beta[{i}] = {} must be finite and non-negative",
                beta[i]
            )));
        }
        let mut gamma = vec![0.0; n * n * n];
        for &(i, k, l, value) in gamma_entries {
            if i >= n || k >= n || l >= n {
                return Err(Error::InvalidSpace(format!(
                    "gamma index ({i},{k},{l}) out of range for n = {n}"
                )));
            }
            if !(value.is_finite() && value >= 0.0) {
                return Err(Error::InvalidSpace(format!(
                    "gamma ({i},{k},{l}) = {value} must be finite and non-negative"
                )));
            }
            gamma[(i * n + k) * n + l] += value;
        }
        let dim = d.iter().sum();
        Ok(HomSpaceSpec {
            d,
            beta,
            gamma,
            dim,
            label: label.into(),
            monotypic_asserted: true,
        })
    }

    /// `S¹` with trivial isotropy: `n = 1`, `d = [1]`, no curvature.
    pub fn circle() -> Self {
        HomSpaceSpec::new(vec![1], vec![0.0], &[], "circle").expect("valid preset")
    }

    /// `SO(3)/SO(2) = S²` with the reference metric scaled so that `β = 1`.
    pub fn sphere2() -> Self {
        HomSpaceSpec::new(vec![2], vec![1.0], &[], "sphere2").expect("valid preset")
    }

    /// Flat torus of dimension `d` restricted to conformal metrics (`n = 1`).
    pub fn torus(d: u32) -> Result<Self> {
        let mut space = HomSpaceSpec::new(vec![d], vec![0.0], &[], format!("torus({d})"))?;
        // d one-dimensional trivial summands are mutually isomorphic.
        space.monotypic_asserted = d == 1;
        Ok(space)
    }

    /// A flat space with the given summand dimensions, used where only the
    /// weights `d_i` matter (the `h² = 0` limit system).
    pub fn flat(d: Vec<u32>) -> Result<Self> {
        let n = d.len();
        HomSpaceSpec::new(d, vec![0.0; n], &[], "flat")
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn with_monotypic_asserted(mut self, asserted: bool) -> Self {
        self.monotypic_asserted = asserted;
        self
    }

    pub fn n(&self) -> usize {
        self.d.len()
    }

    pub fn d(&self) -> &[u32] {
        &self.d
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    /// Total dimension `Σ d_i`.
    pub fn dim(&self) -> u32 {
        self.dim
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn monotypic_asserted(&self) -> bool {
        self.monotypic_asserted
    }

    /// `γ^l_{ik}`.
    #[inline]
    pub fn gamma(&self, i: usize, k: usize, l: usize) -> f64 {
        let n = self.n();
        self.gamma[(i * n + k) * n + l]
    }

    /// Nonzero `γ` entries as `(i, k, l, value)` in lexicographic order.
    pub fn gamma_entries(&self) -> Vec<(usize, usize, usize, f64)> {
        let n = self.n();
        let mut out = Vec::new();
        for i in 0..n {
            for k in 0..n {
                for l in 0..n {
                    let g = self.gamma(i, k, l);
                    if g != 0.0 {
                        out.push((i, k, l, g));
                    }
                }
            }
        }
        out
    }

    /// Index triples where `γ^l_{ik} ≠ γ^l_{ki}`. The convention is left to
    /// the caller; this only reports asymmetry.
    pub fn lower_index_asymmetries(&self, tol: f64) -> Vec<(usize, usize, usize)> {
        let n = self.n();
        let mut out = Vec::new();
        for i in 0..n {
            for k in i + 1..n {
                for l in 0..n {
                    if libm::fabs(self.gamma(i, k, l) - self.gamma(k, i, l)) > tol {
                        out.push((i, k, l));
                    }
                }
            }
        }
        out
    }

    pub fn is_degenerate(&self) -> bool {
        self.beta.iter().all(|b| *b == 0.0) && self.gamma.iter().all(|g| *g == 0.0)
    }

    pub fn hypothesis_flags(&self) -> HypothesisFlags {
        HypothesisFlags {
            monotypic_asserted: self.monotypic_asserted,
            dimension_at_least_two: self.d.iter().all(|&di| di >= 2),
            degenerate: self.is_degenerate(),
        }
    }

    fn check_y(&self, y: &[f64]) -> Result<()> {
        if y.len() != self.n() {
            return Err(Error::DimensionMismatch {
                expected: self.n(),
                got: y.len(),
            });
        }
        for (index, &value) in y.iter().enumerate() {
            if !(libm::fabs(value) <= Y_LIMIT) {
                return Err(Error::DomainOverflow { index, value });
            }
        }
        Ok(())
    }

    /// Writes `r(y)` into `out`.
    pub fn ricci_map_into(&self, y: &[f64], out: &mut [f64]) -> Result<()> {
        self.check_y(y)?;
        let n = self.n();
        for i in 0..n {
            let mut ri = 0.5 * self.beta[i] * libm::exp(-2.0 * y[i]);
            for k in 0..n {
                for l in 0..n {
                    let g = self.gamma(i, k, l);
                    if g == 0.0 {
                        continue;
                    }
                    let plus = libm::exp(2.0 * (y[i] - y[k] - y[l]));
                    let minus = libm::exp(2.0 * (y[k] - y[i] - y[l]));
                    ri += 0.25 * g * (plus - 2.0 * minus);
                }
            }
            out[i] = ri;
        }
        Ok(())
    }

    /// The orbit Ricci map `r(y)`.
    pub fn ricci_map(&self, y: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.n()];
        self.ricci_map_into(y, &mut out)?;
        Ok(out)
    }

    /// The majorant `R(y) ≥ 0`.
    pub fn big_r(&self, y: &[f64]) -> Result<f64> {
        self.check_y(y)?;
        let n = self.n();
        let mut total = 0.0;
        for i in 0..n {
            total += self.beta[i] * libm::exp(-2.0 * y[i]);
            for k in 0..n {
                for l in 0..n {
                    let g = self.gamma(i, k, l);
                    if g != 0.0 {
                        total += g * libm::exp(2.0 * (y[i] - y[k] - y[l]));
                    }
                }
            }
        }
        Ok(total)
    }

    /// Gradient of `R`.
    pub fn big_r_gradient(&self, y: &[f64]) -> Result<Vec<f64>> {
        self.check_y(y)?;
        let n = self.n();
        let mut grad = vec![0.0; n];
        for i in 0..n {
            grad[i] -= 2.0 * self.beta[i] * libm::exp(-2.0 * y[i]);
            for k in 0..n {
                for l in 0..n {
                    let g = self.gamma(i, k, l);
                    if g == 0.0 {
                        continue;
                    }
                    let term = g * libm::exp(2.0 * (y[i] - y[k] - y[l]));
                    grad[i] += 2.0 * term;
                    grad[k] -= 2.0 * term;
                    grad[l] -= 2.0 * term;
                }
            }
        }
        Ok(grad)
    }

    /// Analytic Jacobian `∂r_i/∂y_j`.
    pub fn ricci_jacobian(&self, y: &[f64]) -> Result<Matrix> {
        self.check_y(y)?;
        let n = self.n();
        let mut jac = Matrix::zeros(n);
        for i in 0..n {
            jac.add(i, i, -self.beta[i] * libm::exp(-2.0 * y[i]));
            for k in 0..n {
                for l in 0..n {
                    let g = self.gamma(i, k, l);
                    if g == 0.0 {
                        continue;
                    }
                    // 0.25 g e^{2(y_i − y_k − y_l)}
                    let plus = 0.25 * g * libm::exp(2.0 * (y[i] - y[k] - y[l]));
                    jac.add(i, i, 2.0 * plus);
                    jac.add(i, k, -2.0 * plus);
                    jac.add(i, l, -2.0 * plus);
                    // −0.5 g e^{2(y_k − y_i − y_l)}
                    let minus = -0.5 * g * libm::exp(2.0 * (y[k] - y[i] - y[l]));
                    jac.add(i, i, -2.0 * minus);
                    jac.add(i, k, 2.0 * minus);
                    jac.add(i, l, -2.0 * minus);
                }
            }
        }
        Ok(jac)
    }

    /// Monte-Carlo estimates of the ratio bounds `sup |r|/R`, `sup |Dr|/R`
    /// and `inf |r|/R` over the box `[−box_radius, box_radius]ⁿ`.
    pub fn estimate_ricci_bounds(
        &self,
        samples: usize,
        box_radius: f64,
        seed: u64,
    ) -> Result<RicciBoundEstimates> {
        if samples == 0 {
            return Err(Error::InvalidParameter("samples must be at least 1".into()));
        }
        if !(box_radius > 0.0 && box_radius <= Y_LIMIT) {
            return Err(Error::InvalidParameter(format!(
                "box_radius must lie in (0, {Y_LIMIT}], got {box_radius}"
            )));
        }
        if self.is_degenerate() {
            return Err(Error::DegenerateSpace);
        }
        let n = self.n();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut y = vec![0.0; n];
        let mut r = vec![0.0; n];
        let mut acc = BoundAccumulator::default();
        for _ in 0..samples {
            for yi in y.iter_mut() {
                *yi = rng.random_range(-box_radius..=box_radius);
            }
            self.ricci_map_into(&y, &mut r)?;
            let big = self.big_r(&y)?;
            let jac = self.ricci_jacobian(&y)?;
            acc.push(crate::linalg::norm2(&r), jac.frobenius_norm(), big);
        }
        Ok(acc.finish(samples, box_radius))
    }
}

/// Sampled estimates of the curvature ratio bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RicciBoundEstimates {
    /// `sup |r|/R`.
    pub c1: f64,
    /// `sup |Dr|/R`, Frobenius norm.
    pub c2: f64,
    /// `inf |r|/R`.
    pub c3: f64,
    pub samples: usize,
    pub box_radius: f64,
}

#[derive(Debug)]
struct BoundAccumulator {
    c1: f64,
    c2: f64,
    c3: f64,
}

impl Default for BoundAccumulator {
    fn default() -> Self {
        BoundAccumulator {
            c1: 0.0,
            c2: 0.0,
            c3: f64::INFINITY,
        }
    }
}

impl BoundAccumulator {
    fn push(&mut self, r_norm: f64, dr_norm: f64, big: f64) {
        if !(big > 0.0) {
            return;
        }
        let q = r_norm / big;
        self.c1 = self.c1.max(q);
        self.c3 = self.c3.min(q);
        self.c2 = self.c2.max(dr_norm / big);
    }

    fn finish(self, samples: usize, box_radius: f64) -> RicciBoundEstimates {
        RicciBoundEstimates {
            c1: self.c1,
            c2: self.c2,
            c3: if self.c3.is_finite() { self.c3 } else { 0.0 },
            samples,
            box_radius,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn two_summand() -> HomSpaceSpec {
        HomSpaceSpec::new(
            vec![2, 3],
            vec![1.0, 0.5],
            &[
                (0, 0, 1, 0.3),
                (0, 1, 1, 0.2),
                (1, 0, 1, 0.2),
                (1, 1, 0, 0.4),
                (0, 1, 0, 0.1),
                (1, 0, 0, 0.1),
            ],
            "two-summand test space",
        )
        .unwrap()
    }

    #[test]
    fn sphere_ricci_values() {
        let s2 = HomSpaceSpec::sphere2();
        assert_eq!(s2.ricci_map(&[0.0]).unwrap(), vec![0.5]);
        assert_relative_eq!(
            s2.ricci_map(&[libm::log(2.0)]).unwrap()[0],
            0.125,
            epsilon = 1e-15
        );
        assert_eq!(s2.big_r(&[0.0]).unwrap(), 1.0);
        assert_relative_eq!(s2.big_r(&[libm::log(2.0)]).unwrap(), 0.25, epsilon = 1e-15);
        assert_eq!(s2.ricci_jacobian(&[0.0]).unwrap().get(0, 0), -1.0);
    }

    #[test]
    fn sphere_jacobian_matches_central_difference() {
        let s2 = HomSpaceSpec::sphere2();
        let y = libm::log(2.0);
        let h = 1e-6;
        let fd =
            (s2.ricci_map(&[y + h]).unwrap()[0] - s2.ricci_map(&[y - h]).unwrap()[0]) / (2.0 * h);
        let analytic = s2.ricci_jacobian(&[y]).unwrap().get(0, 0);
        assert_relative_eq!(analytic, -0.25, epsilon = 1e-15);
        assert!((fd - analytic).abs() < 1e-8);
    }

    #[test]
    fn flat_spaces_vanish() {
        let c = HomSpaceSpec::circle();
        assert_eq!(c.ricci_map(&[3.7]).unwrap(), vec![0.0]);
        let t = HomSpaceSpec::torus(3).unwrap();
        assert_eq!(t.big_r(&[-1.2]).unwrap(), 0.0);
        assert_eq!(t.ricci_jacobian(&[0.4]).unwrap().frobenius_norm(), 0.0);
        assert!(t.hypothesis_flags().degenerate);
        assert_eq!(t.dim(), 3);
    }

    #[test]
    fn overflow_names_the_index() {
        let s = two_summand();
        match s.ricci_map(&[0.0, 301.0]) {
            Err(Error::DomainOverflow { index, .. }) => assert_eq!(index, 1),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            s.big_r(&[f64::NAN, 0.0]),
            Err(Error::DomainOverflow { index: 0, .. })
        ));
    }

    #[test]
    fn validation_rejects_bad_constants() {
        assert!(HomSpaceSpec::new(vec![], vec![], &[], "").is_err());
        assert!(HomSpaceSpec::new(vec![0], vec![1.0], &[], "").is_err());
        assert!(HomSpaceSpec::new(vec![1], vec![-1.0], &[], "").is_err());
        assert!(HomSpaceSpec::new(vec![1], vec![1.0], &[(0, 0, 1, 1.0)], "").is_err());
        assert!(HomSpaceSpec::new(vec![1], vec![1.0], &[(0, 0, 0, -0.1)], "").is_err());
    }

    #[test]
    fn asymmetry_is_reported_not_rejected() {
        let s = HomSpaceSpec::new(vec![2, 2], vec![0.0, 0.0], &[(0, 1, 0, 1.0)], "asym").unwrap();
        assert_eq!(s.lower_index_asymmetries(0.0), vec![(0, 1, 0)]);
        assert!(two_summand().lower_index_asymmetries(0.0).is_empty());
    }

    #[test]
    fn sphere_bounds_are_exact() {
        let est = HomSpaceSpec::sphere2()
            .estimate_ricci_bounds(500, 4.0, 7)
            .unwrap();
        assert_relative_eq!(est.c1, 0.5, epsilon = 1e-14);
        assert_relative_eq!(est.c3, 0.5, epsilon = 1e-14);
        assert_relative_eq!(est.c2, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn bounds_reject_degenerate_and_bad_args() {
        let t = HomSpaceSpec::torus(2).unwrap();
        assert_eq!(
            t.estimate_ricci_bounds(10, 1.0, 0),
            Err(Error::DegenerateSpace)
        );
        let s = HomSpaceSpec::sphere2();
        assert!(s.estimate_ricci_bounds(0, 1.0, 0).is_err());
        assert!(s.estimate_ricci_bounds(10, 0.0, 0).is_err());
    }

    #[test]
    fn bounds_are_deterministic() {
        let s = two_summand();
        let a = s.estimate_ricci_bounds(2000, 2.0, 42).unwrap();
        let b = s.estimate_ricci_bounds(2000, 2.0, 42).unwrap();
        assert_eq!(a, b);
        assert!(a.c3 <= a.c1 && a.c1 > 0.0 && a.c2 > 0.0);
    }

    #[test]
    fn gradient_matches_central_difference() {
        let s = two_summand();
        let y = [0.3, -0.7];
        let g = s.big_r_gradient(&y).unwrap();
        for j in 0..2 {
            let mut yp = y;
            let mut ym = y;
            yp[j] += 1e-6;
            ym[j] -= 1e-6;
            let fd = (s.big_r(&yp).unwrap() - s.big_r(&ym).unwrap()) / 2e-6;
            assert!((fd - g[j]).abs() < 1e-7 * (1.0 + g[j].abs()));
        }
    }
}
