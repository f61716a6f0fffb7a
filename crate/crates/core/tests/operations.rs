use approx::assert_relative_eq;
use coqe_core::bvp::{self, BvpOptions, CircleVerdict, DirichletData, ShootingUnknowns};
use coqe_core::dynamics::{self, PhaseState, SystemParams};
use coqe_core::singularity::{self, BlowupOptions, Direction};
use coqe_core::{Error, HomSpaceSpec, IntegratorOptions, Termination};

fn tight() -> IntegratorOptions {
    IntegratorOptions::with_tolerance(1e-12)
}

// ---- homspace ----

#[test]
fn ricci_map_presets() {
    let s2 = HomSpaceSpec::sphere2();
    assert_eq!(s2.ricci_map(&[0.0]).unwrap(), vec![0.5]);
    assert_relative_eq!(
        s2.ricci_map(&[2f64.ln()]).unwrap()[0],
        0.125,
        max_relative = 1e-15
    );
    let c = HomSpaceSpec::circle();
    for y in [-3.0, 0.0, 7.5] {
        assert_eq!(c.ricci_map(&[y]).unwrap(), vec![0.0]);
    }
}

#[test]
fn big_r_presets() {
    let s2 = HomSpaceSpec::sphere2();
    assert_eq!(s2.big_r(&[0.0]).unwrap(), 1.0);
    assert_relative_eq!(s2.big_r(&[2f64.ln()]).unwrap(), 0.25, max_relative = 1e-15);
    let t = HomSpaceSpec::torus(3).unwrap();
    assert_eq!(t.big_r(&[1.7]).unwrap(), 0.0);
}

#[test]
fn jacobian_presets() {
    let s2 = HomSpaceSpec::sphere2();
    assert_eq!(s2.ricci_jacobian(&[0.0]).unwrap().get(0, 0), -1.0);
    let y = 2f64.ln();
    let jac = s2.ricci_jacobian(&[y]).unwrap().get(0, 0);
    assert_relative_eq!(jac, -0.25, max_relative = 1e-15);
    let h = 1e-6;
    let fd = (s2.ricci_map(&[y + h]).unwrap()[0] - s2.ricci_map(&[y - h]).unwrap()[0]) / (2.0 * h);
    assert!((fd - jac).abs() < 1e-8);
    let t = HomSpaceSpec::torus(2).unwrap();
    assert_eq!(t.ricci_jacobian(&[0.3]).unwrap().frobenius_norm(), 0.0);
}

#[test]
fn overflow_names_the_index() {
    let space = HomSpaceSpec::new(vec![1, 2], vec![1.0, 1.0], &[], "two").unwrap();
    match space.ricci_map(&[0.0, -301.0]) {
        Err(Error::DomainOverflow { index, .. }) => assert_eq!(index, 1),
        other => panic!("expected overflow, got {other:?}"),
    }
}

#[test]
fn sphere_bounds_are_exact() {
    let est = HomSpaceSpec::sphere2()
        .estimate_ricci_bounds(500, 4.0, 11)
        .unwrap();
    assert_eq!(est.c1, 0.5);
    assert_eq!(est.c3, 0.5);
    assert_eq!(est.c2, 1.0);
}

#[test]
fn torus_bounds_are_degenerate() {
    let t = HomSpaceSpec::torus(3).unwrap();
    assert_eq!(
        t.estimate_ricci_bounds(10, 1.0, 0),
        Err(Error::DegenerateSpace)
    );
}

fn full_gamma_space() -> HomSpaceSpec {
    HomSpaceSpec::new(
        vec![2, 3],
        vec![1.0, 0.5],
        &[
            (0, 0, 0, 0.2),
            (0, 0, 1, 0.3),
            (0, 1, 0, 0.1),
            (0, 1, 1, 0.2),
            (1, 0, 0, 0.1),
            (1, 0, 1, 0.2),
            (1, 1, 0, 0.4),
            (1, 1, 1, 0.25),
        ],
        "all-gamma",
    )
    .unwrap()
}

#[test]
fn two_summand_c1_against_grid_scan() {
    let space = full_gamma_space();
    let radius = 2.0;
    let est = space.estimate_ricci_bounds(20_000, radius, 5).unwrap();
    // 1000 x 1000 grid on the same box.
    let k = 1000;
    let mut grid_c1 = 0.0_f64;
    for i in 0..k {
        for j in 0..k {
            let y = [
                -radius + 2.0 * radius * i as f64 / (k - 1) as f64,
                -radius + 2.0 * radius * j as f64 / (k - 1) as f64,
            ];
            let r = space.ricci_map(&y).unwrap();
            let norm = (r[0] * r[0] + r[1] * r[1]).sqrt();
            grid_c1 = grid_c1.max(norm / space.big_r(&y).unwrap());
        }
    }
    assert!(est.c1.is_finite() && est.c1 > 0.0);
    assert!(
        est.c1 <= grid_c1 * (1.0 + 1e-3),
        "sampled {} grid {}",
        est.c1,
        grid_c1
    );
    assert!(
        est.c1 >= grid_c1 * 0.95,
        "sampled {} grid {}",
        est.c1,
        grid_c1
    );
    assert!(est.c3 <= est.c1);
}

// ---- dynamics ----

#[test]
fn vector_field_examples() {
    let s2 = HomSpaceSpec::sphere2();
    let p = SystemParams::new(0.0, 0.0, 1.0).unwrap();
    let f =
        dynamics::vector_field(&s2, &p, &PhaseState::new(0.0, vec![0.0], vec![0.0], 0.0)).unwrap();
    assert_eq!((f.dy[0], f.dl[0], f.dxi), (0.0, 0.5, 0.0));

    let t2 = HomSpaceSpec::torus(2).unwrap();
    let p = SystemParams::new(1.0, 0.0, 1.0).unwrap();
    let f =
        dynamics::vector_field(&t2, &p, &PhaseState::new(0.0, vec![0.0], vec![0.5], 1.0)).unwrap();
    assert_eq!((f.dy[0], f.dl[0], f.dxi), (0.5, -0.5, -0.5));

    let c = HomSpaceSpec::circle();
    let p = SystemParams::new(0.0, 4.0, 1.0).unwrap();
    for a in [-2.0, 0.0, 1.3] {
        let f =
            dynamics::vector_field(&c, &p, &PhaseState::new(0.0, vec![0.0], vec![a], a)).unwrap();
        assert_eq!(f.dxi, -a * a - 4.0);
        assert_eq!(f.dl[0], -a * a - 4.0);
    }
}

#[test]
fn circle_riccati_closed_form() {
    let c = HomSpaceSpec::circle();
    let p = SystemParams::new(0.0, 4.0, 1.0).unwrap();
    let l0 = 2.0 * 1f64.tan();
    let traj = dynamics::integrate(
        &c,
        &p,
        &PhaseState::new(0.0, vec![0.0], vec![l0], l0),
        1.0,
        &IntegratorOptions::with_tolerance(1e-10),
    )
    .unwrap();
    assert_eq!(traj.termination(), Termination::ReachedEnd);
    assert!((traj.last().l[0] + 3.114815).abs() < 1e-6);
    for s in traj.samples() {
        let exact = 2.0 * (2.0 * (0.5 - s.t)).tan();
        assert!((s.l[0] - exact).abs() < 1e-7);
    }
}

#[test]
fn log_family_backward() {
    // β = γ = 0, d = 1: y = ln t, L = 1/t, ξ = 1/t solves the system with u ≡ 0.
    let t1 = HomSpaceSpec::torus(1).unwrap();
    let p = SystemParams::new(0.0, 0.0, 1.0).unwrap();
    let traj = dynamics::integrate(
        &t1,
        &p,
        &PhaseState::new(1.0, vec![0.0], vec![1.0], 1.0),
        0.01,
        &tight(),
    )
    .unwrap();
    assert_eq!(traj.termination(), Termination::ReachedEnd);
    assert!((traj.t_end() - 0.01).abs() < 1e-15);
    for s in traj.samples() {
        assert!((s.y[0] - s.t.ln()).abs() < 1e-6, "t = {}", s.t);
    }
    let u = dynamics::reconstruct_u(&traj, 0.0).unwrap();
    assert!(u.iter().all(|v| v.abs() < 1e-9));
}

#[test]
fn stationary_torus_is_constant() {
    let t = HomSpaceSpec::torus(3).unwrap();
    let p = SystemParams::new(1.0, 0.0, 1.0).unwrap();
    let traj = dynamics::integrate(
        &t,
        &p,
        &PhaseState::new(0.0, vec![0.7], vec![0.0], 0.0),
        1.0,
        &IntegratorOptions::default(),
    )
    .unwrap()
    .with_potential(0.4)
    .unwrap();
    for s in traj.samples() {
        assert_eq!((s.y[0], s.l[0], s.xi), (0.7, 0.0, 0.0));
    }
    let res = dynamics::qe_residual(&t, &p, &traj).unwrap();
    assert_eq!(res.max(), 0.0);
    let mu = dynamics::mu_invariant(&p, &traj, traj.u().unwrap()).unwrap();
    assert!(mu.iter().all(|m| *m == 0.0));
}

#[test]
fn constant_solution_mu_is_lambda() {
    // ξ' = −h²λ forbids rest points with λ ≠ 0 unless h² = 0.
    let t = HomSpaceSpec::torus(2).unwrap();
    let p = SystemParams::new(1.0, 2.0, 0.0).unwrap();
    let traj = dynamics::integrate(
        &t,
        &p,
        &PhaseState::new(0.0, vec![0.0], vec![0.0], 0.0),
        1.0,
        &tight(),
    )
    .unwrap()
    .with_potential(0.0)
    .unwrap();
    let mu = dynamics::mu_invariant(&p, &traj, traj.u().unwrap()).unwrap();
    assert!(mu.iter().all(|m| *m == 2.0));
}

#[test]
fn reconstructed_u_constant_when_xi_is_trace() {
    let c = HomSpaceSpec::circle();
    let p = SystemParams::new(0.0, 4.0, 1.0).unwrap();
    let l0 = 2.0 * 1f64.tan();
    let traj = dynamics::integrate(
        &c,
        &p,
        &PhaseState::new(0.0, vec![0.0], vec![l0], l0),
        1.0,
        &tight(),
    )
    .unwrap();
    let u = dynamics::reconstruct_u(&traj, 1.25).unwrap();
    assert!(u.iter().all(|v| (v - 1.25).abs() < 1e-12));
}

#[test]
fn reconstructed_u_matches_quadrature_identity() {
    let sol = bvp::symmetric_solution(3.0, &tight()).unwrap();
    let traj = &sol.trajectory;
    let u = traj.u().unwrap();
    let (first, last) = (traj.sample(0), traj.last());
    let identity = 2.0 * (last.y[0] - first.y[0]) - traj.integral_xi(traj.len() - 1);
    assert!((u[u.len() - 1] - u[0] - identity).abs() < 1e-10);
}

#[test]
fn residual_examples() {
    let s2 = HomSpaceSpec::sphere2();
    let p = SystemParams::new(1.0, 0.5, 1.0).unwrap();
    let traj = dynamics::integrate(
        &s2,
        &p,
        &PhaseState::new(0.0, vec![0.1], vec![0.1], 0.3),
        1.0,
        &IntegratorOptions::with_tolerance(1e-10),
    )
    .unwrap()
    .with_potential(0.0)
    .unwrap();
    assert_eq!(traj.termination(), Termination::ReachedEnd);
    assert!(dynamics::qe_residual(&s2, &p, &traj).unwrap().max() <= 1e-7);

    let shifted = traj.with_xi_offset(1.0);
    let res = dynamics::qe_residual(&s2, &p, &shifted).unwrap();
    let min_l = traj
        .samples()
        .map(|s| s.l[0].abs())
        .fold(f64::INFINITY, f64::min);
    assert!(res.second[0] >= min_l);
}

#[test]
fn mu_requires_positive_m() {
    let t = HomSpaceSpec::torus(1).unwrap();
    let p = SystemParams::new(0.0, 0.0, 1.0).unwrap();
    let traj = dynamics::integrate(
        &t,
        &p,
        &PhaseState::new(0.0, vec![0.0], vec![0.0], 0.0),
        1.0,
        &tight(),
    )
    .unwrap();
    let u = vec![0.0; traj.len()];
    assert!(matches!(
        dynamics::mu_invariant(&p, &traj, &u),
        Err(Error::InvalidParameter(_))
    ));
}

// ---- singularity ----

#[test]
fn functional_examples() {
    for d in [1u32, 2, 5] {
        let t = HomSpaceSpec::torus(d).unwrap();
        let tt = 0.37;
        let state = PhaseState::new(tt, vec![1.3], vec![1.0 / (d as f64 * tt)], 1.0 / tt);
        let (_, mt) = singularity::blowup_functional(&t, &state, 0.0).unwrap();
        assert!((mt - (1.0 + 1.0 / d as f64).sqrt()).abs() < 1e-14);
    }
    let t = HomSpaceSpec::torus(2).unwrap();
    let (m, _) =
        singularity::blowup_functional(&t, &PhaseState::new(0.0, vec![0.0], vec![0.0], 0.0), 0.0)
            .unwrap();
    assert_eq!(m, 0.0);
    let s2 = HomSpaceSpec::sphere2();
    let (m, _) =
        singularity::blowup_functional(&s2, &PhaseState::new(0.0, vec![0.0], vec![0.0], 0.0), 0.0)
            .unwrap();
    assert_eq!(m, 1.0);
}

#[test]
fn riccati_pole_exponent() {
    // λ = −1: L' = 1 − L², L0 = −1.5 runs to −∞ at t = atanh(1/1.5)... = ½ ln 5.
    let c = HomSpaceSpec::circle();
    let p = SystemParams::new(0.0, -1.0, 1.0).unwrap();
    let (rep, _) = singularity::analyze_blowup(
        &c,
        &p,
        &PhaseState::new(0.0, vec![0.0], vec![-1.5], -1.5),
        Direction::Forward,
        &BlowupOptions::default(),
    )
    .unwrap();
    let t_pole = 0.5 * 5f64.ln();
    assert!((rep.t_sing - t_pole).abs() < 1e-7, "t_sing {}", rep.t_sing);
    assert!((rep.exponent - 1.0).abs() <= 0.05);
    assert!(rep.fit_residual <= 0.05);
    assert!(rep.fit_samples >= 10);
}

fn torus_cone_seed(t: f64) -> PhaseState {
    // Self-similar solution L = q/t, ξ = 1/t with 2q² = 1 for d = 2, m = 0.
    let q = 0.5f64.sqrt();
    PhaseState::new(t, vec![q * t.ln()], vec![q / t], 1.0 / t)
}

#[test]
fn torus_cone_backward() {
    let t2 = HomSpaceSpec::torus(2).unwrap();
    let p = SystemParams::new(0.0, 0.0, 1.0).unwrap();
    let (rep, traj) = singularity::analyze_blowup(
        &t2,
        &p,
        &torus_cone_seed(1.0),
        Direction::Backward,
        &BlowupOptions::default(),
    )
    .unwrap();
    assert!(rep.t_sing.abs() < 1e-7);
    assert!((rep.sup_mt - 2f64.sqrt()).abs() < 1e-4);
    assert!((rep.exponent - 1.0).abs() < 0.05);
    // Integration error shifts the pole by ~1e-11, which dominates M·t
    // only for t below 1e-4.
    for s in traj.samples().filter(|s| s.t >= 1e-4) {
        let (_, mt) = singularity::blowup_functional(&t2, &s, 0.0).unwrap();
        assert!((mt - 2f64.sqrt()).abs() < 1e-6, "t = {}", s.t);
    }
}

#[test]
fn sphere_backward_blowup_respects_rate() {
    let s2 = HomSpaceSpec::sphere2();
    let p = SystemParams::new(1.0, 0.0, 1.0).unwrap();
    let (rep, _) = singularity::analyze_blowup(
        &s2,
        &p,
        &PhaseState::new(1.0, vec![0.0], vec![4.0], -2.0),
        Direction::Backward,
        &BlowupOptions::default(),
    )
    .unwrap();
    assert!(rep.sup_mt.is_finite());
    assert!(rep.exponent <= 1.05, "exponent {}", rep.exponent);
    assert!(!rep.rate_bound_violated());
}

#[test]
fn no_singularity_is_an_error() {
    let t = HomSpaceSpec::torus(2).unwrap();
    let p = SystemParams::new(1.0, 0.0, 1.0).unwrap();
    let err = singularity::analyze_blowup(
        &t,
        &p,
        &PhaseState::new(0.0, vec![0.0], vec![0.0], 0.0),
        Direction::Forward,
        &BlowupOptions::default(),
    )
    .unwrap_err();
    assert!(matches!(err, Error::NoSingularity { .. }));
}

#[test]
fn rescale_examples() {
    let t2 = HomSpaceSpec::torus(2).unwrap();
    let p = SystemParams::new(0.0, 0.0, 1.0).unwrap();
    let traj = dynamics::integrate(&t2, &p, &torus_cone_seed(1.0), 0.05, &tight()).unwrap();

    let single = singularity::rescale(&traj, 0.3, 0.0, 11).unwrap();
    assert_eq!(single.samples.len(), 1);
    assert!((single.functional(&t2, &single.samples[0]).unwrap() - 1.0).abs() < 1e-10);

    let window = singularity::rescale(&traj, 0.1, 0.5, 21).unwrap();
    let centre = window.samples.iter().find(|s| s.s == 0.0).unwrap();
    assert!((centre.xi - 0.5f64.sqrt()).abs() < 1e-8);
    assert!(window.residual(&t2, &p).unwrap() <= 1e-6);

    // Literal substitution of L = 1/(2t), ξ = 1/t gives ξ/M = 1/√1.5.
    let lit = PhaseState::new(0.1, vec![0.0], vec![5.0], 10.0);
    let (m, _) = singularity::blowup_functional(&t2, &lit, 0.0).unwrap();
    assert!((lit.xi / m - 0.816497).abs() < 1e-6);

    assert!(matches!(
        singularity::rescale(&traj, 2.0, 0.1, 3),
        Err(Error::OutOfRange { .. })
    ));
}

// ---- bvp ----

#[test]
fn shooting_residual_examples() {
    let t2 = HomSpaceSpec::torus(2).unwrap();
    let p0 = SystemParams::new(1.0, 0.0, 0.0).unwrap();
    let data = DirichletData::new(vec![0.4], vec![-0.3], 0.1, 0.9).unwrap();
    let res =
        bvp::shooting_residual(&t2, &p0, &data, 0.0, &ShootingUnknowns::zero(1), &tight()).unwrap();
    assert_eq!(res, vec![0.0, 0.0]);

    let s2 = HomSpaceSpec::sphere2();
    let p = SystemParams::new(0.0, 0.0, 1.0).unwrap();
    let res = bvp::shooting_residual(
        &s2,
        &p,
        &DirichletData::zero(1),
        0.0,
        &ShootingUnknowns::zero(1),
        &tight(),
    )
    .unwrap();
    assert!(res[0] > 0.0);
    // Independent check: y'' = e^{−2y}/2 − ξ y', ξ' = −2 y'^2 by fixed-step RK4.
    let (y1, ixi) = rk4_sphere(0.0, 0.0, 0.0, 0.5, 20_000);
    assert!((res[0] - y1).abs() < 1e-10);
    assert!((res[1] - ixi).abs() < 1e-10);

    let c = HomSpaceSpec::circle();
    let p = SystemParams::new(0.0, 4.0, 1.0).unwrap();
    let l0 = 2.0 * 1f64.tan();
    let res = bvp::shooting_residual(
        &c,
        &p,
        &DirichletData::zero(1),
        1.0,
        &ShootingUnknowns {
            l0: vec![l0],
            xi0: l0,
        },
        &tight(),
    )
    .unwrap();
    assert!(res.iter().all(|v| v.abs() < 1e-9), "{res:?}");
}

fn rk4_sphere(y0: f64, l0: f64, xi0: f64, coeff: f64, steps: usize) -> (f64, f64) {
    let f = |s: [f64; 4]| {
        [
            s[1],
            coeff * (-2.0 * s[0]).exp() - s[2] * s[1],
            -2.0 * s[1] * s[1],
            s[2],
        ]
    };
    let h = 1.0 / steps as f64;
    let mut s = [y0, l0, xi0, 0.0];
    for _ in 0..steps {
        let k1 = f(s);
        let k2 = f(std::array::from_fn(|i| s[i] + 0.5 * h * k1[i]));
        let k3 = f(std::array::from_fn(|i| s[i] + 0.5 * h * k2[i]));
        let k4 = f(std::array::from_fn(|i| s[i] + h * k3[i]));
        s = std::array::from_fn(|i| s[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]));
    }
    (s[0], s[3])
}

#[test]
fn dirichlet_torus_zero_solution() {
    let t2 = HomSpaceSpec::torus(2).unwrap();
    let p = SystemParams::new(1.0, 0.0, 1.0).unwrap();
    let sol =
        bvp::solve_dirichlet(&t2, &p, &DirichletData::zero(1), &BvpOptions::default()).unwrap();
    assert_eq!(sol.boundary_error, 0.0);
    assert_eq!(sol.unknowns, ShootingUnknowns::zero(1));
    assert_eq!(sol.newton_iterations, 0);
}

#[test]
fn dirichlet_sphere_small_lapse_against_collocation() {
    let s2 = HomSpaceSpec::sphere2();
    let p = SystemParams::new(1.0, 0.0, 0.01).unwrap();
    let data = DirichletData::new(vec![0.0], vec![0.1], 0.0, 0.0).unwrap();
    let sol = bvp::solve_dirichlet(&s2, &p, &data, &BvpOptions::default()).unwrap();
    assert!(sol.boundary_error <= 1e-8);
    assert!(sol.integral_error <= 1e-8);
    assert!(sol.potential_error() <= 1e-8);

    let mesh = collocation::solve(&p, &data, 200);
    let traj = &sol.trajectory;
    let mut worst = 0.0_f64;
    for (k, t) in mesh.t.iter().enumerate() {
        let s = traj.state_at(*t).unwrap();
        worst = worst
            .max((s.y[0] - mesh.y[k]).abs())
            .max((s.xi - mesh.xi[k]).abs());
    }
    assert!(worst < 1e-4, "collocation mismatch {worst}");
}

#[test]
fn circle_beyond_first_eigenvalue_fails_to_continue() {
    let c = HomSpaceSpec::circle();
    let p = SystemParams::new(0.7, 10.0, 1.0).unwrap();
    let data = DirichletData::new(vec![0.2], vec![0.2], 0.0, 0.0).unwrap();
    let err = bvp::solve_dirichlet(&c, &p, &data, &BvpOptions::default()).unwrap_err();
    match err {
        Error::ContinuationStalled { h2_reached, .. } => assert!(h2_reached < 1.0),
        Error::NewtonDiverged { .. } => {}
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn limit_system_examples() {
    let opts = BvpOptions::default();
    let zero = bvp::solve_limit_system(
        &[2, 3],
        1.0,
        &DirichletData::new(vec![0.3, -0.1], vec![0.5, 0.2], 0.0, 1.0).unwrap(),
        0.0,
        &opts,
    )
    .unwrap();
    assert_eq!(zero.unknowns, ShootingUnknowns::zero(2));

    let flat = bvp::solve_limit_system(&[1], 0.0, &DirichletData::zero(1), 1.0, &opts).unwrap();
    assert_eq!(flat.unknowns, ShootingUnknowns::zero(1));

    // ∫L = −0.2 with c = 0: y(0) = 0, y(1) = −0.2, u1 − u0 = −0.2.
    let data = DirichletData::new(vec![0.0], vec![-0.2], 0.0, -0.2).unwrap();
    assert_eq!(data.c(&[1]), 0.0);
    let sol = bvp::solve_limit_system(&[1], 0.0, &data, 1.0, &opts).unwrap();
    let unknowns = sol.unknowns.clone();
    let t1 = HomSpaceSpec::flat(vec![1]).unwrap();
    let p0 = SystemParams::new(0.0, 0.0, 0.0).unwrap();
    let check = dynamics::integrate(
        &t1,
        &p0,
        &PhaseState::new(0.0, vec![0.0], unknowns.l0.clone(), unknowns.xi0),
        1.0,
        &IntegratorOptions::with_tolerance(1e-13),
    )
    .unwrap();
    let int_l = check.last().y[0];
    assert!((int_l + 0.2).abs() <= 1e-8);
    assert!(check.integral_xi(check.len() - 1).abs() <= 1e-8);
}

#[test]
fn symmetric_shoot_examples() {
    let (y, _) = bvp::symmetric_shoot(5.0, &tight()).unwrap();
    let oracle = (-10f64).exp() / 8.0;
    assert!(((y - 5.0) - oracle).abs() <= 0.1 * oracle);

    let sol = bvp::symmetric_solution(5.0, &tight()).unwrap();
    let traj = &sol.trajectory;
    assert!(traj.last().xi < 0.0);
    for s in traj.samples() {
        let mirror = traj.state_at(1.0 - s.t).unwrap();
        assert!((s.xi + mirror.xi).abs() <= 1e-8);
    }
    assert!(sol.endpoint_gap <= 1e-8);
}

#[test]
fn circle_check_examples() {
    let opts = tight();
    let v = bvp::circle_nonexistence_check(9.0, 0.0, 0.0, 0.0, 0.0, &opts).unwrap();
    let CircleVerdict::Solvable(w) = v else {
        panic!("λ = 9 should be solvable")
    };
    for s in w.trajectory.samples() {
        let exact = 3.0 * (3.0 * (0.5 - s.t)).tan();
        assert!((s.l[0] - exact).abs() <= 1e-7 * (1.0 + exact.abs()));
    }

    let v = bvp::circle_nonexistence_check(10.0, 0.0, 0.0, 0.0, 0.0, &opts).unwrap();
    assert_eq!(v.as_str(), "unsolvable");

    let v = bvp::circle_nonexistence_check(0.0, 0.3, 0.3, 1.0, 0.0, &opts).unwrap();
    let CircleVerdict::Solvable(w) = v else {
        panic!("λ = 0 should be solvable")
    };
    assert_eq!(w.l0, 0.0);
    assert!(w.trajectory.samples().all(|s| s.l[0] == 0.0));
}

/// Trapezoidal collocation for the `n = 1` sphere Dirichlet problem in the
/// unknowns `(y, L, ξ)` on a uniform mesh, solved by Newton with a dense
/// finite-difference Jacobian. Independent of the shooting code.
mod collocation {
    use coqe_core::bvp::DirichletData;
    use coqe_core::dynamics::SystemParams;
    use coqe_core::linalg::{self, Matrix};

    pub struct Mesh {
        pub t: Vec<f64>,
        pub y: Vec<f64>,
        pub xi: Vec<f64>,
    }

    fn rhs(p: &SystemParams, y: f64, l: f64, xi: f64) -> [f64; 3] {
        let tr = 2.0 * l;
        let r = 0.5 * (-2.0 * y).exp();
        [
            l,
            -xi * l + p.h2 * r - p.h2 * p.lambda,
            -2.0 * l * l - p.m * (tr - xi).powi(2) - p.h2 * p.lambda,
        ]
    }

    fn residual(p: &SystemParams, data: &DirichletData, n: usize, x: &[f64]) -> Vec<f64> {
        let h = 1.0 / n as f64;
        let at = |k: usize| (x[3 * k], x[3 * k + 1], x[3 * k + 2]);
        let mut out = Vec::with_capacity(x.len());
        out.push(x[0] - data.a[0]);
        for k in 0..n {
            let (y0, l0, x0) = at(k);
            let (y1, l1, x1) = at(k + 1);
            let f0 = rhs(p, y0, l0, x0);
            let f1 = rhs(p, y1, l1, x1);
            out.push(y1 - y0 - 0.5 * h * (f0[0] + f1[0]));
            out.push(l1 - l0 - 0.5 * h * (f0[1] + f1[1]));
            out.push(x1 - x0 - 0.5 * h * (f0[2] + f1[2]));
        }
        out.push(x[3 * n] - data.b[0]);
        let int: f64 = (0..n)
            .map(|k| 0.5 * h * (x[3 * k + 2] + x[3 * k + 5]))
            .sum();
        out.push(int - data.c(&[2]));
        // 3(n+1) unknowns, 3n + 3 equations.
        out
    }

    pub fn solve(p: &SystemParams, data: &DirichletData, n: usize) -> Mesh {
        let size = 3 * (n + 1);
        let mut x = vec![0.0; size];
        for k in 0..=n {
            x[3 * k] = data.a[0] + (data.b[0] - data.a[0]) * k as f64 / n as f64;
        }
        for _ in 0..30 {
            let f = residual(p, data, n, &x);
            if linalg::norm_inf(&f) < 1e-12 {
                break;
            }
            let mut jac = Matrix::zeros(size);
            for j in 0..size {
                let mut xp = x.clone();
                xp[j] += 1e-7;
                let fp = residual(p, data, n, &xp);
                for i in 0..size {
                    jac.set(i, j, (fp[i] - f[i]) / 1e-7);
                }
            }
            let rhs: Vec<f64> = f.iter().map(|v| -v).collect();
            let dx = linalg::solve(&jac, &rhs).expect("collocation Jacobian is regular");
            for (a, b) in x.iter_mut().zip(dx) {
                *a += b;
            }
        }
        Mesh {
            t: (0..=n).map(|k| k as f64 / n as f64).collect(),
            y: (0..=n).map(|k| x[3 * k]).collect(),
            xi: (0..=n).map(|k| x[3 * k + 2]).collect(),
        }
    }
}
