//! One function per subcommand. Each takes the effective configuration,
//! writes the bundle when an output directory is set, and returns the text
//! printed on stdout.

use std::path::{Path, PathBuf};
use std::time::Instant;

use coqe_core::bvp::{self, BvpSolution, CircleVerdict, ScanResult};
use coqe_core::dynamics::{self, SystemParams};
use coqe_core::singularity::{self, Diagnostic};
use coqe_core::{HomSpaceSpec, IntegratorOptions, Trajectory};

use crate::cli::{Cli, Command};
use crate::config::{
    self, BlowupBlock, BoundsBlock, CircleBlock, Mode, RescaleBlock, RunConfig, ScanBlock,
};
use crate::error::CliError;
use crate::exec::{resolve_threads, Threaded};
use crate::output::{self, Bundle, Report};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

const DEFAULT_BOUNDS_SAMPLES: usize = 10_000;
const DEFAULT_BOX_RADIUS: f64 = 2.0;

/// Runtime knobs that do not belong in the config snapshot.
#[derive(Debug, Clone)]
pub struct Context {
    pub out: Option<PathBuf>,
    pub threads: usize,
    pub verbose: bool,
}

impl Context {
    fn note(&self, msg: &str) {
        if self.verbose {
            eprintln!("coqe: {msg}");
        }
    }
}

pub fn load_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    RunConfig::parse(&text).map_err(|e| match e {
        CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// Parses argv-level options into the effective config and dispatches.
pub fn run(cli: &Cli) -> Result<String, CliError> {
    let positional = cli.command.config_file();
    let path = match (&cli.global.config, positional) {
        (Some(a), Some(b)) if a != b => {
            return Err(CliError::Config(format!(
                "two configs given: --config {} and {}",
                a.display(),
                b.display()
            )))
        }
        (Some(a), _) => Some(a.clone()),
        (None, b) => b.cloned(),
    };
    let mut cfg = match &path {
        Some(p) => load_config(p)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.global.seed {
        cfg.seed = Some(seed);
    }
    let ctx = Context {
        out: cli.global.out.clone().or_else(|| cfg.out.clone()),
        threads: resolve_threads(cli.global.threads),
        verbose: cli.global.verbose,
    };
    cfg.out = None;
    apply_flags(&cli.command, &mut cfg)?;
    dispatch(&cli.command, &cfg, &ctx)
}

// Folds subcommand flags into the matching mode block so that the snapshot
// alone reproduces the run.
fn apply_flags(cmd: &Command, cfg: &mut RunConfig) -> Result<(), CliError> {
    let missing = |flag: &str, block: &str| {
        CliError::Config(format!("missing --{flag} (or [{block}] block)"))
    };
    match cmd {
        Command::ScanNonuniqueness {
            k1_min,
            k1_max,
            steps,
            ..
        } => {
            let base = cfg.scan;
            let pick = |flag: Option<f64>, from: Option<f64>, name: &str| {
                flag.or(from).ok_or_else(|| missing(name, "scan"))
            };
            cfg.scan = Some(ScanBlock {
                k1_min: pick(*k1_min, base.map(|b| b.k1_min), "k1-min")?,
                k1_max: pick(*k1_max, base.map(|b| b.k1_max), "k1-max")?,
                steps: steps
                    .or(base.map(|b| b.steps))
                    .ok_or_else(|| missing("steps", "scan"))?,
            });
        }
        Command::AnalyzeBlowup {
            direction,
            seed_state,
            seed_time,
            ..
        } => {
            if direction.is_none() && seed_state.is_none() && seed_time.is_none() {
                return Ok(());
            }
            let n = cfg.space()?.n();
            let mut block = match cfg.blowup.clone() {
                Some(b) => b,
                None => BlowupBlock {
                    direction: direction
                        .ok_or_else(|| missing("direction", "blowup"))?
                        .into(),
                    t0: 0.0,
                    y: Vec::new(),
                    l: Vec::new(),
                    xi: 0.0,
                    horizon: None,
                    fit_points: None,
                    rate_limit: None,
                },
            };
            if let Some(d) = direction {
                block.direction = (*d).into();
            }
            if let Some(t) = seed_time {
                block.t0 = *t;
            }
            match seed_state {
                Some(s) => {
                    let v = parse_inline_array(s)?;
                    if v.len() != 2 * n + 1 {
                        return Err(CliError::Config(format!(
                            "--seed-state needs 2n+1 = {} entries [y.., L.., xi], got {}",
                            2 * n + 1,
                            v.len()
                        )));
                    }
                    block.y = v[..n].to_vec();
                    block.l = v[n..2 * n].to_vec();
                    block.xi = v[2 * n];
                }
                None if cfg.blowup.is_none() => return Err(missing("seed-state", "blowup")),
                None => {}
            }
            cfg.blowup = Some(block);
        }
        Command::Rescale { anchor, window, .. } => {
            if let Some(block) = cfg.rescale.as_mut() {
                if let Some(a) = anchor {
                    block.anchor = *a;
                }
                if let Some(w) = window {
                    block.window = *w;
                }
            } else if anchor.is_some() || window.is_some() {
                return Err(CliError::Config(
                    "rescale needs a [rescale] block with the trajectory seed".into(),
                ));
            }
        }
        Command::CheckCircle {
            lambda, a, b, m, ..
        } => {
            let base = cfg.circle;
            let lambda = lambda
                .or(base.map(|c| c.lambda))
                .ok_or_else(|| missing("lambda", "circle"))?;
            cfg.circle = Some(CircleBlock {
                lambda,
                a: a.or(base.map(|c| c.a)).unwrap_or(0.0),
                b: b.or(base.map(|c| c.b)).unwrap_or(0.0),
                m: m.or(base.map(|c| c.m)).unwrap_or(0.0),
                u0: base.map_or(0.0, |c| c.u0),
            });
        }
        Command::EstimateBounds {
            samples,
            box_radius,
            ..
        } => {
            let base = cfg.bounds;
            cfg.bounds = Some(BoundsBlock {
                samples: samples
                    .or(base.map(|b| b.samples))
                    .unwrap_or(DEFAULT_BOUNDS_SAMPLES),
                box_radius: box_radius
                    .or(base.map(|b| b.box_radius))
                    .unwrap_or(DEFAULT_BOX_RADIUS),
            });
        }
        Command::RunIvp(_) | Command::SolveBvp(_) | Command::SolveLimit(_) | Command::Presets => {}
    }
    Ok(())
}

fn parse_inline_array(s: &str) -> Result<Vec<f64>, CliError> {
    #[derive(serde::Deserialize)]
    struct Holder {
        v: Vec<f64>,
    }
    toml::from_str::<Holder>(&format!("v = {s}"))
        .map(|h| h.v)
        .map_err(|e| CliError::Config(format!("--seed-state: {}", e.message().trim())))
}

fn dispatch(cmd: &Command, cfg: &RunConfig, ctx: &Context) -> Result<String, CliError> {
    let started = Instant::now();
    let (mut report, files, lead) = match cmd {
        Command::RunIvp(_) => run_ivp(cfg, ctx)?,
        Command::SolveBvp(_) => solve_bvp(cfg, ctx)?,
        Command::SolveLimit(_) => solve_limit(cfg, ctx)?,
        Command::ScanNonuniqueness { .. } => scan(cfg, ctx)?,
        Command::AnalyzeBlowup { .. } => analyze_blowup(cfg, ctx)?,
        Command::Rescale { .. } => rescale(cfg, ctx)?,
        Command::CheckCircle { .. } => check_circle(cfg, ctx)?,
        Command::EstimateBounds { .. } => estimate_bounds(cfg, ctx)?,
        Command::Presets => return Ok(presets()),
    };
    report
        .section("run")
        .set("command", cmd.name())
        .set("version", VERSION)
        .set("wall_clock_s", started.elapsed().as_secs_f64());
    let text = report.render();
    if let Some(dir) = &ctx.out {
        let mut bundle = Bundle::create(dir)?;
        bundle.write("config.toml", &cfg.to_toml())?;
        for (name, contents) in &files {
            bundle.write(name, contents)?;
        }
        bundle.write("report.toml", &text)?;
        ctx.note(&format!(
            "wrote {} files to {}",
            bundle.files().len(),
            bundle.dir().display()
        ));
    }
    Ok(match lead {
        Some(line) => format!("{line}\n{text}"),
        None => text,
    })
}

type Outcome = (Report, Vec<(String, String)>, Option<String>);

fn space_and_params(cfg: &RunConfig) -> Result<(HomSpaceSpec, SystemParams), CliError> {
    Ok((cfg.space()?, cfg.params()?))
}

fn trajectory_stats(
    report: &mut Report,
    space: &HomSpaceSpec,
    params: &SystemParams,
    traj: &Trajectory,
) {
    let mut s = report.section("trajectory");
    s.set("termination", traj.termination().as_str())
        .set("t_start", traj.t_start())
        .set("t_end", traj.t_end())
        .count("samples", traj.len())
        .count("accepted_steps", traj.accepted_steps())
        .count("rejected_steps", traj.rejected_steps());
    if let Some(t) = traj.blowup_crossing() {
        s.set("blowup_crossing", t);
    }
    if let Ok(r) = dynamics::qe_residual(space, params, traj) {
        s.set("qe_residual", r.max());
    }
    if let Some(u) = traj.u() {
        if let Ok(mu) = dynamics::mu_invariant(params, traj, u) {
            let drift = mu.iter().map(|v| (v - mu[0]).abs()).fold(0.0, f64::max);
            s.set("mu_start", mu[0]).set("mu_drift", drift);
        }
    }
}

fn run_ivp(cfg: &RunConfig, ctx: &Context) -> Result<Outcome, CliError> {
    cfg.require_mode(Mode::Ivp, false)?;
    let (space, params) = space_and_params(cfg)?;
    let block = cfg.ivp.as_ref().expect("checked");
    let opts = cfg.integrator(IntegratorOptions::default())?;
    let init = config::phase_state(block.t0, &block.y, &block.l, block.xi, space.n(), "ivp")?;
    ctx.note(&format!(
        "integrating {} from t = {} to {}",
        space.label(),
        block.t0,
        block.t_end
    ));
    let traj = dynamics::integrate(&space, &params, &init, block.t_end, &opts)?
        .with_potential(block.u0)?;
    let mut report = Report::new();
    trajectory_stats(&mut report, &space, &params, &traj);
    let csv = output::trajectory_csv(&traj, None)?;
    Ok((report, vec![("trajectory.csv".into(), csv)], None))
}

fn bvp_outcome(sol: &BvpSolution) -> Result<Outcome, CliError> {
    let mut report = Report::new();
    report
        .section("solution")
        .set("boundary_error", sol.boundary_error)
        .set("integral_error", sol.integral_error)
        .set("potential_error", sol.potential_error())
        .set("p", sol.p)
        .set("h2_reached", sol.h2_reached)
        .count("newton_iterations", sol.newton_iterations)
        .count("continuation_steps", sol.path.len())
        .floats("l0", &sol.unknowns.l0)
        .set("xi0", sol.unknowns.xi0);
    trajectory_stats(
        &mut report,
        sol.trajectory.space(),
        &sol.params,
        &sol.trajectory,
    );
    let header: Vec<String> = ["p", "h2", "converged", "newton_iters", "residual_norm"]
        .map(String::from)
        .to_vec();
    let rows: Vec<Vec<Option<f64>>> = sol
        .path
        .iter()
        .map(|s| {
            vec![
                Some(s.p),
                Some(s.h2),
                Some(if s.converged { 1.0 } else { 0.0 }),
                Some(s.newton_iters as f64),
                Some(s.residual_norm),
            ]
        })
        .collect();
    let files = vec![
        (
            "trajectory.csv".into(),
            output::trajectory_csv(&sol.trajectory, None)?,
        ),
        ("continuation.csv".into(), output::table_csv(&header, &rows)),
    ];
    Ok((report, files, None))
}

fn solve_bvp(cfg: &RunConfig, ctx: &Context) -> Result<Outcome, CliError> {
    cfg.require_mode(Mode::Dirichlet, false)?;
    let (space, params) = space_and_params(cfg)?;
    let data = cfg.dirichlet.as_ref().expect("checked").data()?;
    let opts = cfg.bvp_options()?;
    ctx.note(&format!(
        "solving Dirichlet problem on {} at h2 = {}",
        space.label(),
        params.h2
    ));
    let sol = bvp::solve_dirichlet(&space, &params, &data, &opts)?;
    bvp_outcome(&sol)
}

fn solve_limit(cfg: &RunConfig, ctx: &Context) -> Result<Outcome, CliError> {
    cfg.require_mode(Mode::Limit, false)?;
    let block = cfg.limit.as_ref().expect("checked");
    let data = bvp::DirichletData::new(block.a.clone(), block.b.clone(), block.u0, block.u1)
        .map_err(|e| CliError::Config(format!("limit: {e}")))?;
    let opts = cfg.bvp_options()?;
    ctx.note(&format!("solving limit system at p = {}", block.p));
    let sol = bvp::solve_limit_system(&block.d, block.m, &data, block.p, &opts)?;
    bvp_outcome(&sol)
}

fn scan(cfg: &RunConfig, ctx: &Context) -> Result<Outcome, CliError> {
    cfg.require_mode(Mode::Scan, false)?;
    if let Some(space) = &cfg.space {
        if space.preset.as_deref() != Some("sphere2") || space.torus_dim.is_some() {
            return Err(CliError::Config(
                "scan-nonuniqueness runs on the sphere2 preset only".into(),
            ));
        }
    }
    let block = cfg.scan.expect("checked");
    let opts = cfg.integrator(IntegratorOptions::with_tolerance(1e-12))?;
    ctx.note(&format!(
        "scanning k1 in [{}, {}] with {} steps on {} threads",
        block.k1_min, block.k1_max, block.steps, ctx.threads
    ));
    let result = bvp::nonuniqueness_scan(
        block.k1_min,
        block.k1_max,
        block.steps,
        &opts,
        &Threaded::new(ctx.threads),
    )?;
    scan_outcome(&result, &opts)
}

fn scan_outcome(result: &ScanResult, opts: &IntegratorOptions) -> Result<Outcome, CliError> {
    let mut report = Report::new();
    let converged = result.points.iter().filter(|p| p.y_end.is_some()).count();
    report
        .section("scan")
        .count("points", result.points.len())
        .count("converged", converged)
        .count("folds", result.folds.len())
        .count("pairs", result.pairs.len());

    let header = vec!["k1".to_string(), "y_end".to_string()];
    let rows: Vec<Vec<Option<f64>>> = result
        .points
        .iter()
        .map(|p| vec![Some(p.k1), p.y_end])
        .collect();
    let mut folds_csv = String::from("kind,index,k1,y_end\n");
    for f in &result.folds {
        folds_csv.push_str(&format!(
            "{},{},{},{}\n",
            f.kind.as_str(),
            f.index,
            output::num(f.k1),
            output::num(f.y_end)
        ));
    }
    let mut files = vec![
        ("scan.csv".to_string(), output::table_csv(&header, &rows)),
        ("folds.csv".to_string(), folds_csv),
    ];
    for (j, pair) in result.pairs.iter().enumerate() {
        let a = bvp::symmetric_solution(pair.k1_a, opts)?;
        let b = bvp::symmetric_solution(pair.k1_b, opts)?;
        let mut sep: f64 = 0.0;
        for k in 0..=400 {
            let t = k as f64 / 400.0;
            let ya = a.trajectory.state_at(t)?.y[0];
            let yb = b.trajectory.state_at(t)?.y[0];
            sep = sep.max((ya - yb).abs());
        }
        report
            .section(&format!("pair_{j}"))
            .set("level", pair.level)
            .set("k1_a", pair.k1_a)
            .set("y_a", pair.y_a)
            .set("k1_b", pair.k1_b)
            .set("y_b", pair.y_b)
            .set("boundary_mismatch", (pair.y_a - pair.y_b).abs())
            .set("separation", sep)
            .set("endpoint_gap_a", a.endpoint_gap)
            .set("endpoint_gap_b", b.endpoint_gap)
            .set("integral_xi_a", a.integral_xi)
            .set("integral_xi_b", b.integral_xi);
        files.push((
            format!("pair_{j}_a.csv"),
            output::trajectory_csv(&a.trajectory, None)?,
        ));
        files.push((
            format!("pair_{j}_b.csv"),
            output::trajectory_csv(&b.trajectory, None)?,
        ));
    }
    let mut tbl = report.section("folds");
    for (j, f) in result.folds.iter().enumerate() {
        tbl.floats(&format!("fold_{j}_{}", f.kind.as_str()), &[f.k1, f.y_end]);
    }
    Ok((report, files, None))
}

fn diagnostic_name(d: &Diagnostic) -> String {
    match d {
        Diagnostic::DimensionHypothesisNotMet => "dimension_hypothesis_not_met".into(),
        Diagnostic::ZeroBakryEmeryParameter => "zero_m".into(),
        Diagnostic::RateBoundViolated { exponent, limit } => {
            format!("rate_bound_violated(exponent={exponent}, limit={limit})")
        }
    }
}

fn analyze_blowup(cfg: &RunConfig, ctx: &Context) -> Result<Outcome, CliError> {
    cfg.require_mode(Mode::Blowup, false)?;
    let (space, params) = space_and_params(cfg)?;
    let block = cfg.blowup.as_ref().expect("checked");
    let seed = config::phase_state(block.t0, &block.y, &block.l, block.xi, space.n(), "blowup")?;
    let opts = cfg.blowup_options()?;
    ctx.note(&format!(
        "integrating {} {:?} from t = {}",
        space.label(),
        block.direction,
        block.t0
    ));
    let (rep, traj) =
        singularity::analyze_blowup(&space, &params, &seed, block.direction.into(), &opts)?;
    let mut report = Report::new();
    let names: Vec<String> = rep.diagnostics.iter().map(diagnostic_name).collect();
    report
        .section("blowup")
        .set("t_sing", rep.t_sing)
        .set("sup_mt", rep.sup_mt)
        .set("exponent", rep.exponent)
        .set("prefactor", rep.prefactor)
        .set("fit_residual", rep.fit_residual)
        .count("fit_samples", rep.fit_samples)
        .floats("fit_window", &[rep.fit_window.0, rep.fit_window.1])
        .set("termination", rep.termination.as_str())
        .set("rate_bound_violated", rep.rate_bound_violated())
        .strings("diagnostics", &names);
    let mut s = report.section("trajectory");
    s.count("samples", traj.len())
        .count("accepted_steps", traj.accepted_steps())
        .count("rejected_steps", traj.rejected_steps());
    let csv = output::trajectory_csv(&traj, Some(rep.t_sing))?;
    Ok((report, vec![("trajectory.csv".into(), csv)], None))
}

fn rescale(cfg: &RunConfig, ctx: &Context) -> Result<Outcome, CliError> {
    cfg.require_mode(Mode::Rescale, false)?;
    let (space, params) = space_and_params(cfg)?;
    let block: &RescaleBlock = cfg.rescale.as_ref().expect("checked");
    let init = config::phase_state(block.t0, &block.y, &block.l, block.xi, space.n(), "rescale")?;
    let opts = cfg.integrator(IntegratorOptions::default())?;
    ctx.note(&format!(
        "rescaling around t = {} with window {}",
        block.anchor, block.window
    ));
    let traj = dynamics::integrate(&space, &params, &init, block.t_end, &opts)?;
    let r = singularity::rescale(&traj, block.anchor, block.window, block.points)?;
    let mut report = Report::new();
    report
        .section("rescale")
        .set("t_anchor", r.t_anchor)
        .set("m_anchor", r.m_anchor)
        .count("samples", r.samples.len())
        .set("residual", r.residual(&space, &params)?);
    trajectory_stats(&mut report, &space, &params, &traj);
    Ok((
        report,
        vec![("rescaled.csv".into(), output::rescaled_csv(&r))],
        None,
    ))
}

fn check_circle(cfg: &RunConfig, ctx: &Context) -> Result<Outcome, CliError> {
    cfg.require_mode(Mode::Circle, false)?;
    let c = cfg.circle.expect("checked");
    let opts = cfg.integrator(IntegratorOptions::default())?;
    ctx.note(&format!("checking circle problem at lambda = {}", c.lambda));
    let verdict = bvp::circle_nonexistence_check(c.lambda, c.a, c.b, c.m, c.u0, &opts)?;
    let mut report = Report::new();
    let mut files = Vec::new();
    {
        let mut s = report.section("circle");
        s.set("verdict", verdict.as_str()).set("lambda", c.lambda);
        match &verdict {
            CircleVerdict::Solvable(w) => {
                s.set("l0", w.l0)
                    .set("closure_error", w.closure_error)
                    .set("residual", w.residual);
                files.push((
                    "witness.csv".to_string(),
                    output::trajectory_csv(&w.trajectory, None)?,
                ));
            }
            CircleVerdict::Unsolvable(e) => {
                s.set("pole_spacing", e.pole_spacing)
                    .count("phases_checked", e.phases_checked)
                    .set("all_blew_up", e.all_blew_up)
                    .set("latest_blowup", e.latest_blowup);
            }
        }
    }
    Ok((report, files, Some(verdict.as_str().to_string())))
}

fn estimate_bounds(cfg: &RunConfig, ctx: &Context) -> Result<Outcome, CliError> {
    cfg.require_mode(Mode::Bounds, false)?;
    let space = cfg.space()?;
    let b = cfg.bounds.expect("checked");
    let seed = cfg.seed.unwrap_or(0);
    ctx.note(&format!(
        "sampling {} points in the box of radius {}",
        b.samples, b.box_radius
    ));
    let est = space.estimate_ricci_bounds(b.samples, b.box_radius, seed)?;
    let mut report = Report::new();
    report
        .section("bounds")
        .set("c1", est.c1)
        .set("c2", est.c2)
        .set("c3", est.c3)
        .count("samples", est.samples)
        .set("box_radius", est.box_radius)
        .set("seed", seed as i64);
    Ok((report, Vec::new(), None))
}

pub fn presets() -> String {
    let torus = HomSpaceSpec::torus(2).expect("valid preset");
    let mut out = String::new();
    for space in [HomSpaceSpec::circle(), HomSpaceSpec::sphere2(), torus] {
        out.push_str(&output::describe_space(&space));
    }
    out.push_str("torus takes torus_dim (default 2) in the [space] block\n");
    out
}
