//! Run configuration files.
//!
//! A config is TOML with a `[space]` block, an optional `[params]` and
//! `[solver]` block, and exactly one mode block naming the experiment:
//! `[ivp]`, `[dirichlet]`, `[limit]`, `[scan]`, `[blowup]`, `[rescale]`,
//! `[circle]` or `[bounds]`.

use std::path::PathBuf;

use coqe_core::bvp::{BvpOptions, DirichletData};
use coqe_core::dynamics::{PhaseState, SystemParams};
use coqe_core::singularity::{BlowupOptions, Direction};
use coqe_core::{HomSpaceSpec, IntegratorOptions};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub space: Option<SpaceBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<ParamsBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ivp: Option<IvpBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dirichlet: Option<DirichletBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub limit: Option<LimitBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scan: Option<ScanBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blowup: Option<BlowupBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rescale: Option<RescaleBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub circle: Option<CircleBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<BoundsBlock>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceBlock {
    /// `circle`, `sphere2` or `torus`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    /// Summand dimension of the `torus` preset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub torus_dim: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<Vec<u32>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<Vec<f64>>,
    /// `[i, k, l, value]` quadruples, zero-based.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<Vec<(usize, usize, usize, f64)>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub monotypic: Option<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsBlock {
    pub m: f64,
    pub lambda: f64,
    pub h2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rel_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub abs_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blowup_threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_step: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_steps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bvp_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_newton_iters: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_step: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_continuation_step: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IvpBlock {
    #[serde(default)]
    pub t0: f64,
    pub t_end: f64,
    pub y: Vec<f64>,
    pub l: Vec<f64>,
    pub xi: f64,
    #[serde(default)]
    pub u0: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DirichletBlock {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    #[serde(default)]
    pub u0: f64,
    #[serde(default)]
    pub u1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LimitBlock {
    pub d: Vec<u32>,
    pub m: f64,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    #[serde(default)]
    pub u0: f64,
    #[serde(default)]
    pub u1: f64,
    #[serde(default = "one")]
    pub p: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanBlock {
    pub k1_min: f64,
    pub k1_max: f64,
    pub steps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DirectionName {
    Forward,
    Backward,
}

impl From<DirectionName> for Direction {
    fn from(d: DirectionName) -> Self {
        match d {
            DirectionName::Forward => Direction::Forward,
            DirectionName::Backward => Direction::Backward,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlowupBlock {
    pub direction: DirectionName,
    pub t0: f64,
    pub y: Vec<f64>,
    pub l: Vec<f64>,
    pub xi: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit_points: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate_limit: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RescaleBlock {
    #[serde(default)]
    pub t0: f64,
    pub t_end: f64,
    pub y: Vec<f64>,
    pub l: Vec<f64>,
    pub xi: f64,
    pub anchor: f64,
    pub window: f64,
    #[serde(default = "default_points")]
    pub points: usize,
}

fn default_points() -> usize {
    101
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CircleBlock {
    pub lambda: f64,
    #[serde(default)]
    pub a: f64,
    #[serde(default)]
    pub b: f64,
    #[serde(default)]
    pub m: f64,
    #[serde(default)]
    pub u0: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsBlock {
    pub samples: usize,
    pub box_radius: f64,
}

/// Which mode block a config carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Ivp,
    Dirichlet,
    Limit,
    Scan,
    Blowup,
    Rescale,
    Circle,
    Bounds,
}

impl Mode {
    pub fn block(self) -> &'static str {
        match self {
            Mode::Ivp => "ivp",
            Mode::Dirichlet => "dirichlet",
            Mode::Limit => "limit",
            Mode::Scan => "scan",
            Mode::Blowup => "blowup",
            Mode::Rescale => "rescale",
            Mode::Circle => "circle",
            Mode::Bounds => "bounds",
        }
    }
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| {
            let msg = e.message().replace('\n', " ");
            match e.span() {
                Some(span) => CliError::Config(format!(
                    "line {}: {}",
                    line_of(text, span.start),
                    msg.trim()
                )),
                None => CliError::Config(msg.trim().to_string()),
            }
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }

    pub fn modes(&self) -> Vec<Mode> {
        let mut m = Vec::new();
        let present = [
            (self.ivp.is_some(), Mode::Ivp),
            (self.dirichlet.is_some(), Mode::Dirichlet),
            (self.limit.is_some(), Mode::Limit),
            (self.scan.is_some(), Mode::Scan),
            (self.blowup.is_some(), Mode::Blowup),
            (self.rescale.is_some(), Mode::Rescale),
            (self.circle.is_some(), Mode::Circle),
            (self.bounds.is_some(), Mode::Bounds),
        ];
        for (on, mode) in present {
            if on {
                m.push(mode);
            }
        }
        m
    }

    /// Checks that the only mode block present is `expected`; `None` means
    /// the command runs without one.
    pub fn require_mode(&self, expected: Mode, optional: bool) -> Result<(), CliError> {
        let modes = self.modes();
        match modes.as_slice() {
            [] if optional => Ok(()),
            [] => Err(CliError::Config(format!(
                "missing [{}] block",
                expected.block()
            ))),
            [m] if *m == expected => Ok(()),
            [m] => Err(CliError::Config(format!(
                "config has a [{}] block but this command needs [{}]",
                m.block(),
                expected.block()
            ))),
            _ => Err(CliError::Config(format!(
                "exactly one mode block is allowed, found {}",
                modes
                    .iter()
                    .map(|m| format!("[{}]", m.block()))
                    .collect::<Vec<_>>()
                    .join(", ")
            ))),
        }
    }

    pub fn space(&self) -> Result<HomSpaceSpec, CliError> {
        let block = self
            .space
            .as_ref()
            .ok_or_else(|| CliError::Config("missing [space] block".into()))?;
        block.build()
    }

    pub fn params(&self) -> Result<SystemParams, CliError> {
        let p = self
            .params
            .ok_or_else(|| CliError::Config("missing [params] block".into()))?;
        SystemParams::new(p.m, p.lambda, p.h2).map_err(|e| CliError::Config(format!("params: {e}")))
    }

    pub fn integrator(&self, default: IntegratorOptions) -> Result<IntegratorOptions, CliError> {
        let mut o = default;
        if let Some(s) = &self.solver {
            if let Some(v) = s.rel_tol {
                o.rel_tol = v;
            }
            if let Some(v) = s.abs_tol {
                o.abs_tol = v;
            }
            if let Some(v) = s.blowup_threshold {
                o.blowup_threshold = v;
            }
            if let Some(v) = s.min_step {
                o.min_step = v;
            }
            if let Some(v) = s.max_steps {
                o.max_steps = v;
            }
        }
        o.validate()
            .map_err(|e| CliError::Config(format!("solver: {e}")))?;
        Ok(o)
    }

    pub fn bvp_options(&self) -> Result<BvpOptions, CliError> {
        let base = BvpOptions::default();
        let mut o = BvpOptions {
            integrator: self.integrator(base.integrator)?,
            ..base
        };
        if let Some(s) = &self.solver {
            if let Some(v) = s.bvp_tol {
                o.bvp_tol = v;
            }
            if let Some(v) = s.max_newton_iters {
                o.max_newton_iters = v;
            }
            if let Some(v) = s.initial_step {
                o.initial_step = v;
            }
            if let Some(v) = s.min_continuation_step {
                o.min_step = v;
            }
        }
        o.validate()
            .map_err(|e| CliError::Config(format!("solver: {e}")))?;
        Ok(o)
    }

    pub fn blowup_options(&self) -> Result<BlowupOptions, CliError> {
        let base = BlowupOptions::default();
        let mut o = BlowupOptions {
            integrator: self.integrator(base.integrator)?,
            ..base
        };
        if let Some(b) = &self.blowup {
            if let Some(v) = b.horizon {
                o.horizon = v;
            }
            if let Some(v) = b.fit_points {
                o.fit_points = v;
            }
            if let Some(v) = b.rate_limit {
                o.rate_limit = v;
            }
        }
        Ok(o)
    }
}

impl SpaceBlock {
    pub fn build(&self) -> Result<HomSpaceSpec, CliError> {
        let bad = |key: &str, msg: String| CliError::Config(format!("space.{key}: {msg}"));
        if let Some(name) = &self.preset {
            let explicit =
                self.d.is_some() || self.beta.is_some() || self.gamma.is_some() || self.n.is_some();
            if explicit {
                return Err(bad(
                    "preset",
                    "cannot be combined with n, d, beta or gamma".into(),
                ));
            }
            let mut space = preset(name, self.torus_dim).map_err(|m| bad("preset", m))?;
            if let Some(label) = &self.label {
                space = space.with_label(label.clone());
            }
            if let Some(flag) = self.monotypic {
                space = space.with_monotypic_asserted(flag);
            }
            return Ok(space);
        }
        if self.torus_dim.is_some() {
            return Err(bad(
                "torus_dim",
                "only applies to preset = \"torus\"".into(),
            ));
        }
        let d = self
            .d
            .clone()
            .ok_or_else(|| bad("d", "required without a preset".into()))?;
        if let Some(n) = self.n {
            if n != d.len() {
                return Err(bad("n", format!("n = {n} but d has {} entries", d.len())));
            }
        }
        let beta = self.beta.clone().unwrap_or_else(|| vec![0.0; d.len()]);
        let gamma = self.gamma.clone().unwrap_or_default();
        let label = self.label.clone().unwrap_or_else(|| "custom".into());
        let space =
            HomSpaceSpec::new(d, beta, &gamma, label).map_err(|e| bad("gamma", e.to_string()))?;
        Ok(match self.monotypic {
            Some(flag) => space.with_monotypic_asserted(flag),
            None => space,
        })
    }
}

pub fn preset(name: &str, torus_dim: Option<u32>) -> Result<HomSpaceSpec, String> {
    match name {
        "circle" => Ok(HomSpaceSpec::circle()),
        "sphere2" => Ok(HomSpaceSpec::sphere2()),
        "torus" => HomSpaceSpec::torus(torus_dim.unwrap_or(2)).map_err(|e| e.to_string()),
        other => Err(format!(
            "unknown preset `{other}` (known: circle, sphere2, torus)"
        )),
    }
}

pub fn phase_state(
    t: f64,
    y: &[f64],
    l: &[f64],
    xi: f64,
    n: usize,
    block: &str,
) -> Result<PhaseState, CliError> {
    if y.len() != n || l.len() != n {
        return Err(CliError::Config(format!(
            "{block}: y and l need {n} entries, got {} and {}",
            y.len(),
            l.len()
        )));
    }
    Ok(PhaseState::new(t, y.to_vec(), l.to_vec(), xi))
}

impl DirichletBlock {
    pub fn data(&self) -> Result<DirichletData, CliError> {
        DirichletData::new(self.a.clone(), self.b.clone(), self.u0, self.u1)
            .map_err(|e| CliError::Config(format!("dirichlet: {e}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
seed = 7

[space]
d = [2, 3]
beta = [1.0, 0.5]
gamma = [[0, 1, 1, 0.3], [1, 0, 1, 0.3]]
label = "pair"

[params]
m = 1.0
lambda = 0.0
h2 = 0.01

[dirichlet]
a = [0.0, 0.1]
b = [0.1, 0.0]
"#;

    #[test]
    fn parses_explicit_space() {
        let cfg = RunConfig::parse(SAMPLE).unwrap();
        let space = cfg.space().unwrap();
        assert_eq!(space.d(), &[2, 3]);
        assert_eq!(space.gamma(0, 1, 1), 0.3);
        assert_eq!(cfg.modes(), vec![Mode::Dirichlet]);
    }

    #[test]
    fn round_trips() {
        let cfg = RunConfig::parse(SAMPLE).unwrap();
        let again = RunConfig::parse(&cfg.to_toml()).unwrap();
        assert_eq!(cfg, again);
    }

    #[test]
    fn unknown_key_reports_line() {
        let err = RunConfig::parse("[space]\npreset = \"sphere2\"\nbogus = 1\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 3"), "{msg}");
        assert!(msg.contains("bogus"), "{msg}");
    }

    #[test]
    fn two_mode_blocks_are_rejected() {
        let cfg = RunConfig::parse(
            "[scan]\nk1_min = 1.0\nk1_max = 2.0\nsteps = 3\n[circle]\nlambda = 1.0\n",
        )
        .unwrap();
        assert!(cfg.require_mode(Mode::Scan, false).is_err());
    }

    #[test]
    fn preset_with_explicit_data_is_rejected() {
        let cfg = RunConfig::parse("[space]\npreset = \"circle\"\nd = [1]\n").unwrap();
        assert!(cfg.space().is_err());
    }
}
