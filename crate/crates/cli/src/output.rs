//! CSV tables, reports and experiment bundles.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use coqe_core::singularity::{blowup_functional, RescaledTrajectory};
use coqe_core::Trajectory;

use crate::error::CliError;

/// Round-trip precision: 17 significant digits.
pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn cell(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

/// Generic numeric table; `None` cells are left empty.
pub fn table_csv(header: &[String], rows: &[Vec<Option<f64>>]) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(|v| cell(*v)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

fn indexed(prefix: &str, n: usize) -> impl Iterator<Item = String> + '_ {
    (1..=n).map(move |i| format!("{prefix}_{i}"))
}

/// `t,y_1..y_n,L_1..L_n,xi,u,M,Mt`. `Mt` is `M·|t − origin|` and only
/// filled when an origin (usually the singular time) is given.
pub fn trajectory_csv(traj: &Trajectory, mt_origin: Option<f64>) -> Result<String, CliError> {
    let n = traj.n();
    let mut header = vec!["t".to_string()];
    header.extend(indexed("y", n));
    header.extend(indexed("L", n));
    header.extend(["xi", "u", "M", "Mt"].map(String::from));
    let u = traj.u();
    let mut rows = Vec::with_capacity(traj.len());
    for (k, s) in traj.samples().enumerate() {
        let mut row: Vec<Option<f64>> = Vec::with_capacity(2 * n + 5);
        row.push(Some(s.t));
        row.extend(s.y.iter().map(|v| Some(*v)));
        row.extend(s.l.iter().map(|v| Some(*v)));
        row.push(Some(s.xi));
        row.push(u.map(|u| u[k]));
        let (m, mt) = match blowup_functional(traj.space(), &s, mt_origin.unwrap_or(0.0)) {
            Ok((m, mt)) => (Some(m), mt_origin.map(|_| mt.abs())),
            Err(_) => (None, None),
        };
        row.push(m);
        row.push(mt);
        rows.push(row);
    }
    Ok(table_csv(&header, &rows))
}

/// `s,y_1..,L_1..,xi` of a rescaled window.
pub fn rescaled_csv(r: &RescaledTrajectory) -> String {
    let n = r.samples.first().map_or(0, |s| s.y.len());
    let mut header = vec!["s".to_string()];
    header.extend(indexed("y", n));
    header.extend(indexed("L", n));
    header.push("xi".into());
    let rows: Vec<Vec<Option<f64>>> = r
        .samples
        .iter()
        .map(|s| {
            let mut row = vec![Some(s.s)];
            row.extend(s.y.iter().chain(&s.l).map(|v| Some(*v)));
            row.push(Some(s.xi));
            row
        })
        .collect();
    table_csv(&header, &rows)
}

/// Structured summary emitted as TOML.
#[derive(Debug, Default, Clone)]
pub struct Report {
    root: toml::Table,
}

impl Report {
    pub fn new() -> Self {
        Report::default()
    }

    pub fn section(&mut self, name: &str) -> Section<'_> {
        let entry = self
            .root
            .entry(name.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        match entry {
            toml::Value::Table(t) => Section(t),
            _ => unreachable!("report sections are tables"),
        }
    }

    pub fn render(&self) -> String {
        toml::to_string(&self.root).expect("report is always serializable")
    }
}

pub struct Section<'a>(&'a mut toml::Table);

impl Section<'_> {
    pub fn set(&mut self, key: &str, value: impl Into<toml::Value>) -> &mut Self {
        self.0.insert(key.to_string(), value.into());
        self
    }

    pub fn floats(&mut self, key: &str, values: &[f64]) -> &mut Self {
        let arr = values.iter().map(|v| toml::Value::Float(*v)).collect();
        self.0.insert(key.to_string(), toml::Value::Array(arr));
        self
    }

    pub fn strings(&mut self, key: &str, values: &[String]) -> &mut Self {
        let arr = values
            .iter()
            .map(|v| toml::Value::String(v.clone()))
            .collect();
        self.0.insert(key.to_string(), toml::Value::Array(arr));
        self
    }

    pub fn count(&mut self, key: &str, v: usize) -> &mut Self {
        self.set(key, v as i64)
    }
}

/// A directory holding one run: `config.toml`, CSVs and `report.toml`.
#[derive(Debug, Clone)]
pub struct Bundle {
    dir: PathBuf,
    written: Vec<String>,
}

impl Bundle {
    pub fn create(dir: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        Ok(Bundle {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<(), CliError> {
        let path = self.dir.join(name);
        std::fs::write(&path, contents).map_err(|e| CliError::io(&path, e))?;
        self.written.push(name.to_string());
        Ok(())
    }

    pub fn files(&self) -> &[String] {
        &self.written
    }
}

/// Human-readable preset catalogue line block.
pub fn describe_space(space: &coqe_core::HomSpaceSpec) -> String {
    let flags = space.hypothesis_flags();
    let mut s = String::new();
    let _ = writeln!(s, "{}", space.label());
    let _ = writeln!(s, "  n = {}", space.n());
    let _ = writeln!(s, "  d = {:?}", space.d());
    let _ = writeln!(s, "  beta = {:?}", space.beta());
    let gamma = space.gamma_entries();
    if gamma.is_empty() {
        let _ = writeln!(s, "  gamma = 0");
    } else {
        let _ = writeln!(s, "  gamma = {gamma:?}");
    }
    let _ = writeln!(s, "  monotypic = {}", flags.monotypic_asserted);
    let _ = writeln!(s, "  dim_at_least_two = {}", flags.dimension_at_least_two);
    let _ = writeln!(s, "  degenerate = {}", flags.degenerate);
    s
}
