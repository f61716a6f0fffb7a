use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::DirectionName;

#[derive(Debug, Parser)]
#[command(
    name = "coqe",
    version,
    about = "Cohomogeneity-one quasi-Einstein ODE solver"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// Run configuration (TOML). May also be given positionally.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Directory for the experiment bundle.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Worker threads for scans. Defaults to the number of cores.
    #[arg(long, global = true, env = "COQE_THREADS", value_name = "N")]
    pub threads: Option<usize>,
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
    #[arg(long, short, global = true)]
    pub verbose: bool,
}

#[derive(Debug, Clone, Args)]
pub struct ConfigArg {
    #[arg(value_name = "CONFIG")]
    pub file: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DirectionArg {
    Forward,
    Backward,
}

impl From<DirectionArg> for DirectionName {
    fn from(d: DirectionArg) -> Self {
        match d {
            DirectionArg::Forward => DirectionName::Forward,
            DirectionArg::Backward => DirectionName::Backward,
        }
    }
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Integrate an initial value problem.
    RunIvp(ConfigArg),
    /// Solve a Dirichlet problem by shooting with continuation.
    SolveBvp(ConfigArg),
    /// Solve the h2 = 0 limit system.
    SolveLimit(ConfigArg),
    /// Scan symmetric sphere shots for folds of k1 -> y(1).
    ScanNonuniqueness {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long, allow_hyphen_values = true)]
        k1_min: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        k1_max: Option<f64>,
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Integrate towards a singularity and fit the blow-up rate.
    AnalyzeBlowup {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long, value_enum)]
        direction: Option<DirectionArg>,
        /// Inline array `[y_1.., L_1.., xi]`.
        #[arg(long, allow_hyphen_values = true)]
        seed_state: Option<String>,
        /// Time of the seed state.
        #[arg(long, allow_hyphen_values = true)]
        seed_time: Option<f64>,
    },
    /// Resample a trajectory at the scale 1/M around an anchor time.
    Rescale {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long, allow_hyphen_values = true)]
        anchor: Option<f64>,
        #[arg(long)]
        window: Option<f64>,
    },
    /// Decide solvability of the circle Dirichlet problem.
    CheckCircle {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long, allow_hyphen_values = true)]
        lambda: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        a: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        b: Option<f64>,
        #[arg(long)]
        m: Option<f64>,
    },
    /// Sample the curvature ratio bounds of a space.
    EstimateBounds {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        box_radius: Option<f64>,
    },
    /// List the built-in spaces.
    Presets,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::RunIvp(_) => "run-ivp",
            Command::SolveBvp(_) => "solve-bvp",
            Command::SolveLimit(_) => "solve-limit",
            Command::ScanNonuniqueness { .. } => "scan-nonuniqueness",
            Command::AnalyzeBlowup { .. } => "analyze-blowup",
            Command::Rescale { .. } => "rescale",
            Command::CheckCircle { .. } => "check-circle",
            Command::EstimateBounds { .. } => "estimate-bounds",
            Command::Presets => "presets",
        }
    }

    pub fn config_file(&self) -> Option<&PathBuf> {
        match self {
            Command::RunIvp(c) | Command::SolveBvp(c) | Command::SolveLimit(c) => c.file.as_ref(),
            Command::ScanNonuniqueness { config, .. }
            | Command::AnalyzeBlowup { config, .. }
            | Command::Rescale { config, .. }
            | Command::CheckCircle { config, .. }
            | Command::EstimateBounds { config, .. } => config.file.as_ref(),
            Command::Presets => None,
        }
    }
}
