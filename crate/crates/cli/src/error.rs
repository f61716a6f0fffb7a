use std::path::PathBuf;

use coqe_core::Error as CoreError;

/// Exit status for every failure the front end can report.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitKind {
    BadInput = 1,
    Stalled = 2,
    Diverged = 3,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Solver(#[from] CoreError),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn exit(&self) -> ExitKind {
        match self {
            CliError::Config(_) | CliError::Io { .. } => ExitKind::BadInput,
            CliError::Solver(e) => match e {
                CoreError::ContinuationStalled { .. } => ExitKind::Stalled,
                CoreError::NewtonDiverged { .. }
                | CoreError::ShotDiverged { .. }
                | CoreError::AllShotsDiverged
                | CoreError::DomainOverflow { .. }
                | CoreError::NonFiniteState { .. } => ExitKind::Diverged,
                _ => ExitKind::BadInput,
            },
        }
    }

    /// Short machine-readable tag printed as `error[tag]`.
    pub fn tag(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Io { .. } => "io",
            CliError::Solver(e) => match e {
                CoreError::ContinuationStalled { .. } => "stalled",
                CoreError::NewtonDiverged { .. } => "newton-diverged",
                CoreError::ShotDiverged { .. } | CoreError::AllShotsDiverged => "shot-diverged",
                CoreError::DomainOverflow { .. } | CoreError::NonFiniteState { .. } => "overflow",
                CoreError::NoSingularity { .. } => "no-singularity",
                CoreError::DegenerateSpace => "degenerate-space",
                _ => "invalid-input",
            },
        }
    }

    /// The one-line report written to stderr.
    pub fn line(&self) -> String {
        let msg = self.to_string().replace('\n', " ");
        format!("error[{}]: {}", self.tag(), msg)
    }
}
