use alloc::string::String;

/// Which continuation parameter was being marched when a solve stalled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContinuationStage {
    /// Homotopy in the boundary data at `h² = 0`.
    Homotopy,
    /// Continuation in `h²` at full boundary data.
    Lapse,
}

impl core::fmt::Display for ContinuationStage {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            ContinuationStage::Homotopy => f.write_str("p"),
            ContinuationStage::Lapse => f.write_str("h2"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("exponential overflow: |y[{index}]| = {value} exceeds the admissible range")]
    DomainOverflow { index: usize, value: f64 },

    #[error("invalid space: {0}")]
    InvalidSpace(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid options: {0}")]
    InvalidOptions(String),

    #[error("non-finite state at t = {t}")]
    NonFiniteState { t: f64 },

    #[error("degenerate space: R vanishes identically, bound ratios are undefined")]
    DegenerateSpace,

    #[error("shot diverged at t = {t}")]
    ShotDiverged { t: f64 },

    #[error("newton failed to converge after {iterations} iterations (residual {residual:e})")]
    NewtonDiverged { iterations: usize, residual: f64 },

    #[error("continuation stalled in {stage} at {reached} (largest h2 reached: {h2_reached})")]
    ContinuationStalled {
        stage: ContinuationStage,
        reached: f64,
        h2_reached: f64,
    },

    #[error("no singularity: integration reached t = {t_end} without blow-up")]
    NoSingularity { t_end: f64 },

    #[error("time {t} outside trajectory range [{start}, {end}]")]
    OutOfRange { t: f64, start: f64, end: f64 },

    #[error("trajectory has no reconstructed potential u")]
    MissingPotential,

    #[error("empty trajectory")]
    EmptyTrajectory,

    #[error("every shot in the scan diverged")]
    AllShotsDiverged,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
