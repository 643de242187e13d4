use thiserror::Error;

/// Errors raised by the kinematics, screw and planning layers.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    /// A caller broke an operation precondition (shape, unit norm, screw kind...).
    #[error("contract violation: {0}")]
    Contract(String),

    /// The annihilator has more than one null direction, so the output twist is not unique.
    #[error("degenerate annihilator: smallest singular values {0:e} and {1:e} are both below tolerance")]
    DegenerateAnnihilator(f64, f64),

    #[error("newton iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("pose is out of workspace: {0}")]
    OutOfWorkspace(String),

    #[error("infeasible joint command: {0}")]
    InfeasibleCommand(String),

    /// Every proximity index at the pose is undefined.
    #[error("no defined index pair at this pose")]
    UndefinedIndex,

    /// The avoidance step found no feasible candidate.
    #[error("trapped at t = {t}: {reason}")]
    Trapped { t: f64, reason: String },

    #[error("invalid trajectory: {0}")]
    Trajectory(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
