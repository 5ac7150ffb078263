use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("no sign change on [{lo}, {hi}]: f(lo) = {f_lo}, f(hi) = {f_hi}")]
    Bracket { lo: f64, hi: f64, f_lo: f64, f_hi: f64 },

    #[error("root search did not converge after {iterations} iterations; last bracket [{lo}, {hi}]")]
    Convergence { iterations: usize, lo: f64, hi: f64 },

    #[error("density does not integrate to one (deficit {deficit:e})")]
    Normalization { deficit: f64 },

    #[error("invalid density: {0}")]
    Density(String),

    #[error("density is not bounded away from zero: {0}")]
    Regularity(String),

    #[error("argument {v} outside [0, 1]")]
    Domain { v: f64 },

    #[error("invalid wage function: {0}")]
    Wage(String),

    #[error("invalid polynomial segments: {0}")]
    Segments(String),

    #[error("infeasible outcome: {0}")]
    Feasibility(String),

    #[error("invalid hiring plan: {0}")]
    Hiring(String),

    #[error("outcome is not in the core: {0}")]
    NotCore(String),

    #[error("no solution: {0}")]
    Infeasible(String),

    #[error("grid too coarse: {0}")]
    Resolution(String),

    #[error("not applicable: {0}")]
    Inapplicable(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("config: {0}")]
    Config(String),

    #[error("io: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
