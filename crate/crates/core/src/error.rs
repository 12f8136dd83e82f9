use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter {name} = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("argument {value} outside the domain of {operation}: {reason}")]
    Domain {
        operation: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("no bound state: omega0 + gamma - int J(w)/w dw = {margin} > 0")]
    NoBoundState { margin: f64 },

    #[error("root bracket failure in {0}")]
    Bracket(&'static str),

    #[error("quadrature did not reach tolerance {tol:e} (estimate {estimate:e})")]
    Quadrature { tol: f64, estimate: f64 },

    #[error("integration unstable at t = {time}: |c| = {modulus} exceeds 1; reduce dt")]
    Unstable { time: f64, modulus: f64 },

    #[error("too many steps: t_end/dt = {0} exceeds 1e7")]
    TooManySteps(f64),

    #[error("trajectory does not match: {0}")]
    Mismatch(String),

    #[error("fock cutoff {cutoff} too small for |alpha| = {alpha}; use at least {suggested}")]
    CutoffTooSmall {
        cutoff: usize,
        alpha: f64,
        suggested: usize,
    },

    #[error("state is not normalized (norm^2 = {0})")]
    NotNormalized(f64),

    #[error("density matrix assembly failed: trace = {0}")]
    Trace(f64),

    #[error("invalid state: eigenvalue {0} below -1e-8")]
    NegativeEigenvalue(f64),

    #[error("density matrix carries no gamma derivative")]
    MissingDerivative,

    #[error("inconsistent alpha = {alpha} for N = {n_avg} (expected N(alpha) = {expected})")]
    InconsistentPhotonNumber { alpha: f64, n_avg: f64, expected: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
