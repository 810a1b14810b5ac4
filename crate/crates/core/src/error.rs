use thiserror::Error;

/// Crate-wide error type. Each variant belongs to one [`ErrorClass`], which the
/// command-line front end maps onto a process exit code.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid field: {0}")]
    InvalidField(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("cannot normalize a field with zero mass")]
    DegenerateNormalization,

    #[error("inverse transform left an imaginary residue of {residue:.3e} (relative), aliasing suspected")]
    ImaginaryResidue { residue: f64 },

    #[error("target window lies entirely outside the source domain")]
    DomainCoverage,

    #[error("invalid potential: {0}")]
    InvalidPotential(String),

    #[error("potentials share no common zero")]
    NoCommonZero,

    #[error("moment of order {0} diverges for a |x|^-2 tail (order must be < 3)")]
    DivergentMoment(f64),

    #[error("{method} did not converge after {iterations} iterations (last residual {residual:.3e})")]
    NonConvergence {
        method: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("{0} collapsed to the zero field")]
    DegenerateIteration(&'static str),

    #[error("energy stagnated at iteration {iteration}: step size {step:.3e} cannot decrease energy {energy:.12e} (residual {residual:.3e})")]
    Stagnation {
        iteration: usize,
        step: f64,
        energy: f64,
        residual: f64,
    },

    #[error("mass constraint violated: component {component} has mass {mass}")]
    Constraint { component: usize, mass: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("ladder point eps = {eps:.4e} is under-resolved: spacing {spacing:.4e} gives fewer than {nodes} nodes across the core; use n_points >= {suggested_n_points}")]
    Resolution {
        eps: f64,
        spacing: f64,
        nodes: f64,
        suggested_n_points: usize,
    },

    #[error("sweep failed at every ladder point")]
    SweepFailed,

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("verification failed: {0}")]
    Verification(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Coarse classification used for exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    NonConvergence,
    Verification,
    Other,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Config { .. } | Error::Resolution { .. } | Error::InvalidPotential(_) => {
                ErrorClass::Config
            }
            Error::NonConvergence { .. }
            | Error::Stagnation { .. }
            | Error::DegenerateIteration(_)
            | Error::SweepFailed => ErrorClass::NonConvergence,
            Error::Verification(_) => ErrorClass::Verification,
            _ => ErrorClass::Other,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.class() {
            ErrorClass::Config => 2,
            ErrorClass::NonConvergence => 3,
            ErrorClass::Verification => 4,
            ErrorClass::Other => 1,
        }
    }

    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }
}
