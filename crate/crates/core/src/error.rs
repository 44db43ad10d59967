use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate steady states: roots at u={0} and u={1} are closer than the tangency tolerance")]
    Degenerate(f64, f64),

    #[error("parameter point lies on a region boundary: {0}")]
    Boundary(String),

    #[error("no boundary crossing for k1={k1} in the searched k2 window")]
    MissingBoundary { k1: f64 },

    #[error("not applicable: {0}")]
    NotApplicable(String),

    #[error("grid violates its stability limit: {0}")]
    Unstable(String),

    #[error("solution blew up at t={t}, x={x}")]
    BlowUp { t: f64, x: f64 },

    #[error("no front found: {0}")]
    NoFront(String),

    #[error("complex mu pair at the nontrivial state (discriminant {0})")]
    ComplexMu(f64),

    #[error("tail eigenvalues are complex: c={c} is below the minimal speed {c_min}")]
    RealityViolation { c: f64, c_min: f64 },

    #[error("insufficient tail: only {0} usable nodes")]
    InsufficientTail(usize),

    #[error("io error: {0}")]
    Io(String),

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    /// Numerical failures (as opposed to invalid input) map to a distinct exit status.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Degenerate(..)
                | Error::Boundary(_)
                | Error::MissingBoundary { .. }
                | Error::BlowUp { .. }
                | Error::NoFront(_)
                | Error::ComplexMu(_)
                | Error::RealityViolation { .. }
                | Error::InsufficientTail(_)
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
