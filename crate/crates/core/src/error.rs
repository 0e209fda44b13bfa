use thiserror::Error;

/// Broad class of a failure, used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Malformed input or out-of-range parameters.
    Validation,
    /// Input was well formed but a numerical precondition does not hold
    /// (window too small, series too short, reducible automaton, ...).
    NumericPrecondition,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid tree: {0}")]
    InvalidTree(String),

    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("value {value} outside domain {domain}")]
    Domain { value: f64, domain: &'static str },

    #[error("window too small: vertex {vertex} needs a complete neighbourhood of radius {depth}")]
    InsufficientRadius { vertex: u64, depth: usize },

    #[error("profile horizon {horizon} is shorter than the requested {needed} steps")]
    ProfileTooShort { horizon: usize, needed: usize },

    #[error("series has {len} terms, at least {min} are required")]
    SeriesTooShort { len: usize, min: usize },

    #[error("spine is empty")]
    EmptySpine,

    #[error("transition matrix is reducible on the states reachable from start")]
    Reducible,

    #[error("Lipschitz bound {bound} violated at index {index} (step {step})")]
    Lipschitz { index: usize, step: f64, bound: f64 },

    #[error("growth is not recoverable at or below the critical return exponent {threshold}")]
    Subcritical { threshold: f64 },

    #[error("degree bound {d} exceeded at vertex {vertex}")]
    DegreeBound { vertex: u64, d: usize },

    #[error("cluster exceeded the vertex cap of {cap}; raise the cap or lower the radius")]
    VertexCap { cap: usize },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InsufficientRadius { .. }
            | Error::ProfileTooShort { .. }
            | Error::SeriesTooShort { .. }
            | Error::EmptySpine
            | Error::Reducible
            | Error::Lipschitz { .. }
            | Error::Subcritical { .. }
            | Error::VertexCap { .. } => ErrorKind::NumericPrecondition,
            _ => ErrorKind::Validation,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
