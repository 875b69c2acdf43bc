use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("argument {value} outside the domain {domain}")]
    Domain { value: f64, domain: &'static str },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dissipation law is not differentiable at u = {0}")]
    NonDifferentiable(f64),

    #[error("dissipation law vanishes on the whole sampling grid")]
    DegenerateLaw,

    #[error("invalid geometry: {0}")]
    Geometry(String),

    #[error("field and mesh do not match: {0}")]
    MeshMismatch(String),

    #[error("state solver did not converge after {iterations} iterations (last relative decrease {last_decrease:.3e})")]
    NonConvergence { iterations: usize, last_decrease: f64 },

    #[error("field is constant, level sets are degenerate")]
    DegenerateField,

    #[error("malformed input: {0}")]
    Format(String),

    #[error("unknown {kind} `{name}`")]
    UnknownStrategy { kind: &'static str, name: String },
}

pub type Result<T> = std::result::Result<T, Error>;
