use std::path::PathBuf;

use thiserror::Error;

use crate::mesh::Domain;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("invalid mesh parameter: {0}")]
    InvalidParameter(String),
    #[error("mesh invariant violated: {0}")]
    Invalid(String),
}

#[derive(Debug, Error, PartialEq)]
pub enum QuadratureError {
    #[error("no triangle rule for degree {0} (supported: 1..=6)")]
    UnsupportedDegree(usize),
    #[error("no Gauss rule with {0} points (supported: 1..=5)")]
    UnsupportedPoints(usize),
}

#[derive(Debug, Error, PartialEq)]
pub enum SpaceError {
    #[error("point ({x}, {y}) is not inside domain {domain}")]
    PointNotFound { domain: Domain, x: f64, y: f64 },
}

#[derive(Debug, Error, PartialEq)]
pub enum SolverError {
    #[error("matrix is singular: no usable pivot at index {index}")]
    Singular { index: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("factorization produced non-finite values")]
    NonFinite,
    #[error("sparse factorization failed: {0}")]
    Backend(String),
}

#[derive(Debug, Error, PartialEq)]
pub enum AssemblyError {
    #[error("viscosity must be non-negative, got {0}")]
    NegativeViscosity(f64),
    #[error("alternative interface scaling needs a positive physical viscosity in {0}")]
    ZeroViscosityScaling(Domain),
    #[error("lagged state at level n-1 is required but missing")]
    MissingLag,
    #[error(transparent)]
    Solver(#[from] SolverError),
}

#[derive(Debug, Error)]
pub enum SchemeError {
    #[error("invalid scheme configuration: {0}")]
    InvalidConfig(String),
    #[error("Picard iteration did not converge after {iterations} iterations (residuals: {trace:?})")]
    PicardDivergence { iterations: usize, trace: Vec<f64> },
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("step to t = {time} (level {level}) failed: {source}")]
    AtLevel {
        time: f64,
        level: usize,
        #[source]
        source: Box<SchemeError>,
    },
}

impl SchemeError {
    /// True when the failure is a nonlinear-solver breakdown, which the
    /// experiment drivers record as divergence instead of aborting.
    pub fn is_divergence(&self) -> bool {
        match self {
            SchemeError::PicardDivergence { .. } => true,
            SchemeError::AtLevel { source, .. } => source.is_divergence(),
            // a singular or non-finite solve inside a blowing-up run
            SchemeError::Solver(SolverError::NonFinite) | SchemeError::Solver(SolverError::Singular { .. }) => true,
            _ => false,
        }
    }
}

#[derive(Debug, Error)]
pub enum DiagnosticsError {
    #[error("trajectory lacks the projected-gradient history")]
    MissingProjection,
    #[error("convergence table needs at least two rows")]
    TooFewRows,
    #[error("refinement levels must double: {0} is not followed by {1}")]
    NonDoubling(usize, usize),
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("unknown configuration key `{0}`")]
    UnknownKey(String),
    #[error("invalid value for `{key}`: {message}")]
    InvalidValue { key: String, message: String },
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Failure of a whole experiment driver.
#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Scheme(#[from] SchemeError),
    #[error(transparent)]
    Diagnostics(#[from] DiagnosticsError),
    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}
