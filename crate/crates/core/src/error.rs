use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeomError {
    #[error("matrix is not skew-symmetric (|S + Sᵀ| = {0:e})")]
    NotSkew(f64),
    #[error("vector is not unit length (norm = {0})")]
    NotUnit(f64),
    #[error("matrix is not a rotation (|RᵀR - I| = {ortho:e}, det = {det})")]
    NotRotation { ortho: f64, det: f64 },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("group-element solve did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("step size {0} outside (0, 1e-2]")]
    InvalidStep(f64),
    #[error("invalid body parameters: {0}")]
    InvalidParams(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("equilibrium direction is neither Γ_d nor -Γ_d")]
    InvalidEquilibrium,
    #[error("no finite steady state: zero damping with non-zero input")]
    SingularSystem,
    #[error("trajectory series is empty")]
    EmptySeries,
    #[error("finite-difference step {0:e} outside [1e-8, 1e-4]")]
    InvalidStep(f64),
    #[error("law {0} has no linearization of this kind")]
    Unsupported(&'static str),
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid scenario: {0}")]
    Validation(String),
    #[error("cannot compare: {0}")]
    MismatchedScenarios(String),
    #[error("numerical failure at t = {t:.4} s: {source}")]
    Numerical {
        t: f64,
        #[source]
        source: DynamicsError,
    },
    #[error("log is empty")]
    EmptyLog,
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl SimError {
    /// Process exit code for the CLI: 2 for configuration problems, 3 for
    /// numerical failures, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            SimError::Parse { .. }
            | SimError::Validation(_)
            | SimError::MismatchedScenarios(_) => 2,
            SimError::Numerical { .. } => 3,
            SimError::EmptyLog | SimError::Io { .. } => 1,
        }
    }
}
