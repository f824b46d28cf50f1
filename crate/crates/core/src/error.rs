use thiserror::Error;

/// Errors raised by the sampling, matching and spectral routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid entry law: {0}")]
    InvalidLaw(String),
    #[error("entry law is not standardized (mean {mean:e}, variance {variance})")]
    NotStandardized { mean: f64, variance: f64 },
    #[error("entry law has zero variance")]
    ZeroVariance,
    #[error("invalid matrix size N = {0}, need N >= 2")]
    InvalidN(usize),
    #[error("mixing time t = {0} outside [0, 1)")]
    InvalidT(f64),
    #[error("law has {have} atoms, need at least {needed}")]
    TooFewAtoms { needed: usize, have: usize },
    #[error("Newton iteration did not converge after {iterations} steps (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("moment Jacobian is numerically singular (condition estimate {condition:e})")]
    SingularJacobian { condition: f64 },
    #[error("atom shift {shift} reached the separation limit {limit}")]
    SeparationViolated { shift: f64, limit: f64 },
    #[error("no admissible mixing time above the floor {floor}")]
    NoAdmissibleT { floor: f64 },
    #[error("eigensolver failed: {0}")]
    EigensolveFailure(String),
    #[error("time step dt = {dt} exceeds the stability guard {limit}")]
    StabilityViolation { dt: f64, limit: f64 },
    #[error("shape mismatch: expected {expected}, found {found}")]
    ShapeMismatch { expected: String, found: String },
    #[error("spectral parameter too close to the real axis (eta = {eta:e})")]
    NearSingular { eta: f64 },
    #[error("argument outside the domain of validity: {0}")]
    DomainViolation(String),
    #[error("quadrature failed: {0}")]
    QuadratureFailure(String),
    #[error("rate fit is degenerate: all N values are equal")]
    DegenerateFit,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    /// True for failures of an iterative solver to reach its target.
    pub fn is_convergence_failure(&self) -> bool {
        matches!(
            self,
            Error::NoConvergence { .. }
                | Error::SingularJacobian { .. }
                | Error::SeparationViolated { .. }
                | Error::NoAdmissibleT { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
