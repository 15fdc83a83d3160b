use thiserror::Error;

/// Coarse classification used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Bad input: malformed degree distribution, argument out of range.
    Input,
    /// The model violates a structural assumption of the expansion.
    Model,
    /// A numerical routine failed.
    Numerical,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid degree distribution: {0}")]
    InvalidSpec(String),

    #[error("argument out of domain: {0}")]
    Domain(String),

    #[error("degenerate tangency at zeta = {zeta}: V''/rho_c = {curvature} >= (1-zeta)^-2 = {bound}")]
    DegenerateTangency { zeta: f64, curvature: f64, bound: f64 },

    #[error("no transition: rho_c = {rho_c} exceeds 1 and the rate cap is enabled")]
    NoTransition { rho_c: f64 },

    #[error("tangency violation: {0}")]
    TangencyViolation(String),

    #[error("singular Sigma: minimum eigenvalue {min_eigenvalue} <= 1e-10 * trace ({trace})")]
    SingularSigma { min_eigenvalue: f64, trace: f64 },

    #[error("nonpositive curvature at critical time {index}: m . y'' = {value}")]
    NonpositiveCurvature { index: usize, value: f64 },

    #[error("trajectory left the domain at theta = {theta} (face {face}, slack {slack})")]
    ExitedDomain { theta: f64, face: usize, slack: f64 },

    #[error("no convergence: {0}")]
    Convergence(String),

    #[error("overflow: {0}")]
    Overflow(String),

    #[error("quadrature tail truncation failed at Y = {y_max}: integrand magnitude {magnitude}")]
    Truncation { y_max: f64, magnitude: f64 },

    #[error("infeasible state: {0}")]
    Infeasible(String),

    #[error("instance too large for exact arithmetic: {0}")]
    TooLarge(String),
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::InvalidSpec(_) | Error::Domain(_) | Error::Infeasible(_) | Error::TooLarge(_) => {
                ErrorClass::Input
            }
            Error::DegenerateTangency { .. }
            | Error::NoTransition { .. }
            | Error::TangencyViolation(_)
            | Error::NonpositiveCurvature { .. } => ErrorClass::Model,
            Error::SingularSigma { .. }
            | Error::ExitedDomain { .. }
            | Error::Convergence(_)
            | Error::Overflow(_)
            | Error::Truncation { .. } => ErrorClass::Numerical,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
