use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("quadrature did not reach relative tolerance {tol:e} within {budget} nodes (last change {change:e})")]
    QuadratureBudgetExceeded { tol: f64, change: f64, budget: usize },
    #[error("second derivatives requested inside the support without Hölder handling")]
    SingularEvaluation,
    #[error("delta must lie in (0, 1), got {0}")]
    InvalidDelta(f64),
    #[error("no boundary points could be extracted from the support")]
    EmptyBoundary,
    #[error("kernel exponent must be below 3, got {0}")]
    InvalidExponent(f64),
    #[error("invalid density model: {0}")]
    InvalidDensity(String),

    #[error("energy must be positive, got {0}")]
    NonpositiveEnergy(f64),
    #[error("sigma = {sigma} outside (0, {max})")]
    SigmaOutOfRange { sigma: f64, max: f64 },
    #[error("(E, M, G1) is not compatible: (9 G1)^(1/3) = {lower} >= sqrt(beta E / M) / 24 = {upper}")]
    IncompatibleTriple { lower: f64, upper: f64 },
    #[error("no sigma in (0, sigma_star) admits parameters matching the datum")]
    NoFeasibleSigma,
    #[error("sigma = {sigma} is not below sigma_dagger = {dagger:e} (strict mode)")]
    SigmaAboveDagger { sigma: f64, dagger: f64 },
    #[error("infeasible shape: {0}")]
    InfeasibleShape(String),

    #[error("A = {a_cap} is not below sqrt(beta E / M) / 24 = {limit}")]
    ATooLarge { a_cap: f64, limit: f64 },
    #[error("F(0) = {0} is positive")]
    F0Positive(f64),
    #[error("insufficient samples: {0}")]
    InsufficientSamples(String),

    #[error("position at the origin has no radial direction")]
    OriginSingularity,
    #[error("negative Y = {0}")]
    NegativeY(f64),
    #[error("step rejected repeatedly; last valid time {t}")]
    StepRejection { t: f64 },

    #[error("tidal matrix is not symmetric (defect {0:e})")]
    AsymmetricTidal(f64),
    #[error("initial expansion must be positive, got {0}")]
    NonpositiveTheta0(f64),
    #[error("expansion must be positive, got {0}")]
    NonpositiveExpansion(f64),

    #[error("time step {dt} exceeds the Courant limit {limit}")]
    CflViolation { dt: f64, limit: f64 },
    #[error("boundary shell selects no particles")]
    EmptyShell,
    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("io error: {0}")]
    Io(String),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("precondition violated:\n  - {}", .0.join("\n  - "))]
    Precondition(Vec<String>),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        if e.is_io() {
            Error::Io(e.to_string())
        } else {
            Error::Schema(e.to_string())
        }
    }
}
