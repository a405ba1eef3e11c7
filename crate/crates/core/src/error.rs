use thiserror::Error;

/// Failures while building or evaluating a profile.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProfileError {
    #[error("damping coefficient mu = {mu} is outside [0, 1/3)")]
    Domain { mu: f64 },
    #[error("invalid profile parameters: {0}")]
    InvalidParams(String),
    #[error("recurrence denominator vanishes at j = {j}")]
    RecurrenceDegenerate { j: usize },
    #[error("series ratio test did not certify tolerance within {n_max} coefficients")]
    NoConvergence { n_max: usize },
    #[error("trajectory reached f = Q/3 at r = {r}")]
    RegionExitScenario1 { r: f64 },
    #[error("Q reached zero before f at r = {r}")]
    RegionExitScenario2 { r: f64 },
    #[error("step size underflow at r = {r} (beta - f = {gap})")]
    StepSizeUnderflow { r: f64, gap: f64 },
    #[error("radius {r} outside [0, {r_max}]")]
    OutOfRange { r: f64, r_max: f64 },
}

/// Failures in the weighted linear-operator layer.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinopsError {
    #[error("sampled functions live on different grids")]
    GridMismatch,
    #[error("integrand vanishes to order {order} at the origin; weight needs at least {required}")]
    DivergentIntegrand { order: u32, required: u32 },
    #[error("no admissible weight exponent A up to {a_max}")]
    NoAdmissibleA { a_max: u32 },
    #[error("Sobolev order {m} is not supported (m <= 2)")]
    OrderUnsupported { m: u32 },
    #[error("inadmissible test function: {0}")]
    Inadmissible(String),
    #[error(transparent)]
    Profile(#[from] ProfileError),
}

/// Failures in the renormalized simulation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum RenormError {
    #[error("time step {dt} exceeds the stability limit {limit}")]
    CflViolation { dt: f64, limit: f64 },
    #[error("non-finite field value at tau = {tau}")]
    NonFiniteField { tau: f64 },
    #[error("Vandermonde condition number {cond:e} exceeds 1e12")]
    IllConditionedFit { cond: f64 },
    #[error("diffusive forcing dominates mode {mode} (forcing/response = {ratio})")]
    ForcingDominates { mode: usize, ratio: f64 },
    #[error("invalid renormalized-run configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Profile(#[from] ProfileError),
}

/// Failures in the physical-variable simulation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum PhysError {
    #[error("no blowup detected by t = {t} (sup ratio {sup_ratio})")]
    NoBlowupDetected { t: f64, sup_ratio: f64 },
    #[error("resolution exhausted at t = {t} before the fit window opened")]
    ResolutionExhausted { t: f64 },
    #[error("snapshot mismatch: {0}")]
    SnapshotMismatch(String),
    #[error("non-finite density at t = {t}")]
    NonFiniteField { t: f64 },
    #[error("invalid physical-run configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Profile(#[from] ProfileError),
}

/// Failures in the semilinear heat analog.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum HeatError {
    #[error("invalid heat parameters: {0}")]
    InvalidParams(String),
    #[error("sampled function lives on a different grid")]
    GridMismatch,
    #[error("test function vanishes to order {order}; the weight needs at least {required}")]
    DivergentIntegrand { order: u32, required: u32 },
}

/// Any library failure.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Profile(#[from] ProfileError),
    #[error(transparent)]
    Linops(#[from] LinopsError),
    #[error(transparent)]
    Renorm(#[from] RenormError),
    #[error(transparent)]
    Phys(#[from] PhysError),
    #[error(transparent)]
    Heat(#[from] HeatError),
}

impl Error {
    /// True for bad input, false for failures of the numerics themselves.
    pub fn is_validation(&self) -> bool {
        let profile_input = |e: &ProfileError| matches!(e, ProfileError::Domain { .. } | ProfileError::InvalidParams(_));
        match self {
            Error::Profile(e)
            | Error::Linops(LinopsError::Profile(e))
            | Error::Renorm(RenormError::Profile(e))
            | Error::Phys(PhysError::Profile(e)) => profile_input(e),
            Error::Linops(e) => matches!(e, LinopsError::Inadmissible(_) | LinopsError::OrderUnsupported { .. }),
            Error::Renorm(e) => matches!(e, RenormError::InvalidConfig(_)),
            Error::Phys(e) => matches!(e, PhysError::InvalidConfig(_)),
            Error::Heat(e) => matches!(e, HeatError::InvalidParams(_)),
        }
    }
}
