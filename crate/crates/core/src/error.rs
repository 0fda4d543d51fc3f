use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("kernel evaluated at its singular point (0, 0)")]
    SingularPoint,
    #[error("kernel argument outside its domain: cosh(a2) = cos(a1)")]
    KernelDomain,
    #[error("|Im y1| = {im} exceeds the analyticity strip radius {rho0}")]
    StripViolation { im: f64, rho0: f64 },
    #[error("level-set map is not monotone in y2 at t = {t} (min of t + d2 f = {min_slope:e})")]
    MonotonicityViolation { t: f64, min_slope: f64 },
    #[error("transformed difference left the cone at t = {t}")]
    ConeViolation { t: f64 },
    #[error("Picard iterate left the unit ball at iteration {iteration} (norm {norm:.4}); the time horizon is too long")]
    Divergence { iteration: usize, norm: f64 },
    #[error("Picard iteration stalled after {iterations} iterations (last difference {last:e})")]
    Stagnation { iterations: usize, last: f64 },
    #[error("maximum principle violated: rho = {value} at cell ({i}, {j}); reduce the CFL number")]
    MaximumPrinciple { value: f64, i: usize, j: usize },
    #[error("CFL number {0} exceeds 0.45; the maximum principle is not guaranteed")]
    CflTooLarge(f64),
    #[error("mixing zone reached the boundary rows of the strip")]
    BoundaryContamination,
    #[error("masses differ: {0} vs {1}")]
    MassMismatch(f64, f64),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("config: {0}")]
    Config(String),
    #[error("missing artifact: {0}")]
    MissingArtifact(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
