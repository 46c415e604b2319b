use thiserror::Error;

/// Failures reported by the numerical kernels.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("modulus must lie in the upper half-plane, got im = {im}")]
    NotInUpperHalfPlane { im: f64 },
    #[error("im(tau) = {im} is below the supported minimum {min}")]
    ModulusTooClose { im: f64, min: f64 },
    #[error("{what} did not converge within {terms} terms")]
    NonConvergence { what: &'static str, terms: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(&'static str),
    #[error("matrix ({a}, {b}; {c}, {d}) does not have determinant 1")]
    NotUnimodular { a: i64, b: i64, c: i64, d: i64 },
    #[error("Green function evaluated at its singular point")]
    SingularPoint,
    #[error("relabelled index ({n}, {m}) falls outside the cutoff {cutoff}")]
    IndexOutOfCutoff { n: i64, m: i64, cutoff: usize },
    #[error("gamma = {0} is outside the supported range")]
    InvalidGamma(f64),
    #[error("field is not circle-averaged")]
    MissingRegularization,
    #[error("insertions {first} and {second} coincide")]
    DuplicateInsertion { first: usize, second: usize },
    #[error("sum of insertion weights {sum} is not positive")]
    SeibergViolationSum { sum: f64 },
    #[error("insertion {index} has weight {alpha} >= Q = {q}")]
    SeibergViolationLocal { index: usize, alpha: f64, q: f64 },
    #[error("central charge {0} exceeds 1")]
    InvalidCentralCharge(f64),
    #[error("central charge 1 puts the identity insertion on the Seiberg boundary alpha = Q")]
    CriticalMatter,
    #[error("no admissible insertion weight for matter weight {delta} (boundary: {boundary})")]
    NoAdmissibleRoot { delta: f64, boundary: bool },
    #[error("estimated tail mass {tail} above im(tau) = {t_max} exceeds 1e-3")]
    TruncationTooTight { tail: f64, t_max: f64 },
    #[error("empty input: {0}")]
    Empty(&'static str),
}

pub type Result<T> = core::result::Result<T, Error>;
