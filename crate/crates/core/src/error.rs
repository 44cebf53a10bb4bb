use thiserror::Error;

/// Errors produced anywhere in the toolkit.
///
/// The variants are grouped loosely by the exit-code class the CLI maps them
/// to (see [`SptError::class`]).
#[derive(Debug, Error, Clone, PartialEq)]
pub enum SptError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid input: {0}")]
    Validation(String),

    #[error("tensor cannot be right-normalized: {0}")]
    NotNormalizable(String),

    #[error("tensor is not primitive: {0}")]
    NotPrimitive(String),

    #[error("leading eigenvalue is degenerate (|λ1| = {first:.3e}, |λ2| = {second:.3e})")]
    DegenerateLeading { first: f64, second: f64 },

    #[error("iteration did not converge after {iterations} steps (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("mixed transfer modulus {modulus:.12} lies between the symmetric and non-symmetric thresholds")]
    AmbiguousSymmetry { modulus: f64 },

    #[error("state is not time-reversal invariant (mixed transfer modulus {modulus:.6})")]
    NotTimeReversalInvariant { modulus: f64 },

    #[error("conj(U)·U is not a scalar multiple of ±1 (defect {defect:.3e})")]
    NonScalarDefect { defect: f64 },

    #[error("state is not invariant under group element `{element}` (mixed transfer modulus {modulus:.6})")]
    NotGroupInvariant { element: String, modulus: f64 },

    #[error("U_g U_h U_gh* is not scalar for ({g}, {h}) (defect {defect:.3e})")]
    NonScalar { g: String, h: String, defect: f64 },

    #[error("interval length m = {m} gives ground-space dimension {dim}, expected {expected}")]
    MTooSmall { m: usize, dim: usize, expected: usize },

    #[error("Hilbert-space dimension {dim} exceeds the cap {cap}")]
    SizeCap { dim: usize, cap: usize },

    #[error("spectrum has no clear split (gap ratio {ratio:.3})")]
    NoSplit { ratio: f64 },

    #[error("spectral gap closed along the path at s = {s:.6} (gap {gap:.3e} < γ = {gamma:.3e})")]
    GapClosed { s: f64, gap: f64, gamma: f64 },

    #[error("ODE step failed at s = {s:.6}: {reason}")]
    OdeStepFailure { s: f64, reason: String },

    #[error("quadrature failure: {0}")]
    QuadratureFailure(String),

    #[error("bad parameters: {0}")]
    BadParameters(String),

    #[error("bad cut {cut} for a chain of {n} sites")]
    BadCut { cut: usize, n: usize },

    #[error("entanglement spectrum cluster at {value:.6e} has odd multiplicity {multiplicity}")]
    DegeneracyViolated { value: f64, multiplicity: usize },

    #[error("label {mu} is outside the local range of a spin-{spin} site")]
    IndexOutOfRange { mu: f64, spin: String },
}

/// Coarse classification used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    SymmetryAbsent,
    Numerical,
    Validation,
    SizeCap,
}

impl SptError {
    pub fn class(&self) -> ErrorClass {
        use SptError::*;
        match self {
            NotTimeReversalInvariant { .. } | NotGroupInvariant { .. } => ErrorClass::SymmetryAbsent,
            DimensionMismatch(_) | Validation(_) | BadParameters(_) | BadCut { .. }
            | IndexOutOfRange { .. } => ErrorClass::Validation,
            SizeCap { .. } => ErrorClass::SizeCap,
            _ => ErrorClass::Numerical,
        }
    }
}

pub type Result<T, E = SptError> = std::result::Result<T, E>;
