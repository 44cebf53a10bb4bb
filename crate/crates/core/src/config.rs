use serde::{Deserialize, Serialize};

/// Numerical thresholds used across the toolkit. Every field can be
/// overridden from the command line or a config file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    /// Accepted defect of Σ v_μ v_μ* = 1 and of eigen-residuals.
    pub norm: f64,
    /// Relative singular-value cutoff when growing the spans K_l(v).
    pub span_cutoff: f64,
    /// Two leading moduli closer than this (relative) count as degenerate.
    pub degenerate_rel: f64,
    /// Mixed transfer modulus at or above 1 − this value means "same state".
    pub symmetric_gap: f64,
    /// Mixed transfer modulus below 1 − this value means "different state".
    pub asymmetric_gap: f64,
    /// Relative singular-value cutoff for interval ground spaces.
    pub projector_cutoff: f64,
    /// Maximum iterations for iterative eigensolvers.
    pub max_iter: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            norm: 1e-10,
            span_cutoff: 1e-10,
            degenerate_rel: 1e-9,
            symmetric_gap: 1e-8,
            asymmetric_gap: 1e-3,
            projector_cutoff: 1e-12,
            max_iter: 10_000,
        }
    }
}

impl Tolerances {
    pub fn with_norm(mut self, tol: f64) -> Self {
        self.norm = tol;
        self
    }
}
