//! Local spin-S Hilbert spaces and the standard spin operators.
//!
//! Basis states of one site are labelled by μ ∈ {−S, …, S} in ascending
//! order, so index `i` corresponds to μ = i − S.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SptError};
use crate::linalg::{re, CMat, I, ZERO};

/// A spin quantum number S, stored as the integer 2S.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Spin {
    twice: u32,
}

impl Spin {
    pub const HALF: Spin = Spin { twice: 1 };
    pub const ONE: Spin = Spin { twice: 2 };

    pub fn from_twice(twice: u32) -> Self {
        Spin { twice }
    }

    /// Parse a (half-)integer value of S.
    pub fn from_f64(s: f64) -> Result<Self> {
        let t = 2.0 * s;
        if !(t.is_finite() && t >= 0.0 && (t - t.round()).abs() < 1e-9) {
            return Err(SptError::Validation(format!("spin S = {s} is not a nonnegative half-integer")));
        }
        Ok(Spin { twice: t.round() as u32 })
    }

    pub fn twice(self) -> u32 {
        self.twice
    }

    pub fn value(self) -> f64 {
        self.twice as f64 / 2.0
    }

    pub fn is_integer(self) -> bool {
        self.twice % 2 == 0
    }

    /// Local dimension d = 2S + 1.
    pub fn dim(self) -> usize {
        self.twice as usize + 1
    }

    /// μ label of basis index `i`.
    pub fn label(self, i: usize) -> f64 {
        i as f64 - self.value()
    }

    /// Basis index of the label μ.
    pub fn index(self, mu: f64) -> Result<usize> {
        let i = mu + self.value();
        if !i.is_finite() || (i - i.round()).abs() > 1e-9 || i.round() < 0.0 || i.round() as usize >= self.dim() {
            return Err(SptError::IndexOutOfRange { mu, spin: self.to_string() });
        }
        Ok(i.round() as usize)
    }
}

impl fmt::Display for Spin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_integer() {
            write!(f, "{}", self.twice / 2)
        } else {
            write!(f, "{}/2", self.twice)
        }
    }
}

/// The three spin components S¹, S², S³ of a single site.
#[derive(Debug, Clone)]
pub struct SpinOperators {
    pub spin: Spin,
    pub s1: CMat,
    pub s2: CMat,
    pub s3: CMat,
}

impl SpinOperators {
    pub fn components(&self) -> [&CMat; 3] {
        [&self.s1, &self.s2, &self.s3]
    }

    /// Raising operator S⁺ = S¹ + iS².
    pub fn raising(&self) -> CMat {
        &self.s1 + &self.s2 * I
    }

    /// Largest entry of [S1,S2] − iS3 and its cyclic permutations.
    pub fn commutator_defect(&self) -> f64 {
        let [a, b, c] = self.components();
        let comm = |x: &CMat, y: &CMat, z: &CMat| crate::linalg::max_abs(&(x * y - y * x - z * I));
        comm(a, b, c).max(comm(b, c, a)).max(comm(c, a, b))
    }

    pub fn casimir(&self) -> CMat {
        let [a, b, c] = self.components();
        a * a + b * b + c * c
    }
}

/// Standard spin-S matrices in the ascending-μ basis.
pub fn spin_matrices(spin: Spin) -> SpinOperators {
    let d = spin.dim();
    let s = spin.value();
    let mut plus = CMat::zeros(d, d);
    for i in 0..d.saturating_sub(1) {
        let m = spin.label(i);
        plus[(i + 1, i)] = re((s * (s + 1.0) - m * (m + 1.0)).sqrt());
    }
    let minus = plus.adjoint();
    let s1 = (&plus + &minus) * re(0.5);
    let s2 = (&plus - &minus) * (-I * 0.5);
    let s3 = CMat::from_fn(d, d, |i, j| if i == j { re(spin.label(i)) } else { ZERO });
    SpinOperators { spin, s1, s2, s3 }
}
