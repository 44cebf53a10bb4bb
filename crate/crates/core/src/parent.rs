//! Frustration-free parent interactions of matrix product states.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SptError};
use crate::linalg::{self, identity, kron, max_abs, CMat};
use crate::mps::{primitivity_length, MpsState, MpsTensor};
use crate::spin::Spin;

/// Relative singular-value cutoff used when orthonormalizing the spanning
/// vectors of an interval ground space.
pub const SPAN_CUTOFF: f64 = 1e-12;

/// Orthonormal basis (columns) of the range of the state restricted to m sites.
#[derive(Debug, Clone)]
pub struct IntervalGroundSpace {
    pub m: usize,
    pub basis: CMat,
    /// k², the dimension expected once m reaches the injectivity length.
    pub expected_dim: usize,
}

impl IntervalGroundSpace {
    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    /// `MTooSmall` when the span has not reached dimension k².
    pub fn check(&self) -> Result<()> {
        if self.dim() != self.expected_dim {
            return Err(SptError::MTooSmall { m: self.m, dim: self.dim(), expected: self.expected_dim });
        }
        Ok(())
    }

    pub fn projector(&self) -> CMat {
        &self.basis * self.basis.adjoint()
    }
}

/// span{ Σ tr(X v_{μ1}⋯v_{μm}) |μ1…μm⟩ : X ∈ M_k }.
pub fn interval_ground_space(v: &MpsTensor, m: usize) -> Result<IntervalGroundSpace> {
    if m == 0 {
        return Err(SptError::BadParameters("interval length must be positive".into()));
    }
    let k = v.bond_dim();
    let words = v.words(m);
    // X = E_ij picks out the (j,i) entry of each word
    let spanning = CMat::from_fn(words.len(), k * k, |row, col| words[row][(col % k, col / k)]);
    let basis = linalg::orthonormal_span(&spanning, SPAN_CUTOFF);
    Ok(IntervalGroundSpace { m, basis, expected_dim: k * k })
}

/// A Hermitian projector on m contiguous sites.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalProjector {
    pub spin: Spin,
    pub m: usize,
    #[serde(with = "crate::io::complex_matrix")]
    pub h: CMat,
    pub rank: usize,
}

impl LocalProjector {
    /// max |h² − h|.
    pub fn projector_defect(&self) -> f64 {
        max_abs(&(&self.h * &self.h - &self.h))
    }

    /// The projector placed at sites x..x+m on a chain of x+m sites.
    pub fn shifted(&self, x: usize) -> CMat {
        kron(&identity(self.spin.dim().pow(x as u32)), &self.h)
    }
}

/// h = 1 − P_G on m sites, where G is the interval ground space.
pub fn parent_interaction(v: &MpsTensor, m: usize) -> Result<LocalProjector> {
    let space = interval_ground_space(v, m)?;
    let n = space.basis.nrows();
    let h = linalg::hermitize(&(identity(n) - space.projector()));
    Ok(LocalProjector { spin: v.spin(), m, h, rank: n - space.dim() })
}

/// Default support: one site beyond the primitivity length, confirmed by the
/// ground-space dimension being k² at both m and m+1.
pub fn default_support(v: &MpsTensor) -> Result<usize> {
    let l = primitivity_length(v, None)
        .ok_or_else(|| SptError::NotPrimitive("span of products never fills the matrix algebra".into()))?;
    let m = l + 1;
    interval_ground_space(v, m)?.check()?;
    interval_ground_space(v, m + 1)?.check()?;
    Ok(m)
}

/// max_x |ω(β_x(h))| over the given positions.
pub fn frustration_free_residual(v: &MpsTensor, h: &LocalProjector, positions: &[usize], tol: f64) -> Result<f64> {
    if h.spin != v.spin() {
        return Err(SptError::DimensionMismatch(format!(
            "projector acts on spin {} sites, tensor has spin {}",
            h.spin,
            v.spin()
        )));
    }
    let state = MpsState::new(v.clone(), tol)?;
    let mut worst: f64 = 0.0;
    for &x in positions {
        worst = worst.max(state.expectation(&h.shifted(x))?.norm());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{eigvalsh, re, ONE, ZERO};
    use crate::spin::spin_matrices;

    fn heisenberg_bond() -> CMat {
        let ops = spin_matrices(Spin::ONE);
        ops.components().iter().fold(CMat::zeros(9, 9), |acc, s| acc + kron(s, s))
    }

    #[test]
    fn product_ground_space() {
        let v = MpsTensor::product(Spin::ONE, 0.0).unwrap();
        let g = interval_ground_space(&v, 1).unwrap();
        assert_eq!(g.dim(), 1);
        assert!((g.basis[(1, 0)].norm() - 1.0).abs() < 1e-15);
        let h = parent_interaction(&v, 1).unwrap();
        let diag = CMat::from_diagonal(&nalgebra::DVector::from_vec(vec![ONE, ZERO, ONE]));
        assert!(max_abs(&(&h.h - diag)) < 1e-15);
        assert!(frustration_free_residual(&v, &h, &[0], 1e-10).unwrap() < 1e-15);
    }

    #[test]
    fn aklt_ground_space_dimensions() {
        let v = MpsTensor::aklt();
        assert!(interval_ground_space(&v, 1).unwrap().check().is_err());
        for m in 2..=4 {
            let g = interval_ground_space(&v, m).unwrap();
            g.check().unwrap();
            assert_eq!(g.dim(), 4);
        }
        assert_eq!(default_support(&v).unwrap(), 3);
    }

    #[test]
    fn aklt_parent_is_spin_two_projector() {
        let h = parent_interaction(&MpsTensor::aklt(), 2).unwrap();
        assert!(h.projector_defect() < 1e-12);
        let ss = heisenberg_bond();
        let p2 = &ss * re(0.5) + &ss * &ss * re(1.0 / 6.0) + identity(9) * re(1.0 / 3.0);
        assert!(max_abs(&(&h.h - &p2)) < 1e-12);
        // and equals Φ_AKLT/2 + 1/3
        let phi = &ss + &ss * &ss * re(1.0 / 3.0);
        assert!(max_abs(&(&h.h - (phi * re(0.5) + identity(9) * re(1.0 / 3.0)))) < 1e-12);
        assert_eq!(h.rank, 5);
    }

    #[test]
    fn aklt_three_site_kernel() {
        let v = MpsTensor::aklt();
        let h3 = parent_interaction(&v, 3).unwrap();
        assert_eq!(h3.rank, 23);
        // kernel of h⊗1 + 1⊗h on three sites is the m=3 ground space
        let h2 = parent_interaction(&v, 2).unwrap();
        let ham = kron(&h2.h, &identity(3)) + kron(&identity(3), &h2.h);
        let zeros = eigvalsh(&ham).iter().filter(|e| e.abs() < 1e-10).count();
        assert_eq!(zeros, 4);
        let g3 = interval_ground_space(&v, 3).unwrap().projector();
        assert!(max_abs(&(&ham * &g3)) < 1e-12);
    }

    #[test]
    fn frustration_free_examples() {
        let v = MpsTensor::aklt();
        let h = parent_interaction(&v, 2).unwrap();
        assert!(frustration_free_residual(&v, &h, &[0, 1, 2], 1e-10).unwrap() <= 1e-10);
        let p = MpsTensor::product(Spin::ONE, 0.0).unwrap();
        let r = frustration_free_residual(&p, &h, &[0], 1e-10).unwrap();
        assert!((r - 2.0 / 3.0).abs() < 1e-12);
    }
}
