//! Symmetry indices of matrix product states.
//!
//! Two invariants are computed from a generator v:
//!
//! * the time-reversal index ζ ∈ {±1}: if the time-reversed generator
//!   ṽ_μ = (−1)^{S+μ} c v_{−μ} c generates the same state, then
//!   ṽ_μ = e^{iθ} U v_μ U* for a unitary U, and c U c U = ζ·1;
//! * for an on-site finite group acting by unitaries w(g), the projective
//!   representation U_g on the bond space and its 2-cocycle
//!   σ(g,h) = U_g U_h U_{gh}*.
//!
//! Both rest on [`mps_equivalence_unitary`], which extracts the intertwiner
//! between two generators of the same state from the leading eigenmatrix of
//! their mixed transfer map.

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::Tolerances;
use crate::error::{Result, SptError};
use crate::group::FiniteGroup;
use crate::linalg::{self, identity, max_abs, polar_unitary, re, CMat, ONE, ZERO};
use crate::mps::{leading_eigenpair, Direction, MpsTensor, TransferMap};

/// An antiunitary conjugation c(x) = W·conj(x) on the bond space, with W a
/// symmetric unitary so that c² = 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Conjugation {
    w: CMat,
}

impl Conjugation {
    /// Entrywise complex conjugation.
    pub fn standard(k: usize) -> Self {
        Conjugation { w: identity(k) }
    }

    /// c' = u c u* for a unitary u, i.e. W = u uᵀ.
    pub fn rotated(u: &CMat) -> Self {
        Conjugation { w: u * u.transpose() }
    }

    pub fn matrix(&self) -> &CMat {
        &self.w
    }

    /// c A c as a linear map on matrices: W conj(A) W*.
    pub fn conjugate(&self, a: &CMat) -> CMat {
        &self.w * linalg::conj(a) * self.w.adjoint()
    }

    /// Check c² = 1, i.e. W conj(W) = 1.
    pub fn involution_defect(&self) -> f64 {
        max_abs(&(&self.w * linalg::conj(&self.w) - identity(self.w.nrows())))
    }
}

/// ṽ_μ = (−1)^{S+μ} conj(v_{−μ}).
pub fn time_reverse_tensors(v: &MpsTensor) -> MpsTensor {
    time_reverse_tensors_with(v, &Conjugation::standard(v.bond_dim()))
}

pub fn time_reverse_tensors_with(v: &MpsTensor, c: &Conjugation) -> MpsTensor {
    let d = v.phys_dim();
    // basis index i carries μ = i − S, so S + μ = i and −μ has index d − 1 − i
    let mats = (0..d)
        .map(|i| {
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            c.conjugate(v.mat(d - 1 - i)) * re(sign)
        })
        .collect();
    MpsTensor::new(v.spin(), mats).expect("time reversal preserves shape")
}

/// Intertwiner between two generators of one state: U a_μ = e^{iθ} b_μ U.
#[derive(Debug, Clone)]
pub struct Equivalence {
    pub u: CMat,
    pub theta: f64,
    /// Modulus of the leading eigenvalue of the mixed transfer map.
    pub modulus: f64,
    /// max_μ ‖U a_μ − e^{iθ} b_μ U‖.
    pub residual: f64,
}

/// Outcome of comparing the states generated by two tensors.
#[derive(Debug, Clone)]
pub enum Comparison {
    Same(Equivalence),
    Different { modulus: f64 },
}

fn require_normalized(v: &MpsTensor, tol: f64) -> Result<()> {
    let defect = v.normalization_defect();
    if defect > tol.max(1e-12) * 10.0 {
        return Err(SptError::Validation(format!("tensor is not right-normalized (defect {defect:.3e})")));
    }
    Ok(())
}

fn rescale_phase(u: &CMat) -> CMat {
    let tr = linalg::trace(u);
    if tr.norm() > 1e-8 {
        return u * (tr.conj() / tr.norm());
    }
    let mut best = ZERO;
    for c in 0..u.ncols() {
        for r in 0..u.nrows() {
            if u[(r, c)].norm() > best.norm() * (1.0 + 1e-9) {
                best = u[(r, c)];
            }
        }
    }
    u * (best.conj() / best.norm())
}

/// Compare the states generated by `a` and `b` through their mixed transfer
/// map x ↦ Σ_μ a_μ x b_μ*.
pub fn compare_states(a: &MpsTensor, b: &MpsTensor, tol: f64) -> Result<Comparison> {
    let cfg = Tolerances::default();
    require_normalized(a, tol)?;
    require_normalized(b, tol)?;
    let map = TransferMap::new(a, b, Direction::RightActing)?;
    let pair = leading_eigenpair(&map, tol.max(1e-12), cfg.max_iter)?;
    let modulus = pair.value.norm();
    if modulus < 1.0 - cfg.asymmetric_gap {
        return Ok(Comparison::Different { modulus });
    }
    if modulus < 1.0 - cfg.symmetric_gap {
        return Err(SptError::AmbiguousSymmetry { modulus });
    }
    if pair.degenerate {
        return Err(SptError::DegenerateLeading { first: modulus, second: pair.second_modulus });
    }
    // Σ a_μ U* b_μ* = e^{iθ} U*, so the eigenmatrix is proportional to U*.
    let u = rescale_phase(&polar_unitary(&pair.vector.adjoint()));
    let theta = pair.value.arg();
    let phase = C64::from_polar(1.0, theta);
    let residual = a
        .mats()
        .iter()
        .zip(b.mats())
        .map(|(am, bm)| linalg::frobenius(&(&u * am - bm * &u * phase)))
        .fold(0.0, f64::max);
    Ok(Comparison::Same(Equivalence { u, theta, modulus, residual }))
}

/// U and θ with U a_μ = e^{iθ} b_μ U when a and b generate the same state;
/// `None` when the states differ.
pub fn mps_equivalence_unitary(a: &MpsTensor, b: &MpsTensor, tol: f64) -> Result<Option<Equivalence>> {
    Ok(match compare_states(a, b, tol)? {
        Comparison::Same(eq) => Some(eq),
        Comparison::Different { .. } => None,
    })
}

pub fn tr_invariance_check(v: &MpsTensor, tol: f64) -> Result<bool> {
    Ok(mps_equivalence_unitary(&time_reverse_tensors(v), v, tol)?.is_some())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrCertificate {
    /// Leading modulus of the mixed transfer map between ṽ and v.
    pub mixed_modulus: f64,
    pub unitarity_defect: f64,
    /// ‖c U c U − ζ·1‖ (max entry).
    pub scalar_defect: f64,
}

/// Time-reversal index with the unitary U and phase θ solving
/// (−1)^{S+μ} c v_{−μ} c = e^{iθ} U v_μ U*.
#[derive(Debug, Clone)]
pub struct TimeReversalResult {
    pub zeta: i32,
    pub u: CMat,
    pub theta: f64,
    pub residual: f64,
    pub certificate: TrCertificate,
}

pub fn tr_index(v: &MpsTensor, tol: f64) -> Result<TimeReversalResult> {
    tr_index_with(v, &Conjugation::standard(v.bond_dim()), tol)
}

pub fn tr_index_with(v: &MpsTensor, c: &Conjugation, tol: f64) -> Result<TimeReversalResult> {
    let reversed = time_reverse_tensors_with(v, c);
    let eq = match compare_states(&reversed, v, tol)? {
        Comparison::Same(eq) => eq,
        Comparison::Different { modulus } => return Err(SptError::NotTimeReversalInvariant { modulus }),
    };
    // U ṽ = e^{iθ} v U  ⇔  ṽ = e^{iθ} U* v U, so the unitary in the defining
    // relation is U*.
    let u = eq.u.adjoint();
    let phase = C64::from_polar(1.0, eq.theta);
    let residual = (0..v.phys_dim())
        .map(|i| linalg::frobenius(&(reversed.mat(i) - &u * v.mat(i) * u.adjoint() * phase)))
        .fold(0.0, f64::max);
    let k = v.bond_dim();
    let cucu = c.conjugate(&u) * &u;
    let scalar = linalg::trace(&cucu) / re(k as f64);
    let zeta = if scalar.re >= 0.0 { 1 } else { -1 };
    let scalar_defect = max_abs(&(&cucu - identity(k) * re(zeta as f64)));
    let unitarity_defect = linalg::unitarity_defect(&u);
    let accept = tol.max(1e-12) * 1e2;
    if scalar_defect > accept {
        return Err(SptError::NonScalarDefect { defect: scalar_defect });
    }
    Ok(TimeReversalResult {
        zeta,
        u,
        theta: eq.theta,
        residual,
        certificate: TrCertificate { mixed_modulus: eq.modulus, unitarity_defect, scalar_defect },
    })
}

/// (w·v)_μ = Σ_ν w_{μν} v_ν.
pub fn group_act_tensors(v: &MpsTensor, w: &CMat) -> Result<MpsTensor> {
    let d = v.phys_dim();
    if w.nrows() != d || w.ncols() != d {
        return Err(SptError::DimensionMismatch(format!(
            "on-site unitary is {}×{}, local dimension is {d}",
            w.nrows(),
            w.ncols()
        )));
    }
    let k = v.bond_dim();
    let mats = (0..d)
        .map(|mu| (0..d).fold(CMat::zeros(k, k), |acc, nu| acc + v.mat(nu) * w[(mu, nu)]))
        .collect();
    MpsTensor::new(v.spin(), mats)
}

/// Projective representation of a finite on-site symmetry on the bond space.
#[derive(Debug, Clone)]
pub struct ProjectiveData {
    pub group: FiniteGroup,
    /// U_g, gauge-fixed so that U_e = 1.
    pub u: Vec<CMat>,
    /// θ_g with (w(g)·v)_μ = e^{iθ_g} U_g* v_μ U_g.
    pub theta: Vec<f64>,
    /// σ(g,h) with U_g U_h = σ(g,h) U_{gh}.
    pub sigma: Vec<Vec<C64>>,
    /// σ(g,h)/σ(h,g); filled only for abelian groups.
    pub invariant_phases: Option<Vec<Vec<C64>>>,
    pub max_residual: f64,
    pub max_scalar_defect: f64,
}

impl ProjectiveData {
    /// max |σ(g,h)σ(gh,k) − σ(h,k)σ(g,hk)| over all triples.
    pub fn cocycle_defect(&self) -> f64 {
        let n = self.group.order();
        let s = &self.sigma;
        let mut worst: f64 = 0.0;
        for g in 0..n {
            for h in 0..n {
                let gh = self.group.mul(g, h);
                for k in 0..n {
                    let hk = self.group.mul(h, k);
                    worst = worst.max((s[g][h] * s[gh][k] - s[h][k] * s[g][hk]).norm());
                }
            }
        }
        worst
    }

    /// Largest |U_g U_h − σ(g,h) U_{gh}|.
    pub fn representation_defect(&self) -> f64 {
        let n = self.group.order();
        let mut worst: f64 = 0.0;
        for g in 0..n {
            for h in 0..n {
                let gh = self.group.mul(g, h);
                worst = worst.max(max_abs(&(&self.u[g] * &self.u[h] - &self.u[gh] * self.sigma[g][h])));
            }
        }
        worst
    }

    /// Search for β: G → U(1) with σ(g,h) = β(g)β(h)/β(gh). Returns β when
    /// the cocycle is a coboundary (trivial class).
    pub fn coboundary_gauge(&self, tol: f64) -> Option<Vec<C64>> {
        find_coboundary(&self.group, &self.sigma, tol)
    }
}

/// Explicit search for a trivializing gauge of a normalized 2-cocycle.
///
/// With ε(g) = Π_k σ(g,k) one has σ^N = δε for N = |G|, so after dividing
/// by δ(ε^{1/N}) the cocycle takes values in the N-th roots of unity and
/// only finitely many candidate gauges remain; those are enumerated by
/// backtracking.
pub fn find_coboundary(group: &FiniteGroup, sigma: &[Vec<C64>], tol: f64) -> Option<Vec<C64>> {
    let n = group.order();
    let eps: Vec<C64> = (0..n).map(|g| (0..n).map(|k| sigma[g][k]).product()).collect();
    let root: Vec<C64> = eps.iter().map(|e| C64::from_polar(1.0, e.arg() / n as f64)).collect();
    // σ'(g,h) = σ(g,h) · r(gh) / (r(g) r(h)) has σ'^N = 1
    let reduced: Vec<Vec<C64>> = (0..n)
        .map(|g| (0..n).map(|h| sigma[g][h] * root[group.mul(g, h)] / (root[g] * root[h])).collect())
        .collect();
    let roots: Vec<C64> = (0..n).map(|j| C64::from_polar(1.0, 2.0 * std::f64::consts::PI * j as f64 / n as f64)).collect();
    let e = group.identity();
    let mut beta: Vec<Option<C64>> = vec![None; n];
    beta[e] = Some(reduced[e][e]);

    fn consistent(group: &FiniteGroup, reduced: &[Vec<C64>], beta: &[Option<C64>], tol: f64) -> bool {
        let n = group.order();
        for g in 0..n {
            for h in 0..n {
                if let (Some(bg), Some(bh), Some(bgh)) = (beta[g], beta[h], beta[group.mul(g, h)]) {
                    if (bg * bh / bgh - reduced[g][h]).norm() > tol {
                        return false;
                    }
                }
            }
        }
        true
    }

    fn search(
        group: &FiniteGroup,
        reduced: &[Vec<C64>],
        roots: &[C64],
        beta: &mut Vec<Option<C64>>,
        tol: f64,
    ) -> bool {
        let Some(next) = beta.iter().position(|b| b.is_none()) else {
            return true;
        };
        for &r in roots {
            beta[next] = Some(r);
            if consistent(group, reduced, beta, tol) && search(group, reduced, roots, beta, tol) {
                return true;
            }
        }
        beta[next] = None;
        false
    }

    if !consistent(group, &reduced, &beta, tol) || !search(group, &reduced, &roots, &mut beta, tol) {
        return None;
    }
    Some((0..n).map(|g| beta[g].unwrap() * root[g]).collect())
}

/// Bond-space projective representation induced by on-site unitaries
/// `rep[g]` (indexed like the group elements).
pub fn projective_rep(v: &MpsTensor, group: &FiniteGroup, rep: &[CMat], tol: f64) -> Result<ProjectiveData> {
    let n = group.order();
    if rep.len() != n {
        return Err(SptError::Validation(format!("{} representation matrices for a group of order {n}", rep.len())));
    }
    let d = v.phys_dim();
    for (g, w) in rep.iter().enumerate() {
        if w.nrows() != d || w.ncols() != d {
            return Err(SptError::DimensionMismatch(format!("rep({}) is not {d}×{d}", group.name(g))));
        }
        if linalg::unitarity_defect(w) > 1e-8 {
            return Err(SptError::Validation(format!("rep({}) is not unitary", group.name(g))));
        }
    }
    for g in 0..n {
        for h in 0..n {
            if max_abs(&(&rep[g] * &rep[h] - &rep[group.mul(g, h)])) > 1e-8 {
                return Err(SptError::Validation(format!(
                    "rep is not a representation: w({})w({}) ≠ w({})",
                    group.name(g),
                    group.name(h),
                    group.name(group.mul(g, h))
                )));
            }
        }
    }

    let solved: Vec<Result<Equivalence>> = (0..n)
        .into_par_iter()
        .map(|g| {
            let acted = group_act_tensors(v, &rep[g])?;
            match compare_states(&acted, v, tol)? {
                Comparison::Same(eq) => Ok(eq),
                Comparison::Different { modulus } => {
                    Err(SptError::NotGroupInvariant { element: group.name(g).to_string(), modulus })
                }
            }
        })
        .collect();
    let solved: Vec<Equivalence> = solved.into_iter().collect::<Result<_>>()?;
    let max_residual = solved.iter().map(|e| e.residual).fold(0.0, f64::max);
    let theta: Vec<f64> = solved.iter().map(|e| e.theta).collect();
    let mut u: Vec<CMat> = solved.into_iter().map(|e| e.u).collect();

    let k = v.bond_dim();
    let e = group.identity();
    let ue_phase = linalg::trace(&u[e]) / re(k as f64);
    if max_abs(&(&u[e] - identity(k) * ue_phase)) > tol.max(1e-12) * 1e2 {
        return Err(SptError::NonScalar { g: group.name(e).into(), h: group.name(e).into(), defect: f64::NAN });
    }
    u[e] = identity(k);

    let accept = tol.max(1e-12) * 1e2;
    let mut sigma = vec![vec![ONE; n]; n];
    let mut max_scalar_defect: f64 = 0.0;
    for g in 0..n {
        for h in 0..n {
            let gh = group.mul(g, h);
            let m = &u[g] * &u[h] * u[gh].adjoint();
            let s = linalg::trace(&m) / re(k as f64);
            let defect = max_abs(&(&m - identity(k) * s));
            max_scalar_defect = max_scalar_defect.max(defect);
            if defect > accept {
                return Err(SptError::NonScalar { g: group.name(g).into(), h: group.name(h).into(), defect });
            }
            sigma[g][h] = s / s.norm();
        }
    }
    for g in 0..n {
        sigma[e][g] = ONE;
        sigma[g][e] = ONE;
    }
    let invariant_phases = group
        .is_abelian()
        .then(|| (0..n).map(|g| (0..n).map(|h| sigma[g][h] / sigma[h][g]).collect()).collect());

    Ok(ProjectiveData { group: group.clone(), u, theta, sigma, invariant_phases, max_residual, max_scalar_defect })
}

/// On-site π-rotations e^{iπS_a} about the three axes, as the Z2×Z2
/// representation {1, R_x, R_y, R_z} matching [`FiniteGroup::z2xz2`].
pub fn pi_rotations(spin: crate::spin::Spin) -> Vec<CMat> {
    let ops = crate::spin::spin_matrices(spin);
    let pi = std::f64::consts::PI;
    vec![
        identity(spin.dim()),
        linalg::exp_i_hermitian(&ops.s1, pi),
        linalg::exp_i_hermitian(&ops.s2, pi),
        linalg::exp_i_hermitian(&ops.s3, pi),
    ]
}
