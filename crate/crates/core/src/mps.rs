//! Translation-invariant matrix product states.
//!
//! An [`MpsTensor`] is a tuple (v_μ) of k×k matrices, one per local basis
//! label μ = −S, …, S. For right-normalized primitive tuples
//! (Σ_μ v_μ v_μ* = 1) the state on l consecutive sites is
//!
//! ```text
//! ω(e_{μ1ν1} ⊗ … ⊗ e_{μlνl}) = ρ(v_{μ1}⋯v_{μl} v_{νl}*⋯v_{ν1}*)
//! ```
//!
//! where ρ is the unique invariant state of the transfer map
//! x ↦ Σ_μ v_μ x v_μ*.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::config::Tolerances;
use crate::error::{Result, SptError};
use crate::linalg::{
    self, eigenvalues, frobenius, hermitize, identity, max_abs, null_vector, orthonormal_span, re, CMat, CVec, ONE,
    ZERO,
};
use crate::spin::Spin;

/// Generator v = (v_μ) of a matrix product state.
#[derive(Debug, Clone, PartialEq)]
pub struct MpsTensor {
    spin: Spin,
    mats: Vec<CMat>,
}

impl MpsTensor {
    pub fn new(spin: Spin, mats: Vec<CMat>) -> Result<Self> {
        if mats.len() != spin.dim() {
            return Err(SptError::DimensionMismatch(format!(
                "spin {spin} needs {} matrices, got {}",
                spin.dim(),
                mats.len()
            )));
        }
        let k = mats[0].nrows();
        if k == 0 {
            return Err(SptError::Validation("bond dimension must be positive".into()));
        }
        if let Some(bad) = mats.iter().position(|m| m.nrows() != k || m.ncols() != k) {
            return Err(SptError::DimensionMismatch(format!(
                "matrix {bad} is {}×{}, expected {k}×{k}",
                mats[bad].nrows(),
                mats[bad].ncols()
            )));
        }
        if mats.iter().any(|m| m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite())) {
            return Err(SptError::Validation("tensor entries must be finite".into()));
        }
        Ok(MpsTensor { spin, mats })
    }

    /// The AKLT generator: v₊ = √(2/3)σ⁺, v₀ = −√(1/3)σ_z, v₋ = −√(2/3)σ⁻.
    pub fn aklt() -> Self {
        let a = (2.0f64 / 3.0).sqrt();
        let b = (1.0f64 / 3.0).sqrt();
        let sigma_plus = CMat::from_row_slice(2, 2, &[ZERO, ONE, ZERO, ZERO]);
        let sigma_minus = sigma_plus.transpose();
        let sigma_z = CMat::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE]);
        let mats = vec![sigma_minus * re(-a), sigma_z * re(-b), sigma_plus * re(a)];
        MpsTensor { spin: Spin::ONE, mats }
    }

    /// Bond-dimension-one product state with every site in basis state μ.
    pub fn product(spin: Spin, mu: f64) -> Result<Self> {
        let idx = spin.index(mu)?;
        let mats = (0..spin.dim())
            .map(|i| CMat::from_element(1, 1, if i == idx { ONE } else { ZERO }))
            .collect();
        Ok(MpsTensor { spin, mats })
    }

    pub fn spin(&self) -> Spin {
        self.spin
    }

    pub fn phys_dim(&self) -> usize {
        self.mats.len()
    }

    pub fn bond_dim(&self) -> usize {
        self.mats[0].nrows()
    }

    pub fn mats(&self) -> &[CMat] {
        &self.mats
    }

    /// Matrix for the basis index `i` (μ = i − S).
    pub fn mat(&self, i: usize) -> &CMat {
        &self.mats[i]
    }

    pub fn into_mats(self) -> Vec<CMat> {
        self.mats
    }

    pub fn map(&self, f: impl Fn(&CMat) -> CMat) -> Self {
        MpsTensor { spin: self.spin, mats: self.mats.iter().map(f).collect() }
    }

    pub fn scaled(&self, c: C64) -> Self {
        self.map(|m| m * c)
    }

    /// v_μ → g v_μ g⁻¹.
    pub fn gauge(&self, g: &CMat) -> Result<Self> {
        let g_inv = g.clone().try_inverse().ok_or_else(|| SptError::Validation("gauge is singular".into()))?;
        Ok(self.map(|m| g * m * &g_inv))
    }

    /// Pad the virtual space with zeros to bond dimension `k`.
    pub fn padded(&self, k: usize) -> Result<Self> {
        let k0 = self.bond_dim();
        if k < k0 {
            return Err(SptError::DimensionMismatch(format!("cannot pad bond dimension {k0} down to {k}")));
        }
        Ok(self.map(|m| CMat::from_fn(k, k, |i, j| if i < k0 && j < k0 { m[(i, j)] } else { ZERO })))
    }

    /// Σ_μ v_μ v_μ*.
    pub fn normalization_matrix(&self) -> CMat {
        self.mats.iter().fold(CMat::zeros(self.bond_dim(), self.bond_dim()), |acc, m| acc + m * m.adjoint())
    }

    pub fn normalization_defect(&self) -> f64 {
        max_abs(&(self.normalization_matrix() - identity(self.bond_dim())))
    }

    pub fn is_right_normalized(&self, tol: f64) -> bool {
        self.normalization_defect() <= tol
    }

    /// Product v_{μ1}⋯v_{μl} for a string of basis indices.
    pub fn word(&self, indices: &[usize]) -> CMat {
        indices.iter().fold(identity(self.bond_dim()), |acc, &i| acc * &self.mats[i])
    }

    /// All d^l products of length l in lexicographic order (first site most
    /// significant).
    pub fn words(&self, l: usize) -> Vec<CMat> {
        let mut out = vec![identity(self.bond_dim())];
        for _ in 0..l {
            let mut next = Vec::with_capacity(out.len() * self.phys_dim());
            for w in &out {
                for m in &self.mats {
                    next.push(w * m);
                }
            }
            out = next;
        }
        out
    }

    fn check_compatible(&self, other: &MpsTensor) -> Result<()> {
        if self.spin != other.spin || self.bond_dim() != other.bond_dim() {
            return Err(SptError::DimensionMismatch(format!(
                "tensors (S={}, k={}) and (S={}, k={}) are incompatible",
                self.spin,
                self.bond_dim(),
                other.spin,
                other.bond_dim()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    /// x ↦ Σ_μ a_μ x b_μ*
    RightActing,
    /// x ↦ Σ_μ a_μ* x b_μ
    LeftActing,
}

/// Linear map on k×k matrices built from two generators of equal shape.
#[derive(Debug, Clone, Copy)]
pub struct TransferMap<'a> {
    pub a: &'a MpsTensor,
    pub b: &'a MpsTensor,
    pub direction: Direction,
}

impl<'a> TransferMap<'a> {
    pub fn new(a: &'a MpsTensor, b: &'a MpsTensor, direction: Direction) -> Result<Self> {
        a.check_compatible(b)?;
        Ok(TransferMap { a, b, direction })
    }

    /// T_v, the right-acting self transfer map.
    pub fn of(v: &'a MpsTensor) -> Self {
        TransferMap { a: v, b: v, direction: Direction::RightActing }
    }

    pub fn dual_of(v: &'a MpsTensor) -> Self {
        TransferMap { a: v, b: v, direction: Direction::LeftActing }
    }

    pub fn bond_dim(&self) -> usize {
        self.a.bond_dim()
    }

    pub fn apply(&self, x: &CMat) -> Result<CMat> {
        let k = self.bond_dim();
        if x.nrows() != k || x.ncols() != k {
            return Err(SptError::DimensionMismatch(format!(
                "transfer map acts on {k}×{k} matrices, got {}×{}",
                x.nrows(),
                x.ncols()
            )));
        }
        let pairs = self.a.mats.iter().zip(&self.b.mats);
        Ok(match self.direction {
            Direction::RightActing => pairs.fold(CMat::zeros(k, k), |acc, (a, b)| acc + a * x * b.adjoint()),
            Direction::LeftActing => pairs.fold(CMat::zeros(k, k), |acc, (a, b)| acc + a.adjoint() * x * b),
        })
    }

    /// k²×k² matrix of the map acting on row-major vectorized matrices.
    pub fn to_matrix(&self) -> CMat {
        let k = self.bond_dim();
        let pairs = self.a.mats.iter().zip(&self.b.mats);
        match self.direction {
            Direction::RightActing => {
                pairs.fold(CMat::zeros(k * k, k * k), |acc, (a, b)| acc + a.kronecker(&linalg::conj(b)))
            }
            Direction::LeftActing => {
                pairs.fold(CMat::zeros(k * k, k * k), |acc, (a, b)| acc + a.adjoint().kronecker(&b.transpose()))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EigenMethod {
    /// Dense eigensolve for k ≤ 16, restarted Arnoldi above.
    Auto,
    Dense,
    Arnoldi,
}

/// Largest-modulus eigenpair of a transfer map.
#[derive(Debug, Clone)]
pub struct LeadingEigenpair {
    pub value: C64,
    /// Eigenmatrix with unit Frobenius norm and a fixed phase convention.
    pub vector: CMat,
    pub second_modulus: f64,
    pub degenerate: bool,
    pub residual: f64,
}

const DENSE_BOND_LIMIT: usize = 16;
const MAX_BOND_DIM: usize = 64;

/// Fix the phase of an eigenmatrix: tr X real positive when the trace is
/// not negligible, otherwise the first largest-modulus entry real positive.
fn fix_phase(x: &CMat) -> CMat {
    let norm = frobenius(x);
    let x = x / re(norm);
    let tr = linalg::trace(&x);
    let anchor = if tr.norm() > 1e-8 {
        tr
    } else {
        let mut best = ZERO;
        for c in 0..x.ncols() {
            for r in 0..x.nrows() {
                if x[(r, c)].norm() > best.norm() * (1.0 + 1e-9) {
                    best = x[(r, c)];
                }
            }
        }
        best
    };
    if anchor.norm() == 0.0 {
        return x;
    }
    &x * (anchor.conj() / anchor.norm())
}

/// Leading eigenpair of `map`. Degeneracy of the leading modulus is flagged
/// in the result rather than treated as an error.
pub fn leading_eigenpair(map: &TransferMap<'_>, tol: f64, max_iter: usize) -> Result<LeadingEigenpair> {
    leading_eigenpair_with(map, tol, max_iter, EigenMethod::Auto)
}

pub fn leading_eigenpair_with(
    map: &TransferMap<'_>,
    tol: f64,
    max_iter: usize,
    method: EigenMethod,
) -> Result<LeadingEigenpair> {
    let k = map.bond_dim();
    if k > MAX_BOND_DIM {
        return Err(SptError::Validation(format!("bond dimension {k} exceeds the supported limit {MAX_BOND_DIM}")));
    }
    let method = match method {
        EigenMethod::Auto if k <= DENSE_BOND_LIMIT => EigenMethod::Dense,
        EigenMethod::Auto => EigenMethod::Arnoldi,
        m => m,
    };
    let degenerate_rel = Tolerances::default().degenerate_rel;
    let (value, vec, second) = match method {
        EigenMethod::Dense => dense_leading(&map.to_matrix())?,
        _ => arnoldi_leading(map, tol, max_iter)?,
    };
    let vector = fix_phase(&linalg::unvectorize(&vec, k));
    let residual = frobenius(&(map.apply(&vector)? - &vector * value));
    let first = value.norm();
    let degenerate = first > 0.0 && (first - second) <= degenerate_rel * first;
    if residual > tol.max(1e-13) * (1.0 + first) {
        return Err(SptError::NoConvergence { iterations: max_iter, residual });
    }
    Ok(LeadingEigenpair { value, vector, second_modulus: second, degenerate, residual })
}

fn dense_leading(m: &CMat) -> Result<(C64, CVec, f64)> {
    let n = m.nrows();
    let mut ev = eigenvalues(m)?;
    ev.sort_by(|x, y| y.norm().total_cmp(&x.norm()).then(y.re.total_cmp(&x.re)).then(y.im.total_cmp(&x.im)));
    let lambda = ev[0];
    let second = ev.get(1).map(|z| z.norm()).unwrap_or(0.0);
    let shifted = m - CMat::identity(n, n) * lambda;
    let (v, _) = null_vector(&shifted);
    // Rayleigh-quotient polish of the eigenvalue.
    let mv = m * &v;
    let polished = v.dotc(&mv) / v.dotc(&v);
    Ok((polished, v, second))
}

/// Restarted Arnoldi on the vectorized map, restarting from the current
/// leading Ritz vector.
fn arnoldi_leading(map: &TransferMap<'_>, tol: f64, max_iter: usize) -> Result<(C64, CVec, f64)> {
    let k = map.bond_dim();
    let n = k * k;
    let m = n.min(40);
    let apply = |v: &CVec| -> CVec { linalg::vectorize(&map.apply(&linalg::unvectorize(v, k)).expect("shape")) };
    // Deterministic, generic start vector.
    let mut start = CVec::from_fn(n, |i, _| C64::new(1.0 + 0.1 * ((i * 7 % 13) as f64), 0.05 * ((i * 3 % 5) as f64)));
    start /= re(start.norm());
    let mut iterations = 0;
    let mut last_residual = f64::INFINITY;
    while iterations < max_iter {
        let mut basis: Vec<CVec> = vec![start.clone()];
        let mut h = CMat::zeros(m + 1, m);
        let mut size = m;
        for j in 0..m {
            iterations += 1;
            let mut w = apply(&basis[j]);
            for _ in 0..2 {
                for (i, q) in basis.iter().enumerate() {
                    let c = q.dotc(&w);
                    h[(i, j)] += c;
                    w -= q * c;
                }
            }
            let beta = w.norm();
            h[(j + 1, j)] = re(beta);
            if beta <= 1e-14 {
                size = j + 1;
                break;
            }
            basis.push(w / re(beta));
        }
        let hm = h.view((0, 0), (size, size)).into_owned();
        let mut ritz = eigenvalues(&hm)?;
        ritz.sort_by(|x, y| y.norm().total_cmp(&x.norm()).then(y.re.total_cmp(&x.re)));
        let theta = ritz[0];
        let second = ritz.get(1).map(|z| z.norm()).unwrap_or(0.0);
        let (y, _) = null_vector(&(&hm - CMat::identity(size, size) * theta));
        let x = (0..size).fold(CVec::zeros(n), |acc, i| acc + &basis[i] * y[i]);
        let x = &x / re(x.norm());
        let ax = apply(&x);
        let value = x.dotc(&ax);
        last_residual = (ax - &x * value).norm();
        if last_residual <= tol * (1.0 + value.norm()) || size < m {
            return Ok((value, x, second));
        }
        start = x;
    }
    Err(SptError::NoConvergence { iterations, residual: last_residual })
}

/// Result of [`right_normalize`].
#[derive(Debug, Clone)]
pub struct Normalized {
    pub tensor: MpsTensor,
    /// Gauge G with w_μ = scale⁻¹ · G⁻¹ v_μ G (tr G² = k).
    pub gauge: CMat,
    pub scale: f64,
}

/// Bring a primitive generator to the form Σ_μ w_μ w_μ* = 1 without
/// changing the state it generates.
pub fn right_normalize(raw: &MpsTensor, tol: f64) -> Result<Normalized> {
    let k = raw.bond_dim();
    let pair = leading_eigenpair(&TransferMap::of(raw), tol.max(1e-12), Tolerances::default().max_iter)
        .map_err(|e| SptError::NotNormalizable(e.to_string()))?;
    if pair.degenerate {
        return Err(SptError::NotNormalizable(format!(
            "leading eigenvalue is degenerate (|λ1| = {:.6e}, |λ2| = {:.6e})",
            pair.value.norm(),
            pair.second_modulus
        )));
    }
    let lambda = pair.value.norm();
    if lambda <= 0.0 {
        return Err(SptError::NotNormalizable("transfer map is nilpotent".into()));
    }
    let x = hermitize(&pair.vector);
    let (vals, _) = linalg::eigh(&x);
    let (lo, hi) = (vals[0], vals[vals.len() - 1]);
    if hi <= 0.0 || lo <= tol.max(1e-12) * hi {
        return Err(SptError::NotNormalizable(format!(
            "leading eigenmatrix is not positive definite (eigenvalues in [{lo:.3e}, {hi:.3e}])"
        )));
    }
    let x = &x * re(k as f64 / linalg::trace(&x).re);
    let gauge = linalg::hermitian_function(&x, f64::sqrt);
    let gauge_inv = linalg::hermitian_function(&x, |t| 1.0 / t.sqrt());
    let scale = lambda.sqrt();
    let tensor = raw.map(|m| &gauge_inv * m * &gauge / re(scale));
    let defect = tensor.normalization_defect();
    if defect > 1e3 * tol.max(1e-12) {
        return Err(SptError::NotNormalizable(format!("normalization defect {defect:.3e} after gauge fixing")));
    }
    Ok(Normalized { tensor, gauge, scale })
}

/// Density matrix on the bond space (Hermitian, PSD, unit trace).
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix(CMat);

impl DensityMatrix {
    pub fn new(m: CMat, tol: f64) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(SptError::DimensionMismatch("density matrix must be square".into()));
        }
        if linalg::hermiticity_defect(&m) > tol {
            return Err(SptError::Validation("density matrix is not Hermitian".into()));
        }
        let tr = linalg::trace(&m);
        if (tr - ONE).norm() > tol {
            return Err(SptError::Validation(format!("density matrix has trace {tr}")));
        }
        let vals = linalg::eigvalsh(&m);
        if vals[0] < -tol {
            return Err(SptError::Validation(format!("density matrix has negative eigenvalue {:.3e}", vals[0])));
        }
        Ok(DensityMatrix(hermitize(&m)))
    }

    pub fn matrix(&self) -> &CMat {
        &self.0
    }

    /// ρ(A) = tr(ρ A).
    pub fn expect(&self, a: &CMat) -> C64 {
        linalg::trace(&(&self.0 * a))
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        linalg::eigvalsh(&self.0)
    }
}

/// Unique ρ with Σ_μ v_μ* ρ v_μ = ρ for a right-normalized primitive v.
pub fn invariant_state(v: &MpsTensor, tol: f64) -> Result<DensityMatrix> {
    if !v.is_right_normalized(tol.max(1e-12) * 10.0) {
        return Err(SptError::Validation(format!(
            "tensor is not right-normalized (defect {:.3e})",
            v.normalization_defect()
        )));
    }
    let pair = leading_eigenpair(&TransferMap::dual_of(v), tol.max(1e-12), Tolerances::default().max_iter)?;
    if pair.degenerate {
        return Err(SptError::NotPrimitive(format!(
            "dual transfer map has a degenerate leading eigenvalue (|λ2| = {:.6e})",
            pair.second_modulus
        )));
    }
    if (pair.value - ONE).norm() > 1e3 * tol.max(1e-12) {
        return Err(SptError::NotPrimitive(format!("leading eigenvalue {} is not 1", pair.value)));
    }
    let x = hermitize(&pair.vector);
    let rho = &x / linalg::trace(&x);
    DensityMatrix::new(rho, 1e3 * tol.max(1e-12))
}

/// Smallest l ≤ l_max with K_l(v) = M_k, where K_l(v) is the span of all
/// products of l generator matrices.
pub fn primitivity_length(v: &MpsTensor, l_max: Option<usize>) -> Option<usize> {
    primitivity_length_with(v, l_max, Tolerances::default().span_cutoff)
}

pub fn default_l_max(k: usize) -> usize {
    2 * k.pow(4)
}

pub fn primitivity_length_with(v: &MpsTensor, l_max: Option<usize>, cutoff: f64) -> Option<usize> {
    let k = v.bond_dim();
    let full = k * k;
    let l_max = l_max.unwrap_or_else(|| default_l_max(k));
    let columns = |mats: &[CMat]| CMat::from_fn(full, mats.len(), |r, c| mats[c][(r / k, r % k)]);
    let as_mats = |basis: &CMat| -> Vec<CMat> {
        (0..basis.ncols())
            .map(|c| CMat::from_fn(k, k, |i, j| basis[(i * k + j, c)]))
            .collect()
    };
    let mut basis = orthonormal_span(&columns(v.mats()), cutoff);
    for l in 1..=l_max {
        let dim = basis.ncols();
        if dim == full {
            return Some(l);
        }
        if dim == 0 {
            return None;
        }
        let current = as_mats(&basis);
        let grown: Vec<CMat> = v.mats().iter().flat_map(|m| current.iter().map(move |b| m * b)).collect();
        let next = orthonormal_span(&columns(&grown), cutoff);
        // A span that maps onto itself never grows again.
        if next.ncols() == dim {
            let overlap = basis.adjoint() * &next;
            if linalg::singular_values(&overlap).iter().all(|&s| s > 1.0 - 1e-8) {
                return None;
            }
        }
        basis = next;
    }
    None
}

/// A right-normalized generator together with its invariant state.
#[derive(Debug, Clone)]
pub struct MpsState {
    tensor: MpsTensor,
    rho: DensityMatrix,
}

impl MpsState {
    pub fn new(tensor: MpsTensor, tol: f64) -> Result<Self> {
        let rho = invariant_state(&tensor, tol)?;
        Ok(MpsState { tensor, rho })
    }

    pub fn tensor(&self) -> &MpsTensor {
        &self.tensor
    }

    pub fn rho(&self) -> &DensityMatrix {
        &self.rho
    }

    /// ρ(v_{μ1}⋯v_{μl} v_{νl}*⋯v_{ν1}*) for label pairs (μ_i, ν_i).
    pub fn evaluate(&self, sites: &[(f64, f64)]) -> Result<C64> {
        let spin = self.tensor.spin();
        let mut left = Vec::with_capacity(sites.len());
        let mut right = Vec::with_capacity(sites.len());
        for &(mu, nu) in sites {
            left.push(spin.index(mu)?);
            right.push(spin.index(nu)?);
        }
        let a = self.tensor.word(&left);
        let b = self.tensor.word(&right);
        Ok(self.rho.expect(&(a * b.adjoint())))
    }

    /// Reduced density matrix on l consecutive sites, in the lexicographic
    /// product basis.
    pub fn reduced_density_matrix(&self, l: usize) -> CMat {
        let words = self.tensor.words(l);
        let k = self.tensor.bond_dim();
        let n = words.len();
        let flat = |m: &CMat| CVec::from_fn(k * k, |i, _| m[(i / k, i % k)]);
        let rho = self.rho.matrix();
        let lhs = CMat::from_columns(&words.iter().map(|w| flat(&(rho * w))).collect::<Vec<_>>());
        let rhs = CMat::from_columns(&words.iter().map(flat).collect::<Vec<_>>());
        // G[μ,ν] = tr(M_ν* ρ M_μ) = ω(|μ⟩⟨ν|); the density matrix is Gᵀ.
        let g = lhs.transpose() * rhs.map(|z| z.conj());
        debug_assert_eq!(g.nrows(), n);
        g.transpose()
    }

    /// ⟨A⟩ for an operator on l consecutive sites (d^l × d^l).
    pub fn expectation(&self, op: &CMat) -> Result<C64> {
        let d = self.tensor.phys_dim();
        let n = op.nrows();
        let mut l = 0;
        let mut size = 1;
        while size < n {
            size *= d;
            l += 1;
        }
        if size != n || op.ncols() != n {
            return Err(SptError::DimensionMismatch(format!(
                "operator of shape {}×{} is not supported on a whole number of d={d} sites",
                op.nrows(),
                op.ncols()
            )));
        }
        Ok(linalg::trace(&(self.reduced_density_matrix(l) * op)))
    }
}

/// Free-function form of [`MpsState::evaluate`].
pub fn evaluate_state(v: &MpsTensor, sites: &[(f64, f64)], tol: f64) -> Result<C64> {
    MpsState::new(v.clone(), tol)?.evaluate(sites)
}

/// Open-chain vector Σ tr(X v_{μ1}⋯v_{μn}) |μ1…μn⟩ for a boundary matrix X.
pub fn chain_vector(v: &MpsTensor, n: usize, boundary: &CMat) -> CVec {
    let words = v.words(n);
    CVec::from_iterator(words.len(), words.iter().map(|w| linalg::trace(&(boundary * w))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::random_unitary;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const TOL: f64 = 1e-10;

    fn sigma_z() -> CMat {
        CMat::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE])
    }

    /// Transfer matrix assembled entry by entry: T[(i,j),(p,q)] = Σ_μ a_μ[i,p] conj(b_μ[j,q]).
    fn brute_transfer(a: &MpsTensor, b: &MpsTensor) -> CMat {
        let k = a.bond_dim();
        let mut t = CMat::zeros(k * k, k * k);
        for mu in 0..a.phys_dim() {
            for i in 0..k {
                for j in 0..k {
                    for p in 0..k {
                        for q in 0..k {
                            t[(i * k + j, p * k + q)] += a.mat(mu)[(i, p)] * b.mat(mu)[(j, q)].conj();
                        }
                    }
                }
            }
        }
        t
    }

    #[test]
    fn aklt_is_right_normalized_by_hand() {
        // (2/3)σ⁻σ⁺ + (1/3)σ_z² + (2/3)σ⁺σ⁻ = 1
        let v = MpsTensor::aklt();
        assert!(v.normalization_defect() < 1e-15);
    }

    #[test]
    fn normalize_scalar_product_state() {
        let v = MpsTensor::product(Spin::ONE, 0.0).unwrap();
        let n = right_normalize(&v, TOL).unwrap();
        assert_eq!(n.tensor, v);
        assert!((n.scale - 1.0).abs() < 1e-14);
        assert!((n.gauge[(0, 0)] - ONE).norm() < 1e-14);
    }

    #[test]
    fn normalize_aklt_is_identity() {
        let v = MpsTensor::aklt();
        let n = right_normalize(&v, TOL).unwrap();
        assert!((n.scale - 1.0).abs() < 1e-12);
        assert!(max_abs(&(&n.gauge - identity(2))) < 1e-10);
        for (a, b) in n.tensor.mats().iter().zip(v.mats()) {
            assert!(max_abs(&(a - b)) < 1e-10);
        }
    }

    #[test]
    fn normalize_recovers_scale() {
        let v = MpsTensor::aklt();
        let n = right_normalize(&v.scaled(re(2.0)), TOL).unwrap();
        assert!((n.scale - 2.0).abs() < 1e-12);
        for (a, b) in n.tensor.mats().iter().zip(v.mats()) {
            assert!(max_abs(&(a - b)) < 1e-10);
        }
    }

    #[test]
    fn normalize_rejects_non_primitive() {
        let e11 = CMat::from_row_slice(2, 2, &[ONE, ZERO, ZERO, ZERO]);
        let e22 = CMat::from_row_slice(2, 2, &[ZERO, ZERO, ZERO, ONE]);
        let v = MpsTensor::new(Spin::ONE, vec![e11, e22, CMat::zeros(2, 2)]).unwrap();
        assert!(matches!(right_normalize(&v, TOL), Err(SptError::NotNormalizable(_))));
    }

    #[test]
    fn normalize_random_gauge_and_scale() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let g = linalg::random_complex_matrix(&mut rng, 2, 2);
        let raw = MpsTensor::aklt().gauge(&g).unwrap().scaled(C64::new(0.3, 0.4));
        let n = right_normalize(&raw, TOL).unwrap();
        assert!(n.tensor.normalization_defect() < 1e-10);
        assert!((n.scale - 0.5).abs() < 1e-10);
    }

    #[test]
    fn transfer_is_unital_on_aklt() {
        let v = MpsTensor::aklt();
        let out = TransferMap::of(&v).apply(&identity(2)).unwrap();
        assert!(max_abs(&(out - identity(2))) < 1e-15);
    }

    #[test]
    fn transfer_product_scalar() {
        let v = MpsTensor::product(Spin::ONE, 0.0).unwrap();
        let out = TransferMap::of(&v).apply(&identity(1)).unwrap();
        assert_eq!(out[(0, 0)], ONE);
    }

    #[test]
    fn transfer_aklt_sigma_z_eigenvector() {
        let v = MpsTensor::aklt();
        let out = TransferMap::of(&v).apply(&sigma_z()).unwrap();
        assert!(max_abs(&(out + sigma_z() * re(1.0 / 3.0))) < 1e-15);
    }

    #[test]
    fn transfer_rejects_wrong_shape() {
        let v = MpsTensor::aklt();
        assert!(matches!(TransferMap::of(&v).apply(&identity(3)), Err(SptError::DimensionMismatch(_))));
    }

    #[test]
    fn aklt_transfer_spectrum_matches_brute_force() {
        let v = MpsTensor::aklt();
        let brute = brute_transfer(&v, &v);
        assert!(max_abs(&(TransferMap::of(&v).to_matrix() - &brute)) < 1e-15);
        let mut ev: Vec<f64> = eigenvalues(&brute).unwrap().iter().map(|z| z.re).collect();
        ev.sort_by(f64::total_cmp);
        let expected = [-1.0 / 3.0, -1.0 / 3.0, -1.0 / 3.0, 1.0];
        for (a, b) in ev.iter().zip(expected) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn to_matrix_matches_apply() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = MpsTensor::new(Spin::ONE, (0..3).map(|_| linalg::random_complex_matrix(&mut rng, 3, 3)).collect())
            .unwrap();
        let b = MpsTensor::new(Spin::ONE, (0..3).map(|_| linalg::random_complex_matrix(&mut rng, 3, 3)).collect())
            .unwrap();
        let x = linalg::random_complex_matrix(&mut rng, 3, 3);
        for dir in [Direction::RightActing, Direction::LeftActing] {
            let map = TransferMap::new(&a, &b, dir).unwrap();
            let via_matrix = linalg::unvectorize(&(map.to_matrix() * linalg::vectorize(&x)), 3);
            assert!(max_abs(&(via_matrix - map.apply(&x).unwrap())) < 1e-12);
        }
        assert!(max_abs(&(TransferMap::new(&a, &b, Direction::RightActing).unwrap().to_matrix() - brute_transfer(&a, &b))) < 1e-12);
    }

    #[test]
    fn leading_pair_aklt() {
        let v = MpsTensor::aklt();
        let p = leading_eigenpair(&TransferMap::of(&v), 1e-12, 1000).unwrap();
        assert!((p.value - ONE).norm() < 1e-12);
        assert!(max_abs(&(&p.vector - identity(2) * re(0.5f64.sqrt()))) < 1e-12);
        assert!(!p.degenerate);
        assert!((p.second_modulus - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn leading_pair_product() {
        let v = MpsTensor::product(Spin::ONE, 0.0).unwrap();
        let p = leading_eigenpair(&TransferMap::of(&v), 1e-12, 1000).unwrap();
        assert!((p.value - ONE).norm() < 1e-14);
        assert!((p.vector[(0, 0)] - ONE).norm() < 1e-14);
    }

    #[test]
    fn leading_pair_flags_degeneracy() {
        let e11 = CMat::from_row_slice(2, 2, &[ONE, ZERO, ZERO, ZERO]);
        let e22 = CMat::from_row_slice(2, 2, &[ZERO, ZERO, ZERO, ONE]);
        let v = MpsTensor::new(Spin::ONE, vec![e11, e22, CMat::zeros(2, 2)]).unwrap();
        let p = leading_eigenpair(&TransferMap::of(&v), 1e-12, 1000).unwrap();
        assert!(p.degenerate);
    }

    #[test]
    fn arnoldi_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for k in 2..=5 {
            let raw =
                MpsTensor::new(Spin::ONE, (0..3).map(|_| linalg::random_complex_matrix(&mut rng, k, k)).collect())
                    .unwrap();
            let map = TransferMap::of(&raw);
            let dense = leading_eigenpair_with(&map, 1e-11, 1000, EigenMethod::Dense).unwrap();
            let iter = leading_eigenpair_with(&map, 1e-11, 1000, EigenMethod::Arnoldi).unwrap();
            assert!((dense.value - iter.value).norm() < 1e-9 * dense.value.norm());
            assert!(max_abs(&(&dense.vector - &iter.vector)) < 1e-8);
        }
    }

    #[test]
    fn invariant_state_aklt() {
        let rho = invariant_state(&MpsTensor::aklt(), TOL).unwrap();
        assert!(max_abs(&(rho.matrix() - identity(2) * re(0.5))) < 1e-12);
    }

    #[test]
    fn invariant_state_product() {
        let rho = invariant_state(&MpsTensor::product(Spin::ONE, 0.0).unwrap(), TOL).unwrap();
        assert!((rho.matrix()[(0, 0)] - ONE).norm() < 1e-14);
    }

    #[test]
    fn invariant_state_gauge_covariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let g = random_unitary(&mut rng, 2);
        let v = MpsTensor::aklt().map(|m| &g * m * g.adjoint());
        let rho = invariant_state(&v, TOL).unwrap();
        let expected = &g * identity(2) * re(0.5) * g.adjoint();
        assert!(max_abs(&(rho.matrix() - expected)) < 1e-12);
    }

    #[test]
    fn invariant_state_rejects_unnormalized() {
        assert!(invariant_state(&MpsTensor::aklt().scaled(re(2.0)), TOL).is_err());
    }

    #[test]
    fn primitivity_examples() {
        let v = MpsTensor::product(Spin::ONE, 0.0).unwrap();
        assert_eq!(primitivity_length(&v, None), Some(1));
        assert_eq!(primitivity_length(&MpsTensor::aklt(), None), Some(2));
        let e11 = CMat::from_row_slice(2, 2, &[ONE, ZERO, ZERO, ZERO]);
        let e22 = CMat::from_row_slice(2, 2, &[ZERO, ZERO, ZERO, ONE]);
        let diag = MpsTensor::new(Spin::ONE, vec![e11, e22, CMat::zeros(2, 2)]).unwrap();
        assert_eq!(primitivity_length(&diag, None), None);
    }

    #[test]
    fn aklt_span_dimensions_by_rank() {
        // dim K_1 = 3: rank of the 4×3 matrix of vectorized generators.
        let v = MpsTensor::aklt();
        let k1 = CMat::from_fn(4, 3, |r, c| v.mat(c)[(r / 2, r % 2)]);
        assert_eq!(linalg::numerical_rank(&k1, 1e-10), 3);
        let words = v.words(2);
        let k2 = CMat::from_fn(4, words.len(), |r, c| words[c][(r / 2, r % 2)]);
        assert_eq!(linalg::numerical_rank(&k2, 1e-10), 4);
    }

    #[test]
    fn evaluate_examples() {
        let p = MpsTensor::product(Spin::ONE, 0.0).unwrap();
        assert!((evaluate_state(&p, &[(0.0, 0.0)], TOL).unwrap() - ONE).norm() < 1e-14);
        let v = MpsTensor::aklt();
        let third = re(1.0 / 3.0);
        assert!((evaluate_state(&v, &[(0.0, 0.0)], TOL).unwrap() - third).norm() < 1e-12);
        assert!((evaluate_state(&v, &[(1.0, 1.0)], TOL).unwrap() - third).norm() < 1e-12);
        assert!(matches!(evaluate_state(&v, &[(2.0, 0.0)], TOL), Err(SptError::IndexOutOfRange { .. })));
    }

    #[test]
    fn fixed_point_consistency() {
        let state = MpsState::new(MpsTensor::aklt(), TOL).unwrap();
        let total: C64 = [-1.0, 0.0, 1.0].iter().map(|&m| state.evaluate(&[(m, m)]).unwrap()).sum();
        assert!((total - ONE).norm() < 1e-12);
        let rho = state.rho().matrix();
        let image = TransferMap::dual_of(state.tensor()).apply(rho).unwrap();
        assert!(max_abs(&(image - rho)) < 1e-10);
    }

    #[test]
    fn reduced_density_matches_evaluate() {
        let state = MpsState::new(MpsTensor::aklt(), TOL).unwrap();
        let r = state.reduced_density_matrix(2);
        assert!((linalg::trace(&r) - ONE).norm() < 1e-12);
        // ⟨e_{μ1ν1} ⊗ e_{μ2ν2}⟩ = R[ν, μ]
        let spin = Spin::ONE;
        for (m1, n1, m2, n2) in [(1.0, 0.0, -1.0, 0.0), (0.0, 0.0, 1.0, 1.0), (1.0, -1.0, -1.0, 1.0)] {
            let mu = spin.index(m1).unwrap() * 3 + spin.index(m2).unwrap();
            let nu = spin.index(n1).unwrap() * 3 + spin.index(n2).unwrap();
            let direct = state.evaluate(&[(m1, n1), (m2, n2)]).unwrap();
            assert!((r[(nu, mu)] - direct).norm() < 1e-12);
        }
    }

    #[test]
    fn chain_vector_norm_matches_state() {
        // ⟨ψ|ψ⟩ for the periodic trace state (X = 1) is tr(T^n), with T's
        // spectrum {1, −1/3 ×3}.
        let v = MpsTensor::aklt();
        for n in 2..6 {
            let psi = chain_vector(&v, n, &identity(2));
            let expected = 1.0 + 3.0 * (-1.0f64 / 3.0).powi(n as i32);
            assert!((psi.norm_squared() - expected).abs() < 1e-12);
        }
    }
}
