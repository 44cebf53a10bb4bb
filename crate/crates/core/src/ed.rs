//! Exact diagonalization of finite spin chains.
//!
//! States of n sites live in the lexicographic product basis, site 0 being
//! the most significant digit (the ordering of `kron`). Each site digit is
//! the ascending-μ index of [`crate::spin`].

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SptError};
use crate::lanczos::{lowest_eigenpairs, Eigenpairs, LanczosSettings, Solver};
use crate::linalg::{self, hermiticity_defect, identity, kron, re, CMat, CVec, ZERO};
use crate::sparse::{pattern_components, CsrMatrix};
use crate::spin::{spin_matrices, Spin};

/// Default Hilbert-space cap: twelve spin-1 sites.
pub const DEFAULT_MAX_DIM: usize = 531_441;

/// Cap on the ED dimension, overridable through `SPT_MAX_DIM`.
pub fn max_dim() -> usize {
    std::env::var("SPT_MAX_DIM").ok().and_then(|v| v.trim().parse().ok()).unwrap_or(DEFAULT_MAX_DIM)
}

/// A term on explicit sites. Negative site labels count from the right end
/// of the chain (−1 is the last site).
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryTerm {
    pub sites: Vec<i64>,
    pub matrix: CMat,
}

/// Translation-invariant m-site term plus fixed extra terms.
#[derive(Debug, Clone, PartialEq)]
pub struct Interaction {
    spin: Spin,
    range: usize,
    bulk: CMat,
    boundary: Vec<BoundaryTerm>,
}

const HERMITIAN_TOL: f64 = 1e-10;

fn support_of(d: usize, dim: usize) -> Option<usize> {
    let (mut size, mut l) = (1usize, 0usize);
    while size < dim {
        size *= d;
        l += 1;
    }
    (size == dim).then_some(l)
}

impl Interaction {
    pub fn new(spin: Spin, bulk: CMat, boundary: Vec<BoundaryTerm>) -> Result<Self> {
        let d = spin.dim();
        let range = support_of(d, bulk.nrows())
            .filter(|&m| m > 0 && bulk.is_square())
            .ok_or_else(|| SptError::DimensionMismatch(format!("bulk term of size {} is not d^m for d = {d}", bulk.nrows())))?;
        if hermiticity_defect(&bulk) > HERMITIAN_TOL {
            return Err(SptError::Validation("bulk term is not Hermitian".into()));
        }
        for t in &boundary {
            let expect = d.pow(t.sites.len() as u32);
            if t.sites.is_empty() || t.matrix.nrows() != expect || t.matrix.ncols() != expect {
                return Err(SptError::DimensionMismatch(format!(
                    "boundary term on {} sites must be {expect}×{expect}",
                    t.sites.len()
                )));
            }
            if hermiticity_defect(&t.matrix) > HERMITIAN_TOL {
                return Err(SptError::Validation("boundary term is not Hermitian".into()));
            }
        }
        Ok(Interaction { spin, range, bulk, boundary })
    }

    pub fn builtin(which: Builtin) -> Self {
        let ops = spin_matrices(Spin::ONE);
        let bulk = match which {
            Builtin::Aklt => {
                let ss = ops.components().iter().fold(CMat::zeros(9, 9), |acc, s| acc + kron(s, s));
                &ss + &ss * &ss * re(1.0 / 3.0)
            }
            Builtin::Trivial => &ops.s3 * &ops.s3,
        };
        Interaction::new(Spin::ONE, bulk, Vec::new()).expect("builtin interactions are valid")
    }

    pub fn spin(&self) -> Spin {
        self.spin
    }

    pub fn range(&self) -> usize {
        self.range
    }

    pub fn bulk(&self) -> &CMat {
        &self.bulk
    }

    pub fn boundary(&self) -> &[BoundaryTerm] {
        &self.boundary
    }

    pub fn scaled(&self, a: f64) -> Self {
        Interaction {
            spin: self.spin,
            range: self.range,
            bulk: &self.bulk * re(a),
            boundary: self.boundary.iter().map(|t| BoundaryTerm { sites: t.sites.clone(), matrix: &t.matrix * re(a) }).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Builtin {
    Aklt,
    Trivial,
}

impl FromStr for Builtin {
    type Err = SptError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "aklt" => Ok(Builtin::Aklt),
            "trivial" => Ok(Builtin::Trivial),
            other => Err(SptError::Validation(format!("unknown builtin interaction `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Boundary {
    Open,
    Periodic,
    /// Open chain plus the given extra terms.
    Custom(Vec<BoundaryTerm>),
}

impl Boundary {
    pub fn name(&self) -> &'static str {
        match self {
            Boundary::Open => "open",
            Boundary::Periodic => "periodic",
            Boundary::Custom(_) => "custom",
        }
    }
}

impl fmt::Display for Boundary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A local matrix acting on the listed sites, in that order.
#[derive(Debug, Clone, PartialEq)]
pub struct PlacedTerm {
    pub sites: Vec<usize>,
    pub matrix: CMat,
}

fn resolve_sites(sites: &[i64], n: usize) -> Result<Vec<usize>> {
    let resolved: Vec<usize> = sites
        .iter()
        .map(|&s| {
            let r = if s < 0 { n as i64 + s } else { s };
            if r < 0 || r >= n as i64 {
                Err(SptError::Validation(format!("site {s} is outside a chain of {n} sites")))
            } else {
                Ok(r as usize)
            }
        })
        .collect::<Result<_>>()?;
    let mut sorted = resolved.clone();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != resolved.len() {
        return Err(SptError::Validation(format!("repeated site in term on {sites:?}")));
    }
    Ok(resolved)
}

/// All local terms of Φ on n sites.
pub fn placed_terms(phi: &Interaction, n: usize, boundary: &Boundary) -> Result<Vec<PlacedTerm>> {
    if n == 0 {
        return Err(SptError::BadParameters("chain must have at least one site".into()));
    }
    let m = phi.range;
    let mut terms = Vec::new();
    match boundary {
        Boundary::Periodic => {
            if n < m {
                return Err(SptError::BadParameters(format!("periodic chain of {n} sites is shorter than the range {m}")));
            }
            for x in 0..n {
                terms.push(PlacedTerm { sites: (0..m).map(|j| (x + j) % n).collect(), matrix: phi.bulk.clone() });
            }
        }
        Boundary::Open | Boundary::Custom(_) => {
            for x in 0..(n + 1).saturating_sub(m) {
                terms.push(PlacedTerm { sites: (x..x + m).collect(), matrix: phi.bulk.clone() });
            }
        }
    }
    let extra: &[BoundaryTerm] = match boundary {
        Boundary::Custom(t) => t,
        _ => &[],
    };
    for t in phi.boundary.iter().chain(extra) {
        let d = phi.spin.dim();
        if t.matrix.nrows() != d.pow(t.sites.len() as u32) {
            return Err(SptError::DimensionMismatch("boundary term does not match its sites".into()));
        }
        terms.push(PlacedTerm { sites: resolve_sites(&t.sites, n)?, matrix: t.matrix.clone() });
    }
    Ok(terms)
}

pub fn check_dim(spin: Spin, n: usize, cap: usize) -> Result<usize> {
    let dim = (spin.dim() as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
    if dim > cap as u128 {
        return Err(SptError::SizeCap { dim: dim.min(usize::MAX as u128) as usize, cap });
    }
    Ok(dim as usize)
}

/// Σ of the placed terms as a sparse matrix on (2S+1)^n states.
pub fn assemble(terms: &[PlacedTerm], spin: Spin, n: usize, cap: usize) -> Result<CsrMatrix> {
    let d = spin.dim();
    let dim = check_dim(spin, n, cap)?;
    struct Prepared {
        strides: Vec<usize>,
        rows: Vec<Vec<(usize, num_complex::Complex64)>>,
    }
    let stride = |site: usize| d.pow((n - 1 - site) as u32);
    let prepared: Vec<Prepared> = terms
        .iter()
        .map(|t| {
            if t.sites.iter().any(|&s| s >= n) {
                return Err(SptError::Validation("term site outside the chain".into()));
            }
            let size = d.pow(t.sites.len() as u32);
            if t.matrix.nrows() != size || t.matrix.ncols() != size {
                return Err(SptError::DimensionMismatch("term matrix does not match its sites".into()));
            }
            let rows = (0..size)
                .map(|a| (0..size).filter(|&b| t.matrix[(a, b)] != ZERO).map(|b| (b, t.matrix[(a, b)])).collect())
                .collect();
            Ok(Prepared { strides: t.sites.iter().map(|&s| stride(s)).collect(), rows })
        })
        .collect::<Result<_>>()?;
    Ok(CsrMatrix::from_rows(dim, |r, buf| {
        for p in &prepared {
            let l = p.strides.len();
            let mut digits = [0usize; 16];
            let mut a = 0;
            for (j, &st) in p.strides.iter().enumerate() {
                digits[j] = (r / st) % d;
                a = a * d + digits[j];
            }
            for &(b, v) in &p.rows[a] {
                let mut col = r;
                let mut rem = b;
                for j in (0..l).rev() {
                    let bj = rem % d;
                    rem /= d;
                    col = col + bj * p.strides[j] - digits[j] * p.strides[j];
                }
                buf.push((col, v));
            }
        }
    }))
}

/// H = Σ_X Φ(X) on n sites.
pub fn build_hamiltonian(phi: &Interaction, n: usize, boundary: &Boundary) -> Result<CsrMatrix> {
    build_hamiltonian_capped(phi, n, boundary, max_dim())
}

pub fn build_hamiltonian_capped(phi: &Interaction, n: usize, boundary: &Boundary, cap: usize) -> Result<CsrMatrix> {
    assemble(&placed_terms(phi, n, boundary)?, phi.spin, n, cap)
}

/// `op` acting on `site` of an n-site chain, as a sparse matrix.
pub fn site_operator(op: &CMat, spin: Spin, site: usize, n: usize) -> Result<CsrMatrix> {
    let term = PlacedTerm { sites: vec![site], matrix: op.clone() };
    assemble(&[term], spin, n, usize::MAX)
}

/// Lowest q eigenpairs of H, solved independently on each connected block
/// of its sparsity pattern and merged.
pub fn low_eigenpairs(h: &CsrMatrix, q: usize, settings: &LanczosSettings, solver: Solver) -> Result<Eigenpairs> {
    let comps = pattern_components(&[h]);
    let mut found: Vec<(f64, CVec, f64)> = Vec::new();
    for (ci, states) in comps.iter().enumerate() {
        let block = h.restrict(states);
        let local = LanczosSettings { seed: settings.seed.wrapping_add(ci as u64), ..*settings };
        let pairs = lowest_eigenpairs(&block, q.min(states.len()), &local, solver)?;
        for ((value, vec), res) in pairs.values.into_iter().zip(pairs.vectors).zip(pairs.residuals) {
            let mut full = CVec::zeros(h.dim());
            for (i, &s) in states.iter().enumerate() {
                full[s] = vec[i];
            }
            found.push((value, full, res));
        }
        // keep only the q best so far
        found.sort_by(|a, b| a.0.total_cmp(&b.0));
        found.truncate(q);
    }
    Ok(Eigenpairs {
        values: found.iter().map(|f| f.0).collect(),
        residuals: found.iter().map(|f| f.2).collect(),
        vectors: found.into_iter().map(|f| f.1).collect(),
    })
}

/// The q lowest eigenvalues, ascending.
pub fn low_spectrum(h: &CsrMatrix, q: usize, tol: f64) -> Result<Vec<f64>> {
    let settings = LanczosSettings { tol, ..LanczosSettings::default() };
    Ok(low_eigenpairs(h, q, &settings, Solver::Auto)?.values)
}

/// A split of a low spectrum into a bottom cluster and the rest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub sigma1: Vec<f64>,
    pub sigma2: Vec<f64>,
    pub gap: f64,
    pub sigma1_diameter: f64,
    /// Largest consecutive gap over the second largest.
    pub ratio: f64,
}

/// Split at the largest consecutive gap. The split must dominate every
/// other gap by a factor of two and be at least `gamma_guess` wide.
pub fn detect_split(eigs: &[f64], gamma_guess: f64) -> Result<Split> {
    if eigs.len() < 2 {
        return Err(SptError::NoSplit { ratio: 0.0 });
    }
    if eigs.windows(2).any(|w| w[1] < w[0]) {
        return Err(SptError::Validation("eigenvalues must be ascending".into()));
    }
    let gaps: Vec<f64> = eigs.windows(2).map(|w| w[1] - w[0]).collect();
    // first index wins ties so the result is deterministic
    let (at, &largest) = gaps.iter().enumerate().fold((0, &gaps[0]), |best, (i, g)| if *g > *best.1 { (i, g) } else { best });
    let second = gaps.iter().enumerate().filter(|&(i, _)| i != at).map(|(_, &g)| g).fold(0.0, f64::max);
    let ratio = if second > 0.0 { largest / second } else { f64::INFINITY };
    if ratio < 2.0 || largest < gamma_guess || largest <= 0.0 {
        return Err(SptError::NoSplit { ratio });
    }
    let sigma1 = eigs[..=at].to_vec();
    let sigma2 = eigs[at + 1..].to_vec();
    Ok(Split {
        sigma1_diameter: sigma1[sigma1.len() - 1] - sigma1[0],
        gap: largest,
        sigma1,
        sigma2,
        ratio,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    pub n: usize,
    pub boundary: String,
    pub eigenvalues: Vec<f64>,
    pub split: Option<Split>,
    /// Split gap when a split was found, otherwise e1 − e0.
    pub gap: f64,
}

pub fn spectrum_report(h: &CsrMatrix, n: usize, boundary: &Boundary, q: usize, gamma_guess: f64, tol: f64) -> Result<SpectrumReport> {
    let eigenvalues = low_spectrum(h, q, tol)?;
    let split = detect_split(&eigenvalues, gamma_guess).ok();
    let gap = match &split {
        Some(s) => s.gap,
        None if eigenvalues.len() >= 2 => eigenvalues[1] - eigenvalues[0],
        None => f64::NAN,
    };
    Ok(SpectrumReport { n, boundary: boundary.name().into(), eigenvalues, split, gap })
}

#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub phi0: Interaction,
    pub phi1: Interaction,
    pub s_grid: Vec<f64>,
    pub sizes: Vec<usize>,
    pub boundary: Boundary,
    /// Number of low eigenvalues computed per point.
    pub q: usize,
    pub gamma_guess: f64,
    /// Golden-section steps spent refining the minimum of each size.
    pub refine_steps: usize,
    /// Eigensolver residual tolerance; eigenvalue errors scale as its square.
    pub tol: f64,
    pub seed: u64,
    pub max_dim: usize,
}

impl SweepConfig {
    pub fn new(phi0: Interaction, phi1: Interaction, sizes: Vec<usize>, boundary: Boundary) -> Self {
        SweepConfig {
            phi0,
            phi1,
            s_grid: uniform_grid(41),
            sizes,
            boundary,
            q: 2,
            gamma_guess: 0.01,
            refine_steps: 12,
            tol: 1e-7,
            seed: 0,
            max_dim: max_dim(),
        }
    }
}

pub fn uniform_grid(points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![0.0],
        p => (0..p).map(|i| i as f64 / (p - 1) as f64).collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub s: f64,
    pub n: usize,
    pub boundary: String,
    pub e0: f64,
    pub e1: f64,
    pub gap: f64,
    pub sigma1_diameter: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeSummary {
    pub n: usize,
    /// Grid point with the smallest gap.
    pub grid_argmin: f64,
    pub grid_min_gap: f64,
    /// Refined location and value of the minimum.
    pub s_star: f64,
    pub min_gap: f64,
    pub interior: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub sizes: Vec<SizeSummary>,
    /// min gap strictly decreasing in n (sizes sorted ascending).
    pub monotone_decreasing: bool,
}

/// Path Hamiltonian blocks for one chain length: the two endpoints restricted
/// to each connected block of their joint sparsity pattern.
pub struct PathBlocks {
    pub n: usize,
    blocks: Vec<(CsrMatrix, CsrMatrix)>,
}

impl PathBlocks {
    pub fn new(phi0: &Interaction, phi1: &Interaction, n: usize, boundary: &Boundary, cap: usize) -> Result<Self> {
        if phi0.spin != phi1.spin {
            return Err(SptError::Validation("interactions act on different spins".into()));
        }
        let h0 = build_hamiltonian_capped(phi0, n, boundary, cap)?;
        let h1 = build_hamiltonian_capped(phi1, n, boundary, cap)?;
        let blocks = pattern_components(&[&h0, &h1]).iter().map(|c| (h0.restrict(c), h1.restrict(c))).collect();
        Ok(PathBlocks { n, blocks })
    }

    /// Lowest q eigenvalues of (1−s)H0 + sH1.
    pub fn spectrum(&self, s: f64, q: usize, settings: &LanczosSettings) -> Result<Vec<f64>> {
        let mut all = Vec::new();
        for (i, (a, b)) in self.blocks.iter().enumerate() {
            let h = CsrMatrix::linear_combination(1.0 - s, a, s, b);
            let local = LanczosSettings { seed: settings.seed.wrapping_add(i as u64), ..*settings };
            all.extend(lowest_eigenpairs(&h, q.min(h.dim()), &local, Solver::Auto)?.values);
            all.sort_by(f64::total_cmp);
            all.truncate(q);
        }
        Ok(all)
    }
}

fn sweep_point(blocks: &PathBlocks, s: f64, cfg: &SweepConfig) -> Result<SweepRow> {
    let settings = LanczosSettings { tol: cfg.tol, seed: cfg.seed, ..LanczosSettings::default() };
    let eigs = blocks.spectrum(s, cfg.q.max(2), &settings)?;
    let split = detect_split(&eigs, cfg.gamma_guess).ok();
    let (gap, diameter) = match &split {
        Some(sp) => (sp.gap, sp.sigma1_diameter),
        None => (eigs[1] - eigs[0], f64::NAN),
    };
    Ok(SweepRow { s, n: blocks.n, boundary: cfg.boundary.name().into(), e0: eigs[0], e1: eigs[1], gap, sigma1_diameter: diameter })
}

/// Gap along (1−s)Φ0 + sΦ1 for every size and grid point. Rows are ordered
/// by size, then s.
pub fn gap_sweep(cfg: &SweepConfig) -> Result<(Vec<SweepRow>, SweepSummary)> {
    if cfg.s_grid.is_empty() || cfg.sizes.is_empty() {
        return Err(SptError::BadParameters("empty grid or size list".into()));
    }
    if cfg.s_grid.iter().any(|s| !s.is_finite()) {
        return Err(SptError::BadParameters("non-finite grid point".into()));
    }
    let paths: Vec<PathBlocks> = cfg
        .sizes
        .iter()
        .map(|&n| PathBlocks::new(&cfg.phi0, &cfg.phi1, n, &cfg.boundary, cfg.max_dim))
        .collect::<Result<_>>()?;
    let jobs: Vec<(usize, f64)> = (0..paths.len()).flat_map(|p| cfg.s_grid.iter().map(move |&s| (p, s))).collect();
    let rows: Vec<SweepRow> =
        jobs.par_iter().map(|&(p, s)| sweep_point(&paths[p], s, cfg)).collect::<Vec<_>>().into_iter().collect::<Result<_>>()?;

    let mut sizes = Vec::new();
    for (p, path) in paths.iter().enumerate() {
        let mine: Vec<&SweepRow> = rows.iter().filter(|r| r.n == path.n).collect();
        let (i, best) = mine.iter().enumerate().fold((0, mine[0]), |acc, (i, r)| if r.gap < acc.1.gap { (i, *r) } else { acc });
        let lo = mine[i.saturating_sub(1)].s;
        let hi = mine[(i + 1).min(mine.len() - 1)].s;
        let gap_at = |s: f64| sweep_point(&paths[p], s, cfg).map(|r| r.gap);
        let (s_star, min_gap) = golden_minimum(gap_at, lo, hi, cfg.refine_steps, (best.s, best.gap))?;
        let (first, last) = (cfg.s_grid[0].min(cfg.s_grid[cfg.s_grid.len() - 1]), cfg.s_grid[0].max(cfg.s_grid[cfg.s_grid.len() - 1]));
        sizes.push(SizeSummary {
            n: path.n,
            grid_argmin: best.s,
            grid_min_gap: best.gap,
            s_star,
            min_gap,
            interior: best.s > first && best.s < last,
        });
    }
    let mut sorted = sizes.clone();
    sorted.sort_by_key(|s| s.n);
    let monotone_decreasing = sorted.windows(2).all(|w| w[1].min_gap < w[0].min_gap);
    Ok((rows, SweepSummary { sizes, monotone_decreasing }))
}

fn golden_minimum(
    f: impl Fn(f64) -> Result<f64>,
    mut a: f64,
    mut b: f64,
    steps: usize,
    start: (f64, f64),
) -> Result<(f64, f64)> {
    let mut best = start;
    if steps == 0 || b <= a {
        return Ok(best);
    }
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - r * (b - a);
    let mut x2 = a + r * (b - a);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    for _ in 0..steps {
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - r * (b - a);
            f1 = f(x1)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + r * (b - a);
            f2 = f(x2)?;
        }
        for (x, fx) in [(x1, f1), (x2, f2)] {
            if fx < best.1 {
                best = (x, fx);
            }
        }
    }
    Ok(best)
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("s,n,boundary,e0,e1,gap,sigma1_diameter\n");
    for r in rows {
        out.push_str(&format!(
            "{:.16e},{},{},{:.16e},{:.16e},{:.16e},{:.16e}\n",
            r.s, r.n, r.boundary, r.e0, r.e1, r.gap, r.sigma1_diameter
        ));
    }
    out
}

/// Θ = (e^{−iπS²})^{⊗l} on l sites.
pub fn time_reversal_unitary(spin: Spin, l: usize) -> CMat {
    let y = linalg::exp_i_hermitian(&spin_matrices(spin).s2, -std::f64::consts::PI);
    (0..l).fold(identity(1), |acc, _| kron(&acc, &y))
}

/// Ξ(A) = Θ conj(A) Θ* for a matrix on l sites.
pub fn time_reversal_onsite(a: &CMat, spin: Spin) -> Result<CMat> {
    let l = support_of(spin.dim(), a.nrows()).filter(|_| a.is_square()).ok_or_else(|| {
        SptError::DimensionMismatch(format!("matrix of size {}×{} is not on whole spin-{spin} sites", a.nrows(), a.ncols()))
    })?;
    let theta = time_reversal_unitary(spin, l);
    Ok(&theta * linalg::conj(a) * theta.adjoint())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{eigvalsh, max_abs, random_complex_matrix, I};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn trivial_two_sites_diagonal() {
        let h = build_hamiltonian(&Interaction::builtin(Builtin::Trivial), 2, &Boundary::Open).unwrap().to_dense();
        // μ1² + μ2² in lexicographic (μ1, μ2) order
        let labels = [-1.0f64, 0.0, 1.0];
        for (i, a) in labels.iter().enumerate() {
            for (j, b) in labels.iter().enumerate() {
                assert_eq!(h[(3 * i + j, 3 * i + j)], re(a * a + b * b));
            }
        }
        assert_eq!(max_abs(&(h.clone() - CMat::from_diagonal(&h.diagonal()))), 0.0);
    }

    #[test]
    fn aklt_bond_spectrum() {
        let phi = Interaction::builtin(Builtin::Aklt);
        let e = eigvalsh(phi.bulk());
        assert!(e[..4].iter().all(|x| (x + 2.0 / 3.0).abs() < 1e-12));
        assert!(e[4..].iter().all(|x| (x - 4.0 / 3.0).abs() < 1e-12));
        let h = build_hamiltonian(&phi, 2, &Boundary::Open).unwrap();
        assert!(max_abs(&(h.to_dense() - phi.bulk())) < 1e-15);
    }

    #[test]
    fn matches_kron_oracle() {
        let phi = Interaction::builtin(Builtin::Aklt);
        let n = 4;
        let mut dense = CMat::zeros(81, 81);
        for x in 0..n - 1 {
            let left = identity(3usize.pow(x as u32));
            let right = identity(3usize.pow((n - 2 - x) as u32));
            dense += kron(&kron(&left, phi.bulk()), &right);
        }
        let open = build_hamiltonian(&phi, n, &Boundary::Open).unwrap();
        assert!(max_abs(&(open.to_dense() - &dense)) < 1e-13);
        // periodic = open plus the wrap bond as an explicit extra term
        let periodic = build_hamiltonian(&phi, n, &Boundary::Periodic).unwrap();
        let wrap = build_hamiltonian(&phi, n, &Boundary::Custom(vec![BoundaryTerm { sites: vec![-1, 0], matrix: phi.bulk().clone() }])).unwrap();
        assert!(max_abs(&(periodic.to_dense() - wrap.to_dense())) < 1e-13);
        assert!(periodic.hermiticity_defect() < 1e-12);
    }

    #[test]
    fn size_cap() {
        let phi = Interaction::builtin(Builtin::Trivial);
        assert!(matches!(build_hamiltonian_capped(&phi, 5, &Boundary::Open, 100), Err(SptError::SizeCap { dim: 243, cap: 100 })));
    }

    #[test]
    fn spectra_examples() {
        let triv = Interaction::builtin(Builtin::Trivial);
        let h = build_hamiltonian(&triv, 4, &Boundary::Periodic).unwrap();
        assert_eq!(low_spectrum(&h, 3, 1e-10).unwrap(), vec![0.0, 1.0, 1.0]);
        let h1 = build_hamiltonian(&triv, 1, &Boundary::Open).unwrap();
        assert_eq!(low_spectrum(&h1, 3, 1e-10).unwrap(), vec![0.0, 1.0, 1.0]);
        let aklt = build_hamiltonian(&Interaction::builtin(Builtin::Aklt), 2, &Boundary::Open).unwrap();
        let e = low_spectrum(&aklt, 5, 1e-10).unwrap();
        assert!(e[..4].iter().all(|x| (x + 2.0 / 3.0).abs() < 1e-12) && (e[4] - 4.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn aklt_periodic_six_gap() {
        let h = build_hamiltonian(&Interaction::builtin(Builtin::Aklt), 6, &Boundary::Periodic).unwrap();
        let e = low_spectrum(&h, 2, 1e-10).unwrap();
        // ground energy −2n/3 and the first gap in Φ_AKLT units
        assert!((e[0] + 4.0).abs() < 1e-9);
        assert!((e[1] - e[0] - 0.6957).abs() < 1e-3, "{}", e[1] - e[0]);
    }

    #[test]
    fn split_examples() {
        let s = detect_split(&[0.0, 0.001, 0.002, 0.9, 1.0], 0.1).unwrap();
        assert_eq!(s.sigma1.len(), 3);
        assert!((s.gap - 0.898).abs() < 1e-12);
        assert!(matches!(detect_split(&[0.0, 0.1, 0.2, 0.3], 0.01), Err(SptError::NoSplit { .. })));
        let triv = build_hamiltonian(&Interaction::builtin(Builtin::Trivial), 8, &Boundary::Periodic).unwrap();
        let e = low_spectrum(&triv, 5, 1e-10).unwrap();
        let s = detect_split(&e, 0.1).unwrap();
        assert_eq!(s.sigma1, vec![0.0]);
        assert_eq!(s.gap, 1.0);
    }

    #[test]
    fn aklt_open_edge_cluster() {
        let h = build_hamiltonian(&Interaction::builtin(Builtin::Aklt), 8, &Boundary::Open).unwrap();
        let e = low_spectrum(&h, 6, 1e-10).unwrap();
        let s = detect_split(&e, 0.1).unwrap();
        assert_eq!(s.sigma1.len(), 4);
        assert!(s.sigma1_diameter < 0.05);
    }

    #[test]
    fn sweep_shape_and_endpoints() {
        let cfg = SweepConfig {
            s_grid: uniform_grid(5),
            refine_steps: 4,
            ..SweepConfig::new(Interaction::builtin(Builtin::Trivial), Interaction::builtin(Builtin::Aklt), vec![4, 6], Boundary::Periodic)
        };
        let (rows, summary) = gap_sweep(&cfg).unwrap();
        assert_eq!(rows.len(), 10);
        for r in rows.iter().filter(|r| r.s == 0.0) {
            assert!((r.gap - 1.0).abs() < 1e-9);
        }
        assert_eq!(summary.sizes.len(), 2);
        assert_eq!(sweep_csv(&rows).lines().count(), 11);
    }

    #[test]
    fn time_reversal_examples() {
        let ops = spin_matrices(Spin::ONE);
        for s in ops.components() {
            assert!(max_abs(&(time_reversal_onsite(s, Spin::ONE).unwrap() + s)) < 1e-12);
        }
        assert!(max_abs(&(time_reversal_onsite(&identity(3), Spin::ONE).unwrap() - identity(3))) < 1e-12);
        let bulk = Interaction::builtin(Builtin::Aklt).bulk().clone();
        assert!(max_abs(&(time_reversal_onsite(&bulk, Spin::ONE).unwrap() - &bulk)) < 1e-12);
        assert!(time_reversal_onsite(&identity(4), Spin::ONE).is_err());
    }

    #[test]
    fn time_reversal_is_antilinear_involution() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let xi = |a: &CMat| time_reversal_onsite(a, Spin::ONE).unwrap();
        for _ in 0..5 {
            let a = random_complex_matrix(&mut rng, 9, 9);
            let b = random_complex_matrix(&mut rng, 9, 9);
            assert!(max_abs(&(xi(&xi(&a)) - &a)) < 1e-12);
            assert!(max_abs(&(xi(&(&a * &b)) - xi(&a) * xi(&b))) < 1e-11);
            assert!(max_abs(&(xi(&(&a * I)) + xi(&a) * I)) < 1e-12);
        }
    }

    #[test]
    fn site_relabeling_preserves_open_spectrum() {
        // reversing the chain maps bond (x, x+1) to (n−2−x, n−1−x) with swapped
        // site order; the AKLT bond is symmetric so the spectrum is unchanged
        let phi = Interaction::builtin(Builtin::Aklt);
        let n = 5;
        let forward = build_hamiltonian(&phi, n, &Boundary::Open).unwrap();
        let terms: Vec<PlacedTerm> = (0..n - 1).map(|x| PlacedTerm { sites: vec![n - 1 - x, n - 2 - x], matrix: phi.bulk().clone() }).collect();
        let reversed = assemble(&terms, Spin::ONE, n, usize::MAX).unwrap();
        let a = eigvalsh(&forward.to_dense());
        let b = eigvalsh(&reversed.to_dense());
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-10);
        }
    }
}
