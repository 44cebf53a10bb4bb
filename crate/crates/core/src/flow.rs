//! Quasi-adiabatic continuation on finite chains.
//!
//! For a path s ↦ H(s) the generator
//!
//! ```text
//! D(s) = ∫ W(t) e^{iH(s)t} H'(s) e^{−iH(s)t} dt
//! ```
//!
//! drives dU/ds = i D U. When the filter transform equals i/ω on every
//! frequency at least γ, U(s) carries the spectral projection of H(0) onto
//! that of H(s) as long as the gap stays above γ.
//!
//! All operators here are block diagonal with respect to a fixed partition
//! of the basis (typically the magnetization sectors), so only the blocks
//! are stored and diagonalized.

use std::collections::HashMap;
use std::sync::Arc;

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::ed::{assemble, detect_split, placed_terms, Boundary, Interaction, PlacedTerm};
use crate::error::{Result, SptError};
use crate::linalg::{self, CMat, CVec, I, ZERO};
use crate::sparse::{pattern_components, CsrMatrix};
use crate::spin::{spin_matrices, Spin};

/// W(t) = ½ sgn(t) erfc(σ|t|/√2) with σ = γ/ratio. Its transform
/// ∫ W(t) e^{iωt} dt = (i/ω)(1 − e^{−ω²/2σ²}) differs from i/ω by
/// e^{−ratio²/2} at |ω| = γ.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterFunction {
    gamma: f64,
    sigma: f64,
    t_max: f64,
    step: f64,
    /// W on the grid 0, step, 2·step, …, t_max.
    values: Vec<f64>,
}

/// Target bound on the neglected tail ∫_{T}^∞ |W|.
pub const TAIL_BOUND: f64 = 1e-9;
pub const DEFAULT_RATIO: f64 = 4.0;
/// Default quadrature spacing of the tabulated filter.
pub const DEFAULT_STEP: f64 = 0.02;

impl FilterFunction {
    pub fn new(gamma: f64, t_max: Option<f64>, grid_size: Option<usize>) -> Result<Self> {
        FilterFunction::with_ratio(gamma, DEFAULT_RATIO, t_max, grid_size)
    }

    pub fn with_ratio(gamma: f64, ratio: f64, t_max: Option<f64>, grid_size: Option<usize>) -> Result<Self> {
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(SptError::BadParameters(format!("filter gap γ = {gamma} must be positive")));
        }
        if !(ratio.is_finite() && ratio >= 3.0) {
            return Err(SptError::BadParameters(format!("filter ratio {ratio} leaves the transform error at γ above 1e-2")));
        }
        let sigma = gamma / ratio;
        let tail = |t: f64| tail_integral(sigma, t);
        let t_max = match t_max {
            Some(t) if t.is_finite() && t > 0.0 => t,
            Some(t) => return Err(SptError::BadParameters(format!("cutoff T = {t} must be positive"))),
            None => {
                let mut hi = 1.0 / sigma;
                while tail(hi) > TAIL_BOUND {
                    hi *= 2.0;
                }
                let mut lo = 0.0;
                for _ in 0..60 {
                    let mid = 0.5 * (lo + hi);
                    if tail(mid) > TAIL_BOUND {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                hi
            }
        };
        let mut intervals = match grid_size {
            Some(g) if g >= 3 => g - 1,
            Some(g) => return Err(SptError::BadParameters(format!("grid of {g} points is too small"))),
            None => (t_max / DEFAULT_STEP).ceil() as usize,
        };
        // Simpson needs an even number of intervals
        intervals += intervals % 2;
        let step = t_max / intervals as f64;
        let values = (0..=intervals).map(|k| filter_value(sigma, k as f64 * step)).collect();
        Ok(FilterFunction { gamma, sigma, t_max, step, values })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn grid_len(&self) -> usize {
        self.values.len()
    }

    /// (t, W(t)) on the tabulated grid, t ≥ 0.
    pub fn grid(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.values.iter().enumerate().map(move |(k, &w)| (k as f64 * self.step, w))
    }

    pub fn value(&self, t: f64) -> f64 {
        filter_value(self.sigma, t)
    }

    /// I(t) = ∫_t^∞ |W(u)| du for t ≥ 0.
    pub fn tail(&self, t: f64) -> f64 {
        tail_integral(self.sigma, t)
    }

    /// Closed-form transform ∫ W(t) e^{iωt} dt.
    pub fn transform(&self, omega: f64) -> C64 {
        if omega == 0.0 {
            return ZERO;
        }
        let damp = (-omega * omega / (2.0 * self.sigma * self.sigma)).exp();
        I * ((1.0 - damp) / omega)
    }

    /// The same transform by composite Simpson quadrature of
    /// 2i ∫_0^T W(t) sin(ωt) dt over the tabulated grid.
    pub fn transform_quadrature(&self, omega: f64) -> Result<C64> {
        if self.step * omega.abs() > 0.5 {
            return Err(SptError::QuadratureFailure(format!(
                "grid step {:.3e} cannot resolve frequency {omega:.3e}",
                self.step
            )));
        }
        let last = self.values.len() - 1;
        let mut acc = 0.0;
        for (k, &w) in self.values.iter().enumerate() {
            let weight = if k == 0 || k == last {
                1.0
            } else if k % 2 == 1 {
                4.0
            } else {
                2.0
            };
            acc += weight * w * (omega * k as f64 * self.step).sin();
        }
        Ok(I * (2.0 * acc * self.step / 3.0))
    }

    /// |W| non-increasing on grid points t ≥ t0.
    pub fn monotone_from(&self, t0: f64) -> bool {
        // the grid value at t = 0 is the midpoint of the jump
        let start = ((t0 / self.step).ceil() as usize).max(1);
        self.values.iter().skip(start).collect::<Vec<_>>().windows(2).all(|w| w[1].abs() <= w[0].abs())
    }
}

fn filter_value(sigma: f64, t: f64) -> f64 {
    if t == 0.0 {
        return 0.0;
    }
    0.5 * t.signum() * libm::erfc(sigma * t.abs() / std::f64::consts::SQRT_2)
}

fn tail_integral(sigma: f64, t: f64) -> f64 {
    let x = sigma * t.max(0.0) / std::f64::consts::SQRT_2;
    let inner = (-x * x).exp() / std::f64::consts::PI.sqrt() - x * libm::erfc(x);
    (std::f64::consts::SQRT_2 / (2.0 * sigma)) * inner.max(0.0)
}

/// D = ∫ W(t) e^{iHt} dH e^{−iHt} dt for dense Hermitian H, dH, evaluated
/// in the eigenbasis of H with the closed-form transform.
pub fn quasi_adiabatic_generator(h: &CMat, dh: &CMat, filter: &FilterFunction) -> Result<CMat> {
    generator_with(h, dh, |w| Ok(filter.transform(w)))
}

/// The same generator with the transform computed by quadrature of the
/// tabulated filter.
pub fn quasi_adiabatic_generator_quadrature(h: &CMat, dh: &CMat, filter: &FilterFunction) -> Result<CMat> {
    generator_with(h, dh, |w| filter.transform_quadrature(w))
}

fn generator_with(h: &CMat, dh: &CMat, transform: impl Fn(f64) -> Result<C64>) -> Result<CMat> {
    if h.shape() != dh.shape() || !h.is_square() {
        return Err(SptError::DimensionMismatch(format!("H is {:?}, dH/ds is {:?}", h.shape(), dh.shape())));
    }
    let (e, q) = linalg::eigh(h);
    Ok(generator_in_eigenbasis(&e, &q, dh, transform)?)
}

fn generator_in_eigenbasis(e: &[f64], q: &CMat, dh: &CMat, transform: impl Fn(f64) -> Result<C64>) -> Result<CMat> {
    let n = e.len();
    if q.iter().chain(dh.iter()).all(|z| z.im == 0.0) {
        // real data and a purely imaginary transform: D = i·R with R real
        let qr = q.map(|z| z.re);
        let mut m = qr.transpose() * dh.map(|z| z.re) * &qr;
        let mut imaginary = true;
        'fill: for a in 0..n {
            for b in 0..n {
                let w = transform(e[a] - e[b])?;
                if w.re != 0.0 {
                    imaginary = false;
                    break 'fill;
                }
                m[(a, b)] *= w.im;
            }
        }
        if imaginary {
            let r = &qr * m * qr.transpose();
            return Ok(CMat::from_fn(n, n, |a, b| C64::new(0.0, 0.5 * (r[(a, b)] - r[(b, a)]))));
        }
    }
    let mut m = q.adjoint() * dh * q;
    for a in 0..n {
        for b in 0..n {
            m[(a, b)] *= transform(e[a] - e[b])?;
        }
    }
    Ok(linalg::hermitize(&(q * m * q.adjoint())))
}

/// A partition of the basis into blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    dim: usize,
    blocks: Vec<Vec<usize>>,
}

impl Partition {
    /// Connected components of the joint sparsity pattern.
    pub fn from_patterns(mats: &[&CsrMatrix]) -> Arc<Self> {
        let dim = mats.first().map_or(0, |m| m.dim());
        Arc::new(Partition { dim, blocks: pattern_components(mats) })
    }

    pub fn trivial(dim: usize) -> Arc<Self> {
        Arc::new(Partition { dim, blocks: vec![(0..dim).collect()] })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    /// The partition made of the chosen blocks only.
    pub fn subset(&self, ids: &[usize]) -> Arc<Self> {
        Arc::new(Partition { dim: self.dim, blocks: ids.iter().map(|&b| self.blocks[b].clone()).collect() })
    }

    pub fn largest_block(&self) -> usize {
        self.blocks.iter().map(Vec::len).max().unwrap_or(0)
    }
}

/// An operator stored as dense blocks on a [`Partition`].
#[derive(Debug, Clone)]
pub struct BlockOperator {
    part: Arc<Partition>,
    blocks: Vec<CMat>,
}

impl BlockOperator {
    pub fn identity(part: &Arc<Partition>) -> Self {
        BlockOperator { part: part.clone(), blocks: part.blocks.iter().map(|b| linalg::identity(b.len())).collect() }
    }

    pub fn zeros(part: &Arc<Partition>) -> Self {
        BlockOperator { part: part.clone(), blocks: part.blocks.iter().map(|b| CMat::zeros(b.len(), b.len())).collect() }
    }

    /// Restrict a sparse operator; fails if it couples different blocks.
    pub fn from_sparse(part: &Arc<Partition>, a: &CsrMatrix) -> Result<Self> {
        if a.dim() != part.dim {
            return Err(SptError::DimensionMismatch(format!("operator of dimension {} on a partition of {}", a.dim(), part.dim)));
        }
        let mut owner = vec![(0usize, 0usize); part.dim];
        for (bi, states) in part.blocks.iter().enumerate() {
            for (i, &s) in states.iter().enumerate() {
                owner[s] = (bi, i);
            }
        }
        let mut blocks: Vec<CMat> = part.blocks.iter().map(|b| CMat::zeros(b.len(), b.len())).collect();
        for r in 0..a.dim() {
            let (br, ir) = owner[r];
            for (c, v) in a.row(r) {
                let (bc, ic) = owner[c];
                if bc != br {
                    if v != ZERO {
                        return Err(SptError::Validation("operator is not block diagonal on the partition".into()));
                    }
                    continue;
                }
                blocks[br][(ir, ic)] += v;
            }
        }
        Ok(BlockOperator { part: part.clone(), blocks })
    }

    pub fn from_blocks(part: &Arc<Partition>, blocks: Vec<CMat>) -> Result<Self> {
        if blocks.len() != part.blocks.len() || blocks.iter().zip(&part.blocks).any(|(m, s)| m.nrows() != s.len() || m.ncols() != s.len()) {
            return Err(SptError::DimensionMismatch("block shapes do not match the partition".into()));
        }
        Ok(BlockOperator { part: part.clone(), blocks })
    }

    pub fn partition(&self) -> &Arc<Partition> {
        &self.part
    }

    /// Keep the blocks `ids`, as an operator on `sub` (from [`Partition::subset`]).
    pub fn select(&self, sub: &Arc<Partition>, ids: &[usize]) -> BlockOperator {
        BlockOperator { part: sub.clone(), blocks: ids.iter().map(|&b| self.blocks[b].clone()).collect() }
    }

    /// Inverse of [`BlockOperator::select`], zero on the other blocks.
    pub fn embed(&self, full: &Arc<Partition>, ids: &[usize]) -> BlockOperator {
        let mut out = BlockOperator::zeros(full);
        for (b, &id) in self.blocks.iter().zip(ids) {
            out.blocks[id] = b.clone();
        }
        out
    }

    pub fn blocks(&self) -> &[CMat] {
        &self.blocks
    }

    fn zip(&self, other: &BlockOperator, f: impl Fn(&CMat, &CMat) -> CMat) -> BlockOperator {
        assert!(Arc::ptr_eq(&self.part, &other.part) || *self.part == *other.part, "operators on different partitions");
        BlockOperator { part: self.part.clone(), blocks: self.blocks.iter().zip(&other.blocks).map(|(a, b)| f(a, b)).collect() }
    }

    fn map(&self, f: impl Fn(&CMat) -> CMat) -> BlockOperator {
        BlockOperator { part: self.part.clone(), blocks: self.blocks.iter().map(f).collect() }
    }

    pub fn mul(&self, other: &BlockOperator) -> BlockOperator {
        self.zip(other, |a, b| a * b)
    }

    pub fn add(&self, other: &BlockOperator) -> BlockOperator {
        self.zip(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &BlockOperator) -> BlockOperator {
        self.zip(other, |a, b| a - b)
    }

    /// self + c·other
    pub fn add_scaled(&self, other: &BlockOperator, c: C64) -> BlockOperator {
        self.zip(other, |a, b| a + b * c)
    }

    pub fn scale(&self, c: C64) -> BlockOperator {
        self.map(|a| a * c)
    }

    pub fn adjoint(&self) -> BlockOperator {
        self.map(|a| a.adjoint())
    }

    /// U A U*.
    pub fn conjugate_by(&self, u: &BlockOperator) -> BlockOperator {
        u.mul(self).mul(&u.adjoint())
    }

    pub fn trace(&self) -> C64 {
        self.blocks.iter().map(linalg::trace).sum()
    }

    pub fn frobenius(&self) -> f64 {
        self.blocks.iter().map(|b| b.iter().map(|z| z.norm_sqr()).sum::<f64>()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.blocks.iter().map(linalg::max_abs).fold(0.0, f64::max)
    }

    /// Operator norm (largest block spectral norm).
    pub fn norm(&self) -> f64 {
        self.blocks.iter().filter(|b| b.nrows() > 0).map(linalg::spectral_norm).fold(0.0, f64::max)
    }

    /// Operator norm of a Hermitian operator.
    pub fn hermitian_norm(&self) -> f64 {
        self.blocks.iter().map(linalg::hermitian_norm).fold(0.0, f64::max)
    }

    pub fn hermiticity_defect(&self) -> f64 {
        self.blocks.iter().map(linalg::hermiticity_defect).fold(0.0, f64::max)
    }

    pub fn unitarity_defect(&self) -> f64 {
        self.blocks.iter().map(linalg::unitarity_defect).fold(0.0, f64::max)
    }

    /// Nearest unitary, block by block.
    pub fn polar(&self) -> BlockOperator {
        self.map(linalg::polar_unitary)
    }

    pub fn apply(&self, x: &CVec) -> CVec {
        let mut y = CVec::zeros(self.part.dim);
        for (states, b) in self.part.blocks.iter().zip(&self.blocks) {
            let local = CVec::from_iterator(states.len(), states.iter().map(|&s| x[s]));
            let out = b * local;
            for (i, &s) in states.iter().enumerate() {
                y[s] = out[i];
            }
        }
        y
    }

    pub fn to_dense(&self) -> CMat {
        let mut a = CMat::zeros(self.part.dim, self.part.dim);
        for (states, b) in self.part.blocks.iter().zip(&self.blocks) {
            for (i, &r) in states.iter().enumerate() {
                for (j, &c) in states.iter().enumerate() {
                    a[(r, c)] = b[(i, j)];
                }
            }
        }
        a
    }

    /// Iterate over the stored entries as (row, column, value).
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        self.part.blocks.iter().zip(&self.blocks).flat_map(|(states, b)| {
            states.iter().enumerate().flat_map(move |(i, &r)| states.iter().enumerate().map(move |(j, &c)| (r, c, b[(i, j)])))
        })
    }
}

/// Block-wise eigendecomposition.
#[derive(Debug, Clone)]
pub struct BlockEigen {
    part: Arc<Partition>,
    values: Vec<Vec<f64>>,
    vectors: Vec<CMat>,
}

impl BlockEigen {
    pub fn new(h: &BlockOperator) -> Self {
        let (values, vectors) = h.blocks.iter().map(linalg::eigh).unzip();
        BlockEigen { part: h.part.clone(), values, vectors }
    }

    /// All eigenvalues with their (block, index) labels, ascending.
    pub fn sorted(&self) -> Vec<(f64, usize, usize)> {
        let mut all: Vec<(f64, usize, usize)> =
            self.values.iter().enumerate().flat_map(|(b, vs)| vs.iter().enumerate().map(move |(i, &v)| (v, b, i))).collect();
        all.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
        all
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        self.sorted().into_iter().map(|x| x.0).collect()
    }

    /// E_rank − E_{rank−1}.
    pub fn gap_above(&self, rank: usize) -> f64 {
        let e = self.eigenvalues();
        if rank == 0 || rank >= e.len() {
            return f64::INFINITY;
        }
        e[rank] - e[rank - 1]
    }

    /// Projection onto the `rank` lowest eigenvectors.
    pub fn low_projector(&self, rank: usize) -> BlockOperator {
        let mut chosen: Vec<Vec<usize>> = vec![Vec::new(); self.values.len()];
        for (_, b, i) in self.sorted().into_iter().take(rank) {
            chosen[b].push(i);
        }
        let blocks = self
            .vectors
            .iter()
            .zip(&chosen)
            .map(|(q, cols)| {
                let mut p = CMat::zeros(q.nrows(), q.nrows());
                for &c in cols {
                    let v = q.column(c);
                    p += &v * v.adjoint();
                }
                p
            })
            .collect();
        BlockOperator { part: self.part.clone(), blocks }
    }

    /// Generator for dH/ds with the filter's closed-form transform.
    pub fn generator(&self, dh: &BlockOperator, filter: &FilterFunction) -> Result<BlockOperator> {
        let blocks = self
            .values
            .iter()
            .zip(&self.vectors)
            .zip(&dh.blocks)
            .map(|((e, q), d)| generator_in_eigenbasis(e, q, d, |w| Ok(filter.transform(w))))
            .collect::<Result<_>>()?;
        Ok(BlockOperator { part: self.part.clone(), blocks })
    }
}

/// H(s) = (1 − s)·H0 + s·H1.
#[derive(Debug, Clone)]
pub struct LinearPath {
    h0: BlockOperator,
    h1: BlockOperator,
    dh: BlockOperator,
}

impl LinearPath {
    pub fn new(h0: BlockOperator, h1: BlockOperator) -> Self {
        let dh = h1.sub(&h0);
        LinearPath { h0, h1, dh }
    }

    pub fn constant(h: BlockOperator) -> Self {
        LinearPath::new(h.clone(), h)
    }

    pub fn partition(&self) -> &Arc<Partition> {
        self.h0.partition()
    }

    pub fn at(&self, s: f64) -> BlockOperator {
        self.h0.scale(C64::new(1.0 - s, 0.0)).add_scaled(&self.h1, C64::new(s, 0.0))
    }

    pub fn derivative(&self) -> &BlockOperator {
        &self.dh
    }

    pub fn select(&self, ids: &[usize]) -> LinearPath {
        let sub = self.partition().subset(ids);
        LinearPath { h0: self.h0.select(&sub, ids), h1: self.h1.select(&sub, ids), dh: self.dh.select(&sub, ids) }
    }
}

/// Settings for the RK4 integrator with step doubling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OdeOptions {
    /// Accepted local error per unit of s.
    pub tol: f64,
    pub initial_step: f64,
    pub min_step: f64,
    /// Polar re-projection onto the unitary group every this many steps.
    pub reproject_every: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions { tol: 1e-8, initial_step: 1e-2, min_step: 1e-9, reproject_every: 10 }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct OdeStats {
    pub accepted: usize,
    pub rejected: usize,
    pub reprojections: usize,
    pub generator_evaluations: usize,
}

type State = Vec<BlockOperator>;

fn combine(y: &State, k: &State, h: f64) -> State {
    y.iter().zip(k).map(|(a, b)| a.add_scaled(b, C64::new(h, 0.0))).collect()
}

fn rk4_step(y: &State, s: f64, h: f64, rhs: &mut dyn FnMut(f64, &State) -> Result<State>) -> Result<State> {
    let k1 = rhs(s, y)?;
    let k2 = rhs(s + 0.5 * h, &combine(y, &k1, 0.5 * h))?;
    let k3 = rhs(s + 0.5 * h, &combine(y, &k2, 0.5 * h))?;
    let k4 = rhs(s + h, &combine(y, &k3, h))?;
    Ok(y.iter()
        .enumerate()
        .map(|(i, yi)| {
            yi.add_scaled(&k1[i], C64::new(h / 6.0, 0.0))
                .add_scaled(&k2[i], C64::new(h / 3.0, 0.0))
                .add_scaled(&k3[i], C64::new(h / 3.0, 0.0))
                .add_scaled(&k4[i], C64::new(h / 6.0, 0.0))
        })
        .collect())
}

/// Integrate a system of unitaries from s0 to s1.
fn integrate(
    mut y: State,
    s0: f64,
    s1: f64,
    h_hint: &mut f64,
    opts: &OdeOptions,
    stats: &mut OdeStats,
    rhs: &mut dyn FnMut(f64, &State) -> Result<State>,
) -> Result<State> {
    let mut s = s0;
    while s < s1 - 1e-15 {
        let h = h_hint.min(s1 - s);
        let full = rk4_step(&y, s, h, rhs)?;
        let half = rk4_step(&y, s, 0.5 * h, rhs)?;
        let twice = rk4_step(&half, s + 0.5 * h, 0.5 * h, rhs)?;
        let err = full.iter().zip(&twice).map(|(a, b)| a.sub(b).max_abs()).fold(0.0, f64::max) / 15.0;
        if !err.is_finite() {
            return Err(SptError::OdeStepFailure { s, reason: "non-finite error estimate".into() });
        }
        let allowed = opts.tol * h;
        if err <= allowed {
            // Richardson extrapolation of the two estimates
            y = twice.iter().zip(&full).map(|(t, f)| t.add_scaled(&t.sub(f), C64::new(1.0 / 15.0, 0.0))).collect();
            s += h;
            stats.accepted += 1;
            if opts.reproject_every > 0 && stats.accepted % opts.reproject_every == 0 {
                y = y.iter().map(BlockOperator::polar).collect();
                stats.reprojections += 1;
            }
            let grow = if err > 0.0 { 0.9 * (allowed / err).powf(0.25) } else { 2.0 };
            if h >= *h_hint * 0.999 {
                *h_hint = h * grow.clamp(0.2, 2.0);
            }
        } else {
            stats.rejected += 1;
            *h_hint = h * (0.9 * (allowed / err).powf(0.25)).clamp(0.1, 0.9);
            if *h_hint < opts.min_step {
                return Err(SptError::OdeStepFailure { s, reason: format!("step size fell below {:.1e}", opts.min_step) });
            }
        }
    }
    Ok(y)
}

/// Memoized generator evaluations along one path.
struct GeneratorCache<'a> {
    path: &'a LinearPath,
    filter: &'a FilterFunction,
    entries: HashMap<u64, (BlockOperator, f64)>,
    rank: Option<usize>,
    /// Blocks that only contribute eigenvalues to the gap.
    spectators: Option<&'a LinearPath>,
    evaluations: usize,
}

impl<'a> GeneratorCache<'a> {
    fn new(path: &'a LinearPath, filter: &'a FilterFunction, rank: Option<usize>) -> Self {
        GeneratorCache { path, filter, entries: HashMap::new(), rank, spectators: None, evaluations: 0 }
    }

    /// D(s) and the gap above the tracked rank (∞ when not tracking).
    fn get(&mut self, s: f64) -> Result<(BlockOperator, f64)> {
        if let Some(hit) = self.entries.get(&s.to_bits()) {
            return Ok(hit.clone());
        }
        let eig = BlockEigen::new(&self.path.at(s));
        let gap = match self.rank {
            None => f64::INFINITY,
            Some(r) => {
                let mut e = eig.eigenvalues();
                if let Some(others) = self.spectators {
                    e.extend(others.at(s).blocks().iter().flat_map(linalg::eigvalsh));
                    e.sort_by(f64::total_cmp);
                }
                if r < e.len() { e[r] - e[r - 1] } else { f64::INFINITY }
            }
        };
        let d = eig.generator(self.path.derivative(), self.filter)?;
        self.evaluations += 1;
        if self.entries.len() > 64 {
            self.entries.clear();
        }
        self.entries.insert(s.to_bits(), (d.clone(), gap));
        Ok((d, gap))
    }
}

/// One checkpoint of a projection flow.
#[derive(Debug, Clone)]
pub struct FlowState {
    pub s: f64,
    pub u: BlockOperator,
    pub p: BlockOperator,
    /// ‖P_exact(s) − U P0 U*‖ in operator norm.
    pub fidelity_defect: f64,
    pub unitarity_defect: f64,
    /// tr(U P0 U*) − tr(P0).
    pub rank_drift: f64,
    pub gap: f64,
}

#[derive(Debug, Clone)]
pub struct FlowTrajectory {
    pub rank: usize,
    pub states: Vec<FlowState>,
    pub stats: OdeStats,
}

impl FlowTrajectory {
    pub fn max_fidelity_defect(&self) -> f64 {
        self.states.iter().map(|s| s.fidelity_defect).fold(0.0, f64::max)
    }
}

/// Rank of the bottom cluster of H: the first split found in a growing
/// window of at least three low eigenvalues, up to `look` of them.
pub fn low_cluster_rank(h: &BlockOperator, look: usize) -> Result<usize> {
    let e = BlockEigen::new(h).eigenvalues();
    let look = look.min(e.len());
    let mut last = SptError::NoSplit { ratio: 0.0 };
    for w in 3.min(look)..=look {
        match detect_split(&e[..w], 0.0) {
            Ok(split) => return Ok(split.sigma1.len()),
            Err(err) => last = err,
        }
    }
    Err(last)
}

/// Integrate dU/ds = iD(s)U from s = checkpoints[0] = 0 and compare
/// U P0 U* with the exact low projection at every checkpoint.
pub fn flow_projection(
    path: &LinearPath,
    checkpoints: &[f64],
    rank: usize,
    filter: &FilterFunction,
    opts: &OdeOptions,
) -> Result<FlowTrajectory> {
    if checkpoints.is_empty() || checkpoints[0] != 0.0 || checkpoints.windows(2).any(|w| w[1] <= w[0]) {
        return Err(SptError::BadParameters("checkpoints must start at 0 and increase".into()));
    }
    let dim = path.partition().dim();
    if rank == 0 || rank >= dim {
        return Err(SptError::BadParameters(format!("tracked rank {rank} must lie in 1..{dim}")));
    }
    let gamma = filter.gamma();
    let p0_full = BlockEigen::new(&path.at(0.0)).low_projector(rank);
    // blocks where P0 vanishes stay zero under any block-diagonal U, so only
    // the others are integrated; the rest enter through the gap check
    let (active, idle): (Vec<usize>, Vec<usize>) =
        (0..path.partition().blocks().len()).partition(|&b| linalg::max_abs(&p0_full.blocks()[b]) > 0.0);
    let sub = path.select(&active);
    let rest = path.select(&idle);
    let p0 = p0_full.select(sub.partition(), &active);
    let mut cache = GeneratorCache::new(&sub, filter, Some(rank));
    cache.spectators = Some(&rest);
    let mut stats = OdeStats::default();
    let mut u = BlockOperator::identity(sub.partition());
    let mut h_hint = opts.initial_step;
    let mut states = Vec::with_capacity(checkpoints.len());
    let mut prev = 0.0;
    for &target in checkpoints {
        if target > prev {
            let mut rhs = |s: f64, y: &State| -> Result<State> {
                let (d, gap) = cache.get(s)?;
                if gap < gamma {
                    return Err(SptError::GapClosed { s, gap, gamma });
                }
                Ok(vec![d.mul(&y[0]).scale(I)])
            };
            u = integrate(vec![u], prev, target, &mut h_hint, opts, &mut stats, &mut rhs)?.remove(0);
        }
        let eig = BlockEigen::new(&path.at(target));
        let gap = eig.gap_above(rank);
        if gap < gamma {
            return Err(SptError::GapClosed { s: target, gap, gamma });
        }
        let exact = eig.low_projector(rank);
        let p = p0.conjugate_by(&u).embed(path.partition(), &active);
        states.push(FlowState {
            s: target,
            fidelity_defect: exact.sub(&p).hermitian_norm(),
            unitarity_defect: u.unitarity_defect(),
            rank_drift: p.trace().re - rank as f64,
            gap,
            u: u.clone(),
            p,
        });
        prev = target;
    }
    stats.generator_evaluations = cache.evaluations;
    Ok(FlowTrajectory { rank, states, stats })
}

/// Geometry of a chain cut between sites `cut − 1` and `cut`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cut {
    pub n: usize,
    pub cut: usize,
}

impl Cut {
    pub fn center(n: usize) -> Result<Self> {
        Cut::new(n, n / 2)
    }

    pub fn new(n: usize, cut: usize) -> Result<Self> {
        if cut == 0 || cut >= n {
            return Err(SptError::BadCut { cut, n });
        }
        Ok(Cut { n, cut })
    }

    /// Distance of a site from the cut; the two adjacent sites have 0.
    pub fn distance(&self, site: usize) -> usize {
        if site >= self.cut {
            site - self.cut
        } else {
            self.cut - 1 - site
        }
    }

    pub fn crosses(&self, sites: &[usize]) -> bool {
        sites.iter().any(|&s| s < self.cut) && sites.iter().any(|&s| s >= self.cut)
    }

    pub fn max_distance(&self) -> usize {
        self.cut.max(self.n - self.cut) - 1
    }
}

/// Open-chain paths with and without the terms that cross a cut.
#[derive(Debug, Clone)]
pub struct SplitPaths {
    pub spin: Spin,
    pub cut: Cut,
    pub coupled: LinearPath,
    pub decoupled: LinearPath,
    /// Terms of each endpoint acting inside the left and right halves.
    left_terms: [Vec<PlacedTerm>; 2],
    right_terms: [Vec<PlacedTerm>; 2],
}

impl SplitPaths {
    /// (1−s)Φ0 + sΦ1 on an open chain of `cut.n` sites.
    pub fn new(phi0: &Interaction, phi1: &Interaction, cut: Cut, cap: usize) -> Result<Self> {
        if phi0.spin() != phi1.spin() {
            return Err(SptError::Validation("interactions act on different spins".into()));
        }
        let spin = phi0.spin();
        let n = cut.n;
        let t0 = placed_terms(phi0, n, &Boundary::Open)?;
        let t1 = placed_terms(phi1, n, &Boundary::Open)?;
        let keep = |ts: &[PlacedTerm]| ts.iter().filter(|t| !cut.crosses(&t.sites)).cloned().collect::<Vec<_>>();
        let h0 = assemble(&t0, spin, n, cap)?;
        let h1 = assemble(&t1, spin, n, cap)?;
        let g0 = assemble(&keep(&t0), spin, n, cap)?;
        let g1 = assemble(&keep(&t1), spin, n, cap)?;
        let part = Partition::from_patterns(&[&h0, &h1, &g0, &g1]);
        let coupled = LinearPath::new(BlockOperator::from_sparse(&part, &h0)?, BlockOperator::from_sparse(&part, &h1)?);
        let decoupled = LinearPath::new(BlockOperator::from_sparse(&part, &g0)?, BlockOperator::from_sparse(&part, &g1)?);
        let side = |ts: &[PlacedTerm], left: bool| -> Vec<PlacedTerm> {
            ts.iter()
                .filter(|t| t.sites.iter().all(|&s| (s < cut.cut) == left))
                .map(|t| PlacedTerm {
                    sites: t.sites.iter().map(|&s| if left { s } else { s - cut.cut }).collect(),
                    matrix: t.matrix.clone(),
                })
                .collect()
        };
        Ok(SplitPaths {
            spin,
            cut,
            coupled,
            decoupled,
            left_terms: [side(&t0, true), side(&t1, true)],
            right_terms: [side(&t0, false), side(&t1, false)],
        })
    }

    pub fn partition(&self) -> &Arc<Partition> {
        self.coupled.partition()
    }

    fn half_generator(&self, terms: &[Vec<PlacedTerm>; 2], sites: usize, s: f64, filter: &FilterFunction) -> Result<CMat> {
        let h0 = assemble(&terms[0], self.spin, sites, usize::MAX)?.to_dense();
        let h1 = assemble(&terms[1], self.spin, sites, usize::MAX)?.to_dense();
        let h = &h0 * C64::new(1.0 - s, 0.0) + &h1 * C64::new(s, 0.0);
        quasi_adiabatic_generator(&h, &(h1 - h0), filter)
    }
}

#[derive(Debug, Clone)]
pub struct BoundaryGenerator {
    pub s: f64,
    pub d_full: BlockOperator,
    /// D_L + D_R, the generator of the decoupled chain.
    pub d_decoupled: BlockOperator,
    /// Generators of the isolated halves, on their own spaces.
    pub d_left: CMat,
    pub d_right: CMat,
    /// V = D_L + D_R − D_o.
    pub v: BlockOperator,
    pub v_norm: f64,
    /// Fraction of ‖V‖ not supported within distance r of the cut, for
    /// r = 0, 1, ….
    pub profile: Vec<f64>,
}

/// D_o, D_L, D_R and V = D_L + D_R − D_o at parameter s.
pub fn boundary_generator(paths: &SplitPaths, s: f64, filter: &FilterFunction) -> Result<BoundaryGenerator> {
    let d_full = BlockEigen::new(&paths.coupled.at(s)).generator(paths.coupled.derivative(), filter)?;
    let d_decoupled = BlockEigen::new(&paths.decoupled.at(s)).generator(paths.decoupled.derivative(), filter)?;
    let cut = paths.cut;
    let d_left = paths.half_generator(&paths.left_terms, cut.cut, s, filter)?;
    let d_right = paths.half_generator(&paths.right_terms, cut.n - cut.cut, s, filter)?;
    let v = d_decoupled.sub(&d_full);
    let profile = locality_profile(&v, paths.spin.dim(), cut);
    Ok(BoundaryGenerator { s, v_norm: v.hermitian_norm(), d_full, d_decoupled, d_left, d_right, v, profile })
}

/// weight(r) = ‖V − E_r(V)‖ / ‖V‖ (operator norms) where
/// E_r(V) = tr_out(V)/d_out ⊗ 1 keeps the part of V supported on sites at
/// distance < r from the cut. V must be Hermitian.
pub fn locality_profile(v: &BlockOperator, d: usize, cut: Cut) -> Vec<f64> {
    let total = v.hermitian_norm();
    let n = cut.n;
    let dim = v.partition().dim();
    let mut rows: Vec<Vec<(usize, C64)>> = vec![Vec::new(); dim];
    for (r, c, z) in v.entries() {
        if z != ZERO {
            rows[r].push((c, z));
        }
    }
    (0..=cut.max_distance() + 1)
        .map(|r| {
            if total == 0.0 {
                return 0.0;
            }
            let inside: Vec<bool> = (0..n).map(|j| cut.distance(j) < r).collect();
            let n_in = inside.iter().filter(|&&x| x).count();
            let (d_in, d_out) = (d.pow(n_in as u32), d.pow((n - n_in) as u32));
            let mut labels = Vec::with_capacity(dim);
            let mut compose = vec![0usize; dim];
            for x in 0..dim {
                let (mut inner, mut outer) = (0usize, 0usize);
                for (j, &is_in) in inside.iter().enumerate() {
                    let digit = (x / d.pow((n - 1 - j) as u32)) % d;
                    if is_in {
                        inner = inner * d + digit;
                    } else {
                        outer = outer * d + digit;
                    }
                }
                labels.push((inner, outer));
                compose[outer * d_in + inner] = x;
            }
            let mut reduced = CMat::zeros(d_in, d_in);
            for (x, row) in rows.iter().enumerate() {
                for &(y, z) in row {
                    if labels[x].1 == labels[y].1 {
                        reduced[(labels[x].0, labels[y].0)] += z;
                    }
                }
            }
            reduced /= C64::new(d_out as f64, 0.0);
            let rest = CsrMatrix::from_rows(dim, |x, buf| {
                buf.extend(rows[x].iter().copied());
                let (inner, outer) = labels[x];
                for b in 0..d_in {
                    let e = reduced[(inner, b)];
                    if e != ZERO {
                        buf.push((compose[outer * d_in + b], -e));
                    }
                }
            });
            pattern_components(&[&rest])
                .iter()
                .map(|states| {
                    linalg::hermitian_norm(&rest.restrict(states).to_dense())
                })
                .fold(0.0, f64::max)
                / total
        })
        .collect()
}

/// Local probes for the factorization defect: every S^a_j and every nearest
/// neighbour S_j·S_{j+1}.
pub fn standard_probes(spin: Spin, n: usize) -> Result<Vec<CsrMatrix>> {
    let ops = spin_matrices(spin);
    let mut probes = Vec::new();
    for j in 0..n {
        for s in ops.components() {
            probes.push(assemble(&[PlacedTerm { sites: vec![j], matrix: s.clone() }], spin, n, usize::MAX)?);
        }
    }
    let bond = ops.components().iter().fold(CMat::zeros(spin.dim().pow(2), spin.dim().pow(2)), |acc, s| acc + linalg::kron(s, s));
    for j in 0..n.saturating_sub(1) {
        probes.push(assemble(&[PlacedTerm { sites: vec![j, j + 1], matrix: bond.clone() }], spin, n, usize::MAX)?);
    }
    Ok(probes)
}

/// ‖A M − M A‖ by power iteration on C*C, C = [A, M].
pub fn commutator_norm(a: &CsrMatrix, m: &BlockOperator, iterations: usize, seed: u64) -> f64 {
    let dim = a.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = CVec::from_fn(dim, |_, _| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)));
    x /= C64::new(x.norm(), 0.0);
    let m_adj = m.adjoint();
    let apply_c = |x: &CVec| a.apply(&m.apply(x)) - m.apply(&a.apply(x));
    // probes are Hermitian, so C* = [M*, A]
    let apply_c_adj = |y: &CVec| m_adj.apply(&a.apply(y)) - a.apply(&m_adj.apply(y));
    let mut estimate = 0.0;
    for _ in 0..iterations {
        let y = apply_c(&x);
        let z = apply_c_adj(&y);
        let nz = z.norm();
        estimate = y.norm();
        if nz == 0.0 {
            return 0.0;
        }
        x = z / C64::new(nz, 0.0);
    }
    estimate
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorizationPoint {
    pub s: f64,
    /// max over probes of ‖X A X* − W A W*‖ with X = U_o* (U_L ⊗ U_R).
    pub defect: f64,
    pub w_unitarity_defect: f64,
    pub v_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorizationReport {
    pub points: Vec<FactorizationPoint>,
    pub stats: OdeStats,
}

impl FactorizationReport {
    pub fn max_defect(&self) -> f64 {
        self.points.iter().map(|p| p.defect).fold(0.0, f64::max)
    }
}

/// Integrate the coupled flow U_o, the decoupled flow U_L ⊗ U_R and the
/// cocycle dW/ds = i (U_o* V U_o) W together, then compare
/// X = U_o* (U_L ⊗ U_R) with W on local probes at each checkpoint.
pub fn factorization_check(
    paths: &SplitPaths,
    checkpoints: &[f64],
    filter: &FilterFunction,
    opts: &OdeOptions,
    probes: &[CsrMatrix],
) -> Result<FactorizationReport> {
    if checkpoints.is_empty() || checkpoints[0] < 0.0 || checkpoints.windows(2).any(|w| w[1] <= w[0]) {
        return Err(SptError::BadParameters("checkpoints must be nonnegative and increasing".into()));
    }
    let part = paths.partition().clone();
    let mut coupled = GeneratorCache::new(&paths.coupled, filter, None);
    let mut decoupled = GeneratorCache::new(&paths.decoupled, filter, None);
    let mut state: State = vec![BlockOperator::identity(&part), BlockOperator::identity(&part), BlockOperator::identity(&part)];
    let mut stats = OdeStats::default();
    let mut h_hint = opts.initial_step;
    let mut points = Vec::new();
    let mut prev = 0.0;
    for &target in checkpoints {
        if target > prev {
            let mut rhs = |s: f64, y: &State| -> Result<State> {
                let (d_o, _) = coupled.get(s)?;
                let (d_t, _) = decoupled.get(s)?;
                let v = d_t.sub(&d_o);
                let rotated = y[0].adjoint().mul(&v).mul(&y[0]);
                Ok(vec![d_o.mul(&y[0]).scale(I), d_t.mul(&y[1]).scale(I), rotated.mul(&y[2]).scale(I)])
            };
            state = integrate(state, prev, target, &mut h_hint, opts, &mut stats, &mut rhs)?;
        }
        let x = state[0].adjoint().mul(&state[1]);
        let m = state[2].adjoint().mul(&x);
        let defect = probes.iter().enumerate().map(|(i, a)| commutator_norm(a, &m, 60, i as u64)).fold(0.0, f64::max);
        let (d_o, _) = coupled.get(target)?;
        let (d_t, _) = decoupled.get(target)?;
        points.push(FactorizationPoint {
            s: target,
            defect,
            w_unitarity_defect: state[2].unitarity_defect(),
            v_norm: d_t.sub(&d_o).hermitian_norm(),
        });
        prev = target;
    }
    stats.generator_evaluations = coupled.evaluations + decoupled.evaluations;
    Ok(FactorizationReport { points, stats })
}
