//! Lowest eigenpairs of sparse Hermitian matrices.
//!
//! Block Krylov subspaces with full reorthogonalization, Rayleigh–Ritz
//! extraction and thick restarts from the lowest Ritz vectors. Convergence
//! is declared only from explicitly computed residuals ‖Ay − θy‖, never from
//! the projected matrix alone.

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Result, SptError};
use crate::linalg::{self, CMat, CVec, ONE, ZERO};
use crate::sparse::CsrMatrix;

/// Components at or below this dimension are diagonalized densely.
pub const DENSE_LIMIT: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LanczosSettings {
    /// Residual tolerance, relative to max(1, |θ|).
    pub tol: f64,
    pub max_restarts: usize,
    /// Largest subspace kept before restarting.
    pub max_basis: usize,
    /// Block width; defaults to q + 2 so that degenerate levels are found.
    pub block: Option<usize>,
    pub seed: u64,
}

impl Default for LanczosSettings {
    fn default() -> Self {
        LanczosSettings { tol: 1e-9, max_restarts: 500, max_basis: 40, block: None, seed: 0x5eed }
    }
}

#[derive(Debug, Clone)]
pub struct Eigenpairs {
    pub values: Vec<f64>,
    pub vectors: Vec<CVec>,
    pub residuals: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Solver {
    Auto,
    Dense,
    Iterative,
}

pub fn dense_lowest(a: &CsrMatrix, q: usize) -> Eigenpairs {
    let (values, vectors) = linalg::eigh(&a.to_dense());
    let q = q.min(values.len());
    Eigenpairs {
        values: values[..q].to_vec(),
        vectors: (0..q).map(|j| vectors.column(j).into_owned()).collect(),
        residuals: vec![0.0; q],
    }
}

pub fn lowest_eigenpairs(a: &CsrMatrix, q: usize, settings: &LanczosSettings, solver: Solver) -> Result<Eigenpairs> {
    let n = a.dim();
    let dense = match solver {
        Solver::Dense => true,
        Solver::Iterative => n <= q + 2,
        Solver::Auto => n <= DENSE_LIMIT.max(settings.max_basis),
    };
    if dense {
        return Ok(dense_lowest(a, q));
    }
    block_lanczos(a, q, settings)
}

fn dot(x: &CVec, y: &CVec) -> C64 {
    x.dotc(y)
}

struct Subspace<'a> {
    a: &'a CsrMatrix,
    basis: Vec<CVec>,
    images: Vec<CVec>,
    /// Projected matrix ⟨v_i, A v_j⟩, grown as vectors are appended.
    projected: CMat,
    rng: ChaCha8Rng,
}

impl Subspace<'_> {
    fn random_vector(&mut self) -> CVec {
        let n = self.a.dim();
        CVec::from_fn(n, |_, _| {
            let x: f64 = self.rng.sample(StandardNormal);
            let y: f64 = self.rng.sample(StandardNormal);
            C64::new(x, y)
        })
    }

    /// Orthogonalize against the basis (two classical Gram–Schmidt passes)
    /// and append. Directions already in the span are replaced by random ones.
    fn push(&mut self, mut w: CVec) -> bool {
        let n = self.a.dim();
        if self.basis.len() >= n {
            return false;
        }
        for attempt in 0..4 {
            let before = w.norm();
            for _ in 0..2 {
                let coeffs: Vec<C64> = self.basis.iter().map(|v| dot(v, &w)).collect();
                for (v, c) in self.basis.iter().zip(coeffs) {
                    w.axpy(-c, v, ONE);
                }
            }
            let after = w.norm();
            if after > 1e-8 * before.max(1e-300) && after > 0.0 {
                w /= C64::new(after, 0.0);
                let mut img = CVec::zeros(n);
                self.a.apply_into(w.as_slice(), img.as_mut_slice());
                let m = self.basis.len();
                let mut t = CMat::zeros(m + 1, m + 1);
                t.view_mut((0, 0), (m, m)).copy_from(&self.projected);
                for (i, v) in self.basis.iter().enumerate() {
                    let z = dot(v, &img);
                    t[(i, m)] = z;
                    t[(m, i)] = z.conj();
                }
                t[(m, m)] = C64::new(dot(&w, &img).re, 0.0);
                self.projected = t;
                self.basis.push(w);
                self.images.push(img);
                return true;
            }
            if attempt < 3 {
                w = self.random_vector();
            }
        }
        false
    }

    fn combine(vs: &[CVec], coeffs: nalgebra::DVectorView<'_, C64>) -> CVec {
        let mut out = CVec::zeros(vs[0].len());
        for (v, &c) in vs.iter().zip(coeffs.iter()) {
            if c != ZERO {
                out.axpy(c, v, ONE);
            }
        }
        out
    }
}

fn block_lanczos(a: &CsrMatrix, q: usize, settings: &LanczosSettings) -> Result<Eigenpairs> {
    let n = a.dim();
    let q = q.min(n);
    let b = settings.block.unwrap_or(q + 2).max(q).min(n);
    let keep = (2 * b).max(q + b).min(settings.max_basis.saturating_sub(b)).max(b);
    if settings.max_basis < keep + b {
        return Err(SptError::BadParameters(format!(
            "Krylov basis limit {} too small for block {b}",
            settings.max_basis
        )));
    }
    let mut space = Subspace {
        a,
        basis: Vec::with_capacity(settings.max_basis),
        images: Vec::with_capacity(settings.max_basis),
        projected: CMat::zeros(0, 0),
        rng: ChaCha8Rng::seed_from_u64(settings.seed),
    };
    for _ in 0..b {
        let v = space.random_vector();
        space.push(v);
    }
    // directions whose orthogonal complements extend the subspace next
    let mut pending: Vec<CVec> = space.images.clone();
    let mut worst = f64::INFINITY;
    for _ in 0..settings.max_restarts {
        while space.basis.len() + pending.len() <= settings.max_basis && space.basis.len() < n {
            let start = space.basis.len();
            for w in std::mem::take(&mut pending) {
                space.push(w);
            }
            if space.basis.len() == start {
                break;
            }
            pending = space.images[start..].to_vec();
        }
        let (theta, s) = linalg::eigh(&space.projected);
        let m = theta.len();
        let kept = keep.min(m);
        let ritz: Vec<CVec> = (0..kept).map(|j| Subspace::combine(&space.basis, s.column(j))).collect();
        // fresh products: recombining stored images lets rounding drift
        // accumulate over restarts and stalls the residuals
        let ritz_images: Vec<CVec> = ritz.iter().map(|y| a.apply(y)).collect();
        let residual_vectors: Vec<CVec> =
            (0..kept).map(|j| &ritz_images[j] - &ritz[j] * C64::new(theta[j], 0.0)).collect();
        let residuals: Vec<f64> = residual_vectors[..q].iter().map(|r| r.norm()).collect();
        worst = residuals.iter().zip(&theta).map(|(r, t)| r / t.abs().max(1.0)).fold(0.0, f64::max);
        if worst <= settings.tol || m == n {
            return Ok(Eigenpairs { values: theta[..q].to_vec(), vectors: ritz[..q].to_vec(), residuals });
        }
        space.projected = CMat::from_diagonal(&CVec::from_iterator(kept, theta[..kept].iter().map(|&t| C64::new(t, 0.0))));
        space.basis = ritz;
        space.images = ritz_images;
        // residuals are orthogonal to the old subspace; feeding them in
        // directly avoids the cancellation in orthogonalizing A·y
        pending = residual_vectors.into_iter().take(b).collect();
    }
    Err(SptError::NoConvergence { iterations: settings.max_restarts, residual: worst })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{hermitize, random_complex_matrix};

    fn random_sparse_hermitian(n: usize, seed: u64) -> CsrMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut a = CMat::zeros(n, n);
        for i in 0..n {
            a[(i, i)] = C64::new(rng.random_range(-1.0..1.0), 0.0);
            for _ in 0..3 {
                let j = rng.random_range(0..n);
                a[(i, j)] += C64::new(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5));
            }
        }
        CsrMatrix::from_dense(&hermitize(&a))
    }

    #[test]
    fn matches_dense_on_random_sparse() {
        for seed in 0..3 {
            let a = random_sparse_hermitian(400, seed);
            let dense = dense_lowest(&a, 5);
            let it = lowest_eigenpairs(&a, 5, &LanczosSettings::default(), Solver::Iterative).unwrap();
            for (x, y) in dense.values.iter().zip(&it.values) {
                assert!((x - y).abs() < 1e-9, "{x} vs {y}");
            }
        }
    }

    #[test]
    fn finds_exact_degeneracy() {
        // diag(0,0,0,1,2,…) in a random unitary frame
        let n = 250;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let g = random_complex_matrix(&mut rng, n, n).qr().q();
        let d = CMat::from_fn(n, n, |i, j| if i == j { C64::new(i.saturating_sub(2) as f64 / n as f64, 0.0) } else { ZERO });
        let a = CsrMatrix::from_dense(&(&g * d * g.adjoint()));
        let it = lowest_eigenpairs(&a, 4, &LanczosSettings::default(), Solver::Iterative).unwrap();
        assert!(it.values[..3].iter().all(|v| v.abs() < 1e-9));
        assert!((it.values[3] - 1.0 / n as f64).abs() < 1e-9);
        for (v, r) in it.vectors.iter().zip(&it.residuals) {
            assert!((v.norm() - 1.0).abs() < 1e-10);
            assert!(*r < 1e-8);
        }
    }

    #[test]
    fn tiny_and_diagonal_inputs() {
        let a = CsrMatrix::from_dense(&CMat::from_diagonal(&CVec::from_vec(vec![
            C64::new(3.0, 0.0),
            C64::new(1.0, 0.0),
            C64::new(2.0, 0.0),
        ])));
        let e = lowest_eigenpairs(&a, 2, &LanczosSettings::default(), Solver::Iterative).unwrap();
        assert_eq!(e.values.len(), 2);
        assert!((e.values[0] - 1.0).abs() < 1e-12 && (e.values[1] - 2.0).abs() < 1e-12);
    }
}
