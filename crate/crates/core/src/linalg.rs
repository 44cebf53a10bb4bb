//! Small dense complex linear-algebra helpers on top of `nalgebra`.

use nalgebra::{DMatrix, DVector, Schur, SymmetricEigen};
use num_complex::Complex64 as C64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Result, SptError};

pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };
pub const I: C64 = C64 { re: 0.0, im: 1.0 };

#[inline]
pub fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

/// Entrywise complex conjugate.
pub fn conj(a: &CMat) -> CMat {
    a.map(|z| z.conj())
}

pub fn frobenius(a: &CMat) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn max_abs(a: &CMat) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// ‖A − A*‖ in max-entry norm.
pub fn hermiticity_defect(a: &CMat) -> f64 {
    max_abs(&(a - a.adjoint()))
}

pub fn unitarity_defect(u: &CMat) -> f64 {
    max_abs(&(u * u.adjoint() - identity(u.nrows())))
}

pub fn hermitize(a: &CMat) -> CMat {
    (a + a.adjoint()) * re(0.5)
}

pub fn trace(a: &CMat) -> C64 {
    a.diagonal().iter().sum()
}

/// Hermitian eigendecomposition with eigenvalues sorted ascending and the
/// eigenvectors stored as the matching columns.
pub fn eigh(a: &CMat) -> (Vec<f64>, CMat) {
    let n = a.nrows();
    if n == 0 {
        return (Vec::new(), CMat::zeros(0, 0));
    }
    if a.iter().all(|z| z.im == 0.0) {
        // real symmetric input: the real solver is several times faster
        let real = DMatrix::<f64>::from_fn(n, n, |r, c| 0.5 * (a[(r, c)].re + a[(c, r)].re));
        let eig = SymmetricEigen::new(real);
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
        let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let vectors = CMat::from_fn(n, n, |r, c| re(eig.eigenvectors[(r, order[c])]));
        return (values, vectors);
    }
    let eig = SymmetricEigen::new(hermitize(a));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMat::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

pub fn eigvalsh(a: &CMat) -> Vec<f64> {
    if a.nrows() == 0 {
        return Vec::new();
    }
    let mut v: Vec<f64> = hermitize(a).symmetric_eigenvalues().iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

/// All eigenvalues of a general square complex matrix via the complex Schur form.
pub fn eigenvalues(a: &CMat) -> Result<Vec<C64>> {
    let n = a.nrows();
    let iterations = 100 * n.max(10);
    // the QR sweep can stall at a deflation threshold this close to rounding
    let scale = a.iter().map(|z| z.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let schur = Schur::try_new(a.clone(), 1e-15, iterations)
        .or_else(|| Schur::try_new(a.clone(), 64.0 * f64::EPSILON * scale, 10 * iterations))
        .ok_or(SptError::NoConvergence { iterations, residual: f64::NAN })?;
    let (_, t) = schur.unpack();
    Ok((0..n).map(|i| t[(i, i)]).collect())
}

/// Unit vector spanning the (numerical) kernel of `a`: the right singular
/// vector for the smallest singular value. Returns the vector and that
/// singular value.
pub fn null_vector(a: &CMat) -> (CVec, f64) {
    let n = a.ncols();
    let svd = a.clone().svd(false, true);
    let v_t = svd.v_t.expect("requested V^*");
    let (idx, smin) = svd
        .singular_values
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, &s)| if s < acc.1 { (i, s) } else { acc });
    let v = CVec::from_fn(n, |r, _| v_t[(idx, r)].conj());
    (v, smin)
}

/// Closest unitary to `a` in Frobenius norm (unitary factor of the polar
/// decomposition).
pub fn polar_unitary(a: &CMat) -> CMat {
    let svd = a.clone().svd(true, true);
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested V^*");
    u * v_t
}

pub fn singular_values(a: &CMat) -> Vec<f64> {
    let mut s: Vec<f64> = a.clone().singular_values().iter().copied().collect();
    s.sort_by(|x, y| y.total_cmp(x));
    s
}

pub fn spectral_norm(a: &CMat) -> f64 {
    if a.nrows() == 0 || a.ncols() == 0 {
        return 0.0;
    }
    singular_values(a).first().copied().unwrap_or(0.0)
}

/// Operator norm of a Hermitian matrix, with real arithmetic when the entries
/// are all real or all imaginary.
pub fn hermitian_norm(a: &CMat) -> f64 {
    let n = a.nrows();
    if n == 0 {
        return 0.0;
    }
    let largest = |m: DMatrix<f64>| m.symmetric_eigenvalues().iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
    if a.iter().all(|z| z.im == 0.0) {
        return largest(DMatrix::from_fn(n, n, |r, c| 0.5 * (a[(r, c)].re + a[(c, r)].re)));
    }
    if a.iter().all(|z| z.re == 0.0) {
        // a = iB with B antisymmetric: ‖a‖² = λ_max(BᵀB)
        let b = DMatrix::from_fn(n, n, |r, c| a[(r, c)].im);
        return largest(b.transpose() * &b).sqrt();
    }
    eigvalsh(a).into_iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

/// Apply a real function to the spectrum of a Hermitian matrix.
pub fn hermitian_function(a: &CMat, f: impl Fn(f64) -> f64) -> CMat {
    let (vals, vecs) = eigh(a);
    let diag = CMat::from_diagonal(&CVec::from_iterator(vals.len(), vals.iter().map(|&x| re(f(x)))));
    &vecs * diag * vecs.adjoint()
}

/// e^{i t A} for Hermitian `A`.
pub fn exp_i_hermitian(a: &CMat, t: f64) -> CMat {
    let (vals, vecs) = eigh(a);
    let diag = CMat::from_diagonal(&CVec::from_iterator(
        vals.len(),
        vals.iter().map(|&x| C64::from_polar(1.0, t * x)),
    ));
    &vecs * diag * vecs.adjoint()
}

/// Orthonormal basis (as columns) of the column span of `a`, keeping singular
/// values above `cutoff` relative to the largest one.
pub fn orthonormal_span(a: &CMat, cutoff: f64) -> CMat {
    if a.ncols() == 0 || a.nrows() == 0 {
        return CMat::zeros(a.nrows(), 0);
    }
    let svd = a.clone().svd(true, false);
    let u = svd.u.expect("requested U");
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let keep: Vec<usize> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, &s)| smax > 0.0 && s > cutoff * smax)
        .map(|(i, _)| i)
        .collect();
    CMat::from_fn(a.nrows(), keep.len(), |r, c| u[(r, keep[c])])
}

pub fn numerical_rank(a: &CMat, cutoff: f64) -> usize {
    orthonormal_span(a, cutoff).ncols()
}

/// Row-major flattening of a square matrix into a vector (vec of rows).
pub fn vectorize(a: &CMat) -> CVec {
    let n = a.ncols();
    CVec::from_fn(a.nrows() * n, |i, _| a[(i / n, i % n)])
}

pub fn unvectorize(v: &CVec, n: usize) -> CMat {
    CMat::from_fn(n, n, |r, c| v[r * n + c])
}

pub fn random_complex_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> CMat {
    CMat::from_fn(rows, cols, |_, _| {
        let a: f64 = rng.sample(StandardNormal);
        let b: f64 = rng.sample(StandardNormal);
        C64::new(a, b)
    })
}

/// Haar-random unitary from the QR decomposition of a complex Ginibre matrix.
pub fn random_unitary<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CMat {
    let g = random_complex_matrix(rng, n, n);
    let qr = g.qr();
    let q = qr.q();
    let r = qr.r();
    let phases = CMat::from_fn(n, n, |i, j| {
        if i == j {
            let d = r[(i, i)];
            if d.norm() > 0.0 {
                d / d.norm()
            } else {
                ONE
            }
        } else {
            ZERO
        }
    });
    q * phases
}

/// Haar-random real orthogonal matrix embedded as a complex matrix.
pub fn random_orthogonal<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CMat {
    let g = DMatrix::<f64>::from_fn(n, n, |_, _| rng.sample(StandardNormal));
    let qr = g.qr();
    let q = qr.q();
    let r = qr.r();
    CMat::from_fn(n, n, |i, j| re(q[(i, j)] * r[(j, j)].signum()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn eigh_sorted_and_reconstructs() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = hermitize(&random_complex_matrix(&mut rng, 6, 6));
        let (vals, vecs) = eigh(&a);
        assert!(vals.windows(2).all(|w| w[0] <= w[1]));
        let diag = CMat::from_diagonal(&CVec::from_iterator(6, vals.iter().map(|&x| re(x))));
        assert!(max_abs(&(&vecs * diag * vecs.adjoint() - &a)) < 1e-12);
    }

    #[test]
    fn general_eigenvalues_of_triangular() {
        let a = CMat::from_row_slice(2, 2, &[re(2.0), re(5.0), ZERO, C64::new(0.0, -1.0)]);
        let mut ev = eigenvalues(&a).unwrap();
        ev.sort_by(|x, y| x.re.total_cmp(&y.re));
        assert!((ev[0] - C64::new(0.0, -1.0)).norm() < 1e-12);
        assert!((ev[1] - re(2.0)).norm() < 1e-12);
    }

    #[test]
    fn null_vector_of_rank_deficient() {
        let a = CMat::from_row_slice(2, 2, &[re(1.0), re(1.0), re(1.0), re(1.0)]);
        let (v, s) = null_vector(&a);
        assert!(s < 1e-14);
        assert!((&a * &v).norm() < 1e-14);
    }

    #[test]
    fn random_unitary_is_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for n in 1..6 {
            assert!(unitarity_defect(&random_unitary(&mut rng, n)) < 1e-12);
            let o = random_orthogonal(&mut rng, n);
            assert!(unitarity_defect(&o) < 1e-12);
            assert!(o.iter().all(|z| z.im == 0.0));
        }
    }

    #[test]
    fn polar_recovers_scaled_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let u = random_unitary(&mut rng, 4);
        let p = polar_unitary(&(&u * C64::new(0.0, 3.0)));
        assert!(max_abs(&(p - &u * I)) < 1e-12);
    }
}
