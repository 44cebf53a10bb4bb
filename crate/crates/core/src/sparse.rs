//! Compressed-sparse-row complex matrices.

use num_complex::Complex64 as C64;

use crate::linalg::{CMat, CVec, ZERO};

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    dim: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    data: Vec<C64>,
}

impl CsrMatrix {
    /// Build row by row; `row(r, buf)` pushes (column, value) pairs for row r
    /// in any order, duplicates are summed. Explicit zeros are kept so that
    /// the sparsity pattern is structural.
    pub fn from_rows(dim: usize, mut row: impl FnMut(usize, &mut Vec<(usize, C64)>)) -> Self {
        let mut indptr = Vec::with_capacity(dim + 1);
        let mut indices = Vec::new();
        let mut data = Vec::new();
        let mut buf = Vec::new();
        indptr.push(0);
        for r in 0..dim {
            buf.clear();
            row(r, &mut buf);
            buf.sort_by_key(|&(c, _)| c);
            let mut last = usize::MAX;
            for &(c, v) in &buf {
                assert!(c < dim, "column {c} out of range for dimension {dim}");
                if c == last {
                    *data.last_mut().unwrap() += v;
                } else {
                    indices.push(c);
                    data.push(v);
                    last = c;
                }
            }
            indptr.push(indices.len());
        }
        CsrMatrix { dim, indptr, indices, data }
    }

    pub fn from_dense(a: &CMat) -> Self {
        assert_eq!(a.nrows(), a.ncols());
        CsrMatrix::from_rows(a.nrows(), |r, buf| {
            for c in 0..a.ncols() {
                if a[(r, c)] != ZERO {
                    buf.push((c, a[(r, c)]));
                }
            }
        })
    }

    pub fn zeros(dim: usize) -> Self {
        CsrMatrix { dim, indptr: vec![0; dim + 1], indices: Vec::new(), data: Vec::new() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.data.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, C64)> + '_ {
        let span = self.indptr[r]..self.indptr[r + 1];
        self.indices[span.clone()].iter().copied().zip(self.data[span].iter().copied())
    }

    /// y = A x.
    pub fn apply_into(&self, x: &[C64], y: &mut [C64]) {
        for (r, out) in y.iter_mut().enumerate() {
            let mut acc = ZERO;
            for k in self.indptr[r]..self.indptr[r + 1] {
                acc += self.data[k] * x[self.indices[k]];
            }
            *out = acc;
        }
    }

    pub fn apply(&self, x: &CVec) -> CVec {
        let mut y = CVec::zeros(self.dim);
        self.apply_into(x.as_slice(), y.as_mut_slice());
        y
    }

    pub fn to_dense(&self) -> CMat {
        let mut a = CMat::zeros(self.dim, self.dim);
        for r in 0..self.dim {
            for (c, v) in self.row(r) {
                a[(r, c)] += v;
            }
        }
        a
    }

    /// a·A + b·B, keeping the union of both patterns.
    pub fn linear_combination(a: f64, x: &CsrMatrix, b: f64, y: &CsrMatrix) -> CsrMatrix {
        assert_eq!(x.dim, y.dim, "dimension mismatch in linear combination");
        CsrMatrix::from_rows(x.dim, |r, buf| {
            buf.extend(x.row(r).map(|(c, v)| (c, v * a)));
            buf.extend(y.row(r).map(|(c, v)| (c, v * b)));
        })
    }

    pub fn scaled(&self, a: f64) -> CsrMatrix {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|v| *v *= a);
        out
    }

    /// Largest |A_rc − conj(A_cr)|.
    pub fn hermiticity_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for r in 0..self.dim {
            for (c, v) in self.row(r) {
                let mirror = self.get(c, r);
                worst = worst.max((v - mirror.conj()).norm());
            }
        }
        worst
    }

    pub fn get(&self, r: usize, c: usize) -> C64 {
        let span = self.indptr[r]..self.indptr[r + 1];
        match self.indices[span.clone()].binary_search(&c) {
            Ok(k) => self.data[span.start + k],
            Err(_) => ZERO,
        }
    }

    /// Principal submatrix on the given (sorted) basis states.
    pub fn restrict(&self, states: &[usize]) -> CsrMatrix {
        let mut position = vec![usize::MAX; self.dim];
        for (i, &s) in states.iter().enumerate() {
            position[s] = i;
        }
        CsrMatrix::from_rows(states.len(), |r, buf| {
            for (c, v) in self.row(states[r]) {
                let p = position[c];
                if p != usize::MAX {
                    buf.push((p, v));
                }
            }
        })
    }
}

/// Connected components of the union of the sparsity patterns, each a sorted
/// list of basis states, ordered by smallest member. Every operator in
/// `mats` is block diagonal with respect to this partition.
pub fn pattern_components(mats: &[&CsrMatrix]) -> Vec<Vec<usize>> {
    let dim = mats.first().map_or(0, |m| m.dim);
    let mut parent: Vec<usize> = (0..dim).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for m in mats {
        assert_eq!(m.dim, dim);
        for r in 0..dim {
            for &c in &m.indices[m.indptr[r]..m.indptr[r + 1]] {
                let (a, b) = (find(&mut parent, r), find(&mut parent, c));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut label = vec![usize::MAX; dim];
    let mut comps: Vec<Vec<usize>> = Vec::new();
    for s in 0..dim {
        let root = find(&mut parent, s);
        if label[root] == usize::MAX {
            label[root] = comps.len();
            comps.push(Vec::new());
        }
        comps[label[root]].push(s);
    }
    comps
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{max_abs, random_complex_matrix};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn dense_round_trip_and_apply() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random_complex_matrix(&mut rng, 7, 7);
        let s = CsrMatrix::from_dense(&a);
        assert_eq!(max_abs(&(s.to_dense() - &a)), 0.0);
        let x = CVec::from_fn(7, |i, _| C64::new(i as f64, 1.0));
        assert!((s.apply(&x) - &a * &x).norm() < 1e-12);
    }

    #[test]
    fn duplicates_are_summed() {
        let s = CsrMatrix::from_rows(2, |r, buf| {
            buf.push((r, C64::new(1.0, 0.0)));
            buf.push((r, C64::new(2.0, 0.0)));
        });
        assert_eq!(s.nnz(), 2);
        assert_eq!(s.get(1, 1), C64::new(3.0, 0.0));
        assert_eq!(s.get(0, 1), ZERO);
    }

    #[test]
    fn components_and_restriction() {
        // blocks {0,2} and {1,3}
        let mut a = CMat::zeros(4, 4);
        a[(0, 2)] = C64::new(1.0, 0.0);
        a[(2, 0)] = C64::new(1.0, 0.0);
        a[(1, 1)] = C64::new(5.0, 0.0);
        a[(3, 1)] = C64::new(0.0, 1.0);
        a[(1, 3)] = C64::new(0.0, -1.0);
        let s = CsrMatrix::from_dense(&a);
        assert_eq!(pattern_components(&[&s]), vec![vec![0, 2], vec![1, 3]]);
        let sub = s.restrict(&[1, 3]).to_dense();
        assert_eq!(sub[(0, 0)], C64::new(5.0, 0.0));
        assert_eq!(sub[(0, 1)], C64::new(0.0, -1.0));
        assert_eq!(s.hermiticity_defect(), 0.0);
    }

    #[test]
    fn linear_combination_keeps_pattern() {
        let a = CsrMatrix::from_dense(&CMat::identity(3, 3));
        let mut off = CMat::zeros(3, 3);
        off[(0, 1)] = C64::new(1.0, 0.0);
        let b = CsrMatrix::from_dense(&off);
        let c = CsrMatrix::linear_combination(1.0, &a, 0.0, &b);
        assert_eq!(c.nnz(), 4);
        assert_eq!(pattern_components(&[&c]).len(), 2);
    }
}
