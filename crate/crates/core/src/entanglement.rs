//! Entanglement spectra of matrix product states and of ED ground vectors.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SptError};
use crate::linalg::{self, re, CMat, CVec};
use crate::mps::{invariant_state, primitivity_length, right_normalize, MpsTensor};
use crate::spin::Spin;

/// Relative width of a degeneracy cluster.
pub const CLUSTER_TOL: f64 = 1e-8;
/// Schmidt weights below this are treated as zero.
pub const ZERO_WEIGHT: f64 = 1e-12;

/// Descending probabilities summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchmidtSpectrum(Vec<f64>);

impl SchmidtSpectrum {
    /// Clip tiny negative rounding, sort descending and renormalize.
    pub fn from_weights(mut w: Vec<f64>) -> Result<Self> {
        if w.is_empty() || w.iter().any(|x| !x.is_finite()) {
            return Err(SptError::Validation("spectrum must be a nonempty list of finite numbers".into()));
        }
        if w.iter().any(|&x| x < -1e-8) {
            return Err(SptError::Validation("spectrum has a negative weight".into()));
        }
        w.iter_mut().for_each(|x| *x = x.max(0.0));
        let total: f64 = w.iter().sum();
        if total <= 0.0 {
            return Err(SptError::Validation("spectrum has zero total weight".into()));
        }
        w.iter_mut().for_each(|x| *x /= total);
        w.sort_by(|a, b| b.total_cmp(a));
        Ok(SchmidtSpectrum(w))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    /// −Σ p log p.
    pub fn entropy(&self) -> f64 {
        self.0.iter().filter(|&&p| p > 0.0).map(|&p| p * -p.ln()).fold(0.0, |a, b| a + b)
    }

    /// ½ Σ |p_i − q_i| over the first `count` values of each.
    pub fn total_variation(&self, other: &SchmidtSpectrum, count: usize) -> f64 {
        let get = |s: &SchmidtSpectrum, i: usize| s.0.get(i).copied().unwrap_or(0.0);
        0.5 * (0..count).map(|i| (get(self, i) - get(other, i)).abs()).sum::<f64>()
    }

    /// Spectrum of two independent cuts: all products p_i p_j.
    pub fn squared(&self) -> SchmidtSpectrum {
        let w = self.0.iter().flat_map(|p| self.0.iter().map(move |q| p * q)).collect();
        SchmidtSpectrum::from_weights(w).expect("products of a valid spectrum")
    }

    /// Nonzero weights grouped into clusters of relative width `tol`.
    pub fn clusters(&self, tol: f64) -> Vec<Cluster> {
        let mut out: Vec<Cluster> = Vec::new();
        for &p in self.0.iter().filter(|&&p| p > ZERO_WEIGHT) {
            match out.last_mut() {
                Some(c) if (c.anchor - p).abs() <= tol * c.anchor => {
                    c.multiplicity += 1;
                    c.value += (p - c.value) / c.multiplicity as f64;
                }
                _ => out.push(Cluster { value: p, anchor: p, multiplicity: 1 }),
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    /// Mean of the members.
    pub value: f64,
    /// Largest member; the cluster width is measured from it.
    #[serde(skip)]
    pub anchor: f64,
    pub multiplicity: usize,
}

/// Eigenvalues of ρ for the right-normalized form of v.
pub fn schmidt_spectrum_mps(v: &MpsTensor, tol: f64) -> Result<SchmidtSpectrum> {
    let normalized = right_normalize(v, tol)?;
    let rho = invariant_state(&normalized.tensor, tol)?;
    SchmidtSpectrum::from_weights(rho.eigenvalues())
}

/// Eigenvalues of the reduced density matrix of sites 0..cut.
pub fn schmidt_spectrum_vector(psi: &CVec, spin: Spin, n: usize, cut: usize) -> Result<SchmidtSpectrum> {
    if cut == 0 || cut >= n {
        return Err(SptError::BadCut { cut, n });
    }
    let d = spin.dim();
    let (rows, cols) = (d.pow(cut as u32), d.pow((n - cut) as u32));
    if psi.len() != rows * cols {
        return Err(SptError::DimensionMismatch(format!("vector of length {} on {n} sites of dimension {d}", psi.len())));
    }
    let norm = psi.norm();
    if (norm - 1.0).abs() > 1e-8 {
        return Err(SptError::Validation(format!("state has norm {norm}")));
    }
    // site 0 is the most significant digit, so the left block indexes rows
    let m = CMat::from_fn(rows, cols, |r, c| psi[r * cols + c]);
    let sv = linalg::singular_values(&m);
    SchmidtSpectrum::from_weights(sv.into_iter().map(|s| s * s).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum KramersVerdict {
    /// ζ = −1 and every cluster is even.
    Pass { clusters: Vec<Cluster>, entropy: f64 },
    /// ζ = +1: nothing is asserted.
    NotApplicable { entropy: f64 },
}

/// For ζ = −1 every nonzero Schmidt weight must come in pairs, which forces
/// the entropy to be at least log 2.
pub fn kramers_check(spectrum: &SchmidtSpectrum, zeta: i32, tol: f64) -> Result<KramersVerdict> {
    let total: f64 = spectrum.values().iter().sum();
    if (total - 1.0).abs() > 1e-10 {
        return Err(SptError::Validation(format!("spectrum sums to {total}")));
    }
    let entropy = spectrum.entropy();
    match zeta {
        1 => Ok(KramersVerdict::NotApplicable { entropy }),
        -1 => {
            let clusters = spectrum.clusters(tol);
            if let Some(bad) = clusters.iter().find(|c| c.multiplicity % 2 == 1) {
                return Err(SptError::DegeneracyViolated { value: bad.value, multiplicity: bad.multiplicity });
            }
            let floor = std::f64::consts::LN_2 - tol;
            if entropy < floor {
                return Err(SptError::Validation(format!("entropy {entropy} is below log 2")));
            }
            Ok(KramersVerdict::Pass { clusters, entropy })
        }
        z => Err(SptError::BadParameters(format!("ζ must be ±1, got {z}"))),
    }
}

/// Spin-1 tensors with bond dimension k (even) fixed by the antiunitary
/// v_i ↦ U*(−1)^i conj(v_{2−i}) U with U = 1 ⊗ iσ_y, so U conj(U) = −1.
/// Non-primitive draws are rejected.
pub fn random_kramers_mps<R: Rng + ?Sized>(rng: &mut R, k: usize, tol: f64) -> Result<MpsTensor> {
    if k == 0 || k % 2 == 1 {
        return Err(SptError::BadParameters(format!("Kramers pairs need an even bond dimension, got {k}")));
    }
    let mut u = CMat::zeros(k, k);
    for b in 0..k / 2 {
        u[(2 * b, 2 * b + 1)] = re(1.0);
        u[(2 * b + 1, 2 * b)] = re(-1.0);
    }
    for _ in 0..100 {
        let r: Vec<CMat> = (0..3).map(|_| linalg::random_complex_matrix(rng, k, k)).collect();
        let mats: Vec<CMat> = (0..3)
            .map(|i| {
                let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
                let partner = u.adjoint() * linalg::conj(&r[2 - i]) * &u * re(sign);
                (&r[i] + partner) * re(0.5)
            })
            .collect();
        let raw = MpsTensor::new(Spin::ONE, mats)?;
        if primitivity_length(&raw, None).is_none() {
            continue;
        }
        match right_normalize(&raw, tol) {
            Ok(n) => return Ok(n.tensor),
            Err(SptError::NotNormalizable(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(SptError::NotPrimitive("no primitive Kramers tensor in 100 draws".into()))
}

/// A reproducible ensemble; member i is drawn from seed + i.
pub fn kramers_ensemble(seed: u64, count: usize, k: usize, tol: f64) -> Result<Vec<MpsTensor>> {
    (0..count)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i as u64));
            random_kramers_mps(&mut rng, k, tol)
        })
        .collect()
}
