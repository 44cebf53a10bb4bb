use spt_core::ed::{build_hamiltonian, low_eigenpairs, Boundary, Builtin, Interaction};
use spt_core::entanglement::*;
use spt_core::lanczos::{LanczosSettings, Solver};
use spt_core::linalg::CVec;
use spt_core::sparse::pattern_components;
use spt_core::symmetry::tr_index;
use spt_core::{MpsTensor, Spin};

fn aklt_ground(n: usize, boundary: Boundary, magnetization: Option<i64>) -> CVec {
    let h = build_hamiltonian(&Interaction::builtin(Builtin::Aklt), n, &boundary).unwrap();
    let settings = LanczosSettings { tol: 1e-10, ..LanczosSettings::default() };
    match magnetization {
        None => low_eigenpairs(&h, 1, &settings, Solver::Auto).unwrap().vectors.remove(0),
        Some(m) => {
            let sz = |x: usize| (0..n).map(|j| (x / 3usize.pow(j as u32)) % 3).map(|i| i as i64 - 1).sum::<i64>();
            let states = pattern_components(&[&h]).into_iter().find(|c| sz(c[0]) == m).unwrap();
            let sub = h.restrict(&states);
            let local = low_eigenpairs(&sub, 1, &settings, Solver::Auto).unwrap().vectors.remove(0);
            let mut v = CVec::zeros(h.dim());
            for (i, &s) in states.iter().enumerate() {
                v[s] = local[i];
            }
            v
        }
    }
}

#[test]
fn open_chain_edge_polarized_ground_state() {
    let psi = aklt_ground(8, Boundary::Open, Some(1));
    let s = schmidt_spectrum_vector(&psi, Spin::ONE, 8, 4).unwrap();
    let v = s.values();
    assert!((v[0] - 0.5).abs() < 2e-2 && (v[1] - 0.5).abs() < 2e-2, "{v:?}");
    assert!(v[2..].iter().all(|&x| x <= 1e-2));
}

#[test]
fn periodic_ed_matches_mps_spectrum() {
    // a periodic ring is cut twice, so its spectrum is that of two bonds
    let mps = schmidt_spectrum_mps(&MpsTensor::aklt(), 1e-10).unwrap().squared();
    let psi = aklt_ground(10, Boundary::Periodic, None);
    let ed = schmidt_spectrum_vector(&psi, Spin::ONE, 10, 5).unwrap();
    let tv = mps.total_variation(&ed, 4);
    assert!(tv <= 2e-2, "total variation {tv}");
    let sum: f64 = ed.values().iter().sum();
    assert!((sum - 1.0).abs() < 1e-10);
}

#[test]
fn kramers_ensemble_is_evenly_degenerate() {
    let members = kramers_ensemble(2024, 50, 4, 1e-10).unwrap();
    for v in &members {
        assert_eq!(tr_index(v, 1e-8).unwrap().zeta, -1);
        let s = schmidt_spectrum_mps(v, 1e-10).unwrap();
        match kramers_check(&s, -1, CLUSTER_TOL).unwrap() {
            KramersVerdict::Pass { clusters, entropy } => {
                assert!(clusters.iter().all(|c| c.multiplicity % 2 == 0));
                assert!(entropy >= std::f64::consts::LN_2 - 1e-10);
            }
            other => panic!("{other:?}"),
        }
    }
}
