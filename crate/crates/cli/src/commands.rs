use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use spt_core::ed::{build_hamiltonian, gap_sweep, max_dim, sweep_csv, Builtin, Interaction, SweepConfig, SweepSummary};
use spt_core::entanglement::{kramers_check, kramers_ensemble, schmidt_spectrum_mps, KramersVerdict, CLUSTER_TOL};
use spt_core::flow::{
    boundary_generator, factorization_check, flow_projection, low_cluster_rank, standard_probes, BlockOperator, Cut,
    FilterFunction, LinearPath, OdeOptions, OdeStats, Partition, SplitPaths,
};
use spt_core::group::FiniteGroup;
use spt_core::io::{matrix_to_data, GroupFile, InteractionFile, MatrixData, MpsFile};
use spt_core::linalg::{self, CMat};
use spt_core::mps::{default_l_max, primitivity_length, right_normalize};
use spt_core::parent::{default_support, frustration_free_residual, interval_ground_space, parent_interaction};
use spt_core::symmetry::{pi_rotations, projective_rep, tr_index, TrCertificate};
use spt_core::{MpsTensor, Spin, SptError};

use crate::config::{FlowFile, SweepFile};
use crate::error::CliError;

fn pairs(rows: &[Vec<num_complex::Complex64>]) -> Vec<Vec<[f64; 2]>> {
    rows.iter().map(|r| r.iter().map(|z| [z.re, z.im]).collect()).collect()
}

#[derive(Serialize)]
pub struct IndexTrReport {
    pub zeta: i32,
    pub theta: f64,
    pub residual: f64,
    pub certificates: TrCertificate,
    pub u: MatrixData,
}

pub fn index_tr(v: &MpsTensor, tol: f64) -> Result<IndexTrReport, CliError> {
    let v = right_normalize(v, tol)?.tensor;
    let r = tr_index(&v, tol)?;
    Ok(IndexTrReport {
        zeta: r.zeta,
        theta: r.theta,
        residual: r.residual,
        certificates: r.certificate,
        u: matrix_to_data(&r.u),
    })
}

#[derive(Serialize)]
pub struct IndexGroupReport {
    pub elements: Vec<String>,
    pub theta: Vec<f64>,
    pub sigma: Vec<Vec<[f64; 2]>>,
    /// σ(g,h)/σ(h,g), present for abelian groups.
    pub invariant_phases: Option<Vec<Vec<[f64; 2]>>>,
    pub cocycle_defect: f64,
    pub representation_defect: f64,
    pub max_residual: f64,
    pub max_scalar_defect: f64,
    /// σ is a coboundary, i.e. the class is trivial.
    pub trivial_class: bool,
}

pub fn index_group(v: &MpsTensor, group: &FiniteGroup, rep: &[CMat], tol: f64) -> Result<IndexGroupReport, CliError> {
    let v = right_normalize(v, tol)?.tensor;
    let data = projective_rep(&v, group, rep, tol)?;
    Ok(IndexGroupReport {
        elements: group.names().to_vec(),
        theta: data.theta.clone(),
        sigma: pairs(&data.sigma),
        invariant_phases: data.invariant_phases.as_deref().map(pairs),
        cocycle_defect: data.cocycle_defect(),
        representation_defect: data.representation_defect(),
        max_residual: data.max_residual,
        max_scalar_defect: data.max_scalar_defect,
        trivial_class: data.coboundary_gauge(1e-6).is_some(),
    })
}

#[derive(Serialize)]
pub struct PrimitivityReport {
    pub spin_s: f64,
    pub bond_dim: usize,
    pub l_max: usize,
    pub primitivity_length: Option<usize>,
    pub primitive: bool,
    /// Spectral radius of the transfer map, when the tensor normalizes.
    pub transfer_radius: Option<f64>,
}

pub fn primitivity(v: &MpsTensor, l_max: Option<usize>, tol: f64) -> Result<PrimitivityReport, CliError> {
    let l_max = l_max.unwrap_or_else(|| default_l_max(v.bond_dim()));
    let length = primitivity_length(v, Some(l_max));
    let radius = right_normalize(v, tol).ok().map(|n| n.scale * n.scale);
    Ok(PrimitivityReport {
        spin_s: v.spin().value(),
        bond_dim: v.bond_dim(),
        l_max,
        primitivity_length: length,
        primitive: length.is_some(),
        transfer_radius: radius,
    })
}

#[derive(Serialize)]
pub struct ParentReport {
    pub m: usize,
    pub rank: usize,
    pub ground_space_dim: usize,
    pub expected_dim: usize,
    pub projector_defect: f64,
    pub frustration_free_residual: f64,
    pub interaction: InteractionFile,
}

pub fn parent_ham(v: &MpsTensor, m: Option<usize>, tol: f64) -> Result<ParentReport, CliError> {
    let v = right_normalize(v, tol)?.tensor;
    let m = match m {
        Some(m) => m,
        None => default_support(&v)?,
    };
    let space = interval_ground_space(&v, m)?;
    space.check()?;
    let h = parent_interaction(&v, m)?;
    let residual = frustration_free_residual(&v, &h, &[0, 1, 2], tol)?;
    let phi = Interaction::new(h.spin, h.h.clone(), Vec::new())?;
    Ok(ParentReport {
        m,
        rank: h.rank,
        ground_space_dim: space.dim(),
        expected_dim: space.expected_dim,
        projector_defect: h.projector_defect(),
        frustration_free_residual: residual,
        interaction: InteractionFile::from_interaction(&phi),
    })
}

pub fn gap_sweep_cmd(file: &SweepFile, base: &Path, seed: u64) -> Result<(String, SweepSummary), CliError> {
    let phi0 = file.phi0.resolve(base)?;
    let phi1 = file.phi1.resolve(base)?;
    let mut cfg = SweepConfig::new(phi0, phi1, file.sizes.clone(), file.boundary.into());
    cfg.s_grid = file.grid();
    cfg.seed = seed;
    cfg.max_dim = max_dim();
    if let Some(q) = file.q {
        cfg.q = q;
    }
    if let Some(g) = file.gamma_guess {
        cfg.gamma_guess = g;
    }
    if let Some(r) = file.refine_steps {
        cfg.refine_steps = r;
    }
    if let Some(t) = file.tol {
        cfg.tol = t;
    }
    let (rows, summary) = gap_sweep(&cfg)?;
    Ok((sweep_csv(&rows), summary))
}

#[derive(Serialize)]
pub struct SpectrumReport {
    pub spectrum: Vec<f64>,
    pub entropy: f64,
    /// None when the state is not time-reversal invariant.
    pub zeta: Option<i32>,
    pub kramers: Option<KramersVerdict>,
}

pub fn entanglement(v: &MpsTensor, tol: f64) -> Result<SpectrumReport, CliError> {
    let spectrum = schmidt_spectrum_mps(v, tol)?;
    let normalized = right_normalize(v, tol)?.tensor;
    let zeta = match tr_index(&normalized, tol.max(1e-8)) {
        Ok(r) => Some(r.zeta),
        Err(SptError::NotTimeReversalInvariant { .. }) => None,
        Err(e) => return Err(e.into()),
    };
    let kramers = zeta.map(|z| kramers_check(&spectrum, z, CLUSTER_TOL)).transpose()?;
    Ok(SpectrumReport { entropy: spectrum.entropy(), spectrum: spectrum.values().to_vec(), zeta, kramers })
}

#[derive(Serialize)]
pub struct EnsembleReport {
    pub seed: u64,
    pub bond_dim: usize,
    pub members: Vec<SpectrumReport>,
    pub all_pass: bool,
}

pub fn kramers_ensemble_cmd(count: usize, k: usize, seed: u64, tol: f64) -> Result<EnsembleReport, CliError> {
    let members = kramers_ensemble(seed, count, k, tol)?
        .iter()
        .map(|v| entanglement(v, tol))
        .collect::<Result<Vec<_>, _>>()?;
    let all_pass = members.iter().all(|m| matches!(m.kramers, Some(KramersVerdict::Pass { .. })));
    Ok(EnsembleReport { seed, bond_dim: k, members, all_pass })
}

#[derive(Serialize)]
#[allow(non_snake_case)]
pub struct FlowCheckpoint {
    pub s: f64,
    pub fidelity_defect: f64,
    pub unitarity_defect: f64,
    pub rank_drift: f64,
    pub gap: f64,
    pub V_norm: f64,
    pub V_locality_profile: Vec<f64>,
    pub factorization_defect: Option<f64>,
}

#[derive(Serialize)]
pub struct FlowReport {
    pub n: usize,
    pub boundary: String,
    pub rank: usize,
    pub gamma: f64,
    pub cut_n: usize,
    pub boundary_gamma: f64,
    pub checkpoints: Vec<FlowCheckpoint>,
    pub stats: OdeStats,
    pub factorization_stats: Option<OdeStats>,
}

pub fn flow_cmd(file: &FlowFile, base: &Path) -> Result<FlowReport, CliError> {
    let phi0 = file.phi0.resolve(base)?;
    let phi1 = file.phi1.resolve(base)?;
    if file.checkpoints < 2 || !(file.s_end > 0.0) {
        return Err(CliError::Config("flow needs s_end > 0 and at least two checkpoints".into()));
    }
    let boundary = file.boundary.into();
    let h0 = build_hamiltonian(&phi0, file.n, &boundary)?;
    let h1 = build_hamiltonian(&phi1, file.n, &boundary)?;
    let part = Partition::from_patterns(&[&h0, &h1]);
    let path = LinearPath::new(BlockOperator::from_sparse(&part, &h0)?, BlockOperator::from_sparse(&part, &h1)?);
    let rank = match file.rank {
        Some(r) => r,
        None => low_cluster_rank(&path.at(0.0), 16)?,
    };
    let grid: Vec<f64> =
        (0..file.checkpoints).map(|i| file.s_end * i as f64 / (file.checkpoints - 1) as f64).collect();
    let filter = FilterFunction::new(file.gamma, None, None)?;
    let opts = OdeOptions { tol: file.ode_tol, ..OdeOptions::default() };
    let traj = flow_projection(&path, &grid, rank, &filter, &opts)?;

    let cut_n = file.cut_n.unwrap_or(file.n);
    let boundary_gamma = file.boundary_gamma.unwrap_or(file.gamma);
    let split = SplitPaths::new(&phi0, &phi1, Cut::center(cut_n)?, max_dim())?;
    let bfilter = FilterFunction::new(boundary_gamma, None, None)?;
    let factorization = if file.factorization {
        let probes = standard_probes(phi0.spin(), cut_n)?;
        Some(factorization_check(&split, &grid, &bfilter, &opts, &probes)?)
    } else {
        None
    };
    let mut checkpoints = Vec::with_capacity(grid.len());
    for (i, state) in traj.states.iter().enumerate() {
        let b = boundary_generator(&split, state.s, &bfilter)?;
        checkpoints.push(FlowCheckpoint {
            s: state.s,
            fidelity_defect: state.fidelity_defect,
            unitarity_defect: state.unitarity_defect,
            rank_drift: state.rank_drift,
            gap: state.gap,
            V_norm: b.v_norm,
            V_locality_profile: b.profile,
            factorization_defect: factorization.as_ref().map(|f| f.points[i].defect),
        });
    }
    Ok(FlowReport {
        n: file.n,
        boundary: boundary.name().into(),
        rank,
        gamma: file.gamma,
        cut_n,
        boundary_gamma,
        checkpoints,
        stats: traj.stats,
        factorization_stats: factorization.map(|f| f.stats),
    })
}

/// Reference inputs: MPS files, interactions and the Z2×Z2 group.
pub fn builtin(name: &str, seed: u64) -> Result<String, CliError> {
    let json = |v: &dyn erased::Json| v.canonical();
    match name {
        "aklt" => json(&MpsFile::from_tensor(&MpsTensor::aklt())),
        "trivial" => json(&MpsFile::from_tensor(&MpsTensor::product(Spin::ONE, 0.0)?)),
        "random" => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mats = (0..3).map(|_| linalg::random_complex_matrix(&mut rng, 2, 2)).collect();
            let raw = MpsTensor::new(Spin::ONE, mats)?;
            json(&MpsFile::from_tensor(&right_normalize(&raw, 1e-12)?.tensor))
        }
        "aklt-interaction" => json(&InteractionFile::from_interaction(&Interaction::builtin(Builtin::Aklt))),
        "trivial-interaction" => json(&InteractionFile::from_interaction(&Interaction::builtin(Builtin::Trivial))),
        "z2z2" => {
            let group = FiniteGroup::z2xz2();
            let rep = pi_rotations(Spin::ONE);
            let file = GroupFile {
                elements: group.names().to_vec(),
                mult_table: group.table().to_vec(),
                rep: group.names().iter().cloned().zip(rep.iter().map(matrix_to_data)).collect(),
            };
            json(&file)
        }
        other => Err(CliError::Config(format!(
            "unknown builtin `{other}` (aklt, trivial, random, aklt-interaction, trivial-interaction, z2z2)"
        ))),
    }
}

mod erased {
    use super::CliError;

    pub trait Json {
        fn canonical(&self) -> Result<String, CliError>;
    }

    impl<T: serde::Serialize> Json for T {
        fn canonical(&self) -> Result<String, CliError> {
            Ok(spt_core::io::to_canonical_json(self)?)
        }
    }
}
