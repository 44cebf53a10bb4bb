//! Config files for the sweep and flow commands.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use spt_core::ed::{uniform_grid, Boundary, Builtin, Interaction};
use spt_core::io::{parse_interaction, InteractionFile};

use crate::error::CliError;

/// An interaction given by builtin name, by file, or inline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InteractionRef {
    Builtin(String),
    File { file: PathBuf },
    Inline(InteractionFile),
}

impl InteractionRef {
    /// Relative file paths are taken from the directory of the config file.
    pub fn resolve(&self, base: &Path) -> Result<Interaction, CliError> {
        match self {
            InteractionRef::Builtin(name) => Ok(Interaction::builtin(name.parse::<Builtin>()?)),
            InteractionRef::File { file } => {
                let path = base.join(file);
                Ok(parse_interaction(&crate::read_file(&path)?)?)
            }
            InteractionRef::Inline(f) => Ok(f.to_interaction()?),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryName {
    Open,
    Periodic,
}

impl From<BoundaryName> for Boundary {
    fn from(b: BoundaryName) -> Self {
        match b {
            BoundaryName::Open => Boundary::Open,
            BoundaryName::Periodic => Boundary::Periodic,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepFile {
    pub phi0: InteractionRef,
    pub phi1: InteractionRef,
    pub sizes: Vec<usize>,
    pub boundary: BoundaryName,
    /// Uniform grid on [0, 1]; ignored when `s_grid` is given.
    #[serde(default = "default_points")]
    pub grid_points: usize,
    #[serde(default)]
    pub s_grid: Option<Vec<f64>>,
    #[serde(default)]
    pub q: Option<usize>,
    #[serde(default)]
    pub gamma_guess: Option<f64>,
    #[serde(default)]
    pub refine_steps: Option<usize>,
    /// Eigensolver residual tolerance.
    #[serde(default)]
    pub tol: Option<f64>,
}

fn default_points() -> usize {
    41
}

impl SweepFile {
    pub fn grid(&self) -> Vec<f64> {
        self.s_grid.clone().unwrap_or_else(|| uniform_grid(self.grid_points))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowFile {
    pub phi0: InteractionRef,
    pub phi1: InteractionRef,
    /// Chain length of the tracked flow.
    pub n: usize,
    pub boundary: BoundaryName,
    pub s_end: f64,
    #[serde(default = "default_checkpoints")]
    pub checkpoints: usize,
    pub gamma: f64,
    #[serde(default = "default_ode_tol")]
    pub ode_tol: f64,
    /// Tracked rank; by default the bottom cluster of H(0).
    #[serde(default)]
    pub rank: Option<usize>,
    /// Open chain used for V; defaults to `n`.
    #[serde(default)]
    pub cut_n: Option<usize>,
    /// Filter gap for V and the factorization check; defaults to `gamma`.
    #[serde(default)]
    pub boundary_gamma: Option<f64>,
    #[serde(default)]
    pub factorization: bool,
}

fn default_checkpoints() -> usize {
    11
}

fn default_ode_tol() -> f64 {
    1e-6
}
