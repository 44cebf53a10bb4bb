//! Symmetry-protected topological indices of quantum spin chains computed
//! from matrix product states, together with the exact-diagonalization and
//! quasi-adiabatic-flow machinery used to check them on finite chains.

pub mod config;
pub mod ed;
pub mod entanglement;
pub mod error;
pub mod flow;
pub mod group;
pub mod io;
pub mod lanczos;
pub mod linalg;
pub mod mps;
pub mod parent;
pub mod sparse;
pub mod spin;
pub mod symmetry;

pub use config::Tolerances;
pub use error::{ErrorClass, Result, SptError};
pub use mps::{MpsState, MpsTensor};
pub use spin::Spin;
