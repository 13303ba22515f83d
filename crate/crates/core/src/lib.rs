//! Zeno dynamics of a quantum state under continuous measurement of a
//! constant or moving projector: effective generators, integrators,
//! stroboscopic measurement, scenario files and the `zeno` CLI.

// Comparisons like `!(x > 0.0)` are written that way so NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod artifact;
pub mod commands;
pub mod dynamics;
pub mod error;
pub mod hamiltonian;
pub mod linalg;
pub mod projector_path;
pub mod scenario;
pub mod stroboscopic;

pub use dynamics::{
    effective_hamiltonian, integrate_constant, integrate_general, integrate_rotating_frame, TrajectoryRecord,
};
pub use error::{Result, ZenoError};
pub use hamiltonian::{HamiltonianPath, Waveform};
pub use linalg::{Operator, Projector, StateVector, C64};
pub use projector_path::{DerivativeMode, ProjectorPath, UnitaryGeneratorPath};
