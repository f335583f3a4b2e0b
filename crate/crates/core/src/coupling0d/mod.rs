//! Lumped closed-loop circulation and its volumetric coupling with the 3D
//! ventricle.

mod circulation;
mod saddle;
mod volume;

pub use circulation::*;
pub use saddle::{coupled_step, volume_residual, CoupledParams, CoupledStep, CouplingCounters, LinearSolve, SaddleWorkspace};
pub use volume::CavityVolume;
