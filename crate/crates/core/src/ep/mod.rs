//! Monodomain electrophysiology on the fine mesh.
//!
//! One step of the scheme first advances the ionic state with an
//! implicit-explicit update (gates implicitly, concentrations explicitly),
//! then solves a single linear system for the transmembrane potential with
//! the diffusion operator pulled back through the current deformation.

mod actmap;
mod ionic;
mod monodomain;
mod stimulus;

pub use actmap::ActivationMap;
pub use ionic::{ionic_step, EpState, IonicModel, ReducedIonicModel, ReducedIonicParams};
pub use monodomain::{assemble_stiffness_deformed, frames_at_quadrature, Conductivity, EpCounters, Monodomain};
pub use stimulus::Stimulus;
