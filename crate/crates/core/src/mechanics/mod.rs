//! Active-stress hyperelasticity of the ventricular wall: material law,
//! residual and tangent assembly, and nonlinear solvers.

mod material;
mod model;
mod solve;
pub mod surface;

pub use material::{frame_matrix, MechParams, StressPoint};
pub use model::{MechCounters, MechState, Mechanics};
pub use solve::{newton, LinearizedSystem, NewtonOutcome, NewtonParams, StaticSolution};

#[cfg(test)]
mod tests;
