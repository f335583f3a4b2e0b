//! Tensor-product Lagrange finite elements on hexahedra.

pub mod assembly;
pub mod kinematics;
pub mod quadrature;
pub mod shape;
pub mod solvers;
pub mod space;
pub mod sparse;

pub use assembly::{assemble_mass, assemble_stiffness, assemble_load};
pub use kinematics::{compute_deformation, Deformation};
pub use quadrature::{gauss_legendre, GaussRule};
pub use shape::LagrangeBasis;
pub use solvers::{solve_cg, solve_gmres, Ilu0, Jacobi, LinearSolverParams, Preconditioner, SolveStats};
pub use space::{CellValues, FeSpace};
pub use sparse::CsrMatrix;
