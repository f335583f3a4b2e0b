//! Segregated-staggered cardiac electromechanics of an idealized left ventricle
//! coupled to a closed-loop lumped-parameter circulation.
//!
//! The crate is organized by physics:
//!
//! - [`geometry`]: nested hexahedral meshes of a truncated prolate spheroid, fibers, mesh IO
//! - [`fem`]: tensor-product Lagrange spaces, quadrature, sparse assembly, CG/GMRES
//! - [`intergrid`]: pointwise transfer between nested meshes and polynomial degrees
//! - [`ep`]: monodomain electrophysiology with an IMEX ionic update
//! - [`activation`]: active-force state, sarcomere length and active tension
//! - [`mechanics`]: Guccione hyperelasticity, follower pressure, Newton solvers
//! - [`coupling0d`]: closed-loop circulation and the volume-constrained saddle-point step
//! - [`refconfig`]: stress-free reference configuration recovery and projection
//! - [`driver`]: time loop, scenarios, postprocessing and file output
//!
//! Units: the 3D side works in SI (m, Pa, s); the circulation works in mL, mmHg, s.
//! Conversions live in [`units`].

pub mod activation;
pub mod coupling0d;
pub mod driver;
pub mod ep;
pub mod error;
pub mod fem;
pub mod geometry;
pub mod intergrid;
pub mod mechanics;
pub mod par;
pub mod refconfig;
pub mod units;

pub use error::{Error, Result};
