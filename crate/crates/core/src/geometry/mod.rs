//! Hexahedral meshes of an idealized left ventricle.

mod fibers;
mod io;
mod lv;
mod mesh;
mod refine;

pub use fibers::{FiberField, FiberFrame, FiberParams, RuleBasedFibers, UniformFibers};
pub use io::{read_mesh, write_mesh, parse_mesh, format_mesh};
pub use lv::{det3, generate_idealized_lv, trilinear_jacobian, trilinear_map, LvGeometry, LvResolution, LvShape};
pub use mesh::{box_mesh, BoundaryFacet, HexMesh, Tag, FACE_VERTICES};
pub use refine::{refine_octree, NestedMeshes, ParentEntry};
pub(crate) use refine::half_lattice_entity;
pub use mesh::face_to_cell;
