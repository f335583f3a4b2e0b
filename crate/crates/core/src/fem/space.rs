use std::collections::HashMap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::geometry::HexMesh;
use crate::units::M_PER_MM;

use super::quadrature::GaussRule;
use super::shape::LagrangeBasis;

/// Continuous `Q_r` space on a hexahedral mesh with trilinear geometry.
///
/// Vertex dofs keep the mesh vertex numbering; for `r = 2` the edge, face and
/// cell nodes follow, numbered in order of first appearance. Coordinates are
/// in metres.
#[derive(Clone, Debug)]
pub struct FeSpace {
    mesh: Arc<HexMesh>,
    basis: LagrangeBasis,
    n_dofs: usize,
    cell_dofs: Vec<usize>,
    coords: Arc<Vec<[f64; 3]>>,
    dof_points: Vec<[f64; 3]>,
    owner: Vec<(usize, [f64; 3])>,
}

/// Reference shape data of a basis at the points of a Gauss rule.
#[derive(Clone, Debug)]
pub struct RefTable {
    pub rule: GaussRule,
    pub n_local: usize,
    vals: Vec<f64>,
    grads: Vec<[f64; 3]>,
    geo_grads: Vec<[[f64; 3]; 8]>,
}

impl RefTable {
    pub fn new(basis: LagrangeBasis, n_1d: usize) -> Self {
        let rule = GaussRule::new(n_1d);
        let nl = basis.n_local();
        let nq = rule.len();
        let mut vals = vec![0.0; nq * nl];
        let mut grads = vec![[0.0; 3]; nq * nl];
        let geo = LagrangeBasis::new(1);
        let mut gv = [0.0; 8];
        let mut geo_grads = vec![[[0.0; 3]; 8]; nq];
        for (q, &xi) in rule.points.iter().enumerate() {
            basis.eval(xi, &mut vals[q * nl..(q + 1) * nl], &mut grads[q * nl..(q + 1) * nl]);
            geo.eval(xi, &mut gv, &mut geo_grads[q]);
        }
        RefTable {
            rule,
            n_local: nl,
            vals,
            grads,
            geo_grads,
        }
    }

    pub fn n_points(&self) -> usize {
        self.rule.len()
    }

    pub fn phi(&self, q: usize) -> &[f64] {
        &self.vals[q * self.n_local..(q + 1) * self.n_local]
    }
}

/// Physical shape data of one cell at the points of a [`RefTable`].
#[derive(Clone, Debug, Default)]
pub struct CellValues {
    pub n_local: usize,
    /// Quadrature weight times Jacobian determinant.
    pub jxw: Vec<f64>,
    pub phi: Vec<f64>,
    pub grad: Vec<[f64; 3]>,
    pub x: Vec<[f64; 3]>,
}

impl CellValues {
    pub fn n_points(&self) -> usize {
        self.jxw.len()
    }

    pub fn phi(&self, q: usize) -> &[f64] {
        &self.phi[q * self.n_local..(q + 1) * self.n_local]
    }

    pub fn grad(&self, q: usize) -> &[[f64; 3]] {
        &self.grad[q * self.n_local..(q + 1) * self.n_local]
    }
}

impl FeSpace {
    pub fn new(mesh: Arc<HexMesh>, degree: usize) -> Self {
        let coords: Vec<[f64; 3]> = mesh.vertices.iter().map(|v| v.map(|x| x * M_PER_MM)).collect();
        Self::build(mesh, degree, Arc::new(coords))
    }

    fn build(mesh: Arc<HexMesh>, degree: usize, coords: Arc<Vec<[f64; 3]>>) -> Self {
        let basis = LagrangeBasis::new(degree);
        let nl = basis.n_local();
        let nv = mesh.n_vertices();
        let mut cell_dofs = Vec::with_capacity(mesh.n_cells() * nl);
        let mut n_dofs = nv;
        let mut owner: Vec<Option<(usize, [f64; 3])>> = vec![None; nv];
        let mut extra: HashMap<Vec<usize>, usize> = HashMap::new();
        for (c, cell) in mesh.cells.iter().enumerate() {
            for a in 0..nl {
                let dof = if degree == 1 {
                    cell[a]
                } else {
                    let n = 3;
                    let idx = [a % n, (a / n) % n, a / (n * n)];
                    let (_, key) = crate::geometry::half_lattice_entity(cell, idx);
                    if key.len() == 1 {
                        key[0]
                    } else {
                        *extra.entry(key).or_insert_with(|| {
                            n_dofs += 1;
                            owner.push(None);
                            n_dofs - 1
                        })
                    }
                };
                if owner[dof].is_none() {
                    owner[dof] = Some((c, basis.node(a)));
                }
                cell_dofs.push(dof);
            }
        }
        let owner: Vec<(usize, [f64; 3])> = owner
            .into_iter()
            .map(|o| o.unwrap_or((0, [0.0; 3])))
            .collect();
        let mut space = FeSpace {
            mesh,
            basis,
            n_dofs,
            cell_dofs,
            coords,
            dof_points: Vec::new(),
            owner,
        };
        space.dof_points = (0..n_dofs)
            .map(|d| {
                let (c, xi) = space.owner[d];
                space.map_point(c, xi)
            })
            .collect();
        space
    }

    /// Same topology and numbering on different vertex coordinates (metres).
    pub fn with_vertex_coords(&self, coords: Vec<[f64; 3]>) -> Result<Self> {
        if coords.len() != self.mesh.n_vertices() {
            return Err(Error::DimensionMismatch {
                expected: self.mesh.n_vertices(),
                got: coords.len(),
            });
        }
        let mut s = self.clone();
        s.coords = Arc::new(coords);
        s.dof_points = (0..s.n_dofs)
            .map(|d| {
                let (c, xi) = s.owner[d];
                s.map_point(c, xi)
            })
            .collect();
        Ok(s)
    }

    pub fn mesh(&self) -> &Arc<HexMesh> {
        &self.mesh
    }

    pub fn basis(&self) -> LagrangeBasis {
        self.basis
    }

    pub fn degree(&self) -> usize {
        self.basis.degree
    }

    pub fn n_local(&self) -> usize {
        self.basis.n_local()
    }

    pub fn n_dofs(&self) -> usize {
        self.n_dofs
    }

    pub fn n_cells(&self) -> usize {
        self.mesh.n_cells()
    }

    pub fn dofs(&self, cell: usize) -> &[usize] {
        let nl = self.n_local();
        &self.cell_dofs[cell * nl..(cell + 1) * nl]
    }

    pub fn vertex_coords(&self) -> &[[f64; 3]] {
        &self.coords
    }

    pub fn dof_points(&self) -> &[[f64; 3]] {
        &self.dof_points
    }

    /// Lowest cell containing `dof` and the node's reference coordinates there.
    pub fn dof_owner(&self, dof: usize) -> (usize, [f64; 3]) {
        self.owner[dof]
    }

    pub fn cell_coords(&self, cell: usize) -> [[f64; 3]; 8] {
        self.mesh.cells[cell].map(|v| self.coords[v])
    }

    pub fn map_point(&self, cell: usize, xi: [f64; 3]) -> [f64; 3] {
        crate::geometry::trilinear_map(&self.cell_coords(cell), xi)
    }

    pub fn ref_table(&self, n_1d: usize) -> RefTable {
        RefTable::new(self.basis, n_1d)
    }

    /// Default table with `(r+1)` points per direction.
    pub fn default_table(&self) -> RefTable {
        self.ref_table(self.degree() + 1)
    }

    /// Fills physical shape data of `cell`. Fails on a non-positive Jacobian.
    pub fn cell_values(&self, cell: usize, table: &RefTable, out: &mut CellValues) -> Result<()> {
        let nq = table.n_points();
        let nl = table.n_local;
        out.n_local = nl;
        out.jxw.resize(nq, 0.0);
        out.phi.resize(nq * nl, 0.0);
        out.grad.resize(nq * nl, [0.0; 3]);
        out.x.resize(nq, [0.0; 3]);
        out.phi.copy_from_slice(&table.vals);
        let xv = self.cell_coords(cell);
        for q in 0..nq {
            let gg = &table.geo_grads[q];
            let mut jac = [[0.0; 3]; 3];
            for v in 0..8 {
                for a in 0..3 {
                    for k in 0..3 {
                        jac[a][k] += xv[v][a] * gg[v][k];
                    }
                }
            }
            let det = crate::geometry::det3(&jac);
            if !(det > 0.0) {
                return Err(Error::DegenerateCell { cell, jacobian: det });
            }
            let inv = inv3(&jac, det);
            out.jxw[q] = table.rule.weights[q] * det;
            out.x[q] = crate::geometry::trilinear_map(&xv, table.rule.points[q]);
            let rg = &table.grads[q * nl..(q + 1) * nl];
            let pg = &mut out.grad[q * nl..(q + 1) * nl];
            for a in 0..nl {
                // ∇φ = J⁻ᵀ ∇_ξ φ
                for d in 0..3 {
                    pg[a][d] = inv[0][d] * rg[a][0] + inv[1][d] * rg[a][1] + inv[2][d] * rg[a][2];
                }
            }
        }
        Ok(())
    }

    /// Values and physical gradients of the basis at one reference point.
    pub fn eval_basis(&self, cell: usize, xi: [f64; 3]) -> Result<(Vec<f64>, Vec<[f64; 3]>)> {
        let nl = self.n_local();
        let mut vals = vec![0.0; nl];
        let mut rg = vec![[0.0; 3]; nl];
        self.basis.eval(xi, &mut vals, &mut rg);
        let jac = crate::geometry::trilinear_jacobian(&self.cell_coords(cell), xi);
        let det = crate::geometry::det3(&jac);
        if !(det.abs() > 0.0) {
            return Err(Error::DegenerateCell { cell, jacobian: det });
        }
        let inv = inv3(&jac, det);
        let grads = rg
            .iter()
            .map(|g| [0, 1, 2].map(|d| inv[0][d] * g[0] + inv[1][d] * g[1] + inv[2][d] * g[2]))
            .collect();
        Ok((vals, grads))
    }

    /// Value of a scalar field at a reference point of `cell`.
    pub fn eval_scalar(&self, cell: usize, xi: [f64; 3], values: &[f64]) -> f64 {
        let v = self.basis.values(xi);
        self.dofs(cell).iter().zip(&v).map(|(&d, &p)| values[d] * p).sum()
    }

    /// Value of an interleaved 3-vector field at a reference point of `cell`.
    pub fn eval_vector(&self, cell: usize, xi: [f64; 3], values: &[f64]) -> [f64; 3] {
        let v = self.basis.values(xi);
        let mut out = [0.0; 3];
        for (&d, &p) in self.dofs(cell).iter().zip(&v) {
            for c in 0..3 {
                out[c] += values[3 * d + c] * p;
            }
        }
        out
    }

    /// Nodal interpolant of `f` (argument in metres).
    pub fn interpolate(&self, f: impl Fn([f64; 3]) -> f64 + Sync + Send) -> Vec<f64> {
        crate::par::map_indexed(self.n_dofs, |d| f(self.dof_points[d]))
    }

    /// Nodal interpolant of a vector function, interleaved.
    pub fn interpolate_vector(&self, f: impl Fn([f64; 3]) -> [f64; 3] + Sync + Send) -> Vec<f64> {
        let per: Vec<[f64; 3]> = crate::par::map_indexed(self.n_dofs, |d| f(self.dof_points[d]));
        per.into_iter().flatten().collect()
    }

    /// Dofs lying on the boundary facets carrying `tag`, sorted and unique.
    pub fn facet_dofs(&self, tag: crate::geometry::Tag) -> Vec<usize> {
        let mut out = Vec::new();
        for f in self.mesh.facets_with(tag) {
            out.extend(self.face_local_nodes(f.face).into_iter().map(|a| self.dofs(f.cell)[a]));
        }
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Local node indices on a cell face.
    pub fn face_local_nodes(&self, face: u8) -> Vec<usize> {
        let (dim, side) = ((face / 2) as usize, (face % 2) as usize);
        let n = self.basis.n_1d();
        (0..self.n_local())
            .filter(|&a| {
                let idx = [a % n, (a / n) % n, a / (n * n)];
                idx[dim] == side * (n - 1)
            })
            .collect()
    }
}

pub(crate) fn inv3(m: &[[f64; 3]; 3], det: f64) -> [[f64; 3]; 3] {
    let id = 1.0 / det;
    [
        [
            (m[1][1] * m[2][2] - m[1][2] * m[2][1]) * id,
            (m[0][2] * m[2][1] - m[0][1] * m[2][2]) * id,
            (m[0][1] * m[1][2] - m[0][2] * m[1][1]) * id,
        ],
        [
            (m[1][2] * m[2][0] - m[1][0] * m[2][2]) * id,
            (m[0][0] * m[2][2] - m[0][2] * m[2][0]) * id,
            (m[0][2] * m[1][0] - m[0][0] * m[1][2]) * id,
        ],
        [
            (m[1][0] * m[2][1] - m[1][1] * m[2][0]) * id,
            (m[0][1] * m[2][0] - m[0][0] * m[2][1]) * id,
            (m[0][0] * m[1][1] - m[0][1] * m[1][0]) * id,
        ],
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{box_mesh, generate_idealized_lv, LvResolution, LvShape};

    #[test]
    fn dof_counts() {
        let one = Arc::new(box_mesh([1, 1, 1], [1.0; 3]).unwrap());
        assert_eq!(FeSpace::new(one.clone(), 1).n_dofs(), 8);
        assert_eq!(FeSpace::new(one, 2).n_dofs(), 27);
        let two = Arc::new(box_mesh([2, 1, 1], [2.0, 1.0, 1.0]).unwrap());
        assert_eq!(FeSpace::new(two.clone(), 1).n_dofs(), 12);
        assert_eq!(FeSpace::new(two, 2).n_dofs(), 45);
    }

    #[test]
    fn q2_on_collapsed_apex_is_consistent() {
        let m = Arc::new(generate_idealized_lv(&LvShape::default(), &LvResolution::new(1, 6, 3)).unwrap());
        let s = FeSpace::new(m.clone(), 2);
        // Every dof point must be where each cell sharing it puts the node.
        for c in 0..s.n_cells() {
            for (a, &d) in s.dofs(c).iter().enumerate() {
                let x = s.map_point(c, s.basis().node(a));
                let y = s.dof_points()[d];
                for k in 0..3 {
                    assert!((x[k] - y[k]).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn reproduces_polynomials_of_degree_r() {
        let m = Arc::new(generate_idealized_lv(&LvShape::default(), &LvResolution::new(1, 6, 3)).unwrap());
        for r in 1..=2 {
            let s = FeSpace::new(m.clone(), r);
            let f = |x: [f64; 3]| {
                let base = 1.0 + 3.0 * x[0] - 2.0 * x[1] + 0.5 * x[2];
                if r == 2 {
                    base + 40.0 * x[0] * x[1] - 7.0 * x[2] * x[2]
                } else {
                    base
                }
            };
            let vals = s.interpolate(f);
            for c in 0..s.n_cells() {
                // Geometry is trilinear, so degree-2 reproduction holds on
                // affine cells only; use the centre of non-apex cells as a
                // probe for r = 1 and affine cells for r = 2.
                let xi = [0.37, 0.61, 0.45];
                let x = s.map_point(c, xi);
                if r == 1 {
                    assert!((s.eval_scalar(c, xi, &vals) - f(x)).abs() < 1e-12);
                }
            }
            let b = Arc::new(box_mesh([2, 2, 1], [1.0, 2.0, 1.0]).unwrap());
            let sb = FeSpace::new(b, r);
            let vb = sb.interpolate(f);
            for c in 0..sb.n_cells() {
                let xi = [0.21, 0.83, 0.4];
                let x = sb.map_point(c, xi);
                assert!((sb.eval_scalar(c, xi, &vb) - f(x)).abs() < 1e-12);
            }
        }
    }
}
