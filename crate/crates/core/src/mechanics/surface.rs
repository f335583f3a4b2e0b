//! Boundary quadrature on tagged facets with current-configuration tangents.

use nalgebra::Vector3;

use crate::fem::quadrature::face_rule;
use crate::fem::FeSpace;
use crate::geometry::{face_to_cell, Tag};

/// One quadrature point on a facet: cell basis values and their derivatives
/// along the in-face coordinates `(u, v)`.
#[derive(Clone, Debug)]
pub struct FacePoint {
    pub phi: Vec<f64>,
    pub du: Vec<f64>,
    pub dv: Vec<f64>,
    pub weight: f64,
}

#[derive(Clone, Debug)]
pub struct FaceQuad {
    pub cell: usize,
    pub face: u8,
    pub points: Vec<FacePoint>,
}

/// Quadrature on every facet carrying `tag`, `n_1d` points per direction.
pub fn facet_quadrature(space: &FeSpace, tag: Tag, n_1d: usize) -> Vec<FaceQuad> {
    let rule = face_rule(n_1d);
    let basis = space.basis();
    let nl = space.n_local();
    space
        .mesh()
        .facets_with(tag)
        .map(|f| {
            let o = face_to_cell(f.face, 0.0, 0.0);
            let tu = sub(face_to_cell(f.face, 1.0, 0.0), o);
            let tv = sub(face_to_cell(f.face, 0.0, 1.0), o);
            let points = rule
                .iter()
                .map(|&([u, v], w)| {
                    let mut phi = vec![0.0; nl];
                    let mut g = vec![[0.0; 3]; nl];
                    basis.eval(face_to_cell(f.face, u, v), &mut phi, &mut g);
                    FacePoint {
                        du: g.iter().map(|g| g[0] * tu[0] + g[1] * tu[1] + g[2] * tu[2]).collect(),
                        dv: g.iter().map(|g| g[0] * tv[0] + g[1] * tv[1] + g[2] * tv[2]).collect(),
                        phi,
                        weight: w,
                    }
                })
                .collect();
            FaceQuad {
                cell: f.cell,
                face: f.face,
                points,
            }
        })
        .collect()
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

/// Current position and tangents `x_u`, `x_v` at a face point. `d` may be
/// absent (reference configuration).
pub fn current_geometry(space: &FeSpace, dofs: &[usize], pt: &FacePoint, d: Option<&[f64]>) -> [Vector3<f64>; 3] {
    let xs = space.dof_points();
    let mut x = Vector3::zeros();
    let mut xu = Vector3::zeros();
    let mut xv = Vector3::zeros();
    for (a, &n) in dofs.iter().enumerate() {
        let mut p = Vector3::from(xs[n]);
        if let Some(d) = d {
            p += Vector3::new(d[3 * n], d[3 * n + 1], d[3 * n + 2]);
        }
        x += p * pt.phi[a];
        xu += p * pt.du[a];
        xv += p * pt.dv[a];
    }
    [x, xu, xv]
}

/// `∂(x_u × x_v)/∂d_{b,e}` for local node `b`, component `e`.
pub fn dnormal(pt: &FacePoint, b: usize, e: usize, xu: &Vector3<f64>, xv: &Vector3<f64>) -> Vector3<f64> {
    let mut unit = Vector3::zeros();
    unit[e] = 1.0;
    unit.cross(xv) * pt.du[b] + xu.cross(&unit) * pt.dv[b]
}
