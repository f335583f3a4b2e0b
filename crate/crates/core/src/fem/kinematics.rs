use nalgebra::Matrix3;

use crate::error::{Error, Result};

use super::space::FeSpace;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Deformation {
    pub f: Matrix3<f64>,
    pub j: f64,
}

/// `F = I + ∇d` from physical basis gradients and an interleaved displacement.
pub fn deformation_gradient(grads: &[[f64; 3]], dofs: &[usize], d: &[f64]) -> Matrix3<f64> {
    let mut f = Matrix3::identity();
    for (g, &n) in grads.iter().zip(dofs) {
        for i in 0..3 {
            let di = d[3 * n + i];
            for k in 0..3 {
                f[(i, k)] += di * g[k];
            }
        }
    }
    f
}

/// Determinant by cofactor expansion along the first row.
pub fn det_cofactor(m: &Matrix3<f64>) -> f64 {
    m[(0, 0)] * (m[(1, 1)] * m[(2, 2)] - m[(1, 2)] * m[(2, 1)])
        - m[(0, 1)] * (m[(1, 0)] * m[(2, 2)] - m[(1, 2)] * m[(2, 0)])
        + m[(0, 2)] * (m[(1, 0)] * m[(2, 1)] - m[(1, 1)] * m[(2, 0)])
}

/// Determinant from an LU factorization with partial pivoting.
pub fn det_lu(m: &Matrix3<f64>) -> f64 {
    m.lu().determinant()
}

/// `F` and `J` at reference points `(cell, ξ)`. Fails with the physical
/// location of the first point where `J ≤ 0`.
pub fn compute_deformation(space: &FeSpace, d: &[f64], points: &[(usize, [f64; 3])]) -> Result<Vec<Deformation>> {
    if d.len() != 3 * space.n_dofs() {
        return Err(Error::DimensionMismatch {
            expected: 3 * space.n_dofs(),
            got: d.len(),
        });
    }
    let out: Vec<Result<Deformation>> = crate::par::map_indexed(points.len(), |k| {
        let (cell, xi) = points[k];
        let (_, grads) = space.eval_basis(cell, xi)?;
        let f = deformation_gradient(&grads, space.dofs(cell), d);
        let j = det_cofactor(&f);
        if !(j > 0.0) {
            return Err(Error::InvertedElement {
                cell,
                point: space.map_point(cell, xi),
                jacobian: j,
            });
        }
        Ok(Deformation { f, j })
    });
    out.into_iter().collect()
}
