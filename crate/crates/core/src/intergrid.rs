//! Pointwise transfer of finite-element fields between nested meshes and
//! between polynomial degrees.
//!
//! A [`TransferOperator`] stores, for every target point, the source cell
//! containing it and the source shape values there, so applying it is an
//! exact evaluation of the source finite-element function. On nested meshes
//! points are located through the parent map in `O(depth)`.

use crate::error::{Error, Result};
use crate::fem::FeSpace;
use crate::geometry::NestedMeshes;
use crate::par;

const REF_EPS: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct TransferOperator {
    n_source_dofs: usize,
    n_local: usize,
    cells: Vec<usize>,
    xi: Vec<[f64; 3]>,
    dofs: Vec<usize>,
    weights: Vec<f64>,
}

impl TransferOperator {
    /// Evaluation tables for arbitrary located points `(source cell, ξ)`.
    pub fn from_locations(source: &FeSpace, locations: &[(usize, [f64; 3])]) -> Result<Self> {
        let nl = source.n_local();
        for &(cell, xi) in locations {
            if cell >= source.n_cells() || xi.iter().any(|&x| !(-REF_EPS..=1.0 + REF_EPS).contains(&x)) {
                return Err(Error::PointLocation {
                    point: source.map_point(cell.min(source.n_cells().saturating_sub(1)), xi),
                });
            }
        }
        let rows: Vec<(Vec<usize>, Vec<f64>)> = par::map_indexed(locations.len(), |k| {
            let (cell, xi) = locations[k];
            (source.dofs(cell).to_vec(), source.basis().values(xi))
        });
        let mut dofs = Vec::with_capacity(locations.len() * nl);
        let mut weights = Vec::with_capacity(locations.len() * nl);
        for (d, w) in rows {
            dofs.extend(d);
            weights.extend(w);
        }
        Ok(TransferOperator {
            n_source_dofs: source.n_dofs(),
            n_local: nl,
            cells: locations.iter().map(|l| l.0).collect(),
            xi: locations.iter().map(|l| l.1).collect(),
            dofs,
            weights,
        })
    }

    /// Coarse field to fine dof points.
    pub fn coarse_to_fine(nested: &NestedMeshes, coarse: &FeSpace, fine: &FeSpace) -> Result<Self> {
        let locs = par::map_indexed(fine.n_dofs(), |d| {
            let (fc, xi) = fine.dof_owner(d);
            nested.to_coarse(fc, xi)
        });
        Self::from_locations(coarse, &locs)
    }

    /// Coarse field to points given in fine-cell reference coordinates.
    pub fn coarse_to_fine_points(nested: &NestedMeshes, coarse: &FeSpace, points: &[(usize, [f64; 3])]) -> Result<Self> {
        let locs: Vec<_> = points.iter().map(|&(fc, xi)| nested.to_coarse(fc, xi)).collect();
        Self::from_locations(coarse, &locs)
    }

    /// Fine field to coarse dof points (pointwise restriction).
    pub fn fine_to_coarse(nested: &NestedMeshes, fine: &FeSpace, coarse: &FeSpace) -> Result<Self> {
        let locs = par::map_indexed(coarse.n_dofs(), |d| {
            let (cc, xi) = coarse.dof_owner(d);
            nested.to_fine(cc, xi)
        });
        Self::from_locations(fine, &locs)
    }

    /// Between two spaces on the same mesh, e.g. `Q2 → Q1`.
    pub fn same_mesh(source: &FeSpace, target: &FeSpace) -> Result<Self> {
        if source.n_cells() != target.n_cells() {
            return Err(Error::DimensionMismatch {
                expected: source.n_cells(),
                got: target.n_cells(),
            });
        }
        let locs: Vec<_> = (0..target.n_dofs()).map(|d| target.dof_owner(d)).collect();
        Self::from_locations(source, &locs)
    }

    pub fn n_targets(&self) -> usize {
        self.cells.len()
    }

    pub fn n_source_dofs(&self) -> usize {
        self.n_source_dofs
    }

    /// Source cell and reference coordinates of target `k`.
    pub fn location(&self, k: usize) -> (usize, [f64; 3]) {
        (self.cells[k], self.xi[k])
    }

    /// Scalar field values at the target points.
    pub fn apply(&self, field: &[f64]) -> Result<Vec<f64>> {
        if field.len() != self.n_source_dofs {
            return Err(Error::DimensionMismatch {
                expected: self.n_source_dofs,
                got: field.len(),
            });
        }
        let nl = self.n_local;
        Ok(par::map_indexed(self.n_targets(), |k| {
            let r = k * nl..(k + 1) * nl;
            self.dofs[r.clone()]
                .iter()
                .zip(&self.weights[r])
                .map(|(&d, &w)| w * field[d])
                .sum()
        }))
    }

    /// Interleaved 3-vector field values at the target points.
    pub fn apply_vector(&self, field: &[f64]) -> Result<Vec<f64>> {
        if field.len() != 3 * self.n_source_dofs {
            return Err(Error::DimensionMismatch {
                expected: 3 * self.n_source_dofs,
                got: field.len(),
            });
        }
        let nl = self.n_local;
        let per: Vec<[f64; 3]> = par::map_indexed(self.n_targets(), |k| {
            let mut out = [0.0; 3];
            for a in k * nl..(k + 1) * nl {
                let (d, w) = (self.dofs[a], self.weights[a]);
                for c in 0..3 {
                    out[c] += w * field[3 * d + c];
                }
            }
            out
        });
        Ok(per.into_iter().flatten().collect())
    }
}

/// Restricts the calcium component of a fine ionic state to coarse dofs.
pub fn transfer_calcium(op: &TransferOperator, calcium_fine: &[f64]) -> Result<Vec<f64>> {
    op.apply(calcium_fine)
}
