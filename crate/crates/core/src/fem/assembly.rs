//! Cell-parallel assembly with a deterministic, cell-ordered merge.

use crate::error::Result;
use crate::par;

use super::space::{CellValues, FeSpace, RefTable};
use super::sparse::CsrMatrix;

/// Cells per parallel batch; element data of one batch is merged in cell order.
const BATCH: usize = 256;

/// Sparsity pattern of a `block`-component field with interleaved dofs.
pub fn pattern(space: &FeSpace, block: usize) -> CsrMatrix {
    let n = space.n_dofs();
    let mut node_rows: Vec<Vec<usize>> = vec![Vec::new(); n];
    for c in 0..space.n_cells() {
        let dofs = space.dofs(c);
        for &i in dofs {
            node_rows[i].extend_from_slice(dofs);
        }
    }
    let mut rows = Vec::with_capacity(n * block);
    for mut r in node_rows {
        r.sort_unstable();
        r.dedup();
        for _ in 0..block {
            let mut row = Vec::with_capacity(r.len() * block);
            for &j in &r {
                for c in 0..block {
                    row.push(block * j + c);
                }
            }
            rows.push(row);
        }
    }
    CsrMatrix::from_pattern(n * block, rows)
}

/// Element kernel output sizes for a field with `block` components.
fn local_size(space: &FeSpace, block: usize) -> usize {
    space.n_local() * block
}

/// Assembles a matrix and/or a vector from an element kernel. The kernel gets
/// the cell id, its physical shape data and zeroed element buffers
/// `ke` (row-major, `(block·n_local)²`) and `fe` (`block·n_local`), indexed
/// by `block·a + c`.
pub fn assemble<F>(
    space: &FeSpace,
    table: &RefTable,
    block: usize,
    mut matrix: Option<&mut CsrMatrix>,
    mut vector: Option<&mut [f64]>,
    kernel: F,
) -> Result<()>
where
    F: Fn(usize, &CellValues, &mut [f64], &mut [f64]) -> Result<()> + Sync + Send,
{
    let nloc = local_size(space, block);
    if let Some(m) = matrix.as_deref_mut() {
        m.set_zero();
    }
    if let Some(v) = vector.as_deref_mut() {
        v.iter_mut().for_each(|x| *x = 0.0);
    }
    let n_cells = space.n_cells();
    let mut start = 0;
    while start < n_cells {
        let end = (start + BATCH).min(n_cells);
        let elems: Vec<Result<(Vec<f64>, Vec<f64>)>> = par::map_indexed(end - start, |k| {
            let cell = start + k;
            let mut cv = CellValues::default();
            space.cell_values(cell, table, &mut cv)?;
            let mut ke = vec![0.0; nloc * nloc];
            let mut fe = vec![0.0; nloc];
            kernel(cell, &cv, &mut ke, &mut fe)?;
            Ok((ke, fe))
        });
        for (k, e) in elems.into_iter().enumerate() {
            let (ke, fe) = e?;
            let dofs = space.dofs(start + k);
            let gidx: Vec<usize> = dofs
                .iter()
                .flat_map(|&d| (0..block).map(move |c| block * d + c))
                .collect();
            if let Some(m) = matrix.as_deref_mut() {
                scatter(m, &gidx, &ke);
            }
            if let Some(v) = vector.as_deref_mut() {
                for (a, &i) in gidx.iter().enumerate() {
                    v[i] += fe[a];
                }
            }
        }
        start = end;
    }
    Ok(())
}

pub(crate) fn scatter(m: &mut CsrMatrix, gidx: &[usize], ke: &[f64]) {
    let n = gidx.len();
    for a in 0..n {
        let i = gidx[a];
        let (lo, hi) = (m.row_ptr()[i], m.row_ptr()[i + 1]);
        for b in 0..n {
            let v = ke[a * n + b];
            if v == 0.0 {
                continue;
            }
            let j = gidx[b];
            let pos = lo + m.col_idx()[lo..hi]
                .binary_search(&j)
                .expect("element entry outside the assembled pattern");
            m.values_mut()[pos] += v;
        }
    }
}

fn nodal_at(cv: &CellValues, q: usize, dofs: &[usize], f: &[f64]) -> f64 {
    cv.phi(q).iter().zip(dofs).map(|(p, &d)| p * f[d]).sum()
}

/// Mass matrix `∫ c φ_j φ_i` with an optional nodal coefficient `c`.
pub fn assemble_mass(space: &FeSpace, coefficient: Option<&[f64]>) -> Result<CsrMatrix> {
    let table = space.default_table();
    let mut m = pattern(space, 1);
    assemble(space, &table, 1, Some(&mut m), None, |cell, cv, ke, _| {
        let nl = cv.n_local;
        let dofs = space.dofs(cell);
        for q in 0..cv.n_points() {
            let c = coefficient.map_or(1.0, |f| nodal_at(cv, q, dofs, f));
            let w = c * cv.jxw[q];
            let phi = cv.phi(q);
            for a in 0..nl {
                for b in 0..nl {
                    ke[a * nl + b] += w * phi[a] * phi[b];
                }
            }
        }
        Ok(())
    })?;
    Ok(m)
}

/// Stiffness matrix `∫ σ ∇φ_j · ∇φ_i` for a constant scalar `σ`.
pub fn assemble_stiffness(space: &FeSpace, sigma: f64) -> Result<CsrMatrix> {
    let table = space.default_table();
    let mut k = pattern(space, 1);
    assemble(space, &table, 1, Some(&mut k), None, |_, cv, ke, _| {
        let nl = cv.n_local;
        for q in 0..cv.n_points() {
            let w = sigma * cv.jxw[q];
            let g = cv.grad(q);
            for a in 0..nl {
                for b in 0..nl {
                    ke[a * nl + b] += w * (g[a][0] * g[b][0] + g[a][1] * g[b][1] + g[a][2] * g[b][2]);
                }
            }
        }
        Ok(())
    })?;
    Ok(k)
}

/// Load vector `∫ f_h φ_i` of a nodal field `f`.
pub fn assemble_load(space: &FeSpace, f: &[f64]) -> Result<Vec<f64>> {
    let table = space.default_table();
    let mut out = vec![0.0; space.n_dofs()];
    assemble(space, &table, 1, None, Some(&mut out), |cell, cv, _, fe| {
        let dofs = space.dofs(cell);
        for q in 0..cv.n_points() {
            let v = nodal_at(cv, q, dofs, f) * cv.jxw[q];
            for (a, p) in cv.phi(q).iter().enumerate() {
                fe[a] += v * p;
            }
        }
        Ok(())
    })?;
    Ok(out)
}

/// `‖f_h‖_{L²}` of a nodal field with `n_1d` Gauss points per direction.
pub fn l2_norm(space: &FeSpace, f: &[f64], n_1d: usize) -> Result<f64> {
    let table = space.ref_table(n_1d);
    let parts: Vec<Result<f64>> = par::map_indexed(space.n_cells(), |cell| {
        let mut cv = CellValues::default();
        space.cell_values(cell, &table, &mut cv)?;
        let dofs = space.dofs(cell);
        Ok((0..cv.n_points()).map(|q| nodal_at(&cv, q, dofs, f).powi(2) * cv.jxw[q]).sum())
    });
    let mut s = 0.0;
    for p in parts {
        s += p?;
    }
    Ok(s.sqrt())
}

/// `∫ f_h` of a nodal field.
pub fn integrate(space: &FeSpace, f: &[f64]) -> Result<f64> {
    Ok(assemble_load(space, f)?.iter().sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{box_mesh, HexMesh};
    use std::sync::Arc;

    fn cube() -> FeSpace {
        // 1 mm cube is 1e-3 m; scale to unit volume in metres.
        let mut m = box_mesh([1, 1, 1], [1.0; 3]).unwrap();
        m.vertices.iter_mut().for_each(|v| *v = v.map(|x| x * 1e3));
        FeSpace::new(Arc::new(m), 1)
    }

    #[test]
    fn unit_cube_total_mass() {
        let s = cube();
        let m = assemble_mass(&s, None).unwrap();
        let total: f64 = m.values().iter().sum();
        assert!((total - 1.0).abs() < 1e-14);
        assert!(m.is_symmetric(1e-14));
        let zero = assemble_mass(&s, Some(&vec![0.0; 8])).unwrap();
        assert_eq!(zero.max_abs(), 0.0);
    }

    #[test]
    fn disjoint_cubes_add() {
        let mut m: HexMesh = box_mesh([1, 1, 1], [1e3; 3]).unwrap();
        let shifted: Vec<[f64; 3]> = m.vertices.iter().map(|v| [v[0] + 5e3, v[1], v[2]]).collect();
        let cell2 = m.cells[0].map(|v| v + 8);
        m.vertices.extend(shifted);
        m.cells.push(cell2);
        let s = FeSpace::new(Arc::new(m), 1);
        let total: f64 = assemble_mass(&s, None).unwrap().values().iter().sum();
        assert!((total - 2.0).abs() < 1e-13);
    }

    #[test]
    fn row_sums_are_integrals_of_basis() {
        let m = Arc::new(box_mesh([2, 2, 1], [2.0, 1.0, 1.0]).unwrap());
        for r in 1..=2 {
            let s = FeSpace::new(m.clone(), r);
            let c: Vec<f64> = s.interpolate(|x| 1.0 + 100.0 * x[0]);
            let mm = assemble_mass(&s, Some(&c)).unwrap();
            let load = assemble_load(&s, &c).unwrap();
            for (a, b) in mm.row_sums().iter().zip(&load) {
                assert!((a - b).abs() < 1e-18 + 1e-12 * b.abs());
            }
        }
    }

    #[test]
    fn stiffness_kills_constants() {
        let m = Arc::new(box_mesh([2, 1, 2], [1.0, 1.0, 2.0]).unwrap());
        let s = FeSpace::new(m, 2);
        let k = assemble_stiffness(&s, 1.0).unwrap();
        let r = k.mul_vec(&vec![1.0; s.n_dofs()]);
        assert!(r.iter().all(|x| x.abs() < 1e-15));
        assert!(k.is_symmetric(1e-12));
    }

    #[test]
    fn assembly_is_bitwise_deterministic() {
        let m = Arc::new(box_mesh([4, 3, 3], [1.0, 1.0, 1.0]).unwrap());
        let s = FeSpace::new(m, 2);
        let a = assemble_mass(&s, None).unwrap();
        let b = assemble_mass(&s, None).unwrap();
        assert_eq!(a, b);
    }
}
