//! Cellwise stress indicator.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::kinematics::deformation_gradient;
use crate::fem::CellValues;
use crate::mechanics::Mechanics;
use crate::par;

/// Material direction of the fiber frame.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    Fiber,
    Sheet,
    Normal,
}

impl Direction {
    fn index(self) -> usize {
        match self {
            Direction::Fiber => 0,
            Direction::Sheet => 1,
            Direction::Normal => 2,
        }
    }
}

/// `S_ab = (P a₀)·F b₀/|F b₀|` (Pa), averaged over the quadrature points of
/// each cell. `ta` is nodal active tension, `None` for a passive state.
pub fn stress_indicator(mech: &Mechanics, d: &[f64], ta: Option<&[f64]>, a: Direction, b: Direction) -> Result<Vec<f64>> {
    if d.len() != mech.n_dofs() {
        return Err(Error::DimensionMismatch {
            expected: mech.n_dofs(),
            got: d.len(),
        });
    }
    let space = mech.space();
    let table = mech.table();
    let nq = table.n_points();
    let cells: Vec<Result<f64>> = par::map_indexed(space.n_cells(), |cell| {
        let mut cv = CellValues::default();
        space.cell_values(cell, table, &mut cv)?;
        let dofs = space.dofs(cell);
        let mut acc = 0.0;
        for q in 0..nq {
            let f = deformation_gradient(cv.grad(q), dofs, d);
            let frame = &mech.frames()[cell * nq + q];
            let t = ta.map_or(0.0, |t| cv.phi(q).iter().zip(dofs).map(|(p, &k)| p * t[k]).sum());
            let p = mech.params.stress(&f, frame, t)?.p;
            let a0 = Vector3::from(frame.dir(a.index()));
            let fb = f * Vector3::from(frame.dir(b.index()));
            acc += (p * a0).dot(&fb) / fb.norm();
        }
        Ok(acc / nq as f64)
    });
    cells.into_iter().collect()
}
