//! Fast invariant checks on a configured model, run before long simulations.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::coupling0d::{CircState, LinearSolve, SaddleWorkspace, V_LV};
use crate::error::Result;
use crate::intergrid::TransferOperator;
use crate::par::norm2;
use crate::units::{mmhg_to_pa, pa_to_mmhg};

use super::config::RunConfig;
use super::sim::Simulation;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, passed: bool, detail: String) -> Check {
    Check { name, passed, detail }
}

struct Dense(DMatrix<f64>);

impl LinearSolve for Dense {
    fn solve_vec(&self, b: &[f64]) -> Result<Vec<f64>> {
        let x = self
            .0
            .clone()
            .lu()
            .solve(&DVector::from_column_slice(b))
            .ok_or_else(|| crate::Error::InvalidInput("singular test matrix".into()))?;
        Ok(x.iter().copied().collect())
    }
}

/// Saddle system with a diagonally dominant SPD block, solved by Schur
/// reduction and densely. Returns the relative difference.
fn schur_against_dense(n: usize) -> Result<f64> {
    // Deterministic pseudo-random entries.
    let f = |i: usize, j: usize| ((i * 7919 + j * 104_729) % 1000) as f64 / 1000.0 - 0.5;
    let b = DMatrix::from_fn(n, n, f);
    let a = &b * b.transpose() + DMatrix::identity(n, n) * n as f64;
    let jdp: Vec<f64> = (0..n).map(|i| f(i, n)).collect();
    let jpd: Vec<f64> = (0..n).map(|i| f(n, i) + 0.1).collect();
    let rd: Vec<f64> = (0..n).map(|i| f(i, i + 1)).collect();
    let rp = 0.25;
    let mut full = DMatrix::zeros(n + 1, n + 1);
    full.view_mut((0, 0), (n, n)).copy_from(&a);
    let mut rhs = DVector::zeros(n + 1);
    for i in 0..n {
        full[(i, n)] = jdp[i];
        full[(n, i)] = jpd[i];
        rhs[i] = -rd[i];
    }
    rhs[n] = -rp;
    let x = full
        .lu()
        .solve(&rhs)
        .ok_or_else(|| crate::Error::InvalidInput("singular saddle test system".into()))?;
    let mut ws = SaddleWorkspace::new(Dense(a), &jdp, jpd)?;
    let (dd, dp) = ws.solve(&rd, rp)?;
    let err = (0..n).map(|i| (dd[i] - x[i]).abs()).fold((dp - x[n]).abs(), f64::max);
    Ok(err / x.amax())
}

/// Builds the model of `config` and evaluates the invariants that do not
/// need a time loop. Construction errors are returned as errors; violated
/// invariants as failed checks.
pub fn run_checks(config: &RunConfig) -> Result<Vec<Check>> {
    let sim = Simulation::new(config.clone())?;
    let mut out = Vec::new();

    let coarse = sim.mech.space().mesh();
    let meshes = coarse.validate().and(sim.nested.fine.validate());
    out.push(check(
        "mesh validity",
        meshes.is_ok(),
        format!(
            "{} coarse / {} fine cells{}",
            coarse.n_cells(),
            sim.nested.fine.n_cells(),
            meshes.err().map(|e| format!(": {e}")).unwrap_or_default()
        ),
    ));

    let zero = vec![0.0; sim.mech.n_dofs()];
    let r0 = norm2(&sim.mech.static_residual(&zero, 0.0, None, None)?);
    out.push(check(
        "stress-free reference residual",
        r0 <= config.newton.abs_tol,
        format!("|r_d(0, 0, 0)| = {r0:.3e} N"),
    ));

    let op = TransferOperator::coarse_to_fine(&sim.nested, sim.mech.space(), &sim.ep.space)?;
    let x_coarse: Vec<f64> = sim.mech.space().dof_points().iter().map(|p| p[0] + 2.0 * p[1] - p[2]).collect();
    let x_fine = op.apply(&x_coarse)?;
    let err = sim
        .ep
        .space
        .dof_points()
        .iter()
        .zip(&x_fine)
        .map(|(p, v)| (p[0] + 2.0 * p[1] - p[2] - v).abs())
        .fold(0.0, f64::max);
    out.push(check(
        "coarse-to-fine transfer of a linear field",
        err <= 1e-12,
        format!("max error {err:.3e} m"),
    ));

    let v_ref = sim.cavity.volume(&sim.mech, &zero)?;
    let v0 = sim.volume_3d()?;
    out.push(check(
        "cavity volume",
        v_ref > 0.0 && v0 >= v_ref,
        format!("{v_ref:.3} mL at rest, {v0:.3} mL at {:.1} mmHg", config.init.p_lv_mmhg),
    ));
    let mismatch = (v0 - sim.circ_state.y[V_LV]).abs();
    out.push(check(
        "initial volume constraint",
        mismatch <= 10.0 * config.coupling.abs_tol,
        format!("|V_3D − V_0D| = {mismatch:.3e} mL"),
    ));

    let rel = schur_against_dense(12)?;
    out.push(check("Schur reduction against dense solve", rel <= 1e-10, format!("relative difference {rel:.3e}")));

    let circ = &sim.circulation;
    let tau = config.time.tau_s();
    let mut s = CircState::initial(v0);
    let total0 = s.total_volume(&circ.params);
    let n = (config.period() / tau).round() as usize;
    for _ in 0..n {
        s = circ.rk4_step(&s, tau, config.init.p_lv_mmhg)?;
    }
    let drift = (s.total_volume(&circ.params) - total0).abs() / total0;
    out.push(check(
        "closed-loop blood volume over one period",
        drift <= 1e-3,
        format!("relative drift {drift:.3e}"),
    ));

    let p = &circ.params;
    let ratio = -p.valve_flux(-1.0) / p.valve_flux(1.0);
    out.push(check(
        "valve rectification",
        (ratio - p.r_min / p.r_max).abs() <= 1e-12 * ratio,
        format!("backward/forward flux ratio {ratio:.3e}"),
    ));

    let round = pa_to_mmhg(mmhg_to_pa(1.0));
    out.push(check(
        "unit conversion",
        (mmhg_to_pa(1.0) - 133.322).abs() < 1e-9 && (round - 1.0).abs() < 1e-15,
        "1 mmHg = 133.322 Pa".into(),
    ));
    Ok(out)
}
