//! Quasi-Newton solution of the displacement/pressure saddle-point system
//! by scalar Schur complement reduction.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mechanics::{LinearizedSystem, MechState, Mechanics};
use crate::par::{dot, norm2};
use crate::units::PA_PER_MMHG;

use super::volume::CavityVolume;

/// Anything that can solve `A x = b` for the frozen displacement block.
pub trait LinearSolve {
    fn solve_vec(&self, b: &[f64]) -> Result<Vec<f64>>;
}

impl LinearSolve for LinearizedSystem {
    fn solve_vec(&self, b: &[f64]) -> Result<Vec<f64>> {
        Ok(self.solve(b)?.0)
    }
}

/// Frozen blocks of one time step. `w = J_dd⁻¹ J_dp` is computed once, on
/// construction.
pub struct SaddleWorkspace<S: LinearSolve> {
    jdd: S,
    jpd: Vec<f64>,
    w: Vec<f64>,
    schur: f64,
    pub w_solves: usize,
    pub v_solves: usize,
}

impl<S: LinearSolve> SaddleWorkspace<S> {
    pub fn new(jdd: S, jdp: &[f64], jpd: Vec<f64>) -> Result<Self> {
        if jdp.len() != jpd.len() {
            return Err(Error::DimensionMismatch {
                expected: jpd.len(),
                got: jdp.len(),
            });
        }
        let w = jdd.solve_vec(jdp)?;
        let schur = dot(&jpd, &w);
        let scale = norm2(&jpd) * norm2(&w);
        if !(schur.abs() >= 1e-14 * scale) || scale == 0.0 {
            return Err(Error::SingularSchur { value: schur });
        }
        Ok(SaddleWorkspace {
            jdd,
            jpd,
            w,
            schur,
            w_solves: 1,
            v_solves: 0,
        })
    }

    pub fn w(&self) -> &[f64] {
        &self.w
    }

    /// Increments `(Δd, Δp)` with `J_dd Δd + J_dp Δp = −r_d`, `J_pd·Δd = −r_p`.
    pub fn solve(&mut self, r_d: &[f64], r_p: f64) -> Result<(Vec<f64>, f64)> {
        let v = self.jdd.solve_vec(r_d)?;
        self.v_solves += 1;
        let dp = (r_p - dot(&self.jpd, &v)) / self.schur;
        let dd = v.iter().zip(&self.w).map(|(vi, wi)| -(vi + wi * dp)).collect();
        Ok((dd, dp))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CoupledParams {
    pub rel_tol: f64,
    /// Displacement residual (N) and volume mismatch (mL).
    pub abs_tol: f64,
    pub max_iter: usize,
    /// Absolute GMRES tolerance on the displacement block (N).
    pub linear_tol: f64,
}

impl Default for CoupledParams {
    fn default() -> Self {
        CoupledParams {
            rel_tol: 1e-10,
            abs_tol: 1e-8,
            max_iter: 50,
            linear_tol: 1e-9,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CouplingCounters {
    pub steps: usize,
    pub iterations: usize,
    pub w_solves: usize,
    pub v_solves: usize,
}

/// Converged step.
#[derive(Clone, Debug, PartialEq)]
pub struct CoupledStep {
    pub d: Vec<f64>,
    /// Pa.
    pub p_lv: f64,
    pub iterations: usize,
    pub residual_d: f64,
    /// `V_3D − V_0D` (mL).
    pub residual_p: f64,
}

/// `r_p = V_3D(d) − V_0D` in mL.
pub fn volume_residual(vol: &CavityVolume, mech: &Mechanics, d: &[f64], v0d: f64) -> Result<f64> {
    Ok(vol.volume(mech, d)? - v0d)
}

/// One implicit step of the coupled 3D mechanics and cavity volume
/// constraint. The Jacobian is assembled at `(dⁿ, pⁿ)` and kept through the
/// iterations; the pressure is the Lagrange multiplier.
pub fn coupled_step(
    mech: &Mechanics,
    vol: &CavityVolume,
    state: &MechState,
    v0d: f64,
    ta: Option<&[f64]>,
    dt: f64,
    params: &CoupledParams,
    counters: &mut CouplingCounters,
) -> Result<CoupledStep> {
    let mut jdd = mech.zero_matrix();
    mech.dynamic_residual(&state.d_n, state.p_lv, state, ta, dt, Some(&mut jdd))?;
    let jdp: Vec<f64> = mech.pressure_load(&state.d_n)?.iter().map(|x| -x).collect();
    let jpd = vol.gradient(mech, &state.d_n)?;
    let sys = LinearizedSystem::new(jdd, params.linear_tol)?;
    let mut ws = SaddleWorkspace::new(sys, &jdp, jpd)?;
    counters.steps += 1;

    let mut d = state.d_n.clone();
    let mut p = state.p_lv;
    let mut first = None;
    let mut out = None;
    for it in 0..=params.max_iter {
        let r_d = mech.dynamic_residual(&d, p, state, ta, dt, None)?;
        let r_p = volume_residual(vol, mech, &d, v0d)?;
        let rn = norm2(&r_d);
        let (r0d, _) = *first.get_or_insert((rn, r_p.abs()));
        if rn <= params.abs_tol.max(params.rel_tol * r0d) && r_p.abs() <= params.abs_tol {
            out = Some(CoupledStep {
                d,
                p_lv: p,
                iterations: it,
                residual_d: rn,
                residual_p: r_p,
            });
            break;
        }
        if it == params.max_iter {
            counters.w_solves += ws.w_solves;
            counters.v_solves += ws.v_solves;
            return Err(Error::NonConvergence {
                solver: "coupled quasi-Newton",
                iterations: it,
                residual: rn.max(r_p.abs()),
            });
        }
        let (dd, dp) = ws.solve(&r_d, r_p)?;
        d.iter_mut().zip(&dd).for_each(|(x, y)| *x += y);
        p += dp;
        counters.iterations += 1;
        log::trace!("coupled it {it}: |r_d| = {rn:.3e}, r_p = {r_p:.3e} mL, p = {:.3} mmHg", p / PA_PER_MMHG);
    }
    counters.w_solves += ws.w_solves;
    counters.v_solves += ws.v_solves;
    Ok(out.expect("loop exits through a converged step"))
}
