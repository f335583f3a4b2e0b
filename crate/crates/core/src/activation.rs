//! Active-force state on the coarse mesh.
//!
//! The activation variable `s` follows `ds/dt = (a(Ca, SL) − s)/τ_act`,
//! advanced explicitly at the nodes; the active tension is
//! `Ta = Ta_max·clamp(s, 0, 1)`. The sarcomere length is the screened
//! projection of `SL₀·√I_4f`, with `I_4f = |F f₀|²`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::assembly::{assemble, pattern};
use crate::fem::kinematics::deformation_gradient;
use crate::fem::space::{FeSpace, RefTable};
use crate::fem::{solve_gmres, CsrMatrix, Ilu0, LinearSolverParams, SolveStats};
use crate::geometry::{FiberField, FiberFrame};
use crate::par;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ActivationParams {
    /// Maximal active tension (Pa).
    pub ta_max: f64,
    /// Resting sarcomere length (μm).
    pub sl0_um: f64,
    /// Screening length of the sarcomere-length solve (mm); `None` uses the
    /// coarse mesh size.
    pub delta_sl_mm: Option<f64>,
    /// Relaxation time of `s` (s).
    pub tau_act: f64,
    /// Half-activation calcium and Hill exponent.
    pub ca50: f64,
    pub hill: f64,
    /// Relative gain per unit relative sarcomere stretch.
    pub length_gain: f64,
}

impl Default for ActivationParams {
    fn default() -> Self {
        ActivationParams {
            ta_max: 180e3,
            sl0_um: 2.0,
            delta_sl_mm: None,
            tau_act: 0.04,
            ca50: 1.3,
            hill: 3.0,
            length_gain: 1.5,
        }
    }
}

/// Pointwise kinetics of the activation state.
pub trait ActivationModel: Send + Sync {
    /// `ds/dt` at calcium `ca` and sarcomere length `sl` (μm).
    fn rate(&self, s: f64, ca: f64, sl: f64) -> f64;
    /// Force fraction `G(s) ∈ [0, 1]`.
    fn force_fraction(&self, s: f64) -> f64;
}

/// First-order relaxation toward a length-modulated Hill function of calcium.
#[derive(Clone, Copy, Debug, Default)]
pub struct FirstOrderActivation {
    pub p: ActivationParams,
}

impl FirstOrderActivation {
    pub fn target(&self, ca: f64, sl: f64) -> f64 {
        let c = ca.max(0.0).powf(self.p.hill);
        let hill = c / (c + self.p.ca50.powf(self.p.hill));
        let length = (1.0 + self.p.length_gain * (sl / self.p.sl0_um - 1.0)).clamp(0.0, 2.0);
        (hill * length).clamp(0.0, 1.0)
    }
}

impl ActivationModel for FirstOrderActivation {
    fn rate(&self, s: f64, ca: f64, sl: f64) -> f64 {
        (self.target(ca, sl) - s) / self.p.tau_act
    }

    fn force_fraction(&self, s: f64) -> f64 {
        s.clamp(0.0, 1.0)
    }
}

/// `s ← s + τ·K̄(s, Ca, SL)` at every node.
pub fn activation_step(model: &dyn ActivationModel, s: &mut [f64], ca: &[f64], sl: &[f64], tau: f64) -> Result<()> {
    if ca.len() != s.len() || sl.len() != s.len() {
        return Err(Error::DimensionMismatch {
            expected: s.len(),
            got: ca.len().min(sl.len()),
        });
    }
    par::for_each_mut(s, |i, si| *si += tau * model.rate(*si, ca[i], sl[i]));
    if let Some(i) = s.iter().position(|x| !x.is_finite()) {
        return Err(Error::StateBlowUp { field: "activation", dof: i });
    }
    Ok(())
}

/// `Ta = Ta_max·G(s)` at every node (Pa).
pub fn compute_ta(model: &dyn ActivationModel, s: &[f64], ta_max: f64) -> Vec<f64> {
    s.iter().map(|&x| ta_max * model.force_fraction(x)).collect()
}

/// Screened sarcomere-length problem `(M + δ²K) SL = ∫ SL₀√I_4f φ` with
/// natural boundary conditions, on a scalar space.
pub struct SarcomereSolver {
    pub space: FeSpace,
    pub table: RefTable,
    frames: Vec<FiberFrame>,
    matrix: CsrMatrix,
    pc: Ilu0,
    /// Inverse mean cell volume; the system is solved in this scaling.
    scale: f64,
    pub sl0: f64,
    pub delta_m: f64,
    pub solver: LinearSolverParams,
    pub solves: usize,
    last: Option<Vec<f64>>,
}

impl SarcomereSolver {
    pub fn new(space: FeSpace, fibers: &dyn FiberField, sl0: f64, delta_m: f64) -> Result<Self> {
        if !(sl0 > 0.0 && delta_m > 0.0) {
            return Err(Error::InvalidInput("SL₀ and δ_SL must be positive".into()));
        }
        let table = space.default_table();
        let frames = crate::ep::frames_at_quadrature(&space, &table, fibers);
        let mut matrix = pattern(&space, 1);
        let d2 = delta_m * delta_m;
        assemble(&space, &table, 1, Some(&mut matrix), None, |_, cv, ke, _| {
            let nl = cv.n_local;
            for q in 0..cv.n_points() {
                let (phi, g, w) = (cv.phi(q), cv.grad(q), cv.jxw[q]);
                for a in 0..nl {
                    for b in 0..nl {
                        let gg = g[a][0] * g[b][0] + g[a][1] * g[b][1] + g[a][2] * g[b][2];
                        ke[a * nl + b] += w * (phi[a] * phi[b] + d2 * gg);
                    }
                }
            }
            Ok(())
        })?;
        let volume: f64 = crate::fem::assemble_mass(&space, None)?.values().iter().sum();
        let scale = space.n_cells() as f64 / volume;
        matrix.scale(scale);
        let pc = Ilu0::new(&matrix)?;
        Ok(SarcomereSolver {
            space,
            table,
            frames,
            matrix,
            pc,
            scale,
            sl0,
            delta_m,
            solver: LinearSolverParams::gmres(1e-10),
            solves: 0,
            last: None,
        })
    }

    /// System matrix scaled by the inverse mean cell volume.
    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    /// Solves for SL (μm) given an interleaved displacement on the same space.
    pub fn solve(&mut self, d: Option<&[f64]>) -> Result<(Vec<f64>, SolveStats)> {
        let nq = self.table.n_points();
        let mut rhs = vec![0.0; self.space.n_dofs()];
        let (space, frames, sl0, scale) = (&self.space, &self.frames, self.sl0, self.scale);
        assemble(space, &self.table, 1, None, Some(&mut rhs), |cell, cv, _, fe| {
            let dofs = space.dofs(cell);
            for q in 0..nq {
                let stretch = match d {
                    None => 1.0,
                    Some(d) => {
                        let f = deformation_gradient(cv.grad(q), dofs, d);
                        let ff = f * nalgebra::Vector3::from(frames[cell * nq + q].f0);
                        ff.norm()
                    }
                };
                let v = sl0 * stretch * cv.jxw[q] * scale;
                for (a, p) in cv.phi(q).iter().enumerate() {
                    fe[a] += v * p;
                }
            }
            Ok(())
        })?;
        let mut x = self.last.clone().unwrap_or_else(|| vec![sl0; rhs.len()]);
        let stats = solve_gmres(&self.matrix, &rhs, &mut x, &self.solver, &self.pc)?;
        self.solves += 1;
        self.last = Some(x.clone());
        Ok((x, stats))
    }
}
