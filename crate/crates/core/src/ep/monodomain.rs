use std::sync::Arc;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::assembly::{assemble, assemble_mass, pattern};
use crate::fem::kinematics::deformation_gradient;
use crate::fem::space::{FeSpace, RefTable};
use crate::fem::{solve_cg, CsrMatrix, Jacobi, LinearSolverParams, SolveStats};
use crate::geometry::{FiberField, FiberFrame};
use crate::units::M_PER_MM;

use super::ionic::{ionic_step, EpState, IonicModel};
use super::stimulus::Stimulus;

/// Conductivities along fiber, sheet and sheet-normal directions (m²/s).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Conductivity {
    pub sigma_l: f64,
    pub sigma_t: f64,
    pub sigma_n: f64,
}

impl Default for Conductivity {
    fn default() -> Self {
        Conductivity {
            sigma_l: 0.7643e-3,
            sigma_t: 0.3494e-3,
            sigma_n: 0.1125e-3,
        }
    }
}

impl Conductivity {
    pub fn isotropic(sigma: f64) -> Self {
        Conductivity {
            sigma_l: sigma,
            sigma_t: sigma,
            sigma_n: sigma,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_n > 0.0 && self.sigma_t >= self.sigma_n && self.sigma_l >= self.sigma_t) {
            return Err(Error::InvalidInput(format!(
                "conductivities must satisfy σ_l ≥ σ_t ≥ σ_n > 0, got {self:?}"
            )));
        }
        Ok(())
    }

    /// `σ_l f⊗f + σ_t s⊗s + σ_n n⊗n`
    pub fn tensor(&self, fr: &FiberFrame) -> Matrix3<f64> {
        let outer = |a: [f64; 3]| {
            let v = Vector3::from(a);
            v * v.transpose()
        };
        outer(fr.f0) * self.sigma_l + outer(fr.s0) * self.sigma_t + outer(fr.n0) * self.sigma_n
    }
}

/// Operation counters of the electrophysiology block.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct EpCounters {
    pub ionic_steps: usize,
    pub linear_solves: usize,
    pub stiffness_assemblies: usize,
    pub nonlinear_iterations: usize,
}

/// Frames at the quadrature points of every cell, evaluated at reference positions.
pub fn frames_at_quadrature(space: &FeSpace, table: &RefTable, fibers: &dyn FiberField) -> Vec<FiberFrame> {
    let nq = table.n_points();
    crate::par::map_indexed(space.n_cells() * nq, |k| {
        let (c, q) = (k / nq, k % nq);
        let x = space.map_point(c, table.rule.points[q]);
        fibers.frame_at(x.map(|v| v / M_PER_MM))
    })
}

/// `K_ij(d) = ∫ J F⁻¹ D F⁻ᵀ ∇φ_j · ∇φ_i` on the reference configuration.
/// `d` is an interleaved vector field on `space`; `None` means `d = 0`.
pub fn assemble_stiffness_deformed(
    space: &FeSpace,
    table: &RefTable,
    frames: &[FiberFrame],
    sigma: &Conductivity,
    d: Option<&[f64]>,
    out: &mut CsrMatrix,
) -> Result<()> {
    if let Some(d) = d {
        if d.len() != 3 * space.n_dofs() {
            return Err(Error::DimensionMismatch {
                expected: 3 * space.n_dofs(),
                got: d.len(),
            });
        }
    }
    let nq = table.n_points();
    assemble(space, table, 1, Some(out), None, |cell, cv, ke, _| {
        let nl = cv.n_local;
        let dofs = space.dofs(cell);
        for q in 0..nq {
            let g = cv.grad(q);
            let dm = sigma.tensor(&frames[cell * nq + q]);
            let coef = match d {
                None => dm,
                Some(d) => {
                    let f = deformation_gradient(g, dofs, d);
                    let j = f.determinant();
                    if !(j > 0.0) {
                        return Err(Error::InvertedElement {
                            cell,
                            point: cv.x[q],
                            jacobian: j,
                        });
                    }
                    let fi = f.try_inverse().expect("det > 0");
                    fi * dm * fi.transpose() * j
                }
            };
            let w = cv.jxw[q];
            for b in 0..nl {
                let gb = coef * Vector3::from(g[b]);
                for a in 0..nl {
                    ke[a * nl + b] += w * (gb[0] * g[a][0] + gb[1] * g[a][1] + gb[2] * g[a][2]);
                }
            }
        }
        Ok(())
    })
}

/// Monodomain problem on a fixed fine space.
pub struct Monodomain {
    pub space: FeSpace,
    pub table: RefTable,
    pub frames: Vec<FiberFrame>,
    pub sigma: Conductivity,
    pub stimulus: Stimulus,
    pub model: Arc<dyn IonicModel>,
    pub solver: LinearSolverParams,
    pub counters: EpCounters,
    mass: CsrMatrix,
    stiffness: CsrMatrix,
    system: Option<(f64, CsrMatrix, Jacobi)>,
    stim_profile: Vec<f64>,
    /// Inverse mean cell volume.
    vol_scale: f64,
}

impl Monodomain {
    pub fn new(
        space: FeSpace,
        fibers: &dyn FiberField,
        sigma: Conductivity,
        stimulus: Stimulus,
        model: Arc<dyn IonicModel>,
    ) -> Result<Self> {
        sigma.validate()?;
        let table = space.default_table();
        let frames = frames_at_quadrature(&space, &table, fibers);
        let mass = assemble_mass(&space, None)?;
        let stiffness = pattern(&space, 1);
        let vol_scale = space.n_cells() as f64 / mass.values().iter().sum::<f64>();
        let stim_profile = space
            .dof_points()
            .iter()
            .map(|x| stimulus.profile(x.map(|v| v / M_PER_MM)))
            .collect();
        let mut m = Monodomain {
            space,
            table,
            frames,
            sigma,
            stimulus,
            model,
            solver: LinearSolverParams::cg(1e-10),
            counters: EpCounters::default(),
            mass,
            stiffness,
            system: None,
            stim_profile,
            vol_scale,
        };
        m.update_deformation(None)?;
        Ok(m)
    }

    pub fn mass(&self) -> &CsrMatrix {
        &self.mass
    }

    pub fn stiffness(&self) -> &CsrMatrix {
        &self.stiffness
    }

    pub fn resting_state(&self) -> EpState {
        EpState::resting(self.model.as_ref(), self.space.n_dofs())
    }

    /// Reassembles `K(d)` for a displacement interpolated on this space.
    pub fn update_deformation(&mut self, d: Option<&[f64]>) -> Result<()> {
        assemble_stiffness_deformed(&self.space, &self.table, &self.frames, &self.sigma, d, &mut self.stiffness)?;
        self.counters.stiffness_assemblies += 1;
        self.system = None;
        Ok(())
    }

    /// Ionic update followed by the potential update; advances `state.t`.
    pub fn step(&mut self, state: &mut EpState, tau: f64) -> Result<SolveStats> {
        self.ionic(state, tau)?;
        self.potential(state, tau)
    }

    pub fn ionic(&mut self, state: &mut EpState, tau: f64) -> Result<()> {
        ionic_step(self.model.as_ref(), state, tau)?;
        self.counters.ionic_steps += 1;
        Ok(())
    }

    /// Solves `(M/τ + K + M_{I_u}) u = M uⁿ/τ − M Ĩ + M I_app(t+τ)` and sets
    /// `state.t += τ`. The ionic terms use nodal values interpolated by the
    /// shape functions. The system is multiplied by `τ/V̄` (V̄ the mean cell
    /// volume) before solving, so the absolute tolerance acts on an O(1)
    /// scaled residual.
    pub fn potential(&mut self, state: &mut EpState, tau: f64) -> Result<SolveStats> {
        let model = self.model.as_ref();
        let (nw, nz) = (model.n_w(), model.n_z());
        let n = self.space.n_dofs();
        let t_new = state.t + tau;
        let split: Vec<(f64, f64)> = crate::par::map_indexed(n, |i| {
            model.current_split(state.u[i], &state.w[i * nw..(i + 1) * nw], &state.z[i * nz..(i + 1) * nz])
        });
        let stim_on = self.stimulus.is_on(t_new);
        let nodal: Vec<f64> = (0..n)
            .map(|i| {
                let app = if stim_on { self.stim_profile[i] } else { 0.0 };
                state.u[i] / tau - split[i].1 + app
            })
            .collect();
        let sc = tau * self.vol_scale;
        let mut rhs = self.mass.mul_vec(&nodal);
        rhs.iter_mut().for_each(|r| *r *= sc);

        let constant = model.constant_linear_coefficient();
        let rebuild = match (&self.system, constant) {
            (Some((t, _, _)), Some(_)) => *t != tau,
            _ => true,
        };
        if rebuild {
            let mut a = self.stiffness.clone();
            match constant {
                Some(c) => a.add_scaled(1.0 / tau + c, &self.mass)?,
                None => {
                    let coef: Vec<f64> = split.iter().map(|s| s.0).collect();
                    a.add_scaled(1.0 / tau, &self.mass)?;
                    a.add_scaled(1.0, &assemble_mass(&self.space, Some(&coef))?)?;
                }
            }
            a.scale(sc);
            let pc = Jacobi::new(&a);
            self.system = Some((tau, a, pc));
        }
        let (_, a, pc) = self.system.as_ref().expect("system assembled above");
        let mut u = state.u.clone();
        let stats = solve_cg(a, &rhs, &mut u, &self.solver, pc).map_err(|e| e.at_step(t_new, "monodomain"))?;
        self.counters.linear_solves += 1;
        if let Some(i) = u.iter().position(|x| !x.is_finite()) {
            return Err(Error::StateBlowUp { field: "potential", dof: i });
        }
        state.u = u;
        state.t = t_new;
        Ok(stats)
    }
}
