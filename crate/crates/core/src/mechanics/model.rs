use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use nalgebra::{Matrix3, Vector3};

use crate::ep::frames_at_quadrature;
use crate::error::{Error, Result};
use crate::fem::assembly::{assemble, pattern, scatter};
use crate::fem::kinematics::deformation_gradient;
use crate::fem::space::{FeSpace, RefTable};
use crate::fem::CsrMatrix;
use crate::geometry::{FiberField, FiberFrame, HexMesh, Tag};
use crate::par;

use super::material::MechParams;
use super::surface::{current_geometry, dnormal, facet_quadrature, FaceQuad};

/// Displacement history and cavity pressure carried between time steps.
#[derive(Clone, Debug, PartialEq)]
pub struct MechState {
    pub d_n: Vec<f64>,
    pub d_nm1: Vec<f64>,
    /// Pa.
    pub p_lv: f64,
}

impl MechState {
    /// At rest in `d`: `dⁿ⁻¹ = dⁿ = d`.
    pub fn at_rest(d: Vec<f64>, p_lv: f64) -> Self {
        MechState {
            d_nm1: d.clone(),
            d_n: d,
            p_lv,
        }
    }
}

#[derive(Debug, Default)]
pub struct MechCounters {
    pub residuals: AtomicUsize,
    pub jacobians: AtomicUsize,
    pub linear_solves: AtomicUsize,
    pub newton_iterations: AtomicUsize,
}

impl MechCounters {
    pub fn get(c: &AtomicUsize) -> usize {
        c.load(Ordering::Relaxed)
    }

    pub(crate) fn bump(c: &AtomicUsize) {
        c.fetch_add(1, Ordering::Relaxed);
    }
}

/// Hyperelastic myocardium on a vector Lagrange space with interleaved dofs.
pub struct Mechanics {
    space: FeSpace,
    table: RefTable,
    frames: Vec<FiberFrame>,
    pub params: MechParams,
    mass: CsrMatrix,
    support: CsrMatrix,
    damping: CsrMatrix,
    endo: Vec<FaceQuad>,
    base: Vec<FaceQuad>,
    pub counters: MechCounters,
}

impl Mechanics {
    /// Q1 displacement on `mesh`, fibers sampled at the quadrature points.
    pub fn new(mesh: Arc<HexMesh>, fibers: &dyn FiberField, params: MechParams) -> Result<Self> {
        let space = FeSpace::new(mesh, 1);
        let table = space.ref_table(space.degree() + 2);
        let frames = frames_at_quadrature(&space, &table, fibers);
        Self::build(space, table, frames, params)
    }

    fn build(space: FeSpace, table: RefTable, frames: Vec<FiberFrame>, params: MechParams) -> Result<Self> {
        params.validate()?;
        let n_1d = space.degree() + 2;
        let endo = facet_quadrature(&space, Tag::Endo, n_1d);
        let base = facet_quadrature(&space, Tag::Base, n_1d);
        let epi = facet_quadrature(&space, Tag::Epi, n_1d);
        let mut mass = pattern(&space, 3);
        assemble(&space, &table, 3, Some(&mut mass), None, |_, cv, ke, _| {
            let nl = cv.n_local;
            let n = 3 * nl;
            for q in 0..cv.n_points() {
                let phi = cv.phi(q);
                for a in 0..nl {
                    for b in 0..nl {
                        let m = phi[a] * phi[b] * cv.jxw[q];
                        for c in 0..3 {
                            ke[(3 * a + c) * n + 3 * b + c] += m;
                        }
                    }
                }
            }
            Ok(())
        })?;
        let support = robin_matrix(&space, &epi, params.k_perp, params.k_par, &mass);
        let damping = robin_matrix(&space, &epi, params.c_perp, params.c_par, &mass);
        Ok(Mechanics {
            space,
            table,
            frames,
            params,
            mass,
            support,
            damping,
            endo,
            base,
            counters: MechCounters::default(),
        })
    }

    /// Same material points and fibers on new reference coordinates (m).
    pub fn with_reference(&self, coords_m: Vec<[f64; 3]>) -> Result<Self> {
        let space = self.space.with_vertex_coords(coords_m)?;
        let table = space.ref_table(space.degree() + 2);
        Self::build(space, table, self.frames.clone(), self.params)
    }

    pub fn space(&self) -> &FeSpace {
        &self.space
    }

    pub fn n_dofs(&self) -> usize {
        3 * self.space.n_dofs()
    }

    pub fn frames(&self) -> &[FiberFrame] {
        &self.frames
    }

    pub fn table(&self) -> &RefTable {
        &self.table
    }

    /// Unit-density vector mass matrix.
    pub fn mass(&self) -> &CsrMatrix {
        &self.mass
    }

    /// Epicardial spring matrix `G`.
    pub fn support(&self) -> &CsrMatrix {
        &self.support
    }

    /// Epicardial damping matrix `F`.
    pub fn damping(&self) -> &CsrMatrix {
        &self.damping
    }

    pub fn endo_quadrature(&self) -> &[FaceQuad] {
        &self.endo
    }

    pub fn zero_matrix(&self) -> CsrMatrix {
        self.mass.zeros_like()
    }

    fn check_len(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.n_dofs() {
            return Err(Error::DimensionMismatch {
                expected: self.n_dofs(),
                got: v.len(),
            });
        }
        Ok(())
    }

    /// Internal forces `S(d, Ta)` and optionally their tangent. `ta` is nodal
    /// (Pa) on the scalar space; `None` means no active tension.
    pub fn internal_forces(&self, d: &[f64], ta: Option<&[f64]>, out: &mut [f64], jac: Option<&mut CsrMatrix>) -> Result<()> {
        self.check_len(d)?;
        self.check_len(out)?;
        if let Some(t) = ta {
            if t.len() != self.space.n_dofs() {
                return Err(Error::DimensionMismatch {
                    expected: self.space.n_dofs(),
                    got: t.len(),
                });
            }
        }
        let want_jac = jac.is_some();
        let nq = self.table.n_points();
        let kernel = |cell: usize, cv: &crate::fem::CellValues, ke: &mut [f64], fe: &mut [f64]| -> Result<()> {
            let nl = cv.n_local;
            let n = 3 * nl;
            let dofs = self.space.dofs(cell);
            for q in 0..nq {
                let g = cv.grad(q);
                let f = deformation_gradient(g, dofs, d);
                let j = f.determinant();
                if !(j > 0.0) {
                    return Err(Error::InvertedElement {
                        cell,
                        point: cv.x[q],
                        jacobian: j,
                    });
                }
                let t = ta.map_or(0.0, |t| cv.phi(q).iter().zip(dofs).map(|(p, &k)| p * t[k]).sum());
                let sp = self.params.stress(&f, &self.frames[cell * nq + q], t)?;
                let w = cv.jxw[q];
                for a in 0..nl {
                    let ga = Vector3::from(g[a]);
                    let pa = sp.p * ga * w;
                    for c in 0..3 {
                        fe[3 * a + c] += pa[c];
                    }
                }
                if want_jac {
                    for b in 0..nl {
                        for e in 0..3 {
                            let mut df = Matrix3::zeros();
                            for k in 0..3 {
                                df[(e, k)] = g[b][k];
                            }
                            let dp = sp.tangent(&df);
                            let col = 3 * b + e;
                            for a in 0..nl {
                                let v = dp * Vector3::from(g[a]) * w;
                                for c in 0..3 {
                                    ke[(3 * a + c) * n + col] += v[c];
                                }
                            }
                        }
                    }
                }
            }
            Ok(())
        };
        assemble(&self.space, &self.table, 3, jac, Some(out), kernel)
    }

    /// `v_base = ∫_endo J F⁻ᵀ N / ∫_base |J F⁻ᵀ N|` in the configuration `d`.
    pub fn compute_vbase(&self, d: Option<&[f64]>) -> Result<Vector3<f64>> {
        if let Some(d) = d {
            self.check_len(d)?;
        }
        let mut num = Vector3::zeros();
        for fq in &self.endo {
            let dofs = self.space.dofs(fq.cell);
            for pt in &fq.points {
                let [_, xu, xv] = current_geometry(&self.space, dofs, pt, d);
                num += xu.cross(&xv) * pt.weight;
            }
        }
        let mut den = 0.0;
        for fq in &self.base {
            let dofs = self.space.dofs(fq.cell);
            for pt in &fq.points {
                let [_, xu, xv] = current_geometry(&self.space, dofs, pt, d);
                den += xu.cross(&xv).norm() * pt.weight;
            }
        }
        if !(den > 0.0) {
            return Err(Error::ZeroBaseArea);
        }
        Ok(num / den)
    }

    /// Adds `scale·p(d)` to `out` and, if given, `scale·∂p/∂d` (with `v_base`
    /// held fixed) to `jac`. `p(d) = −∫_endo J F⁻ᵀ N·φ + ∫_base |J F⁻ᵀ N| v_base·φ`.
    pub fn add_pressure_load(
        &self,
        d: &[f64],
        vbase: &Vector3<f64>,
        scale: f64,
        out: &mut [f64],
        mut jac: Option<&mut CsrMatrix>,
    ) -> Result<()> {
        self.check_len(d)?;
        self.check_len(out)?;
        let want_jac = jac.is_some();
        let nl = self.space.n_local();
        let n = 3 * nl;
        let facets: Vec<(bool, &FaceQuad)> = self
            .endo
            .iter()
            .map(|f| (true, f))
            .chain(self.base.iter().map(|f| (false, f)))
            .collect();
        let locals: Vec<(Vec<f64>, Vec<f64>)> = par::map_indexed(facets.len(), |k| {
            let (is_endo, fq) = facets[k];
            let dofs = self.space.dofs(fq.cell);
            let mut fe = vec![0.0; n];
            let mut ke = if want_jac { vec![0.0; n * n] } else { Vec::new() };
            for pt in &fq.points {
                let [_, xu, xv] = current_geometry(&self.space, dofs, pt, Some(d));
                let nrm = xu.cross(&xv);
                let area = nrm.norm();
                let w = pt.weight * scale;
                let force = if is_endo { -nrm } else { vbase * area };
                for a in 0..nl {
                    for c in 0..3 {
                        fe[3 * a + c] += w * pt.phi[a] * force[c];
                    }
                }
                if want_jac {
                    for b in 0..nl {
                        if pt.du[b] == 0.0 && pt.dv[b] == 0.0 {
                            continue;
                        }
                        for e in 0..3 {
                            let dn = dnormal(pt, b, e, &xu, &xv);
                            let dforce = if is_endo {
                                -dn
                            } else if area > 0.0 {
                                vbase * (nrm.dot(&dn) / area)
                            } else {
                                Vector3::zeros()
                            };
                            let col = 3 * b + e;
                            for a in 0..nl {
                                for c in 0..3 {
                                    ke[(3 * a + c) * n + col] += w * pt.phi[a] * dforce[c];
                                }
                            }
                        }
                    }
                }
            }
            (fe, ke)
        });
        for ((_, fq), (fe, ke)) in facets.iter().zip(locals) {
            let gidx: Vec<usize> = self
                .space
                .dofs(fq.cell)
                .iter()
                .flat_map(|&k| (0..3).map(move |c| 3 * k + c))
                .collect();
            for (a, &i) in gidx.iter().enumerate() {
                out[i] += fe[a];
            }
            if let Some(m) = jac.as_deref_mut() {
                scatter(m, &gidx, &ke);
            }
        }
        Ok(())
    }

    /// The pressure load vector `p(d)`.
    pub fn pressure_load(&self, d: &[f64]) -> Result<Vec<f64>> {
        let vb = self.compute_vbase(Some(d))?;
        let mut out = vec![0.0; self.n_dofs()];
        self.add_pressure_load(d, &vb, 1.0, &mut out, None)?;
        Ok(out)
    }

    /// Quasi-static residual `G d + S(d, Ta) − p·p(d)` and optionally its
    /// Jacobian (with the `v_base` derivative dropped).
    pub fn static_residual(
        &self,
        d: &[f64],
        p: f64,
        ta: Option<&[f64]>,
        mut jac: Option<&mut CsrMatrix>,
    ) -> Result<Vec<f64>> {
        MechCounters::bump(&self.counters.residuals);
        let mut r = vec![0.0; self.n_dofs()];
        self.internal_forces(d, ta, &mut r, jac.as_deref_mut())?;
        let gd = self.support.mul_vec(d);
        par::for_each_mut(&mut r, |i, ri| *ri += gd[i]);
        if let Some(m) = jac.as_deref_mut() {
            MechCounters::bump(&self.counters.jacobians);
            m.add_scaled(1.0, &self.support)?;
        }
        if p != 0.0 {
            let vb = self.compute_vbase(Some(d))?;
            self.add_pressure_load(d, &vb, -p, &mut r, jac)?;
        }
        Ok(r)
    }

    /// Residual of the implicit second-order time discretization at
    /// `(d, p)`, given `dⁿ`, `dⁿ⁻¹` in `state`.
    pub fn dynamic_residual(
        &self,
        d: &[f64],
        p: f64,
        state: &MechState,
        ta: Option<&[f64]>,
        dt: f64,
        mut jac: Option<&mut CsrMatrix>,
    ) -> Result<Vec<f64>> {
        self.check_len(&state.d_n)?;
        self.check_len(&state.d_nm1)?;
        if !(dt > 0.0) {
            return Err(Error::InvalidInput(format!("time step must be positive, got {dt}")));
        }
        let mut r = self.static_residual(d, p, ta, jac.as_deref_mut())?;
        let rho = self.params.rho;
        let acc: Vec<f64> = (0..d.len())
            .map(|i| (rho / (dt * dt)) * (d[i] - 2.0 * state.d_n[i] + state.d_nm1[i]))
            .collect();
        let vel: Vec<f64> = (0..d.len()).map(|i| (d[i] - state.d_n[i]) / dt).collect();
        let ma = self.mass.mul_vec(&acc);
        let fv = self.damping.mul_vec(&vel);
        par::for_each_mut(&mut r, |i, ri| *ri += ma[i] + fv[i]);
        if let Some(m) = jac {
            m.add_scaled(rho / (dt * dt), &self.mass)?;
            m.add_scaled(1.0 / dt, &self.damping)?;
        }
        Ok(r)
    }

    /// Solid volume `∫ J` in the configuration `d` (m³).
    pub fn solid_volume(&self, d: &[f64]) -> Result<f64> {
        self.check_len(d)?;
        let nq = self.table.n_points();
        let parts: Vec<Result<f64>> = par::map_indexed(self.space.n_cells(), |cell| {
            let mut cv = crate::fem::CellValues::default();
            self.space.cell_values(cell, &self.table, &mut cv)?;
            let dofs = self.space.dofs(cell);
            Ok((0..nq)
                .map(|q| deformation_gradient(cv.grad(q), dofs, d).determinant() * cv.jxw[q])
                .sum())
        });
        let mut s = 0.0;
        for p in parts {
            s += p?;
        }
        Ok(s)
    }
}

/// `∫_epi (k⊥ N⊗N + k∥ (I − N⊗N)) φ_j φ_i` on the reference configuration.
fn robin_matrix(space: &FeSpace, epi: &[FaceQuad], k_perp: f64, k_par: f64, like: &CsrMatrix) -> CsrMatrix {
    let mut m = like.zeros_like();
    let nl = space.n_local();
    let n = 3 * nl;
    for fq in epi {
        let dofs = space.dofs(fq.cell);
        let mut ke = vec![0.0; n * n];
        for pt in &fq.points {
            let [_, xu, xv] = current_geometry(space, dofs, pt, None);
            let nv = xu.cross(&xv);
            let area = nv.norm();
            if area == 0.0 {
                continue;
            }
            let nn = nv / area;
            let k = nn * nn.transpose() * k_perp + (Matrix3::identity() - nn * nn.transpose()) * k_par;
            let w = area * pt.weight;
            for a in 0..nl {
                for b in 0..nl {
                    let s = pt.phi[a] * pt.phi[b] * w;
                    if s == 0.0 {
                        continue;
                    }
                    for c in 0..3 {
                        for e in 0..3 {
                            ke[(3 * a + c) * n + 3 * b + e] += s * k[(c, e)];
                        }
                    }
                }
            }
        }
        let gidx: Vec<usize> = dofs.iter().flat_map(|&k| (0..3).map(move |c| 3 * k + c)).collect();
        scatter(&mut m, &gidx, &ke);
    }
    m
}
