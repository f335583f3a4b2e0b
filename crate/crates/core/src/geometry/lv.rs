use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::mesh::{cross, BoundaryFacet, HexMesh, Tag};

/// Truncated prolate-spheroid shell (mm). The endocardium has semi-axes
/// `(r_endo_short, r_endo_long)`, the epicardium the same axes grown by the wall
/// thickness. The apex sits on the negative z axis and the base plane is
/// `z = base_height`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LvShape {
    pub r_endo_short: f64,
    pub r_endo_long: f64,
    pub wall_thickness: f64,
    pub base_height: f64,
}

pub type LvGeometry = LvShape;

impl Default for LvShape {
    fn default() -> Self {
        LvShape {
            r_endo_short: 20.0,
            r_endo_long: 60.0,
            wall_thickness: 10.0,
            base_height: 5.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LvResolution {
    pub n_transmural: usize,
    pub n_circumferential: usize,
    pub n_longitudinal: usize,
}

impl LvResolution {
    pub fn new(n_transmural: usize, n_circumferential: usize, n_longitudinal: usize) -> Self {
        LvResolution {
            n_transmural,
            n_circumferential,
            n_longitudinal,
        }
    }
}

impl LvShape {
    pub fn validate(&self) -> Result<()> {
        let ok = self.r_endo_short > 0.0
            && self.r_endo_long > 0.0
            && self.wall_thickness > 0.0
            && self.wall_thickness < self.r_endo_short;
        if !ok {
            return Err(Error::InvalidInput(format!(
                "ventricle needs positive radii and 0 < wall_thickness < r_endo_short, got {self:?}"
            )));
        }
        if !(self.base_height.abs() < self.r_endo_long) {
            return Err(Error::InvalidInput(format!(
                "base height {} must lie strictly inside the cavity",
                self.base_height
            )));
        }
        Ok(())
    }

    /// Semi-axes `(short, long)` of the spheroid at transmural depth `lambda`.
    pub fn semi_axes(&self, lambda: f64) -> (f64, f64) {
        let w = self.wall_thickness * lambda;
        (self.r_endo_short + w, self.r_endo_long + w)
    }

    /// Polar angle of the base ring on the surface at depth `lambda`.
    pub fn phi_max(&self, lambda: f64) -> f64 {
        let (_, c) = self.semi_axes(lambda);
        (-self.base_height / c).acos()
    }

    /// Surface point at depth `lambda`, azimuth `theta` and fraction `t` of the
    /// apex-to-base polar angle.
    pub fn point(&self, lambda: f64, theta: f64, t: f64) -> [f64; 3] {
        let (a, c) = self.semi_axes(lambda);
        let phi = t * self.phi_max(lambda);
        [
            a * phi.sin() * theta.cos(),
            a * phi.sin() * theta.sin(),
            -c * phi.cos(),
        ]
    }

    /// Transmural coordinate of `x` (mm): the depth whose spheroid passes
    /// through `x`, clamped to `[0, 1]`.
    pub fn lambda_at(&self, x: [f64; 3]) -> f64 {
        let rho2 = x[0] * x[0] + x[1] * x[1];
        let g = |l: f64| {
            let (a, c) = self.semi_axes(l);
            rho2 / (a * a) + x[2] * x[2] / (c * c) - 1.0
        };
        // g is strictly decreasing in lambda; bracket generously then bisect.
        let (mut lo, mut hi) = (-1.0, 2.0);
        if g(lo) < 0.0 {
            return 0.0;
        }
        if g(hi) > 0.0 {
            return 1.0;
        }
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if g(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        (0.5 * (lo + hi)).clamp(0.0, 1.0)
    }

    /// Orthonormal local basis `(circumferential, longitudinal, transmural)` at
    /// `x`, right-handed, with the longitudinal direction pointing apex to base
    /// and the transmural direction pointing outward.
    pub fn local_basis(&self, x: [f64; 3]) -> [[f64; 3]; 3] {
        let lambda = self.lambda_at(x);
        let (a, c) = self.semi_axes(lambda);
        let et = normalize([x[0] / (a * a), x[1] / (a * a), x[2] / (c * c)]);
        let rho = (x[0] * x[0] + x[1] * x[1]).sqrt();
        let ec = if rho > 1e-9 * a {
            [-x[1] / rho, x[0] / rho, 0.0]
        } else {
            [0.0, 1.0, 0.0]
        };
        // Remove any transmural component so the basis is exactly orthonormal.
        let d = dot(ec, et);
        let ec = normalize([ec[0] - d * et[0], ec[1] - d * et[1], ec[2] - d * et[2]]);
        let el = cross(et, ec);
        [ec, el, et]
    }

    /// Analytic cavity volume (mm³) of the truncated endocardial spheroid.
    pub fn cavity_volume(&self) -> f64 {
        let (a, c) = self.semi_axes(0.0);
        let zb = self.base_height;
        PI * a * a * ((zb + c) - (zb.powi(3) + c.powi(3)) / (3.0 * c * c))
    }
}

pub(crate) fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn normalize(a: [f64; 3]) -> [f64; 3] {
    let n = dot(a, a).sqrt();
    [a[0] / n, a[1] / n, a[2] / n]
}

/// Hexahedral mesh of the truncated prolate-spheroid shell. Cells are laid
/// out with ξ transmural, η circumferential and ζ apex-to-base; the first
/// longitudinal layer collapses onto one apex vertex per transmural level.
pub fn generate_idealized_lv(shape: &LvShape, res: &LvResolution) -> Result<HexMesh> {
    shape.validate()?;
    let (nt, nc, nl) = (res.n_transmural, res.n_circumferential, res.n_longitudinal);
    if nt == 0 || nc < 3 || nl == 0 {
        return Err(Error::InvalidInput(format!(
            "resolution needs n_transmural ≥ 1, n_circumferential ≥ 3, n_longitudinal ≥ 1, got {res:?}"
        )));
    }
    let per_level = 1 + nc * nl;
    let vid = |i: usize, j: usize, l: usize| {
        if l == 0 {
            i * per_level
        } else {
            i * per_level + 1 + (l - 1) * nc + (j % nc)
        }
    };
    let mut vertices = Vec::with_capacity((nt + 1) * per_level);
    for i in 0..=nt {
        let lambda = i as f64 / nt as f64;
        vertices.push(shape.point(lambda, 0.0, 0.0));
        for l in 1..=nl {
            for j in 0..nc {
                let theta = 2.0 * PI * j as f64 / nc as f64;
                vertices.push(shape.point(lambda, theta, l as f64 / nl as f64));
            }
        }
    }
    let mut cells = Vec::with_capacity(nt * nc * nl);
    let mut boundary_facets = Vec::new();
    for l in 0..nl {
        for j in 0..nc {
            for i in 0..nt {
                let c = cells.len();
                let mut cell = [0; 8];
                for (loc, v) in cell.iter_mut().enumerate() {
                    *v = vid(i + (loc & 1), j + ((loc >> 1) & 1), l + ((loc >> 2) & 1));
                }
                cells.push(cell);
                if i == 0 {
                    boundary_facets.push(BoundaryFacet { cell: c, face: 0, tag: Tag::Endo });
                }
                if i == nt - 1 {
                    boundary_facets.push(BoundaryFacet { cell: c, face: 1, tag: Tag::Epi });
                }
                if l == nl - 1 {
                    boundary_facets.push(BoundaryFacet { cell: c, face: 5, tag: Tag::Base });
                }
            }
        }
    }
    let mesh = HexMesh {
        vertices,
        cells,
        boundary_facets,
        level: 0,
        shape: Some(*shape),
    };
    check_jacobians(&mesh)?;
    Ok(mesh)
}

/// Verifies a positive trilinear Jacobian at the 2- and 3-point Gauss points.
pub(crate) fn check_jacobians(mesh: &HexMesh) -> Result<()> {
    let mut pts = Vec::new();
    for rule in [gauss_nodes(2), gauss_nodes(3)] {
        for &a in &rule {
            for &b in &rule {
                for &c in &rule {
                    pts.push([a, b, c]);
                }
            }
        }
    }
    for cell in 0..mesh.n_cells() {
        let x = mesh.cell_coords(cell);
        for xi in &pts {
            let j = det3(&trilinear_jacobian(&x, *xi));
            if !(j > 0.0) {
                return Err(Error::DegenerateCell { cell, jacobian: j });
            }
        }
    }
    Ok(())
}

fn gauss_nodes(n: usize) -> Vec<f64> {
    match n {
        2 => {
            let g = 0.5 / 3f64.sqrt();
            vec![0.5 - g, 0.5 + g]
        }
        _ => {
            let g = 0.5 * (0.6f64).sqrt();
            vec![0.5 - g, 0.5, 0.5 + g]
        }
    }
}

/// `∂x/∂ξ` of the trilinear map, as rows `[∂x/∂ξ_k]` transposed into
/// `jac[a][k] = ∂x_a/∂ξ_k`.
pub fn trilinear_jacobian(x: &[[f64; 3]; 8], xi: [f64; 3]) -> [[f64; 3]; 3] {
    let mut jac = [[0.0; 3]; 3];
    for (loc, xv) in x.iter().enumerate() {
        let bits = [loc & 1, (loc >> 1) & 1, (loc >> 2) & 1];
        let l = |d: usize| if bits[d] == 1 { xi[d] } else { 1.0 - xi[d] };
        let dl = |d: usize| if bits[d] == 1 { 1.0 } else { -1.0 };
        let g = [dl(0) * l(1) * l(2), l(0) * dl(1) * l(2), l(0) * l(1) * dl(2)];
        for a in 0..3 {
            for k in 0..3 {
                jac[a][k] += xv[a] * g[k];
            }
        }
    }
    jac
}

/// Trilinear map evaluated at `xi`.
pub fn trilinear_map(x: &[[f64; 3]; 8], xi: [f64; 3]) -> [f64; 3] {
    let mut out = [0.0; 3];
    for (loc, xv) in x.iter().enumerate() {
        let mut w = 1.0;
        for d in 0..3 {
            w *= if (loc >> d) & 1 == 1 { xi[d] } else { 1.0 - xi[d] };
        }
        for a in 0..3 {
            out[a] += w * xv[a];
        }
    }
    out
}

pub fn det3(m: &[[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}
