use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::lv::{dot, LvShape};
use super::mesh::{cross, HexMesh};

/// Orthonormal fiber, sheet and sheet-normal directions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FiberFrame {
    pub f0: [f64; 3],
    pub s0: [f64; 3],
    pub n0: [f64; 3],
}

impl FiberFrame {
    pub const IDENTITY: FiberFrame = FiberFrame {
        f0: [1.0, 0.0, 0.0],
        s0: [0.0, 1.0, 0.0],
        n0: [0.0, 0.0, 1.0],
    };

    pub fn det(&self) -> f64 {
        dot(self.f0, cross(self.s0, self.n0))
    }

    pub fn dir(&self, k: usize) -> [f64; 3] {
        match k {
            0 => self.f0,
            1 => self.s0,
            _ => self.n0,
        }
    }
}

/// Source of fiber frames at reference-configuration points (mm).
pub trait FiberField: Send + Sync {
    fn frame_at(&self, x_mm: [f64; 3]) -> FiberFrame;
}

/// Same frame everywhere; used for slabs and single-element tests.
#[derive(Clone, Copy, Debug)]
pub struct UniformFibers(pub FiberFrame);

impl FiberField for UniformFibers {
    fn frame_at(&self, _x: [f64; 3]) -> FiberFrame {
        self.0
    }
}

/// Helix and sheet angles (degrees) at the endocardium and epicardium.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FiberParams {
    pub alpha_endo_deg: f64,
    pub alpha_epi_deg: f64,
    pub beta_endo_deg: f64,
    pub beta_epi_deg: f64,
}

impl Default for FiberParams {
    fn default() -> Self {
        FiberParams {
            alpha_endo_deg: 60.0,
            alpha_epi_deg: -60.0,
            beta_endo_deg: -20.0,
            beta_epi_deg: 20.0,
        }
    }
}

impl FiberParams {
    pub fn helix_deg(&self, lambda: f64) -> f64 {
        self.alpha_endo_deg * (1.0 - lambda) + self.alpha_epi_deg * lambda
    }

    pub fn sheet_deg(&self, lambda: f64) -> f64 {
        self.beta_endo_deg * (1.0 - lambda) + self.beta_epi_deg * lambda
    }
}

/// Analytic rule-based fibers on the spheroidal parametrization: the fiber
/// is rotated by the helix angle from the circumferential direction toward
/// the longitudinal one, and the sheet is tilted by the sheet angle out of the
/// transmural direction about the fiber.
#[derive(Clone, Copy, Debug)]
pub struct RuleBasedFibers {
    pub shape: LvShape,
    pub params: FiberParams,
}

impl RuleBasedFibers {
    /// Fails for meshes without an analytic ventricle parametrization.
    pub fn for_mesh(mesh: &HexMesh, params: FiberParams) -> Result<Self> {
        let shape = mesh.shape.ok_or_else(|| {
            Error::Unsupported("rule-based fibers need an idealized ventricle parametrization".into())
        })?;
        Ok(RuleBasedFibers { shape, params })
    }

    /// Frames at every mesh vertex.
    pub fn at_vertices(&self, mesh: &HexMesh) -> Vec<FiberFrame> {
        crate::par::map_indexed(mesh.n_vertices(), |v| self.frame_at(mesh.vertices[v]))
    }
}

impl FiberField for RuleBasedFibers {
    fn frame_at(&self, x: [f64; 3]) -> FiberFrame {
        let lambda = self.shape.lambda_at(x);
        let [ec, el, et] = self.shape.local_basis(x);
        let a = self.params.helix_deg(lambda).to_radians();
        let b = self.params.sheet_deg(lambda).to_radians();
        let (sa, ca) = a.sin_cos();
        let (sb, cb) = b.sin_cos();
        let f0 = lin2(ca, ec, sa, el);
        let g = lin2(-sa, ec, ca, el);
        let s0 = lin2(cb, et, sb, g);
        let n0 = cross(f0, s0);
        FiberFrame { f0, s0, n0 }
    }
}

fn lin2(a: f64, x: [f64; 3], b: f64, y: [f64; 3]) -> [f64; 3] {
    [a * x[0] + b * y[0], a * x[1] + b * y[1], a * x[2] + b * y[2]]
}
