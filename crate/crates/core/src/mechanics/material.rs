use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::FiberFrame;

/// Exponents above this are treated as a diverged state.
const MAX_EXPONENT: f64 = 500.0;

/// Passive material, inertia and epicardial support parameters (SI).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MechParams {
    /// Volumetric penalty (Pa).
    pub bulk: f64,
    /// Exponential stiffness scale (Pa).
    pub c: f64,
    pub b_ff: f64,
    pub b_ss: f64,
    pub b_nn: f64,
    pub b_fs: f64,
    pub b_fn: f64,
    pub b_sn: f64,
    /// Density (kg/m³).
    pub rho: f64,
    /// Epicardial spring normal/tangential (Pa/m).
    pub k_perp: f64,
    pub k_par: f64,
    /// Epicardial damping normal/tangential (Pa·s/m).
    pub c_perp: f64,
    pub c_par: f64,
}

impl Default for MechParams {
    fn default() -> Self {
        MechParams {
            bulk: 50e3,
            c: 880.0,
            b_ff: 8.0,
            b_ss: 6.0,
            b_nn: 3.0,
            b_fs: 12.0,
            b_fn: 3.0,
            b_sn: 3.0,
            rho: 1000.0,
            k_perp: 2e5,
            k_par: 2e4,
            c_perp: 2e4,
            c_par: 2e3,
        }
    }
}

impl MechParams {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.bulk, self.c, self.b_ff, self.b_ss, self.b_nn, self.b_fs, self.b_fn, self.b_sn, self.rho,
        ];
        if all.iter().any(|&x| !(x > 0.0)) {
            return Err(Error::InvalidInput(format!("material parameters must be positive: {self:?}")));
        }
        let epi = [self.k_perp, self.k_par, self.c_perp, self.c_par];
        if epi.iter().any(|&x| !(x >= 0.0)) {
            return Err(Error::InvalidInput("epicardial coefficients must be nonnegative".into()));
        }
        Ok(())
    }

    /// Symmetric weights `b_ij` of `Q = Σ b_ij Ē_ij²` in the fiber frame.
    fn weights(&self) -> Matrix3<f64> {
        Matrix3::new(
            self.b_ff, self.b_fs, self.b_fn, //
            self.b_fs, self.b_ss, self.b_sn, //
            self.b_fn, self.b_sn, self.b_nn,
        )
    }

    /// `W = (C/2)(e^Q − 1) + (B/2)(J − 1) ln J`
    pub fn energy(&self, f: &Matrix3<f64>, frame: &FiberFrame) -> Result<f64> {
        let j = f.determinant();
        if !(j > 0.0) {
            return Err(Error::InvalidInput(format!("det F = {j} is not positive")));
        }
        let r = frame_matrix(frame);
        let e = (f.transpose() * f - Matrix3::identity()) * 0.5;
        let eb = r.transpose() * e * r;
        let q = self.weights().component_mul(&eb).component_mul(&eb).sum();
        if q > MAX_EXPONENT {
            return Err(Error::DivergedState { exponent: q });
        }
        Ok(0.5 * self.c * (q.exp() - 1.0) + 0.5 * self.bulk * (j - 1.0) * j.ln())
    }

    /// First Piola stress and the data needed for its linearization.
    pub fn stress(&self, f: &Matrix3<f64>, frame: &FiberFrame, ta: f64) -> Result<StressPoint> {
        let j = f.determinant();
        if !(j > 0.0) {
            return Err(Error::InvalidInput(format!("det F = {j} is not positive")));
        }
        let r = frame_matrix(frame);
        let bw = self.weights();
        let e = (f.transpose() * f - Matrix3::identity()) * 0.5;
        let eb = r.transpose() * e * r;
        let weighted = bw.component_mul(&eb);
        let q = weighted.component_mul(&eb).sum();
        if q > MAX_EXPONENT {
            return Err(Error::DivergedState { exponent: q });
        }
        let ceq = self.c * q.exp();
        let s = r * (weighted * ceq) * r.transpose();
        let finv_t = f.try_inverse().expect("det F > 0").transpose();
        let g = 0.5 * self.bulk * (j * j.ln() + j - 1.0);
        let g_prime = 0.5 * self.bulk * (j.ln() + 2.0);
        let f0 = Vector3::from(frame.f0);
        let a = f * f0;
        let a_norm = a.norm();
        let mut p = f * s + finv_t * g;
        if ta != 0.0 {
            p += (a / a_norm) * f0.transpose() * ta;
        }
        Ok(StressPoint {
            p,
            f: *f,
            r,
            bw,
            weighted,
            ceq,
            s,
            finv_t,
            j,
            g,
            g_prime,
            ta,
            f0,
            a,
            a_norm,
        })
    }
}

/// Columns `[f₀ | s₀ | n₀]`.
pub fn frame_matrix(fr: &FiberFrame) -> Matrix3<f64> {
    Matrix3::from_columns(&[Vector3::from(fr.f0), Vector3::from(fr.s0), Vector3::from(fr.n0)])
}

/// Stress state at one point.
#[derive(Clone, Debug)]
pub struct StressPoint {
    pub p: Matrix3<f64>,
    f: Matrix3<f64>,
    r: Matrix3<f64>,
    bw: Matrix3<f64>,
    weighted: Matrix3<f64>,
    ceq: f64,
    s: Matrix3<f64>,
    finv_t: Matrix3<f64>,
    j: f64,
    g: f64,
    g_prime: f64,
    ta: f64,
    f0: Vector3<f64>,
    a: Vector3<f64>,
    a_norm: f64,
}

impl StressPoint {
    pub fn j(&self) -> f64 {
        self.j
    }

    /// Directional derivative `dP = ∂P/∂F : dF`.
    pub fn tangent(&self, df: &Matrix3<f64>) -> Matrix3<f64> {
        let de = (df.transpose() * self.f + self.f.transpose() * df) * 0.5;
        let deb = self.r.transpose() * de * self.r;
        let dq = 2.0 * self.weighted.component_mul(&deb).sum();
        let dsb = (self.bw.component_mul(&deb) + self.weighted * dq) * self.ceq;
        let ds = self.r * dsb * self.r.transpose();
        let mut dp = df * self.s + self.f * ds;
        let tr = self.finv_t.component_mul(df).sum();
        dp += self.finv_t * (self.g_prime * self.j * tr) - self.finv_t * df.transpose() * self.finv_t * self.g;
        if self.ta != 0.0 {
            let ahat = self.a / self.a_norm;
            let da = df * self.f0;
            let dir = (da - ahat * ahat.dot(&da)) / self.a_norm;
            dp += dir * self.f0.transpose() * self.ta;
        }
        dp
    }
}
