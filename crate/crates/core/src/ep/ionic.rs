use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;

/// Pointwise ionic model.
///
/// Gates obey `dw/dt = (w_∞(u) − w)/τ_w(u)`, linear in `w` at fixed `u`, so
/// the implicit gate update has a closed form. The ionic current is split as
/// `I_ion ≈ I_u·u + Ĩ` with both parts evaluated at the previous potential.
pub trait IonicModel: Send + Sync {
    fn n_w(&self) -> usize;
    fn n_z(&self) -> usize;
    /// Index of calcium within the concentration variables.
    fn calcium_index(&self) -> usize;
    /// `(u₀, w₀, z₀)`
    fn resting_state(&self) -> (f64, Vec<f64>, Vec<f64>);
    /// `(w_∞(u), τ_w(u))` of gate `k`.
    fn gate(&self, u: f64, k: usize) -> (f64, f64);
    /// `G(u, w, z)` into `out`.
    fn concentration_rate(&self, u: f64, w: &[f64], z: &[f64], out: &mut [f64]);
    /// `(I_u, Ĩ)` such that the current at `u` is `I_u·u + Ĩ`, linearized at
    /// `u_prev`.
    fn current_split(&self, u_prev: f64, w: &[f64], z: &[f64]) -> (f64, f64);
    /// Total ionic current, `du/dt = −I_ion + I_app`.
    fn current(&self, u: f64, w: &[f64], z: &[f64]) -> f64 {
        let (iu, it) = self.current_split(u, w, z);
        iu * u + it
    }
    /// Whether gates are clamped to `[0, 1]` after each update.
    fn clamp_gates(&self) -> bool {
        false
    }
    /// `I_u` is the same at every state.
    fn constant_linear_coefficient(&self) -> Option<f64> {
        None
    }
}

/// Parameters of the reduced two-current excitable model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReducedIonicParams {
    /// Resting potential (V).
    pub u_rest: f64,
    /// Action potential amplitude (V).
    pub u_amp: f64,
    /// Inward current time constant (s).
    pub tau_in: f64,
    /// Outward current time constant (s).
    pub tau_out: f64,
    /// Gate recovery and inactivation time constants (s).
    pub tau_open: f64,
    pub tau_close: f64,
    /// Normalized gate threshold and sigmoid width.
    pub v_gate: f64,
    pub k_gate: f64,
    /// Calcium amplitude (normalized) and time constant (s).
    pub ca_amp: f64,
    pub tau_ca: f64,
}

impl Default for ReducedIonicParams {
    fn default() -> Self {
        ReducedIonicParams {
            u_rest: -0.085,
            u_amp: 0.12,
            tau_in: 1.0e-3,
            tau_out: 40.0e-3,
            tau_open: 50.0e-3,
            tau_close: 80.0e-3,
            v_gate: 0.05,
            k_gate: 0.01,
            ca_amp: 1.0,
            tau_ca: 30.0e-3,
        }
    }
}

/// Default model: one inactivation gate `w` and calcium as the single
/// concentration. With `v = (u − u_rest)/u_amp`,
///
/// `I_ion = u_amp·[−(1 − w)·v²(1 − v)/τ_in + v/τ_out]`,
/// `w_∞ = σ((v − v_gate)/k_gate)`, `τ_w = τ_open + (τ_close − τ_open)·σ(·)`,
/// `dCa/dt = (ca_amp·w − Ca)/τ_ca`.
///
/// The outward term is the part linear in `u`; the inward term is explicit.
#[derive(Clone, Copy, Debug, Default)]
pub struct ReducedIonicModel {
    pub p: ReducedIonicParams,
}

impl ReducedIonicModel {
    fn sigmoid(&self, u: f64) -> f64 {
        let v = (u - self.p.u_rest) / self.p.u_amp;
        let x = (v - self.p.v_gate) / self.p.k_gate;
        0.5 * (1.0 + (0.5 * x).tanh())
    }
}

impl IonicModel for ReducedIonicModel {
    fn n_w(&self) -> usize {
        1
    }

    fn n_z(&self) -> usize {
        1
    }

    fn calcium_index(&self) -> usize {
        0
    }

    fn resting_state(&self) -> (f64, Vec<f64>, Vec<f64>) {
        let w0 = self.sigmoid(self.p.u_rest);
        (self.p.u_rest, vec![w0], vec![self.p.ca_amp * w0])
    }

    fn gate(&self, u: f64, _k: usize) -> (f64, f64) {
        let s = self.sigmoid(u);
        (s, self.p.tau_open + (self.p.tau_close - self.p.tau_open) * s)
    }

    fn concentration_rate(&self, _u: f64, w: &[f64], z: &[f64], out: &mut [f64]) {
        out[0] = (self.p.ca_amp * w[0] - z[0]) / self.p.tau_ca;
    }

    fn current_split(&self, u_prev: f64, w: &[f64], _z: &[f64]) -> (f64, f64) {
        let p = &self.p;
        let v = (u_prev - p.u_rest) / p.u_amp;
        let inward = -(1.0 - w[0]) * v * v * (1.0 - v) / p.tau_in * p.u_amp;
        (1.0 / p.tau_out, inward - p.u_rest / p.tau_out)
    }

    fn clamp_gates(&self) -> bool {
        true
    }

    fn constant_linear_coefficient(&self) -> Option<f64> {
        Some(1.0 / self.p.tau_out)
    }
}

/// Nodal electrophysiology state. Gate and concentration arrays are
/// dof-major: `w[dof·n_w + k]`.
#[derive(Clone, Debug, PartialEq)]
pub struct EpState {
    pub u: Vec<f64>,
    pub w: Vec<f64>,
    pub z: Vec<f64>,
    pub t: f64,
    /// Gate values clamped into `[0, 1]` so far.
    pub clamped: usize,
}

impl EpState {
    pub fn resting(model: &dyn IonicModel, n_dofs: usize) -> Self {
        let (u0, w0, z0) = model.resting_state();
        EpState {
            u: vec![u0; n_dofs],
            w: w0.iter().copied().cycle().take(n_dofs * w0.len()).collect(),
            z: z0.iter().copied().cycle().take(n_dofs * z0.len()).collect(),
            t: 0.0,
            clamped: 0,
        }
    }

    pub fn calcium(&self, model: &dyn IonicModel) -> Vec<f64> {
        let nz = model.n_z();
        let k = model.calcium_index();
        self.z.iter().skip(k).step_by(nz).copied().collect()
    }
}

/// Advances gates implicitly and concentrations explicitly at fixed `u`.
/// `G` is evaluated with the gates of the previous level.
pub fn ionic_step(model: &dyn IonicModel, state: &mut EpState, tau: f64) -> Result<()> {
    if !(tau > 0.0) {
        return Err(Error::InvalidInput(format!("time step must be positive, got {tau}")));
    }
    let (nw, nz) = (model.n_w(), model.n_z());
    let n = state.u.len();
    let clamp = model.clamp_gates();
    let u = &state.u;
    let w_old = &state.w;
    let z_old = &state.z;
    let out: Vec<(Vec<f64>, Vec<f64>, usize)> = par::map_indexed(n, |i| {
        let wi = &w_old[i * nw..(i + 1) * nw];
        let zi = &z_old[i * nz..(i + 1) * nz];
        let mut g = vec![0.0; nz];
        model.concentration_rate(u[i], wi, zi, &mut g);
        let znew: Vec<f64> = zi.iter().zip(&g).map(|(z, g)| z + tau * g).collect();
        let mut clamps = 0;
        let wnew: Vec<f64> = wi
            .iter()
            .enumerate()
            .map(|(k, &w)| {
                let (winf, tw) = model.gate(u[i], k);
                let x = (w + tau * winf / tw) / (1.0 + tau / tw);
                if clamp && !(0.0..=1.0).contains(&x) {
                    clamps += 1;
                    x.clamp(0.0, 1.0)
                } else {
                    x
                }
            })
            .collect();
        (wnew, znew, clamps)
    });
    for (i, (wn, zn, c)) in out.into_iter().enumerate() {
        if let Some(k) = wn.iter().chain(&zn).position(|x| !x.is_finite()) {
            let field = if k < nw { "gating" } else { "concentration" };
            return Err(Error::StateBlowUp { field, dof: i });
        }
        state.w[i * nw..(i + 1) * nw].copy_from_slice(&wn);
        state.z[i * nz..(i + 1) * nz].copy_from_slice(&zn);
        state.clamped += c;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Toy;
    impl IonicModel for Toy {
        fn n_w(&self) -> usize {
            1
        }
        fn n_z(&self) -> usize {
            1
        }
        fn calcium_index(&self) -> usize {
            0
        }
        fn resting_state(&self) -> (f64, Vec<f64>, Vec<f64>) {
            (0.0, vec![0.0], vec![0.3])
        }
        fn gate(&self, _u: f64, _k: usize) -> (f64, f64) {
            (1.0, 1.0)
        }
        fn concentration_rate(&self, _u: f64, _w: &[f64], _z: &[f64], out: &mut [f64]) {
            out[0] = 0.0;
        }
        fn current_split(&self, _u: f64, _w: &[f64], _z: &[f64]) -> (f64, f64) {
            (0.0, 0.0)
        }
    }

    #[test]
    fn closed_form_gate_update() {
        let mut s = EpState::resting(&Toy, 3);
        ionic_step(&Toy, &mut s, 1.0).unwrap();
        assert!(s.w.iter().all(|&w| w == 0.5));
        assert!(s.z.iter().all(|&z| z == 0.3));
    }

    #[test]
    fn rest_is_a_fixed_point() {
        let m = ReducedIonicModel::default();
        let (u0, w0, z0) = m.resting_state();
        let mut g = [0.0];
        m.concentration_rate(u0, &w0, &z0, &mut g);
        assert!(g[0].abs() < 1e-15);
        assert!(m.current(u0, &w0, &z0).abs() < 1e-15);
        let mut s = EpState::resting(&m, 4);
        ionic_step(&m, &mut s, 5e-5).unwrap();
        assert!((s.w[0] - w0[0]).abs() < 1e-9 && (s.z[0] - z0[0]).abs() < 1e-9);
    }

    #[test]
    fn current_split_is_exact_at_the_linearization_point() {
        let m = ReducedIonicModel::default();
        let u = -0.03;
        let w = [0.2];
        let v = (u - m.p.u_rest) / m.p.u_amp;
        let direct = m.p.u_amp * (-(1.0 - w[0]) * v * v * (1.0 - v) / m.p.tau_in + v / m.p.tau_out);
        assert!((m.current(u, &w, &[0.0]) - direct).abs() < 1e-10);
    }

    #[test]
    fn blow_up_is_reported() {
        let m = ReducedIonicModel::default();
        let mut s = EpState::resting(&m, 2);
        s.z[1] = f64::NAN;
        assert!(matches!(ionic_step(&m, &mut s, 1e-4), Err(Error::StateBlowUp { dof: 1, .. })));
    }
}
