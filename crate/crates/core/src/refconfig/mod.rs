//! Recovery of the stress-free reference configuration from a loaded
//! geometry, and projection of a displacement from an independent mesh.
//!
//! The loaded coordinates `x̃` are fixed; the unknown is `x₀` with
//! `x₀ + d_eq(x₀, p, Ta) = x̃`. All norms are vertex-wise ℓ∞ over
//! coordinates.

mod projection;

pub use projection::{closest_on_face, inverse_map, project_displacement, Location, PointLocator, Projection};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mechanics::{Mechanics, NewtonParams};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RecoveryParams {
    pub k_max: usize,
    pub eps_ramp: f64,
    pub eps_final: f64,
    pub gamma_omega_plus: f64,
    pub gamma_omega_minus: f64,
    pub d_omega_max: f64,
    pub alpha_min: f64,
    pub alpha_max: f64,
    pub gamma_alpha_plus: f64,
    pub gamma_alpha_minus: f64,
    pub newton: NewtonParams,
}

impl Default for RecoveryParams {
    fn default() -> Self {
        RecoveryParams {
            k_max: 100,
            eps_ramp: 1e-2,
            eps_final: 1e-4,
            gamma_omega_plus: 2.0,
            gamma_omega_minus: 0.5,
            d_omega_max: 0.25,
            alpha_min: 1e-3,
            alpha_max: 1.0,
            gamma_alpha_plus: 1.5,
            gamma_alpha_minus: 0.5,
            newton: NewtonParams::default(),
        }
    }
}

impl RecoveryParams {
    pub fn validate(&self) -> Result<()> {
        let ok = 0.0 < self.gamma_omega_minus
            && self.gamma_omega_minus < 1.0
            && self.gamma_omega_plus > 1.0
            && 0.0 < self.gamma_alpha_minus
            && self.gamma_alpha_minus < 1.0
            && self.gamma_alpha_plus > 1.0
            && 0.0 < self.alpha_min
            && self.alpha_min <= self.alpha_max
            && self.alpha_max <= 1.0
            && 0.0 < self.d_omega_max
            && self.d_omega_max <= 1.0
            && self.eps_ramp > 0.0
            && self.eps_final > 0.0;
        if !ok {
            return Err(Error::InvalidInput(format!("inconsistent recovery parameters: {self:?}")));
        }
        Ok(())
    }
}

/// Iteration history of a recovery run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RecoveryReport {
    /// Load levels of the continuation loop that converged, in order.
    pub omega_path: Vec<f64>,
    /// Load levels attempted, including failed ones.
    pub omega_attempts: Vec<f64>,
    /// Relaxation factor at each fixed-point update.
    pub alpha_path: Vec<f64>,
    pub outer_iterations: usize,
    pub fixed_point_iterations: usize,
    pub equilibrium_solves: usize,
    /// `‖x − x̃‖∞ / ‖d‖∞` at the last converged equilibrium.
    pub final_ratio: f64,
}

/// Outcome of a recovery. On failure `x0` is the last accepted iterate
/// and must not be used as a result.
#[derive(Clone, Debug, PartialEq)]
pub struct Recovery {
    pub converged: bool,
    /// Reference vertex coordinates (m).
    pub x0: Vec<[f64; 3]>,
    /// Equilibrium displacement of `x0` under the full load.
    pub d: Vec<f64>,
    pub report: RecoveryReport,
}

/// Quasi-static equilibrium on the geometry `x0`, started from `guess`.
/// `None` on any failure, including an invalid geometry.
fn steady_state(
    loaded: &Mechanics,
    x0: &[[f64; 3]],
    p: f64,
    ta: Option<&[f64]>,
    guess: &[f64],
    newton: &NewtonParams,
    report: &mut RecoveryReport,
) -> Option<Vec<f64>> {
    report.equilibrium_solves += 1;
    let mech = loaded.with_reference(x0.to_vec()).ok()?;
    let sol = mech.quasi_static_solve(p, ta, guess, newton);
    sol.converged.then_some(sol.d)
}

fn deformed(x0: &[[f64; 3]], d: &[f64]) -> Vec<[f64; 3]> {
    x0.iter()
        .enumerate()
        .map(|(i, x)| [x[0] + d[3 * i], x[1] + d[3 * i + 1], x[2] + d[3 * i + 2]])
        .collect()
}

fn max_diff(a: &[[f64; 3]], b: &[[f64; 3]]) -> f64 {
    a.iter()
        .zip(b)
        .flat_map(|(p, q)| (0..3).map(move |k| (p[k] - q[k]).abs()))
        .fold(0.0, f64::max)
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn scaled(ta: Option<&[f64]>, s: f64) -> Option<Vec<f64>> {
    ta.map(|t| t.iter().map(|x| x * s).collect())
}

fn check_linear(loaded: &Mechanics) -> Result<()> {
    if loaded.space().degree() != 1 {
        return Err(Error::Unsupported("reference recovery moves vertices and needs a linear space".into()));
    }
    Ok(())
}

/// Plain fixed-point iteration `x₀ ← x̃ − d_eq(x₀)`. `loaded` carries the
/// loaded geometry `x̃`.
pub fn reference_configuration_base(
    loaded: &Mechanics,
    p: f64,
    ta: Option<&[f64]>,
    k_max: usize,
    eps: f64,
    newton: &NewtonParams,
) -> Result<Recovery> {
    check_linear(loaded)?;
    let xt = loaded.space().vertex_coords().to_vec();
    let mut report = RecoveryReport::default();
    let mut x0 = xt.clone();
    let mut d = vec![0.0; loaded.n_dofs()];
    for k in 0..=k_max {
        report.fixed_point_iterations = k;
        let Some(dk) = steady_state(loaded, &x0, p, ta, &d, newton, &mut report) else {
            return Ok(Recovery {
                converged: false,
                x0,
                d,
                report,
            });
        };
        d = dk;
        let x = deformed(&x0, &d);
        let ratio = max_diff(&x, &xt) / max_abs(&d).max(f64::MIN_POSITIVE);
        report.final_ratio = ratio;
        if max_diff(&x, &xt) <= eps * max_abs(&d) {
            return Ok(Recovery {
                converged: true,
                x0,
                d,
                report,
            });
        }
        x0 = xt.iter().enumerate().map(|(i, x)| [0, 1, 2].map(|c| x[c] - d[3 * i + c])).collect();
    }
    Ok(Recovery {
        converged: false,
        x0,
        d,
        report,
    })
}

/// Relaxed fixed point at fixed loads with adaptive relaxation. On success
/// returns `(x₀, d)`; on failure `None`. `d_guess` is the last equilibrium
/// solution and seeds every Newton solve until a new one is found.
#[allow(clippy::too_many_arguments)]
pub fn fixed_point(
    loaded: &Mechanics,
    p: f64,
    ta: Option<&[f64]>,
    x0_guess: &[[f64; 3]],
    d_guess: &[f64],
    eps: f64,
    params: &RecoveryParams,
    report: &mut RecoveryReport,
) -> Option<(Vec<[f64; 3]>, Vec<f64>)> {
    let xt = loaded.space().vertex_coords();
    let mut alpha = params.alpha_max;
    let mut x0 = x0_guess.to_vec();
    let mut d = steady_state(loaded, &x0, p, ta, d_guess, &params.newton, report)?;
    let mut x = deformed(&x0, &d);
    for _ in 0..=params.k_max {
        report.fixed_point_iterations += 1;
        report.alpha_path.push(alpha);
        debug_assert!((params.alpha_min..=params.alpha_max).contains(&alpha));
        let trial: Vec<[f64; 3]> = x0
            .iter()
            .zip(&x)
            .zip(xt)
            .map(|((a, xk), t)| [0, 1, 2].map(|c| a[c] + alpha * (t[c] - xk[c])))
            .collect();
        match steady_state(loaded, &trial, p, ta, &d, &params.newton, report) {
            Some(dk) => {
                x0 = trial;
                d = dk;
                x = deformed(&x0, &d);
                let diff = max_diff(&x, xt);
                report.final_ratio = diff / max_abs(&d).max(f64::MIN_POSITIVE);
                if diff <= eps * max_abs(&d) {
                    return Some((x0, d));
                }
                alpha = (params.gamma_alpha_plus * alpha).min(params.alpha_max);
            }
            None => {
                // Retry from the previous x₀ and last equilibrium.
                alpha = (params.gamma_alpha_minus * alpha).max(params.alpha_min);
            }
        }
    }
    None
}

/// Continuation in the load level `ω ∈ (0, 1]` around the relaxed fixed
/// point. Succeeds only when the full-load stage converges.
pub fn reference_configuration(
    loaded: &Mechanics,
    p: f64,
    ta: Option<&[f64]>,
    params: &RecoveryParams,
) -> Result<Recovery> {
    check_linear(loaded)?;
    params.validate()?;
    let xt = loaded.space().vertex_coords().to_vec();
    let mut report = RecoveryReport::default();
    let mut x0 = xt.clone();
    let mut d = vec![0.0; loaded.n_dofs()];
    let mut omega = 0.0;
    let mut d_omega = params.d_omega_max;
    for k in 0..=params.k_max {
        report.outer_iterations = k + 1;
        let level = (omega + d_omega).min(1.0);
        report.omega_attempts.push(level);
        let eps = if level == 1.0 { params.eps_final } else { params.eps_ramp };
        let ta_w = scaled(ta, level);
        match fixed_point(loaded, level * p, ta_w.as_deref(), &x0, &d, eps, params, &mut report) {
            Some((x0_new, d_new)) => {
                x0 = x0_new;
                d = d_new;
                omega = level;
                report.omega_path.push(level);
                if level == 1.0 {
                    return Ok(Recovery {
                        converged: true,
                        x0,
                        d,
                        report,
                    });
                }
                d_omega = (params.gamma_omega_plus * d_omega).min(params.d_omega_max);
            }
            None => {
                d_omega *= params.gamma_omega_minus;
            }
        }
    }
    Ok(Recovery {
        converged: false,
        x0,
        d,
        report,
    })
}

/// `‖x₀ + d_eq(x₀) − x̃‖∞ / ‖d_eq‖∞` by one extra forward solve.
pub fn verify_recovery(loaded: &Mechanics, rec: &Recovery, p: f64, ta: Option<&[f64]>, newton: &NewtonParams) -> Result<f64> {
    let mech = loaded.with_reference(rec.x0.clone())?;
    let sol = mech.quasi_static_solve(p, ta, &rec.d, newton);
    if !sol.converged {
        return Err(Error::NonConvergence {
            solver: "equilibrium check",
            iterations: sol.outcome.iterations,
            residual: sol.outcome.residual,
        });
    }
    let x = deformed(&rec.x0, &sol.d);
    Ok(max_diff(&x, loaded.space().vertex_coords()) / max_abs(&sol.d).max(f64::MIN_POSITIVE))
}

#[cfg(test)]
mod tests;
