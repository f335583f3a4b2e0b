use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{solve_gmres, CsrMatrix, Ilu0, LinearSolverParams, SolveStats};
use crate::par::{norm2, norm_inf};

use super::model::{MechCounters, Mechanics};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NewtonParams {
    pub rel_tol: f64,
    /// N.
    pub abs_tol: f64,
    /// Bound on the last Newton increment, relative to `max(‖d‖∞, 1 mm)`.
    pub increment_tol: f64,
    pub max_iter: usize,
    pub max_backtracks: usize,
    /// Absolute GMRES tolerance (N).
    pub linear_tol: f64,
}

impl Default for NewtonParams {
    fn default() -> Self {
        NewtonParams {
            rel_tol: 1e-10,
            abs_tol: 1e-8,
            increment_tol: 1e-6,
            max_iter: 30,
            max_backtracks: 10,
            linear_tol: 1e-9,
        }
    }
}

/// A frozen linearization with its preconditioner, reusable for many
/// right-hand sides.
pub struct LinearizedSystem {
    pub matrix: CsrMatrix,
    pc: Ilu0,
    params: LinearSolverParams,
}

impl LinearizedSystem {
    pub fn new(matrix: CsrMatrix, abs_tol: f64) -> Result<Self> {
        let pc = Ilu0::new(&matrix)?;
        Ok(LinearizedSystem {
            matrix,
            pc,
            params: LinearSolverParams::gmres(abs_tol),
        })
    }

    pub fn set_tolerance(&mut self, abs_tol: f64) {
        self.params.abs_tol = abs_tol;
    }

    /// Solves `A x = b` from a zero guess.
    pub fn solve(&self, b: &[f64]) -> Result<(Vec<f64>, SolveStats)> {
        let mut x = vec![0.0; b.len()];
        let stats = solve_gmres(&self.matrix, b, &mut x, &self.params, &self.pc)?;
        Ok((x, stats))
    }
}

/// Outcome of a nonlinear solve. Failures are reported here, not raised.
#[derive(Clone, Debug, PartialEq)]
pub struct NewtonOutcome {
    pub converged: bool,
    pub iterations: usize,
    pub residual: f64,
}

/// Damped Newton with residual-decrease backtracking. `eval` returns the
/// residual and, when asked, the Jacobian; errors count as a rejected step.
pub fn newton<F>(x: &mut Vec<f64>, params: &NewtonParams, counters: Option<&MechCounters>, mut eval: F) -> NewtonOutcome
where
    F: FnMut(&[f64], bool) -> Result<(Vec<f64>, Option<CsrMatrix>)>,
{
    let fail = |iterations, residual| NewtonOutcome {
        converged: false,
        iterations,
        residual,
    };
    let (mut r, mut jac) = match eval(x, true) {
        Ok(v) => v,
        Err(e) => {
            log::debug!("newton: initial evaluation failed: {e}");
            return fail(0, f64::INFINITY);
        }
    };
    let mut rnorm = norm2(&r);
    let r0 = rnorm;
    let target = params.abs_tol.max(params.rel_tol * r0);
    let mut last_step = 0.0;
    for it in 0..=params.max_iter {
        let scale = norm_inf(x).max(1e-3);
        if rnorm <= target && (it == 0 || last_step <= params.increment_tol * scale) {
            return NewtonOutcome {
                converged: true,
                iterations: it,
                residual: rnorm,
            };
        }
        if it == params.max_iter || !rnorm.is_finite() {
            break;
        }
        let j = match jac.take() {
            Some(j) => j,
            None => match eval(x, true) {
                Ok((_, Some(j))) => j,
                _ => return fail(it, rnorm),
            },
        };
        let tol = params.linear_tol.max(1e-4 * rnorm);
        let sys = match LinearizedSystem::new(j, tol) {
            Ok(s) => s,
            Err(_) => return fail(it, rnorm),
        };
        let (delta, _) = match sys.solve(&r) {
            Ok(v) => v,
            Err(e) => {
                log::debug!("newton: linear solve failed: {e}");
                return fail(it, rnorm);
            }
        };
        if let Some(c) = counters {
            MechCounters::bump(&c.linear_solves);
            MechCounters::bump(&c.newton_iterations);
        }
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..=params.max_backtracks {
            let trial: Vec<f64> = x.iter().zip(&delta).map(|(xi, di)| xi - alpha * di).collect();
            if let Ok((rt, _)) = eval(&trial, false) {
                let tn = norm2(&rt);
                if tn.is_finite() && (tn < (1.0 - 1e-4 * alpha) * rnorm || tn <= target) {
                    *x = trial;
                    r = rt;
                    rnorm = tn;
                    accepted = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        if !accepted {
            return fail(it + 1, rnorm);
        }
        last_step = alpha * norm_inf(&delta);
    }
    fail(params.max_iter, rnorm)
}

/// Result of a quasi-static equilibrium solve.
#[derive(Clone, Debug, PartialEq)]
pub struct StaticSolution {
    pub converged: bool,
    pub d: Vec<f64>,
    pub outcome: NewtonOutcome,
}

impl Mechanics {
    /// Equilibrium `G d + S(d, Ta) = p·p(d)` by Newton with a fresh
    /// Jacobian every iteration. Never fails; see `converged`.
    pub fn quasi_static_solve(&self, p: f64, ta: Option<&[f64]>, guess: &[f64], params: &NewtonParams) -> StaticSolution {
        let mut d = guess.to_vec();
        if d.len() != self.n_dofs() {
            return StaticSolution {
                converged: false,
                d,
                outcome: NewtonOutcome {
                    converged: false,
                    iterations: 0,
                    residual: f64::NAN,
                },
            };
        }
        let outcome = newton(&mut d, params, Some(&self.counters), |x, want| {
            if want {
                let mut j = self.zero_matrix();
                let r = self.static_residual(x, p, ta, Some(&mut j))?;
                Ok((r, Some(j)))
            } else {
                Ok((self.static_residual(x, p, ta, None)?, None))
            }
        });
        StaticSolution {
            converged: outcome.converged,
            d,
            outcome,
        }
    }

    /// Quasi-static loading `p = (i/n)·p_target` from `d = 0`, each stage
    /// started from the previous solution. A failing stage is retried with
    /// halved increments, at most ten times in a row.
    pub fn pressure_ramp_init(
        &self,
        p_target: f64,
        n_steps: usize,
        ta: Option<&[f64]>,
        params: &NewtonParams,
    ) -> Result<Vec<f64>> {
        self.pressure_ramp_from(vec![0.0; self.n_dofs()], 0.0, p_target, n_steps, ta, params)
    }

    /// Ramp from the equilibrium `d` at `p_start` to `p_target`.
    pub fn pressure_ramp_from(
        &self,
        mut d: Vec<f64>,
        p_start: f64,
        p_target: f64,
        n_steps: usize,
        ta: Option<&[f64]>,
        params: &NewtonParams,
    ) -> Result<Vec<f64>> {
        const MAX_HALVINGS: u32 = 10;
        if n_steps == 0 {
            return Err(Error::InvalidInput("pressure ramp needs at least one step".into()));
        }
        let full = (p_target - p_start) / n_steps as f64;
        let mut p = p_start;
        let mut inc = full;
        let mut failures = 0;
        while (p_target - p).abs() > 1e-12 * p_target.abs().max(1.0) {
            let next = if (p_target - (p + inc)) * full.signum() < 0.0 { p_target } else { p + inc };
            let sol = self.quasi_static_solve(next, ta, &d, params);
            if sol.converged {
                d = sol.d;
                p = next;
                failures = 0;
                inc = if (2.0 * inc).abs() > full.abs() { full } else { 2.0 * inc };
            } else {
                failures += 1;
                if failures > MAX_HALVINGS {
                    return Err(Error::Initialization(format!(
                        "pressure ramp stalled at {p} Pa (target {p_target} Pa)"
                    )));
                }
                inc *= 0.5;
            }
        }
        Ok(d)
    }
}
