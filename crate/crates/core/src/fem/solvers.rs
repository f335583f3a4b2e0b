//! Preconditioned CG and restarted GMRES with absolute residual tolerances.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par::{axpy, dot, norm2};

use super::sparse::CsrMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearSolverParams {
    /// Stop when `‖b − Ax‖₂ ≤ abs_tol`.
    pub abs_tol: f64,
    pub restart: usize,
    /// Iteration cap as a multiple of the system size.
    pub max_iter_factor: usize,
}

impl LinearSolverParams {
    pub fn cg(abs_tol: f64) -> Self {
        LinearSolverParams {
            abs_tol,
            restart: 200,
            max_iter_factor: 10,
        }
    }

    pub fn gmres(abs_tol: f64) -> Self {
        LinearSolverParams {
            abs_tol,
            restart: 200,
            max_iter_factor: 10,
        }
    }

    fn max_iter(&self, n: usize) -> usize {
        (self.max_iter_factor * n).max(10)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolveStats {
    pub iterations: usize,
    pub residual: f64,
}

pub trait Preconditioner: Send + Sync {
    /// `z = P⁻¹ r`
    fn apply(&self, r: &[f64], z: &mut [f64]);
}

pub struct Identity;

impl Preconditioner for Identity {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        z.copy_from_slice(r);
    }
}

/// Diagonal scaling.
pub struct Jacobi {
    inv_diag: Vec<f64>,
}

impl Jacobi {
    pub fn new(a: &CsrMatrix) -> Self {
        let inv_diag = a
            .diagonal()
            .into_iter()
            .map(|d| if d != 0.0 { 1.0 / d } else { 1.0 })
            .collect();
        Jacobi { inv_diag }
    }
}

impl Preconditioner for Jacobi {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        crate::par::for_each_mut(z, |i, zi| *zi = self.inv_diag[i] * r[i]);
    }
}

/// Incomplete LU factorization with the sparsity of `A`.
pub struct Ilu0 {
    lu: CsrMatrix,
    diag_pos: Vec<usize>,
}

impl Ilu0 {
    pub fn new(a: &CsrMatrix) -> Result<Self> {
        let n = a.n_rows();
        let mut lu = a.clone();
        let diag_pos: Vec<usize> = (0..n)
            .map(|i| {
                lu.find(i, i)
                    .ok_or_else(|| Error::InvalidInput(format!("ILU(0) needs a diagonal entry in row {i}")))
            })
            .collect::<Result<_>>()?;
        let rp = lu.row_ptr().to_vec();
        let ci = lu.col_idx().to_vec();
        let v = lu.values_mut();
        for i in 0..n {
            for kk in rp[i]..diag_pos[i] {
                let k = ci[kk];
                let pivot = v[diag_pos[k]];
                if pivot == 0.0 {
                    return Err(Error::InvalidInput(format!("zero pivot in ILU(0) at row {k}")));
                }
                let lik = v[kk] / pivot;
                v[kk] = lik;
                // Row i -= lik * row k on the pattern of row i.
                let mut p = kk + 1;
                for kj in diag_pos[k] + 1..rp[k + 1] {
                    let j = ci[kj];
                    while p < rp[i + 1] && ci[p] < j {
                        p += 1;
                    }
                    if p < rp[i + 1] && ci[p] == j {
                        v[p] -= lik * v[kj];
                    }
                }
            }
        }
        Ok(Ilu0 { lu, diag_pos })
    }
}

impl Preconditioner for Ilu0 {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        let n = r.len();
        let rp = self.lu.row_ptr();
        let ci = self.lu.col_idx();
        let v = self.lu.values();
        for i in 0..n {
            let mut s = r[i];
            for k in rp[i]..self.diag_pos[i] {
                s -= v[k] * z[ci[k]];
            }
            z[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = z[i];
            for k in self.diag_pos[i] + 1..rp[i + 1] {
                s -= v[k] * z[ci[k]];
            }
            z[i] = s / v[self.diag_pos[i]];
        }
    }
}

fn residual(a: &CsrMatrix, b: &[f64], x: &[f64], r: &mut [f64]) {
    a.matvec(x, r);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
}

fn check_dims(a: &CsrMatrix, b: &[f64], x: &[f64]) -> Result<()> {
    if a.n_rows() != a.n_cols() || b.len() != a.n_rows() || x.len() != a.n_cols() {
        return Err(Error::DimensionMismatch {
            expected: a.n_rows(),
            got: b.len().min(x.len()),
        });
    }
    Ok(())
}

/// Preconditioned conjugate gradients; `x` holds the initial guess.
pub fn solve_cg(
    a: &CsrMatrix,
    b: &[f64],
    x: &mut [f64],
    params: &LinearSolverParams,
    pc: &dyn Preconditioner,
) -> Result<SolveStats> {
    check_dims(a, b, x)?;
    let n = b.len();
    let mut r = vec![0.0; n];
    residual(a, b, x, &mut r);
    let mut rnorm = norm2(&r);
    if rnorm <= params.abs_tol {
        return Ok(SolveStats {
            iterations: 0,
            residual: rnorm,
        });
    }
    let mut z = vec![0.0; n];
    pc.apply(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let max_iter = params.max_iter(n);
    for it in 1..=max_iter {
        a.matvec(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::NonConvergence {
                solver: "CG",
                iterations: it,
                residual: rnorm,
            });
        }
        let alpha = rz / pap;
        axpy(alpha, &p, x);
        axpy(-alpha, &ap, &mut r);
        rnorm = norm2(&r);
        if rnorm <= params.abs_tol {
            // Confirm against the true residual to avoid drift.
            residual(a, b, x, &mut r);
            rnorm = norm2(&r);
            if rnorm <= params.abs_tol {
                return Ok(SolveStats {
                    iterations: it,
                    residual: rnorm,
                });
            }
        }
        pc.apply(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        crate::par::for_each_mut(&mut p, |i, pi| *pi = z[i] + beta * *pi);
    }
    Err(Error::NonConvergence {
        solver: "CG",
        iterations: max_iter,
        residual: rnorm,
    })
}

/// Right-preconditioned restarted GMRES; `x` holds the initial guess.
pub fn solve_gmres(
    a: &CsrMatrix,
    b: &[f64],
    x: &mut [f64],
    params: &LinearSolverParams,
    pc: &dyn Preconditioner,
) -> Result<SolveStats> {
    check_dims(a, b, x)?;
    let n = b.len();
    let m = params.restart.max(1).min(n.max(1));
    let max_iter = params.max_iter(n);
    let mut r = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut total = 0;
    loop {
        residual(a, b, x, &mut r);
        let beta = norm2(&r);
        if beta <= params.abs_tol {
            return Ok(SolveStats {
                iterations: total,
                residual: beta,
            });
        }
        if total >= max_iter {
            return Err(Error::NonConvergence {
                solver: "GMRES",
                iterations: total,
                residual: beta,
            });
        }
        let mut v: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
        v.push(r.iter().map(|ri| ri / beta).collect());
        let mut h = vec![vec![0.0; m]; m + 1];
        let mut cs = vec![0.0; m];
        let mut sn = vec![0.0; m];
        let mut g = vec![0.0; m + 1];
        g[0] = beta;
        let mut k_used = 0;
        for k in 0..m {
            pc.apply(&v[k], &mut z);
            a.matvec(&z, &mut w);
            // Modified Gram-Schmidt.
            for (j, vj) in v.iter().enumerate() {
                let hj = dot(&w, vj);
                h[j][k] = hj;
                axpy(-hj, vj, &mut w);
            }
            let hn = norm2(&w);
            h[k + 1][k] = hn;
            for j in 0..k {
                let t = cs[j] * h[j][k] + sn[j] * h[j + 1][k];
                h[j + 1][k] = -sn[j] * h[j][k] + cs[j] * h[j + 1][k];
                h[j][k] = t;
            }
            let rho = (h[k][k] * h[k][k] + h[k + 1][k] * h[k + 1][k]).sqrt();
            if rho == 0.0 {
                k_used = k;
                break;
            }
            cs[k] = h[k][k] / rho;
            sn[k] = h[k + 1][k] / rho;
            h[k][k] = rho;
            h[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            total += 1;
            k_used = k + 1;
            // The estimate is a little optimistic in floating point, so aim lower.
            if g[k + 1].abs() <= 0.5 * params.abs_tol || total >= max_iter || hn == 0.0 {
                break;
            }
            v.push(w.iter().map(|wi| wi / hn).collect());
        }
        // Back substitution for the Krylov coefficients.
        let mut y = vec![0.0; k_used];
        for i in (0..k_used).rev() {
            let mut s = g[i];
            for j in i + 1..k_used {
                s -= h[i][j] * y[j];
            }
            y[i] = s / h[i][i];
        }
        let mut u = vec![0.0; n];
        for (j, yj) in y.iter().enumerate() {
            axpy(*yj, &v[j], &mut u);
        }
        pc.apply(&u, &mut z);
        axpy(1.0, &z, x);
        if k_used == 0 {
            residual(a, b, x, &mut r);
            return Err(Error::NonConvergence {
                solver: "GMRES",
                iterations: total,
                residual: norm2(&r),
            });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn identity_in_one_step() {
        let a = CsrMatrix::identity(5);
        let b = vec![1.0, -2.0, 3.0, 0.5, 7.0];
        let mut x = vec![0.0; 5];
        let st = solve_cg(&a, &b, &mut x, &LinearSolverParams::cg(1e-12), &Identity).unwrap();
        assert!(st.iterations <= 1);
        assert_eq!(x, b);
    }

    #[test]
    fn two_by_two_spd() {
        let a = CsrMatrix::from_dense(&[vec![4.0, 1.0], vec![1.0, 3.0]]);
        let b = [1.0, 2.0];
        for use_gmres in [false, true] {
            let mut x = vec![0.0; 2];
            let p = LinearSolverParams::cg(1e-14);
            if use_gmres {
                solve_gmres(&a, &b, &mut x, &p, &Jacobi::new(&a)).unwrap();
            } else {
                solve_cg(&a, &b, &mut x, &p, &Jacobi::new(&a)).unwrap();
            }
            assert!((x[0] - 1.0 / 11.0).abs() < 1e-13);
            assert!((x[1] - 7.0 / 11.0).abs() < 1e-13);
        }
    }

    fn random_nonsym(n: usize, seed: u64) -> CsrMatrix {
        let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 4.0 + rng.random::<f64>()));
            for _ in 0..3 {
                let j = rng.random_range(0..n);
                t.push((i, j, rng.random_range(-1.0..1.0)));
            }
        }
        CsrMatrix::from_triplets(n, n, &t)
    }

    #[test]
    fn gmres_nonsymmetric_with_ilu() {
        let a = random_nonsym(60, 3);
        let b: Vec<f64> = (0..60).map(|i| (i as f64).sin()).collect();
        for restart in [5, 200] {
            let mut x = vec![0.0; 60];
            let p = LinearSolverParams {
                abs_tol: 1e-11,
                restart,
                max_iter_factor: 10,
            };
            solve_gmres(&a, &b, &mut x, &p, &Ilu0::new(&a).unwrap()).unwrap();
            let r = a.mul_vec(&x);
            let err: f64 = r.iter().zip(&b).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
            assert!(err <= 1e-11);
        }
    }

    #[test]
    fn non_convergence_is_reported() {
        let a = random_nonsym(40, 5);
        let b = vec![1.0; 40];
        let mut x = vec![0.0; 40];
        let p = LinearSolverParams {
            abs_tol: 1e-300,
            restart: 3,
            max_iter_factor: 0,
        };
        match solve_gmres(&a, &b, &mut x, &p, &Identity) {
            Err(Error::NonConvergence { residual, .. }) => assert!(residual > 0.0),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn ilu_is_exact_for_tridiagonal() {
        let n = 20;
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.5));
            if i > 0 {
                t.push((i, i - 1, -1.0));
            }
            if i + 1 < n {
                t.push((i, i + 1, -0.7));
            }
        }
        let a = CsrMatrix::from_triplets(n, n, &t);
        let ilu = Ilu0::new(&a).unwrap();
        let b: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let mut x = vec![0.0; n];
        ilu.apply(&b, &mut x);
        let r = a.mul_vec(&x);
        for i in 0..n {
            assert!((r[i] - b[i]).abs() < 1e-12);
        }
    }
}
