//! Iterative sparse linear solvers.
//!
//! The time-step systems couple a lumped mass diagonal with the stiffness
//! and upwind drift matrices; the drift part breaks symmetry, so the general
//! entry point is a Jacobi-preconditioned BiCGSTAB. The discrete Green
//! (Helmholtz) systems are symmetric positive definite and use conjugate
//! gradients. Both are deterministic: no randomness, fixed iteration order,
//! and convergence is accepted only after a true-residual check.

use crate::assembly::SparseOperator;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("solver did not converge after {iterations} iterations (relative residual {residual:.3e}, target {target:.3e})")]
    NoConvergence {
        iterations: usize,
        residual: f64,
        target: f64,
    },
    #[error("dimension mismatch: matrix is {n} x {n}, right-hand side has length {rhs_len}")]
    DimensionMismatch { n: usize, rhs_len: usize },
}

/// Iteration count and final true relative residual of a solve.
#[derive(Debug, Clone, Copy, Default)]
pub struct SolveStats {
    pub iterations: usize,
    pub residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn inv_diagonal(a: &SparseOperator) -> Vec<f64> {
    (0..a.n)
        .map(|i| {
            let d = a.get(i, i);
            if d != 0.0 {
                1.0 / d
            } else {
                1.0
            }
        })
        .collect()
}

/// Solve `A x = rhs` with BiCGSTAB (Jacobi preconditioned) to relative true
/// residual `tol`. Handles nonsymmetric systems; deterministic given inputs.
pub fn linear_solve(
    a: &SparseOperator,
    rhs: &[f64],
    tol: f64,
) -> Result<(Vec<f64>, SolveStats), SolveError> {
    let n = a.n;
    if rhs.len() != n {
        return Err(SolveError::DimensionMismatch {
            n,
            rhs_len: rhs.len(),
        });
    }
    let b_norm = norm2(rhs);
    if b_norm == 0.0 {
        return Ok((vec![0.0; n], SolveStats::default()));
    }
    let inv_d = inv_diagonal(a);
    let max_iter = (20 * n).max(200);

    let mut x = vec![0.0; n];
    let mut r = rhs.to_vec();
    let mut r_hat = r.clone();
    let mut p = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut s = vec![0.0; n];
    let mut t = vec![0.0; n];
    let mut p_hat = vec![0.0; n];
    let mut s_hat = vec![0.0; n];
    let mut rho = 1.0;
    let mut alpha = 1.0;
    let mut omega = 1.0;
    let mut restarted_at = usize::MAX;

    for iter in 1..=max_iter {
        let rho_new = dot(&r_hat, &r);
        if rho_new.abs() < f64::MIN_POSITIVE * 1e10 {
            // Lanczos breakdown: restart the shadow residual once per stall.
            if restarted_at == iter.wrapping_sub(1) {
                let res = norm2(&r) / b_norm;
                return Err(SolveError::NoConvergence {
                    iterations: iter,
                    residual: res,
                    target: tol,
                });
            }
            r_hat.copy_from_slice(&r);
            rho = 1.0;
            alpha = 1.0;
            omega = 1.0;
            p.iter_mut().for_each(|z| *z = 0.0);
            v.iter_mut().for_each(|z| *z = 0.0);
            restarted_at = iter;
            continue;
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        for i in 0..n {
            p_hat[i] = inv_d[i] * p[i];
        }
        a.matvec(&p_hat, &mut v);
        let denom = dot(&r_hat, &v);
        if denom == 0.0 {
            let res = norm2(&r) / b_norm;
            return Err(SolveError::NoConvergence {
                iterations: iter,
                residual: res,
                target: tol,
            });
        }
        alpha = rho / denom;
        for i in 0..n {
            s[i] = r[i] - alpha * v[i];
        }
        if norm2(&s) / b_norm <= tol {
            for i in 0..n {
                x[i] += alpha * p_hat[i];
            }
            if let Some(stats) = check_true_residual(a, rhs, &x, b_norm, tol, iter) {
                return Ok((x, stats));
            }
            // Recurrence drifted from the true residual; recompute and go on.
            a.matvec(&x, &mut r);
            for i in 0..n {
                r[i] = rhs[i] - r[i];
            }
            continue;
        }
        for i in 0..n {
            s_hat[i] = inv_d[i] * s[i];
        }
        a.matvec(&s_hat, &mut t);
        let tt = dot(&t, &t);
        if tt == 0.0 {
            let res = norm2(&s) / b_norm;
            return Err(SolveError::NoConvergence {
                iterations: iter,
                residual: res,
                target: tol,
            });
        }
        omega = dot(&t, &s) / tt;
        for i in 0..n {
            x[i] += alpha * p_hat[i] + omega * s_hat[i];
        }
        for i in 0..n {
            r[i] = s[i] - omega * t[i];
        }
        if norm2(&r) / b_norm <= tol {
            if let Some(stats) = check_true_residual(a, rhs, &x, b_norm, tol, iter) {
                return Ok((x, stats));
            }
            a.matvec(&x, &mut r);
            for i in 0..n {
                r[i] = rhs[i] - r[i];
            }
        }
    }
    let mut ax = vec![0.0; n];
    a.matvec(&x, &mut ax);
    let res = rhs
        .iter()
        .zip(&ax)
        .map(|(b, y)| (b - y) * (b - y))
        .sum::<f64>()
        .sqrt()
        / b_norm;
    Err(SolveError::NoConvergence {
        iterations: max_iter,
        residual: res,
        target: tol,
    })
}

fn check_true_residual(
    a: &SparseOperator,
    rhs: &[f64],
    x: &[f64],
    b_norm: f64,
    tol: f64,
    iterations: usize,
) -> Option<SolveStats> {
    let mut ax = vec![0.0; a.n];
    a.matvec(x, &mut ax);
    let res = rhs
        .iter()
        .zip(&ax)
        .map(|(b, y)| (b - y) * (b - y))
        .sum::<f64>()
        .sqrt()
        / b_norm;
    if res <= tol {
        Some(SolveStats {
            iterations,
            residual: res,
        })
    } else {
        None
    }
}

/// Conjugate gradients (Jacobi preconditioned) for symmetric positive
/// definite systems; used for the discrete Green operator.
pub(crate) fn cg_solve(
    a: &SparseOperator,
    rhs: &[f64],
    tol: f64,
) -> Result<(Vec<f64>, SolveStats), SolveError> {
    let n = a.n;
    if rhs.len() != n {
        return Err(SolveError::DimensionMismatch {
            n,
            rhs_len: rhs.len(),
        });
    }
    let b_norm = norm2(rhs);
    if b_norm == 0.0 {
        return Ok((vec![0.0; n], SolveStats::default()));
    }
    let inv_d = inv_diagonal(a);
    let max_iter = (20 * n).max(200);

    let mut x = vec![0.0; n];
    let mut r = rhs.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&inv_d).map(|(ri, di)| ri * di).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);

    for iter in 1..=max_iter {
        a.matvec(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            return Err(SolveError::NoConvergence {
                iterations: iter,
                residual: norm2(&r) / b_norm,
                target: tol,
            });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        if norm2(&r) / b_norm <= tol {
            if let Some(stats) = check_true_residual(a, rhs, &x, b_norm, tol, iter) {
                return Ok((x, stats));
            }
            a.matvec(&x, &mut r);
            for i in 0..n {
                r[i] = rhs[i] - r[i];
            }
        }
        for i in 0..n {
            z[i] = inv_d[i] * r[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(SolveError::NoConvergence {
        iterations: max_iter,
        residual: norm2(&r) / b_norm,
        target: tol,
    })
}
