//! Minimal residual iteration for `(αI + J) x = b` with `J` skew-symmetric.
//!
//! The skew-Lanczos recurrence makes the projected matrix `αI + T` with `T`
//! skew tridiagonal; a single Givens rotation per step keeps the residual
//! norm `|s|` available without extra inner products. Several right-hand
//! sides run in lockstep, each with its own scalars.

use crate::skew::LinearOperator;
use crate::sparse::{axpy, norm2};

/// Per-column outcome of an MRS run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MrsReport {
    /// Iterations of the shared loop.
    pub iterations: usize,
    /// `|s_j| / ‖b_j‖` after each iteration, starting with 1.
    pub residual_history: Vec<Vec<f64>>,
    /// True relative residuals `‖b - (αI + J) x‖ / ‖b‖` at exit.
    pub relative_residuals: Vec<f64>,
    /// `relative_residuals[j] <= 11 * tol`.
    pub converged: Vec<bool>,
}

impl MrsReport {
    pub fn all_converged(&self) -> bool {
        self.converged.iter().all(|&c| c)
    }
}

struct Column {
    r0: f64,
    s: f64,
    q: Vec<f64>,
    q_old: Vec<f64>,
    p_old: Vec<f64>,
    p_old2: Vec<f64>,
    beta: f64,
    theta1: f64,
    c_old: f64,
    s_old: f64,
    delta_old: f64,
    frozen: bool,
}

/// Single right-hand side.
pub fn mrs_solve(alpha: f64, op: &impl LinearOperator, b: &[f64], tol: f64, maxit: usize) -> (Vec<f64>, MrsReport) {
    let (mut xs, rep) = mrs_solve_multi(alpha, op, &[b.to_vec()], tol, maxit);
    (xs.pop().expect("one column"), rep)
}

/// Simultaneous iterations for several right-hand sides. The loop stops
/// when every column's estimate `|s_j| / ‖b_j‖` is below `tol` or after
/// `maxit` iterations. A column whose Lanczos sequence terminates
/// (`β = 0`), or whose right-hand side is zero, is frozen at its exact
/// solution and no longer costs operator applications.
pub fn mrs_solve_multi(
    alpha: f64,
    op: &impl LinearOperator,
    bs: &[Vec<f64>],
    tol: f64,
    maxit: usize,
) -> (Vec<Vec<f64>>, MrsReport) {
    let n = op.dim();
    let m = bs.len();
    let mut xs = vec![vec![0.0; n]; m];
    let mut hist: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut cols: Vec<Column> = bs
        .iter()
        .map(|b| {
            let r0 = norm2(b);
            let frozen = r0 == 0.0;
            hist.push(vec![if frozen { 0.0 } else { 1.0 }]);
            Column {
                r0,
                s: r0,
                q: if frozen { vec![0.0; n] } else { b.iter().map(|v| v / r0).collect() },
                q_old: vec![0.0; n],
                p_old: vec![0.0; n],
                p_old2: vec![0.0; n],
                beta: 0.0,
                theta1: alpha,
                c_old: 1.0,
                s_old: 0.0,
                delta_old: 0.0,
                frozen,
            }
        })
        .collect();

    let done = |cols: &[Column]| cols.iter().all(|c| c.frozen || (c.s / c.r0).abs() < tol);
    let mut iterations = 0;
    let mut qn = vec![0.0; n];
    if !done(&cols) {
        for _ in 0..maxit {
            iterations += 1;
            for (c, (x, h)) in cols.iter_mut().zip(xs.iter_mut().zip(hist.iter_mut())) {
                if c.frozen {
                    h.push(*h.last().expect("seeded"));
                    continue;
                }
                op.apply(&c.q, &mut qn);
                axpy(c.beta, &c.q_old, &mut qn);
                std::mem::swap(&mut c.q_old, &mut c.q);
                c.beta = norm2(&qn);
                if c.beta != 0.0 {
                    c.q.iter_mut().zip(&qn).for_each(|(q, v)| *q = v / c.beta);
                } else {
                    c.q.copy_from_slice(&c.q_old);
                }
                let theta = c.theta1.hypot(c.beta);
                let ck = c.theta1 / theta;
                let sk = c.beta / theta;
                let delta = -c.s_old * c.beta;
                c.theta1 = c.c_old * theta;

                // p = (q_old - δ_old p_old2) / θ, reusing the p_old2 buffer
                let mut p = std::mem::take(&mut c.p_old2);
                for (pi, qi) in p.iter_mut().zip(&c.q_old) {
                    *pi = (qi - c.delta_old * *pi) / theta;
                }
                axpy(c.s * ck, &p, x);
                c.s = -c.s * sk;
                h.push((c.s / c.r0).abs());

                c.p_old2 = std::mem::replace(&mut c.p_old, p);
                c.s_old = sk;
                c.c_old = ck;
                c.delta_old = delta;
                if c.beta == 0.0 || c.s == 0.0 {
                    c.frozen = true;
                }
            }
            if done(&cols) {
                break;
            }
        }
    }

    let mut relative_residuals = Vec::with_capacity(m);
    let mut converged = Vec::with_capacity(m);
    let mut ax = vec![0.0; n];
    for ((b, x), c) in bs.iter().zip(&xs).zip(&cols) {
        let rel = if c.r0 == 0.0 {
            0.0
        } else {
            op.apply(x, &mut ax);
            let r: f64 = b
                .iter()
                .zip(x.iter().zip(&ax))
                .map(|(bi, (xi, ai))| {
                    let d = bi - alpha * xi - ai;
                    d * d
                })
                .sum();
            r.sqrt() / c.r0
        };
        relative_residuals.push(rel);
        converged.push(rel <= 11.0 * tol);
    }
    (xs, MrsReport { iterations, residual_history: hist, relative_residuals, converged })
}
