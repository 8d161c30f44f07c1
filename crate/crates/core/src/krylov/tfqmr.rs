//! Transpose-free QMR with right preconditioning.
//!
//! The iteration runs on `A P⁻¹ y = b`; preconditioned search directions are
//! accumulated alongside so the iterate is always kept as `x = P⁻¹ y` in the
//! original variables.

use crate::skew::LinearOperator;
use crate::sparse::{axpy, dot, norm2};

/// How an iterative solve ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Termination {
    Converged,
    /// No progress over the stagnation window, or a breakdown scalar.
    Stagnated,
    #[default]
    MaxIt,
    /// An incomplete factorization or the preprocessing failed.
    FactorizationBreakdown,
}

impl Termination {
    pub fn label(&self) -> &'static str {
        match self {
            Termination::Converged => "converged",
            Termination::Stagnated => "stagnated",
            Termination::MaxIt => "maxit",
            Termination::FactorizationBreakdown => "breakdown",
        }
    }
}

/// Right preconditioner: `v ↦ P⁻¹ v`.
pub trait Preconditioner {
    fn apply_inverse(&self, v: &[f64]) -> Vec<f64>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TfqmrOptions {
    pub tol: f64,
    pub maxit: usize,
    /// Iterations without relative improvement of at least
    /// `stagnation_rel` in the best residual estimate.
    pub stagnation_window: usize,
    pub stagnation_rel: f64,
    /// Accepted ratio of true to requested residual.
    pub confirm_factor: f64,
}

impl Default for TfqmrOptions {
    fn default() -> Self {
        Self { tol: 1e-5, maxit: 2000, stagnation_window: 50, stagnation_rel: 1e-12, confirm_factor: 10.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TfqmrOutcome {
    pub x: Vec<f64>,
    /// Full iterations (two half steps each; a convergence in the first
    /// half counts as a full iteration).
    pub iterations: usize,
    /// Relative residual estimate, initial value first, then one entry
    /// per iteration.
    pub history: Vec<f64>,
    pub termination: Termination,
    /// True `‖b - A x‖ / ‖b‖` at exit.
    pub relative_residual: f64,
    pub preconditioner_applications: usize,
}

struct Identity;

impl Preconditioner for Identity {
    fn apply_inverse(&self, v: &[f64]) -> Vec<f64> {
        v.to_vec()
    }
}

fn true_residual(a: &impl LinearOperator, b: &[f64], x: &[f64], bnorm: f64) -> f64 {
    let ax = a.apply_vec(x);
    let r: f64 = b.iter().zip(&ax).map(|(bi, ai)| (bi - ai) * (bi - ai)).sum();
    r.sqrt() / bnorm
}

/// Solves `A x = b` from `x₀ = 0`.
pub fn tfqmr<P: Preconditioner + ?Sized>(
    a: &impl LinearOperator,
    b: &[f64],
    precond: Option<&P>,
    opts: &TfqmrOptions,
) -> TfqmrOutcome {
    let n = a.dim();
    let bnorm = norm2(b);
    if bnorm == 0.0 {
        return TfqmrOutcome {
            x: vec![0.0; n],
            iterations: 0,
            history: vec![0.0],
            termination: Termination::Converged,
            relative_residual: 0.0,
            preconditioner_applications: 0,
        };
    }
    let mut applications = 0usize;
    let mut pinv = |v: &[f64]| -> Vec<f64> {
        applications += 1;
        match precond {
            Some(p) => p.apply_inverse(v),
            None => Identity.apply_inverse(v),
        }
    };

    let mut x = vec![0.0; n];
    let rtilde = b.to_vec();
    let mut w = b.to_vec();
    let mut y1 = b.to_vec();
    let mut z1 = pinv(&y1);
    let mut ay1 = a.apply_vec(&z1);
    let mut v = ay1.clone();
    let mut dz = vec![0.0; n];
    let mut tau = bnorm;
    let mut theta = 0.0f64;
    let mut eta = 0.0f64;
    let mut rho = dot(&rtilde, &y1);

    let mut history = vec![1.0];
    let mut best = 1.0f64;
    let mut since_best = 0usize;
    let mut termination = Termination::MaxIt;
    let mut iterations = 0;
    let mut half = 0usize;

    'outer: for it in 1..=opts.maxit {
        iterations = it;
        let sigma = dot(&rtilde, &v);
        if sigma == 0.0 || !sigma.is_finite() {
            termination = Termination::Stagnated;
            history.push(*history.last().expect("seeded"));
            break;
        }
        let alpha = rho / sigma;
        let mut y2 = y1.clone();
        axpy(-alpha, &v, &mut y2);
        let z2 = pinv(&y2);
        let ay2 = a.apply_vec(&z2);

        let mut estimate = f64::INFINITY;
        for j in 0..2 {
            half += 1;
            let (z, ay) = if j == 0 { (&z1, &ay1) } else { (&z2, &ay2) };
            axpy(-alpha, ay, &mut w);
            let coef = theta * theta * eta / alpha;
            for (d, zi) in dz.iter_mut().zip(z.iter()) {
                *d = zi + coef * *d;
            }
            theta = norm2(&w) / tau;
            let c = 1.0 / (1.0 + theta * theta).sqrt();
            tau *= theta * c;
            eta = c * c * alpha;
            axpy(eta, &dz, &mut x);
            estimate = tau * ((half + 1) as f64).sqrt() / bnorm;
            if !estimate.is_finite() {
                termination = Termination::Stagnated;
                history.push(estimate);
                break 'outer;
            }
            if estimate <= opts.tol && true_residual(a, b, &x, bnorm) <= opts.confirm_factor * opts.tol {
                termination = Termination::Converged;
                history.push(estimate);
                break 'outer;
            }
        }
        history.push(estimate);
        if estimate < best * (1.0 - opts.stagnation_rel) {
            best = estimate;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= opts.stagnation_window {
                termination = Termination::Stagnated;
                break;
            }
        }

        let rho_new = dot(&rtilde, &w);
        if rho == 0.0 || !rho_new.is_finite() {
            termination = Termination::Stagnated;
            break;
        }
        let beta = rho_new / rho;
        rho = rho_new;
        for ((yi, wi), y2i) in y1.iter_mut().zip(&w).zip(&y2) {
            *yi = wi + beta * y2i;
        }
        z1 = pinv(&y1);
        ay1 = a.apply_vec(&z1);
        for ((vi, a1), a2) in v.iter_mut().zip(&ay1).zip(&ay2) {
            *vi = a1 + beta * (a2 + beta * *vi);
        }
    }

    let relative_residual = true_residual(a, b, &x, bnorm);
    TfqmrOutcome {
        x,
        iterations,
        history,
        termination,
        relative_residual,
        preconditioner_applications: applications,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::CscMatrix;

    type NoPrecond = dyn Preconditioner;

    #[test]
    fn identity_in_one_iteration() {
        let a = CscMatrix::identity(4);
        let b = [1.0, 2.0, 3.0, 4.0];
        let out = tfqmr(&a, &b, None::<&NoPrecond>, &TfqmrOptions::default());
        assert_eq!(out.termination, Termination::Converged);
        assert_eq!(out.iterations, 1);
        for (x, e) in out.x.iter().zip(&b) {
            assert!((x - e).abs() < 1e-14);
        }
        assert_eq!(out.history.len(), out.iterations + 1);
    }

    #[test]
    fn small_nonsymmetric() {
        let a = CscMatrix::from_dense(&[
            vec![4.0, 1.0, 0.0],
            vec![-2.0, 3.0, 1.0],
            vec![0.0, 1.0, 2.0],
        ]);
        let xs = [1.0, -1.0, 2.0];
        let b = a.spmv(&xs).unwrap();
        let opts = TfqmrOptions { tol: 1e-12, ..TfqmrOptions::default() };
        let out = tfqmr(&a, &b, None::<&NoPrecond>, &opts);
        assert_eq!(out.termination, Termination::Converged);
        for (x, e) in out.x.iter().zip(&xs) {
            assert!((x - e).abs() < 1e-9);
        }
    }

    struct Jacobi(Vec<f64>);

    impl Preconditioner for Jacobi {
        fn apply_inverse(&self, v: &[f64]) -> Vec<f64> {
            v.iter().zip(&self.0).map(|(a, d)| a / d).collect()
        }
    }

    #[test]
    fn exact_preconditioner_converges_at_once() {
        let d = vec![2.0, 5.0, 0.5];
        let a = CscMatrix::diagonal_matrix(&d);
        let b = [1.0, 1.0, 1.0];
        let out = tfqmr(&a, &b, Some(&Jacobi(d.clone())), &TfqmrOptions::default());
        assert_eq!(out.termination, Termination::Converged);
        assert_eq!(out.iterations, 1);
        assert!((out.x[2] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn inconsistent_singular_system_never_converges() {
        let a = CscMatrix::from_dense(&[vec![1.0, 0.0], vec![0.0, 0.0]]);
        let out = tfqmr(&a, &[1.0, 1.0], None::<&NoPrecond>, &TfqmrOptions { maxit: 200, ..Default::default() });
        assert_ne!(out.termination, Termination::Converged);
    }

    #[test]
    fn zero_rhs() {
        let a = CscMatrix::identity(2);
        let out = tfqmr(&a, &[0.0, 0.0], None::<&NoPrecond>, &TfqmrOptions::default());
        assert_eq!(out.termination, Termination::Converged);
        assert_eq!(out.x, vec![0.0, 0.0]);
    }
}
