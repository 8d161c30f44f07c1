//! The two-level solver.
//!
//! After scaling and skew-symmetrizing, `Â = M̂ + Ĵ` is transformed with the
//! modified incomplete factor `𝓛` of `M̂` into
//! `𝓛⁻¹ P Â Pᵀ 𝓛⁻ᵀ = M_r + I + J̃`. TFQMR solves this system with the
//! preconditioner `Ū Σ̄ Ūᵀ + I + J̄`, where `J̄` is `J̃` deflated by a
//! skew-Lanczos basis `Q` and `Ū = [Q, U_r]`, `Σ̄ = blkdiag(S_k, Σ_r)` merge
//! the deflation with the low-rank form of `M_r`. Its inverse is applied
//! through the Sherman-Morrison-Woodbury identity in the form
//!
//! `P⁻¹ v = t - X (I + Σ̄ ŪᵀX)⁻¹ Σ̄ Ūᵀ t`, `t = S̄⁻¹ v`, `X = S̄⁻¹ Ū`,
//!
//! which never inverts `Σ̄`, so singular `S_k` (odd `k`) is fine. Every
//! `S̄⁻¹` is an inner MRS solve.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use crate::clock::Stopwatch;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dense::DenseLu;
use crate::error::{Error, Result};
use crate::ildl::{abs_modify, ildl_factor, low_rank_decompose, AbsFactor, IldlVariant, LowRankTerm};
use crate::krylov::mrs::{mrs_solve, mrs_solve_multi, MrsReport};
use crate::krylov::tfqmr::{tfqmr, Preconditioner, TfqmrOptions};
use crate::krylov::lanczos::skew_lanczos;
use crate::skew::{split_sym_skew, Deflation, LinearOperator, SkewOperator};
use crate::sparse::{dot, norm2, CscMatrix};
use crate::symmetrizer::{skew_symmetrize, SkewSymmetrizer, SymmetrizerPattern};
use crate::transversal::ScaledSystem;

pub use crate::krylov::tfqmr::Termination;

/// Pivot threshold for the `(r+k) x (r+k)` core system.
const CORE_PIVOT_TOL: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq)]
pub struct TwoLevelOptions {
    pub pattern: SymmetrizerPattern,
    pub gamma: f64,
    pub ildl: IldlVariant,
    /// Skew-Lanczos vectors used for deflation.
    pub k: usize,
    pub tol: f64,
    pub maxit: usize,
    pub inner_tol: f64,
    /// `None` means the system dimension.
    pub inner_maxit: Option<usize>,
    /// Random Lanczos start vector from this seed; all ones otherwise.
    pub seed: Option<u64>,
    pub reorthogonalize: bool,
}

impl Default for TwoLevelOptions {
    fn default() -> Self {
        Self {
            pattern: SymmetrizerPattern::Tridiagonal,
            gamma: 1.0,
            ildl: IldlVariant::Threshold(1e-2),
            k: 20,
            tol: 1e-5,
            maxit: 2000,
            inner_tol: 1e-5,
            inner_maxit: None,
            seed: None,
            reorthogonalize: false,
        }
    }
}

/// Counts of the primitive operations behind the outer operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct OperationCounts {
    pub matrix_products: usize,
    pub factor_solves: usize,
    pub preconditioner_applications: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SolveReport {
    pub outer_iterations: usize,
    /// Mean inner MRS iterations per preconditioner application.
    pub avg_inner_iterations: f64,
    pub relative_residual_history: Vec<f64>,
    pub termination: Termination,
    /// `‖b - A x‖ / ‖b‖` for the original system.
    pub relative_residual: f64,
    /// True relative residual of the system the outer iteration solved.
    pub transformed_residual: f64,
    /// Rank of the symmetric remainder (negative pivots).
    pub rank: usize,
    pub wall_time: f64,
}

/// Built preconditioner.
#[derive(Debug)]
pub struct PreconditionerState {
    pub factor: Arc<AbsFactor>,
    /// `J̃` before deflation.
    pub skew: SkewOperator,
    pub low_rank: LowRankTerm,
    pub deflation: Deflation,
    /// `J̄ = J̃ - Q S_k Qᵀ`; the shifted operator is `I + J̄`.
    pub deflated: SkewOperator,
    /// `S̄⁻¹ Ū`, one vector per column of `Ū`.
    pub x: Vec<Vec<f64>>,
    core: Option<DenseLu>,
    pub precompute: MrsReport,
    pub inner_tol: f64,
    pub inner_maxit: usize,
    inner_iterations: AtomicUsize,
    applications: AtomicUsize,
    inner_failures: AtomicUsize,
}

impl PreconditionerState {
    pub fn dim(&self) -> usize {
        self.factor.dim()
    }

    /// `r + k`.
    pub fn correction_rank(&self) -> usize {
        self.x.len()
    }

    pub fn rank(&self) -> usize {
        self.low_rank.rank()
    }

    /// Column `j` of `Ū = [Q, U_r]` as a dense vector.
    pub fn ubar_column(&self, j: usize) -> Vec<f64> {
        let k = self.deflation.k;
        if j < k {
            self.deflation.column(j).to_vec()
        } else {
            let mut v = vec![0.0; self.dim()];
            for (i, val) in self.low_rank.u.col_iter(j - k) {
                v[i] = val;
            }
            v
        }
    }

    /// `Ūᵀ v`.
    fn ubar_t(&self, v: &[f64]) -> Vec<f64> {
        let k = self.deflation.k;
        let mut out: Vec<f64> = (0..k).map(|j| dot(self.deflation.column(j), v)).collect();
        for j in 0..self.low_rank.rank() {
            out.push(self.low_rank.u.col_iter(j).map(|(i, val)| val * v[i]).sum());
        }
        out
    }

    /// `Σ̄ c`.
    fn sigma_bar(&self, c: &[f64]) -> Vec<f64> {
        let k = self.deflation.k;
        let mut out = self.deflation.apply_small(&c[..k]);
        out.extend(c[k..].iter().zip(&self.low_rank.sigma).map(|(a, s)| a * s));
        out
    }

    /// `P v = Ū Σ̄ Ūᵀ v + v + J̄ v`, applied from the definition.
    pub fn apply_forward(&self, v: &[f64]) -> Vec<f64> {
        let mut y = self.deflated.apply_vec(v);
        for (yi, vi) in y.iter_mut().zip(v) {
            *yi += vi;
        }
        let c = self.sigma_bar(&self.ubar_t(v));
        for (j, cj) in c.iter().enumerate() {
            if *cj != 0.0 {
                for (yi, ui) in y.iter_mut().zip(self.ubar_column(j)) {
                    *yi += cj * ui;
                }
            }
        }
        y
    }

    /// `P⁻¹ v` with an inner MRS solve at the state's tolerance.
    pub fn apply_inverse_with(&self, v: &[f64], tol: f64) -> Vec<f64> {
        let (mut t, rep) = mrs_solve(1.0, &self.deflated, v, tol, self.inner_maxit);
        self.inner_iterations.fetch_add(rep.iterations, Ordering::Relaxed);
        self.applications.fetch_add(1, Ordering::Relaxed);
        if !rep.all_converged() {
            self.inner_failures.fetch_add(1, Ordering::Relaxed);
        }
        if let Some(core) = &self.core {
            let c = self.sigma_bar(&self.ubar_t(&t));
            let y = core.solve(&c);
            for (xj, yj) in self.x.iter().zip(&y) {
                for (ti, xi) in t.iter_mut().zip(xj) {
                    *ti -= yj * xi;
                }
            }
        }
        t
    }

    /// Preconditioner applications so far and the inner iterations they used.
    pub fn usage(&self) -> (usize, usize, usize) {
        (
            self.applications.load(Ordering::Relaxed),
            self.inner_iterations.load(Ordering::Relaxed),
            self.inner_failures.load(Ordering::Relaxed),
        )
    }

    pub fn reset_usage(&self) {
        self.applications.store(0, Ordering::Relaxed);
        self.inner_iterations.store(0, Ordering::Relaxed);
        self.inner_failures.store(0, Ordering::Relaxed);
    }
}

impl Preconditioner for PreconditionerState {
    fn apply_inverse(&self, v: &[f64]) -> Vec<f64> {
        self.apply_inverse_with(v, self.inner_tol)
    }
}

/// Builds the Lanczos start vector.
fn start_vector(n: usize, seed: Option<u64>) -> Option<Vec<f64>> {
    seed.map(|s| {
        let mut rng = ChaCha8Rng::seed_from_u64(s);
        (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
    })
}

/// Assembles the preconditioner for an already factored symmetric part.
pub fn build_from_factor(
    skew: &SkewOperator,
    factor: Arc<AbsFactor>,
    k: usize,
    inner_tol: f64,
    inner_maxit: usize,
    seed: Option<u64>,
    reorthogonalize: bool,
) -> Result<PreconditionerState> {
    let n = factor.dim();
    let low_rank = low_rank_decompose(&factor.remainder, &factor.ind, factor.rank)?;
    let jt = skew.congruent(Arc::clone(&factor))?;
    let start = start_vector(n, seed);
    let deflation = skew_lanczos(&jt, k.min(n), start.as_deref(), reorthogonalize);
    let deflated = jt.deflated(deflation.clone())?;

    let mut state = PreconditionerState {
        factor,
        skew: jt,
        low_rank,
        deflation,
        deflated,
        x: Vec::new(),
        core: None,
        precompute: MrsReport::default(),
        inner_tol,
        inner_maxit,
        inner_iterations: AtomicUsize::new(0),
        applications: AtomicUsize::new(0),
        inner_failures: AtomicUsize::new(0),
    };
    let m = state.deflation.k + state.low_rank.rank();
    if m > 0 {
        let cols: Vec<Vec<f64>> = (0..m).map(|j| state.ubar_column(j)).collect();
        let (x, rep) = mrs_solve_multi(1.0, &state.deflated, &cols, inner_tol * 1e-2, inner_maxit);
        state.x = x;
        state.precompute = rep;
        // G = I + Σ̄ Ūᵀ X, row-major
        let mut g = vec![vec![0.0; m]; m];
        for (c, xc) in state.x.iter().enumerate() {
            let col = state.sigma_bar(&state.ubar_t(xc));
            for (r, v) in col.iter().enumerate() {
                g[r][c] = *v + if r == c { 1.0 } else { 0.0 };
            }
        }
        state.core = Some(DenseLu::factor(&g, CORE_PIVOT_TOL)?);
    }
    Ok(state)
}

/// Splits `Â`, factors its symmetric part and assembles the preconditioner.
pub fn build_preconditioner(
    ahat: &CscMatrix,
    variant: IldlVariant,
    k: usize,
    inner_tol: f64,
    inner_maxit: usize,
) -> Result<PreconditionerState> {
    build_preconditioner_with(ahat, variant, k, inner_tol, inner_maxit, None, false)
}

pub fn build_preconditioner_with(
    ahat: &CscMatrix,
    variant: IldlVariant,
    k: usize,
    inner_tol: f64,
    inner_maxit: usize,
    seed: Option<u64>,
    reorthogonalize: bool,
) -> Result<PreconditionerState> {
    let (m, j) = split_sym_skew(ahat)?;
    let ldl = ildl_factor(&m, variant)?;
    let factor = Arc::new(abs_modify(&ldl)?);
    build_from_factor(&j, factor, k, inner_tol, inner_maxit, seed, reorthogonalize)
}

/// `P⁻¹ v` with the state's inner tolerance.
pub fn apply_preconditioner_inverse(p: &PreconditionerState, v: &[f64]) -> Vec<f64> {
    p.apply_inverse(v)
}

/// `v ↦ 𝓛⁻¹ P Â Pᵀ 𝓛⁻ᵀ v`, never formed explicitly.
pub struct OuterOperator<'a> {
    pub ahat: &'a CscMatrix,
    pub factor: &'a AbsFactor,
    products: AtomicUsize,
    solves: AtomicUsize,
}

impl<'a> OuterOperator<'a> {
    pub fn new(ahat: &'a CscMatrix, factor: &'a AbsFactor) -> Self {
        Self { ahat, factor, products: AtomicUsize::new(0), solves: AtomicUsize::new(0) }
    }

    /// (products with `Â`, triangular solves with `𝓛` or `𝓛ᵀ`).
    pub fn counts(&self) -> (usize, usize) {
        (self.products.load(Ordering::Relaxed), self.solves.load(Ordering::Relaxed))
    }
}

impl LinearOperator for OuterOperator<'_> {
    fn dim(&self) -> usize {
        self.ahat.nrows()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let t = self.factor.solve_with_lt(x);
        let mut u = vec![0.0; t.len()];
        self.ahat.mul_vec_into(&t, &mut u);
        y.copy_from_slice(&self.factor.solve_with_l(&u));
        self.products.fetch_add(1, Ordering::Relaxed);
        self.solves.fetch_add(2, Ordering::Relaxed);
    }
}

/// Everything produced by the setup phase.
#[derive(Debug)]
pub struct TwoLevelSetup {
    pub scaled: ScaledSystem,
    pub symmetrizer: SkewSymmetrizer,
    pub ahat: CscMatrix,
    pub preconditioner: PreconditionerState,
    pub options: TwoLevelOptions,
    pub setup_time: f64,
}

impl TwoLevelSetup {
    pub fn build(a: &CscMatrix, options: &TwoLevelOptions) -> Result<Self> {
        let started = Stopwatch::start();
        let (scaled, symmetrizer, ahat) = skew_symmetrize(a, &options.pattern, options.gamma)?;
        let inner_maxit = options.inner_maxit.unwrap_or(a.nrows()).max(1);
        let preconditioner = build_preconditioner_with(
            &ahat,
            options.ildl,
            options.k,
            options.inner_tol,
            inner_maxit,
            options.seed,
            options.reorthogonalize,
        )?;
        Ok(Self {
            scaled,
            symmetrizer,
            ahat,
            preconditioner,
            options: options.clone(),
            setup_time: started.elapsed_secs(),
        })
    }

    /// `x̂ ↦ x = D_c S x̂`.
    pub fn recover(&self, xhat: &[f64]) -> Vec<f64> {
        let sx = self.symmetrizer.s.spmv(xhat).expect("square");
        self.scaled.recover_solution(&sx)
    }

    /// Outer solve for the original right-hand side `b`.
    pub fn solve(&self, a: &CscMatrix, b: &[f64]) -> Result<(Vec<f64>, SolveReport, OperationCounts)> {
        let n = a.nrows();
        if b.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: b.len() });
        }
        let started = Stopwatch::start();
        let p = &self.preconditioner;
        p.reset_usage();
        let factor = &*p.factor;
        let op = OuterOperator::new(&self.ahat, factor);
        let bhat = self.scaled.transform_rhs(b);
        let rhs = factor.solve_with_l(&bhat);
        let opts = TfqmrOptions { tol: self.options.tol, maxit: self.options.maxit, ..TfqmrOptions::default() };
        let out = tfqmr(&op, &rhs, Some(p), &opts);
        let xhat = factor.solve_with_lt(&out.x);
        let x = self.recover(&xhat);

        let ax = a.spmv(&x)?;
        let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        let bn = norm2(b);
        let (apps, inner, _) = p.usage();
        let (products, solves) = op.counts();
        let report = SolveReport {
            outer_iterations: out.iterations,
            avg_inner_iterations: if apps > 0 { inner as f64 / apps as f64 } else { 0.0 },
            relative_residual_history: out.history,
            termination: out.termination,
            relative_residual: if bn > 0.0 { norm2(&r) / bn } else { norm2(&r) },
            transformed_residual: out.relative_residual,
            rank: p.rank(),
            wall_time: self.setup_time + started.elapsed_secs(),
        };
        let counts = OperationCounts {
            matrix_products: products,
            factor_solves: solves + 2,
            preconditioner_applications: apps,
        };
        Ok((x, report, counts))
    }
}

/// Full pipeline. Preprocessing and factorization failures are reported
/// as [`Termination::FactorizationBreakdown`]; only inconsistent input
/// dimensions are errors.
pub fn solve(a: &CscMatrix, b: &[f64], options: &TwoLevelOptions) -> Result<(Vec<f64>, SolveReport)> {
    a.check_square()?;
    let n = a.nrows();
    if b.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: b.len() });
    }
    let started = Stopwatch::start();
    match TwoLevelSetup::build(a, options) {
        Ok(setup) => {
            let (x, report, _) = setup.solve(a, b)?;
            Ok((x, report))
        }
        Err(Error::DimensionMismatch { expected, found }) => Err(Error::DimensionMismatch { expected, found }),
        Err(_) => Ok((
            vec![0.0; n],
            SolveReport {
                termination: Termination::FactorizationBreakdown,
                relative_residual: 1.0,
                transformed_residual: 1.0,
                relative_residual_history: vec![1.0],
                wall_time: started.elapsed_secs(),
                ..SolveReport::default()
            },
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_system() {
        let a = CscMatrix::identity(6);
        let (x, rep) = solve(&a, &[1.0; 6], &TwoLevelOptions::default()).unwrap();
        assert_eq!(rep.termination, Termination::Converged);
        assert_eq!(rep.outer_iterations, 1);
        assert_eq!(rep.rank, 0);
        assert!(x.iter().all(|v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn identity_preconditioner_without_corrections() {
        let p = build_preconditioner(&CscMatrix::identity(4), IldlVariant::NoFill, 0, 1e-10, 10).unwrap();
        assert_eq!(p.correction_rank(), 0);
        let v = [1.0, -2.0, 0.5, 3.0];
        assert_eq!(apply_preconditioner_inverse(&p, &v), v.to_vec());
    }

    #[test]
    fn shifted_skew_takes_the_plain_path() {
        let a = CscMatrix::from_dense(&[
            vec![1.0, 0.4, 0.0],
            vec![-0.4, 1.0, 0.9],
            vec![0.0, -0.9, 1.0],
        ]);
        let p = build_preconditioner(&a, IldlVariant::NoFill, 0, 1e-12, 10).unwrap();
        assert_eq!(p.rank(), 0);
        assert_eq!(p.factor.lfac, CscMatrix::identity(3));
        let v = [1.0, 1.0, 1.0];
        let w = apply_preconditioner_inverse(&p, &v);
        let back = a.spmv(&w).unwrap();
        for (b, e) in back.iter().zip(&v) {
            assert!((b - e).abs() < 1e-10);
        }
    }

    #[test]
    fn inverse_property_with_negative_pivot() {
        // symmetric part has one negative eigenvalue
        let a = CscMatrix::from_dense(&[
            vec![1.0, 0.5, 0.0, 0.2],
            vec![-0.5, -1.0, 0.3, 0.0],
            vec![0.0, -0.3, 1.0, 0.6],
            vec![-0.2, 0.0, -0.6, 1.0],
        ]);
        let p = build_preconditioner(&a, IldlVariant::exact(), 3, 1e-13, 50).unwrap();
        assert_eq!(p.rank(), 1);
        assert_eq!(p.correction_rank(), 4);
        let u = [0.3, -1.0, 2.0, 0.7];
        let v = p.apply_forward(&u);
        let w = apply_preconditioner_inverse(&p, &v);
        for (a, b) in w.iter().zip(&u) {
            assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        }
    }

    #[test]
    fn structurally_singular_is_a_breakdown() {
        let a = CscMatrix::from_dense(&[vec![1.0, 1.0], vec![0.0, 0.0]]);
        let (_, rep) = solve(&a, &[1.0, 1.0], &TwoLevelOptions::default()).unwrap();
        assert_eq!(rep.termination, Termination::FactorizationBreakdown);
    }
}
