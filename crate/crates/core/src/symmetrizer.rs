//! Sparse right skew-symmetrizer: finds `S` with a prescribed pattern such
//! that `Ā S` is as close as possible to identity plus skew-symmetric, in
//! the least-squares sense.
//!
//! Every strictly upper nonzero `(i, j)` of `|ĀS| + |ĀS|ᵀ` yields the row
//! `Ā(i,:) S(:,j) + Ā(j,:) S(:,i) = 0`, every `i` the row
//! `√γ Ā(i,:) S(:,i) = √γ`. Unknowns follow the column-major storage order
//! of `S`, constraints the column-major order of the upper pattern.

use crate::cholesky::{cholesky, CholeskyFactor};
use crate::error::{Error, Result};
use crate::sparse::{axpy, dot, norm2, CscMatrix};
use crate::transversal::{scale_and_permute, ScaledSystem};

/// Fill limit for the normal-equations factor before falling back to CGLS.
const MAX_FACTOR_NNZ: usize = 40_000_000;
/// Relative pivot below which the normal equations count as singular.
const PIVOT_REL_TOL: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq)]
pub enum SymmetrizerPattern {
    Diagonal,
    /// Main, first super- and first sub-diagonal.
    Tridiagonal,
    /// The pattern of the scaled matrix `Ā` itself.
    LikeMatrix,
    Custom(CscMatrix),
}

impl SymmetrizerPattern {
    /// Unit-valued pattern matrix of `S` for an `n x n` problem.
    pub fn materialize(&self, abar: &CscMatrix) -> Result<CscMatrix> {
        let n = abar.ncols();
        let mut t = Vec::new();
        match self {
            SymmetrizerPattern::Diagonal => return Ok(CscMatrix::identity(n)),
            SymmetrizerPattern::Tridiagonal => {
                for j in 0..n {
                    if j > 0 {
                        t.push((j - 1, j, 1.0));
                    }
                    t.push((j, j, 1.0));
                    if j + 1 < n {
                        t.push((j + 1, j, 1.0));
                    }
                }
            }
            SymmetrizerPattern::LikeMatrix => {
                t.extend(abar.drop_zeros().triplets().map(|(i, j, _)| (i, j, 1.0)));
            }
            SymmetrizerPattern::Custom(p) => {
                if p.nrows() != n || p.ncols() != n {
                    return Err(Error::DimensionMismatch { expected: n, found: p.nrows() });
                }
                t.extend(p.triplets().map(|(i, j, _)| (i, j, 1.0)));
            }
        }
        CscMatrix::from_triplets(n, n, &t)
    }

    pub fn name(&self) -> &'static str {
        match self {
            SymmetrizerPattern::Diagonal => "diagonal",
            SymmetrizerPattern::Tridiagonal => "tridiagonal",
            SymmetrizerPattern::LikeMatrix => "like-matrix",
            SymmetrizerPattern::Custom(_) => "custom",
        }
    }
}

/// The overdetermined system `B s ≈ rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct LlsProblem {
    /// `(nz + n) x nnz(S)`; the first `skew_rows` rows are the skew constraints.
    pub b: CscMatrix,
    pub rhs: Vec<f64>,
    pub skew_rows: usize,
    pub gamma: f64,
    /// Pattern of `S`; unknown `k` is its `k`-th stored entry.
    pub s_pattern: CscMatrix,
}

impl LlsProblem {
    pub fn unknowns(&self) -> usize {
        self.s_pattern.nnz()
    }

    /// `(row, col)` of `S` for unknown `k`.
    pub fn unknown_position(&self, k: usize) -> (usize, usize) {
        let col = self.s_pattern.colptr().partition_point(|&p| p <= k) - 1;
        (self.s_pattern.rowind()[k], col)
    }

    /// `‖B s - rhs‖²`.
    pub fn residual_norm_sq(&self, s: &[f64]) -> f64 {
        let mut r = vec![0.0; self.b.nrows()];
        self.b.mul_vec_into(s, &mut r);
        r.iter().zip(&self.rhs).map(|(a, b)| (a - b) * (a - b)).sum()
    }

    /// `S` with the values `s` on its pattern.
    pub fn assemble(&self, s: &[f64]) -> CscMatrix {
        let mut out = self.s_pattern.clone();
        out.values_mut().copy_from_slice(s);
        out
    }
}

/// Solved symmetrizer.
#[derive(Debug, Clone, PartialEq)]
pub struct SkewSymmetrizer {
    pub pattern: SymmetrizerPattern,
    pub s: CscMatrix,
    pub gamma: f64,
    pub objective_value: f64,
}

/// Intersection of two sorted index lists, reporting positions in both.
fn intersect(a: &[usize], b: &[usize], mut f: impl FnMut(usize, usize)) {
    let (mut p, mut q) = (0, 0);
    while p < a.len() && q < b.len() {
        match a[p].cmp(&b[q]) {
            std::cmp::Ordering::Less => p += 1,
            std::cmp::Ordering::Greater => q += 1,
            std::cmp::Ordering::Equal => {
                f(p, q);
                p += 1;
                q += 1;
            }
        }
    }
}

pub fn build_lls(abar: &CscMatrix, s_pattern: &CscMatrix, gamma: f64) -> Result<LlsProblem> {
    abar.check_square()?;
    let n = abar.nrows();
    if s_pattern.nrows() != n || s_pattern.ncols() != n {
        return Err(Error::DimensionMismatch { expected: n, found: s_pattern.nrows() });
    }
    if s_pattern.nnz() == 0 {
        return Err(Error::EmptyPattern);
    }
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::InvalidStructure(format!("weight must be positive, got {gamma}")));
    }
    let abar = abar.drop_zeros();
    let rows_of = abar.transpose();
    let prod = abar.pattern_matmul(s_pattern)?;
    let upper = prod.add_scaled(1.0, &prod.transpose(), 1.0)?.upper_triangle(true);

    let base = |j: usize| s_pattern.colptr()[j];
    let mut t: Vec<(usize, usize, f64)> = Vec::new();
    let mut row = 0;
    for (i, j, _) in upper.triplets() {
        // Ā(i,:) S(:,j)
        let (ai, av) = rows_of.col(i);
        intersect(ai, s_pattern.col(j).0, |p, q| t.push((row, base(j) + q, av[p])));
        // Ā(j,:) S(:,i)
        let (aj, aw) = rows_of.col(j);
        intersect(aj, s_pattern.col(i).0, |p, q| t.push((row, base(i) + q, aw[p])));
        row += 1;
    }
    let skew_rows = row;
    let w = gamma.sqrt();
    for i in 0..n {
        let (ai, av) = rows_of.col(i);
        intersect(ai, s_pattern.col(i).0, |p, q| t.push((skew_rows + i, base(i) + q, w * av[p])));
    }
    let b = CscMatrix::from_triplets(skew_rows + n, s_pattern.nnz(), &t)?;
    for k in 0..b.ncols() {
        if b.colptr()[k] == b.colptr()[k + 1] {
            let col = s_pattern.colptr().partition_point(|&p| p <= k) - 1;
            return Err(Error::UnreachableUnknown { row: s_pattern.rowind()[k], col });
        }
    }
    let mut rhs = vec![0.0; skew_rows + n];
    rhs[skew_rows..].iter_mut().for_each(|v| *v = w);
    Ok(LlsProblem { b, rhs, skew_rows, gamma, s_pattern: s_pattern.clone() })
}

/// Least-squares solution through the normal equations `BᵀB s = Bᵀ rhs`,
/// with one or two steps of iterative refinement. Falls back to CGLS if
/// the factor grows too large.
pub fn solve_lls(p: &LlsProblem) -> Result<Vec<f64>> {
    let b = &p.b;
    let bt = b.transpose();
    let normal = bt.matmul(b)?;
    let atb = b.spmv_transpose(&p.rhs)?;
    let target = 1e-10 * norm2(&atb).max(f64::MIN_POSITIVE);

    let diag = normal.diagonal();
    match cholesky(&normal, MAX_FACTOR_NNZ) {
        Ok(f) => {
            let mut x = f.solve(&atb);
            for _ in 0..3 {
                let r = normal_residual(b, &bt, &p.rhs, &x);
                if norm2(&r) <= target {
                    break;
                }
                let dx = f.solve(&r);
                axpy(1.0, &dx, &mut x);
            }
            if x.iter().all(|v| v.is_finite()) && pivots_ok(&f, &diag) {
                let r = normal_residual(b, &bt, &p.rhs, &x);
                if norm2(&r) <= target {
                    return Ok(x);
                }
                return Ok(cgls(b, &bt, &p.rhs, x, 1e-12, 10 * p.unknowns()));
            }
            Err(Error::RankDeficient { columns: weak_pivots(&f, &diag) })
        }
        Err(Error::NotPositiveDefinite { column }) => Err(Error::RankDeficient { columns: vec![column] }),
        Err(Error::InvalidStructure(_)) => {
            Ok(cgls(b, &bt, &p.rhs, vec![0.0; p.unknowns()], 1e-12, 10 * p.unknowns()))
        }
        Err(e) => Err(e),
    }
}

fn pivots_ok(f: &CholeskyFactor, diag: &[f64]) -> bool {
    weak_pivots(f, diag).is_empty()
}

fn weak_pivots(f: &CholeskyFactor, diag: &[f64]) -> Vec<usize> {
    let mut out: Vec<usize> = f
        .pivots()
        .enumerate()
        .filter(|&(k, d)| d * d <= PIVOT_REL_TOL * diag[f.perm()[k]])
        .map(|(k, _)| f.perm()[k])
        .collect();
    out.sort_unstable();
    out
}

fn normal_residual(b: &CscMatrix, bt: &CscMatrix, rhs: &[f64], x: &[f64]) -> Vec<f64> {
    let mut r = rhs.to_vec();
    let bx = b.spmv(x).expect("dimensions checked");
    for (ri, v) in r.iter_mut().zip(&bx) {
        *ri -= v;
    }
    bt.spmv(&r).expect("dimensions checked")
}

/// Conjugate gradients on the normal equations in the CGLS arrangement.
fn cgls(b: &CscMatrix, bt: &CscMatrix, rhs: &[f64], mut x: Vec<f64>, tol: f64, maxit: usize) -> Vec<f64> {
    let target = tol * norm2(&bt.spmv(rhs).expect("dimensions checked"));
    let mut r = rhs.to_vec();
    let bx = b.spmv(&x).expect("dimensions checked");
    for (ri, v) in r.iter_mut().zip(&bx) {
        *ri -= v;
    }
    let mut sv = bt.spmv(&r).expect("dimensions checked");
    let mut p = sv.clone();
    let mut gam = dot(&sv, &sv);
    for _ in 0..maxit {
        if gam.sqrt() <= target {
            break;
        }
        let q = b.spmv(&p).expect("dimensions checked");
        let qq = dot(&q, &q);
        if qq == 0.0 {
            break;
        }
        let alpha = gam / qq;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &q, &mut r);
        sv = bt.spmv(&r).expect("dimensions checked");
        let gnew = dot(&sv, &sv);
        let beta = gnew / gam;
        gam = gnew;
        for (pi, si) in p.iter_mut().zip(&sv) {
            *pi = si + beta * *pi;
        }
    }
    x
}

/// `‖strict-upper(X + Xᵀ)‖_F² + γ ‖𝒟(X) - I‖_F²` for `X = Ā S`.
pub fn objective(abar: &CscMatrix, s: &CscMatrix, gamma: f64) -> Result<f64> {
    let x = abar.matmul(s)?;
    let sym = x.add_scaled(1.0, &x.transpose(), 1.0)?;
    let skew_part: f64 = sym.triplets().filter(|(i, j, _)| i < j).map(|(_, _, v)| v * v).sum();
    let diag: f64 = x.diagonal().iter().map(|d| (d - 1.0) * (d - 1.0)).sum();
    Ok(skew_part + gamma * diag)
}

/// Least-squares solution closest to `start`: CGLS iterates stay in
/// `start + range(Bᵀ)`, which picks one minimizer when `B` is rank
/// deficient.
pub fn solve_lls_from(p: &LlsProblem, start: Vec<f64>) -> Result<Vec<f64>> {
    if start.len() != p.unknowns() {
        return Err(Error::DimensionMismatch { expected: p.unknowns(), found: start.len() });
    }
    let bt = p.b.transpose();
    Ok(cgls(&p.b, &bt, &p.rhs, start, 1e-12, 10 * p.unknowns()))
}

/// Solves for `S` on the scaled matrix `Ā`. A rank-deficient problem is
/// resolved by the minimizer closest to `S = I`.
pub fn symmetrizer_for(abar: &CscMatrix, pattern: &SymmetrizerPattern, gamma: f64) -> Result<SkewSymmetrizer> {
    let sp = pattern.materialize(abar)?;
    let problem = build_lls(abar, &sp, gamma)?;
    let s = match solve_lls(&problem) {
        Ok(s) => s,
        Err(Error::RankDeficient { .. }) => {
            let start = sp.triplets().map(|(i, j, _)| if i == j { 1.0 } else { 0.0 }).collect();
            solve_lls_from(&problem, start)?
        }
        Err(e) => return Err(e),
    };
    let objective_value = problem.residual_norm_sq(&s);
    Ok(SkewSymmetrizer { pattern: pattern.clone(), s: problem.assemble(&s), gamma, objective_value })
}

/// Transversal with scaling followed by the symmetrizer: returns the scaled
/// system, `S` and `Â = Ā S`.
pub fn skew_symmetrize(
    a: &CscMatrix,
    pattern: &SymmetrizerPattern,
    gamma: f64,
) -> Result<(ScaledSystem, SkewSymmetrizer, CscMatrix)> {
    let scaled = scale_and_permute(a)?;
    let sym = symmetrizer_for(&scaled.matrix, pattern, gamma)?;
    let ahat = scaled.matrix.matmul(&sym.s)?.drop_zeros();
    Ok((scaled, sym, ahat))
}
