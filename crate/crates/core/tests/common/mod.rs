#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use skewprec::ildl::AbsFactor;
use skewprec::CscMatrix;

pub fn dense(a: &CscMatrix) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(a.nrows(), a.ncols());
    for (i, j, v) in a.triplets() {
        m[(i, j)] += v;
    }
    m
}

pub fn rel_err(x: &[f64], y: &[f64]) -> f64 {
    let num: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    let den: f64 = y.iter().map(|b| b * b).sum::<f64>().sqrt();
    if den == 0.0 {
        num
    } else {
        num / den
    }
}

pub fn dense_solve(a: &DMatrix<f64>, b: &[f64]) -> Vec<f64> {
    a.clone()
        .lu()
        .solve(&DVector::from_column_slice(b))
        .expect("nonsingular oracle system")
        .as_slice()
        .to_vec()
}

/// Residual of the symmetrizer objective as an affine map of the free
/// entries of `S`: skew rows for every strictly upper position, then
/// `√γ (diag(ĀS) - 1)`.
fn objective_residual(abar: &DMatrix<f64>, pattern: &[(usize, usize)], s: &[f64], gamma: f64) -> DVector<f64> {
    let n = abar.nrows();
    let mut sm = DMatrix::zeros(n, n);
    for (&(i, j), v) in pattern.iter().zip(s) {
        sm[(i, j)] = *v;
    }
    let x = abar * sm;
    let mut r = Vec::with_capacity(n * (n + 1) / 2);
    for j in 0..n {
        for i in 0..j {
            r.push(x[(i, j)] + x[(j, i)]);
        }
    }
    for i in 0..n {
        r.push(gamma.sqrt() * (x[(i, i)] - 1.0));
    }
    DVector::from_vec(r)
}

/// Minimum of the symmetrizer objective over matrices with the given
/// pattern, by a dense SVD least-squares solve.
pub fn lls_oracle_minimum(abar: &CscMatrix, pattern: &CscMatrix, gamma: f64) -> f64 {
    let a = dense(abar);
    let pos: Vec<(usize, usize)> = pattern.triplets().map(|(i, j, _)| (i, j)).collect();
    let m = pos.len();
    let r0 = objective_residual(&a, &pos, &vec![0.0; m], gamma);
    let mut b = DMatrix::zeros(r0.len(), m);
    for k in 0..m {
        let mut e = vec![0.0; m];
        e[k] = 1.0;
        let col = objective_residual(&a, &pos, &e, gamma) - &r0;
        b.set_column(k, &col);
    }
    let rhs = -&r0;
    let s = b.clone().svd(true, true).solve(&rhs, 1e-12).expect("svd solve");
    (b * s - rhs).norm_squared()
}

/// Dense `Pᵀ 𝓛⁻ᵀ`-congruence: returns `𝓛⁻¹ P X Pᵀ 𝓛⁻ᵀ`.
pub fn congruence(f: &AbsFactor, x: &DMatrix<f64>) -> DMatrix<f64> {
    let n = f.dim();
    let l = dense(&f.lfac);
    let linv = l.try_inverse().expect("triangular factor");
    let mut p = DMatrix::zeros(n, n);
    for (k, &src) in f.perm.iter().enumerate() {
        p[(k, src)] = 1.0;
    }
    &linv * &p * x * p.transpose() * linv.transpose()
}

/// Largest modulus among the eigenvalues of a real skew matrix.
pub fn skew_spectral_radius(j: &DMatrix<f64>) -> f64 {
    j.clone().singular_values().max()
}
