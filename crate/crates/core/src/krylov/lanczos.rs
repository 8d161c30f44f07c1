//! Skew-Lanczos tridiagonalization and the resulting rank-`k` deflation.

use crate::error::Result;
use crate::skew::{Deflation, LinearOperator, SkewOperator};
use crate::sparse::{axpy, dot, norm2};

/// Runs up to `k` steps of the two-term skew-Lanczos recurrence
/// `q_{i+1} = -(J q_i - α_{i-1} q_{i-1}) / α_i` from `start` (all ones
/// when `None`). Stops early when some `α_i` vanishes; the returned basis
/// then has fewer than `k` columns. With `reorthogonalize`, each new
/// vector is orthogonalized against all previous ones twice.
pub fn skew_lanczos(
    op: &impl LinearOperator,
    k: usize,
    start: Option<&[f64]>,
    reorthogonalize: bool,
) -> Deflation {
    let n = op.dim();
    if k == 0 || n == 0 {
        return Deflation { n, k: 0, basis: vec![], alphas: vec![] };
    }
    let mut q = match start {
        Some(s) => s.to_vec(),
        None => vec![1.0; n],
    };
    let nq = norm2(&q);
    if nq == 0.0 {
        return Deflation { n, k: 0, basis: vec![], alphas: vec![] };
    }
    q.iter_mut().for_each(|v| *v /= nq);

    let mut basis = q.clone();
    let mut alphas: Vec<f64> = Vec::new();
    let mut z = vec![0.0; n];
    let mut cols = 1;
    while cols < k {
        let cur = &basis[(cols - 1) * n..cols * n];
        op.apply(cur, &mut z);
        if cols > 1 {
            let prev = &basis[(cols - 2) * n..(cols - 1) * n];
            axpy(-alphas[cols - 2], prev, &mut z);
        }
        if reorthogonalize {
            for _ in 0..2 {
                for j in 0..cols {
                    let qj = &basis[j * n..(j + 1) * n];
                    let c = dot(qj, &z);
                    axpy(-c, qj, &mut z);
                }
            }
        }
        let alpha = norm2(&z);
        if alpha == 0.0 {
            break;
        }
        alphas.push(alpha);
        basis.extend(z.iter().map(|v| -v / alpha));
        cols += 1;
    }
    Deflation { n, k: cols, basis, alphas }
}

/// `J̄ = J - Q S Qᵀ`.
pub fn deflate(op: &SkewOperator, basis: Deflation) -> Result<SkewOperator> {
    op.deflated(basis)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::CscMatrix;

    #[test]
    fn zero_operator_stops_after_one_vector() {
        let j = SkewOperator::zero(3);
        let d = skew_lanczos(&j, 5, Some(&[2.0, 0.0, 0.0]), false);
        assert_eq!(d.k, 1);
        assert!(d.alphas.is_empty());
        assert_eq!(d.basis, vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn rotation_generator() {
        let a = CscMatrix::from_dense(&[vec![0.0, 1.0], vec![-1.0, 0.0]]);
        let j = SkewOperator::from_matrix(&a).unwrap();
        let d = skew_lanczos(&j, 2, Some(&[1.0, 0.0]), false);
        assert_eq!(d.k, 2);
        assert_eq!(d.basis, vec![1.0, 0.0, 0.0, 1.0]);
        assert_eq!(d.alphas, vec![1.0]);
        assert_eq!(d.small_matrix(), vec![vec![0.0, 1.0], vec![-1.0, 0.0]]);

        let jbar = deflate(&j, d).unwrap();
        let y = jbar.apply_vec(&[0.3, -1.7]);
        assert!(y.iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn empty_basis_is_identity_deflation() {
        let a = CscMatrix::from_dense(&[vec![0.0, 1.0], vec![-1.0, 0.0]]);
        let j = SkewOperator::from_matrix(&a).unwrap();
        let d = skew_lanczos(&j, 0, None, false);
        let jbar = deflate(&j, d).unwrap();
        assert!(!jbar.is_deflated());
        assert_eq!(jbar.apply_vec(&[1.0, 2.0]), j.apply_vec(&[1.0, 2.0]));
    }
}
