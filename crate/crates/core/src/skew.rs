//! Linear operators, skew-symmetric operators and the symmetric/skew splitting.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::ildl::AbsFactor;
use crate::sparse::{dot, CscMatrix};

/// A square linear map applied matrix-free.
pub trait LinearOperator {
    fn dim(&self) -> usize;

    /// `y = Op x`; `y` is overwritten.
    fn apply(&self, x: &[f64], y: &mut [f64]);

    fn apply_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim()];
        self.apply(x, &mut y);
        y
    }
}

impl LinearOperator for CscMatrix {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.mul_vec_into(x, y);
    }
}

impl<T: LinearOperator + ?Sized> LinearOperator for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        (**self).apply(x, y)
    }
}

/// Rank-`k` skew correction `Q S Qᵀ` with `S` skew tridiagonal.
///
/// `basis` is `n x k`, column-major. `S(i, i+1) = alphas[i]`,
/// `S(i+1, i) = -alphas[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Deflation {
    pub n: usize,
    pub k: usize,
    pub basis: Vec<f64>,
    pub alphas: Vec<f64>,
}

impl Deflation {
    pub fn column(&self, j: usize) -> &[f64] {
        &self.basis[j * self.n..(j + 1) * self.n]
    }

    /// `S_k c` for a length-`k` coefficient vector.
    pub fn apply_small(&self, c: &[f64]) -> Vec<f64> {
        let k = self.k;
        let mut out = vec![0.0; k];
        for i in 0..k.saturating_sub(1) {
            out[i] += self.alphas[i] * c[i + 1];
            out[i + 1] -= self.alphas[i] * c[i];
        }
        out
    }

    /// `y += Q S Qᵀ x`, scaled by `sign`.
    fn apply_add(&self, x: &[f64], y: &mut [f64], sign: f64) {
        let coeff: Vec<f64> = (0..self.k).map(|j| dot(self.column(j), x)).collect();
        let sc = self.apply_small(&coeff);
        for (j, s) in sc.iter().enumerate() {
            if *s != 0.0 {
                for (yi, qi) in y.iter_mut().zip(self.column(j)) {
                    *yi += sign * s * qi;
                }
            }
        }
    }

    /// Dense `k x k` tridiagonal skew matrix, row-major.
    pub fn small_matrix(&self) -> Vec<Vec<f64>> {
        let mut s = vec![vec![0.0; self.k]; self.k];
        for i in 0..self.k.saturating_sub(1) {
            s[i][i + 1] = self.alphas[i];
            s[i + 1][i] = -self.alphas[i];
        }
        s
    }
}

#[derive(Debug, Clone)]
enum SkewBase {
    /// `J = U - Uᵀ` with `U` strictly upper triangular.
    Upper(CscMatrix),
    /// `𝓛⁻¹ P J Pᵀ 𝓛⁻ᵀ` for the modified factor of the symmetric part.
    Congruent { upper: CscMatrix, factor: Arc<AbsFactor> },
}

/// Skew-symmetric operator stored through its strict upper triangle,
/// optionally congruence-transformed by an incomplete factor and deflated
/// by skew-Lanczos corrections.
#[derive(Debug, Clone)]
pub struct SkewOperator {
    n: usize,
    base: SkewBase,
    deflations: Vec<Deflation>,
}

impl SkewOperator {
    /// Wraps a strictly upper triangular matrix `U` as `J = U - Uᵀ`.
    pub fn from_strict_upper(upper: CscMatrix) -> Result<Self> {
        upper.check_square()?;
        if upper.triplets().any(|(i, j, _)| i >= j) {
            return Err(Error::InvalidStructure(
                "skew operator storage must be strictly upper triangular".into(),
            ));
        }
        Ok(Self { n: upper.nrows(), base: SkewBase::Upper(upper), deflations: vec![] })
    }

    /// Takes the skew part `(A - Aᵀ)/2` of any square matrix.
    pub fn from_matrix(a: &CscMatrix) -> Result<Self> {
        a.check_square()?;
        let j = a.add_scaled(0.5, &a.transpose(), -0.5)?;
        Self::from_strict_upper(j.upper_triangle(true).drop_zeros())
    }

    pub fn zero(n: usize) -> Self {
        Self { n, base: SkewBase::Upper(CscMatrix::zeros(n, n)), deflations: vec![] }
    }

    /// `v ↦ 𝓛⁻¹ P J Pᵀ 𝓛⁻ᵀ v` for the skew part `J` of `self`.
    pub fn congruent(&self, factor: Arc<AbsFactor>) -> Result<Self> {
        let upper = match &self.base {
            SkewBase::Upper(u) if self.deflations.is_empty() => u.clone(),
            _ => {
                return Err(Error::InvalidStructure(
                    "congruence requires a plain stored skew operator".into(),
                ))
            }
        };
        if factor.dim() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, found: factor.dim() });
        }
        Ok(Self { n: self.n, base: SkewBase::Congruent { upper, factor }, deflations: vec![] })
    }

    /// Returns `J - Q S Qᵀ` as a new operator.
    pub fn deflated(&self, deflation: Deflation) -> Result<Self> {
        if deflation.n != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, found: deflation.n });
        }
        let mut out = self.clone();
        if deflation.k > 0 {
            out.deflations.push(deflation);
        }
        Ok(out)
    }

    /// Strict upper triangle of the stored (undeflated, untransformed) matrix.
    pub fn strict_upper(&self) -> &CscMatrix {
        match &self.base {
            SkewBase::Upper(u) => u,
            SkewBase::Congruent { upper, .. } => upper,
        }
    }

    pub fn is_deflated(&self) -> bool {
        !self.deflations.is_empty()
    }

    pub fn deflations(&self) -> &[Deflation] {
        &self.deflations
    }

    /// Full stored matrix `U - Uᵀ`, only available for plain operators.
    pub fn to_csc(&self) -> Option<CscMatrix> {
        match &self.base {
            SkewBase::Upper(u) if self.deflations.is_empty() => {
                Some(u.add_scaled(1.0, &u.transpose(), -1.0).expect("square"))
            }
            _ => None,
        }
    }

    /// Frobenius norm of the stored matrix (`√2 ‖U‖_F`), for plain operators.
    pub fn frobenius_norm(&self) -> Option<f64> {
        match &self.base {
            SkewBase::Upper(u) if self.deflations.is_empty() => {
                Some(std::f64::consts::SQRT_2 * u.frobenius_norm())
            }
            _ => None,
        }
    }

    /// `y = Jᵀ x = -J x`.
    pub fn apply_transpose(&self, x: &[f64], y: &mut [f64]) {
        self.apply(x, y);
        y.iter_mut().for_each(|v| *v = -*v);
    }

    fn apply_stored(upper: &CscMatrix, x: &[f64], y: &mut [f64]) {
        upper.mul_vec_into(x, y);
        let mut t = vec![0.0; x.len()];
        upper.mul_transpose_vec_add(x, &mut t);
        for (yi, ti) in y.iter_mut().zip(&t) {
            *yi -= ti;
        }
    }
}

impl LinearOperator for SkewOperator {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        match &self.base {
            SkewBase::Upper(u) => Self::apply_stored(u, x, y),
            SkewBase::Congruent { upper, factor } => {
                let t = factor.solve_with_lt(x);
                let mut jt = vec![0.0; self.n];
                Self::apply_stored(upper, &t, &mut jt);
                let out = factor.solve_with_l(&jt);
                y.copy_from_slice(&out);
            }
        }
        for d in &self.deflations {
            d.apply_add(x, y, -1.0);
        }
    }
}

/// `A = M + J` with `M = (A + Aᵀ)/2` and `J = (A - Aᵀ)/2`.
pub fn split_sym_skew(a: &CscMatrix) -> Result<(CscMatrix, SkewOperator)> {
    a.check_square()?;
    let at = a.transpose();
    let m = a.add_scaled(0.5, &at, 0.5)?.drop_zeros();
    let j = a.add_scaled(0.5, &at, -0.5)?;
    let skew = SkewOperator::from_strict_upper(j.upper_triangle(true).drop_zeros())?;
    Ok((m, skew))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::norm2;

    #[test]
    fn split_identity() {
        let (m, j) = split_sym_skew(&CscMatrix::identity(3)).unwrap();
        assert_eq!(m, CscMatrix::identity(3));
        assert_eq!(j.strict_upper().nnz(), 0);
    }

    #[test]
    fn split_pure_skew() {
        let a = CscMatrix::from_dense(&[vec![0.0, 1.0], vec![-1.0, 0.0]]);
        let (m, j) = split_sym_skew(&a).unwrap();
        assert_eq!(m.nnz(), 0);
        assert_eq!(j.to_csc().unwrap().to_dense(), a.to_dense());
    }

    #[test]
    fn split_mixed() {
        let a = CscMatrix::from_dense(&[vec![1.0, 3.0], vec![1.0, 2.0]]);
        let (m, j) = split_sym_skew(&a).unwrap();
        assert_eq!(m.to_dense(), vec![vec![1.0, 2.0], vec![2.0, 2.0]]);
        assert_eq!(j.to_csc().unwrap().to_dense(), vec![vec![0.0, 1.0], vec![-1.0, 0.0]]);
    }

    #[test]
    fn split_rejects_rectangular() {
        let a = CscMatrix::zeros(2, 3);
        assert!(matches!(split_sym_skew(&a), Err(Error::NotSquare { .. })));
    }

    #[test]
    fn skew_quadratic_form_vanishes() {
        let a = CscMatrix::from_dense(&[
            vec![1.0, 2.0, -0.5],
            vec![0.3, 0.0, 4.0],
            vec![1.5, -2.0, 1.0],
        ]);
        let (_, j) = split_sym_skew(&a).unwrap();
        let v = [0.7, -1.3, 2.2];
        let jv = j.apply_vec(&v);
        assert!(dot(&v, &jv).abs() <= 1e-12 * j.frobenius_norm().unwrap() * norm2(&v).powi(2));
    }

    #[test]
    fn deflation_with_empty_basis_is_identity_map() {
        let a = CscMatrix::from_dense(&[vec![0.0, 1.0], vec![-1.0, 0.0]]);
        let j = SkewOperator::from_matrix(&a).unwrap();
        let d = j.deflated(Deflation { n: 2, k: 0, basis: vec![], alphas: vec![] }).unwrap();
        assert_eq!(d.apply_vec(&[1.0, 2.0]), j.apply_vec(&[1.0, 2.0]));
    }

    #[test]
    fn strict_upper_required() {
        let l = CscMatrix::from_dense(&[vec![0.0, 0.0], vec![1.0, 0.0]]);
        assert!(SkewOperator::from_strict_upper(l).is_err());
    }
}
