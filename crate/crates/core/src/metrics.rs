//! Skew-symmetry and diagonal-distance measures of a square matrix.

use crate::error::Result;
use crate::sparse::CscMatrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatrixMetrics {
    /// `‖(X - Xᵀ)/2‖_F / ‖X - 𝒟(X)‖_F`, in `[0, 1]`.
    pub skew_symmetry_ratio: f64,
    /// `‖𝒟(X) - I‖_F`.
    pub diagonal_distance: f64,
}

impl MatrixMetrics {
    /// Ratio as a percentage rounded to one decimal.
    pub fn skew_percent(&self) -> f64 {
        (self.skew_symmetry_ratio * 1000.0).round() / 10.0
    }
}

pub fn metrics(x: &CscMatrix) -> Result<MatrixMetrics> {
    x.check_square()?;
    let skew = x.add_scaled(0.5, &x.transpose(), -0.5)?;
    let skew_norm = skew.frobenius_norm();
    let off_norm = x.filter(|i, j, _| i != j).frobenius_norm();
    // a diagonal matrix has a vacuously skew off-diagonal part
    let ratio = if off_norm == 0.0 { 1.0 } else { (skew_norm / off_norm).min(1.0) };
    let distance = x
        .diagonal()
        .iter()
        .map(|d| (d - 1.0) * (d - 1.0))
        .sum::<f64>()
        .sqrt();
    Ok(MatrixMetrics { skew_symmetry_ratio: ratio, diagonal_distance: distance })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pure_skew_has_unit_ratio() {
        let x = CscMatrix::from_dense(&[vec![0.0, 2.0], vec![-2.0, 0.0]]);
        let m = metrics(&x).unwrap();
        assert_eq!(m.skew_symmetry_ratio, 1.0);
        assert_eq!(m.skew_percent(), 100.0);
        assert!((m.diagonal_distance - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn symmetric_unit_diagonal() {
        let x = CscMatrix::from_dense(&[vec![1.0, 0.5], vec![0.5, 1.0]]);
        let m = metrics(&x).unwrap();
        assert_eq!(m.skew_symmetry_ratio, 0.0);
        assert_eq!(m.diagonal_distance, 0.0);
    }

    #[test]
    fn identity_uses_diagonal_convention() {
        let m = metrics(&CscMatrix::identity(4)).unwrap();
        assert_eq!(m.skew_symmetry_ratio, 1.0);
        assert_eq!(m.diagonal_distance, 0.0);
    }

    #[test]
    fn general_matrix_is_seventy_percent() {
        // one-sided off-diagonal entries give the 1/√2 ratio
        let x = CscMatrix::from_dense(&[vec![1.0, 3.0], vec![0.0, 1.0]]);
        let m = metrics(&x).unwrap();
        assert!((m.skew_symmetry_ratio - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        assert_eq!(m.skew_percent(), 70.7);
    }
}
