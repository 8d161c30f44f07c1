//! Sparse Cholesky factorization `P A Pᵀ = L Lᵀ` (up-looking, elimination
//! tree driven) for symmetric positive definite matrices.

use crate::baseline::rcm_order;
use crate::error::{Error, Result};
use crate::sparse::CscMatrix;

const NONE: usize = usize::MAX;

#[derive(Debug, Clone)]
pub struct CholeskyFactor {
    n: usize,
    perm: Vec<usize>,
    /// Columns of `L`, diagonal first then increasing rows.
    cols: Vec<Vec<(usize, f64)>>,
}

impl CholeskyFactor {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.cols.iter().map(Vec::len).sum()
    }

    pub fn perm(&self) -> &[usize] {
        &self.perm
    }

    /// Diagonal of `L` in factor order.
    pub fn pivots(&self) -> impl Iterator<Item = f64> + '_ {
        self.cols.iter().map(|c| c[0].1)
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut y: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for (j, col) in self.cols.iter().enumerate() {
            y[j] /= col[0].1;
            let yj = y[j];
            for &(i, v) in &col[1..] {
                y[i] -= v * yj;
            }
        }
        for (j, col) in self.cols.iter().enumerate().rev() {
            let mut acc = y[j];
            for &(i, v) in &col[1..] {
                acc -= v * y[i];
            }
            y[j] = acc / col[0].1;
        }
        let mut x = vec![0.0; self.n];
        for (k, &p) in self.perm.iter().enumerate() {
            x[p] = y[k];
        }
        x
    }
}

/// Elimination tree of a matrix given by its upper triangle (column `k`
/// holds rows `i <= k`).
fn etree(upper: &CscMatrix) -> Vec<usize> {
    let n = upper.ncols();
    let mut parent = vec![NONE; n];
    let mut ancestor = vec![NONE; n];
    for k in 0..n {
        for &start in upper.col(k).0 {
            let mut i = start;
            while i != NONE && i < k {
                let next = ancestor[i];
                ancestor[i] = k;
                if next == NONE {
                    parent[i] = k;
                }
                i = next;
            }
        }
    }
    parent
}

/// Factors `a` (full symmetric storage) with a reverse Cuthill-McKee
/// ordering. Gives up with `InvalidStructure` once `L` would exceed
/// `max_nnz` entries.
pub fn cholesky(a: &CscMatrix, max_nnz: usize) -> Result<CholeskyFactor> {
    a.check_square()?;
    let perm = rcm_order(a);
    cholesky_with_order(a, perm, max_nnz)
}

pub fn cholesky_with_order(a: &CscMatrix, perm: Vec<usize>, max_nnz: usize) -> Result<CholeskyFactor> {
    a.check_square()?;
    let n = a.nrows();
    let c = a.symmetric_permute(&perm).upper_triangle(false);
    let parent = etree(&c);

    let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    let mut x = vec![0.0; n];
    let mut mark = vec![NONE; n];
    let mut stack: Vec<usize> = Vec::new();
    let mut path: Vec<usize> = Vec::new();
    let mut total = 0usize;
    for k in 0..n {
        // pattern of row k of L, topologically ordered
        stack.clear();
        mark[k] = k;
        for (i, v) in c.col_iter(k) {
            x[i] = v;
            path.clear();
            let mut j = i;
            while j != NONE && mark[j] != k {
                path.push(j);
                mark[j] = k;
                j = parent[j];
            }
            stack.extend(path.iter().rev());
        }
        let mut d = x[k];
        x[k] = 0.0;
        for &i in stack.iter().rev() {
            let col = &cols[i];
            let lki = x[i] / col[0].1;
            x[i] = 0.0;
            for &(r, v) in &col[1..] {
                x[r] -= v * lki;
            }
            d -= lki * lki;
            cols[i].push((k, lki));
        }
        if !(d > 0.0) || !d.is_finite() {
            return Err(Error::NotPositiveDefinite { column: perm[k] });
        }
        cols[k].push((k, d.sqrt()));
        total += stack.len() + 1;
        if total > max_nnz {
            return Err(Error::InvalidStructure(format!(
                "cholesky fill exceeds {max_nnz} entries"
            )));
        }
    }
    Ok(CholeskyFactor { n, perm, cols })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spd_example() -> CscMatrix {
        CscMatrix::from_dense(&[
            vec![4.0, 1.0, 0.0, 1.0],
            vec![1.0, 5.0, 2.0, 0.0],
            vec![0.0, 2.0, 6.0, 1.0],
            vec![1.0, 0.0, 1.0, 3.0],
        ])
    }

    #[test]
    fn solves_spd_system() {
        let a = spd_example();
        let f = cholesky(&a, usize::MAX).unwrap();
        let x = [1.0, -2.0, 0.5, 3.0];
        let b = a.spmv(&x).unwrap();
        let y = f.solve(&b);
        for (p, q) in x.iter().zip(&y) {
            assert!((p - q).abs() < 1e-13);
        }
    }

    #[test]
    fn identity_ordering_matches_dense_factor() {
        let a = CscMatrix::from_dense(&[vec![4.0, 2.0], vec![2.0, 5.0]]);
        let f = cholesky_with_order(&a, vec![0, 1], usize::MAX).unwrap();
        assert_eq!(f.cols[0], vec![(0, 2.0), (1, 1.0)]);
        assert_eq!(f.cols[1], vec![(1, 2.0)]);
    }

    #[test]
    fn indefinite_is_rejected() {
        let a = CscMatrix::from_dense(&[vec![1.0, 2.0], vec![2.0, 1.0]]);
        assert!(matches!(
            cholesky_with_order(&a, vec![0, 1], usize::MAX),
            Err(Error::NotPositiveDefinite { column: 1 })
        ));
    }

    #[test]
    fn fill_guard() {
        assert!(cholesky(&spd_example(), 3).is_err());
    }
}
