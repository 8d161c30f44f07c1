//! Maximum product transversal with scaling.
//!
//! Finds a row permutation maximizing `∏ |a_{σ(j), j}|` by solving the
//! assignment problem on costs `c_ij = log max_k |a_kj| - log |a_ij|` with a
//! shortest augmenting path method that keeps dual variables. The duals give
//! row and column scalings under which the permuted matrix has a diagonal of
//! unit modulus and no entry of modulus above one.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::sparse::CscMatrix;

const NONE: usize = usize::MAX;

/// Optimal matching plus the assignment duals.
#[derive(Debug, Clone, PartialEq)]
pub struct Transversal {
    /// `perm[j]` is the source row placed at row `j` (matched to column `j`).
    pub perm: Vec<usize>,
    /// Row duals `u`, indexed by original row.
    pub row_dual: Vec<f64>,
    /// Column duals `v`.
    pub col_dual: Vec<f64>,
    /// `max_k |a_kj|` per column.
    pub col_max: Vec<f64>,
}

impl Transversal {
    /// `d_r(i) = exp(u_i)`.
    pub fn row_scaling(&self) -> Vec<f64> {
        self.row_dual.iter().map(|u| u.exp()).collect()
    }

    /// `d_c(j) = exp(v_j) / max_k |a_kj|`.
    pub fn col_scaling(&self) -> Vec<f64> {
        self.col_dual.iter().zip(&self.col_max).map(|(v, m)| v.exp() / m).collect()
    }
}

/// `Ā = 𝒫 D_r A D_c` together with the maps between original and scaled
/// right-hand sides and solutions.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledSystem {
    pub perm: Vec<usize>,
    /// `D_r`, indexed by original row.
    pub row_scale: Vec<f64>,
    pub col_scale: Vec<f64>,
    pub matrix: CscMatrix,
}

impl ScaledSystem {
    /// `b ↦ 𝒫 D_r b`.
    pub fn transform_rhs(&self, b: &[f64]) -> Vec<f64> {
        self.perm.iter().map(|&src| self.row_scale[src] * b[src]).collect()
    }

    /// `x̄ ↦ D_c x̄`.
    pub fn recover_solution(&self, xbar: &[f64]) -> Vec<f64> {
        xbar.iter().zip(&self.col_scale).map(|(x, d)| x * d).collect()
    }

    /// `x ↦ D_c⁻¹ x`.
    pub fn forward_solution(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.col_scale).map(|(x, d)| x / d).collect()
    }
}

#[derive(Clone, Copy, PartialEq)]
struct HeapItem {
    dist: f64,
    row: usize,
}

impl Eq for HeapItem {}

impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on (dist, row)
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.row.cmp(&self.row))
    }
}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

pub fn max_product_transversal(a: &CscMatrix) -> Result<Transversal> {
    a.check_square()?;
    let n = a.ncols();

    let mut col_max = vec![0.0f64; n];
    for (j, m) in col_max.iter_mut().enumerate() {
        *m = a.col(j).1.iter().fold(0.0, |acc, v| acc.max(v.abs()));
    }
    // exact zeros never enter the matching
    let cost: Vec<f64> = (0..n)
        .flat_map(|j| {
            let lm = col_max[j].ln();
            a.col(j).1.iter().map(move |v| {
                if *v == 0.0 {
                    f64::INFINITY
                } else {
                    (lm - v.abs().ln()).max(0.0)
                }
            })
        })
        .collect();

    let mut u = vec![0.0f64; n];
    let mut v = vec![0.0f64; n];
    let mut row_of_col = vec![NONE; n];
    let mut col_of_row = vec![NONE; n];

    // zero-cost greedy start: each column takes its lowest free max-modulus row
    for j in 0..n {
        let start = a.colptr()[j];
        for (off, &i) in a.col(j).0.iter().enumerate() {
            if cost[start + off] == 0.0 && col_of_row[i] == NONE {
                row_of_col[j] = i;
                col_of_row[i] = j;
                break;
            }
        }
    }

    let mut dist = vec![f64::INFINITY; n];
    let mut pred = vec![NONE; n];
    let mut finalized = vec![false; n];
    let mut touched: Vec<usize> = Vec::new();
    let mut done: Vec<usize> = Vec::new();
    let mut heap = BinaryHeap::new();
    let mut matched = row_of_col.iter().filter(|&&r| r != NONE).count();

    for root in 0..n {
        if row_of_col[root] != NONE {
            continue;
        }
        heap.clear();
        for &i in &touched {
            dist[i] = f64::INFINITY;
            pred[i] = NONE;
            finalized[i] = false;
        }
        touched.clear();
        done.clear();

        let relax = |j: usize,
                     base: f64,
                     dist: &mut Vec<f64>,
                     pred: &mut Vec<usize>,
                     touched: &mut Vec<usize>,
                     heap: &mut BinaryHeap<HeapItem>,
                     finalized: &Vec<bool>,
                     u: &Vec<f64>,
                     v: &Vec<f64>| {
            let start = a.colptr()[j];
            for (off, &i) in a.col(j).0.iter().enumerate() {
                let c = cost[start + off];
                if !c.is_finite() || finalized[i] {
                    continue;
                }
                let nd = base + (c - u[i] - v[j]).max(0.0);
                if nd < dist[i] {
                    if dist[i].is_infinite() {
                        touched.push(i);
                    }
                    dist[i] = nd;
                    pred[i] = j;
                    heap.push(HeapItem { dist: nd, row: i });
                }
            }
        };

        relax(root, 0.0, &mut dist, &mut pred, &mut touched, &mut heap, &finalized, &u, &v);
        let mut free_row = NONE;
        while let Some(HeapItem { dist: d, row: i }) = heap.pop() {
            if finalized[i] || d > dist[i] {
                continue;
            }
            finalized[i] = true;
            done.push(i);
            if col_of_row[i] == NONE {
                free_row = i;
                break;
            }
            let jn = col_of_row[i];
            relax(jn, d, &mut dist, &mut pred, &mut touched, &mut heap, &finalized, &u, &v);
        }
        if free_row == NONE {
            return Err(Error::StructurallySingular { matched, n });
        }

        let total = dist[free_row];
        v[root] += total;
        for &i in &done {
            let slack = total - dist[i];
            u[i] -= slack;
            if i != free_row {
                v[col_of_row[i]] += slack;
            }
        }

        let mut i = free_row;
        loop {
            let j = pred[i];
            let prev = row_of_col[j];
            row_of_col[j] = i;
            col_of_row[i] = j;
            if j == root {
                break;
            }
            i = prev;
        }
        matched += 1;
    }

    Ok(Transversal { perm: row_of_col, row_dual: u, col_dual: v, col_max })
}

/// Applies the permutation and dual scalings. A final row rescaling forces
/// `|ā_jj| = 1` exactly against accumulated rounding in the duals.
pub fn apply_transversal(a: &CscMatrix, t: &Transversal) -> Result<ScaledSystem> {
    a.check_square()?;
    let n = a.nrows();
    for len in [t.perm.len(), t.row_dual.len(), t.col_dual.len(), t.col_max.len()] {
        if len != n {
            return Err(Error::DimensionMismatch { expected: n, found: len });
        }
    }
    let mut row_scale = t.row_scaling();
    let col_scale = t.col_scaling();
    for j in 0..n {
        let src = t.perm[j];
        let d = (row_scale[src] * a.get(src, j) * col_scale[j]).abs();
        if d == 0.0 || !d.is_finite() {
            return Err(Error::StructurallySingular { matched: j, n });
        }
        row_scale[src] /= d;
    }
    let matrix = a.scale(&row_scale, &col_scale).permute_rows(&t.perm);
    Ok(ScaledSystem { perm: t.perm.clone(), row_scale, col_scale, matrix })
}

/// Runs the matcher and applies it.
pub fn scale_and_permute(a: &CscMatrix) -> Result<ScaledSystem> {
    let t = max_product_transversal(a)?;
    apply_transversal(a, &t)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check_scaled(s: &ScaledSystem) {
        let m = &s.matrix;
        for j in 0..m.ncols() {
            assert!((m.get(j, j).abs() - 1.0).abs() <= 1e-10);
            for (_, v) in m.col_iter(j) {
                assert!(v.abs() <= 1.0 + 1e-10, "entry {v}");
            }
        }
    }

    #[test]
    fn signed_permutation_matrix() {
        let a = CscMatrix::from_dense(&[
            vec![0.0, -1.0, 0.0],
            vec![0.0, 0.0, 1.0],
            vec![1.0, 0.0, 0.0],
        ]);
        let t = max_product_transversal(&a).unwrap();
        assert_eq!(t.perm, vec![2, 0, 1]);
        let s = apply_transversal(&a, &t).unwrap();
        assert!(s.row_scale.iter().chain(&s.col_scale).all(|d| (d - 1.0).abs() < 1e-15));
        assert_eq!(s.matrix.diagonal(), vec![1.0, -1.0, 1.0]);
    }

    #[test]
    fn two_by_two_swap() {
        let a = CscMatrix::from_dense(&[vec![0.0, 2.0], vec![3.0, 0.0]]);
        let s = scale_and_permute(&a).unwrap();
        assert_eq!(s.perm, vec![1, 0]);
        check_scaled(&s);
    }

    #[test]
    fn scaled_identity() {
        let a = CscMatrix::diagonal_matrix(&[3.0, 3.0, 3.0]);
        let s = scale_and_permute(&a).unwrap();
        for i in 0..3 {
            assert!((s.row_scale[i] * s.col_scale[i] - 1.0 / 3.0).abs() < 1e-15);
        }
        check_scaled(&s);
        assert_eq!(s.matrix.diagonal(), vec![1.0; 3]);
    }

    #[test]
    fn small_general() {
        let a = CscMatrix::from_dense(&[vec![1.0, 4.0], vec![0.5, 1.0]]);
        let s = scale_and_permute(&a).unwrap();
        check_scaled(&s);
        // |4 * 0.5| > |1 * 1|
        assert_eq!(s.perm, vec![1, 0]);
    }

    #[test]
    fn structurally_singular() {
        let a = CscMatrix::from_dense(&[vec![1.0, 2.0], vec![0.0, 0.0]]);
        assert!(matches!(
            max_product_transversal(&a),
            Err(Error::StructurallySingular { .. })
        ));
        // stored zeros do not count as matchable entries
        let z = CscMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (0, 1, 1.0), (1, 1, 0.0)]).unwrap();
        assert!(max_product_transversal(&z).is_err());
    }

    #[test]
    fn rhs_and_solution_maps() {
        let a = CscMatrix::from_dense(&[vec![0.0, 2.0, 0.0], vec![5.0, 0.0, 1.0], vec![0.0, 1.0, 4.0]]);
        let s = scale_and_permute(&a).unwrap();
        let x = [1.0, -2.0, 0.5];
        let b = a.spmv(&x).unwrap();
        let bbar = s.transform_rhs(&b);
        let xbar = s.forward_solution(&x);
        let lhs = s.matrix.spmv(&xbar).unwrap();
        for (l, r) in lhs.iter().zip(&bbar) {
            assert!((l - r).abs() < 1e-13);
        }
        let back = s.recover_solution(&xbar);
        for (p, q) in back.iter().zip(&x) {
            assert!((p - q).abs() < 1e-15);
        }
    }
}
