//! Compressed sparse column storage and the structural/numeric kernels the
//! solver pipeline is built from.

use crate::error::{Error, Result};

/// Real sparse matrix in compressed sparse column form, zero-based.
///
/// Row indices within a column are strictly increasing and
/// `colptr[ncols] == rowind.len() == values.len()`.
#[derive(Debug, Clone, PartialEq)]
pub struct CscMatrix {
    nrows: usize,
    ncols: usize,
    colptr: Vec<usize>,
    rowind: Vec<usize>,
    values: Vec<f64>,
}

impl CscMatrix {
    /// Builds a matrix from raw CSC arrays, checking every structural invariant.
    pub fn new(
        nrows: usize,
        ncols: usize,
        colptr: Vec<usize>,
        rowind: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if colptr.len() != ncols + 1 {
            return Err(Error::InvalidStructure(format!(
                "column pointer length {} != ncols + 1 = {}",
                colptr.len(),
                ncols + 1
            )));
        }
        if colptr[0] != 0 {
            return Err(Error::InvalidStructure("first column pointer must be 0".into()));
        }
        if rowind.len() != values.len() || colptr[ncols] != rowind.len() {
            return Err(Error::InvalidStructure(format!(
                "stored count mismatch: colptr end {}, {} row indices, {} values",
                colptr[ncols],
                rowind.len(),
                values.len()
            )));
        }
        for j in 0..ncols {
            if colptr[j] > colptr[j + 1] {
                return Err(Error::InvalidStructure(format!(
                    "column pointers decrease at column {j}"
                )));
            }
            let rows = &rowind[colptr[j]..colptr[j + 1]];
            for (k, &r) in rows.iter().enumerate() {
                if r >= nrows {
                    return Err(Error::InvalidStructure(format!(
                        "row index {r} out of range in column {j}"
                    )));
                }
                if k > 0 && rows[k - 1] >= r {
                    return Err(Error::InvalidStructure(format!(
                        "row indices not strictly increasing in column {j}"
                    )));
                }
            }
        }
        Ok(Self { nrows, ncols, colptr, rowind, values })
    }

    /// Assembles from coordinate triplets. Duplicate coordinates are summed;
    /// the summed entry stays stored even if it cancels to zero.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        triplets: &[(usize, usize, f64)],
    ) -> Result<Self> {
        let mut counts = vec![0usize; ncols + 1];
        for &(r, c, _) in triplets {
            if r >= nrows || c >= ncols {
                return Err(Error::InvalidStructure(format!(
                    "triplet ({r}, {c}) outside {nrows}x{ncols}"
                )));
            }
            counts[c + 1] += 1;
        }
        for j in 0..ncols {
            counts[j + 1] += counts[j];
        }
        let mut next = counts.clone();
        let mut rows = vec![0usize; triplets.len()];
        let mut vals = vec![0f64; triplets.len()];
        for &(r, c, v) in triplets {
            let p = next[c];
            rows[p] = r;
            vals[p] = v;
            next[c] += 1;
        }
        let mut colptr = Vec::with_capacity(ncols + 1);
        let mut rowind = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        colptr.push(0);
        let mut order: Vec<usize> = Vec::new();
        for j in 0..ncols {
            order.clear();
            order.extend(counts[j]..counts[j + 1]);
            order.sort_by_key(|&p| rows[p]);
            for &p in &order {
                if rowind.len() > colptr[j] && *rowind.last().unwrap() == rows[p] {
                    *values.last_mut().unwrap() += vals[p];
                } else {
                    rowind.push(rows[p]);
                    values.push(vals[p]);
                }
            }
            colptr.push(rowind.len());
        }
        Ok(Self { nrows, ncols, colptr, rowind, values })
    }

    /// Builds from a row-major dense array, storing only nonzero entries.
    pub fn from_dense(rows: &[Vec<f64>]) -> Self {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, |r| r.len());
        let mut colptr = vec![0];
        let mut rowind = Vec::new();
        let mut values = Vec::new();
        for j in 0..ncols {
            for (i, row) in rows.iter().enumerate() {
                assert_eq!(row.len(), ncols, "ragged dense input");
                if row[j] != 0.0 {
                    rowind.push(i);
                    values.push(row[j]);
                }
            }
            colptr.push(rowind.len());
        }
        Self { nrows, ncols, colptr, rowind, values }
    }

    pub fn identity(n: usize) -> Self {
        Self::diagonal_matrix(&vec![1.0; n])
    }

    pub fn diagonal_matrix(diag: &[f64]) -> Self {
        let n = diag.len();
        Self {
            nrows: n,
            ncols: n,
            colptr: (0..=n).collect(),
            rowind: (0..n).collect(),
            values: diag.to_vec(),
        }
    }

    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self { nrows, ncols, colptr: vec![0; ncols + 1], rowind: vec![], values: vec![] }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn is_square(&self) -> bool {
        self.nrows == self.ncols
    }

    pub fn colptr(&self) -> &[usize] {
        &self.colptr
    }

    pub fn rowind(&self) -> &[usize] {
        &self.rowind
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Row indices and values of column `j`.
    pub fn col(&self, j: usize) -> (&[usize], &[f64]) {
        let range = self.colptr[j]..self.colptr[j + 1];
        (&self.rowind[range.clone()], &self.values[range])
    }

    pub fn col_iter(&self, j: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (r, v) = self.col(j);
        r.iter().copied().zip(v.iter().copied())
    }

    /// Iterates `(row, col, value)` over stored entries in column-major order.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.ncols).flat_map(move |j| self.col_iter(j).map(move |(i, v)| (i, j, v)))
    }

    /// Stored value at `(i, j)`, or 0 when the position is structurally empty.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (rows, vals) = self.col(j);
        match rows.binary_search(&i) {
            Ok(p) => vals[p],
            Err(_) => 0.0,
        }
    }

    pub(crate) fn check_square(&self) -> Result<()> {
        if self.is_square() {
            Ok(())
        } else {
            Err(Error::NotSquare { nrows: self.nrows, ncols: self.ncols })
        }
    }

    /// `y = A x`.
    pub fn spmv(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.ncols {
            return Err(Error::DimensionMismatch { expected: self.ncols, found: x.len() });
        }
        let mut y = vec![0.0; self.nrows];
        self.mul_vec_into(x, &mut y);
        Ok(y)
    }

    /// `y = A x` without a dimension check; `y` is overwritten.
    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        y.iter_mut().for_each(|v| *v = 0.0);
        self.mul_vec_add(x, y);
    }

    /// `y += A x`.
    pub fn mul_vec_add(&self, x: &[f64], y: &mut [f64]) {
        for j in 0..self.ncols {
            let xj = x[j];
            if xj == 0.0 {
                continue;
            }
            for p in self.colptr[j]..self.colptr[j + 1] {
                y[self.rowind[p]] += self.values[p] * xj;
            }
        }
    }

    /// `y += Aᵀ x`.
    pub fn mul_transpose_vec_add(&self, x: &[f64], y: &mut [f64]) {
        for (j, yj) in y.iter_mut().enumerate().take(self.ncols) {
            let mut acc = 0.0;
            for p in self.colptr[j]..self.colptr[j + 1] {
                acc += self.values[p] * x[self.rowind[p]];
            }
            *yj += acc;
        }
    }

    pub fn spmv_transpose(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.nrows {
            return Err(Error::DimensionMismatch { expected: self.nrows, found: x.len() });
        }
        let mut y = vec![0.0; self.ncols];
        self.mul_transpose_vec_add(x, &mut y);
        Ok(y)
    }

    pub fn transpose(&self) -> Self {
        let mut counts = vec![0usize; self.nrows + 1];
        for &r in &self.rowind {
            counts[r + 1] += 1;
        }
        for i in 0..self.nrows {
            counts[i + 1] += counts[i];
        }
        let mut next = counts.clone();
        let mut rowind = vec![0usize; self.nnz()];
        let mut values = vec![0f64; self.nnz()];
        for j in 0..self.ncols {
            for p in self.colptr[j]..self.colptr[j + 1] {
                let q = next[self.rowind[p]];
                rowind[q] = j;
                values[q] = self.values[p];
                next[self.rowind[p]] += 1;
            }
        }
        Self { nrows: self.ncols, ncols: self.nrows, colptr: counts, rowind, values }
    }

    /// `alpha * self + beta * other`, union pattern.
    pub fn add_scaled(&self, alpha: f64, other: &CscMatrix, beta: f64) -> Result<Self> {
        if self.nrows != other.nrows || self.ncols != other.ncols {
            return Err(Error::DimensionMismatch {
                expected: self.nrows * self.ncols,
                found: other.nrows * other.ncols,
            });
        }
        let mut colptr = Vec::with_capacity(self.ncols + 1);
        let mut rowind = Vec::with_capacity(self.nnz() + other.nnz());
        let mut values = Vec::with_capacity(self.nnz() + other.nnz());
        colptr.push(0);
        for j in 0..self.ncols {
            let (ra, va) = self.col(j);
            let (rb, vb) = other.col(j);
            let (mut a, mut b) = (0, 0);
            while a < ra.len() || b < rb.len() {
                let ia = ra.get(a).copied().unwrap_or(usize::MAX);
                let ib = rb.get(b).copied().unwrap_or(usize::MAX);
                if ia == ib {
                    rowind.push(ia);
                    values.push(alpha * va[a] + beta * vb[b]);
                    a += 1;
                    b += 1;
                } else if ia < ib {
                    rowind.push(ia);
                    values.push(alpha * va[a]);
                    a += 1;
                } else {
                    rowind.push(ib);
                    values.push(beta * vb[b]);
                    b += 1;
                }
            }
            colptr.push(rowind.len());
        }
        Ok(Self { nrows: self.nrows, ncols: self.ncols, colptr, rowind, values })
    }

    /// Sparse product `self * other` (Gustavson, column by column).
    pub fn matmul(&self, other: &CscMatrix) -> Result<Self> {
        self.product(other, false)
    }

    /// Structural product of the patterns of `self` and `other`: every
    /// resulting entry is 1, no numerical cancellation is considered.
    pub fn pattern_matmul(&self, other: &CscMatrix) -> Result<Self> {
        self.product(other, true)
    }

    fn product(&self, other: &CscMatrix, pattern_only: bool) -> Result<Self> {
        if self.ncols != other.nrows {
            return Err(Error::DimensionMismatch { expected: self.ncols, found: other.nrows });
        }
        let m = self.nrows;
        let mut mark = vec![usize::MAX; m];
        let mut acc = vec![0.0; m];
        let mut colptr = Vec::with_capacity(other.ncols + 1);
        let mut rowind = Vec::new();
        let mut values = Vec::new();
        colptr.push(0);
        let mut touched: Vec<usize> = Vec::new();
        for j in 0..other.ncols {
            touched.clear();
            for (k, bkj) in other.col_iter(j) {
                for (i, aik) in self.col_iter(k) {
                    if mark[i] != j {
                        mark[i] = j;
                        acc[i] = 0.0;
                        touched.push(i);
                    }
                    acc[i] += aik * bkj;
                }
            }
            touched.sort_unstable();
            for &i in &touched {
                rowind.push(i);
                values.push(if pattern_only { 1.0 } else { acc[i] });
            }
            colptr.push(rowind.len());
        }
        Ok(Self { nrows: m, ncols: other.ncols, colptr, rowind, values })
    }

    /// Diagonal entries, absent ones read as 0.
    pub fn diagonal(&self) -> Vec<f64> {
        let n = self.nrows.min(self.ncols);
        (0..n).map(|i| self.get(i, i)).collect()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Entries with `keep(row, col)` retained.
    pub fn filter(&self, keep: impl Fn(usize, usize, f64) -> bool) -> Self {
        let mut colptr = Vec::with_capacity(self.ncols + 1);
        let mut rowind = Vec::new();
        let mut values = Vec::new();
        colptr.push(0);
        for j in 0..self.ncols {
            for (i, v) in self.col_iter(j) {
                if keep(i, j, v) {
                    rowind.push(i);
                    values.push(v);
                }
            }
            colptr.push(rowind.len());
        }
        Self { nrows: self.nrows, ncols: self.ncols, colptr, rowind, values }
    }

    /// Removes explicitly stored zeros.
    pub fn drop_zeros(&self) -> Self {
        self.filter(|_, _, v| v != 0.0)
    }

    /// Strict (`i < j`) or inclusive upper triangle.
    pub fn upper_triangle(&self, strict: bool) -> Self {
        self.filter(|i, j, _| if strict { i < j } else { i <= j })
    }

    pub fn lower_triangle(&self, strict: bool) -> Self {
        self.filter(|i, j, _| if strict { i > j } else { i >= j })
    }

    /// `D_r A D_c` for diagonal scalings given as vectors.
    pub fn scale(&self, row_scale: &[f64], col_scale: &[f64]) -> Self {
        let mut out = self.clone();
        for j in 0..self.ncols {
            for p in self.colptr[j]..self.colptr[j + 1] {
                out.values[p] *= row_scale[self.rowind[p]] * col_scale[j];
            }
        }
        out
    }

    /// Row permutation: row `i` of the result is row `perm[i]` of `self`.
    pub fn permute_rows(&self, perm: &[usize]) -> Self {
        let inv = invert_permutation(perm);
        let mut triplets: Vec<(usize, usize, f64)> = Vec::with_capacity(self.nnz());
        for (i, j, v) in self.triplets() {
            triplets.push((inv[i], j, v));
        }
        Self::from_triplets(self.nrows, self.ncols, &triplets).expect("permutation preserves bounds")
    }

    /// Symmetric permutation `P A Pᵀ`: entry `(i, j)` of the result is
    /// entry `(perm[i], perm[j])` of `self`.
    pub fn symmetric_permute(&self, perm: &[usize]) -> Self {
        let inv = invert_permutation(perm);
        let mut triplets: Vec<(usize, usize, f64)> = Vec::with_capacity(self.nnz());
        for (i, j, v) in self.triplets() {
            triplets.push((inv[i], inv[j], v));
        }
        Self::from_triplets(self.nrows, self.ncols, &triplets).expect("permutation preserves bounds")
    }

    /// Row-major dense copy; intended for small matrices and tests.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.ncols]; self.nrows];
        for (i, j, v) in self.triplets() {
            d[i][j] += v;
        }
        d
    }

    /// Half bandwidth `max |i - j|` over stored entries.
    pub fn bandwidth(&self) -> usize {
        self.triplets().map(|(i, j, _)| i.abs_diff(j)).max().unwrap_or(0)
    }
}

pub fn invert_permutation(perm: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; perm.len()];
    for (i, &p) in perm.iter().enumerate() {
        inv[p] = i;
    }
    inv
}

pub fn is_permutation(perm: &[usize]) -> bool {
    let mut seen = vec![false; perm.len()];
    for &p in perm {
        if p >= perm.len() || seen[p] {
            return false;
        }
        seen[p] = true;
    }
    true
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `y += alpha * x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}
