//! Incomplete symmetric indefinite `LDLᵀ` factorization with Bunch-Kaufman
//! pivoting, the absolute-value modification of its block diagonal, and
//! the sparse low-rank decomposition of the resulting remainder.
//!
//! The factorization is right-looking: the active Schur complement is kept
//! in full symmetric storage so the pivot test can read any active column
//! directly. Dropping acts on the columns of `L`; the Schur update uses only
//! the kept entries, so `L D Lᵀ` is the exact factorization of a nearby
//! matrix.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::sparse::CscMatrix;

/// Bunch-Kaufman growth constant `(1 + √17) / 8`.
pub const BK_ALPHA: f64 = 0.640_388_203_202_208_4;

/// Relative cutoff below which a remainder eigenvalue or entry counts as zero.
pub const EIG_ZERO_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum IldlVariant {
    /// At most as many stored entries per column of `L` as the original
    /// matrix column has off-diagonal entries; no threshold dropping.
    NoFill,
    /// Drops `|l_ij| < τ ‖l_{:,j}‖₂`; any fill is allowed. `τ = 0` gives
    /// the complete factorization.
    Threshold(f64),
}

impl IldlVariant {
    pub fn exact() -> Self {
        IldlVariant::Threshold(0.0)
    }
}

/// One diagonal block of `D`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PivotBlock {
    One { index: usize, d: f64 },
    /// Symmetric `[[a, b], [b, c]]` occupying `index` and `index + 1`.
    Two { index: usize, a: f64, b: f64, c: f64 },
}

impl PivotBlock {
    pub fn index(&self) -> usize {
        match *self {
            PivotBlock::One { index, .. } | PivotBlock::Two { index, .. } => index,
        }
    }

    pub fn size(&self) -> usize {
        match self {
            PivotBlock::One { .. } => 1,
            PivotBlock::Two { .. } => 2,
        }
    }

    /// Number of negative eigenvalues.
    pub fn negative_count(&self) -> usize {
        match *self {
            PivotBlock::One { d, .. } => usize::from(d < 0.0),
            PivotBlock::Two { a, b, c, .. } => {
                let (l1, l2) = sym2_eigenvalues(a, b, c);
                usize::from(l1 < 0.0) + usize::from(l2 < 0.0)
            }
        }
    }
}

/// `P M Pᵀ ≈ L D Lᵀ` with `L` unit lower triangular (diagonal implicit).
#[derive(Debug, Clone)]
pub struct BlockLdlFactor {
    n: usize,
    /// Strictly lower part of `L`.
    pub l: CscMatrix,
    pub blocks: Vec<PivotBlock>,
    /// `perm[k]` is the original index at pivot position `k`.
    pub perm: Vec<usize>,
    pub variant: IldlVariant,
}

impl BlockLdlFactor {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn negative_pivots(&self) -> usize {
        self.blocks.iter().map(PivotBlock::negative_count).sum()
    }

    pub fn two_by_two_count(&self) -> usize {
        self.blocks.iter().filter(|b| b.size() == 2).count()
    }
}

/// Active Schur complement in full symmetric storage plus the computed
/// columns of `L`, all indexed by current pivot position.
struct Workspace {
    cols: Vec<BTreeMap<usize, f64>>,
    l_cols: Vec<Vec<(usize, f64)>>,
    l_row_cols: Vec<Vec<usize>>,
    perm: Vec<usize>,
}

impl Workspace {
    fn get(&self, i: usize, j: usize) -> f64 {
        self.cols[j].get(&i).copied().unwrap_or(0.0)
    }

    /// Symmetric interchange of active positions `k` and `r`.
    fn swap(&mut self, k: usize, r: usize) {
        if k == r {
            return;
        }
        let mut neighbors: Vec<usize> = self.cols[k]
            .keys()
            .chain(self.cols[r].keys())
            .copied()
            .filter(|&i| i != k && i != r)
            .collect();
        neighbors.sort_unstable();
        neighbors.dedup();
        for c in neighbors {
            let col = &mut self.cols[c];
            let vk = col.remove(&k);
            let vr = col.remove(&r);
            if let Some(v) = vk {
                col.insert(r, v);
            }
            if let Some(v) = vr {
                col.insert(k, v);
            }
        }
        self.cols.swap(k, r);
        for c in [k, r] {
            let col = &mut self.cols[c];
            let vk = col.remove(&k);
            let vr = col.remove(&r);
            if let Some(v) = vk {
                col.insert(r, v);
            }
            if let Some(v) = vr {
                col.insert(k, v);
            }
        }
        let mut touched: Vec<usize> =
            self.l_row_cols[k].iter().chain(self.l_row_cols[r].iter()).copied().collect();
        touched.sort_unstable();
        touched.dedup();
        for c in touched {
            for e in self.l_cols[c].iter_mut() {
                if e.0 == k {
                    e.0 = r;
                } else if e.0 == r {
                    e.0 = k;
                }
            }
        }
        self.l_row_cols.swap(k, r);
        self.perm.swap(k, r);
    }

    /// Largest off-diagonal modulus in active column `j` over rows `>= from`,
    /// lowest row first on ties.
    fn column_max(&self, j: usize, from: usize) -> (f64, usize) {
        let mut best = (0.0, usize::MAX);
        for (&i, &v) in self.cols[j].range(from..) {
            if i != j && v.abs() > best.0 {
                best = (v.abs(), i);
            }
        }
        best
    }

    /// Removes positions `k..k+size` from the active matrix.
    fn eliminate(&mut self, k: usize, size: usize) {
        for p in k..k + size {
            let keys: Vec<usize> = self.cols[p].keys().copied().filter(|&i| i >= k + size).collect();
            for i in keys {
                self.cols[i].remove(&p);
            }
            self.cols[p].clear();
        }
    }

    fn push_l(&mut self, col: usize, entries: &[(usize, f64)]) {
        for &(i, _) in entries {
            self.l_row_cols[i].push(col);
        }
        self.l_cols[col].extend_from_slice(entries);
    }

    /// `A(i, j) -= Σ_{p,q} L(i,p) E(p,q) L(j,q)` over the kept entries.
    fn schur_update(&mut self, cols: &[Vec<(usize, f64)>], e: &[[f64; 2]; 2]) {
        let mut rows: BTreeMap<usize, [f64; 2]> = BTreeMap::new();
        for (p, col) in cols.iter().enumerate() {
            for &(i, v) in col {
                rows.entry(i).or_insert([0.0; 2])[p] = v;
            }
        }
        let w: Vec<(usize, [f64; 2], [f64; 2])> = rows
            .iter()
            .map(|(&i, l)| {
                let le = [l[0] * e[0][0] + l[1] * e[1][0], l[0] * e[0][1] + l[1] * e[1][1]];
                (i, *l, le)
            })
            .collect();
        for &(j, lj, _) in &w {
            let col = &mut self.cols[j];
            for &(i, _, le) in &w {
                let upd = le[0] * lj[0] + le[1] * lj[1];
                if upd != 0.0 {
                    *col.entry(i).or_insert(0.0) -= upd;
                }
            }
        }
    }
}

fn apply_drop(
    candidate: Vec<(usize, f64)>,
    variant: IldlVariant,
    cap: usize,
) -> Vec<(usize, f64)> {
    let mut kept: Vec<(usize, f64)> = candidate.into_iter().filter(|e| e.1 != 0.0).collect();
    match variant {
        IldlVariant::Threshold(tau) => {
            if tau > 0.0 {
                let norm = kept.iter().map(|e| e.1 * e.1).sum::<f64>().sqrt();
                kept.retain(|e| e.1.abs() >= tau * norm);
            }
        }
        IldlVariant::NoFill => {
            if kept.len() > cap {
                kept.sort_by(|a, b| b.1.abs().total_cmp(&a.1.abs()).then(a.0.cmp(&b.0)));
                kept.truncate(cap);
                kept.sort_by_key(|e| e.0);
            }
        }
    }
    kept
}

/// Incomplete Bunch-Kaufman `LDLᵀ` of the symmetric matrix `m`. The input
/// is symmetrized as `(M + Mᵀ)/2` first.
pub fn ildl_factor(m: &CscMatrix, variant: IldlVariant) -> Result<BlockLdlFactor> {
    m.check_square()?;
    let n = m.nrows();
    let sym = m.add_scaled(0.5, &m.transpose(), 0.5)?;
    let caps: Vec<usize> = (0..n)
        .map(|j| sym.col(j).0.iter().filter(|&&i| i != j).count())
        .collect();

    let mut ws = Workspace {
        cols: vec![BTreeMap::new(); n],
        l_cols: vec![Vec::new(); n],
        l_row_cols: vec![Vec::new(); n],
        perm: (0..n).collect(),
    };
    for (i, j, v) in sym.triplets() {
        if v != 0.0 {
            ws.cols[j].insert(i, v);
        }
    }

    let mut blocks = Vec::new();
    let mut k = 0;
    while k < n {
        let akk = ws.get(k, k);
        let (lambda, r) = ws.column_max(k, k);
        let two_by_two = if lambda == 0.0 {
            if akk == 0.0 {
                return Err(Error::ZeroPivot { column: ws.perm[k] });
            }
            false
        } else if akk.abs() >= BK_ALPHA * lambda {
            false
        } else {
            let sigma = ws.column_max(r, k).0;
            if akk.abs() * sigma >= BK_ALPHA * lambda * lambda {
                false
            } else if ws.get(r, r).abs() >= BK_ALPHA * sigma {
                ws.swap(k, r);
                false
            } else {
                ws.swap(k + 1, r);
                true
            }
        };

        if !two_by_two {
            let d = ws.get(k, k);
            if d == 0.0 || !d.is_finite() {
                return Err(Error::ZeroPivot { column: ws.perm[k] });
            }
            let candidate: Vec<(usize, f64)> =
                ws.cols[k].range(k + 1..).map(|(&i, &v)| (i, v / d)).collect();
            let kept = apply_drop(candidate, variant, caps[ws.perm[k]]);
            ws.eliminate(k, 1);
            ws.schur_update(&[kept.clone(), vec![]], &[[d, 0.0], [0.0, 0.0]]);
            ws.push_l(k, &kept);
            blocks.push(PivotBlock::One { index: k, d });
            k += 1;
        } else {
            let (a, b, c) = (ws.get(k, k), ws.get(k + 1, k), ws.get(k + 1, k + 1));
            let det = a * c - b * b;
            if det == 0.0 || !det.is_finite() {
                return Err(Error::ZeroPivot { column: ws.perm[k] });
            }
            let inv = [[c / det, -b / det], [-b / det, a / det]];
            let mut rows: BTreeMap<usize, [f64; 2]> = BTreeMap::new();
            for p in 0..2 {
                for (&i, &v) in ws.cols[k + p].range(k + 2..) {
                    rows.entry(i).or_insert([0.0; 2])[p] = v;
                }
            }
            let mut cand = [Vec::new(), Vec::new()];
            for (&i, w) in &rows {
                cand[0].push((i, w[0] * inv[0][0] + w[1] * inv[1][0]));
                cand[1].push((i, w[0] * inv[0][1] + w[1] * inv[1][1]));
            }
            let [c0, c1] = cand;
            let kept0 = apply_drop(c0, variant, caps[ws.perm[k]]);
            let kept1 = apply_drop(c1, variant, caps[ws.perm[k + 1]]);
            ws.eliminate(k, 2);
            ws.schur_update(&[kept0.clone(), kept1.clone()], &[[a, b], [b, c]]);
            ws.push_l(k, &kept0);
            ws.push_l(k + 1, &kept1);
            blocks.push(PivotBlock::Two { index: k, a, b, c });
            k += 2;
        }
    }

    let mut triplets = Vec::new();
    for (j, col) in ws.l_cols.iter().enumerate() {
        for &(i, v) in col {
            triplets.push((i, j, v));
        }
    }
    let l = CscMatrix::from_triplets(n, n, &triplets)?;
    Ok(BlockLdlFactor { n, l, blocks, perm: ws.perm, variant })
}

/// Eigenvalues `(λ₁ ≥ λ₂)` of `[[a, b], [b, c]]`.
pub fn sym2_eigenvalues(a: f64, b: f64, c: f64) -> (f64, f64) {
    let mean = 0.5 * (a + c);
    let half = (0.5 * (a - c)).hypot(b);
    (mean + half, mean - half)
}

/// Unit eigenvector of `[[a, b], [b, c]]` for eigenvalue `lambda`.
pub fn sym2_eigenvector(a: f64, b: f64, c: f64, lambda: f64) -> [f64; 2] {
    // the larger of the two null-vector candidates is the stable one
    let v1 = [b, lambda - a];
    let v2 = [lambda - c, b];
    let n1 = v1[0].hypot(v1[1]);
    let n2 = v2[0].hypot(v2[1]);
    if n1 == 0.0 && n2 == 0.0 {
        // scalar multiple of the identity
        return [1.0, 0.0];
    }
    if n1 >= n2 {
        [v1[0] / n1, v1[1] / n1]
    } else {
        [v2[0] / n2, v2[1] / n2]
    }
}

/// Spectral absolute value `V|Λ|Vᵀ` of a symmetric 2×2 matrix, as `(a, b, c)`.
pub fn sym2_abs(a: f64, b: f64, c: f64) -> (f64, f64, f64) {
    if b == 0.0 {
        return (a.abs(), 0.0, c.abs());
    }
    let (l1, l2) = sym2_eigenvalues(a, b, c);
    if l1 == l2 {
        return (l1.abs(), 0.0, l1.abs());
    }
    // |B| = |λ₂| I + (|λ₁| - |λ₂|)/(λ₁ - λ₂) (B - λ₂ I)
    let slope = (l1.abs() - l2.abs()) / (l1 - l2);
    (l2.abs() + slope * (a - l2), slope * b, l2.abs() + slope * (c - l2))
}

/// One block of the modified factor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AbsBlock {
    /// `√|d|` and the remainder entry `d/|d| - 1`.
    One { index: usize, chol: f64, remainder: f64 },
    /// Lower Cholesky factor `[[p, 0], [q, s]]` of `|B|` and the symmetric
    /// remainder `L⁻¹ B L⁻ᵀ - I` as `(x, y, z)` = `[[x, y], [y, z]]`.
    Two { index: usize, chol: [f64; 3], remainder: [f64; 3] },
}

/// `|M| ≈ 𝓛 𝓛ᵀ` with `𝓛 = L L_|D|`, and the block-diagonal remainder
/// `M_r = L_|D|⁻¹ D L_|D|⁻ᵀ - I` (in pivot order).
#[derive(Debug, Clone)]
pub struct AbsFactor {
    n: usize,
    pub perm: Vec<usize>,
    /// Lower triangular `𝓛`, diagonal stored first in each column.
    pub lfac: CscMatrix,
    pub blocks: Vec<AbsBlock>,
    /// `M_r` as a sparse symmetric matrix, exact zeros removed.
    pub remainder: CscMatrix,
    /// Sorted indices of the nonzero rows of `M_r`.
    pub ind: Vec<usize>,
    /// Number of negative eigenvalues of `D`.
    pub rank: usize,
}

impl AbsFactor {
    pub fn dim(&self) -> usize {
        self.n
    }

    /// `𝓛⁻¹ b` (no permutation).
    pub fn forward_solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        for j in 0..self.n {
            let (rows, vals) = self.lfac.col(j);
            debug_assert_eq!(rows[0], j);
            x[j] /= vals[0];
            let xj = x[j];
            if xj != 0.0 {
                for (i, v) in rows[1..].iter().zip(&vals[1..]) {
                    x[*i] -= v * xj;
                }
            }
        }
        x
    }

    /// `𝓛⁻ᵀ b` (no permutation).
    pub fn backward_solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        for j in (0..self.n).rev() {
            let (rows, vals) = self.lfac.col(j);
            let mut acc = x[j];
            for (i, v) in rows[1..].iter().zip(&vals[1..]) {
                acc -= v * x[*i];
            }
            x[j] = acc / vals[0];
        }
        x
    }

    /// `𝓛⁻¹ P b`, mapping original ordering into pivot ordering.
    pub fn solve_with_l(&self, b: &[f64]) -> Vec<f64> {
        let pb: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        self.forward_solve(&pb)
    }

    /// `Pᵀ 𝓛⁻ᵀ b`, mapping pivot ordering back to original ordering.
    pub fn solve_with_lt(&self, b: &[f64]) -> Vec<f64> {
        let y = self.backward_solve(b);
        let mut x = vec![0.0; self.n];
        for (k, &p) in self.perm.iter().enumerate() {
            x[p] = y[k];
        }
        x
    }

    /// `𝓛ᵀ P x`: the inverse of [`AbsFactor::solve_with_lt`].
    pub fn mul_lt(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for j in 0..self.n {
            for (i, v) in self.lfac.col_iter(j) {
                y[j] += v * x[self.perm[i]];
            }
        }
        y
    }
}

/// Replaces each block of `D` by its spectral absolute value, factors it,
/// and assembles `𝓛` and the remainder `M_r`.
pub fn abs_modify(f: &BlockLdlFactor) -> Result<AbsFactor> {
    let n = f.dim();
    let mut blocks = Vec::with_capacity(f.blocks.len());
    let mut rem_triplets = Vec::new();
    let mut rank = 0;
    for blk in &f.blocks {
        rank += blk.negative_count();
        match *blk {
            PivotBlock::One { index, d } => {
                if d == 0.0 || !d.is_finite() {
                    return Err(Error::ZeroPivot { column: f.perm[index] });
                }
                let remainder = d / d.abs() - 1.0;
                if remainder != 0.0 {
                    rem_triplets.push((index, index, remainder));
                }
                blocks.push(AbsBlock::One { index, chol: d.abs().sqrt(), remainder });
            }
            PivotBlock::Two { index, a, b, c } => {
                let (aa, ab, ac) = sym2_abs(a, b, c);
                let p = aa.sqrt();
                let q = ab / p;
                let s2 = ac - q * q;
                if !(aa > 0.0) || !(s2 > 0.0) {
                    return Err(Error::ZeroPivot { column: f.perm[index] });
                }
                let s = s2.sqrt();
                // X = L⁻¹ B L⁻ᵀ with L = [[p, 0], [q, s]]
                let li = [[1.0 / p, 0.0], [-q / (p * s), 1.0 / s]];
                let bm = [[a, b], [b, c]];
                let mut t = [[0.0; 2]; 2];
                for i in 0..2 {
                    for j in 0..2 {
                        t[i][j] = li[i][0] * bm[0][j] + li[i][1] * bm[1][j];
                    }
                }
                let mut x = [[0.0; 2]; 2];
                for i in 0..2 {
                    for j in 0..2 {
                        x[i][j] = t[i][0] * li[j][0] + t[i][1] * li[j][1];
                    }
                }
                let off = 0.5 * (x[0][1] + x[1][0]);
                let mut r = [x[0][0] - 1.0, off, x[1][1] - 1.0];
                let scale = r.iter().fold(1.0f64, |m, v| m.max(v.abs()));
                for v in r.iter_mut() {
                    if v.abs() <= EIG_ZERO_TOL * scale {
                        *v = 0.0;
                    }
                }
                for (i, j, v) in [
                    (index, index, r[0]),
                    (index + 1, index, r[1]),
                    (index, index + 1, r[1]),
                    (index + 1, index + 1, r[2]),
                ] {
                    if v != 0.0 {
                        rem_triplets.push((i, j, v));
                    }
                }
                blocks.push(AbsBlock::Two { index, chol: [p, q, s], remainder: r });
            }
        }
    }

    // 𝓛 = (I + L_strict) L_|D|, column by column
    let mut triplets: Vec<(usize, usize, f64)> = Vec::with_capacity(f.l.nnz() + 2 * n);
    for blk in &blocks {
        match *blk {
            AbsBlock::One { index, chol, .. } => {
                triplets.push((index, index, chol));
                for (i, v) in f.l.col_iter(index) {
                    triplets.push((i, index, v * chol));
                }
            }
            AbsBlock::Two { index, chol: [p, q, s], .. } => {
                let k = index;
                triplets.push((k, k, p));
                triplets.push((k + 1, k, q));
                triplets.push((k + 1, k + 1, s));
                for (i, v) in f.l.col_iter(k) {
                    triplets.push((i, k, v * p));
                }
                for (i, v) in f.l.col_iter(k + 1) {
                    triplets.push((i, k, v * q));
                    triplets.push((i, k + 1, v * s));
                }
            }
        }
    }
    let lfac = CscMatrix::from_triplets(n, n, &triplets)?;
    let remainder = CscMatrix::from_triplets(n, n, &rem_triplets)?;
    let mut ind: Vec<usize> = remainder.triplets().map(|(i, _, _)| i).collect();
    ind.sort_unstable();
    ind.dedup();
    Ok(AbsFactor { n, perm: f.perm.clone(), lfac, blocks, remainder, ind, rank })
}

/// `M_r = U Σ Uᵀ` with sparse orthonormal `U` (at most two entries per column).
#[derive(Debug, Clone, PartialEq)]
pub struct LowRankTerm {
    pub u: CscMatrix,
    pub sigma: Vec<f64>,
}

impl LowRankTerm {
    pub fn rank(&self) -> usize {
        self.sigma.len()
    }
}

/// Walks the nonzero submatrix `M_r(Ind, Ind)`: isolated diagonal entries
/// become unit vectors, coupled 2×2 blocks contribute the eigenvectors of
/// their nonzero eigenvalues. Work is proportional to `|Ind|`.
pub fn low_rank_decompose(remainder: &CscMatrix, ind: &[usize], rank: usize) -> Result<LowRankTerm> {
    let n = remainder.nrows();
    let mut triplets = Vec::new();
    let mut sigma = Vec::new();
    let sub = |i: usize, j: usize| remainder.get(ind[i], ind[j]);
    let mut i = 0;
    while i < ind.len() {
        let coupled = i + 1 < ind.len() && sub(i, i + 1) != 0.0;
        if !coupled {
            let d = sub(i, i);
            if d == 0.0 {
                return Err(Error::MalformedBlocks(format!(
                    "index {} listed as nonzero but has an empty block",
                    ind[i]
                )));
            }
            triplets.push((ind[i], sigma.len(), 1.0));
            sigma.push(d);
            i += 1;
        } else {
            if sub(i + 1, i) != sub(i, i + 1) {
                return Err(Error::MalformedBlocks(format!(
                    "block at {} is not symmetric",
                    ind[i]
                )));
            }
            if i + 2 < ind.len() && sub(i + 1, i + 2) != 0.0 {
                return Err(Error::MalformedBlocks(format!(
                    "coupling across blocks at {}",
                    ind[i + 1]
                )));
            }
            let (a, b, c) = (sub(i, i), sub(i, i + 1), sub(i + 1, i + 1));
            let scale = a.abs().max(b.abs()).max(c.abs());
            let (l1, l2) = sym2_eigenvalues(a, b, c);
            for lambda in [l2, l1] {
                if lambda.abs() > EIG_ZERO_TOL * scale {
                    let v = sym2_eigenvector(a, b, c, lambda);
                    let col = sigma.len();
                    triplets.push((ind[i], col, v[0]));
                    triplets.push((ind[i + 1], col, v[1]));
                    sigma.push(lambda);
                }
            }
            i += 2;
        }
    }
    if sigma.len() != rank {
        return Err(Error::MalformedBlocks(format!(
            "decomposition produced {} columns, expected rank {rank}",
            sigma.len()
        )));
    }
    let u = CscMatrix::from_triplets(n, sigma.len(), &triplets)?.drop_zeros();
    Ok(LowRankTerm { u, sigma })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_ldlt(f: &BlockLdlFactor) -> Vec<Vec<f64>> {
        let n = f.dim();
        let mut l = f.l.to_dense();
        for (i, row) in l.iter_mut().enumerate() {
            row[i] = 1.0;
        }
        let mut d = vec![vec![0.0; n]; n];
        for b in &f.blocks {
            match *b {
                PivotBlock::One { index, d: v } => d[index][index] = v,
                PivotBlock::Two { index: k, a, b, c } => {
                    d[k][k] = a;
                    d[k][k + 1] = b;
                    d[k + 1][k] = b;
                    d[k + 1][k + 1] = c;
                }
            }
        }
        let mut out = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                let mut acc = 0.0;
                for p in 0..n {
                    for q in 0..n {
                        acc += l[i][p] * d[p][q] * l[j][q];
                    }
                }
                out[i][j] = acc;
            }
        }
        out
    }

    #[test]
    fn diagonal_needs_no_pivoting() {
        let m = CscMatrix::diagonal_matrix(&[4.0, 9.0]);
        let f = ildl_factor(&m, IldlVariant::exact()).unwrap();
        assert_eq!(f.l.nnz(), 0);
        assert_eq!(f.perm, vec![0, 1]);
        assert_eq!(
            f.blocks,
            vec![PivotBlock::One { index: 0, d: 4.0 }, PivotBlock::One { index: 1, d: 9.0 }]
        );
    }

    #[test]
    fn zero_diagonal_forces_two_by_two() {
        let m = CscMatrix::from_dense(&[vec![0.0, 1.0], vec![1.0, 0.0]]);
        let f = ildl_factor(&m, IldlVariant::exact()).unwrap();
        assert_eq!(f.blocks, vec![PivotBlock::Two { index: 0, a: 0.0, b: 1.0, c: 0.0 }]);
        assert_eq!(f.l.nnz(), 0);
    }

    #[test]
    fn singular_matrix_reports_zero_pivot() {
        let m = CscMatrix::from_dense(&[vec![1.0, 0.0], vec![0.0, 0.0]]);
        assert_eq!(ildl_factor(&m, IldlVariant::exact()).unwrap_err(), Error::ZeroPivot { column: 1 });
    }

    #[test]
    fn exact_factorization_reconstructs_with_pivoting() {
        let m = CscMatrix::from_dense(&[
            vec![0.01, 3.0, 0.0, 1.0],
            vec![3.0, -0.02, 2.0, 0.0],
            vec![0.0, 2.0, 0.5, -4.0],
            vec![1.0, 0.0, -4.0, 0.1],
        ]);
        let f = ildl_factor(&m, IldlVariant::exact()).unwrap();
        let pmp = m.symmetric_permute(&f.perm).to_dense();
        let ldl = dense_ldlt(&f);
        for i in 0..4 {
            for j in 0..4 {
                assert!((pmp[i][j] - ldl[i][j]).abs() < 1e-12, "{i},{j}");
            }
        }
    }

    #[test]
    fn nofill_caps_column_counts() {
        let mut rows = vec![vec![0.0; 6]; 6];
        for i in 0..6 {
            rows[i][i] = 4.0;
            rows[0][i] += 1.0;
            rows[i][0] += 1.0;
            if i + 1 < 6 {
                rows[i][i + 1] = -1.0;
                rows[i + 1][i] = -1.0;
            }
        }
        let m = CscMatrix::from_dense(&rows);
        let f = ildl_factor(&m, IldlVariant::NoFill).unwrap();
        for j in 0..6 {
            let orig = f.perm[j];
            let cap = m.col(orig).0.iter().filter(|&&i| i != orig).count();
            assert!(f.l.col(j).0.len() <= cap);
        }
    }

    #[test]
    fn abs_of_negative_scalar() {
        let f = BlockLdlFactor {
            n: 1,
            l: CscMatrix::zeros(1, 1),
            blocks: vec![PivotBlock::One { index: 0, d: -1.0 }],
            perm: vec![0],
            variant: IldlVariant::exact(),
        };
        let a = abs_modify(&f).unwrap();
        assert_eq!(a.blocks, vec![AbsBlock::One { index: 0, chol: 1.0, remainder: -2.0 }]);
        assert_eq!(a.rank, 1);
        assert_eq!(a.ind, vec![0]);
    }

    #[test]
    fn abs_of_positive_scalar_has_no_remainder() {
        let f = BlockLdlFactor {
            n: 1,
            l: CscMatrix::zeros(1, 1),
            blocks: vec![PivotBlock::One { index: 0, d: 4.0 }],
            perm: vec![0],
            variant: IldlVariant::exact(),
        };
        let a = abs_modify(&f).unwrap();
        assert_eq!(a.blocks, vec![AbsBlock::One { index: 0, chol: 2.0, remainder: 0.0 }]);
        assert_eq!(a.rank, 0);
        assert!(a.ind.is_empty());
    }

    #[test]
    fn abs_of_swap_block() {
        let f = BlockLdlFactor {
            n: 2,
            l: CscMatrix::zeros(2, 2),
            blocks: vec![PivotBlock::Two { index: 0, a: 0.0, b: 1.0, c: 0.0 }],
            perm: vec![0, 1],
            variant: IldlVariant::exact(),
        };
        let a = abs_modify(&f).unwrap();
        let AbsBlock::Two { chol, remainder, .. } = a.blocks[0] else { panic!() };
        for (got, want) in chol.iter().zip([1.0, 0.0, 1.0]) {
            assert!((got - want).abs() < 1e-15);
        }
        for (got, want) in remainder.iter().zip([-1.0, 1.0, -1.0]) {
            assert!((got - want).abs() < 1e-15);
        }
        assert_eq!(a.rank, 1);
    }

    #[test]
    fn low_rank_of_zero_remainder() {
        let t = low_rank_decompose(&CscMatrix::zeros(4, 4), &[], 0).unwrap();
        assert_eq!(t.rank(), 0);
        assert_eq!(t.u.ncols(), 0);
    }

    #[test]
    fn low_rank_single_entry() {
        let r = CscMatrix::from_triplets(8, 8, &[(5, 5, -2.0)]).unwrap();
        let t = low_rank_decompose(&r, &[5], 1).unwrap();
        assert_eq!(t.sigma, vec![-2.0]);
        assert_eq!(t.u.to_dense()[5][0], 1.0);
        assert_eq!(t.u.nnz(), 1);
    }

    #[test]
    fn low_rank_coupled_block() {
        let r = CscMatrix::from_triplets(
            5,
            5,
            &[(2, 2, -1.0), (3, 2, 1.0), (2, 3, 1.0), (3, 3, -1.0)],
        )
        .unwrap();
        let t = low_rank_decompose(&r, &[2, 3], 1).unwrap();
        assert!((t.sigma[0] + 2.0).abs() < 1e-15);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let u = t.u.to_dense();
        // eigenvector of -2 is ±(1, -1)/√2
        assert!((u[2][0].abs() - h).abs() < 1e-15);
        assert!((u[2][0] + u[3][0]).abs() < 1e-15);
    }

    #[test]
    fn low_rank_rank_mismatch_is_malformed() {
        let r = CscMatrix::from_triplets(3, 3, &[(1, 1, -2.0)]).unwrap();
        assert!(matches!(low_rank_decompose(&r, &[1], 2), Err(Error::MalformedBlocks(_))));
    }

    #[test]
    fn triangular_solves_by_hand() {
        // 𝓛 = [[3, 0], [6, 1]]
        let lfac = CscMatrix::from_dense(&[vec![3.0, 0.0], vec![6.0, 1.0]]);
        let a = AbsFactor {
            n: 2,
            perm: vec![0, 1],
            lfac,
            blocks: vec![],
            remainder: CscMatrix::zeros(2, 2),
            ind: vec![],
            rank: 0,
        };
        assert_eq!(a.solve_with_l(&[3.0, 7.0]), vec![1.0, 1.0]);
        // 𝓛ᵀ = [[3, 6], [0, 1]]: x₂ = 1, x₁ = (9 - 6)/3
        assert_eq!(a.solve_with_lt(&[9.0, 1.0]), vec![1.0, 1.0]);
    }

    #[test]
    fn sym2_abs_matches_eigendecomposition() {
        let (a, b, c) = (0.3, -2.0, -1.1);
        let (l1, l2) = sym2_eigenvalues(a, b, c);
        let v1 = sym2_eigenvector(a, b, c, l1);
        let v2 = sym2_eigenvector(a, b, c, l2);
        let want = [
            l1.abs() * v1[0] * v1[0] + l2.abs() * v2[0] * v2[0],
            l1.abs() * v1[0] * v1[1] + l2.abs() * v2[0] * v2[1],
            l1.abs() * v1[1] * v1[1] + l2.abs() * v2[1] * v2[1],
        ];
        let got = sym2_abs(a, b, c);
        assert!((got.0 - want[0]).abs() < 1e-14);
        assert!((got.1 - want[1]).abs() < 1e-14);
        assert!((got.2 - want[2]).abs() < 1e-14);
    }
}
