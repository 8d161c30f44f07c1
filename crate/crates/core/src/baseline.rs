//! The comparison scheme: maximum product transversal with scaling, reverse
//! Cuthill-McKee symmetric permutation, ILU(0), and TFQMR.

use std::collections::VecDeque;
use crate::clock::Stopwatch;

use crate::error::{Error, Result};
use crate::krylov::tfqmr::{tfqmr, Preconditioner, TfqmrOptions};
use crate::skew::LinearOperator;
use crate::sparse::{invert_permutation, norm2, CscMatrix};
use crate::transversal::scale_and_permute;
use crate::twolevel::{SolveReport, Termination};

/// Reverse Cuthill-McKee ordering of the undirected graph of
/// `pattern ∪ patternᵀ`. Each connected component is started from a
/// pseudo-peripheral vertex found by repeated breadth-first search.
/// `perm[k]` is the original vertex placed at position `k`.
pub fn rcm_order(pattern: &CscMatrix) -> Vec<usize> {
    let n = pattern.nrows().min(pattern.ncols());
    let adj = undirected_adjacency(pattern, n);
    let degree: Vec<usize> = adj.iter().map(Vec::len).collect();

    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut level = vec![usize::MAX; n];
    for seed in 0..n {
        if visited[seed] {
            continue;
        }
        let start = pseudo_peripheral(&adj, &degree, seed, &mut level);
        let mut queue = VecDeque::new();
        queue.push_back(start);
        visited[start] = true;
        let mut nbrs = Vec::new();
        while let Some(v) = queue.pop_front() {
            order.push(v);
            nbrs.clear();
            nbrs.extend(adj[v].iter().copied().filter(|&w| !visited[w]));
            nbrs.sort_by_key(|&w| (degree[w], w));
            for &w in &nbrs {
                visited[w] = true;
                queue.push_back(w);
            }
        }
    }
    order.reverse();
    order
}

fn undirected_adjacency(pattern: &CscMatrix, n: usize) -> Vec<Vec<usize>> {
    let mut adj = vec![Vec::new(); n];
    for (i, j, _) in pattern.triplets() {
        if i != j && i < n && j < n {
            adj[i].push(j);
            adj[j].push(i);
        }
    }
    for a in adj.iter_mut() {
        a.sort_unstable();
        a.dedup();
    }
    adj
}

/// Breadth-first levels from `root`; returns (eccentricity, last level).
fn bfs_levels(adj: &[Vec<usize>], root: usize, level: &mut [usize]) -> (usize, Vec<usize>) {
    let mut frontier = vec![root];
    let mut seen = vec![root];
    level[root] = 0;
    let mut depth = 0;
    loop {
        let mut next = Vec::new();
        for &v in &frontier {
            for &w in &adj[v] {
                if level[w] == usize::MAX {
                    level[w] = depth + 1;
                    seen.push(w);
                    next.push(w);
                }
            }
        }
        if next.is_empty() {
            for &v in &seen {
                level[v] = usize::MAX;
            }
            return (depth, frontier);
        }
        depth += 1;
        frontier = next;
    }
}

fn pseudo_peripheral(adj: &[Vec<usize>], degree: &[usize], seed: usize, level: &mut [usize]) -> usize {
    let mut root = seed;
    let (mut ecc, mut last) = bfs_levels(adj, root, level);
    loop {
        let candidate = *last
            .iter()
            .min_by_key(|&&v| (degree[v], v))
            .expect("last level is never empty");
        let (e, l) = bfs_levels(adj, candidate, level);
        if e > ecc {
            root = candidate;
            ecc = e;
            last = l;
        } else {
            return root;
        }
    }
}

/// `A ≈ L U` restricted to the pattern of `A`.
#[derive(Debug, Clone)]
pub struct IluFactor {
    /// Unit lower triangular, diagonal stored.
    pub l: CscMatrix,
    /// Upper triangular including the diagonal.
    pub u: CscMatrix,
    // row-wise copies used by the triangular solves
    l_rows: Vec<Vec<(usize, f64)>>,
    u_rows: Vec<Vec<(usize, f64)>>,
}

impl IluFactor {
    pub fn dim(&self) -> usize {
        self.l_rows.len()
    }

    /// `(LU)⁻¹ b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let mut y = b.to_vec();
        for i in 0..n {
            let mut acc = y[i];
            for &(j, v) in &self.l_rows[i] {
                acc -= v * y[j];
            }
            y[i] = acc;
        }
        for i in (0..n).rev() {
            let row = &self.u_rows[i];
            let mut acc = y[i];
            for &(j, v) in &row[1..] {
                acc -= v * y[j];
            }
            y[i] = acc / row[0].1;
        }
        y
    }
}

/// ILU with zero fill (IKJ elimination on rows, fill outside the pattern of
/// `A` discarded).
pub fn ilu0(a: &CscMatrix) -> Result<IluFactor> {
    a.check_square()?;
    let n = a.nrows();
    let at = a.transpose();
    let mut rows: Vec<Vec<(usize, f64)>> =
        (0..n).map(|i| at.col_iter(i).collect::<Vec<_>>()).collect();
    let mut pos = vec![usize::MAX; n];
    let mut diag_pos = vec![usize::MAX; n];
    for i in 0..n {
        for (p, &(j, _)) in rows[i].iter().enumerate() {
            pos[j] = p;
        }
        let mut p = 0;
        while p < rows[i].len() && rows[i][p].0 < i {
            let k = rows[i][p].0;
            let ukk = rows[k][diag_pos[k]].1;
            let lik = rows[i][p].1 / ukk;
            rows[i][p].1 = lik;
            for q in diag_pos[k] + 1..rows[k].len() {
                let (j, ukj) = rows[k][q];
                let pj = pos[j];
                if pj != usize::MAX {
                    rows[i][pj].1 -= lik * ukj;
                }
            }
            p += 1;
        }
        let d = if p < rows[i].len() && rows[i][p].0 == i { rows[i][p].1 } else { 0.0 };
        for &(j, _) in &rows[i] {
            pos[j] = usize::MAX;
        }
        if d == 0.0 || !d.is_finite() {
            return Err(Error::ZeroPivot { column: i });
        }
        diag_pos[i] = p;
    }
    let mut lt = Vec::new();
    let mut ut = Vec::new();
    let mut l_rows = Vec::with_capacity(n);
    let mut u_rows = Vec::with_capacity(n);
    for (i, row) in rows.iter().enumerate() {
        let (lower, upper) = row.split_at(diag_pos[i]);
        lt.push((i, i, 1.0));
        for &(j, v) in lower {
            lt.push((i, j, v));
        }
        for &(j, v) in upper {
            ut.push((i, j, v));
        }
        l_rows.push(lower.to_vec());
        u_rows.push(upper.to_vec());
    }
    Ok(IluFactor {
        l: CscMatrix::from_triplets(n, n, &lt)?,
        u: CscMatrix::from_triplets(n, n, &ut)?,
        l_rows,
        u_rows,
    })
}

impl Preconditioner for IluFactor {
    fn apply_inverse(&self, v: &[f64]) -> Vec<f64> {
        self.solve(v)
    }
}

/// Transversal, RCM, ILU(0), right-preconditioned TFQMR. Failures are
/// reported through the termination field, never as errors, except for
/// inconsistent input dimensions.
pub fn mps_rcm_solve(a: &CscMatrix, b: &[f64], tol: f64, maxit: usize) -> Result<(Vec<f64>, SolveReport)> {
    a.check_square()?;
    let n = a.nrows();
    if b.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: b.len() });
    }
    let started = Stopwatch::start();
    let fail = |termination: Termination| {
        (
            vec![0.0; n],
            SolveReport {
                termination,
                relative_residual: 1.0,
                wall_time: started.elapsed_secs(),
                ..SolveReport::default()
            },
        )
    };

    let scaled = match scale_and_permute(a) {
        Ok(s) => s,
        Err(_) => return Ok(fail(Termination::FactorizationBreakdown)),
    };
    let order = rcm_order(&scaled.matrix);
    let permuted = scaled.matrix.symmetric_permute(&order);
    let ilu = match ilu0(&permuted) {
        Ok(f) => f,
        Err(_) => return Ok(fail(Termination::FactorizationBreakdown)),
    };

    let bbar = scaled.transform_rhs(b);
    let rhs: Vec<f64> = order.iter().map(|&p| bbar[p]).collect();
    let opts = TfqmrOptions { tol, maxit, ..TfqmrOptions::default() };
    let out = tfqmr(&permuted, &rhs, Some(&ilu), &opts);

    let inv = invert_permutation(&order);
    let xbar: Vec<f64> = (0..n).map(|i| out.x[inv[i]]).collect();
    let x = scaled.recover_solution(&xbar);
    let mut r = a.spmv(&x)?;
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    let bn = norm2(b);
    let report = SolveReport {
        outer_iterations: out.iterations,
        avg_inner_iterations: 0.0,
        relative_residual_history: out.history,
        termination: out.termination,
        relative_residual: if bn > 0.0 { norm2(&r) / bn } else { norm2(&r) },
        transformed_residual: out.relative_residual,
        rank: 0,
        wall_time: started.elapsed_secs(),
    };
    Ok((x, report))
}

impl LinearOperator for IluFactor {
    fn dim(&self) -> usize {
        self.dim()
    }

    /// Applies `(LU)⁻¹`.
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        y.copy_from_slice(&self.solve(x));
    }
}
