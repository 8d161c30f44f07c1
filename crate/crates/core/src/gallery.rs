//! Test matrices: seeded random families and a reaction-diffusion
//! Brusselator Jacobian with the structure of the `rdb` collection.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::sparse::CscMatrix;

/// Sparse `n x n` matrix with about `per_col` entries per column, uniform
/// in `[-1, 1]`, containing a random permutation so it is structurally
/// nonsingular.
pub fn random_nonsingular(n: usize, per_col: usize, rng: &mut impl Rng) -> CscMatrix {
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(rng);
    let mut t = Vec::with_capacity(n * (per_col + 1));
    for (j, &p) in perm.iter().enumerate() {
        t.push((p, j, nonzero_uniform(rng, 1.0)));
        for _ in 1..per_col {
            t.push((rng.gen_range(0..n), j, rng.gen_range(-1.0..1.0)));
        }
    }
    CscMatrix::from_triplets(n, n, &t).expect("indices in range").drop_zeros()
}

/// Dense-pattern matrix with positive entries in `[lo, hi)`.
pub fn random_dense_positive(n: usize, lo: f64, hi: f64, rng: &mut impl Rng) -> CscMatrix {
    let t: Vec<_> = (0..n)
        .flat_map(|j| (0..n).map(move |i| (i, j)))
        .map(|(i, j)| (i, j, rng.gen_range(lo..hi)))
        .collect();
    CscMatrix::from_triplets(n, n, &t).expect("indices in range")
}

fn nonzero_uniform(rng: &mut impl Rng, scale: f64) -> f64 {
    loop {
        let v: f64 = rng.gen_range(-scale..scale);
        if v.abs() > 1e-3 * scale {
            return v;
        }
    }
}

/// Skew-symmetric matrix with about `per_row` off-diagonal entries per
/// row, values uniform in `(-scale, scale)`.
pub fn random_skew(n: usize, per_row: usize, scale: f64, rng: &mut impl Rng) -> CscMatrix {
    if n < 2 {
        return CscMatrix::zeros(n, n);
    }
    let mut seen = BTreeSet::new();
    let mut t = Vec::new();
    for i in 0..n {
        for _ in 0..per_row.div_ceil(2) {
            let j = rng.gen_range(0..n);
            if j != i && seen.insert((i.min(j), i.max(j))) {
                let v = rng.gen_range(-scale..scale);
                t.push((i, j, v));
                t.push((j, i, -v));
            }
        }
    }
    CscMatrix::from_triplets(n, n, &t).expect("indices in range").drop_zeros()
}

/// Dense random skew-symmetric matrix with standard normal-like entries
/// scaled by `scale` (sum of uniforms, variance one).
pub fn random_dense_skew(n: usize, scale: f64, rng: &mut impl Rng) -> CscMatrix {
    let mut t = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..j {
            let v = scale * approx_normal(rng);
            t.push((i, j, v));
            t.push((j, i, -v));
        }
    }
    CscMatrix::from_triplets(n, n, &t).expect("indices in range")
}

fn approx_normal(rng: &mut impl Rng) -> f64 {
    (0..12).map(|_| rng.gen::<f64>()).sum::<f64>() - 6.0
}

/// `I + J` with `J` random sparse skew and `|J_ij| < bound < 1`.
pub fn shifted_skew(n: usize, per_row: usize, bound: f64, rng: &mut impl Rng) -> CscMatrix {
    let j = random_skew(n, per_row, bound, rng);
    j.add_scaled(1.0, &CscMatrix::identity(n), 1.0).expect("square")
}

/// Symmetric matrix with about `per_col` off-diagonal entries per column
/// and diagonal entries of random sign, so generally indefinite.
pub fn random_symmetric_indefinite(n: usize, per_col: usize, rng: &mut impl Rng) -> CscMatrix {
    let mut t = Vec::new();
    for j in 0..n {
        let d: f64 = rng.gen_range(0.5..2.0);
        t.push((j, j, if rng.gen_bool(0.3) { -d } else { d }));
        for _ in 0..per_col.div_ceil(2) {
            let i = rng.gen_range(0..n);
            if i != j {
                let v = rng.gen_range(-1.0..1.0);
                t.push((i, j, v));
                t.push((j, i, v));
            }
        }
    }
    CscMatrix::from_triplets(n, n, &t).expect("indices in range").drop_zeros()
}

/// Parameters of the two-species Brusselator on the unit square.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Brusselator {
    pub delta_u: f64,
    pub delta_v: f64,
    pub alpha: f64,
    pub beta: f64,
    pub length: f64,
}

impl Default for Brusselator {
    fn default() -> Self {
        Self { delta_u: 0.008, delta_v: 0.004, alpha: 2.0, beta: 5.45, length: 0.51302 }
    }
}

impl Brusselator {
    /// Jacobian at the steady state `(α, β/α)` on an `m x m` interior grid
    /// with Dirichlet boundary, species blocked:
    /// `[[τ_u T + (β-1) I, α² I], [-β I, τ_v T - α² I]]`, `τ = δ / (L h)²`.
    /// Order `2m²`, `2(5m² - 4m) + 2m²` nonzeros.
    pub fn jacobian(&self, m: usize) -> CscMatrix {
        let n = m * m;
        let h = 1.0 / (m as f64 + 1.0);
        let tu = self.delta_u / (self.length * h).powi(2);
        let tv = self.delta_v / (self.length * h).powi(2);
        let a2 = self.alpha * self.alpha;
        let mut t = Vec::with_capacity(12 * n);
        for (block, tau, shift) in [(0, tu, self.beta - 1.0), (n, tv, -a2)] {
            for gy in 0..m {
                for gx in 0..m {
                    let k = gy * m + gx;
                    t.push((block + k, block + k, -4.0 * tau + shift));
                    if gx > 0 {
                        t.push((block + k, block + k - 1, tau));
                    }
                    if gx + 1 < m {
                        t.push((block + k, block + k + 1, tau));
                    }
                    if gy > 0 {
                        t.push((block + k, block + k - m, tau));
                    }
                    if gy + 1 < m {
                        t.push((block + k, block + k + m, tau));
                    }
                }
            }
        }
        for k in 0..n {
            t.push((k, n + k, a2));
            t.push((n + k, k, -self.beta));
        }
        CscMatrix::from_triplets(2 * n, 2 * n, &t).expect("indices in range")
    }
}
