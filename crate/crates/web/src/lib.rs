//! Browser bindings for the demo page in `www/`. Each exported function
//! takes plain numbers and returns a JSON string; the `*_report` functions
//! behind them are ordinary Rust and are what the tests exercise.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use wasm_bindgen::prelude::*;

use skewprec::baseline::mps_rcm_solve;
use skewprec::gallery::{random_nonsingular, random_skew, Brusselator};
use skewprec::ildl::IldlVariant;
use skewprec::krylov::mrs_solve;
use skewprec::metrics::metrics;
use skewprec::skew::SkewOperator;
use skewprec::symmetrizer::{symmetrizer_for, SymmetrizerPattern};
use skewprec::transversal::scale_and_permute;
use skewprec::twolevel::{build_preconditioner_with, solve, TwoLevelOptions};
use skewprec::CscMatrix;

const MAX_GRID: usize = 40;
const MAX_RANDOM: usize = 3000;

/// Test matrix: `brusselator` on a `size x size` grid, or `random` of
/// order `size`.
fn test_matrix(kind: &str, size: usize, seed: u32) -> Result<CscMatrix, String> {
    match kind {
        "brusselator" => Ok(Brusselator::default().jacobian(size.clamp(2, MAX_GRID))),
        "random" => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.into());
            let n = size.clamp(2, MAX_RANDOM);
            let a = random_nonsingular(n, 4, &mut rng);
            Ok(a.add_scaled(1.0, &CscMatrix::identity(n), 0.5).expect("square"))
        }
        _ => Err(format!("unknown matrix kind '{kind}'")),
    }
}

#[derive(Debug, Serialize)]
pub struct Stage {
    pub name: &'static str,
    pub skew_percent: f64,
    pub diagonal_distance: f64,
}

#[derive(Debug, Serialize)]
pub struct MetricsDemo {
    pub n: usize,
    pub nnz: usize,
    pub stages: Vec<Stage>,
}

pub fn metrics_report(kind: &str, size: usize, seed: u32, gamma: f64) -> Result<MetricsDemo, String> {
    let a = test_matrix(kind, size, seed)?;
    let e = |e: skewprec::Error| e.to_string();
    let stage = |name, m: &CscMatrix| -> Result<Stage, String> {
        let v = metrics(m).map_err(e)?;
        Ok(Stage { name, skew_percent: 100.0 * v.skew_symmetry_ratio, diagonal_distance: v.diagonal_distance })
    };
    let mut stages = vec![stage("original", &a)?];
    let scaled = scale_and_permute(&a).map_err(e)?;
    stages.push(stage("transversal", &scaled.matrix)?);
    for (name, pattern) in [
        ("transversal + diagonal S", SymmetrizerPattern::Diagonal),
        ("transversal + tridiagonal S", SymmetrizerPattern::Tridiagonal),
    ] {
        let s = symmetrizer_for(&scaled.matrix, &pattern, gamma).map_err(e)?;
        stages.push(stage(name, &scaled.matrix.matmul(&s.s).map_err(e)?)?);
    }
    Ok(MetricsDemo { n: a.nrows(), nnz: a.nnz(), stages })
}

#[derive(Debug, Serialize)]
pub struct Run {
    pub label: String,
    pub termination: &'static str,
    pub iterations: usize,
    pub avg_inner: Option<f64>,
    pub rank: Option<usize>,
    pub relative_residual: f64,
    pub history: Vec<f64>,
}

#[derive(Debug, Serialize)]
pub struct Comparison {
    pub n: usize,
    pub runs: Vec<Run>,
}

fn parse_ildl(s: &str) -> Result<IldlVariant, String> {
    match s {
        "nofill" => Ok(IldlVariant::NoFill),
        _ => s
            .strip_prefix('t')
            .and_then(|t| t.parse().ok())
            .map(IldlVariant::Threshold)
            .ok_or_else(|| format!("unknown ildl variant '{s}'")),
    }
}

/// Two-level with the given ildl variant against mps-rcm, right-hand side
/// from the all-ones solution.
pub fn comparison_report(kind: &str, size: usize, seed: u32, ildl: &str, k: usize) -> Result<Comparison, String> {
    let a = test_matrix(kind, size, seed)?;
    let n = a.nrows();
    let b = a.spmv(&vec![1.0; n]).expect("square");
    let opts = TwoLevelOptions { ildl: parse_ildl(ildl)?, k, ..TwoLevelOptions::default() };
    let (_, r) = solve(&a, &b, &opts).map_err(|e| e.to_string())?;
    let two_level = Run {
        label: format!("two-level ({ildl}, k = {k})"),
        termination: r.termination.label(),
        iterations: r.outer_iterations,
        avg_inner: Some(r.avg_inner_iterations),
        rank: Some(r.rank),
        relative_residual: r.relative_residual,
        history: r.relative_residual_history,
    };
    let (_, r) = mps_rcm_solve(&a, &b, opts.tol, opts.maxit).map_err(|e| e.to_string())?;
    let baseline = Run {
        label: "mps-rcm (ilu0)".into(),
        termination: r.termination.label(),
        iterations: r.outer_iterations,
        avg_inner: None,
        rank: None,
        relative_residual: r.relative_residual,
        history: r.relative_residual_history,
    };
    Ok(Comparison { n, runs: vec![two_level, baseline] })
}

#[derive(Debug, Serialize)]
pub struct DeflationDemo {
    pub n: usize,
    pub k: usize,
    pub plain: Vec<f64>,
    pub deflated: Vec<f64>,
    /// Relative difference between the deflated solve (with its low-rank
    /// correction) and the plain solve.
    pub agreement: f64,
}

/// MRS on `(I + J) x = b` for a random sparse skew `J`, with and without
/// removing `k` skew-Lanczos directions.
pub fn deflation_report(n: usize, scale: f64, k: usize, seed: u32) -> Result<DeflationDemo, String> {
    let n = n.clamp(4, MAX_RANDOM);
    let mut rng = ChaCha8Rng::seed_from_u64(seed.into());
    let j = random_skew(n, 6, scale, &mut rng);
    let a = j.add_scaled(1.0, &CscMatrix::identity(n), 1.0).expect("square");
    let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let tol = 1e-10;
    let op = SkewOperator::from_matrix(&j).map_err(|e| e.to_string())?;
    let (x_plain, plain) = mrs_solve(1.0, &op, &b, tol, 4 * n);
    let p = build_preconditioner_with(&a, IldlVariant::exact(), k, tol, 4 * n, None, false).map_err(|e| e.to_string())?;
    let (_, deflated) = mrs_solve(1.0, &p.deflated, &b, tol, 4 * n);
    let x = p.apply_inverse_with(&b, tol);
    let num: f64 = x.iter().zip(&x_plain).map(|(u, v)| (u - v) * (u - v)).sum();
    let den: f64 = x_plain.iter().map(|v| v * v).sum();
    Ok(DeflationDemo {
        n,
        k: p.deflation.k,
        plain: plain.residual_history.into_iter().next().unwrap_or_default(),
        deflated: deflated.residual_history.into_iter().next().unwrap_or_default(),
        agreement: (num / den).sqrt(),
    })
}

fn to_json<T: Serialize>(r: Result<T, String>) -> Result<String, JsValue> {
    r.and_then(|v| serde_json::to_string(&v).map_err(|e| e.to_string()))
        .map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn metrics_demo(kind: &str, size: usize, seed: u32, gamma: f64) -> Result<String, JsValue> {
    to_json(metrics_report(kind, size, seed, gamma))
}

#[wasm_bindgen]
pub fn compare_demo(kind: &str, size: usize, seed: u32, ildl: &str, k: usize) -> Result<String, JsValue> {
    to_json(comparison_report(kind, size, seed, ildl, k))
}

#[wasm_bindgen]
pub fn deflation_demo(n: usize, scale: f64, k: usize, seed: u32) -> Result<String, JsValue> {
    to_json(deflation_report(n, scale, k, seed))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn metrics_have_four_stages() {
        let m = metrics_report("brusselator", 10, 0, 1.0).unwrap();
        assert_eq!(m.n, 200);
        assert_eq!(m.stages.len(), 4);
        assert!(m.stages[3].diagonal_distance < m.stages[0].diagonal_distance);
        assert!(metrics_report("nope", 10, 0, 1.0).is_err());
    }

    #[test]
    fn comparison_runs_both_methods() {
        let c = comparison_report("random", 150, 3, "t1e-2", 20).unwrap();
        assert_eq!(c.runs.len(), 2);
        assert_eq!(c.runs[0].termination, "converged");
        assert_eq!(c.runs[0].history.len(), c.runs[0].iterations + 1);
        assert!(comparison_report("random", 50, 3, "t?", 20).is_err());
    }

    #[test]
    fn deflation_shortens_the_inner_solve() {
        let d = deflation_report(400, 3.0, 20, 1).unwrap();
        assert_eq!(d.k, 20);
        assert!(d.deflated.len() <= d.plain.len());
        assert!(d.agreement < 1e-6);
    }
}
