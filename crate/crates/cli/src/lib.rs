//! Runners behind the `skewprec` command: single solves, scaling and
//! symmetrizer metrics, and batch comparisons.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use skewprec::baseline::mps_rcm_solve;
use skewprec::ildl::IldlVariant;
use skewprec::metrics::{metrics, MatrixMetrics};
use skewprec::mmio::{read_matrix_market, read_vector};
use skewprec::symmetrizer::{symmetrizer_for, SymmetrizerPattern};
use skewprec::transversal::scale_and_permute;
use skewprec::twolevel::{solve, SolveReport, Termination, TwoLevelOptions};
use skewprec::{CscMatrix, Error};

pub const EXIT_CONVERGED: i32 = 0;
pub const EXIT_NOT_CONVERGED: i32 = 2;
pub const EXIT_BREAKDOWN: i32 = 3;
pub const EXIT_IO: i32 = 4;
pub const EXIT_INVALID_INPUT: i32 = 5;
pub const EXIT_USAGE: i32 = 64;

/// Environment variable holding the seed for random Lanczos start vectors.
pub const SEED_VAR: &str = "SKEWPREC_SEED";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    TwoLevel,
    MpsRcm,
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "two-level" => Ok(Method::TwoLevel),
            "mps-rcm" => Ok(Method::MpsRcm),
            _ => Err(format!("unknown method '{s}' (expected two-level or mps-rcm)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PatternChoice {
    Diag,
    Tri,
    LikeA,
}

impl PatternChoice {
    pub fn pattern(self) -> SymmetrizerPattern {
        match self {
            PatternChoice::Diag => SymmetrizerPattern::Diagonal,
            PatternChoice::Tri => SymmetrizerPattern::Tridiagonal,
            PatternChoice::LikeA => SymmetrizerPattern::LikeMatrix,
        }
    }
}

impl FromStr for PatternChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "diag" => Ok(PatternChoice::Diag),
            "tri" => Ok(PatternChoice::Tri),
            "like-a" => Ok(PatternChoice::LikeA),
            _ => Err(format!("unknown pattern '{s}' (expected diag, tri or like-a)")),
        }
    }
}

/// `nofill` or `t<drop tolerance>`, e.g. `t1e-2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IldlChoice(pub IldlVariant);

impl IldlChoice {
    pub fn label(&self) -> String {
        match self.0 {
            IldlVariant::NoFill => "nofill".into(),
            IldlVariant::Threshold(t) => format!("t{t:e}"),
        }
    }
}

impl FromStr for IldlChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "nofill" {
            return Ok(IldlChoice(IldlVariant::NoFill));
        }
        s.strip_prefix('t')
            .and_then(|t| t.parse::<f64>().ok())
            .filter(|t| t.is_finite() && *t >= 0.0)
            .map(|t| IldlChoice(IldlVariant::Threshold(t)))
            .ok_or_else(|| format!("unknown ildl variant '{s}' (expected nofill or t<tol>, e.g. t1e-2)"))
    }
}

impl std::fmt::Display for IldlChoice {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.label())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RhsMode {
    /// `b = A · ones`, so the exact solution is all ones.
    Ones,
    File(PathBuf),
}

impl FromStr for RhsMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "ones" {
            Ok(RhsMode::Ones)
        } else if let Some(p) = s.strip_prefix("file:") {
            Ok(RhsMode::File(PathBuf::from(p)))
        } else {
            Err(format!("unknown rhs '{s}' (expected ones or file:<path>)"))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Json,
    Csv,
    Text,
}

impl FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "json" => Ok(OutputFormat::Json),
            "csv" => Ok(OutputFormat::Csv),
            "text" => Ok(OutputFormat::Text),
            _ => Err(format!("unknown output format '{s}' (expected json, csv or text)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub matrix: PathBuf,
    pub method: Method,
    pub pattern: PatternChoice,
    pub gamma: f64,
    pub ildl: IldlChoice,
    pub k: usize,
    pub tol: f64,
    pub maxit: usize,
    pub rhs: RhsMode,
    pub seed: Option<u64>,
}

impl RunConfig {
    pub fn new(matrix: impl Into<PathBuf>) -> Self {
        Self {
            matrix: matrix.into(),
            method: Method::TwoLevel,
            pattern: PatternChoice::Tri,
            gamma: 1.0,
            ildl: IldlChoice(IldlVariant::Threshold(1e-2)),
            k: 20,
            tol: 1e-5,
            maxit: 2000,
            rhs: RhsMode::Ones,
            seed: None,
        }
    }

    fn two_level_options(&self) -> TwoLevelOptions {
        TwoLevelOptions {
            pattern: self.pattern.pattern(),
            gamma: self.gamma,
            ildl: self.ildl.0,
            k: self.k,
            tol: self.tol,
            maxit: self.maxit,
            inner_tol: self.tol,
            seed: self.seed,
            ..TwoLevelOptions::default()
        }
    }
}

/// Reads the seed from the environment; an unparsable value is an error.
pub fn seed_from_env() -> Result<Option<u64>, String> {
    match std::env::var(SEED_VAR) {
        Ok(v) => v.trim().parse().map(Some).map_err(|_| format!("{SEED_VAR}='{v}' is not an unsigned integer")),
        Err(_) => Ok(None),
    }
}

#[derive(Debug)]
pub enum CliError {
    Io(String),
    Invalid(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) => EXIT_IO,
            CliError::Invalid(_) => EXIT_INVALID_INPUT,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Io(m) | CliError::Invalid(m) => f.write_str(m),
        }
    }
}

impl std::error::Error for CliError {}

fn load_matrix(path: &Path) -> Result<CscMatrix, CliError> {
    let a = read_matrix_market(path).map_err(|e| match e {
        Error::Io(m) => CliError::Io(m),
        other => CliError::Io(format!("{}: {other}", path.display())),
    })?;
    if !a.is_square() {
        return Err(CliError::Invalid(format!("{}: matrix is {}x{}, not square", path.display(), a.nrows(), a.ncols())));
    }
    Ok(a)
}

/// Outcome of one solve, in the shape of a single iteration-table cell plus
/// the rank column of the remainder table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub matrix: String,
    pub method: Method,
    /// `nofill`, `t1e-1`, ... for two-level; `ilu0` for mps-rcm.
    pub variant: String,
    pub n: usize,
    pub nnz: usize,
    pub termination: String,
    pub outer_iterations: usize,
    pub avg_inner_iterations: Option<f64>,
    /// `‖b - A x‖ / ‖b‖`; `None` when not finite.
    pub relative_residual: Option<f64>,
    /// `‖x - ones‖ / ‖ones‖` when the right-hand side was built from ones.
    pub solution_error: Option<f64>,
    pub rank: Option<usize>,
    pub rank_percent: Option<f64>,
    pub wall_time: f64,
    pub residual_history: Vec<Option<f64>>,
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

impl RunReport {
    pub fn converged(&self) -> bool {
        self.termination == Termination::Converged.label()
    }

    pub fn exit_code(&self) -> i32 {
        if self.converged() {
            EXIT_CONVERGED
        } else if self.termination == Termination::FactorizationBreakdown.label() {
            EXIT_BREAKDOWN
        } else {
            EXIT_NOT_CONVERGED
        }
    }

    /// Iteration-table cell: `3(105.5)` for two-level, `20` for mps-rcm,
    /// `*` stagnated, `†` iteration limit, `‡` breakdown.
    pub fn cell(&self) -> String {
        match self.termination.as_str() {
            "converged" => match self.avg_inner_iterations {
                Some(avg) => format!("{}({avg:.1})", self.outer_iterations),
                None => self.outer_iterations.to_string(),
            },
            "stagnated" => "*".into(),
            "maxit" => "†".into(),
            _ => "‡".into(),
        }
    }

    pub fn render(&self, format: OutputFormat) -> String {
        match format {
            OutputFormat::Json => serde_json::to_string_pretty(self).expect("serializable report"),
            OutputFormat::Csv => {
                let mut s = String::from(
                    "matrix,method,variant,n,nnz,termination,outer_iterations,avg_inner_iterations,relative_residual,solution_error,rank,rank_percent,wall_time\n",
                );
                let opt = |x: Option<f64>, p: usize| x.map(|v| format!("{v:.p$e}")).unwrap_or_default();
                let _ = writeln!(
                    s,
                    "{},{},{},{},{},{},{},{},{},{},{},{},{:.3}",
                    csv_field(&self.matrix),
                    method_label(self.method),
                    self.variant,
                    self.n,
                    self.nnz,
                    self.termination,
                    self.outer_iterations,
                    self.avg_inner_iterations.map(|v| format!("{v:.1}")).unwrap_or_default(),
                    opt(self.relative_residual, 3),
                    opt(self.solution_error, 3),
                    self.rank.map(|r| r.to_string()).unwrap_or_default(),
                    self.rank_percent.map(|v| format!("{v:.1}")).unwrap_or_default(),
                    self.wall_time
                );
                s
            }
            OutputFormat::Text => {
                let mut s = String::new();
                let _ = writeln!(s, "matrix            {} (n = {}, nnz = {})", self.matrix, self.n, self.nnz);
                let _ = writeln!(s, "method            {} {}", method_label(self.method), self.variant);
                let _ = writeln!(s, "termination       {}", self.termination);
                let _ = writeln!(s, "outer iterations  {}", self.outer_iterations);
                if let Some(avg) = self.avg_inner_iterations {
                    let _ = writeln!(s, "avg inner         {avg:.1}");
                }
                if let Some(r) = self.relative_residual {
                    let _ = writeln!(s, "rel. residual     {r:.3e}");
                }
                if let Some(e) = self.solution_error {
                    let _ = writeln!(s, "solution error    {e:.3e}");
                }
                if let (Some(r), Some(p)) = (self.rank, self.rank_percent) {
                    let _ = writeln!(s, "remainder rank    {r} ({p:.1}%)");
                }
                let _ = writeln!(s, "wall time         {:.3} s", self.wall_time);
                s
            }
        }
    }
}

fn method_label(m: Method) -> &'static str {
    match m {
        Method::TwoLevel => "two-level",
        Method::MpsRcm => "mps-rcm",
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn run_loaded(a: &CscMatrix, cfg: &RunConfig) -> Result<RunReport, CliError> {
    let n = a.nrows();
    let ones = vec![1.0; n];
    let b = match &cfg.rhs {
        RhsMode::Ones => a.spmv(&ones).expect("square"),
        RhsMode::File(p) => {
            let b = read_vector(p).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
            if b.len() != n {
                return Err(CliError::Invalid(format!(
                    "{}: right-hand side has {} entries, matrix has {n} rows",
                    p.display(),
                    b.len()
                )));
            }
            b
        }
    };
    let (x, report, variant): (Vec<f64>, SolveReport, String) = match cfg.method {
        Method::TwoLevel => {
            let (x, r) = solve(a, &b, &cfg.two_level_options()).map_err(|e| CliError::Invalid(e.to_string()))?;
            (x, r, cfg.ildl.label())
        }
        Method::MpsRcm => {
            let (x, r) = mps_rcm_solve(a, &b, cfg.tol, cfg.maxit).map_err(|e| CliError::Invalid(e.to_string()))?;
            (x, r, "ilu0".into())
        }
    };
    let two_level = cfg.method == Method::TwoLevel;
    let breakdown = report.termination == Termination::FactorizationBreakdown;
    let solution_error = (cfg.rhs == RhsMode::Ones && !breakdown).then(|| {
        let d: f64 = x.iter().map(|v| (v - 1.0) * (v - 1.0)).sum();
        (d / n.max(1) as f64).sqrt()
    });
    Ok(RunReport {
        matrix: cfg.matrix.display().to_string(),
        method: cfg.method,
        variant,
        n,
        nnz: a.nnz(),
        termination: report.termination.label().into(),
        outer_iterations: report.outer_iterations,
        avg_inner_iterations: (two_level && !breakdown).then_some(report.avg_inner_iterations),
        relative_residual: finite(report.relative_residual),
        solution_error: solution_error.and_then(finite),
        rank: (two_level && !breakdown).then_some(report.rank),
        rank_percent: (two_level && !breakdown && n > 0).then(|| 100.0 * report.rank as f64 / n as f64),
        wall_time: report.wall_time,
        residual_history: report.relative_residual_history.iter().map(|&h| finite(h)).collect(),
    })
}

pub fn run_solve(cfg: &RunConfig) -> Result<RunReport, CliError> {
    let a = load_matrix(&cfg.matrix)?;
    run_loaded(&a, cfg)
}

/// Skew-symmetry ratio and diagonal distance at each preprocessing stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub matrix: String,
    /// Stage names: original, scaled, scaled + diagonal S, scaled + tridiagonal S.
    pub stages: Vec<String>,
    /// Percent, one value per stage.
    pub skew_symmetry: Vec<f64>,
    pub diagonal_distance: Vec<f64>,
}

pub const METRIC_STAGES: [&str; 4] = ["original", "transversal", "transversal+diag", "transversal+tri"];

pub fn run_metrics(path: &Path, gamma: f64) -> Result<MetricsReport, CliError> {
    let a = load_matrix(path)?;
    let invalid = |e: Error| CliError::Invalid(e.to_string());
    let mut stages: Vec<MatrixMetrics> = vec![metrics(&a).map_err(invalid)?];
    let scaled = scale_and_permute(&a).map_err(invalid)?;
    stages.push(metrics(&scaled.matrix).map_err(invalid)?);
    for pattern in [SymmetrizerPattern::Diagonal, SymmetrizerPattern::Tridiagonal] {
        let s = symmetrizer_for(&scaled.matrix, &pattern, gamma).map_err(invalid)?;
        let ahat = scaled.matrix.matmul(&s.s).map_err(invalid)?;
        stages.push(metrics(&ahat).map_err(invalid)?);
    }
    Ok(MetricsReport {
        matrix: path.display().to_string(),
        stages: METRIC_STAGES.iter().map(|s| s.to_string()).collect(),
        skew_symmetry: stages.iter().map(|m| 100.0 * m.skew_symmetry_ratio).collect(),
        diagonal_distance: stages.iter().map(|m| m.diagonal_distance).collect(),
    })
}

impl MetricsReport {
    pub fn render(&self, format: OutputFormat) -> String {
        match format {
            OutputFormat::Json => serde_json::to_string_pretty(self).expect("serializable report"),
            OutputFormat::Csv => {
                let mut s = format!("quantity,{}\n", self.stages.join(","));
                let row = |v: &[f64], pct: bool| {
                    v.iter()
                        .map(|x| if pct { format!("{x:.1}") } else { format_distance(*x) })
                        .collect::<Vec<_>>()
                        .join(",")
                };
                let _ = writeln!(s, "skew-symmetry %,{}", row(&self.skew_symmetry, true));
                let _ = writeln!(s, "diagonal distance,{}", row(&self.diagonal_distance, false));
                s
            }
            OutputFormat::Text => {
                let mut s = format!("{}\n{:<20}", self.matrix, "");
                for st in &self.stages {
                    let _ = write!(s, "{st:>18}");
                }
                let _ = write!(s, "\n{:<20}", "skew-symmetry");
                for v in &self.skew_symmetry {
                    let _ = write!(s, "{:>17.1}%", v);
                }
                let _ = write!(s, "\n{:<20}", "diagonal distance");
                for v in &self.diagonal_distance {
                    let _ = write!(s, "{:>18}", format_distance(*v));
                }
                s.push('\n');
                s
            }
        }
    }
}

/// One decimal below 1000, scientific notation above.
fn format_distance(x: f64) -> String {
    if x.abs() < 1000.0 {
        format!("{x:.1}")
    } else {
        format!("{x:.1e}")
    }
}

/// The method/variant grid of a comparison.
pub fn comparison_grid() -> Vec<(Method, IldlChoice)> {
    vec![
        (Method::TwoLevel, IldlChoice(IldlVariant::NoFill)),
        (Method::TwoLevel, IldlChoice(IldlVariant::Threshold(1e-1))),
        (Method::TwoLevel, IldlChoice(IldlVariant::Threshold(1e-2))),
        (Method::MpsRcm, IldlChoice(IldlVariant::NoFill)),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub matrix: String,
    pub cells: Vec<String>,
    /// Full reports; `None` where the matrix could not be loaded.
    pub reports: Vec<Option<RunReport>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareTable {
    pub columns: Vec<String>,
    pub rows: Vec<CompareRow>,
}

/// Matrix paths listed one per line; blank lines and `#` comments are
/// skipped, relative paths resolve against the list's directory.
pub fn read_list(path: &Path) -> Result<Vec<PathBuf>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let base = path.parent().unwrap_or(Path::new("."));
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| {
            let p = PathBuf::from(l);
            if p.is_absolute() {
                p
            } else {
                base.join(p)
            }
        })
        .collect())
}

/// Runs every listed matrix through the grid. Matrices are processed on
/// separate threads; a failing cell never stops the batch.
pub fn run_compare(paths: &[PathBuf], template: &RunConfig) -> CompareTable {
    let grid = comparison_grid();
    let columns = grid
        .iter()
        .map(|(m, v)| match m {
            Method::TwoLevel => format!("two-level {v}"),
            Method::MpsRcm => "mps-rcm ilu0".into(),
        })
        .collect();
    let rows = std::thread::scope(|scope| {
        let handles: Vec<_> = paths
            .iter()
            .map(|p| {
                let grid = &grid;
                scope.spawn(move || compare_row(p, grid, template))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("comparison thread")).collect()
    });
    CompareTable { columns, rows }
}

fn compare_row(path: &Path, grid: &[(Method, IldlChoice)], template: &RunConfig) -> CompareRow {
    let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let a = match load_matrix(path) {
        Ok(a) => a,
        Err(e) => {
            let msg = format!("error: {e}");
            return CompareRow { matrix: name, cells: vec![msg; grid.len()], reports: vec![None; grid.len()] };
        }
    };
    let mut cells = Vec::new();
    let mut reports = Vec::new();
    for &(method, ildl) in grid {
        let cfg = RunConfig { matrix: path.to_path_buf(), method, ildl, rhs: RhsMode::Ones, ..template.clone() };
        match run_loaded(&a, &cfg) {
            Ok(r) => {
                cells.push(r.cell());
                reports.push(Some(r));
            }
            Err(e) => {
                cells.push(format!("error: {e}"));
                reports.push(None);
            }
        }
    }
    CompareRow { matrix: name, cells, reports }
}

impl CompareTable {
    pub fn render(&self, format: OutputFormat) -> String {
        match format {
            OutputFormat::Json => serde_json::to_string_pretty(self).expect("serializable table"),
            OutputFormat::Csv | OutputFormat::Text => {
                let mut s = format!("matrix,{}\n", self.columns.join(","));
                for r in &self.rows {
                    let cells: Vec<String> = r.cells.iter().map(|c| csv_field(c)).collect();
                    let _ = writeln!(s, "{},{}", csv_field(&r.matrix), cells.join(","));
                }
                s
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_option_values() {
        assert_eq!("t1e-2".parse::<IldlChoice>().unwrap().0, IldlVariant::Threshold(1e-2));
        assert_eq!("nofill".parse::<IldlChoice>().unwrap().0, IldlVariant::NoFill);
        assert!("t-1".parse::<IldlChoice>().is_err());
        assert_eq!("like-a".parse::<PatternChoice>().unwrap(), PatternChoice::LikeA);
        assert_eq!("file:b.txt".parse::<RhsMode>().unwrap(), RhsMode::File("b.txt".into()));
        assert!("two".parse::<Method>().is_err());
    }

    #[test]
    fn variant_labels() {
        assert_eq!(IldlChoice(IldlVariant::Threshold(0.1)).label(), "t1e-1");
        assert_eq!(IldlChoice(IldlVariant::Threshold(0.01)).label(), "t1e-2");
    }

    #[test]
    fn cells_follow_the_table_convention() {
        let mut r = RunReport {
            matrix: "m".into(),
            method: Method::TwoLevel,
            variant: "t1e-2".into(),
            n: 1,
            nnz: 1,
            termination: "converged".into(),
            outer_iterations: 3,
            avg_inner_iterations: Some(105.46),
            relative_residual: Some(1e-6),
            solution_error: None,
            rank: Some(0),
            rank_percent: Some(0.0),
            wall_time: 0.0,
            residual_history: vec![],
        };
        assert_eq!(r.cell(), "3(105.5)");
        r.termination = "maxit".into();
        assert_eq!(r.cell(), "†");
        assert_eq!(r.exit_code(), EXIT_NOT_CONVERGED);
        r.termination = "breakdown".into();
        assert_eq!(r.cell(), "‡");
        assert_eq!(r.exit_code(), EXIT_BREAKDOWN);
    }
}
