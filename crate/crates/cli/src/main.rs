use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use skewprec_cli::{
    read_list, run_compare, run_metrics, run_solve, seed_from_env, IldlChoice, Method, OutputFormat, PatternChoice,
    RhsMode, RunConfig, EXIT_CONVERGED, EXIT_INVALID_INPUT, EXIT_USAGE,
};

/// Two-level Krylov solver for general sparse systems.
///
/// Exit codes: 0 converged, 2 not converged, 3 factorization breakdown,
/// 4 I/O error, 5 invalid input, 64 usage error.
#[derive(Parser)]
#[command(name = "skewprec", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Clone)]
struct SolverArgs {
    /// Symmetrizer pattern: diag, tri or like-a.
    #[arg(long, default_value = "tri")]
    pattern: PatternChoice,
    /// Weight of the diagonal equations in the symmetrizer.
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    /// Lanczos vectors used for deflation.
    #[arg(long, default_value_t = 20)]
    k: usize,
    #[arg(long, default_value_t = 1e-5)]
    tol: f64,
    #[arg(long, default_value_t = 2000)]
    maxit: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Solve A x = b with the two-level method or the mps-rcm baseline.
    Solve {
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long, default_value = "two-level")]
        method: Method,
        /// nofill or t<drop tolerance> (t1e-1, t1e-2, ...).
        #[arg(long, default_value = "t1e-2")]
        ildl: IldlChoice,
        /// ones (b = A·1) or file:<path>.
        #[arg(long, default_value = "ones")]
        rhs: RhsMode,
        #[arg(long, default_value = "text")]
        out: OutputFormat,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Skew-symmetry ratio and diagonal distance before and after scaling
    /// and symmetrization.
    Metrics {
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        gamma: f64,
        #[arg(long, default_value = "text")]
        out: OutputFormat,
    },
    /// Iteration table for a list of matrices across all methods.
    Compare {
        /// File with one Matrix Market path per line.
        #[arg(long)]
        list: PathBuf,
        #[arg(long, default_value = "csv")]
        out: OutputFormat,
        #[command(flatten)]
        solver: SolverArgs,
    },
}

fn exit(code: i32) -> ExitCode {
    ExitCode::from(code as u8)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return exit(if e.use_stderr() { EXIT_USAGE } else { EXIT_CONVERGED });
        }
    };
    let seed = match seed_from_env() {
        Ok(s) => s,
        Err(msg) => {
            eprintln!("error: {msg}");
            return exit(EXIT_INVALID_INPUT);
        }
    };
    let config = |matrix: PathBuf, s: &SolverArgs| RunConfig {
        pattern: s.pattern,
        gamma: s.gamma,
        k: s.k,
        tol: s.tol,
        maxit: s.maxit,
        seed,
        ..RunConfig::new(matrix)
    };
    match cli.command {
        Command::Solve { matrix, method, ildl, rhs, out, solver } => {
            let cfg = RunConfig { method, ildl, rhs, ..config(matrix, &solver) };
            match run_solve(&cfg) {
                Ok(report) => {
                    print!("{}", report.render(out));
                    if out == OutputFormat::Json {
                        println!();
                    }
                    exit(report.exit_code())
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    exit(e.exit_code())
                }
            }
        }
        Command::Metrics { matrix, gamma, out } => match run_metrics(&matrix, gamma) {
            Ok(report) => {
                print!("{}", report.render(out));
                exit(EXIT_CONVERGED)
            }
            Err(e) => {
                eprintln!("error: {e}");
                exit(e.exit_code())
            }
        },
        Command::Compare { list, out, solver } => match read_list(&list) {
            Ok(paths) => {
                let table = run_compare(&paths, &config(PathBuf::new(), &solver));
                print!("{}", table.render(out));
                exit(EXIT_CONVERGED)
            }
            Err(e) => {
                eprintln!("error: {e}");
                exit(e.exit_code())
            }
        },
    }
}
