//! Command-line front end: analyze solvability of a problem file, solve it
//! and export the solution, or run the randomized verification suite.
//!
//! Exit codes separate mathematical refusals from numerical failures:
//!   0  success / solvable / all checks passed
//!   1  schema or i/o error
//!   2  not certified (aggregate bound at or above 1)
//!   3  boundary operator norm at or above 1
//!   4  solve finished but a residual or boundary certificate failed
//!   5  iteration failed to contract or hit its cap
//!   6  verification checks failed

mod config;
mod report;
mod verify;

use std::fs::File;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use opde3::analyzer::{analyze, Verdict};
use opde3::perturbed::{solve_full, FullProblem, IterationStats};
use opde3::Error as SolverError;

use config::{load_problem, LoadedProblem};
use report::{to_json, SolveReport, VerifyReport};

#[derive(Parser)]
#[command(
    name = "opde3",
    about = "Solve and certify third-order operator-differential boundary value problems on the half-line",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate the boundary norm, evaluate the solvability constants and
    /// print the verdict as JSON.
    Analyze {
        /// Problem file (JSON)
        file: PathBuf,
    },
    /// Solve the problem and write the solution and a certification report.
    Solve {
        /// Problem file (JSON)
        file: PathBuf,
        /// Output CSV path for the solution samples
        #[arg(long, default_value = "solution.csv")]
        out: PathBuf,
        /// Output JSON path for the certification report
        #[arg(long, default_value = "report.json")]
        report: PathBuf,
        /// Attempt the solve even when the solvability condition fails
        #[arg(long)]
        force: bool,
    },
    /// Run the verification suite on a problem file or a random instance.
    Verify {
        /// Problem file (JSON); omit when using --random
        file: Option<PathBuf>,
        /// Generate a random instance instead of reading a file
        #[arg(long)]
        random: bool,
        /// Space dimension for --random
        #[arg(long, default_value_t = 2)]
        n: usize,
        /// Seed for deterministic sampling
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Number of random samples per check family
        #[arg(long, default_value_t = 20)]
        samples: usize,
    },
}

fn main() -> ExitCode {
    if let Ok(threads) = std::env::var("OPDE3_THREADS") {
        if let Ok(k) = threads.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(k.max(1)).build_global();
        }
    }
    let cli = Cli::parse();
    match cli.command {
        Command::Analyze { file } => cmd_analyze(&file),
        Command::Solve { file, out, report, force } => cmd_solve(&file, &out, &report, force),
        Command::Verify { file, random, n, seed, samples } => {
            cmd_verify(file.as_deref(), random, n, seed, samples)
        }
    }
}

fn fail(code: u8, message: &str) -> ExitCode {
    eprintln!("error: {message}");
    ExitCode::from(code)
}

fn verdict_exit(verdict: Verdict) -> ExitCode {
    match verdict {
        Verdict::Solvable => ExitCode::SUCCESS,
        Verdict::NotCertified => ExitCode::from(2),
        Verdict::KappaTooLarge => ExitCode::from(3),
    }
}

fn cmd_analyze(file: &std::path::Path) -> ExitCode {
    let problem = match load_problem(file) {
        Ok(p) => p,
        Err(e) => return fail(1, &e),
    };
    let report = match analyze(&problem.a, &problem.k, &problem.perturbation, &problem.grid) {
        Ok(r) => r,
        Err(e) => return fail(1, &e.to_string()),
    };
    println!("{}", to_json(&report));
    verdict_exit(report.verdict)
}

fn cmd_solve(
    file: &std::path::Path,
    out: &std::path::Path,
    report_path: &std::path::Path,
    force: bool,
) -> ExitCode {
    let problem: LoadedProblem = match load_problem(file) {
        Ok(p) => p,
        Err(e) => return fail(1, &e),
    };
    let f = match &problem.f {
        Some(f) => f.clone(),
        None => return fail(1, "problem file has no right-hand side f; nothing to solve"),
    };
    let analysis = match analyze(&problem.a, &problem.k, &problem.perturbation, &problem.grid) {
        Ok(r) => r,
        Err(e) => return fail(1, &e.to_string()),
    };
    if analysis.verdict != Verdict::Solvable && !force {
        println!("{}", to_json(&analysis));
        eprintln!(
            "refusing to solve: verdict {:?} (pass --force to attempt anyway)",
            analysis.verdict
        );
        return verdict_exit(analysis.verdict);
    }

    let full = FullProblem {
        a: problem.a.clone(),
        k: problem.k.clone(),
        perturbation: problem.perturbation.clone(),
        f: f.clone(),
        grid: problem.grid,
        tol: problem.tol,
        iteration_cap: 500,
    };
    let solution = match solve_full(&full, force) {
        Ok(s) => s,
        Err(e) => return solve_error_exit(e),
    };

    if let Err(e) = write_csv(out, &solution.u.u) {
        return fail(1, &e);
    }
    let report = SolveReport {
        kappa: solution.kappa,
        alpha: solution.alpha,
        verdict: analysis.verdict,
        forced: force,
        w23_norm: solution.u.w23_norm(),
        f_l2_norm: f.l2_norm(),
        f_l2_norm_exact: problem.f_expr.as_ref().map(|e| e.l2_norm_exact()),
        residual: solution.residual,
        residual_allowed: solution.residual_allowed,
        boundary_value_norm: solution.principal.boundary_value_norm,
        boundary_slope_mismatch: solution.principal.boundary_slope_mismatch,
        decay_warning: solution.principal.decay_warning,
        iteration_stats: IterationStats {
            iterations: solution.stats.iterations,
            final_residual: solution.stats.final_residual,
            contraction_ratios: solution.stats.contraction_ratios.clone(),
        },
    };
    let json = to_json(&report);
    if let Err(e) = std::fs::write(report_path, format!("{json}\n")) {
        return fail(1, &format!("cannot write {}: {e}", report_path.display()));
    }
    println!("{json}");
    ExitCode::SUCCESS
}

fn solve_error_exit(e: SolverError) -> ExitCode {
    let code = match e {
        SolverError::ResidualExceeded { .. }
        | SolverError::BoundaryConditionViolated { .. }
        | SolverError::ImaginaryResidue { .. } => 4,
        SolverError::NotContracting { .. }
        | SolverError::IterationCapExceeded { .. }
        | SolverError::ContractionFailure { .. }
        | SolverError::PowerIterationDiverged { .. } => 5,
        SolverError::KappaTooLarge { .. } => 3,
        SolverError::NotCertified { .. } => 2,
        _ => 1,
    };
    fail(code, &e.to_string())
}

fn write_csv(path: &std::path::Path, u: &opde3::GridFunction) -> Result<(), String> {
    let mut file =
        File::create(path).map_err(|e| format!("cannot create {}: {e}", path.display()))?;
    u.write_csv(&mut file).map_err(|e| e.to_string())?;
    file.flush().map_err(|e| e.to_string())
}

fn cmd_verify(
    file: Option<&std::path::Path>,
    random: bool,
    n: usize,
    seed: u64,
    samples: usize,
) -> ExitCode {
    let (inputs, mode, dim) = match (file, random) {
        (Some(_), true) => {
            return fail(1, "pass either a problem file or --random, not both");
        }
        (None, false) => {
            return fail(1, "verify needs a problem file or --random");
        }
        (Some(path), false) => {
            let problem = match load_problem(path) {
                Ok(p) => p,
                Err(e) => return fail(1, &e),
            };
            let dim = problem.a.dim();
            (
                verify::SuiteInputs {
                    a: problem.a,
                    k: problem.k,
                    perturbation: problem.perturbation,
                    grid: problem.grid,
                },
                "file".to_string(),
                dim,
            )
        }
        (None, true) => {
            if n == 0 {
                return fail(1, "--n must be positive");
            }
            (verify::random_inputs(n, seed), "random".to_string(), n)
        }
    };

    let (analysis, checks) = match verify::run_suite(&inputs, samples, seed) {
        Ok(r) => r,
        Err(e) => return fail(1, &e),
    };
    let failed: Vec<String> =
        checks.iter().filter(|c| !c.pass).map(|c| c.name.clone()).collect();
    let report = VerifyReport {
        mode,
        n: dim,
        seed,
        samples,
        passed: checks.len() - failed.len(),
        failed: failed.len(),
        analysis: Some(analysis),
        checks,
    };
    println!("{}", to_json(&report));
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        eprintln!("failed checks ({}):", failed.len());
        for name in &failed {
            eprintln!("  {name}");
        }
        ExitCode::from(6)
    }
}
