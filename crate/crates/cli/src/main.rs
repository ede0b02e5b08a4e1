//! `skorokhod solve | verify | barrier`.
//!
//! Exit codes: 0 success, 1 input error, 2 infeasible problem, 3 a check
//! failed, 4 the solution's support does not have the predicted shape.

mod canonical;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};
use skorokhod::barriers::extract_barrier;
use skorokhod::montecarlo::{dkw_tolerance, verify_embedding};
use skorokhod::optsep::{certificate_check, solve_pathtree_oracle, verify_monotonicity, Infeasibility, SolutionJson};
use skorokhod::{EmbeddingProblem, Error, Mode, OptimalSolution};

#[derive(Parser)]
#[command(name = "skorokhod", version, about = "Optimal Skorokhod embeddings on a random-walk lattice")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a problem file and write the solution JSON.
    Solve {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        mode: ModeArgs,
        /// Also solve over path-dependent rules and report the difference.
        #[arg(long)]
        oracle: bool,
    },
    /// Check a solution: certificate, stop-go pairs, and a seeded simulation.
    Verify {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        mode: ModeArgs,
        #[arg(long)]
        solution: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100_000)]
        samples: u64,
        /// Kolmogorov tolerance; defaults to the DKW bound at 99.9%.
        #[arg(long)]
        tol_kolmogorov: Option<f64>,
    },
    /// Export the stopping region of a solution as CSV (or JSON).
    Barrier {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        mode: ModeArgs,
        /// Solution file; the problem is solved first when absent.
        #[arg(long)]
        solution: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    problem: PathBuf,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    tol_gap: Option<f64>,
    #[arg(long)]
    tol_certificate: Option<f64>,
    #[arg(long)]
    tol_marginal: Option<f64>,
    #[arg(long)]
    tol_support: Option<f64>,
    /// Primal and dual feasibility tolerance of the simplex method.
    #[arg(long)]
    tol_lp: Option<f64>,
}

#[derive(Args)]
struct ModeArgs {
    /// Overrides the problem file's mode.
    #[arg(long, value_enum)]
    mode: Option<ModeFlag>,
    /// Total-variation budget for soft mode.
    #[arg(long)]
    epsilon: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeFlag {
    Exact,
    Soft,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

/// A failed run: exit code plus a message for standard error, and
/// optionally a report that is still written out.
struct Failure {
    code: u8,
    message: String,
    report: Option<String>,
}

impl Failure {
    fn input(message: impl Into<String>) -> Self {
        Failure { code: 1, message: message.into(), report: None }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Infeasible(inf) => Failure {
                code: 2,
                message: format!("infeasible: {}", inf.hint),
                report: Some(canonical::to_string(infeasibility_json(&inf))),
            },
            Error::BarrierKind { .. } => Failure { code: 4, message: e.to_string(), report: None },
            other => Failure::input(other.to_string()),
        }
    }
}

fn infeasibility_json(inf: &Infeasibility) -> Value {
    json!({
        "status": "infeasible",
        "hint": inf.hint,
        "farkas": inf.farkas,
        "margin": inf.margin,
        "worst_column": inf.worst_column,
    })
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::input(format!("cannot read {}: {e}", path.display())))
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| Failure::input(format!("cannot write {}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn load_problem(common: &Common, mode: &ModeArgs) -> Result<EmbeddingProblem, Failure> {
    let mut p = EmbeddingProblem::from_json(&read(&common.problem)?)?;
    let eps = match mode.epsilon {
        Some(e) if !(0.0..=1.0).contains(&e) => return Err(Failure::input(format!("--epsilon {e} is outside [0, 1]"))),
        e => e,
    };
    match (mode.mode, eps) {
        (Some(ModeFlag::Exact), Some(_)) => return Err(Failure::input("--epsilon needs --mode soft")),
        (Some(ModeFlag::Exact), None) => p.mode = Mode::Exact,
        (Some(ModeFlag::Soft), None) => match p.mode {
            Mode::Soft(_) => {}
            Mode::Exact => return Err(Failure::input("--mode soft needs --epsilon")),
        },
        (_, Some(e)) => p.mode = Mode::Soft(e),
        (None, None) => {}
    }
    let cfg = &mut p.config;
    let set = |slot: &mut f64, v: Option<f64>, name: &str| -> Result<(), Failure> {
        match v {
            Some(t) if !(t > 0.0 && t.is_finite()) => Err(Failure::input(format!("--tol-{name} must be positive"))),
            Some(t) => {
                *slot = t;
                Ok(())
            }
            None => Ok(()),
        }
    };
    set(&mut cfg.gap, common.tol_gap, "gap")?;
    set(&mut cfg.certificate, common.tol_certificate, "certificate")?;
    set(&mut cfg.marginal, common.tol_marginal, "marginal")?;
    set(&mut cfg.support, common.tol_support, "support")?;
    if let Some(t) = common.tol_lp {
        set(&mut cfg.lp.feasibility, Some(t), "lp")?;
        cfg.lp.optimality = t;
    }
    p.validate()?;
    Ok(p)
}

fn load_solution(path: &Path, problem: &EmbeddingProblem) -> Result<OptimalSolution, Failure> {
    let json: SolutionJson = serde_json::from_str(&read(path)?)
        .map_err(|e| Failure::input(format!("{}: not a solution file: {e}", path.display())))?;
    Ok(OptimalSolution::from_json(&json, problem)?)
}

fn to_value<T: serde::Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("report types serialize")
}

fn cmd_solve(common: &Common, mode: &ModeArgs, oracle: bool) -> Result<(), Failure> {
    let problem = load_problem(common, mode)?;
    let sol = skorokhod::solve(&problem)?;
    let mut json = sol.to_json();
    json.monotonicity = Some(to_value(&verify_monotonicity(&sol.xi, &problem.cost)));
    if oracle {
        let o = solve_pathtree_oracle(&problem)?;
        json.oracle = Some(json!({
            "objective": o.objective,
            "secondary_objective": o.secondary_objective,
            "nodes": o.nodes,
            "difference": (o.objective - sol.objective).abs(),
        }));
    }
    let mut v = to_value(&json);
    v["status"] = json!("optimal");
    emit(common.out.as_deref(), &canonical::to_string(v))
}

fn cmd_verify(
    common: &Common,
    mode: &ModeArgs,
    solution: &Path,
    seed: u64,
    samples: u64,
    tol_kolmogorov: Option<f64>,
) -> Result<(), Failure> {
    if samples == 0 {
        return Err(Failure::input("--samples must be at least 1"));
    }
    let problem = load_problem(common, mode)?;
    let sol = load_solution(solution, &problem)?;
    let cert = certificate_check(&sol, &problem)?;
    let mono = verify_monotonicity(&sol.xi, &problem.cost);
    // A soft solution may sit up to ε away from the target in total
    // variation, which bounds the Kolmogorov distance.
    let slack = match problem.mode {
        Mode::Exact => 0.0,
        Mode::Soft(e) => e,
    };
    let tol = tol_kolmogorov.unwrap_or_else(|| dkw_tolerance(samples)) + slack;
    let mc = verify_embedding(&sol.xi, &problem.target, samples, seed, Some(tol));
    let passed = cert.passed() && mono.passed() && mc.passed;
    let report = json!({
        "seed": seed,
        "passed": passed,
        "checks": [
            {"name": "certificate", "passed": cert.passed(), "report": to_value(&cert)},
            {"name": "monotonicity", "passed": mono.passed(), "report": to_value(&mono)},
            {"name": "embedding", "passed": mc.passed, "report": to_value(&mc)},
        ],
    });
    let text = canonical::to_string(report);
    if passed {
        emit(common.out.as_deref(), &text)
    } else {
        let mut failed = Vec::new();
        if !cert.passed() {
            failed.extend(cert.failures().iter().map(|c| format!("certificate/{}", c.name)));
        }
        if !mono.passed() {
            failed.push(format!("monotonicity ({} stop-go pairs)", mono.violations.len()));
        }
        if !mc.passed {
            failed.push(format!("embedding (Kolmogorov {:.3e} > {:.3e})", mc.kolmogorov, mc.tolerance));
        }
        Err(Failure { code: 3, message: format!("failed: {}", failed.join(", ")), report: Some(text) })
    }
}

fn cmd_barrier(common: &Common, mode: &ModeArgs, solution: Option<&Path>, format: Format) -> Result<(), Failure> {
    let problem = load_problem(common, mode)?;
    let sol = match solution {
        Some(path) => load_solution(path, &problem)?,
        None => skorokhod::solve(&problem)?,
    };
    let b = extract_barrier(&sol, &problem)?;
    let text = match format {
        Format::Csv => b.to_csv(),
        Format::Json => canonical::to_string(b.to_json()),
    };
    emit(common.out.as_deref(), &text)
}

fn main() -> ExitCode {
    // Usage errors are input errors; clap's own code 2 means infeasible here.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let (result, out) = match &cli.command {
        Command::Solve { common, mode, oracle } => (cmd_solve(common, mode, *oracle), common.out.clone()),
        Command::Verify { common, mode, solution, seed, samples, tol_kolmogorov } => {
            (cmd_verify(common, mode, solution, *seed, *samples, *tol_kolmogorov), common.out.clone())
        }
        Command::Barrier { common, mode, solution, format } => {
            (cmd_barrier(common, mode, solution.as_deref(), *format), common.out.clone())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            if let Some(report) = &f.report {
                if let Err(e) = emit(out.as_deref(), report) {
                    eprintln!("{}", e.message);
                }
            }
            eprintln!("skorokhod: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
