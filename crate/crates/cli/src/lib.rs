//! Command-line front end: solves, scans, oracle checks, report
//! verification and random problem generation.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use greenfix::io::{gen_random, read_matrix, write_matrix, IoError, MatrixKind, ReportDocument, ReportFile, RunConfig};
use greenfix::oracle::inverse_iteration_residual;
use greenfix::{
    eig_all_small, scan_magnitude, scan_phase, seeded_vector, solve_excited, solve_ground, solve_real_ground,
    ComplexVector, EigenProblem, OracleError, ScanCurve, SolveError,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_NOT_CONVERGED: i32 = 2;
pub const EXIT_INPUT: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

/// Column header of scan CSV files.
pub const SCAN_HEADER: [&str; 6] = ["abs_eps", "phase_eps", "abs_lambda", "phase_lambda", "inner_iters", "converged"];
/// Column header of oracle CSV files.
pub const ORACLE_HEADER: [&str; 3] = ["eps_re", "eps_im", "residual"];

#[derive(Debug, Parser)]
#[command(name = "greenfix", version, about = "Green's-operator fixed-point eigensolver for (T − λV)u = εu")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve for the state whose coupling equals λ_ex and write a JSON report.
    Solve {
        #[command(flatten)]
        problem: ProblemArgs,
        /// Solve with V + iδI and shift ε back (for real ground states).
        #[arg(long)]
        perturb: bool,
        /// Also find this many excited states by deflation.
        #[arg(long, value_name = "K", conflicts_with = "perturb")]
        excited: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sweep |ε| along a ray of fixed phase and write the samples as CSV.
    ScanMagnitude {
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long, allow_negative_numbers = true)]
        phase: f64,
        #[arg(long)]
        from: f64,
        #[arg(long)]
        to: f64,
        #[arg(long)]
        step: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sweep φ(ε) on a circle of fixed |ε| and write the samples as CSV.
    ScanPhase {
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long)]
        mag: f64,
        #[arg(long, allow_negative_numbers = true)]
        from: f64,
        #[arg(long, allow_negative_numbers = true)]
        to: f64,
        #[arg(long)]
        step: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// List the eigenvalues of T − λV found by determinant root finding.
    Oracle {
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Recheck a report against the matrices; exit 0 iff it is within its tolerances.
    Verify {
        #[arg(long)]
        report: PathBuf,
        #[command(flatten)]
        problem: ProblemArgs,
    },
    /// Write a seeded random (T, V) pair.
    Generate {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value = "complex-general")]
        kind: MatrixKind,
        #[arg(long)]
        out_t: PathBuf,
        #[arg(long)]
        out_v: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct ProblemArgs {
    #[arg(long)]
    t: PathBuf,
    #[arg(long)]
    v: PathBuf,
    #[arg(long)]
    lambda: f64,
    /// Reference vector: `ones` or `seed:N`.
    #[arg(long, default_value = "ones")]
    reference: VectorSpec,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides `search.start_seed`.
    #[arg(long)]
    start_seed: Option<u64>,
    /// Overrides `inner.max_iterations`.
    #[arg(long)]
    max_inner: Option<usize>,
    /// Overrides `search.tol_mag` and `search.tol_phase`.
    #[arg(long)]
    tol: Option<f64>,
    /// Overrides `perturbation.delta`.
    #[arg(long)]
    delta: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum VectorSpec {
    Ones,
    Seeded(u64),
}

impl std::str::FromStr for VectorSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "ones" {
            return Ok(Self::Ones);
        }
        s.strip_prefix("seed:")
            .and_then(|n| n.parse().ok())
            .map(Self::Seeded)
            .ok_or_else(|| format!("expected `ones` or `seed:N`, got `{s}`"))
    }
}

impl VectorSpec {
    fn build(self, n: usize) -> ComplexVector {
        match self {
            Self::Ones => ComplexVector::ones(n),
            Self::Seeded(seed) => seeded_vector(n, seed),
        }
    }
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    NotConverged(String),
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Input(_) => EXIT_INPUT,
            CliError::NotConverged(_) => EXIT_NOT_CONVERGED,
            CliError::Numerical(_) => EXIT_NUMERICAL,
        }
    }
}

impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<SolveError> for CliError {
    fn from(e: SolveError) -> Self {
        let msg = e.to_string();
        match e {
            SolveError::InvalidProblem(_)
            | SolveError::InvalidConfig(_)
            | SolveError::InvalidDelta(_)
            | SolveError::TooManyStates { .. } => CliError::Input(msg),
            SolveError::NoBracket
            | SolveError::BracketFailure { .. }
            | SolveError::SecantStall { .. }
            | SolveError::DeflationBreakdown { .. } => CliError::NotConverged(msg),
            SolveError::Linalg(_)
            | SolveError::SingularResolvent { .. }
            | SolveError::DegenerateDenominator { .. }
            | SolveError::DefectivePair { .. } => CliError::Numerical(msg),
        }
    }
}

impl From<OracleError> for CliError {
    fn from(e: OracleError) -> Self {
        match e {
            OracleError::InvalidConfig(msg) => CliError::Input(msg),
            other => CliError::Numerical(other.to_string()),
        }
    }
}

/// Runs the CLI on `argv` (program name first) and returns the exit code.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("greenfix: {e}");
            e.code()
        }
    }
}

fn load_config(path: Option<&Path>) -> Result<RunConfig, CliError> {
    Ok(match path {
        Some(p) => RunConfig::read(p)?,
        None => RunConfig::default(),
    })
}

fn load(args: &ProblemArgs) -> Result<(EigenProblem, RunConfig), CliError> {
    let mut cfg = load_config(args.config.as_deref())?;
    if let Some(seed) = args.start_seed {
        cfg.search.start_seed = seed;
    }
    if let Some(m) = args.max_inner {
        cfg.inner.max_iterations = m;
    }
    if let Some(tol) = args.tol {
        cfg.search.tol_mag = tol;
        cfg.search.tol_phase = tol;
    }
    if let Some(delta) = args.delta {
        cfg.perturbation.delta = delta;
    }
    cfg.validate()?;
    let t = read_matrix(&args.t)?;
    let v = read_matrix(&args.v)?;
    let reference = args.reference.build(t.dim());
    let problem = EigenProblem::with_reference(t, v, args.lambda, reference)?;
    Ok((problem, cfg))
}

fn run(command: Command) -> Result<i32, CliError> {
    match command {
        Command::Solve { problem, perturb, excited, out } => {
            let (p, cfg) = load(&problem)?;
            let reports = match (perturb, excited) {
                (true, _) => vec![solve_real_ground(&p, &cfg.perturbation, &cfg.search, &cfg.inner)?],
                (false, Some(k)) => solve_excited(&p, k, &cfg.search, &cfg.inner)?,
                (false, None) => vec![solve_ground(&p, &cfg.search, &cfg.inner)?],
            };
            let docs: Vec<ReportDocument> =
                reports.iter().map(|r| ReportDocument::from_report(r, &p, &cfg.search)).collect();
            let all_converged = docs.iter().all(|d| d.converged);
            let file = if excited.is_some() {
                ReportFile::States(docs)
            } else {
                ReportFile::Single(docs.into_iter().next().expect("one report"))
            };
            file.write(&out)?;
            if all_converged {
                Ok(EXIT_OK)
            } else {
                eprintln!("greenfix: search did not converge; report written to {}", out.display());
                Ok(EXIT_NOT_CONVERGED)
            }
        }
        Command::ScanMagnitude { problem, phase, from, to, step, out } => {
            let (p, cfg) = load(&problem)?;
            write_scan(&out, &scan_magnitude(&p, phase, (from, to), step, &cfg.inner)?)?;
            Ok(EXIT_OK)
        }
        Command::ScanPhase { problem, mag, from, to, step, out } => {
            let (p, cfg) = load(&problem)?;
            write_scan(&out, &scan_phase(&p, mag, (from, to), step, &cfg.inner)?)?;
            Ok(EXIT_OK)
        }
        Command::Oracle { problem, out } => {
            let (p, cfg) = load(&problem)?;
            let h = p.hamiltonian();
            let spectrum = eig_all_small(&h, &cfg.oracle)?;
            let mut w = csv_writer(&out)?;
            w.write_record(ORACLE_HEADER)?;
            for root in &spectrum.roots {
                let residual = inverse_iteration_residual(&h, *root)?;
                w.write_record([fmt(root.re), fmt(root.im), fmt(residual)])?;
            }
            flush(w, &out)?;
            if !spectrum.complete {
                eprintln!("greenfix: found {} of {} eigenvalues", spectrum.roots.len(), h.dim());
            }
            Ok(EXIT_OK)
        }
        Command::Verify { report, problem } => {
            let (p, _) = load(&problem)?;
            let file = ReportFile::read(&report)?;
            let mut passed = true;
            for (i, doc) in file.documents().iter().enumerate() {
                let outcome = doc.verify(&p)?;
                eprintln!(
                    "state {i}: residual {:e} (bound {:e}), lambda {} ({})",
                    outcome.residual,
                    doc.tolerances.residual,
                    outcome.lambda,
                    if outcome.passed { "ok" } else { "FAIL" }
                );
                passed &= outcome.passed;
            }
            Ok(if passed { EXIT_OK } else { EXIT_NOT_CONVERGED })
        }
        Command::Generate { n, seed, kind, out_t, out_v, config } => {
            load_config(config.as_deref())?;
            if n == 0 {
                return Err(CliError::Input("--n must be positive".into()));
            }
            let (t, v) = gen_random(n, seed, kind);
            write_matrix(&out_t, &t)?;
            write_matrix(&out_v, &v)?;
            Ok(EXIT_OK)
        }
    }
}

/// Shortest decimal that reads back to the same double.
fn fmt(x: f64) -> String {
    format!("{x:?}")
}

fn csv_writer(path: &Path) -> Result<csv::Writer<std::fs::File>, CliError> {
    csv::Writer::from_path(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn flush(mut w: csv::Writer<std::fs::File>, path: &Path) -> Result<(), CliError> {
    w.flush().map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn write_scan(path: &Path, curve: &ScanCurve) -> Result<(), CliError> {
    let mut w = csv_writer(path)?;
    w.write_record(SCAN_HEADER)?;
    for s in &curve.samples {
        w.write_record([
            fmt(s.eps.magnitude),
            fmt(s.eps.phase),
            fmt(s.lambda.magnitude),
            fmt(s.lambda.phase),
            s.inner_iterations.to_string(),
            s.converged.to_string(),
        ])?;
    }
    flush(w, path)
}
