//! `sparse-gep`: solve, tune and simulate sparse generalized eigenproblems
//! from the command line. Every invocation writes one JSON document to
//! stdout on success, or one error document to stderr on failure.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod json;
mod matrix_io;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nalgebra::DMatrix;
use serde::Serialize;

use sparse_gep::exec::{configure_threads, threads_from_env};
use sparse_gep::gep::{eigenvalues_ls, lambda_max, rayleigh_eigenvalues};
use sparse_gep::simulation::{run_experiment, ExperimentSpec, Family};
use sparse_gep::tuning::{select_lambda, CvReport, TuneConfig};
use sparse_gep::{
    fit, Execution, GepError, GepPair, Init, InnerSolveConfig, Method, OuterConfig, PenaltyKind,
    PenaltySpec, SubspaceEstimate, SymMatrix,
};

use matrix_io::{read_matrix, to_rows};

#[derive(Parser, Debug)]
#[command(
    name = "sparse-gep",
    version,
    about = "Sparse generalized eigenspace estimation"
)]
struct Cli {
    /// Run grid points and repetitions on the calling thread only.
    #[arg(long, global = true)]
    sequential: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Estimate the sparse leading eigenspace at one penalty level.
    Solve(SolveArgs),
    /// Choose the penalty level on a tuning pair.
    Tune(TuneArgs),
    /// Check eigenvalue estimates for a given basis.
    Verify(VerifyArgs),
    /// Run a simulation study and write report.json and report.csv.
    Experiment(ExperimentArgs),
}

#[derive(Args, Debug)]
struct PairArgs {
    /// Matrix A (CSV, or dense text with a "rows cols" header).
    #[arg(long, value_name = "FILE")]
    a: PathBuf,
    /// Matrix B.
    #[arg(
        long,
        value_name = "FILE",
        required_unless_present = "b_identity",
        conflicts_with = "b_identity"
    )]
    b: Option<PathBuf>,
    /// Use B = I.
    #[arg(long)]
    b_identity: bool,
}

#[derive(Args, Debug)]
struct FitArgs {
    /// Subspace dimension.
    #[arg(long)]
    d: usize,
    #[arg(long, default_value = "group")]
    penalty: PenaltyKind,
    #[arg(long, default_value = "poi")]
    method: Method,
    #[arg(long, default_value_t = 100)]
    max_outer: usize,
    /// Stopping threshold on the distance between successive bases.
    #[arg(long, default_value_t = 1e-5)]
    tol: f64,
    /// Start POI from a random orthonormal basis drawn with this seed
    /// instead of the top eigenvectors of A.
    #[arg(long)]
    seed: Option<u64>,
}

impl FitArgs {
    fn outer(&self) -> OuterConfig {
        OuterConfig {
            max_outer: self.max_outer,
            outer_tol: self.tol,
            init: self.seed.map_or(Init::TopEigvecsOfA, Init::RandomOrtho),
            inner: InnerSolveConfig::default(),
            ..OuterConfig::default()
        }
    }
}

#[derive(Args, Debug)]
struct SolveArgs {
    #[command(flatten)]
    pair: PairArgs,
    #[command(flatten)]
    fit: FitArgs,
    /// Penalty level.
    #[arg(
        long,
        required_unless_present = "lambda_rel",
        conflicts_with = "lambda_rel"
    )]
    lambda: Option<f64>,
    /// Penalty level as a multiple of lambda_max.
    #[arg(long)]
    lambda_rel: Option<f64>,
}

#[derive(Args, Debug)]
struct TuneArgs {
    #[command(flatten)]
    pair: PairArgs,
    #[command(flatten)]
    fit: FitArgs,
    /// Tuning-set A.
    #[arg(long, value_name = "FILE")]
    a2: PathBuf,
    /// Tuning-set B.
    #[arg(
        long,
        value_name = "FILE",
        required_unless_present = "b2_identity",
        conflicts_with = "b2_identity"
    )]
    b2: Option<PathBuf>,
    #[arg(long)]
    b2_identity: bool,
    /// Ratio between successive grid values.
    #[arg(long, default_value_t = sparse_gep::tuning::DEFAULT_RATIO)]
    grid_ratio: f64,
    /// Number of geometric steps below lambda_max.
    #[arg(long, default_value_t = sparse_gep::tuning::DEFAULT_STEPS)]
    grid_len: usize,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[command(flatten)]
    pair: PairArgs,
    /// Basis to check: a matrix file, or the JSON output of `solve`.
    #[arg(long, value_name = "FILE")]
    u: PathBuf,
}

#[derive(Args, Debug)]
struct ExperimentArgs {
    /// Spec file (`key = value` lines or a JSON object). Flags override it.
    #[arg(long, value_name = "FILE")]
    spec: Option<PathBuf>,
    #[arg(long)]
    family: Option<String>,
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    p: Option<usize>,
    /// Training size (per class for LDA).
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    n_tune: Option<usize>,
    #[arg(long)]
    n_test: Option<usize>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    penalty: Option<String>,
    /// Fix lambda = r * lambda_max instead of cross-validating.
    #[arg(long)]
    lambda_rel: Option<f64>,
    #[arg(long)]
    grid_ratio: Option<f64>,
    #[arg(long)]
    grid_len: Option<usize>,
    /// PCA spike scale: eigenvalues or sqrt_eigenvalues.
    #[arg(long)]
    spike: Option<String>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

enum Failure {
    Usage(String),
    Parse(String),
    Numerical(GepError),
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Parse(_) => 2,
            Failure::Numerical(_) => 3,
        }
    }

    fn report(&self) -> ErrorDoc {
        let (kind, message) = match self {
            Failure::Usage(m) => ("usage", m.clone()),
            Failure::Parse(m) => ("parse", m.clone()),
            Failure::Numerical(e) => (e.kind(), e.to_string()),
        };
        ErrorDoc {
            error: ErrorBody {
                kind,
                message,
                exit_code: self.exit_code(),
            },
        }
    }
}

impl From<GepError> for Failure {
    fn from(e: GepError) -> Self {
        Failure::Numerical(e)
    }
}

#[derive(Serialize)]
struct ErrorDoc {
    error: ErrorBody,
}

#[derive(Serialize)]
struct ErrorBody {
    kind: &'static str,
    message: String,
    exit_code: u8,
}

#[derive(Serialize)]
struct EstimateDoc {
    method: Method,
    penalty: PenaltyKind,
    d: usize,
    p: usize,
    lambda: f64,
    lambda_max: f64,
    converged: bool,
    outer_iters: usize,
    inner_sweeps: usize,
    padded: bool,
    regularized: bool,
    epsilon_used: f64,
    eigenvalues: Vec<f64>,
    support: Vec<usize>,
    #[serde(rename = "Q")]
    q: Vec<Vec<f64>>,
    #[serde(rename = "U")]
    u: Vec<Vec<f64>>,
}

impl EstimateDoc {
    fn new(
        est: &SubspaceEstimate,
        pair: &GepPair,
        method: Method,
        kind: PenaltyKind,
        lmax: f64,
    ) -> Self {
        EstimateDoc {
            method,
            penalty: kind,
            d: est.q.cols(),
            p: pair.dim(),
            lambda: est.lambda,
            lambda_max: lmax,
            converged: est.converged,
            outer_iters: est.outer_iters,
            inner_sweeps: est.inner_sweeps,
            padded: est.padded,
            regularized: pair.regularized(),
            epsilon_used: pair.epsilon_used(),
            eigenvalues: est.eigenvalues.iter().copied().collect(),
            support: est.support.clone(),
            q: to_rows(est.q.as_matrix()),
            u: to_rows(&est.u),
        }
    }
}

#[derive(Serialize)]
struct TuneDoc {
    report: CvReport,
    estimate: EstimateDoc,
}

#[derive(Serialize)]
struct VerifyDoc {
    d: usize,
    p: usize,
    rayleigh: Vec<f64>,
    eigenvalues_ls: Vec<f64>,
    /// `‖A u − λ B u‖₂` per column, with `λ` the Rayleigh quotient.
    residuals: Vec<f64>,
    /// `max |UᵀBU − I|`.
    b_orthonormality_error: f64,
}

#[derive(Serialize)]
struct ExperimentDoc<'a> {
    label: &'a str,
    repetitions: usize,
    failed: usize,
    aggregates: &'a sparse_gep::simulation::experiment::Aggregates,
    report_json: String,
    report_csv: String,
}

fn matrix(path: &Path) -> Result<DMatrix<f64>, Failure> {
    read_matrix(path).map_err(Failure::Parse)
}

fn symmetric(path: &Path) -> Result<SymMatrix, Failure> {
    let m = matrix(path)?;
    if !m.is_square() {
        return Err(Failure::Parse(format!(
            "{}: expected a square matrix, got {}x{}",
            path.display(),
            m.nrows(),
            m.ncols()
        )));
    }
    SymMatrix::new(m).map_err(|e| Failure::Parse(format!("{}: {e}", path.display())))
}

fn load_pair(a: &Path, b: Option<&Path>) -> Result<GepPair, Failure> {
    let a = symmetric(a)?;
    match b {
        None => Ok(GepPair::with_identity_b(a)),
        Some(path) => {
            let b = symmetric(path)?;
            if b.dim() != a.dim() {
                return Err(Failure::Parse(format!(
                    "A is {0}x{0} but B is {1}x{1}",
                    a.dim(),
                    b.dim()
                )));
            }
            Ok(GepPair::new(a, b)?)
        }
    }
}

fn check_fit(fit: &FitArgs, p: usize) -> Result<(), Failure> {
    if fit.d == 0 || fit.d >= p {
        return Err(Failure::Usage(format!(
            "--d must satisfy 1 <= d < p = {p}, got {}",
            fit.d
        )));
    }
    if fit.max_outer == 0 || !(fit.tol > 0.0) {
        return Err(Failure::Usage(
            "--max-outer must be >= 1 and --tol positive".into(),
        ));
    }
    Ok(())
}

fn solve(args: &SolveArgs) -> Result<String, Failure> {
    let pair = load_pair(&args.pair.a, args.pair.b.as_deref())?;
    let fa = &args.fit;
    check_fit(fa, pair.dim())?;
    let lmax = lambda_max(&pair, fa.method, fa.penalty, fa.d)?;
    let lambda = match (args.lambda, args.lambda_rel) {
        (Some(l), _) => l,
        (None, Some(r)) => r * lmax,
        (None, None) => unreachable!("clap enforces one of --lambda and --lambda-rel"),
    };
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Failure::Usage(format!(
            "penalty level must be non-negative, got {lambda}"
        )));
    }
    let pen = PenaltySpec::uniform(fa.penalty, lambda, fa.d)?;
    let est = fit(fa.method, &pair, fa.d, &pen, &fa.outer())?;
    Ok(json::to_string(&EstimateDoc::new(
        &est, &pair, fa.method, fa.penalty, lmax,
    )))
}

fn tune(args: &TuneArgs, exec: Execution) -> Result<String, Failure> {
    let train = load_pair(&args.pair.a, args.pair.b.as_deref())?;
    let tuning = load_pair(&args.a2, args.b2.as_deref())?;
    if tuning.dim() != train.dim() {
        return Err(Failure::Parse(format!(
            "training pair is {}-dimensional, tuning pair {}-dimensional",
            train.dim(),
            tuning.dim()
        )));
    }
    let fa = &args.fit;
    check_fit(fa, train.dim())?;
    if !(args.grid_ratio > 0.0 && args.grid_ratio < 1.0) {
        return Err(Failure::Usage(format!(
            "--grid-ratio must lie in (0, 1), got {}",
            args.grid_ratio
        )));
    }
    let cfg = TuneConfig {
        ratio: args.grid_ratio,
        steps: args.grid_len,
        outer: fa.outer(),
        exec,
    };
    let (report, est) = select_lambda(&train, &tuning, fa.d, fa.penalty, fa.method, &cfg)?;
    let lmax = report.grid[0];
    let estimate = EstimateDoc::new(&est, &train, fa.method, fa.penalty, lmax);
    Ok(json::to_string(&TuneDoc { report, estimate }))
}

fn basis_from(path: &Path) -> Result<DMatrix<f64>, Failure> {
    let text =
        fs::read_to_string(path).map_err(|e| Failure::Parse(format!("{}: {e}", path.display())))?;
    if !text.trim_start().starts_with('{') {
        return matrix(path);
    }
    let doc: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| Failure::Parse(format!("{}: {e}", path.display())))?;
    let rows = doc
        .get("U")
        .or_else(|| doc.get("estimate").and_then(|e| e.get("U")))
        .and_then(|u| serde_json::from_value::<Vec<Vec<f64>>>(u.clone()).ok())
        .ok_or_else(|| Failure::Parse(format!("{}: no numeric \"U\" array", path.display())))?;
    let cols = rows.first().map_or(0, Vec::len);
    if rows.is_empty() || cols == 0 || rows.iter().any(|r| r.len() != cols) {
        return Err(Failure::Parse(format!(
            "{}: \"U\" is not a non-empty rectangular array",
            path.display()
        )));
    }
    Ok(DMatrix::from_row_iterator(
        rows.len(),
        cols,
        rows.into_iter().flatten(),
    ))
}

fn verify(args: &VerifyArgs) -> Result<String, Failure> {
    let pair = load_pair(&args.pair.a, args.pair.b.as_deref())?;
    let u = basis_from(&args.u)?;
    if u.nrows() != pair.dim() {
        return Err(Failure::Parse(format!(
            "U has {} rows, the pair is {}-dimensional",
            u.nrows(),
            pair.dim()
        )));
    }
    let rq = rayleigh_eigenvalues(&u, &pair)?;
    let ls = eigenvalues_ls(&u, &pair)?;
    let a = pair.a().as_matrix();
    let b = pair.b().as_matrix();
    let residuals = u
        .column_iter()
        .zip(rq.iter())
        .map(|(col, &l)| (a * col - b * col * l).norm())
        .collect();
    let d = u.ncols();
    let gram = u.transpose() * b * &u - DMatrix::<f64>::identity(d, d);
    Ok(json::to_string(&VerifyDoc {
        d,
        p: pair.dim(),
        rayleigh: rq.iter().copied().collect(),
        eigenvalues_ls: ls.iter().copied().collect(),
        residuals,
        b_orthonormality_error: gram.amax(),
    }))
}

fn experiment_spec(args: &ExperimentArgs) -> Result<ExperimentSpec, Failure> {
    let usage = |e: GepError| Failure::Usage(e.to_string());
    let mut spec = match &args.spec {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Failure::Parse(format!("{}: {e}", path.display())))?;
            let parsed = if text.trim_start().starts_with('{') {
                ExperimentSpec::from_json(&text)
            } else {
                ExperimentSpec::from_key_values(&text)
            };
            parsed.map_err(usage)?
        }
        None => {
            let family = args
                .family
                .as_deref()
                .ok_or_else(|| Failure::Usage("experiment needs --family or --spec".into()))?;
            ExperimentSpec::defaults(family.parse::<Family>().map_err(usage)?)
        }
    };
    fn text<T: ToString>(v: &Option<T>) -> Option<String> {
        v.as_ref().map(T::to_string)
    }
    let overrides: [(&str, Option<String>); 15] = [
        ("family", args.family.clone()),
        ("model", args.model.clone()),
        ("d", text(&args.d)),
        ("p", text(&args.p)),
        ("n_train", text(&args.n)),
        ("n_tune", text(&args.n_tune)),
        ("n_test", text(&args.n_test)),
        ("repetitions", text(&args.reps)),
        ("seed", text(&args.seed)),
        ("method", args.method.clone()),
        ("penalty", args.penalty.clone()),
        ("lambda_rel", text(&args.lambda_rel)),
        ("grid_ratio", text(&args.grid_ratio)),
        ("grid_steps", text(&args.grid_len)),
        ("pca_spike", args.spike.clone()),
    ];
    for (key, value) in overrides {
        if let Some(v) = value {
            spec.set(key, &v).map_err(usage)?;
        }
    }
    spec.validate().map_err(usage)?;
    Ok(spec)
}

fn experiment(args: &ExperimentArgs, exec: Execution) -> Result<String, Failure> {
    let spec = experiment_spec(args)?;
    let report = run_experiment(&spec, exec)?;
    let io = |e: std::io::Error| Failure::Parse(format!("{}: {e}", args.out.display()));
    fs::create_dir_all(&args.out).map_err(io)?;
    let json_path = args.out.join("report.json");
    let csv_path = args.out.join("report.csv");
    fs::write(&json_path, json::to_string(&report) + "\n").map_err(io)?;
    fs::write(&csv_path, report.to_csv()).map_err(io)?;
    Ok(json::to_string(&ExperimentDoc {
        label: &report.label,
        repetitions: report.repetitions.len(),
        failed: report.failed,
        aggregates: &report.aggregates,
        report_json: json_path.display().to_string(),
        report_csv: csv_path.display().to_string(),
    }))
}

fn run(cli: &Cli) -> Result<String, Failure> {
    if let Some(n) = threads_from_env().map_err(Failure::Usage)? {
        configure_threads(n).map_err(Failure::Usage)?;
    }
    let exec = if cli.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    match &cli.command {
        Command::Solve(a) => solve(a),
        Command::Tune(a) => tune(a, exec),
        Command::Verify(a) => verify(a),
        Command::Experiment(a) => experiment(a, exec),
    }
}

fn fail(f: Failure) -> ExitCode {
    eprintln!("{}", json::to_string(&f.report()));
    ExitCode::from(f.exit_code())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            return fail(Failure::Usage(
                e.render().to_string().trim_end().to_string(),
            ))
        }
    };
    match run(&cli) {
        Ok(doc) => {
            println!("{doc}");
            ExitCode::SUCCESS
        }
        Err(f) => fail(f),
    }
}
