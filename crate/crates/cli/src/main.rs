//! `freeholo`: batch front-end over the library. Every subcommand reads JSON
//! inputs, writes one JSON report and exits 0 (pass), 1 (mathematical
//! failure) or 2 (input error).

mod report;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use freeholo::approx::{
    certify_error, direct_sum_closure, expand_polynomial, order_for_tolerance, select_covering_delta, DEFAULT_TERM_CAP,
};
use freeholo::mero::{check_certificate, estimate_bound, inversion_certificate, singular_scan, BoundSource};
use freeholo::model::{model_residual, ModelSampleSet};
use freeholo::ncpoint::{check_nc_axioms, in_gdelta, nc_derivative, point_direct_sum, DEFAULT_MARGIN};
use freeholo::realize::{corona_solve, fit_lurking_isometry, CoronaModel, FitOptions, Realization};
use freeholo::sample::Sampler;
use freeholo::{CMatrix, Complex64, Expr, GradedPoint, NcFunction, PolyMatrix};
use serde_json::json;

use report::{finish, load, load_many, read_text, to_value, CliError, CliResult, Header, Report};

#[derive(Parser)]
#[command(name = "freeholo", version, about = "Free noncommutative holomorphic functions on matrix tuples")]
struct Cli {
    /// Numerical tolerance recorded in the report and used by checks.
    #[arg(long, global = true, default_value_t = 1e-8)]
    tol: f64,
    /// Seed for all sampling.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Largest matrix level produced by sampling or direct-sum closure.
    #[arg(long, global = true, default_value_t = 8)]
    level_cap: usize,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct FuncArgs {
    /// Expression in x1..xd, for example "2 + x1*x2 - inv(1 - x1)".
    #[arg(long, conflicts_with_all = ["expr_file", "realization"])]
    expr: Option<String>,
    #[arg(long, conflicts_with = "realization")]
    expr_file: Option<PathBuf>,
    /// Number of variables for an expression.
    #[arg(long)]
    vars: Option<usize>,
    /// Realization JSON.
    #[arg(long)]
    realization: Option<PathBuf>,
}

#[derive(Args)]
struct ExprArgs {
    #[arg(long, conflicts_with = "expr_file")]
    expr: Option<String>,
    #[arg(long)]
    expr_file: Option<PathBuf>,
    #[arg(long)]
    vars: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate an expression or realization at a point.
    Eval {
        #[command(flatten)]
        func: FuncArgs,
        #[arg(long)]
        point: PathBuf,
        /// Use the truncated Neumann series with a certified bound (realizations only).
        #[arg(long)]
        neumann: bool,
    },
    /// Check direct-sum, similarity and block compatibility on samples.
    CheckNc {
        #[command(flatten)]
        func: FuncArgs,
        /// Sample points; drawn at random when omitted.
        #[arg(long)]
        points: Option<PathBuf>,
        /// Number of random points when --points is omitted.
        #[arg(long, default_value_t = 6)]
        samples: usize,
    },
    /// Decide membership of points in the domain of a matrix of polynomials.
    Member {
        #[arg(long)]
        delta: PathBuf,
        #[arg(long)]
        point: PathBuf,
        #[arg(long, default_value_t = DEFAULT_MARGIN)]
        margin: f64,
    },
    /// Residual of the model identity on a sample set.
    ModelResidual {
        #[arg(long)]
        samples: PathBuf,
    },
    /// Fit a realization to a model sample set.
    Fit {
        #[arg(long)]
        samples: PathBuf,
        /// Use every point for fitting.
        #[arg(long)]
        no_holdout: bool,
        #[arg(long, default_value_t = 64)]
        mult_cap: usize,
    },
    /// Solve the corona problem from a model of Psi*Psi - eps^2.
    Corona {
        #[arg(long)]
        delta: PathBuf,
        #[arg(long)]
        points: PathBuf,
        /// Per point, the array of values psi_1(x), ..., psi_N(x).
        #[arg(long)]
        psi: PathBuf,
        #[arg(long)]
        eps: f64,
        /// Realization Omega0 with Omega0 * Psi = eps.
        #[arg(long, conflicts_with = "model_u", required_unless_present = "model_u")]
        model_realization: Option<PathBuf>,
        /// Explicit model values u(x), one per point.
        #[arg(long)]
        model_u: Option<PathBuf>,
    },
    /// Polynomial approximation of a realization with a certified error.
    Approx {
        #[arg(long)]
        realization: PathBuf,
        /// Sample set E that the domain must cover.
        #[arg(long)]
        samples: PathBuf,
        /// Candidate matrices of polynomials; defaults to the realization's own.
        #[arg(long)]
        cover: Option<PathBuf>,
        /// Close E under direct sums up to --level-cap first.
        #[arg(long)]
        closure: bool,
        #[arg(long, default_value_t = DEFAULT_TERM_CAP)]
        term_cap: usize,
    },
    /// Derivative in a direction, read off a 2x2 block point.
    Derive {
        #[command(flatten)]
        func: FuncArgs,
        #[arg(long)]
        point: PathBuf,
        #[arg(long)]
        direction: PathBuf,
    },
    /// Inversion certificates and singularity scans.
    Mero {
        #[command(subcommand)]
        command: MeroCommand,
    },
}

#[derive(Subcommand)]
enum MeroCommand {
    /// Certify a bound on the inverse near a point where the function is invertible.
    Certify {
        #[command(flatten)]
        expr: ExprArgs,
        #[arg(long)]
        delta: PathBuf,
        #[arg(long)]
        point: PathBuf,
        /// Asserted bound on the function over the domain.
        #[arg(long)]
        bound: Option<f64>,
        /// Without --bound, estimate it from this many samples (heuristic).
        #[arg(long, default_value_t = 200)]
        bound_samples: usize,
        /// Also test the certificate on this many random points.
        #[arg(long, default_value_t = 0)]
        check: usize,
    },
    /// Flag the sample points where some inverse in the expression is singular.
    Scan {
        #[command(flatten)]
        expr: ExprArgs,
        #[arg(long)]
        points: PathBuf,
    },
}

/// An expression or a realization, behind one evaluator.
enum Func {
    Expr(Expr),
    Realization(Realization),
}

impl NcFunction for Func {
    fn d(&self) -> usize {
        match self {
            Func::Expr(e) => e.d(),
            Func::Realization(r) => r.d(),
        }
    }

    fn eval(&self, x: &GradedPoint) -> freeholo::Result<CMatrix> {
        match self {
            Func::Expr(e) => e.eval(x),
            Func::Realization(r) => r.eval(x),
        }
    }
}

fn expr_source(expr: &Option<String>, file: &Option<PathBuf>) -> CliResult<String> {
    match (expr, file) {
        (Some(src), _) => Ok(src.clone()),
        (None, Some(path)) => Ok(read_text(path)?.trim().to_string()),
        (None, None) => Err(CliError::Input("an expression is required (--expr or --expr-file)".into())),
    }
}

fn load_expr(a: &ExprArgs) -> CliResult<Expr> {
    Ok(Expr::parse(&expr_source(&a.expr, &a.expr_file)?, a.vars)?)
}

fn load_func(a: &FuncArgs) -> CliResult<Func> {
    if let Some(path) = &a.realization {
        return Ok(Func::Realization(load(path)?));
    }
    let vars = a.vars.ok_or_else(|| CliError::Input("--vars is required with an expression".into()))?;
    Ok(Func::Expr(Expr::parse(&expr_source(&a.expr, &a.expr_file)?, vars)?))
}

/// Row-major `[re, im]` pairs.
fn entries(m: &CMatrix) -> serde_json::Value {
    let data: Vec<[f64; 2]> =
        (0..m.rows()).flat_map(|i| (0..m.cols()).map(move |j| m.get(i, j))).map(|z| [z.re, z.im]).collect();
    json!(data)
}

fn origin(d: usize, n: usize) -> CliResult<GradedPoint> {
    Ok(GradedPoint::scalar_at_level(&vec![Complex64::new(0.0, 0.0); d], n)?)
}

fn run_eval(func: &FuncArgs, point: &Path, neumann: bool, tol: f64) -> CliResult<Report> {
    let f = load_func(func)?;
    let x: GradedPoint = load(point)?;
    let report = Report::new(true);
    match (&f, neumann) {
        (Func::Realization(r), true) => {
            let ne = r.eval_neumann(&x, tol)?;
            Ok(report
                .with("rows", json!(ne.value.rows()))
                .with("cols", json!(ne.value.cols()))
                .with("value", entries(&ne.value))
                .with("neumann", json!({ "K": ne.k, "bound": ne.bound, "certified": true })))
        }
        (Func::Expr(_), true) => Err(CliError::Input("--neumann needs --realization".into())),
        _ => {
            let v = f.eval(&x)?;
            Ok(report.with("rows", json!(v.rows())).with("cols", json!(v.cols())).with("value", entries(&v)))
        }
    }
}

fn run_check_nc(
    func: &FuncArgs,
    points: Option<&Path>,
    count: usize,
    seed: u64,
    level_cap: usize,
) -> CliResult<Report> {
    let f = load_func(func)?;
    let mut s = Sampler::new(seed);
    let top = level_cap.clamp(1, 3);
    let samples: Vec<GradedPoint> = match points {
        Some(path) => load_many(path)?,
        None => (0..count)
            .map(|i| {
                let n = 1 + i % top;
                match &f {
                    Func::Realization(r) => {
                        let half = r.delta().scale(Complex64::new(2.0, 0.0));
                        Ok(s.point_inside(&half, &origin(r.d(), n)?, 1e-3)?)
                    }
                    Func::Expr(_) => Ok(s.point(f.d(), n, 1.0)),
                }
            })
            .collect::<CliResult<_>>()?,
    };
    let mut levels: Vec<usize> = samples.iter().map(GradedPoint::n).collect();
    levels.sort_unstable();
    levels.dedup();
    let sims: Vec<CMatrix> = levels.iter().flat_map(|&n| [n, n]).map(|n| s.invertible(n, 10.0)).collect();
    let rep = check_nc_axioms(&f, &samples, &sims);
    Ok(Report::new(rep.pass).with("samples", json!(samples.len())).with("report", to_value(&rep)))
}

fn run_member(delta: &Path, point: &Path, margin: f64) -> CliResult<Report> {
    let delta: PolyMatrix = load(delta)?;
    let points: Vec<GradedPoint> = load_many(point)?;
    let mut results = Vec::with_capacity(points.len());
    let mut inside = 0;
    for x in &points {
        let m = in_gdelta(&delta, x, margin)?;
        inside += usize::from(m.is_inside());
        results.push(json!({ "n": x.n(), "norm": delta.norm_at(x)?, "membership": to_value(&m) }));
    }
    Ok(Report::new(true).with("margin", json!(margin)).with("inside", json!(inside)).with("points", json!(results)))
}

fn run_model_residual(samples: &Path, tol: f64) -> CliResult<Report> {
    let set: ModelSampleSet = load(samples)?;
    let dims = set.validate()?;
    let residual = model_residual(&set)?;
    Ok(Report::new(residual <= tol).with("residual", json!(residual)).with("dims", to_value(&dims)))
}

fn run_fit(samples: &Path, no_holdout: bool, mult_cap: usize) -> CliResult<Report> {
    let set: ModelSampleSet = load(samples)?;
    let opts = FitOptions { holdout: !no_holdout, mult_cap, ..FitOptions::default() };
    let rep = fit_lurking_isometry(&set, &opts)?;
    Ok(Report::new(true).with("fit", to_value(&rep)))
}

fn run_corona(
    delta: &Path,
    points: &Path,
    psi: &Path,
    eps: f64,
    model_realization: Option<&Path>,
    model_u: Option<&Path>,
    tol: f64,
) -> CliResult<Report> {
    let delta: PolyMatrix = load(delta)?;
    let points: Vec<GradedPoint> = load_many(points)?;
    let psis: Vec<Vec<CMatrix>> = load(psi)?;
    let model = match (model_realization, model_u) {
        (Some(path), _) => CoronaModel::FromRealization(load(path)?),
        (None, Some(path)) => CoronaModel::Samples(load(path)?),
        (None, None) => return Err(CliError::Input("--model-realization or --model-u is required".into())),
    };
    let sol = corona_solve(&delta, &points, &psis, eps, &model)?;
    let pass = sol.identity_residual <= tol.max(1e-6) && sol.max_norm <= sol.bound + tol.max(1e-6);
    Ok(Report::new(pass).with("corona", to_value(&sol)))
}

fn run_approx(
    realization: &Path,
    samples: &Path,
    cover: Option<&Path>,
    closure: bool,
    term_cap: usize,
    tol: f64,
    level_cap: usize,
) -> CliResult<Report> {
    let r: Realization = load(realization)?;
    let mut e: Vec<GradedPoint> = load_many(samples)?;
    if closure {
        e = direct_sum_closure(&e, level_cap)?;
    }
    let candidates: Vec<PolyMatrix> = match cover {
        Some(path) => load_many(path)?,
        None => vec![r.delta().clone()],
    };
    let c = select_covering_delta(&e, &candidates)?;
    let k = order_for_tolerance(c.t, tol)?;
    let polynomial = expand_polynomial(&r, k, term_cap)?;
    let bound = certify_error(k, c.t);
    Ok(Report::new(true)
        .with("cover", to_value(&c))
        .with("samples", json!(e.len()))
        .with("closure", json!(closure))
        .with("certificate", json!({ "K": k, "t": c.t, "bound": bound }))
        .with("polynomial", to_value(&polynomial)))
}

fn run_derive(func: &FuncArgs, point: &Path, direction: &Path) -> CliResult<Report> {
    let f = load_func(func)?;
    let m: GradedPoint = load(point)?;
    let e: GradedPoint = load(direction)?;
    let df = nc_derivative(&f, &m, &e)?;
    Ok(Report::new(true).with("rows", json!(df.rows())).with("cols", json!(df.cols())).with("value", entries(&df)))
}

#[allow(clippy::too_many_arguments)]
fn run_certify(
    expr: &ExprArgs,
    delta: &Path,
    point: &Path,
    bound: Option<f64>,
    bound_samples: usize,
    check: usize,
    tol: f64,
    seed: u64,
) -> CliResult<Report> {
    let phi = load_expr(expr)?;
    let delta: PolyMatrix = load(delta)?;
    let m: GradedPoint = load(point)?;
    let mut s = Sampler::new(seed);
    let b = match bound {
        Some(value) => BoundSource::Asserted { value },
        None => estimate_bound(&phi, &delta, std::slice::from_ref(&m), bound_samples.max(1), &mut s)?,
    };
    let (aug, cert) = inversion_certificate(&phi, &delta, &phi.eval(&m)?, b)?;
    let mut report = Report::new(true).with("certificate", to_value(&cert));
    if check > 0 {
        let centers = vec![m.clone(), point_direct_sum(&m, &m)?];
        let c = check_certificate(&aug, cert.bound_inv, &centers, check, tol, &mut s)?;
        report.pass = c.violations == 0;
        report = report.with("check", to_value(&c));
    }
    Ok(report)
}

fn run_scan(expr: &ExprArgs, points: &Path) -> CliResult<Report> {
    let e = load_expr(expr)?;
    let samples: Vec<GradedPoint> = load_many(points)?;
    let rep = singular_scan(&e.ast, &samples);
    Ok(Report::new(true).with("flagged", json!(rep.flagged())).with("scan", to_value(&rep)))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (tol, seed, cap) = (cli.tol, cli.seed, cli.level_cap);
    let (command, result) = match &cli.command {
        Command::Eval { func, point, neumann } => ("eval", run_eval(func, point, *neumann, tol)),
        Command::CheckNc { func, points, samples } => {
            ("check-nc", run_check_nc(func, points.as_deref(), *samples, seed, cap))
        }
        Command::Member { delta, point, margin } => ("member", run_member(delta, point, *margin)),
        Command::ModelResidual { samples } => ("model-residual", run_model_residual(samples, tol)),
        Command::Fit { samples, no_holdout, mult_cap } => ("fit", run_fit(samples, *no_holdout, *mult_cap)),
        Command::Corona { delta, points, psi, eps, model_realization, model_u } => {
            ("corona", run_corona(delta, points, psi, *eps, model_realization.as_deref(), model_u.as_deref(), tol))
        }
        Command::Approx { realization, samples, cover, closure, term_cap } => {
            ("approx", run_approx(realization, samples, cover.as_deref(), *closure, *term_cap, tol, cap))
        }
        Command::Derive { func, point, direction } => ("derive", run_derive(func, point, direction)),
        Command::Mero { command: MeroCommand::Certify { expr, delta, point, bound, bound_samples, check } } => {
            ("mero certify", run_certify(expr, delta, point, *bound, *bound_samples, *check, tol, seed))
        }
        Command::Mero { command: MeroCommand::Scan { expr, points } } => ("mero scan", run_scan(expr, points)),
    };
    finish(&Header { command, tol, seed }, result, cli.out.as_ref())
}
