//! The subcommands. Each writes its CSV/JSON outputs into the output
//! directory and echoes the main CSV on standard output.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use muntz_core::assembly::{Forcing, ManufacturedProblem, MIN_LAMBDA};
use muntz_core::exec::Execution;
use muntz_core::mltune::{spline_fit, train_from_config, Network, SplineModel, TrainingConfig};
use muntz_core::solver1d::{error_norms, solve_1d, ErrorReport, SolverConfig, DEFAULT_ERROR_NODES};
use muntz_core::solver2d::{error_norms_2d, solve_2d};

use crate::config::{spline_config, training_config, Exact, ForcingKind, LambdaSpec, RawConfig, RunConfig};
use crate::failure::Failure;

/// Default `K` of the `K x K` error grid in 2D.
pub const DEFAULT_ERROR_NODES_2D: usize = 200;

pub const ERRORS_HEADER: &str = "dim,mu,lambda,M,N,L2,Linf,residual,cond_warn";

/// Which resolution a convergence sweep varies.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SweepAxis {
    N,
    M,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sweep {
    pub axis: SweepAxis,
    pub values: Vec<usize>,
}

impl std::str::FromStr for Sweep {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (axis, list) = s.split_once('=').ok_or("expected N=<list> or M=<list>")?;
        let axis = match axis.trim() {
            "N" => SweepAxis::N,
            "M" => SweepAxis::M,
            other => return Err(format!("sweep axis must be N or M, got `{other}`")),
        };
        let values = list
            .split(',')
            .map(|v| v.trim().parse::<usize>().map_err(|e| format!("`{v}`: {e}")))
            .collect::<Result<Vec<_>, _>>()?;
        if values.is_empty() {
            return Err("sweep list is empty".into());
        }
        Ok(Sweep { axis, values })
    }
}

/// One row of `errors.csv`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorRow {
    pub dim: usize,
    pub mu: f64,
    pub lambda: f64,
    pub m: usize,
    pub n: usize,
    pub report: ErrorReport,
    pub residual: f64,
    pub cond_warn: bool,
}

impl ErrorRow {
    fn csv(&self) -> String {
        format!(
            "{},{:.16e},{:.16e},{},{},{:.16e},{:.16e},{:.16e},{}",
            self.dim,
            self.mu,
            self.lambda,
            self.m,
            self.n,
            self.report.l2,
            self.report.linf,
            self.residual,
            u8::from(self.cond_warn)
        )
    }
}

pub fn errors_csv(rows: &[ErrorRow]) -> String {
    let mut out = format!("{ERRORS_HEADER}\n");
    for r in rows {
        out.push_str(&r.csv());
        out.push('\n');
    }
    out
}

/// Resolve a `lambda` source at `mu`. Network predictions are clamped to the
/// training range, spline predictions to the solver's admissible range.
pub fn resolve_lambda(spec: &LambdaSpec, mu: f64) -> Result<f64, Failure> {
    let lambda = match spec {
        LambdaSpec::Value(v) => *v,
        LambdaSpec::One => 1.0,
        LambdaSpec::Ann(path) => {
            let (net, _) = load_network(path)?;
            let (lo, hi) = TrainingConfig::default().lambda_clamp;
            net.forward(mu)?.clamp(lo, hi)
        }
        LambdaSpec::Spline(path) => load_spline(path)?.predict(mu).clamp(MIN_LAMBDA, 1.0),
    };
    if !(MIN_LAMBDA..=1.0).contains(&lambda) {
        return Err(Failure::config(format!("lambda = {lambda} is outside the admissible range [{MIN_LAMBDA}, 1]")));
    }
    Ok(lambda)
}

fn load_network(path: &Path) -> Result<(Network, muntz_core::mltune::ModelMetadata), Failure> {
    Network::load(path).map_err(|e| Failure::config(format!("cannot load model {}: {e}", path.display())))
}

fn load_spline(path: &Path) -> Result<SplineModel, Failure> {
    SplineModel::load(path).map_err(|e| Failure::config(format!("cannot load spline {}: {e}", path.display())))
}

/// A fully specified single solve.
#[derive(Debug, Clone)]
struct Case {
    mu: f64,
    lambda: f64,
    m: usize,
    n: usize,
}

enum AnySolution {
    One(muntz_core::solver1d::SpectralSolution),
    Two(muntz_core::solver2d::SpectralSolution2D),
}

impl AnySolution {
    fn diagnostics(&self) -> &muntz_core::solver1d::SolveDiagnostics {
        match self {
            AnySolution::One(s) => &s.diagnostics,
            AnySolution::Two(s) => &s.diagnostics,
        }
    }
}

fn forcing_for(run: &RunConfig, mu: f64) -> Result<(Forcing, Option<ManufacturedProblem>), Failure> {
    let p = &run.problem;
    Ok(match (p.forcing, p.exact) {
        (ForcingKind::Manufactured, Exact::Manufactured(nu)) => {
            let problem = ManufacturedProblem::new(mu, nu.at(mu), p.kappa, p.rho, p.dimension, p.t_end)?;
            (Forcing::from(&problem), Some(problem))
        }
        (ForcingKind::SinPiXSinPiT, _) if p.dimension == 1 => (Forcing::sin_pi_x_sin_pi_t(), None),
        (ForcingKind::SinPiXSinPiT, _) => {
            (Forcing::field2(|x, y, t| (PI * x).sin() * (PI * y).sin() * (PI * t).sin()), None)
        }
        _ => return Err(Failure::config("a manufactured forcing needs a manufactured exact solution")),
    })
}

fn solve_case(run: &RunConfig, case: &Case, nhat: Option<usize>) -> Result<AnySolution, Failure> {
    let p = &run.problem;
    let mut config = SolverConfig::new(case.mu, p.kappa, p.rho, case.lambda, case.m, case.n, p.t_end)?;
    config.nhat = nhat;
    let (forcing, _) = forcing_for(run, case.mu)?;
    Ok(match p.dimension {
        1 => AnySolution::One(solve_1d(&config, &forcing)?),
        _ => AnySolution::Two(solve_2d(&config, &forcing)?),
    })
}

/// Solve one case and measure its error at `t_end` against the exact
/// solution, or against the reference solve when there is none.
fn run_case(run: &RunConfig, case: &Case) -> Result<ErrorRow, Failure> {
    let d = &run.discretization;
    let solution = solve_case(run, case, d.nhat)?;
    let (_, exact) = forcing_for(run, case.mu)?;
    let reference = match exact {
        Some(_) => None,
        None => {
            let spec = run.reference.lambda.as_ref().unwrap_or(&d.lambda);
            let r =
                Case { mu: case.mu, lambda: resolve_lambda(spec, case.mu)?, m: run.reference.m, n: run.reference.n };
            Some(solve_case(run, &r, None)?)
        }
    };
    let report = match (&solution, &reference) {
        (AnySolution::One(s), None) => {
            let e = exact.expect("manufactured");
            error_norms(s, |x, t| e.exact_1d(x, t), d.error_nodes.unwrap_or(DEFAULT_ERROR_NODES))?
        }
        (AnySolution::One(s), Some(AnySolution::One(r))) => {
            error_norms(s, |x, t| r.evaluate(x, t).unwrap_or(f64::NAN), d.error_nodes.unwrap_or(DEFAULT_ERROR_NODES))?
        }
        (AnySolution::Two(s), None) => {
            let e = exact.expect("manufactured");
            error_norms_2d(s, |x, y, t| e.exact_2d(x, y, t), d.error_nodes.unwrap_or(DEFAULT_ERROR_NODES_2D))?
        }
        (AnySolution::Two(s), Some(AnySolution::Two(r))) => error_norms_2d(
            s,
            |x, y, t| r.evaluate(x, y, t).unwrap_or(f64::NAN),
            d.error_nodes.unwrap_or(DEFAULT_ERROR_NODES_2D),
        )?,
        _ => unreachable!("reference and solution share the dimension"),
    };
    if !report.linf.is_finite() {
        return Err(Failure::Numerical(format!("non-finite error at mu = {}, lambda = {}", case.mu, case.lambda)));
    }
    let diagnostics = solution.diagnostics();
    Ok(ErrorRow {
        dim: run.problem.dimension,
        mu: case.mu,
        lambda: case.lambda,
        m: case.m,
        n: case.n,
        report,
        residual: diagnostics.residual,
        cond_warn: diagnostics.has_warning(),
    })
}

pub fn output_dir(out: Option<&Path>, raw: Option<&RawConfig>) -> Result<PathBuf, Failure> {
    let dir = match (out, raw.and_then(|r| r.path("output", "dir"))) {
        (Some(o), _) => o.to_path_buf(),
        (None, Some(d)) => d,
        (None, None) => PathBuf::from("."),
    };
    std::fs::create_dir_all(&dir)
        .map_err(|e| Failure::config(format!("cannot create output directory {}: {e}", dir.display())))?;
    Ok(dir)
}

fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text).map_err(|e| Failure::config(format!("cannot write {}: {e}", path.display())))
}

pub fn cmd_solve(raw: &RawConfig, mu: Option<&[f64]>, out: &Path) -> Result<String, Failure> {
    let run = RunConfig::from_raw(raw, mu)?;
    let d = &run.discretization;
    let mut rows = Vec::new();
    for &mu in &run.problem.mu {
        let case = Case { mu, lambda: resolve_lambda(&d.lambda, mu)?, m: d.m, n: d.n };
        rows.push(run_case(&run, &case)?);
    }
    let csv = errors_csv(&rows);
    write_file(&out.join("errors.csv"), &csv)?;
    Ok(csv)
}

pub fn cmd_convergence(raw: &RawConfig, mu: Option<&[f64]>, sweep: &Sweep, out: &Path) -> Result<String, Failure> {
    let run = RunConfig::from_raw(raw, mu)?;
    let d = &run.discretization;
    let mut cases = Vec::new();
    for &mu in &run.problem.mu {
        let lambda = resolve_lambda(&d.lambda, mu)?;
        for &v in &sweep.values {
            let (m, n) = match sweep.axis {
                SweepAxis::N => (d.m, v),
                SweepAxis::M => (v, d.n),
            };
            cases.push(Case { mu, lambda, m, n });
        }
    }
    let rows = Execution::default().map(&cases, |c| run_case(&run, c));
    let rows = rows.into_iter().collect::<Result<Vec<_>, _>>()?;
    let csv = errors_csv(&rows);
    write_file(&out.join("convergence.csv"), &csv)?;
    Ok(csv)
}

pub fn cmd_train(raw: &RawConfig, out: &Path) -> Result<String, Failure> {
    let config = training_config(raw)?;
    let model_path = out.join(raw.get("output", "model").unwrap_or("model.json"));
    let outcome = train_from_config(&config, Execution::default())?;
    outcome.network.save(&model_path, &outcome.metadata)?;
    write_file(&out.join("loss_history.csv"), &outcome.history_csv())?;
    Ok(format!(
        "best restart {} with validation loss {:.6e}; model written to {}\n",
        outcome.best_restart,
        outcome.metadata.final_val_loss,
        model_path.display()
    ))
}

pub fn cmd_dataset(raw: &RawConfig, out: &Path) -> Result<String, Failure> {
    let config = training_config(raw)?;
    let ctx = config.loss_context()?;
    let (training, validation) = config.datasets(&ctx)?;
    write_file(&out.join("train_dataset.csv"), &training.to_csv())?;
    write_file(&out.join("validation_dataset.csv"), &validation.to_csv())?;
    Ok(format!(
        "{} training and {} validation samples written to {}\n",
        training.len(),
        validation.len(),
        out.display()
    ))
}

pub fn cmd_fit_spline(raw: &RawConfig, out: &Path) -> Result<String, Failure> {
    let training = training_config(raw)?;
    let config = spline_config(raw)?;
    let ctx = training.loss_context()?;
    let (model, fits) = spline_fit(&config, &ctx)?;
    let path = out.join(raw.get("output", "spline").unwrap_or("spline.json"));
    model.save(&path)?;
    let mut csv = String::from("mu,lambda,loss,iterations,at_boundary\n");
    for f in &fits {
        let _ = writeln!(
            csv,
            "{:.16e},{:.16e},{:.16e},{},{}",
            f.knot.mu,
            f.knot.lambda,
            f.loss,
            f.iterations,
            u8::from(f.knot.at_boundary)
        );
    }
    write_file(&out.join("spline_knots.csv"), &csv)?;
    Ok(csv)
}

pub fn cmd_predict(model: Option<&Path>, spline: Option<&Path>, mus: &[f64], out: &Path) -> Result<String, Failure> {
    if mus.is_empty() {
        return Err(Failure::config("predict needs at least one mu (--mu or problem.mu)"));
    }
    if let Some(bad) = mus.iter().find(|m| !(**m > 0.0 && **m < 1.0)) {
        return Err(Failure::config(format!("mu must lie in (0, 1), got {bad}")));
    }
    let predict: Box<dyn Fn(f64) -> Result<f64, Failure>> = match (model, spline) {
        (Some(path), None) => {
            let (net, _) = load_network(path)?;
            Box::new(move |mu| Ok(net.forward(mu)?))
        }
        (None, Some(path)) => {
            let s = load_spline(path)?;
            Box::new(move |mu| Ok(s.predict(mu)))
        }
        _ => return Err(Failure::config("predict needs exactly one of --model or --spline")),
    };
    let mut csv = String::from("mu,lambda\n");
    for &mu in mus {
        let _ = writeln!(csv, "{:.16e},{:.16e}", mu, predict(mu)?);
    }
    write_file(&out.join("predictions.csv"), &csv)?;
    Ok(csv)
}

pub fn cmd_compare(
    raw: &RawConfig,
    mu: Option<&[f64]>,
    ann: Option<&Path>,
    spline: Option<&Path>,
    out: &Path,
) -> Result<String, Failure> {
    let ann = ann.map(Path::to_path_buf).or_else(|| raw.path("models", "ann"));
    let spline = spline.map(Path::to_path_buf).or_else(|| raw.path("models", "spline"));
    let (Some(ann), Some(spline)) = (ann, spline) else {
        return Err(Failure::config("compare needs an ANN model (--ann) and a spline model (--spline)"));
    };
    load_network(&ann)?;
    load_spline(&spline)?;
    let run = RunConfig::from_raw(raw, mu)?;
    let d = &run.discretization;
    let mut csv = String::from("source,lambda,L2,Linf\n");
    for &mu in &run.problem.mu {
        for (name, spec) in [
            ("one", LambdaSpec::One),
            ("spline", LambdaSpec::Spline(spline.clone())),
            ("ann", LambdaSpec::Ann(ann.clone())),
        ] {
            let case = Case { mu, lambda: resolve_lambda(&spec, mu)?, m: d.m, n: d.n };
            let row = run_case(&run, &case)?;
            let _ = writeln!(csv, "{name},{:.16e},{:.16e},{:.16e}", row.lambda, row.report.l2, row.report.linf);
        }
    }
    write_file(&out.join("compare.csv"), &csv)?;
    Ok(csv)
}
