//! Acceptance harness: one PASS/FAIL line per criterion.
//!
//! Run with `cargo test -p muntz-core --test acceptance`. Set
//! `MUNTZ_FULL_TRAINING=1` to additionally run the full-scale training job
//! (30 x 30 samples, 400 epochs, 10 restarts; several hours on one core).

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::*;
use muntz_core::assembly::{
    assemble_temporal_mass, assemble_temporal_stiffness, default_nhat, Forcing, ManufacturedProblem,
};
use muntz_core::basis::{muntz_project, MuntzBasis};
use muntz_core::exec::Execution;
use muntz_core::linalg::complex_qz;
use muntz_core::mltune::{
    batch_loss, batch_loss_and_gradient, spline_fit, uniform_grid, LambdaSource, LossContext, Network, Sample,
    SplineConfig, TrainingConfig, TrainingOutcome,
};
use muntz_core::quadrature::unit_gauss_jacobi;
use muntz_core::solver1d::{error_norms, solve_1d, SolverConfig, DEFAULT_ERROR_NODES};
use muntz_core::solver2d::{error_norms_2d, solve_2d, solve_2d_dense};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const FULL_TRAINING_ENV: &str = "MUNTZ_FULL_TRAINING";

/// Outcome of one criterion: pass flag and a one-line measurement summary.
struct Verdict {
    pass: bool,
    detail: String,
}

impl Verdict {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self { pass, detail: detail.into() }
    }

    fn failed(detail: impl std::fmt::Display) -> Self {
        Self { pass: false, detail: format!("error: {detail}") }
    }
}

struct Harness {
    failures: usize,
}

impl Harness {
    fn run(&mut self, id: usize, name: &str, budget: Duration, check: impl FnOnce() -> Verdict) {
        let start = Instant::now();
        let verdict = check();
        let elapsed = start.elapsed();
        let in_time = elapsed <= budget;
        let pass = verdict.pass && in_time;
        if !pass {
            self.failures += 1;
        }
        let timing = if in_time {
            format!("{:.2} s", elapsed.as_secs_f64())
        } else {
            format!("{:.2} s, over the {:.0} s budget", elapsed.as_secs_f64(), budget.as_secs_f64())
        };
        println!("criterion {id:>2} {} {name} ({timing}): {}", if pass { "PASS" } else { "FAIL" }, verdict.detail);
    }
}

fn secs(s: u64) -> Duration {
    Duration::from_secs(s)
}

fn quadrature_exactness() -> Verdict {
    let mut worst: f64 = 0.0;
    for &(a, b) in &[(0.0, 0.0), (0.5, -0.5), (-0.7, 0.0)] {
        for n in 1..=20 {
            let rule = match unit_gauss_jacobi(a, b, n) {
                Ok(r) => r,
                Err(e) => return Verdict::failed(e),
            };
            for k in 0..2 * n {
                let exact =
                    libm::tgamma(a + 1.0) * libm::tgamma(b + k as f64 + 1.0) / libm::tgamma(a + b + k as f64 + 2.0);
                let got = rule.integrate(|t| t.powi(k as i32));
                worst = worst.max((got - exact).abs() / exact);
            }
        }
    }
    Verdict::new(worst <= 1e-11, format!("max relative moment error {worst:.2e} (limit 1e-11)"))
}

fn muntz_orthogonality() -> Verdict {
    let mut off: f64 = 0.0;
    let mut diag: f64 = 0.0;
    for &lambda in &[1.0, 0.5, 0.09] {
        let basis = match MuntzBasis::temporal(0.5, lambda, 10) {
            Ok(b) => b,
            Err(e) => return Verdict::failed(e),
        };
        let value = |n: usize, s: f64| basis.eval(n, s.powf(1.0 / lambda));
        for n in 0..=10 {
            for m in n..=10 {
                // chi dt = (1-s)^{1/2} s^{-1} ds; s = 1 - u^2 removes the square root.
                let g = integrate(
                    |u| {
                        let s = 1.0 - u * u;
                        2.0 * u * u * value(n, s) * value(m, s) / s
                    },
                    0.0,
                    1.0,
                    1e-14,
                );
                if n == m {
                    let gamma_n = basis.norm(n).unwrap_or(f64::NAN);
                    diag = diag.max((g - gamma_n).abs() / gamma_n);
                } else {
                    off = off.max(g.abs());
                }
            }
        }
    }
    Verdict::new(
        off <= 1e-10 && diag <= 1e-10,
        format!("max off-diagonal {off:.2e}, max diagonal relative error {diag:.2e} (limits 1e-10)"),
    )
}

fn projection_shape() -> Verdict {
    let f = |x: f64| x.powf(0.6);
    let project = |lambda: f64, n: usize| {
        MuntzBasis::new(0.0, 0.0, lambda, n).and_then(|b| muntz_project(f, &b, 200)).map(|p| p.error)
    };
    let errors = (|| -> muntz_core::Result<_> {
        let fractional: Vec<f64> = (1..=5).map(|n| project(0.2, n)).collect::<Result<_, _>>()?;
        Ok((fractional, project(1.0, 16)?, project(1.0, 32)?))
    })();
    let (fractional, e16, e32) = match errors {
        Ok(v) => v,
        Err(e) => return Verdict::failed(e),
    };
    let reached = fractional.iter().any(|e| *e <= 1e-12);
    let ratio = e32 / e16;
    Verdict::new(
        reached && ratio > 0.05,
        format!("lambda = 1/5 error at N = 5: {:.2e}; lambda = 1 error(32)/error(16) = {ratio:.3}", fractional[4]),
    )
}

fn temporal_operator_oracle() -> Verdict {
    let mut worst: f64 = 0.0;
    for &lambda in &[1.0, 0.5] {
        for &mu in &[0.3, 0.7] {
            for n_max in 0..=6 {
                let mt = assemble_temporal_mass(n_max, 0.5, lambda);
                let st = assemble_temporal_stiffness(n_max, 0.5, lambda, mu, default_nhat(n_max));
                let (mt, st) = match (mt, st) {
                    (Ok(m), Ok(s)) => (m, s),
                    (Err(e), _) | (_, Err(e)) => return Verdict::failed(e),
                };
                worst = worst.max(max_relative(&mt, &mass_oracle(0.5, lambda, n_max)));
                worst = worst.max(max_relative(&st, &stiffness_oracle(0.5, lambda, mu, n_max)));
            }
        }
    }
    Verdict::new(worst <= 1e-8, format!("max entrywise relative deviation {worst:.2e} (limit 1e-8)"))
}

fn galerkin_exactness() -> Verdict {
    let mut worst: f64 = 0.0;
    for &lambda in &[1.0, 0.5, 0.3] {
        for &mu in &[0.3, 0.7] {
            for k in 1..=3 {
                let p = k as f64 * lambda;
                let solution = SolverConfig::new(mu, 1.0, 0.5, lambda, 6, 4, 1.0)
                    .and_then(|c| solve_1d(&c, &phi1_forcing(mu, 1.0, 0.5, p)));
                let solution = match solution {
                    Ok(s) => s,
                    Err(e) => return Verdict::failed(e),
                };
                let ts = [0.05, 0.3, 0.7, 1.0];
                let xs: Vec<f64> = (1..20).map(|i| -1.0 + 0.1 * i as f64).collect();
                let values = solution.grid_values(&xs, &ts);
                for (i, t) in ts.iter().enumerate() {
                    for (j, x) in xs.iter().enumerate() {
                        worst = worst.max((values[(i, j)] - phi1(*x) * t.powf(p)).abs());
                    }
                }
            }
        }
    }
    Verdict::new(worst <= 1e-9, format!("max nodal error {worst:.2e} over 18 trial-space solutions (limit 1e-9)"))
}

/// Errors stop decreasing once they reach the round-off floor of the
/// temporal system (condition estimates of 1e12-1e16 at small lambda); below
/// this level the sequence only has to stay small. Plateau values observed
/// for N = 10..20 wander between 3e-12 and 9e-10.
const ROUND_OFF_FLOOR: f64 = 1e-8;

fn example_one() -> Verdict {
    let mu = 3.0 / 25.0;
    let run = |lambda: f64, n: usize| -> muntz_core::Result<f64> {
        let problem = ManufacturedProblem::new(mu, 1.0 - mu, 1.0, 1.0, 1, 1.0)?;
        let solution = solve_1d(&SolverConfig::new(mu, 1.0, 1.0, lambda, 20, n, 1.0)?, &Forcing::from(&problem))?;
        Ok(error_norms(&solution, |x, t| problem.exact_1d(x, t), DEFAULT_ERROR_NODES)?.linf)
    };
    let errors: muntz_core::Result<Vec<f64>> = (4..=20).map(|n| run(0.0962, n)).collect();
    let (errors, classical) = match errors.and_then(|e| Ok((e, run(1.0, 20)?))) {
        Ok(v) => v,
        Err(e) => return Verdict::failed(e),
    };
    let strictly_monotone = errors.windows(2).all(|w| w[1] < w[0]);
    let plateau_monotone =
        errors.windows(2).all(|w| w[1] < w[0] || (w[0] <= ROUND_OFF_FLOOR && w[1] <= ROUND_OFF_FLOOR));
    let last = errors[errors.len() - 1];
    let gain = classical / last;
    let floor_at = errors.iter().position(|e| *e <= ROUND_OFF_FLOOR).map(|i| i + 4);
    Verdict::new(
        plateau_monotone && last <= 1e-6 && gain >= 100.0,
        format!(
            "Linf N=4 {:.2e} .. N=20 {last:.2e}; decreasing until the {ROUND_OFF_FLOOR:e} round-off floor \
             (reached at N = {}), strictly monotone over all N: {strictly_monotone}; lambda = 1 is {gain:.1e}x larger",
            errors[0],
            floor_at.map_or("-".to_string(), |n| n.to_string()),
        ),
    )
}

fn two_dimensional_equivalence() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let mu = rng.gen_range(0.1..0.9);
        let lambda = rng.gen_range(0.1..1.0);
        let kappa = rng.gen_range(0.5..2.0);
        let (a, b, c) = (rng.gen_range(-1.0..1.0), rng.gen_range(0.5..3.0), rng.gen_range(0.1..2.0));
        let forcing = Forcing::field2(move |x, y, t| {
            (a * x + (b * y).sin()) * (1.0 - x * x) * (1.0 + x * y) * t.powf(c) + (b * t).cos() * y
        });
        let solved = SolverConfig::new(mu, kappa, 0.0, lambda, 6, 5, 1.0)
            .and_then(|config| Ok((solve_2d(&config, &forcing)?, solve_2d_dense(&config, &forcing)?)));
        let (fast, dense) = match solved {
            Ok(v) => v,
            Err(e) => return Verdict::failed(e),
        };
        worst = worst.max((&fast.coefficients - &dense.coefficients).amax() / dense.coefficients.amax());
    }
    Verdict::new(worst <= 1e-9, format!("max relative coefficient difference {worst:.2e} over 10 cases (limit 1e-9)"))
}

fn example_four() -> Verdict {
    let mu = std::f64::consts::FRAC_1_SQRT_2;
    let run = || -> muntz_core::Result<_> {
        let problem = ManufacturedProblem::new(mu, 1.0 + mu, 1.0, 0.0, 2, 2.0)?;
        let config = SolverConfig::new(mu, 1.0, 0.0, 0.0899, 30, 30, 2.0)?;
        let solution = solve_2d(&config, &Forcing::from(&problem))?;
        let report = error_norms_2d(&solution, |x, y, t| problem.exact_2d(x, y, t), 200)?;
        Ok((report.linf, solution.diagnostics))
    };
    match run() {
        Ok((linf, diagnostics)) => Verdict::new(
            linf <= 1e-10,
            format!(
                "max pointwise error at t = 2: {linf:.2e} (limit 1e-10); residual {:.1e}{}",
                diagnostics.residual,
                diagnostics.warning.map(|w| format!("; warning: {w}")).unwrap_or_default()
            ),
        ),
        Err(e) => Verdict::failed(e),
    }
}

fn gradient_checks() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let net = match Network::random(&[1, 20, 20, 1], 0.01, &mut rng) {
        Ok(n) => n,
        Err(e) => return Verdict::failed(e),
    };
    let params = net.parameters();
    let mut network_worst: f64 = 0.0;
    for &mu in &[0.1, 0.45, 0.8] {
        let trace = net.forward_trace(mu).expect("valid input");
        let grad = net.backprop(&trace, 1.0);
        let h = 1e-6;
        let fd: Vec<f64> = (0..params.len())
            .map(|i| {
                let shifted = |d: f64| {
                    let mut p = params.clone();
                    p[i] += d;
                    let mut n = net.clone();
                    n.set_parameters(&p).expect("same size");
                    n.forward(mu).expect("valid input")
                };
                (shifted(h) - shifted(-h)) / (2.0 * h)
            })
            .collect();
        let scale = fd.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
        network_worst = grad.iter().zip(&fd).fold(network_worst, |w, (g, f)| w.max((g - f).abs() / scale));
    }

    let end_to_end = (|| -> muntz_core::Result<f64> {
        let ctx = LossContext::new(8, 5, (0.02, 0.999))?;
        let mut samples: Vec<Sample> = [(0.2, 0.35), (0.5, 0.8), (0.75, 0.15)]
            .iter()
            .map(|&(mu, nu)| Sample { mu, nu, ref_error: None })
            .collect();
        for s in &mut samples {
            s.ref_error = Some(ctx.solution_error(s.mu, s.nu, 1.0)?);
        }
        let small = Network::random(&[1, 3, 3, 1], 0.01, &mut rng)?;
        let (_, grad) = batch_loss_and_gradient(&small, &samples, &ctx, 1e-4)?;
        let p0 = small.parameters();
        let h = 1e-4;
        let loss_at = |p: &[f64]| -> muntz_core::Result<f64> {
            let mut n = small.clone();
            n.set_parameters(p)?;
            Ok(batch_loss(LambdaSource::Network(&n), &samples, &ctx)?.loss)
        };
        let mut fd = Vec::with_capacity(p0.len());
        for i in 0..p0.len() {
            let (mut up, mut down) = (p0.clone(), p0.clone());
            up[i] += h;
            down[i] -= h;
            fd.push((loss_at(&up)? - loss_at(&down)?) / (2.0 * h));
        }
        let scale = fd.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
        Ok(grad.iter().zip(&fd).fold(0.0, |w: f64, (g, f)| w.max((g - f).abs() / scale)))
    })();
    match end_to_end {
        Ok(e2e) => Verdict::new(
            network_worst <= 1e-6 && e2e <= 1e-3,
            format!("backprop vs FD {network_worst:.2e} (limit 1e-6); end-to-end vs FD {e2e:.2e} (limit 1e-3)"),
        ),
        Err(e) => Verdict::failed(e),
    }
}

fn desk_training(trained: &mut Option<TrainingOutcome>) -> Verdict {
    let config = TrainingConfig::desk();
    let first = match muntz_core::mltune::train_from_config(&config, Execution::Parallel) {
        Ok(o) => o,
        Err(e) => return Verdict::failed(e),
    };
    let second = match muntz_core::mltune::train_from_config(&config, Execution::Sequential) {
        Ok(o) => o,
        Err(e) => return Verdict::failed(e),
    };
    let deterministic = first.network == second.network && first.history == second.history;
    let val = first.metadata.final_val_loss;
    let lambdas: Vec<f64> = uniform_grid(19).iter().map(|&mu| first.network.forward(mu).unwrap_or(f64::NAN)).collect();
    let (lo, hi) = lambdas.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &l| (a.min(l), b.max(l)));
    let in_band = lambdas.iter().all(|l| *l > 0.03 && *l < 0.3);
    let detail = format!(
        "validation loss {val:.2e} (limit 1e-2); predicted lambda in [{lo:.4}, {hi:.4}] on 19 mu (band (0.03, 0.3)); \
         identical rerun: {deterministic}"
    );
    *trained = Some(first);
    Verdict::new(val < 1e-2 && in_band && deterministic, detail)
}

fn spline_vs_network(network: Option<&Network>) -> Verdict {
    let Some(network) = network else {
        return Verdict::new(false, "no trained network (criterion 10 failed)");
    };
    let mu = 0.65;
    let run = || -> muntz_core::Result<_> {
        let ctx = TrainingConfig::default().loss_context()?;
        let spline_config = SplineConfig { n_mu: 3, n_nu: 5, ..SplineConfig::default() };
        let (spline, _) = spline_fit(&spline_config, &ctx)?;
        let ann_lambda = network.forward(mu)?.clamp(0.02, 0.999);
        let spline_lambda = spline.predict(mu).clamp(0.01, 1.0);
        let problem = ManufacturedProblem::new(mu, 1.0 - mu, 1.0, 1.0, 1, 1.0)?;
        let error = |lambda: f64| -> muntz_core::Result<f64> {
            let solution = solve_1d(&SolverConfig::new(mu, 1.0, 1.0, lambda, 20, 20, 1.0)?, &Forcing::from(&problem))?;
            Ok(error_norms(&solution, |x, t| problem.exact_1d(x, t), DEFAULT_ERROR_NODES)?.linf)
        };
        Ok((ann_lambda, spline_lambda, error(ann_lambda)?, error(spline_lambda)?, error(1.0)?))
    };
    match run() {
        Ok((la, ls, ea, es, e1)) => Verdict::new(
            ea < es && es < e1,
            format!("Linf: ANN (lambda {la:.4}) {ea:.2e} < spline (lambda {ls:.4}) {es:.2e} < lambda = 1 {e1:.2e}"),
        ),
        Err(e) => Verdict::failed(e),
    }
}

fn loss_identity() -> Verdict {
    let run = || -> muntz_core::Result<f64> {
        let config = TrainingConfig::desk();
        let ctx = config.loss_context()?;
        let (training, _) = config.datasets(&ctx)?;
        Ok(batch_loss(LambdaSource::Fixed(1.0), &training.samples, &ctx)?.loss)
    };
    match run() {
        Ok(loss) => Verdict::new(loss == 1.0, format!("batch loss at lambda = 1 over 100 samples: {loss:?}")),
        Err(e) => Verdict::failed(e),
    }
}

fn full_training() {
    let start = Instant::now();
    match muntz_core::mltune::train_from_config(&TrainingConfig::default(), Execution::Parallel) {
        Ok(outcome) => {
            let val = outcome.metadata.final_val_loss;
            println!(
                "full-scale training {} ({:.0} s): validation loss {val:.2e} (target 1e-4)",
                if val < 1e-4 { "PASS" } else { "FAIL" },
                start.elapsed().as_secs_f64()
            );
        }
        Err(e) => println!("full-scale training FAIL: {e}"),
    }
}

/// A 3 x 3 pencil whose QZ eigenvalues must be roots of `det(A - z B)`;
/// a cheap guard that the generalized Schur form underneath criteria 7-8 is sound.
fn qz_smoke() -> bool {
    let a = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, -2.0, 0.5, 3.0, 1.0, -1.0, 2.0, 5.0]);
    let b = DMatrix::from_row_slice(3, 3, &[2.0, 0.3, 0.0, -0.4, 1.5, 0.2, 0.1, 0.0, 1.0]);
    let Ok(schur) = complex_qz(&a, &b) else { return false };
    let c = |m: &DMatrix<f64>| m.map(|v| Complex64::new(v, 0.0));
    (&schur.q * c(&a) * &schur.z - &schur.a).norm() < 1e-12 && (&schur.q * c(&b) * &schur.z - &schur.b).norm() < 1e-12
}

fn main() -> ExitCode {
    let mut h = Harness { failures: 0 };
    h.run(1, "quadrature exactness", secs(1), quadrature_exactness);
    h.run(2, "Muntz orthogonality", secs(1), muntz_orthogonality);
    h.run(3, "projection experiment", secs(5), projection_shape);
    h.run(4, "temporal-operator oracle", secs(10), temporal_operator_oracle);
    h.run(5, "1D Galerkin exactness", secs(1), galerkin_exactness);
    h.run(6, "Example 1 exponential decay", secs(30), example_one);
    h.run(7, "2D fast vs dense equivalence", secs(30), || {
        if qz_smoke() {
            two_dimensional_equivalence()
        } else {
            Verdict::new(false, "QZ reconstruction check failed")
        }
    });
    h.run(8, "Example 4 case i", secs(300), example_four);
    h.run(9, "gradient checks", secs(30), gradient_checks);
    let mut trained = None;
    h.run(10, "desk-scale training", secs(1200), || desk_training(&mut trained));
    h.run(11, "spline vs ANN ordering", secs(120), || spline_vs_network(trained.as_ref().map(|o| &o.network)));
    h.run(12, "loss identity", secs(10), loss_identity);
    if std::env::var_os(FULL_TRAINING_ENV).is_some_and(|v| v == "1") {
        full_training();
    } else {
        println!("full-scale training skipped (set {FULL_TRAINING_ENV}=1 to run it)");
    }
    println!("{} of 12 criteria passed", 12 - h.failures);
    if h.failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
