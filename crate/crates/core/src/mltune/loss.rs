//! Solver-in-the-loop loss: the mean, over a batch, of the error of the
//! predicted-`lambda` solve divided by the error of the `lambda = 1` solve.

use crate::assembly::{Forcing, ManufacturedProblem, MIN_LAMBDA};
use crate::exec::Execution;
use crate::quadrature::{cached_unit_rule, gauss_jacobi};
use crate::solver1d::{solve_1d, SolverConfig};
use crate::{Error, Result};

use super::dataset::{Dataset, Sample};
use super::network::Network;

/// Training problem `D^mu u = u_xx - u_x + f` on `(-1, 1) x (0, 1]`.
pub const TRAINING_KAPPA: f64 = 1.0;
pub const TRAINING_RHO: f64 = 1.0;
pub const TRAINING_T_END: f64 = 1.0;

/// Everything needed to turn a `(mu, nu, lambda)` triple into a solution error.
#[derive(Debug, Clone)]
pub struct LossContext {
    /// Spatial resolution `M` (`M - 1` basis functions).
    pub resolution: usize,
    /// Highest temporal mode `N` (`N + 1` basis functions).
    pub n_max: usize,
    /// Network outputs are clamped to this range before solving.
    pub lambda_clamp: (f64, f64),
    pub execution: Execution,
    xs: Vec<f64>,
    ts: Vec<f64>,
}

impl LossContext {
    /// The error grid is the `(M-1)`-point Gauss–Legendre rule in space and the
    /// `(N+1)`-point temporal mass rule of the `lambda = 1` basis in time, so
    /// the numerator and denominator of the loss share one grid.
    pub fn new(resolution: usize, n_max: usize, lambda_clamp: (f64, f64)) -> Result<Self> {
        let (lo, hi) = lambda_clamp;
        if !(MIN_LAMBDA..=1.0).contains(&lo) || !(lo..=1.0).contains(&hi) {
            return Err(Error::domain(format!(
                "lambda clamp must satisfy {MIN_LAMBDA} <= lo <= hi <= 1, got [{lo}, {hi}]"
            )));
        }
        if resolution < 3 {
            return Err(Error::domain(format!("spatial resolution M must be at least 3, got {resolution}")));
        }
        let xs = gauss_jacobi(0.0, 0.0, resolution - 1)?.nodes;
        let ts = cached_unit_rule(0.0, 2.0, n_max + 1)?.nodes.iter().map(|s| s * TRAINING_T_END).collect();
        Ok(Self { resolution, n_max, lambda_clamp, execution: Execution::default(), xs, ts })
    }

    pub fn with_execution(mut self, execution: Execution) -> Self {
        self.execution = execution;
        self
    }

    pub fn error_grid(&self) -> (&[f64], &[f64]) {
        (&self.xs, &self.ts)
    }

    pub fn clamp(&self, lambda: f64) -> f64 {
        lambda.clamp(self.lambda_clamp.0, self.lambda_clamp.1)
    }

    /// Frobenius norm of the nodal error of the `lambda` solve for `u = t^nu sin(pi x)`.
    pub fn solution_error(&self, mu: f64, nu: f64, lambda: f64) -> Result<f64> {
        let problem = ManufacturedProblem::new(mu, nu, TRAINING_KAPPA, TRAINING_RHO, 1, TRAINING_T_END)?;
        let config =
            SolverConfig::new(mu, TRAINING_KAPPA, TRAINING_RHO, lambda, self.resolution, self.n_max, TRAINING_T_END)?;
        let solution = solve_1d(&config, &Forcing::from(&problem))?;
        let values = solution.grid_values(&self.xs, &self.ts);
        let mut sum = 0.0;
        for (i, &t) in self.ts.iter().enumerate() {
            for (j, &x) in self.xs.iter().enumerate() {
                let e = problem.exact_1d(x, t) - values[(i, j)];
                sum += e * e;
            }
        }
        let error = sum.sqrt();
        if !error.is_finite() {
            return Err(Error::numerical(format!(
                "non-finite solution error at mu = {mu}, nu = {nu}, lambda = {lambda}"
            )));
        }
        Ok(error)
    }

    /// Fill in the `lambda = 1` error of every sample that lacks one.
    pub fn attach_reference_errors(&self, dataset: &mut Dataset) -> Result<()> {
        let errors = self.execution.map(&dataset.samples, |s| match s.ref_error {
            Some(e) => Ok(e),
            None => self.solution_error(s.mu, s.nu, 1.0),
        });
        for (sample, error) in dataset.samples.iter_mut().zip(errors) {
            let e = error?;
            if !(e > 0.0) {
                return Err(Error::numerical(format!(
                    "reference error vanishes at mu = {}, nu = {}; the loss ratio is undefined",
                    sample.mu, sample.nu
                )));
            }
            sample.ref_error = Some(e);
        }
        Ok(())
    }

    /// Normalized error `E(lambda) / E(1)` of one sample.
    pub fn ratio(&self, sample: &Sample, lambda: f64) -> Result<f64> {
        let reference = reference_of(sample)?;
        Ok(self.solution_error(sample.mu, sample.nu, lambda)? / reference)
    }
}

fn reference_of(sample: &Sample) -> Result<f64> {
    sample.ref_error.ok_or_else(|| {
        Error::Structural(format!("sample (mu = {}, nu = {}) has no reference error", sample.mu, sample.nu))
    })
}

/// Where each sample's `lambda` comes from.
#[derive(Debug, Clone, Copy)]
pub enum LambdaSource<'a> {
    /// Network prediction, clamped to the context's range.
    Network(&'a Network),
    /// The same value for every sample, used as given.
    Fixed(f64),
}

/// Batch loss with its per-sample details.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchLoss {
    pub loss: f64,
    /// `lambda` actually used per sample (after clamping).
    pub lambdas: Vec<f64>,
    /// Normalized error per sample; `None` for excluded (failed) samples.
    pub ratios: Vec<Option<f64>>,
}

impl BatchLoss {
    pub fn failed(&self) -> usize {
        self.ratios.iter().filter(|r| r.is_none()).count()
    }
}

fn mean_of_successes(ratios: &[Option<f64>]) -> Result<f64> {
    let ok: Vec<f64> = ratios.iter().flatten().copied().collect();
    if ok.is_empty() {
        return Err(Error::numerical("every sample of the batch failed to solve"));
    }
    Ok(ok.iter().sum::<f64>() / ok.len() as f64)
}

fn lambda_for(source: LambdaSource<'_>, ctx: &LossContext, mu: f64) -> Result<f64> {
    match source {
        LambdaSource::Network(net) => Ok(ctx.clamp(net.forward(mu)?)),
        LambdaSource::Fixed(lambda) => Ok(lambda),
    }
}

/// Mean normalized error over `samples`. Samples whose solve fails are
/// excluded with a warning; a batch in which every sample fails is an error.
pub fn batch_loss(source: LambdaSource<'_>, samples: &[Sample], ctx: &LossContext) -> Result<BatchLoss> {
    let lambdas = samples.iter().map(|s| lambda_for(source, ctx, s.mu)).collect::<Result<Vec<_>>>()?;
    for s in samples {
        reference_of(s)?;
    }
    let pairs: Vec<(Sample, f64)> = samples.iter().copied().zip(lambdas.iter().copied()).collect();
    let ratios = ctx.execution.map(&pairs, |(s, lambda)| match ctx.ratio(s, *lambda) {
        Ok(r) => Some(r),
        Err(e) => {
            log::warn!("excluding sample (mu = {}, nu = {}) at lambda = {lambda}: {e}", s.mu, s.nu);
            None
        }
    });
    let loss = mean_of_successes(&ratios)?;
    Ok(BatchLoss { loss, lambdas, ratios })
}

/// Batch loss and its gradient with respect to the network parameters.
///
/// `d ratio / d lambda` is a central difference with step `h` (two extra
/// solves per sample); it is chained through [`Network::backprop`]. The clamp
/// passes gradients straight through.
pub fn batch_loss_and_gradient(
    net: &Network,
    samples: &[Sample],
    ctx: &LossContext,
    h: f64,
) -> Result<(BatchLoss, Vec<f64>)> {
    if !(h > 0.0) || ctx.lambda_clamp.0 - h < MIN_LAMBDA || ctx.lambda_clamp.1 + h > 1.0 {
        return Err(Error::domain(format!(
            "finite-difference step {h} must be positive and keep lambda +- h inside [{MIN_LAMBDA}, 1]"
        )));
    }
    for s in samples {
        reference_of(s)?;
    }
    struct Outcome {
        lambda: f64,
        ratio: Option<f64>,
        grad: Option<Vec<f64>>,
    }
    let outcomes = ctx.execution.map(samples, |s| -> Result<Outcome> {
        let trace = net.forward_trace(s.mu)?;
        let lambda = ctx.clamp(trace.output());
        let evaluate = || -> Result<(f64, f64)> {
            let r = ctx.ratio(s, lambda)?;
            let slope = (ctx.ratio(s, lambda + h)? - ctx.ratio(s, lambda - h)?) / (2.0 * h);
            Ok((r, slope))
        };
        Ok(match evaluate() {
            Ok((r, slope)) => Outcome { lambda, ratio: Some(r), grad: Some(net.backprop(&trace, slope)) },
            Err(e) => {
                log::warn!("excluding sample (mu = {}, nu = {}) at lambda = {lambda}: {e}", s.mu, s.nu);
                Outcome { lambda, ratio: None, grad: None }
            }
        })
    });
    let outcomes = outcomes.into_iter().collect::<Result<Vec<_>>>()?;
    let ratios: Vec<Option<f64>> = outcomes.iter().map(|o| o.ratio).collect();
    let loss = mean_of_successes(&ratios)?;
    let n_ok = ratios.iter().flatten().count() as f64;
    let mut grad = vec![0.0; net.parameter_count()];
    for g in outcomes.iter().filter_map(|o| o.grad.as_ref()) {
        for (acc, v) in grad.iter_mut().zip(g) {
            *acc += v / n_ok;
        }
    }
    let lambdas = outcomes.iter().map(|o| o.lambda).collect();
    Ok((BatchLoss { loss, lambdas, ratios }, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mltune::dataset::{generate_dataset, DatasetKind};

    fn context() -> LossContext {
        LossContext::new(8, 5, (0.02, 0.999)).unwrap()
    }

    #[test]
    fn fixed_lambda_one_gives_unit_loss() {
        let ctx = context();
        let mut d = generate_dataset(DatasetKind::Validation, 2, 2, 0).unwrap();
        ctx.attach_reference_errors(&mut d).unwrap();
        let b = batch_loss(LambdaSource::Fixed(1.0), &d.samples, &ctx).unwrap();
        assert_eq!(b.loss, 1.0);
        let net = Network::with_shape(1, 3).unwrap();
        let b = batch_loss(LambdaSource::Network(&net), &d.samples, &ctx).unwrap();
        assert!(b.loss > 0.0);
        assert!(b.lambdas.iter().all(|&l| l == 0.5));
    }

    #[test]
    fn missing_reference_error_is_structural() {
        let ctx = context();
        let d = generate_dataset(DatasetKind::Validation, 1, 1, 0).unwrap();
        assert!(matches!(batch_loss(LambdaSource::Fixed(0.5), &d.samples, &ctx), Err(Error::Structural(_))));
    }

    #[test]
    fn error_grid_has_the_solver_sizes() {
        let ctx = context();
        let (xs, ts) = ctx.error_grid();
        assert_eq!((xs.len(), ts.len()), (7, 6));
        assert!(ts.iter().all(|&t| t > 0.0 && t < 1.0));
    }
}
