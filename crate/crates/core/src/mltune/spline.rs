//! Cubic-spline baseline: per-`mu` optimal `lambda` by scalar Adam, then a
//! natural cubic spline through the `(mu_i, lambda_i)` knots.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::assembly::MIN_LAMBDA;
use crate::{Error, Result};

use super::dataset::{uniform_grid, Sample};
use super::loss::LossContext;
use super::optim::{Adam, AdamConfig, CawrSchedule};

pub const SPLINE_SCHEMA_VERSION: u32 = 1;

/// One knot `(mu, lambda)`; `at_boundary` marks optimizations that ended on
/// the edge of the admissible `lambda` range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Knot {
    pub mu: f64,
    pub lambda: f64,
    #[serde(default)]
    pub at_boundary: bool,
}

/// Natural cubic spline `lambda(mu)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SplineModel {
    pub knots: Vec<Knot>,
    /// Second derivatives at the knots (zero at both ends).
    second: Vec<f64>,
}

impl SplineModel {
    /// Natural cubic spline through `knots`, which must have strictly
    /// increasing `mu` and at least two entries.
    pub fn fit(knots: Vec<Knot>) -> Result<Self> {
        if knots.len() < 2 {
            return Err(Error::domain(format!("a spline needs at least two knots, got {}", knots.len())));
        }
        if knots.iter().any(|k| !k.mu.is_finite() || !k.lambda.is_finite()) {
            return Err(Error::domain("spline knots must be finite"));
        }
        if knots.windows(2).any(|w| w[1].mu <= w[0].mu) {
            return Err(Error::domain("spline knots must have strictly increasing mu"));
        }
        let n = knots.len();
        let h: Vec<f64> = knots.windows(2).map(|w| w[1].mu - w[0].mu).collect();
        let mut second = vec![0.0; n];
        if n > 2 {
            // Thomas algorithm on the interior equations.
            let m = n - 2;
            let mut diag = vec![0.0; m];
            let mut rhs = vec![0.0; m];
            for i in 0..m {
                let (y0, y1, y2) = (knots[i].lambda, knots[i + 1].lambda, knots[i + 2].lambda);
                diag[i] = 2.0 * (h[i] + h[i + 1]);
                rhs[i] = 6.0 * ((y2 - y1) / h[i + 1] - (y1 - y0) / h[i]);
            }
            for i in 1..m {
                let w = h[i] / diag[i - 1];
                diag[i] -= w * h[i];
                rhs[i] -= w * rhs[i - 1];
            }
            second[m] = rhs[m - 1] / diag[m - 1];
            for i in (0..m - 1).rev() {
                second[i + 1] = (rhs[i] - h[i + 1] * second[i + 2]) / diag[i];
            }
        }
        Ok(Self { knots, second })
    }

    /// Spline value at `mu`, clamped to the knot range; exact at knots.
    pub fn predict(&self, mu: f64) -> f64 {
        let first = self.knots[0];
        let last = self.knots[self.knots.len() - 1];
        if mu <= first.mu {
            return first.lambda;
        }
        if mu >= last.mu {
            return last.lambda;
        }
        let i = match self.knots.binary_search_by(|k| k.mu.total_cmp(&mu)) {
            Ok(i) => return self.knots[i].lambda,
            Err(i) => i - 1,
        };
        let (k0, k1) = (self.knots[i], self.knots[i + 1]);
        let (m0, m1) = (self.second[i], self.second[i + 1]);
        let h = k1.mu - k0.mu;
        let (a, b) = (k1.mu - mu, mu - k0.mu);
        m0 * a.powi(3) / (6.0 * h)
            + m1 * b.powi(3) / (6.0 * h)
            + (k0.lambda / h - m0 * h / 6.0) * a
            + (k1.lambda / h - m1 * h / 6.0) * b
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = SplineFile { schema_version: SPLINE_SCHEMA_VERSION, natural: true, knots: self.knots.clone() };
        let text = serde_json::to_string_pretty(&file).map_err(|e| Error::Format(e.to_string()))?;
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let file: SplineFile =
            serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
        if file.schema_version != SPLINE_SCHEMA_VERSION || !file.natural {
            return Err(Error::Format(format!(
                "{}: expected a natural spline with schema version {SPLINE_SCHEMA_VERSION}",
                path.display()
            )));
        }
        Self::fit(file.knots)
    }
}

/// `lambda` predicted by `model` at `mu`.
pub fn spline_predict(model: &SplineModel, mu: f64) -> f64 {
    model.predict(mu)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SplineFile {
    schema_version: u32,
    natural: bool,
    knots: Vec<Knot>,
}

/// Per-`mu` scalar optimization settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplineConfig {
    pub n_mu: usize,
    pub n_nu: usize,
    pub iterations: usize,
    pub initial_lambda: f64,
    pub lambda_bounds: (f64, f64),
    pub adam: AdamConfig,
    /// Schedule indexed by iteration.
    pub schedule: CawrSchedule,
    pub fd_step: f64,
    /// Stop after this many consecutive iterations improving the best loss by less than `tolerance`.
    pub patience: usize,
    pub tolerance: f64,
}

impl Default for SplineConfig {
    fn default() -> Self {
        Self {
            n_mu: 30,
            n_nu: 30,
            iterations: 400,
            initial_lambda: 0.5,
            lambda_bounds: (MIN_LAMBDA, 0.999),
            adam: AdamConfig::default(),
            schedule: CawrSchedule::default(),
            fd_step: 1e-4,
            patience: 30,
            tolerance: 1e-8,
        }
    }
}

impl SplineConfig {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.lambda_bounds;
        if !(lo >= MIN_LAMBDA && lo < hi && hi <= 1.0) {
            return Err(Error::domain(format!("spline lambda bounds must satisfy {MIN_LAMBDA} <= lo < hi <= 1")));
        }
        if !(lo..=hi).contains(&self.initial_lambda) {
            return Err(Error::domain("initial lambda lies outside the bounds"));
        }
        if self.n_mu < 2 || self.n_nu == 0 || self.iterations == 0 {
            return Err(Error::domain("spline fit needs at least 2 mu values, 1 nu value and 1 iteration"));
        }
        if !(self.fd_step > 0.0) {
            return Err(Error::domain("fd_step must be positive"));
        }
        self.schedule.validate()
    }
}

/// Result of optimizing `lambda` for one `mu`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KnotFit {
    pub knot: Knot,
    pub loss: f64,
    pub iterations: usize,
}

/// Mean normalized error over the `nu` samples of one `mu`.
fn mean_ratio(ctx: &LossContext, samples: &[Sample], lambda: f64) -> Result<f64> {
    let mut sum = 0.0;
    for s in samples {
        sum += ctx.ratio(s, lambda)?;
    }
    Ok(sum / samples.len() as f64)
}

/// Minimize the mean normalized error over `lambda` for one `mu` with scalar
/// Adam and a central-difference gradient (one-sided at the bounds).
pub fn optimize_lambda(config: &SplineConfig, ctx: &LossContext, mu: f64, nus: &[f64]) -> Result<KnotFit> {
    let mut samples: Vec<Sample> = nus.iter().map(|&nu| Sample { mu, nu, ref_error: None }).collect();
    for s in &mut samples {
        s.ref_error = Some(ctx.solution_error(s.mu, s.nu, 1.0)?);
    }
    let (lo, hi) = config.lambda_bounds;
    let mut lambda = config.initial_lambda;
    let mut adam = Adam::new(config.adam, 1);
    let mut best = (lambda, mean_ratio(ctx, &samples, lambda)?);
    let mut stalled = 0;
    let mut iterations = 0;
    for it in 1..=config.iterations {
        iterations = it;
        let (a, b) = ((lambda - config.fd_step).max(lo), (lambda + config.fd_step).min(hi));
        let slope = (mean_ratio(ctx, &samples, b)? - mean_ratio(ctx, &samples, a)?) / (b - a);
        let mut p = [lambda];
        adam.step(&mut p, &[slope], config.schedule.lr(it))?;
        lambda = p[0].clamp(lo, hi);
        let loss = mean_ratio(ctx, &samples, lambda)?;
        if best.1 - loss < config.tolerance {
            stalled += 1;
        } else {
            stalled = 0;
        }
        if loss < best.1 {
            best = (lambda, loss);
        }
        if stalled >= config.patience {
            break;
        }
    }
    let at_boundary = best.0 <= lo || best.0 >= hi;
    Ok(KnotFit { knot: Knot { mu, lambda: best.0, at_boundary }, loss: best.1, iterations })
}

/// Fit the spline baseline: knots at `mu_i = i / (n_mu + 1)`, each optimized
/// over `nu_j = j / (n_nu + 1)`.
pub fn spline_fit(config: &SplineConfig, ctx: &LossContext) -> Result<(SplineModel, Vec<KnotFit>)> {
    config.validate()?;
    let mus = uniform_grid(config.n_mu);
    let nus = uniform_grid(config.n_nu);
    let fits = ctx.execution.map(&mus, |&mu| optimize_lambda(config, ctx, mu, &nus));
    let fits = fits.into_iter().collect::<Result<Vec<_>>>()?;
    for f in fits.iter().filter(|f| f.knot.at_boundary) {
        log::warn!("spline knot mu = {} ended on the lambda bound {}", f.knot.mu, f.knot.lambda);
    }
    let model = SplineModel::fit(fits.iter().map(|f| f.knot).collect())?;
    Ok((model, fits))
}
