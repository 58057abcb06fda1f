//! Gauss–Jacobi quadrature.
//!
//! Rules are generated with the Golub–Welsch construction: the nodes are the
//! eigenvalues of the symmetric tridiagonal Jacobi matrix of the three-term
//! recurrence, and the weights are the squared first eigenvector components
//! scaled by the zeroth moment of the weight. Exponents in `(-1, 0)` are
//! supported, which is what the Caputo kernel `(1 - z)^(-mu)` needs.

use std::collections::HashMap;
use std::sync::{Arc, OnceLock, RwLock};

use crate::{Error, Result};

const QL_TOLERANCE: f64 = 1e-15;
const QL_MAX_ITERATIONS: usize = 60;
const CACHE_RESOLUTION: f64 = 1e-14;
const CACHE_CAPACITY: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Interval {
    /// `[-1, 1]` with weight `(1 - x)^alpha (1 + x)^beta`.
    Symmetric,
    /// `[0, 1]` with weight `(1 - t)^alpha t^beta`.
    Unit,
}

/// An `n`-point Gauss–Jacobi rule. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub alpha: f64,
    pub beta: f64,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub interval: Interval,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `sum_i w_i f(x_i)`, i.e. the weighted integral of `f`.
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }

    /// Map a `[-1, 1]` rule to `[0, 1]` via `t = (x + 1) / 2`.
    pub fn shift_to_unit(&self) -> Result<QuadratureRule> {
        if self.interval != Interval::Symmetric {
            return Err(Error::domain("shift_to_unit expects a rule on [-1, 1]"));
        }
        let scale = (-(self.alpha + self.beta + 1.0) * std::f64::consts::LN_2).exp();
        Ok(QuadratureRule {
            alpha: self.alpha,
            beta: self.beta,
            nodes: self.nodes.iter().map(|x| 0.5 * (x + 1.0)).collect(),
            weights: self.weights.iter().map(|w| w * scale).collect(),
            interval: Interval::Unit,
        })
    }
}

/// `ln B(a, b)` for positive arguments.
pub(crate) fn ln_beta(a: f64, b: f64) -> f64 {
    let (small, large) = if a <= b { (a, b) } else { (b, a) };
    if small + large < 170.0 {
        (libm::tgamma(small) * libm::tgamma(large) / libm::tgamma(small + large)).ln()
    } else {
        libm::lgamma(small) + ln_gamma_ratio(large, small)
    }
}

/// `ln Gamma(x) - ln Gamma(x + a)` for `x >= 80`, written so that the large
/// `x ln x` terms cancel analytically instead of in floating point.
fn ln_gamma_ratio(x: f64, a: f64) -> f64 {
    fn correction(x: f64) -> f64 {
        let x2 = x * x;
        (1.0 / 12.0 - (1.0 / 360.0 - (1.0 / 1260.0 - 1.0 / (1680.0 * x2)) / x2) / x2) / x
    }
    let y = x + a;
    -(x - 0.5) * (a / x).ln_1p() - a * y.ln() + a + correction(x) - correction(y)
}

fn check_exponents(alpha: f64, beta: f64, n: usize) -> Result<()> {
    if !(alpha > -1.0) || !(beta > -1.0) || !alpha.is_finite() || !beta.is_finite() {
        return Err(Error::domain(format!("Jacobi exponents must exceed -1, got alpha = {alpha}, beta = {beta}")));
    }
    if n == 0 {
        return Err(Error::domain("quadrature rule needs at least one node"));
    }
    Ok(())
}

/// Gauss–Jacobi rule on `[-1, 1]` for the weight `(1 - x)^alpha (1 + x)^beta`.
pub fn gauss_jacobi(alpha: f64, beta: f64, n: usize) -> Result<QuadratureRule> {
    check_exponents(alpha, beta, n)?;
    let (nodes, first) = golub_welsch(alpha, beta, n)?;
    let ln_moment = (alpha + beta + 1.0) * std::f64::consts::LN_2 + ln_beta(alpha + 1.0, beta + 1.0);
    let moment = ln_moment.exp();
    Ok(QuadratureRule {
        alpha,
        beta,
        nodes,
        weights: first.iter().map(|v| moment * v).collect(),
        interval: Interval::Symmetric,
    })
}

/// Gauss–Jacobi rule on `[0, 1]` for the weight `(1 - t)^alpha t^beta`.
///
/// Built directly rather than through [`QuadratureRule::shift_to_unit`] so
/// that large exponents (up to ~1e4) never form `2^(alpha + beta + 1)`.
pub fn unit_gauss_jacobi(alpha: f64, beta: f64, n: usize) -> Result<QuadratureRule> {
    check_exponents(alpha, beta, n)?;
    let (nodes, first) = golub_welsch(alpha, beta, n)?;
    let moment = ln_beta(alpha + 1.0, beta + 1.0).exp();
    Ok(QuadratureRule {
        alpha,
        beta,
        nodes: nodes.iter().map(|x| 0.5 * (x + 1.0)).collect(),
        weights: first.iter().map(|v| moment * v).collect(),
        interval: Interval::Unit,
    })
}

type CacheKey = (i64, i64, usize);

fn cache() -> &'static RwLock<HashMap<CacheKey, Arc<QuadratureRule>>> {
    static CACHE: OnceLock<RwLock<HashMap<CacheKey, Arc<QuadratureRule>>>> = OnceLock::new();
    CACHE.get_or_init(|| RwLock::new(HashMap::new()))
}

fn cache_key(alpha: f64, beta: f64, n: usize) -> CacheKey {
    ((alpha / CACHE_RESOLUTION).round() as i64, (beta / CACHE_RESOLUTION).round() as i64, n)
}

/// Cached [`unit_gauss_jacobi`]. Keys are `(alpha, beta, n)` rounded at 1e-14.
///
/// The rule is built from the rounded exponents, so it depends on the key
/// alone and never on which nearby exponent first populated the entry; runs
/// stay bit-reproducible whatever the cache history. Training generates rules
/// for a fresh `lambda` on every step, so the cache is flushed whenever it
/// grows past a fixed capacity.
pub fn cached_unit_rule(alpha: f64, beta: f64, n: usize) -> Result<Arc<QuadratureRule>> {
    check_exponents(alpha, beta, n)?;
    let key = cache_key(alpha, beta, n);
    if let Some(rule) = cache().read().expect("quadrature cache poisoned").get(&key) {
        return Ok(Arc::clone(rule));
    }
    // An exponent within half a step above -1 rounds onto -1; use the next step up.
    let unkey = |k: i64| match k as f64 * CACHE_RESOLUTION {
        v if v <= -1.0 => (k + 1) as f64 * CACHE_RESOLUTION,
        v => v,
    };
    let rule = Arc::new(unit_gauss_jacobi(unkey(key.0), unkey(key.1), n)?);
    let mut map = cache().write().expect("quadrature cache poisoned");
    if map.len() >= CACHE_CAPACITY {
        map.clear();
    }
    Ok(Arc::clone(map.entry(key).or_insert(rule)))
}

/// Nodes on `[-1, 1]` (ascending) and squared first eigenvector components.
fn golub_welsch(alpha: f64, beta: f64, n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let ab = alpha + beta;
    let mut diag = vec![0.0; n];
    let mut off = vec![0.0; n];
    diag[0] = (beta - alpha) / (ab + 2.0);
    for k in 1..n {
        let kf = k as f64;
        let s = 2.0 * kf + ab;
        diag[k] = (beta * beta - alpha * alpha) / (s * (s + 2.0));
        let b2 = if k == 1 {
            // (k + alpha + beta) cancels against (2k + alpha + beta - 1).
            4.0 * (1.0 + alpha) * (1.0 + beta) / ((2.0 + ab) * (2.0 + ab) * (3.0 + ab))
        } else {
            4.0 * kf * (kf + alpha) * (kf + beta) * (kf + ab) / (s * s * (s + 1.0) * (s - 1.0))
        };
        off[k - 1] = b2.sqrt();
    }
    let mut first = vec![0.0; n];
    first[0] = 1.0;
    tridiagonal_ql(&mut diag, &mut off, &mut first)?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| diag[i].total_cmp(&diag[j]));
    let nodes = order.iter().map(|&i| diag[i]).collect();
    let weights = order.iter().map(|&i| first[i] * first[i]).collect();
    Ok((nodes, weights))
}

/// Implicit QL with Wilkinson-type shifts on a symmetric tridiagonal matrix.
///
/// `diag` is overwritten with the eigenvalues; `off[k]` couples `k` and `k+1`
/// and is destroyed. `z` holds `z.len() / n` rows of the accumulated
/// eigenvector matrix, row-major: start from the identity for full
/// eigenvectors, or from the first unit row for first components only.
pub(crate) fn tridiagonal_ql(diag: &mut [f64], off: &mut [f64], z: &mut [f64]) -> Result<()> {
    let n = diag.len();
    debug_assert_eq!(z.len() % n, 0);
    if n == 1 {
        return Ok(());
    }
    off[n - 1] = 0.0;
    for l in 0..n {
        let mut iterations = 0;
        loop {
            let mut m = l;
            while m < n - 1 {
                let dd = diag[m].abs() + diag[m + 1].abs();
                if off[m].abs() <= QL_TOLERANCE * dd || off[m].abs() < f64::MIN_POSITIVE {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iterations += 1;
            if iterations > QL_MAX_ITERATIONS {
                return Err(Error::numerical(format!(
                    "tridiagonal QL did not converge for eigenvalue {l} within {QL_MAX_ITERATIONS} iterations"
                )));
            }
            let mut g = (diag[l + 1] - diag[l]) / (2.0 * off[l]);
            let mut r = g.hypot(1.0);
            g = diag[m] - diag[l] + off[l] / (g + r.copysign(g));
            let mut s = 1.0;
            let mut c = 1.0;
            let mut p = 0.0;
            let mut i = m;
            let mut underflow = false;
            while i > l {
                i -= 1;
                let f = s * off[i];
                let b = c * off[i];
                r = f.hypot(g);
                off[i + 1] = r;
                if r == 0.0 {
                    diag[i + 1] -= p;
                    off[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = diag[i + 1] - p;
                r = (diag[i] - g) * s + 2.0 * c * b;
                p = s * r;
                diag[i + 1] = g + p;
                g = c * r - b;
                for row in z.chunks_exact_mut(n) {
                    let f = row[i + 1];
                    row[i + 1] = s * row[i] + c * f;
                    row[i] = c * row[i] - s * f;
                }
            }
            if underflow {
                continue;
            }
            diag[l] -= p;
            off[l] = g;
            off[m] = 0.0;
        }
    }
    Ok(())
}
