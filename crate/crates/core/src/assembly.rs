//! Discrete operators of the space-time Galerkin method.
//!
//! With trial functions `phi_m(x) J_n(t)` (`J_n = J^{alpha,-1,lambda}_{n+1}`)
//! the weak form becomes a matrix equation in the coefficient matrix `U`
//! (rows: temporal modes, columns: spatial modes):
//!
//! ```text
//! St U Mx + kappa Mt U Sx + rho Mt U Cx^T = F
//! ```
//!
//! where `Cx[j][k] = (phi_k', phi_j)`. The spatial operators have closed
//! forms. The temporal ones are evaluated with Gauss–Jacobi rules in the
//! mapped variable `s = t^lambda`, which turns every weakly singular
//! integrand into a polynomial against a Jacobi weight.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::basis::{jacobi_all, MuntzBasis, SpatialBasis};
use crate::quadrature::cached_unit_rule;
use crate::{Error, Result};

/// Smallest Müntz parameter the assembly accepts.
pub const MIN_LAMBDA: f64 = 0.01;
/// Largest outer Jacobi exponent `(1 - mu) / lambda + 1` the stiffness assembly accepts.
pub const MAX_OUTER_EXPONENT: f64 = 1e4;

fn check_lambda(lambda: f64) -> Result<()> {
    if !(MIN_LAMBDA..=1.0).contains(&lambda) {
        return Err(Error::domain(format!(
            "lambda must lie in [{MIN_LAMBDA}, 1] (smaller values are too ill-conditioned), got {lambda}"
        )));
    }
    Ok(())
}

fn check_mu(mu: f64) -> Result<()> {
    if !(mu > 0.0 && mu < 1.0) {
        return Err(Error::domain(format!("fractional order mu must lie in (0, 1), got {mu}")));
    }
    Ok(())
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > -1.0) || !alpha.is_finite() {
        return Err(Error::domain(format!("Jacobi index alpha must exceed -1, got {alpha}")));
    }
    Ok(())
}

/// Closed-form spatial matrices for the Legendre-difference basis.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialOperators {
    pub resolution: usize,
    /// `(phi_k', phi_j')`: the identity.
    pub sx: DMatrix<f64>,
    /// `(phi_k, phi_j)`: symmetric pentadiagonal.
    pub mx: DMatrix<f64>,
    /// `(phi_k', phi_j)`: antisymmetric tridiagonal.
    pub cx: DMatrix<f64>,
}

impl SpatialOperators {
    pub fn assemble(resolution: usize) -> Result<Self> {
        let basis = SpatialBasis::new(resolution)?;
        let n = basis.len();
        let c = SpatialBasis::normalization;
        let sx = DMatrix::identity(n, n);
        let mut mx = DMatrix::zeros(n, n);
        let mut cx = DMatrix::zeros(n, n);
        for j in 0..n {
            let jf = j as f64;
            mx[(j, j)] = c(j) * c(j) * (2.0 / (2.0 * jf + 1.0) + 2.0 / (2.0 * jf + 5.0));
            if j + 2 < n {
                let v = -c(j) * c(j + 2) * 2.0 / (2.0 * jf + 5.0);
                mx[(j, j + 2)] = v;
                mx[(j + 2, j)] = v;
            }
            if j + 1 < n {
                let v = 2.0 * c(j) * c(j + 1);
                cx[(j, j + 1)] = v;
                cx[(j + 1, j)] = -v;
            }
        }
        Ok(Self { resolution, sx, mx, cx })
    }
}

pub fn assemble_spatial(resolution: usize) -> Result<SpatialOperators> {
    SpatialOperators::assemble(resolution)
}

/// Default inner quadrature size for the Caputo stiffness matrix.
pub fn default_nhat(n_max: usize) -> usize {
    2 * n_max + 20
}

/// Temporal mass and stiffness matrices on the reference interval `[0, 1]`.
/// Row index is the test mode `q`, column index the trial mode `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct TemporalOperators {
    pub n_max: usize,
    pub mu: f64,
    pub lambda: f64,
    pub alpha: f64,
    pub nhat: usize,
    /// `(D^mu J_n, J_q)`.
    pub st: DMatrix<f64>,
    /// `(J_n, J_q)`.
    pub mt: DMatrix<f64>,
}

impl TemporalOperators {
    pub fn assemble(n_max: usize, alpha: f64, lambda: f64, mu: f64, nhat: Option<usize>) -> Result<Self> {
        let nhat = nhat.unwrap_or_else(|| default_nhat(n_max));
        Ok(Self {
            n_max,
            mu,
            lambda,
            alpha,
            nhat,
            st: assemble_temporal_stiffness(n_max, alpha, lambda, mu, nhat)?,
            mt: assemble_temporal_mass(n_max, alpha, lambda)?,
        })
    }
}

/// `(n + alpha + 1) / (n + 1)`, the prefactor of `J^{alpha,-1,lambda}_{n+1}`.
fn mode_scale(alpha: f64, n: usize) -> f64 {
    (n as f64 + alpha + 1.0) / (n as f64 + 1.0)
}

/// Temporal mass matrix `m_qn = (J_n, J_q)`.
///
/// Under `s = t^lambda`, `J_n J_q dt = a_n a_q / lambda * P_n P_q s^{1 + 1/lambda} ds`
/// with `P_n = P_n^{alpha,1}(2s - 1)`; an `(N+1)`-point rule for that weight is exact.
pub fn assemble_temporal_mass(n_max: usize, alpha: f64, lambda: f64) -> Result<DMatrix<f64>> {
    check_alpha(alpha)?;
    check_lambda(lambda)?;
    let size = n_max + 1;
    let rule = cached_unit_rule(0.0, 1.0 + 1.0 / lambda, size)?;
    let mut values = vec![0.0; size];
    let mut mt = DMatrix::zeros(size, size);
    for (&s, &w) in rule.nodes.iter().zip(&rule.weights) {
        jacobi_all(alpha, 1.0, 2.0 * s - 1.0, &mut values);
        for n in 0..size {
            for q in 0..size {
                mt[(q, n)] += w * values[q] * values[n];
            }
        }
    }
    for n in 0..size {
        for q in 0..size {
            mt[(q, n)] *= mode_scale(alpha, n) * mode_scale(alpha, q) / lambda;
        }
    }
    let symmetric = (&mt + mt.transpose()) * 0.5;
    Ok(symmetric)
}

/// Temporal stiffness matrix `s_qn = (D^mu J_n, J_q)` (Caputo derivative).
///
/// Writing `tau^lambda = s z` inside the Caputo integral gives
///
/// ```text
/// D^mu J_n(t) = (n+alpha+1) s t^{-mu} / Gamma(1-mu)
///               * int_0^1 (1-z)^{-mu} K(z) P_n^{alpha+1,0}(2 s z - 1) dz,
/// K(z) = ((1 - z^{1/lambda}) / (1 - z))^{-mu},
/// ```
///
/// so the inner integral uses the Gauss–Jacobi rule for `(1-z)^{-mu}` with
/// `nhat + 1` points, and the outer pairing with `J_q` is a polynomial in
/// `s` against `s^{(1-mu)/lambda + 1}`, integrated exactly with `N + 1` points.
pub fn assemble_temporal_stiffness(
    n_max: usize,
    alpha: f64,
    lambda: f64,
    mu: f64,
    nhat: usize,
) -> Result<DMatrix<f64>> {
    check_alpha(alpha)?;
    check_mu(mu)?;
    check_lambda(lambda)?;
    if nhat < n_max {
        return Err(Error::domain(format!("inner quadrature size {nhat} must be at least N = {n_max}")));
    }
    let outer_exponent = (1.0 - mu) / lambda + 1.0;
    if outer_exponent > MAX_OUTER_EXPONENT {
        return Err(Error::Conditioning(format!(
            "outer Jacobi exponent {outer_exponent:.3e} exceeds {MAX_OUTER_EXPONENT:e}; lambda = {lambda} is too small"
        )));
    }
    let size = n_max + 1;
    let outer = cached_unit_rule(0.0, outer_exponent, size)?;
    let inner = cached_unit_rule(-mu, 0.0, nhat + 1)?;
    let kernel: Vec<f64> = inner
        .nodes
        .iter()
        .zip(&inner.weights)
        .map(|(&z, &w)| {
            if lambda == 1.0 {
                w
            } else {
                let ratio = -(z.ln() / lambda).exp_m1() / (1.0 - z);
                w * ratio.powf(-mu)
            }
        })
        .collect();

    let mut outer_values = vec![0.0; size];
    let mut inner_values = vec![0.0; size];
    let mut inner_sum = vec![0.0; size];
    let mut st = DMatrix::zeros(size, size);
    for (&zeta, &omega) in outer.nodes.iter().zip(&outer.weights) {
        inner_sum.iter_mut().for_each(|v| *v = 0.0);
        for (&z, &k) in inner.nodes.iter().zip(&kernel) {
            jacobi_all(alpha + 1.0, 0.0, 2.0 * zeta * z - 1.0, &mut inner_values);
            for (acc, v) in inner_sum.iter_mut().zip(&inner_values) {
                *acc += k * v;
            }
        }
        jacobi_all(alpha, 1.0, 2.0 * zeta - 1.0, &mut outer_values);
        for n in 0..size {
            for q in 0..size {
                st[(q, n)] += omega * outer_values[q] * inner_sum[n];
            }
        }
    }
    let gamma = libm::tgamma(1.0 - mu);
    for n in 0..size {
        for q in 0..size {
            let (nf, qf) = (n as f64, q as f64);
            st[(q, n)] *= (nf + alpha + 1.0) * (qf + alpha + 1.0) / (lambda * gamma * (qf + 1.0));
        }
    }
    Ok(st)
}

/// Caputo power rule: `D^mu t^nu = Gamma(nu+1) / Gamma(nu+1-mu) t^{nu-mu}`.
pub fn caputo_power(mu: f64, nu: f64, t: f64) -> Result<f64> {
    check_mu(mu)?;
    if !(nu > 0.0) {
        return Err(Error::domain(format!("power nu must be positive, got {nu}")));
    }
    if nu + 1.0 - mu <= 0.0 {
        return Err(Error::domain(format!("Gamma argument nu + 1 - mu = {} is not positive", nu + 1.0 - mu)));
    }
    if t < 0.0 {
        return Err(Error::domain(format!("time must be non-negative, got {t}")));
    }
    Ok(caputo_power_coefficient(mu, nu) * t.powf(nu - mu))
}

fn caputo_power_coefficient(mu: f64, nu: f64) -> f64 {
    (libm::lgamma(nu + 1.0) - libm::lgamma(nu + 1.0 - mu)).exp()
}

/// `u_e = t^nu sin(pi x)` in 1D or `t^nu sin(pi x) sin(pi y)` in 2D, with the
/// forcing obtained by substituting `u_e` into
/// `D^mu u - kappa Laplace(u) + rho (sum of first partials of u) = f`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ManufacturedProblem {
    pub mu: f64,
    pub nu: f64,
    pub kappa: f64,
    pub rho: f64,
    pub dimension: usize,
    pub t_end: f64,
}

impl ManufacturedProblem {
    pub fn new(mu: f64, nu: f64, kappa: f64, rho: f64, dimension: usize, t_end: f64) -> Result<Self> {
        let problem = Self { mu, nu, kappa, rho, dimension, t_end };
        problem.validate()?;
        Ok(problem)
    }

    pub fn validate(&self) -> Result<()> {
        check_mu(self.mu)?;
        if !(self.nu > 0.0) || !self.nu.is_finite() {
            return Err(Error::domain(format!("exact-solution power nu must be positive, got {}", self.nu)));
        }
        if !(self.kappa > 0.0) || !self.kappa.is_finite() {
            return Err(Error::domain(format!("diffusion coefficient kappa must be positive, got {}", self.kappa)));
        }
        if !(self.rho >= 0.0) || !self.rho.is_finite() {
            return Err(Error::domain(format!("convection coefficient rho must be non-negative, got {}", self.rho)));
        }
        if !(self.t_end > 0.0) || !self.t_end.is_finite() {
            return Err(Error::domain(format!("final time must be positive, got {}", self.t_end)));
        }
        if self.dimension != 1 && self.dimension != 2 {
            return Err(Error::domain(format!("dimension must be 1 or 2, got {}", self.dimension)));
        }
        Ok(())
    }

    pub fn exact_1d(&self, x: f64, t: f64) -> f64 {
        t.powf(self.nu) * (PI * x).sin()
    }

    pub fn exact_2d(&self, x: f64, y: f64, t: f64) -> f64 {
        t.powf(self.nu) * (PI * x).sin() * (PI * y).sin()
    }

    pub fn forcing_1d(&self, x: f64, t: f64) -> f64 {
        let tn = t.powf(self.nu);
        let caputo = caputo_power_coefficient(self.mu, self.nu) * t.powf(self.nu - self.mu);
        (caputo + self.kappa * PI * PI * tn) * (PI * x).sin() + self.rho * PI * tn * (PI * x).cos()
    }

    pub fn forcing_2d(&self, x: f64, y: f64, t: f64) -> f64 {
        let tn = t.powf(self.nu);
        let caputo = caputo_power_coefficient(self.mu, self.nu) * t.powf(self.nu - self.mu);
        let (sx, cx) = (PI * x).sin_cos();
        let (sy, cy) = (PI * y).sin_cos();
        (caputo + 2.0 * self.kappa * PI * PI * tn) * sx * sy + self.rho * PI * tn * (cx * sy + sx * cy)
    }

    /// The forcing as a sum of `c t^p h_1(x) [h_2(y)]` terms.
    pub fn terms(&self) -> Vec<SeparableTerm> {
        let sin: Profile = Arc::new(|x: f64| (PI * x).sin());
        let cos: Profile = Arc::new(|x: f64| (PI * x).cos());
        let caputo = caputo_power_coefficient(self.mu, self.nu);
        let p_caputo = self.nu - self.mu;
        let d = self.dimension as f64;
        let mut terms = Vec::new();
        match self.dimension {
            1 => {
                terms.push(SeparableTerm::new(caputo, p_caputo, vec![sin.clone()]));
                terms.push(SeparableTerm::new(self.kappa * PI * PI, self.nu, vec![sin.clone()]));
                if self.rho != 0.0 {
                    terms.push(SeparableTerm::new(self.rho * PI, self.nu, vec![cos]));
                }
            }
            _ => {
                terms.push(SeparableTerm::new(caputo, p_caputo, vec![sin.clone(), sin.clone()]));
                terms.push(SeparableTerm::new(d * self.kappa * PI * PI, self.nu, vec![sin.clone(), sin.clone()]));
                if self.rho != 0.0 {
                    terms.push(SeparableTerm::new(self.rho * PI, self.nu, vec![cos.clone(), sin.clone()]));
                    terms.push(SeparableTerm::new(self.rho * PI, self.nu, vec![sin, cos]));
                }
            }
        }
        terms
    }
}

/// `manufactured_forcing(problem, &[x], t)` or `(problem, &[x, y], t)`.
pub fn manufactured_forcing(problem: &ManufacturedProblem, point: &[f64], t: f64) -> Result<f64> {
    match (problem.dimension, point) {
        (1, [x]) => Ok(problem.forcing_1d(*x, t)),
        (2, [x, y]) => Ok(problem.forcing_2d(*x, *y, t)),
        _ => Err(Error::Structural(format!(
            "a {}D problem cannot be evaluated at a {}-coordinate point",
            problem.dimension,
            point.len()
        ))),
    }
}

/// A spatial profile in one coordinate.
pub type Profile = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// `coefficient * t^time_power * prod_d profiles[d](x_d)`.
#[derive(Clone)]
pub struct SeparableTerm {
    pub coefficient: f64,
    pub time_power: f64,
    pub profiles: Vec<Profile>,
}

impl SeparableTerm {
    pub fn new(coefficient: f64, time_power: f64, profiles: Vec<Profile>) -> Self {
        Self { coefficient, time_power, profiles }
    }
}

impl fmt::Debug for SeparableTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SeparableTerm")
            .field("coefficient", &self.coefficient)
            .field("time_power", &self.time_power)
            .field("dimension", &self.profiles.len())
            .finish()
    }
}

/// Right-hand side of the equation, in physical time `t`.
#[derive(Clone)]
pub enum Forcing {
    Zero,
    /// Sum of power-in-time separable terms; the time integrals are exact.
    Separable(Vec<SeparableTerm>),
    /// General `f(x, t)`.
    Field1(Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>),
    /// General `f(x, y, t)`.
    Field2(Arc<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for Forcing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Forcing::Zero => write!(f, "Zero"),
            Forcing::Separable(terms) => f.debug_tuple("Separable").field(terms).finish(),
            Forcing::Field1(_) => write!(f, "Field1(..)"),
            Forcing::Field2(_) => write!(f, "Field2(..)"),
        }
    }
}

impl From<&ManufacturedProblem> for Forcing {
    fn from(problem: &ManufacturedProblem) -> Self {
        Forcing::Separable(problem.terms())
    }
}

impl Forcing {
    pub fn field1<F: Fn(f64, f64) -> f64 + Send + Sync + 'static>(f: F) -> Self {
        Forcing::Field1(Arc::new(f))
    }

    pub fn field2<F: Fn(f64, f64, f64) -> f64 + Send + Sync + 'static>(f: F) -> Self {
        Forcing::Field2(Arc::new(f))
    }

    /// The `sin(pi x) sin(pi t)` forcing with no known exact solution.
    pub fn sin_pi_x_sin_pi_t() -> Self {
        Forcing::field1(|x, t| (PI * x).sin() * (PI * t).sin())
    }
}

/// Quadrature sizes for forcing projections.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ForcingQuadrature {
    /// Gauss–Legendre points per spatial direction.
    pub spatial: usize,
    /// Points of the mapped temporal rule.
    pub temporal: usize,
}

impl ForcingQuadrature {
    pub fn for_resolution(resolution: usize, n_max: usize) -> Self {
        Self { spatial: resolution + 10, temporal: 2 * n_max + 20 }
    }
}

/// Gauss–Legendre rule on `[-1, 1]` (from the cached `[0, 1]` rule).
pub(crate) fn legendre_rule(n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let rule = cached_unit_rule(0.0, 0.0, n)?;
    Ok((rule.nodes.iter().map(|t| 2.0 * t - 1.0).collect(), rule.weights.iter().map(|w| 2.0 * w).collect()))
}

/// `(h, phi_j)` for every spatial mode.
fn spatial_moments(basis: &SpatialBasis, h: &dyn Fn(f64) -> f64, nodes: &[f64], weights: &[f64]) -> Result<Vec<f64>> {
    let mut out = vec![0.0; basis.len()];
    let mut phi = vec![0.0; basis.len()];
    for (&x, &w) in nodes.iter().zip(weights) {
        let v = h(x);
        if !v.is_finite() {
            return Err(Error::numerical(format!("forcing profile is not finite at x = {x}")));
        }
        basis.eval_all(x, &mut phi);
        for (o, p) in out.iter_mut().zip(&phi) {
            *o += w * v * p;
        }
    }
    Ok(out)
}

/// `int_0^1 tau^p J_q(tau) d tau` for every temporal mode, exactly:
/// under `s = tau^lambda` it is `a_q / lambda * int s^{(p+1)/lambda} P_q^{alpha,1}(2s-1) ds`.
pub fn temporal_power_moments(temporal: &MuntzBasis, p: f64, points: usize) -> Result<Vec<f64>> {
    if !(p > -1.0) {
        return Err(Error::domain(format!("time power must exceed -1, got {p}")));
    }
    let size = temporal.len();
    let alpha = temporal.index.alpha;
    let lambda = temporal.lambda;
    let rule = cached_unit_rule(0.0, (p + 1.0) / lambda, points.max(size))?;
    let mut values = vec![0.0; size];
    let mut out = vec![0.0; size];
    for (&s, &w) in rule.nodes.iter().zip(&rule.weights) {
        jacobi_all(alpha, 1.0, 2.0 * s - 1.0, &mut values);
        for (o, v) in out.iter_mut().zip(&values) {
            *o += w * v;
        }
    }
    for (q, o) in out.iter_mut().enumerate() {
        *o *= mode_scale(alpha, q) / lambda;
    }
    Ok(out)
}

/// Mapped temporal rule on `[0, 1]`: nodes `tau_k` and weights such that
/// `sum_k w_kq g(tau_k) ~ int_0^1 g(tau) J_q(tau) d tau`. Returned as
/// `(tau, weights)` with `weights[k * size + q]`.
fn mapped_temporal_rule(temporal: &MuntzBasis, points: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let size = temporal.len();
    let alpha = temporal.index.alpha;
    let lambda = temporal.lambda;
    let rule = cached_unit_rule(0.0, 1.0 / lambda, points)?;
    let mut values = vec![0.0; size];
    let mut weights = Vec::with_capacity(points * size);
    let mut taus = Vec::with_capacity(points);
    for (&s, &w) in rule.nodes.iter().zip(&rule.weights) {
        taus.push(s.powf(1.0 / lambda));
        jacobi_all(alpha, 1.0, 2.0 * s - 1.0, &mut values);
        for (q, v) in values.iter().enumerate() {
            weights.push(w * v * mode_scale(alpha, q) / lambda);
        }
    }
    Ok((taus, weights))
}

/// Forcing matrix `F[q][j] = (f, phi_j J_q)` on the reference interval
/// `tau = t / t_end`. In 2D the column index of mode pair `(k, l)` is
/// `k * (M - 1) + l`.
pub fn assemble_forcing(
    forcing: &Forcing,
    spatial: &SpatialBasis,
    temporal: &MuntzBasis,
    dimension: usize,
    t_end: f64,
    orders: ForcingQuadrature,
) -> Result<DMatrix<f64>> {
    if dimension != 1 && dimension != 2 {
        return Err(Error::domain(format!("dimension must be 1 or 2, got {dimension}")));
    }
    if !(t_end > 0.0) {
        return Err(Error::domain(format!("final time must be positive, got {t_end}")));
    }
    let modes = spatial.len();
    let columns = modes.pow(dimension as u32);
    let size = temporal.len();
    let mut f = DMatrix::zeros(size, columns);
    let (xs, ws) = legendre_rule(orders.spatial)?;
    match forcing {
        Forcing::Zero => {}
        Forcing::Separable(terms) => {
            for term in terms {
                if term.profiles.len() != dimension {
                    return Err(Error::Structural(format!(
                        "separable term has {} spatial profiles for a {dimension}D problem",
                        term.profiles.len()
                    )));
                }
                let time = temporal_power_moments(temporal, term.time_power, orders.temporal)?;
                let scale = term.coefficient * t_end.powf(term.time_power);
                let space: Vec<Vec<f64>> = term
                    .profiles
                    .iter()
                    .map(|h| spatial_moments(spatial, h.as_ref(), &xs, &ws))
                    .collect::<Result<_>>()?;
                for q in 0..size {
                    let tq = scale * time[q];
                    if dimension == 1 {
                        for j in 0..modes {
                            f[(q, j)] += tq * space[0][j];
                        }
                    } else {
                        for k in 0..modes {
                            for l in 0..modes {
                                f[(q, k * modes + l)] += tq * space[0][k] * space[1][l];
                            }
                        }
                    }
                }
            }
        }
        Forcing::Field1(g) => {
            if dimension != 1 {
                return Err(Error::Structural("a 1D forcing field was given for a 2D problem".into()));
            }
            let (taus, tw) = mapped_temporal_rule(temporal, orders.temporal)?;
            let mut phi = DMatrix::zeros(xs.len(), modes);
            let mut row = vec![0.0; modes];
            for (i, &x) in xs.iter().enumerate() {
                spatial.eval_all(x, &mut row);
                for j in 0..modes {
                    phi[(i, j)] = ws[i] * row[j];
                }
            }
            // values[(k, i)] = f(x_i, t_end tau_k)
            let mut values = DMatrix::zeros(taus.len(), xs.len());
            for (k, &tau) in taus.iter().enumerate() {
                for (i, &x) in xs.iter().enumerate() {
                    let v = g(x, t_end * tau);
                    if !v.is_finite() {
                        return Err(Error::numerical(format!(
                            "forcing is not finite at (x, t) = ({x}, {})",
                            t_end * tau
                        )));
                    }
                    values[(k, i)] = v;
                }
            }
            let projected = values * phi;
            for k in 0..taus.len() {
                for q in 0..size {
                    let w = tw[k * size + q];
                    for j in 0..modes {
                        f[(q, j)] += w * projected[(k, j)];
                    }
                }
            }
        }
        Forcing::Field2(g) => {
            if dimension != 2 {
                return Err(Error::Structural("a 2D forcing field was given for a 1D problem".into()));
            }
            let (taus, tw) = mapped_temporal_rule(temporal, orders.temporal)?;
            let mut phi = DMatrix::zeros(xs.len(), modes);
            let mut row = vec![0.0; modes];
            for (i, &x) in xs.iter().enumerate() {
                spatial.eval_all(x, &mut row);
                for j in 0..modes {
                    phi[(i, j)] = ws[i] * row[j];
                }
            }
            let mut grid = DMatrix::zeros(xs.len(), xs.len());
            for (k, &tau) in taus.iter().enumerate() {
                let t = t_end * tau;
                for (i, &x) in xs.iter().enumerate() {
                    for (m, &y) in xs.iter().enumerate() {
                        let v = g(x, y, t);
                        if !v.is_finite() {
                            return Err(Error::numerical(format!(
                                "forcing is not finite at (x, y, t) = ({x}, {y}, {t})"
                            )));
                        }
                        grid[(i, m)] = v;
                    }
                }
                let projected = phi.transpose() * &grid * &phi;
                for q in 0..size {
                    let w = tw[k * size + q];
                    for a in 0..modes {
                        for b in 0..modes {
                            f[(q, a * modes + b)] += w * projected[(a, b)];
                        }
                    }
                }
            }
        }
    }
    Ok(f)
}
