//! Jacobi, Müntz–Jacobi and Legendre-difference basis functions.

use crate::quadrature::unit_gauss_jacobi;
use crate::{Error, Result};

/// Jacobi index pair. Either exponent may equal `-1` (the generalized cases).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JacobiIndex {
    pub alpha: f64,
    pub beta: f64,
}

impl JacobiIndex {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha >= -1.0) || !(beta >= -1.0) || !alpha.is_finite() || !beta.is_finite() {
            return Err(Error::domain(format!("Jacobi index must satisfy alpha, beta >= -1, got ({alpha}, {beta})")));
        }
        Ok(Self { alpha, beta })
    }

    /// Degree offset `l`: the number of generalized (`-1`) exponents.
    pub fn offset(&self) -> usize {
        usize::from(self.alpha == -1.0) + usize::from(self.beta == -1.0)
    }
}

/// `P_n^{(alpha, beta)}(x)` by the three-term recurrence.
pub fn jacobi_eval(alpha: f64, beta: f64, n: usize, x: f64) -> Result<f64> {
    if !(alpha > -1.0) || !(beta > -1.0) {
        return Err(Error::domain(format!(
            "classical Jacobi polynomials need alpha, beta > -1, got ({alpha}, {beta})"
        )));
    }
    let mut values = vec![0.0; n + 1];
    jacobi_all(alpha, beta, x, &mut values);
    Ok(values[n])
}

/// Fill `out[k] = P_k^{(alpha, beta)}(x)` for `k = 0..out.len()`. No checks.
pub(crate) fn jacobi_all(alpha: f64, beta: f64, x: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    out[0] = 1.0;
    if out.len() == 1 {
        return;
    }
    let ab = alpha + beta;
    out[1] = (alpha + 1.0) + (ab + 2.0) * 0.5 * (x - 1.0);
    for n in 1..out.len() - 1 {
        let nf = n as f64;
        let s = 2.0 * nf + ab;
        let a1 = 2.0 * (nf + 1.0) * (nf + ab + 1.0) * s;
        let a2 = (s + 1.0) * (alpha * alpha - beta * beta);
        let a3 = s * (s + 1.0) * (s + 2.0);
        let a4 = 2.0 * (nf + alpha) * (nf + beta) * (s + 2.0);
        out[n + 1] = ((a2 + a3 * x) * out[n] - a4 * out[n - 1]) / a1;
    }
}

/// Legendre polynomials `L_0..L_{out.len()-1}` at `x`.
pub(crate) fn legendre_all(x: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    out[0] = 1.0;
    if out.len() > 1 {
        out[1] = x;
    }
    for n in 1..out.len().saturating_sub(1) {
        let nf = n as f64;
        out[n + 1] = ((2.0 * nf + 1.0) * x * out[n] - nf * out[n - 1]) / (nf + 1.0);
    }
}

/// The Müntz–Jacobi family `{J^{alpha,beta,lambda}_{n+l}}`, `n = 0..=n_max`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MuntzBasis {
    pub index: JacobiIndex,
    pub lambda: f64,
    pub n_max: usize,
}

impl MuntzBasis {
    pub fn new(alpha: f64, beta: f64, lambda: f64, n_max: usize) -> Result<Self> {
        let index = JacobiIndex::new(alpha, beta)?;
        if !(lambda > 0.0 && lambda <= 1.0) {
            return Err(Error::domain(format!("Müntz parameter lambda must lie in (0, 1], got {lambda}")));
        }
        Ok(Self { index, lambda, n_max })
    }

    /// The temporal trial basis of the space-time solver: `alpha` given, `beta = -1`.
    pub fn temporal(alpha: f64, lambda: f64, n_max: usize) -> Result<Self> {
        Self::new(alpha, -1.0, lambda, n_max)
    }

    pub fn offset(&self) -> usize {
        self.index.offset()
    }

    pub fn len(&self) -> usize {
        self.n_max + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// `t^lambda`, with the `t = 0` limit taken explicitly.
    #[inline]
    pub fn mapped(&self, t: f64) -> f64 {
        if t <= 0.0 {
            0.0
        } else if self.lambda == 1.0 {
            t
        } else {
            t.powf(self.lambda)
        }
    }

    /// Exponents of the classical Jacobi factor and the per-mode prefactor
    /// `(n + a + 1) / (n + 1)` of the generalized branches.
    fn branch(&self) -> Branch {
        let JacobiIndex { alpha, beta } = self.index;
        match (alpha == -1.0, beta == -1.0) {
            (false, false) => Branch::Classical { alpha, beta },
            (false, true) => Branch::VanishAtZero { alpha },
            (true, false) => Branch::VanishAtOne { beta },
            (true, true) => Branch::VanishBoth,
        }
    }

    /// `J^{alpha,beta,lambda}_{n+l}(t)`.
    pub fn eval(&self, n: usize, t: f64) -> f64 {
        let mut values = vec![0.0; n + 1];
        self.eval_with_s(self.mapped(t), &mut values);
        values[n]
    }

    /// All members `n = 0..out.len()` at `t`.
    pub fn eval_all(&self, t: f64, out: &mut [f64]) {
        self.eval_with_s(self.mapped(t), out);
    }

    /// All members given the mapped coordinate `s = t^lambda`.
    pub(crate) fn eval_with_s(&self, s: f64, out: &mut [f64]) {
        let x = 2.0 * s - 1.0;
        match self.branch() {
            Branch::Classical { alpha, beta } => jacobi_all(alpha, beta, x, out),
            Branch::VanishAtZero { alpha } => {
                jacobi_all(alpha, 1.0, x, out);
                for (n, v) in out.iter_mut().enumerate() {
                    let nf = n as f64;
                    *v *= (nf + alpha + 1.0) / (nf + 1.0) * s;
                }
            }
            Branch::VanishAtOne { beta } => {
                jacobi_all(1.0, beta, x, out);
                for (n, v) in out.iter_mut().enumerate() {
                    let nf = n as f64;
                    *v *= (nf + beta + 1.0) / (nf + 1.0) * (1.0 - s);
                }
            }
            Branch::VanishBoth => {
                jacobi_all(1.0, 1.0, x, out);
                for v in out.iter_mut() {
                    *v *= -(1.0 - s) * s;
                }
            }
        }
    }

    /// `gamma^{alpha,beta}_{n+l}`, the squared weighted norm of member `n`.
    pub fn norm(&self, n: usize) -> Result<f64> {
        let JacobiIndex { alpha, beta } = self.index;
        let k = (n + self.offset()) as f64;
        let args = [k + alpha + 1.0, k + beta + 1.0, k + 1.0];
        // For k = 0 the factor (2k + a + b + 1) Gamma(k + a + b + 1) is Gamma(a + b + 2).
        let (denominator_arg, linear) =
            if k == 0.0 { (alpha + beta + 2.0, 1.0) } else { (k + alpha + beta + 1.0, 2.0 * k + alpha + beta + 1.0) };
        if args.iter().chain(std::iter::once(&denominator_arg)).any(|a| *a <= 0.0) || linear <= 0.0 {
            return Err(Error::domain(format!(
                "norm of mode {n} needs positive Gamma arguments (alpha = {alpha}, beta = {beta})"
            )));
        }
        let ln = libm::lgamma(args[0]) + libm::lgamma(args[1]) - libm::lgamma(args[2]) - libm::lgamma(denominator_arg);
        Ok(ln.exp() / linear)
    }

    /// Exponents `(a, b)` of the `[0, 1]` Gauss–Jacobi weight `(1-s)^a s^b` that
    /// absorbs `chi` together with one endpoint factor of each generalized branch.
    fn absorbed_weight(&self) -> (f64, f64, bool, bool) {
        let JacobiIndex { alpha, beta } = self.index;
        let at_one = alpha == -1.0;
        let at_zero = beta == -1.0;
        (if at_one { 0.0 } else { alpha }, if at_zero { 0.0 } else { beta }, at_one, at_zero)
    }
}

#[derive(Debug, Clone, Copy)]
enum Branch {
    Classical { alpha: f64, beta: f64 },
    VanishAtZero { alpha: f64 },
    VanishAtOne { beta: f64 },
    VanishBoth,
}

pub fn muntz_jacobi_eval(basis: &MuntzBasis, n: usize, t: f64) -> f64 {
    basis.eval(n, t)
}

pub fn muntz_norm(basis: &MuntzBasis, n: usize) -> Result<f64> {
    basis.norm(n)
}

/// The Legendre-difference basis `phi_m = c_m (L_m - L_{m+2})`, `m = 0..=M-2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpatialBasis {
    pub resolution: usize,
}

impl SpatialBasis {
    pub fn new(resolution: usize) -> Result<Self> {
        if resolution < 3 {
            return Err(Error::domain(format!("spatial resolution M must be at least 3, got {resolution}")));
        }
        Ok(Self { resolution })
    }

    /// Number of basis functions, `M - 1`.
    pub fn len(&self) -> usize {
        self.resolution - 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn normalization(m: usize) -> f64 {
        1.0 / ((4 * m + 6) as f64).sqrt()
    }

    fn check(&self, m: usize) -> Result<()> {
        if m >= self.len() {
            return Err(Error::domain(format!("spatial basis index {m} out of range 0..={}", self.len() - 1)));
        }
        Ok(())
    }

    pub fn eval(&self, m: usize, x: f64) -> Result<f64> {
        self.check(m)?;
        let mut l = vec![0.0; m + 3];
        legendre_all(x, &mut l);
        Ok(Self::normalization(m) * (l[m] - l[m + 2]))
    }

    /// `phi_m'(x) = -c_m (2m + 3) L_{m+1}(x)`, from `L'_{m+2} - L'_m = (2m+3) L_{m+1}`.
    pub fn deriv(&self, m: usize, x: f64) -> Result<f64> {
        self.check(m)?;
        let mut l = vec![0.0; m + 2];
        legendre_all(x, &mut l);
        Ok(-Self::normalization(m) * (2 * m + 3) as f64 * l[m + 1])
    }

    /// All basis values at `x` into `values` (length `M - 1`).
    pub fn eval_all(&self, x: f64, values: &mut [f64]) {
        let mut l = vec![0.0; self.len() + 2];
        legendre_all(x, &mut l);
        for (m, v) in values.iter_mut().enumerate().take(self.len()) {
            *v = Self::normalization(m) * (l[m] - l[m + 2]);
        }
    }

    /// All basis derivatives at `x` into `derivs` (length `M - 1`).
    pub fn deriv_all(&self, x: f64, derivs: &mut [f64]) {
        let mut l = vec![0.0; self.len() + 1];
        legendre_all(x, &mut l);
        for (m, d) in derivs.iter_mut().enumerate().take(self.len()) {
            *d = -Self::normalization(m) * (2 * m + 3) as f64 * l[m + 1];
        }
    }
}

pub fn spatial_basis_eval(basis: &SpatialBasis, m: usize, x: f64) -> Result<f64> {
    basis.eval(m, x)
}

pub fn spatial_basis_deriv(basis: &SpatialBasis, m: usize, x: f64) -> Result<f64> {
    basis.deriv(m, x)
}

/// Result of a weighted L² projection onto a Müntz–Jacobi family.
#[derive(Debug, Clone)]
pub struct Projection {
    pub coefficients: Vec<f64>,
    /// Discrete `chi`-weighted L² norm of `f - f_N` over the quadrature nodes.
    pub error: f64,
}

/// Project `f` onto `span{J_{n+l} : n = 0..=N}` in the `chi^{alpha,beta,lambda}` inner product.
///
/// Integrals are taken in `s = t^lambda`, where `chi dt` becomes the Jacobi
/// weight `(1 - s)^alpha s^beta ds`; the generalized branches contribute an
/// endpoint factor that is folded into the rule so no node sees a singular weight.
pub fn muntz_project<F: Fn(f64) -> f64>(f: F, basis: &MuntzBasis, n_quad: usize) -> Result<Projection> {
    let (wa, wb, at_one, at_zero) = basis.absorbed_weight();
    let rule = unit_gauss_jacobi(wa, wb, n_quad)?;
    let size = basis.len();
    let inv_lambda = 1.0 / basis.lambda;

    let mut values = vec![0.0; size];
    let mut table = Vec::with_capacity(rule.len());
    let mut f_values = Vec::with_capacity(rule.len());
    let mut coefficients = vec![0.0; size];
    for (&s, &w) in rule.nodes.iter().zip(&rule.weights) {
        basis.eval_with_s(s, &mut values);
        let absorbed = endpoint_factor(s, at_one, at_zero);
        let fv = f(s.powf(inv_lambda));
        for (c, v) in coefficients.iter_mut().zip(&values) {
            *c += w * fv * v / absorbed;
        }
        table.push(values.clone());
        f_values.push(fv);
    }
    for (n, c) in coefficients.iter_mut().enumerate() {
        *c /= basis.norm(n)?;
    }

    let mut error = 0.0;
    for ((row, fv), (&s, &w)) in table.iter().zip(&f_values).zip(rule.nodes.iter().zip(&rule.weights)) {
        let approx: f64 = row.iter().zip(&coefficients).map(|(v, c)| v * c).sum();
        let diff = fv - approx;
        error += w * diff * diff / endpoint_factor(s, at_one, at_zero);
    }
    Ok(Projection { coefficients, error: error.sqrt() })
}

fn endpoint_factor(s: f64, at_one: bool, at_zero: bool) -> f64 {
    let mut factor = 1.0;
    if at_one {
        factor *= 1.0 - s;
    }
    if at_zero {
        factor *= s;
    }
    factor
}
