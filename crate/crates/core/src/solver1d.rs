//! The 1D space-time Galerkin solve, solution evaluation and error norms.

use nalgebra::{DMatrix, DVector};

use crate::assembly::{assemble_forcing, Forcing, ForcingQuadrature, SpatialOperators, TemporalOperators, MIN_LAMBDA};
use crate::basis::{MuntzBasis, SpatialBasis};
use crate::linalg::{norm1, DenseLu};
use crate::{Error, Result};

/// Jacobi index `alpha` of the temporal trial basis.
pub const TEMPORAL_ALPHA: f64 = 0.5;
/// Condition estimates above this attach a warning to the solution.
pub const CONDITION_WARN: f64 = 1e12;
/// Condition estimates above this abort the solve unless the residual stays
/// below [`RESIDUAL_FAIL`]. The temporal Müntz basis is nearly dependent in
/// `L^2` for small `lambda`, so large estimates alone do not mean inaccurate
/// solutions.
pub const CONDITION_FAIL: f64 = 1e15;
/// Relative residual that an ill-conditioned solve must still meet.
pub const RESIDUAL_FAIL: f64 = 1e-8;
/// Relative residual above which a solution is tagged with a warning.
pub const RESIDUAL_WARN: f64 = 1e-10;
/// Default number of uniform interior nodes for [`error_norms`].
pub const DEFAULT_ERROR_NODES: usize = 1000;

/// Discretization and coefficients of `D^mu u - kappa u_xx + rho u_x = f`
/// on `(-1, 1) x (0, t_end]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub mu: f64,
    pub kappa: f64,
    pub rho: f64,
    pub lambda: f64,
    /// Spatial resolution `M` (`M - 1` basis functions).
    pub resolution: usize,
    /// Highest temporal mode `N` (`N + 1` basis functions).
    pub n_max: usize,
    pub t_end: f64,
    /// Inner quadrature size of the stiffness assembly; `None` = `2N + 20`.
    pub nhat: Option<usize>,
}

pub type SolverConfig1D = SolverConfig;

impl SolverConfig {
    pub fn new(
        mu: f64,
        kappa: f64,
        rho: f64,
        lambda: f64,
        resolution: usize,
        n_max: usize,
        t_end: f64,
    ) -> Result<Self> {
        let config = Self { mu, kappa, rho, lambda, resolution, n_max, t_end, nhat: None };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0 && self.mu < 1.0) {
            return Err(Error::domain(format!("mu must lie in (0, 1), got {}", self.mu)));
        }
        if !(self.kappa > 0.0) || !self.kappa.is_finite() {
            return Err(Error::domain(format!("kappa must be positive, got {}", self.kappa)));
        }
        if !(self.rho >= 0.0) || !self.rho.is_finite() {
            return Err(Error::domain(format!("rho must be non-negative, got {}", self.rho)));
        }
        if !(MIN_LAMBDA..=1.0).contains(&self.lambda) {
            return Err(Error::domain(format!("lambda must lie in [{MIN_LAMBDA}, 1], got {}", self.lambda)));
        }
        if self.resolution < 3 {
            return Err(Error::domain(format!("spatial resolution M must be at least 3, got {}", self.resolution)));
        }
        if !(self.t_end > 0.0) || !self.t_end.is_finite() {
            return Err(Error::domain(format!("t_end must be positive, got {}", self.t_end)));
        }
        Ok(())
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = lambda;
        self
    }

    pub fn spatial_basis(&self) -> Result<SpatialBasis> {
        SpatialBasis::new(self.resolution)
    }

    pub fn temporal_basis(&self) -> Result<MuntzBasis> {
        MuntzBasis::temporal(TEMPORAL_ALPHA, self.lambda, self.n_max)
    }

    /// Temporal operators on the reference interval with the Caputo factor
    /// `t_end^{-mu}` of the map `tau = t / t_end` already applied to `St`.
    pub(crate) fn temporal_operators(&self) -> Result<TemporalOperators> {
        let mut ops = TemporalOperators::assemble(self.n_max, TEMPORAL_ALPHA, self.lambda, self.mu, self.nhat)?;
        if self.t_end != 1.0 {
            ops.st *= self.t_end.powf(-self.mu);
        }
        Ok(ops)
    }

    pub(crate) fn forcing_matrix(&self, forcing: &Forcing, dimension: usize) -> Result<DMatrix<f64>> {
        assemble_forcing(
            forcing,
            &self.spatial_basis()?,
            &self.temporal_basis()?,
            dimension,
            self.t_end,
            ForcingQuadrature::for_resolution(self.resolution, self.n_max),
        )
    }
}

/// Quality indicators attached to every solve.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolveDiagnostics {
    /// Relative Frobenius residual of the matrix equation.
    pub residual: f64,
    /// 1-norm condition estimate of the linear system (`NaN` when not computed).
    pub condition_estimate: f64,
    /// `min |u_kk| / max |u_kk|` of the LU factors, or the smallest triangular
    /// pivot magnitude of the 2D per-mode solves.
    pub pivot: f64,
    pub warning: Option<String>,
}

impl SolveDiagnostics {
    pub fn has_warning(&self) -> bool {
        self.warning.is_some()
    }

    pub(crate) fn warn(&mut self, message: String) {
        log::warn!("{message}");
        self.warning = Some(match self.warning.take() {
            Some(previous) => format!("{previous}; {message}"),
            None => message,
        });
    }
}

/// `u_L(x, t) = sum_{n,m} U[n][m] phi_m(x) J_n(t / t_end)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralSolution {
    /// `(N + 1) x (M - 1)`.
    pub coefficients: DMatrix<f64>,
    pub spatial: SpatialBasis,
    pub temporal: MuntzBasis,
    pub config: SolverConfig,
    pub diagnostics: SolveDiagnostics,
}

impl SpectralSolution {
    /// Wrap a coefficient matrix (e.g. for evaluation tests).
    pub fn from_coefficients(config: SolverConfig, coefficients: DMatrix<f64>) -> Result<Self> {
        config.validate()?;
        let spatial = config.spatial_basis()?;
        let temporal = config.temporal_basis()?;
        if coefficients.shape() != (temporal.len(), spatial.len()) {
            return Err(Error::Structural(format!(
                "coefficient matrix is {:?}, expected {:?}",
                coefficients.shape(),
                (temporal.len(), spatial.len())
            )));
        }
        Ok(Self { coefficients, spatial, temporal, config, diagnostics: SolveDiagnostics::default() })
    }

    pub fn evaluate(&self, x: f64, t: f64) -> Result<f64> {
        check_point(x, t, self.config.t_end)?;
        Ok(self.grid_values(&[x], &[t])[(0, 0)])
    }

    /// Values on the tensor grid `ts x xs` (rows: times). Points are not checked.
    pub fn grid_values(&self, xs: &[f64], ts: &[f64]) -> DMatrix<f64> {
        let phi = spatial_matrix(&self.spatial, xs);
        let j = temporal_matrix(&self.temporal, ts, self.config.t_end);
        j * &self.coefficients * phi.transpose()
    }
}

pub(crate) fn check_point(x: f64, t: f64, t_end: f64) -> Result<()> {
    if !(-1.0..=1.0).contains(&x) {
        return Err(Error::domain(format!("x = {x} lies outside [-1, 1]")));
    }
    if !(0.0..=t_end).contains(&t) {
        return Err(Error::domain(format!("t = {t} lies outside [0, {t_end}]")));
    }
    Ok(())
}

/// `phi[(i, m)] = phi_m(x_i)`.
pub(crate) fn spatial_matrix(basis: &SpatialBasis, xs: &[f64]) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(xs.len(), basis.len());
    let mut row = vec![0.0; basis.len()];
    for (i, &x) in xs.iter().enumerate() {
        basis.eval_all(x, &mut row);
        for (m, v) in row.iter().enumerate() {
            out[(i, m)] = *v;
        }
    }
    out
}

/// `j[(k, n)] = J_n(t_k / t_end)`.
pub(crate) fn temporal_matrix(basis: &MuntzBasis, ts: &[f64], t_end: f64) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(ts.len(), basis.len());
    let mut row = vec![0.0; basis.len()];
    for (k, &t) in ts.iter().enumerate() {
        basis.eval_all(t / t_end, &mut row);
        for (n, v) in row.iter().enumerate() {
            out[(k, n)] = *v;
        }
    }
    out
}

/// Column-major `vec` of a matrix as a vector.
pub(crate) fn vectorize(m: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_column_slice(m.as_slice())
}

/// Factor a dense system, estimate its condition and record pivot diagnostics.
pub(crate) fn factor_checked(system: &DMatrix<f64>, diagnostics: &mut SolveDiagnostics) -> Result<DenseLu> {
    let lu = DenseLu::factor(system)?;
    diagnostics.pivot = lu.pivot_ratio;
    let condition = norm1(system) * lu.inverse_norm1_estimate();
    diagnostics.condition_estimate = condition;
    if !condition.is_finite() {
        return Err(Error::numerical(format!("condition estimate is not finite (pivot ratio {:.3e})", lu.pivot_ratio)));
    }
    if condition > CONDITION_WARN {
        diagnostics.warn(format!("condition estimate {condition:.3e} exceeds {CONDITION_WARN:e}"));
    }
    Ok(lu)
}

/// Reject a solve whose system is beyond the conditioning limit and whose
/// residual shows that the computed coefficients do not satisfy it.
pub(crate) fn check_accuracy(diagnostics: &SolveDiagnostics) -> Result<()> {
    if diagnostics.condition_estimate > CONDITION_FAIL && !(diagnostics.residual <= RESIDUAL_FAIL) {
        return Err(Error::Conditioning(format!(
            "condition estimate {:.3e} exceeds {CONDITION_FAIL:e} and the relative residual is {:.3e} (pivot ratio {:.3e})",
            diagnostics.condition_estimate, diagnostics.residual, diagnostics.pivot
        )));
    }
    Ok(())
}

/// Solve `St U Mx + kappa Mt U Sx + rho Mt U Cx^T = F` through its Kronecker
/// form `(Mx^T (x) St + kappa Sx^T (x) Mt + rho Cx (x) Mt) vec(U) = vec(F)`.
pub fn solve_1d(config: &SolverConfig, forcing: &Forcing) -> Result<SpectralSolution> {
    config.validate()?;
    let spatial_ops = SpatialOperators::assemble(config.resolution)?;
    let temporal_ops = config.temporal_operators()?;
    let f = config.forcing_matrix(forcing, 1)?;
    let (st, mt) = (&temporal_ops.st, &temporal_ops.mt);
    let (sx, mx, cx) = (&spatial_ops.sx, &spatial_ops.mx, &spatial_ops.cx);
    let nt = st.nrows();
    let ns = mx.nrows();

    let mut diagnostics = SolveDiagnostics::default();
    let f_norm = f.norm();
    if f_norm == 0.0 {
        let coefficients = DMatrix::zeros(nt, ns);
        return Ok(SpectralSolution {
            coefficients,
            spatial: config.spatial_basis()?,
            temporal: config.temporal_basis()?,
            config: *config,
            diagnostics,
        });
    }

    let size = nt * ns;
    let mut system = DMatrix::zeros(size, size);
    for m in 0..ns {
        for j in 0..ns {
            let (a, b, c) = (mx[(m, j)], config.kappa * sx[(m, j)], config.rho * cx[(j, m)]);
            if a == 0.0 && b == 0.0 && c == 0.0 {
                continue;
            }
            for n in 0..nt {
                for q in 0..nt {
                    system[(j * nt + q, m * nt + n)] = a * st[(q, n)] + (b + c) * mt[(q, n)];
                }
            }
        }
    }
    let lu = factor_checked(&system, &mut diagnostics)?;
    let mut u = vectorize(&f);
    lu.solve_in_place(u.as_mut_slice());
    let coefficients = DMatrix::from_column_slice(nt, ns, u.as_slice());
    if coefficients.iter().any(|v| !v.is_finite()) {
        return Err(Error::numerical("solution coefficients are not finite"));
    }

    let residual_matrix =
        st * &coefficients * mx + mt * &coefficients * (sx * config.kappa + cx.transpose() * config.rho) - &f;
    diagnostics.residual = residual_matrix.norm() / f_norm;
    if diagnostics.residual > RESIDUAL_WARN {
        diagnostics.warn(format!("relative residual {:.3e} exceeds {RESIDUAL_WARN:e}", diagnostics.residual));
    }
    check_accuracy(&diagnostics)?;
    Ok(SpectralSolution {
        coefficients,
        spatial: config.spatial_basis()?,
        temporal: config.temporal_basis()?,
        config: *config,
        diagnostics,
    })
}

/// Discrete error norms at the final time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorReport {
    /// RMS error over the nodes.
    pub l2: f64,
    /// Maximum absolute error over the nodes.
    pub linf: f64,
    /// Number of spatial nodes.
    pub k: usize,
    pub t_end: f64,
}

/// `K` uniform interior nodes `x_i = -1 + 2i/(K+1)`, `i = 1..=K`.
pub fn interior_nodes(k: usize) -> Vec<f64> {
    (1..=k).map(|i| -1.0 + 2.0 * i as f64 / (k as f64 + 1.0)).collect()
}

/// RMS and maximum error between `u_L(., t_end)` and `exact(., t_end)` over
/// `K` uniform interior nodes.
pub fn error_norms<F: Fn(f64, f64) -> f64>(solution: &SpectralSolution, exact: F, k: usize) -> Result<ErrorReport> {
    if k < 2 {
        return Err(Error::domain(format!("error norms need at least 2 nodes, got {k}")));
    }
    let t_end = solution.config.t_end;
    let xs = interior_nodes(k);
    let values = solution.grid_values(&xs, &[t_end]);
    let errors: Vec<f64> = xs.iter().enumerate().map(|(i, &x)| (exact(x, t_end) - values[(0, i)]).abs()).collect();
    Ok(report(&errors, k, t_end))
}

pub(crate) fn report(errors: &[f64], k: usize, t_end: f64) -> ErrorReport {
    let l2 = (errors.iter().map(|e| e * e).sum::<f64>() / errors.len() as f64).sqrt();
    let linf = errors.iter().fold(0.0, |a: f64, &b| a.max(b));
    ErrorReport { l2, linf, k, t_end }
}
