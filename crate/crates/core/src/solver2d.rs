//! The 2D solver on `(-1, 1)^2 x (0, t_end]`.
//!
//! For sub-diffusion (`rho = 0`) the spatial mass matrix is diagonalized by
//! its eigenvectors (the Fourier-like basis `sigma_k = sum_j e_jk phi_j`), so
//! the tensor spatial operators become diagonal. A complex generalized Schur
//! factorization of the temporal pencil then reduces the space-time system to
//! one triangular solve per spatial mode pair. A dense Kronecker solve serves
//! as the reference implementation and handles `rho != 0`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::assembly::{Forcing, SpatialOperators};
use crate::basis::{MuntzBasis, SpatialBasis};
use crate::exec::Execution;
use crate::linalg::{complex_qz, symmetric_eigen_stride2, GeneralizedSchur};
use crate::solver1d::{
    check_accuracy, factor_checked, report, spatial_matrix, temporal_matrix, vectorize, ErrorReport, SolveDiagnostics,
    SolverConfig, RESIDUAL_WARN,
};
use crate::{Error, Result};

/// Largest `(N + 1)(M - 1)^2` accepted by [`solve_2d_dense`].
pub const DENSE_LIMIT: usize = 20_000;
/// Relative imaginary part of the back-transformed coefficients above which a
/// warning is attached.
pub const IMAGINARY_WARN: f64 = 1e-9;
/// Relative imaginary part above which the fast solve fails.
pub const IMAGINARY_FAIL: f64 = 1e-6;

/// Orthonormal eigenvectors `E` and ascending eigenvalues of the spatial mass
/// matrix. `sigma_k` satisfies `(sigma_k, sigma_l) = lambda_k delta_kl` and
/// `(sigma_k', sigma_l') = delta_kl`.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierLikeBasis {
    pub resolution: usize,
    pub vectors: DMatrix<f64>,
    pub eigenvalues: DVector<f64>,
}

pub fn fourier_like_basis(resolution: usize) -> Result<FourierLikeBasis> {
    let ops = SpatialOperators::assemble(resolution)?;
    let (eigenvalues, vectors) = symmetric_eigen_stride2(&ops.mx)?;
    if let Some(bad) = eigenvalues.iter().find(|v| !(**v > 0.0)) {
        return Err(Error::numerical(format!("spatial mass matrix has a non-positive eigenvalue {bad:e}")));
    }
    Ok(FourierLikeBasis { resolution, vectors, eigenvalues })
}

/// Generalized Schur factors with `Q St^T Z = A`, `Q Mt^T Z = B`.
pub type QZFactors = GeneralizedSchur;

pub fn qz_decompose(st: &DMatrix<f64>, mt: &DMatrix<f64>) -> Result<QZFactors> {
    complex_qz(&st.transpose(), &mt.transpose())
}

/// `u_L(x, y, t) = sum U[n][k (M-1) + l] phi_k(x) phi_l(y) J_n(t / t_end)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralSolution2D {
    /// `(N + 1) x (M - 1)^2`, in the tensor Legendre-difference basis.
    pub coefficients: DMatrix<f64>,
    pub spatial: SpatialBasis,
    pub temporal: MuntzBasis,
    pub config: SolverConfig,
    pub diagnostics: SolveDiagnostics,
}

impl SpectralSolution2D {
    pub fn evaluate(&self, x: f64, y: f64, t: f64) -> Result<f64> {
        crate::solver1d::check_point(x, t, self.config.t_end)?;
        crate::solver1d::check_point(y, t, self.config.t_end)?;
        Ok(self.slice_values(&[x], &[y], t)[(0, 0)])
    }

    /// Values `u(x_i, y_j, t)` as a `xs.len() x ys.len()` matrix. Points are not checked.
    pub fn slice_values(&self, xs: &[f64], ys: &[f64], t: f64) -> DMatrix<f64> {
        let modes = self.spatial.len();
        let j = temporal_matrix(&self.temporal, &[t], self.config.t_end);
        let combined = j * &self.coefficients;
        // W[k][l] = sum_n J_n(t) U[n][k (M-1) + l]
        let w = DMatrix::from_fn(modes, modes, |k, l| combined[(0, k * modes + l)]);
        let phi_x = spatial_matrix(&self.spatial, xs);
        let phi_y = spatial_matrix(&self.spatial, ys);
        phi_x * w * phi_y.transpose()
    }
}

/// Sum of Kronecker products `sum_i S_i (x) T_i`, with the temporal index
/// running fastest (column-major `vec` of `U`).
pub(crate) fn kron_sum(terms: &[(&DMatrix<f64>, &DMatrix<f64>)]) -> DMatrix<f64> {
    let (ns, nt) = (terms[0].0.nrows(), terms[0].1.nrows());
    let mut out = DMatrix::zeros(ns * nt, ns * nt);
    for (s, t) in terms {
        for m in 0..ns {
            for j in 0..ns {
                let c = s[(j, m)];
                if c == 0.0 {
                    continue;
                }
                for n in 0..nt {
                    for q in 0..nt {
                        out[(j * nt + q, m * nt + n)] += c * t[(q, n)];
                    }
                }
            }
        }
    }
    out
}

fn check_2d(config: &SolverConfig) -> Result<()> {
    config.validate()
}

/// Fast solve for `D^mu u - kappa Laplace(u) = f` (`rho = 0`); `rho != 0` is
/// delegated to [`solve_2d_dense`].
pub fn solve_2d(config: &SolverConfig, forcing: &Forcing) -> Result<SpectralSolution2D> {
    solve_2d_with(config, forcing, Execution::default())
}

pub fn solve_2d_with(config: &SolverConfig, forcing: &Forcing, execution: Execution) -> Result<SpectralSolution2D> {
    check_2d(config)?;
    if config.rho != 0.0 {
        return solve_2d_dense(config, forcing);
    }
    let basis = fourier_like_basis(config.resolution)?;
    let temporal_ops = config.temporal_operators()?;
    let f_phi = config.forcing_matrix(forcing, 2)?;
    let spatial = config.spatial_basis()?;
    let temporal = config.temporal_basis()?;
    let nt = temporal.len();
    let modes = spatial.len();
    let columns = modes * modes;
    let mut diagnostics = SolveDiagnostics::default();

    let f_norm = f_phi.norm();
    if f_norm == 0.0 {
        return Ok(SpectralSolution2D {
            coefficients: DMatrix::zeros(nt, columns),
            spatial,
            temporal,
            config: *config,
            diagnostics,
        });
    }

    let e2 = basis.vectors.kronecker(&basis.vectors);
    let f_sigma = &f_phi * &e2;
    let lam = &basis.eigenvalues;
    let mass = |c: usize| lam[c / modes] * lam[c % modes];
    let stiff = |c: usize| lam[c / modes] + lam[c % modes];

    let qz = qz_decompose(&temporal_ops.st, &temporal_ops.mt)?;
    let at = qz.a.transpose();
    let bt = qz.b.transpose();
    let rhs = qz.z.transpose() * f_sigma.map(|v| Complex64::new(v, 0.0));
    let kappa = config.kappa;

    let solved: Vec<Result<(Vec<Complex64>, f64)>> = execution.map_range(columns, |c| {
        let (m, s) = (mass(c), kappa * stiff(c));
        let mut v = vec![Complex64::new(0.0, 0.0); nt];
        let mut min_pivot = f64::INFINITY;
        for i in 0..nt {
            let mut acc = rhs[(i, c)];
            for k in 0..i {
                acc -= (at[(i, k)] * m + bt[(i, k)] * s) * v[k];
            }
            let pivot = at[(i, i)] * m + bt[(i, i)] * s;
            let scale = (at[(i, i)] * m).norm() + (bt[(i, i)] * s).norm();
            if !(pivot.norm() > f64::EPSILON * scale) {
                return Err(Error::numerical(format!(
                    "vanishing triangular pivot {:.3e} at row {i} of spatial mode ({}, {})",
                    pivot.norm(),
                    c / modes,
                    c % modes
                )));
            }
            min_pivot = min_pivot.min(pivot.norm());
            v[i] = acc / pivot;
        }
        Ok((v, min_pivot))
    });
    let mut v = DMatrix::<Complex64>::zeros(nt, columns);
    let mut min_pivot = f64::INFINITY;
    for (c, result) in solved.into_iter().enumerate() {
        let (column, pivot) = result?;
        min_pivot = min_pivot.min(pivot);
        for (i, value) in column.into_iter().enumerate() {
            v[(i, c)] = value;
        }
    }
    diagnostics.pivot = min_pivot;
    diagnostics.condition_estimate = f64::NAN;

    let u_complex = qz.q.transpose() * v;
    let u_sigma = u_complex.map(|z| z.re);
    let real_max = u_sigma.amax();
    let imag_max = u_complex.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
    let imaginary = if real_max > 0.0 { imag_max / real_max } else { imag_max };
    if !(imaginary <= IMAGINARY_FAIL) {
        return Err(Error::numerical(format!(
            "back-transformed coefficients keep a relative imaginary part {imaginary:.3e}"
        )));
    }
    if imaginary > IMAGINARY_WARN {
        diagnostics.warn(format!("relative imaginary part {imaginary:.3e} exceeds {IMAGINARY_WARN:e}"));
    }

    let m_diag = DVector::from_fn(columns, |c, _| mass(c));
    let s_diag = DVector::from_fn(columns, |c, _| stiff(c));
    let mut residual = &temporal_ops.st * &u_sigma;
    residual.column_iter_mut().zip(m_diag.iter()).for_each(|(mut col, m)| col *= *m);
    let mut diffusion = &temporal_ops.mt * &u_sigma;
    diffusion.column_iter_mut().zip(s_diag.iter()).for_each(|(mut col, s)| col *= kappa * *s);
    residual += diffusion - &f_sigma;
    diagnostics.residual = residual.norm() / f_sigma.norm();
    if diagnostics.residual > RESIDUAL_WARN {
        diagnostics.warn(format!("relative residual {:.3e} exceeds {RESIDUAL_WARN:e}", diagnostics.residual));
    }

    let coefficients = u_sigma * e2.transpose();
    Ok(SpectralSolution2D { coefficients, spatial, temporal, config: *config, diagnostics })
}

/// Reference solve of `St U Mxy^T + kappa Mt U Sxy^T + rho Mt U Cxy^T = F` by
/// dense LU on the Kronecker form, with `Mxy = Mx (x) Mx`,
/// `Sxy = Sx (x) Mx + Mx (x) Sx` and `Cxy = Cx (x) Mx + Mx (x) Cx`.
pub fn solve_2d_dense(config: &SolverConfig, forcing: &Forcing) -> Result<SpectralSolution2D> {
    check_2d(config)?;
    let spatial = config.spatial_basis()?;
    let temporal = config.temporal_basis()?;
    let nt = temporal.len();
    let columns = spatial.len() * spatial.len();
    let size = nt * columns;
    if size > DENSE_LIMIT {
        return Err(Error::domain(format!("dense 2D system has {size} unknowns, above the limit {DENSE_LIMIT}")));
    }
    let ops = SpatialOperators::assemble(config.resolution)?;
    let temporal_ops = config.temporal_operators()?;
    let f = config.forcing_matrix(forcing, 2)?;
    let mut diagnostics = SolveDiagnostics::default();
    let f_norm = f.norm();
    if f_norm == 0.0 {
        return Ok(SpectralSolution2D {
            coefficients: DMatrix::zeros(nt, columns),
            spatial,
            temporal,
            config: *config,
            diagnostics,
        });
    }

    let mxy = ops.mx.kronecker(&ops.mx);
    let sxy = ops.sx.kronecker(&ops.mx) + ops.mx.kronecker(&ops.sx);
    let cxy = ops.cx.kronecker(&ops.mx) + ops.mx.kronecker(&ops.cx);
    // vec(A U B^T) = (B (x) A) vec(U).
    let sxy_k = &sxy * config.kappa;
    let cxy_r = &cxy * config.rho;
    let mut terms: Vec<(&DMatrix<f64>, &DMatrix<f64>)> = vec![(&mxy, &temporal_ops.st), (&sxy_k, &temporal_ops.mt)];
    if config.rho != 0.0 {
        terms.push((&cxy_r, &temporal_ops.mt));
    }
    let system = kron_sum(&terms);
    let lu = factor_checked(&system, &mut diagnostics)?;
    let mut u = vectorize(&f);
    lu.solve_in_place(u.as_mut_slice());
    let coefficients = DMatrix::from_column_slice(nt, columns, u.as_slice());
    if coefficients.iter().any(|v| !v.is_finite()) {
        return Err(Error::numerical("solution coefficients are not finite"));
    }
    let residual = &temporal_ops.st * &coefficients * mxy.transpose()
        + &temporal_ops.mt * &coefficients * (sxy.transpose() * config.kappa + cxy.transpose() * config.rho)
        - &f;
    diagnostics.residual = residual.norm() / f_norm;
    if diagnostics.residual > RESIDUAL_WARN {
        diagnostics.warn(format!("relative residual {:.3e} exceeds {RESIDUAL_WARN:e}", diagnostics.residual));
    }
    check_accuracy(&diagnostics)?;
    Ok(SpectralSolution2D { coefficients, spatial, temporal, config: *config, diagnostics })
}

/// RMS and maximum pointwise error at `t_end` over a `K x K` grid of uniform
/// interior nodes.
pub fn error_norms_2d<F: Fn(f64, f64, f64) -> f64>(
    solution: &SpectralSolution2D,
    exact: F,
    k: usize,
) -> Result<ErrorReport> {
    if k < 2 {
        return Err(Error::domain(format!("error norms need at least 2 nodes per direction, got {k}")));
    }
    let t_end = solution.config.t_end;
    let xs = crate::solver1d::interior_nodes(k);
    let values = solution.slice_values(&xs, &xs, t_end);
    let mut errors = Vec::with_capacity(k * k);
    for (i, &x) in xs.iter().enumerate() {
        for (j, &y) in xs.iter().enumerate() {
            errors.push((exact(x, y, t_end) - values[(i, j)]).abs());
        }
    }
    Ok(report(&errors, k, t_end))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::ManufacturedProblem;

    #[test]
    fn fourier_like_basis_diagonalizes_the_mass_matrix() {
        for m in [3, 4, 9, 20] {
            let b = fourier_like_basis(m).unwrap();
            let ops = SpatialOperators::assemble(m).unwrap();
            let n = m - 1;
            let ete = b.vectors.transpose() * &b.vectors - DMatrix::identity(n, n);
            assert!(ete.amax() <= 1e-12);
            let d = DMatrix::from_diagonal(&b.eigenvalues);
            assert!((&ops.mx * &b.vectors - &b.vectors * d).amax() <= 1e-11);
            assert!(b.eigenvalues.iter().all(|v| *v > 0.0));
            assert!(b.eigenvalues.as_slice().windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn zero_forcing_gives_zero_solution() {
        let c = SolverConfig::new(0.5, 1.0, 0.0, 0.4, 6, 5, 1.0).unwrap();
        assert!(solve_2d(&c, &Forcing::Zero).unwrap().coefficients.iter().all(|v| *v == 0.0));
        assert!(solve_2d_dense(&c, &Forcing::Zero).unwrap().coefficients.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn fast_matches_dense_on_manufactured_problem() {
        let p = ManufacturedProblem::new(0.6, 0.8, 1.2, 0.0, 2, 1.5).unwrap();
        let c = SolverConfig::new(0.6, 1.2, 0.0, 0.3, 6, 5, 1.5).unwrap();
        let fast = solve_2d(&c, &Forcing::from(&p)).unwrap();
        let dense = solve_2d_dense(&c, &Forcing::from(&p)).unwrap();
        let diff = (&fast.coefficients - &dense.coefficients).amax() / dense.coefficients.amax();
        assert!(diff < 1e-10, "relative difference {diff:e}");
    }

    #[test]
    fn dense_guard() {
        let c = SolverConfig::new(0.5, 1.0, 0.0, 0.4, 40, 20, 1.0).unwrap();
        assert!(matches!(solve_2d_dense(&c, &Forcing::Zero), Err(Error::Domain(_))));
    }
}
