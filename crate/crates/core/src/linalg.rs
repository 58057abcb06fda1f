//! Dense linear algebra kernels: LU with partial pivoting and a 1-norm
//! condition estimate, the symmetric eigendecomposition of the spatial mass
//! matrix, and the complex generalized Schur (QZ) factorization.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::quadrature::tridiagonal_ql;
use crate::{Error, Result};

/// `P A = L U` stored column-major in one buffer.
#[derive(Debug, Clone)]
pub struct DenseLu {
    n: usize,
    lu: Vec<f64>,
    swaps: Vec<usize>,
    /// `min |u_kk| / max |u_kk|`.
    pub pivot_ratio: f64,
}

impl DenseLu {
    pub fn factor(a: &DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::Structural(format!("LU needs a square matrix, got {}x{}", n, a.ncols())));
        }
        let mut lu = a.as_slice().to_vec();
        let mut swaps = vec![0; n];
        for k in 0..n {
            let col = &lu[k * n..(k + 1) * n];
            let (p, pmax) =
                col[k..]
                    .iter()
                    .enumerate()
                    .fold((k, 0.0f64), |(bi, bv), (i, v)| if v.abs() > bv { (k + i, v.abs()) } else { (bi, bv) });
            swaps[k] = p;
            if pmax == 0.0 || !pmax.is_finite() {
                return Err(Error::numerical(format!("matrix is singular: no usable pivot in column {k}")));
            }
            if p != k {
                for j in 0..n {
                    lu.swap(j * n + k, j * n + p);
                }
            }
            let pivot = lu[k * n + k];
            for v in &mut lu[k * n + k + 1..(k + 1) * n] {
                *v /= pivot;
            }
            let (left, right) = lu.split_at_mut((k + 1) * n);
            let lcol = &left[k * n + k + 1..(k + 1) * n];
            for col in right.chunks_exact_mut(n) {
                let akj = col[k];
                if akj != 0.0 {
                    for (c, l) in col[k + 1..].iter_mut().zip(lcol) {
                        *c -= l * akj;
                    }
                }
            }
        }
        let diag = (0..n).map(|k| lu[k * n + k].abs());
        let (lo, hi) = diag.fold((f64::INFINITY, 0.0f64), |(lo, hi), d| (lo.min(d), hi.max(d)));
        let pivot_ratio = if n == 0 { 1.0 } else { lo / hi };
        if pivot_ratio < f64::EPSILON * n as f64 {
            return Err(Error::numerical(format!("matrix is numerically singular (pivot ratio {pivot_ratio:.3e})")));
        }
        Ok(Self { n, lu, swaps, pivot_ratio })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solve `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.n;
        for (k, &p) in self.swaps.iter().enumerate() {
            b.swap(k, p);
        }
        for k in 0..n {
            let bk = b[k];
            if bk != 0.0 {
                for (bi, l) in b[k + 1..].iter_mut().zip(&self.lu[k * n + k + 1..(k + 1) * n]) {
                    *bi -= l * bk;
                }
            }
        }
        for k in (0..n).rev() {
            b[k] /= self.lu[k * n + k];
            let bk = b[k];
            for (bi, u) in b[..k].iter_mut().zip(&self.lu[k * n..k * n + k]) {
                *bi -= u * bk;
            }
        }
    }

    /// Solve `A^T x = b` in place.
    pub fn solve_transpose_in_place(&self, b: &mut [f64]) {
        let n = self.n;
        for k in 0..n {
            let col = &self.lu[k * n..k * n + k];
            let dot: f64 = col.iter().zip(&b[..k]).map(|(u, y)| u * y).sum();
            b[k] = (b[k] - dot) / self.lu[k * n + k];
        }
        for k in (0..n).rev() {
            let col = &self.lu[k * n + k + 1..(k + 1) * n];
            let dot: f64 = col.iter().zip(&b[k + 1..]).map(|(l, z)| l * z).sum();
            b[k] -= dot;
        }
        for (k, &p) in self.swaps.iter().enumerate().rev() {
            b.swap(k, p);
        }
    }

    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let mut x = b.clone();
        self.solve_in_place(x.as_mut_slice());
        x
    }

    /// Estimate of `||A^{-1}||_1` (Hager's method with Higham's refinements).
    pub fn inverse_norm1_estimate(&self) -> f64 {
        let n = self.n;
        if n == 0 {
            return 0.0;
        }
        let mut x = vec![1.0 / n as f64; n];
        let mut estimate = 0.0;
        let mut last_index = usize::MAX;
        for _ in 0..5 {
            let mut y = x.clone();
            self.solve_in_place(&mut y);
            estimate = y.iter().map(|v| v.abs()).sum();
            let mut z: Vec<f64> = y.iter().map(|v| if *v >= 0.0 { 1.0 } else { -1.0 }).collect();
            self.solve_transpose_in_place(&mut z);
            let (j, zmax) = z
                .iter()
                .enumerate()
                .fold((0, 0.0f64), |(bj, bv), (i, v)| if v.abs() > bv { (i, v.abs()) } else { (bj, bv) });
            let ztx: f64 = z.iter().zip(&x).map(|(a, b)| a * b).sum();
            if zmax <= ztx || j == last_index {
                break;
            }
            last_index = j;
            x.iter_mut().for_each(|v| *v = 0.0);
            x[j] = 1.0;
        }
        // Alternative estimate on an oscillating vector guards against the
        // known failure cases of the power-like iteration.
        let mut alt: Vec<f64> = (0..n)
            .map(|i| {
                let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
                sign * (1.0 + i as f64 / (n.max(2) - 1) as f64)
            })
            .collect();
        self.solve_in_place(&mut alt);
        let alt_est = 2.0 * alt.iter().map(|v| v.abs()).sum::<f64>() / (3.0 * n as f64);
        estimate.max(alt_est)
    }
}

pub fn norm1(a: &DMatrix<f64>) -> f64 {
    a.column_iter().map(|c| c.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
}

/// Eigendecomposition of a symmetric matrix whose only nonzero off-diagonals
/// sit at distance 2 (the Legendre-difference mass matrix). Even and odd
/// indices decouple into two symmetric tridiagonal blocks, each solved by
/// implicit QL. Eigenvalues come back ascending with orthonormal eigenvectors.
pub fn symmetric_eigen_stride2(a: &DMatrix<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let n = a.nrows();
    let mut pairs: Vec<(f64, DVector<f64>)> = Vec::with_capacity(n);
    for parity in 0..2 {
        let idx: Vec<usize> = (parity..n).step_by(2).collect();
        let k = idx.len();
        if k == 0 {
            continue;
        }
        let mut diag: Vec<f64> = idx.iter().map(|&i| a[(i, i)]).collect();
        let mut off = vec![0.0; k];
        for w in 0..k.saturating_sub(1) {
            off[w] = a[(idx[w], idx[w + 1])];
        }
        let mut z = vec![0.0; k * k];
        for i in 0..k {
            z[i * k + i] = 1.0;
        }
        tridiagonal_ql(&mut diag, &mut off, &mut z)?;
        for (col, &value) in diag.iter().enumerate() {
            let mut v = DVector::zeros(n);
            for (row, &i) in idx.iter().enumerate() {
                v[i] = z[row * k + col];
            }
            pairs.push((value, v));
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let values = DVector::from_iterator(n, pairs.iter().map(|p| p.0));
    let mut vectors = DMatrix::zeros(n, n);
    for (j, (_, v)) in pairs.iter().enumerate() {
        // Fix the sign so that the largest component is positive.
        let (imax, _) = v.iter().enumerate().fold(
            (0, 0.0f64),
            |(bi, bv), (i, x)| {
                if x.abs() > bv {
                    (i, x.abs())
                } else {
                    (bi, bv)
                }
            },
        );
        let sign = if v[imax] < 0.0 { -1.0 } else { 1.0 };
        vectors.set_column(j, &(v * sign));
    }
    Ok((values, vectors))
}

/// Complex generalized Schur form `Q A0 Z = A`, `Q B0 Z = B` with `A`, `B`
/// upper triangular and `Q`, `Z` unitary.
#[derive(Debug, Clone)]
pub struct GeneralizedSchur {
    pub q: DMatrix<Complex64>,
    pub z: DMatrix<Complex64>,
    pub a: DMatrix<Complex64>,
    pub b: DMatrix<Complex64>,
}

/// Rotation `[c s; -conj(s) c]` mapping `(f, g)` to `(r, 0)`.
fn givens(f: Complex64, g: Complex64) -> (f64, Complex64) {
    let gn = g.norm();
    if gn == 0.0 {
        return (1.0, Complex64::new(0.0, 0.0));
    }
    let fn_ = f.norm();
    if fn_ == 0.0 {
        return (0.0, g.conj() / gn);
    }
    let norm = fn_.hypot(gn);
    (fn_ / norm, (f / fn_) * g.conj() / norm)
}

fn rotate_rows(m: &mut DMatrix<Complex64>, i: usize, j: usize, c: f64, s: Complex64) {
    for col in 0..m.ncols() {
        let x = m[(i, col)];
        let y = m[(j, col)];
        m[(i, col)] = x * c + s * y;
        m[(j, col)] = -s.conj() * x + y * c;
    }
}

/// Right rotation on columns `(k, k+1)` that zeroes the entry `(row, k)`.
fn right_rotation(m: &DMatrix<Complex64>, row: usize, k: usize) -> (f64, Complex64) {
    givens(m[(row, k + 1)].conj(), m[(row, k)].conj())
}

fn rotate_cols(m: &mut DMatrix<Complex64>, k: usize, c: f64, s: Complex64) {
    for row in 0..m.nrows() {
        let p = m[(row, k)];
        let q = m[(row, k + 1)];
        m[(row, k)] = p * c - q * s;
        m[(row, k + 1)] = p * s.conj() + q * c;
    }
}

/// Complex QZ: Hessenberg–triangular reduction followed by single-shift QZ
/// sweeps with deflation. The iteration cap is `100 n^2` sweeps.
pub fn complex_qz(a0: &DMatrix<f64>, b0: &DMatrix<f64>) -> Result<GeneralizedSchur> {
    let n = a0.nrows();
    if a0.ncols() != n || b0.nrows() != n || b0.ncols() != n {
        return Err(Error::Structural("QZ needs two square matrices of equal size".into()));
    }
    let to_c = |m: &DMatrix<f64>| m.map(|v| Complex64::new(v, 0.0));
    let mut a = to_c(a0);
    let mut b = to_c(b0);
    let mut q = DMatrix::<Complex64>::identity(n, n);
    let mut z = DMatrix::<Complex64>::identity(n, n);
    let zero = Complex64::new(0.0, 0.0);

    // B to upper triangular.
    for j in 0..n.saturating_sub(1) {
        for i in (j + 1..n).rev() {
            let (c, s) = givens(b[(i - 1, j)], b[(i, j)]);
            rotate_rows(&mut a, i - 1, i, c, s);
            rotate_rows(&mut b, i - 1, i, c, s);
            rotate_rows(&mut q, i - 1, i, c, s);
            b[(i, j)] = zero;
        }
    }
    // A to upper Hessenberg while keeping B triangular.
    for j in 0..n.saturating_sub(2) {
        for i in (j + 2..n).rev() {
            let (c, s) = givens(a[(i - 1, j)], a[(i, j)]);
            rotate_rows(&mut a, i - 1, i, c, s);
            rotate_rows(&mut b, i - 1, i, c, s);
            rotate_rows(&mut q, i - 1, i, c, s);
            a[(i, j)] = zero;
            let (c, s) = right_rotation(&b, i, i - 1);
            rotate_cols(&mut a, i - 1, c, s);
            rotate_cols(&mut b, i - 1, c, s);
            rotate_cols(&mut z, i - 1, c, s);
            b[(i, i - 1)] = zero;
        }
    }

    let b_norm = b.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let a_norm = a.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let tiny = f64::MIN_POSITIVE.max(f64::EPSILON * a_norm * 1e-3);
    let cap = 100 * n * n;
    let mut sweeps = 0;
    let mut since_deflation = 0;
    let mut ihi = n.saturating_sub(1);
    while ihi > 0 {
        let mut ilo = ihi;
        while ilo > 0 {
            let sub = a[(ilo, ilo - 1)].norm();
            let scale = a[(ilo, ilo)].norm() + a[(ilo - 1, ilo - 1)].norm();
            if sub <= f64::EPSILON * scale || sub <= tiny {
                a[(ilo, ilo - 1)] = zero;
                break;
            }
            ilo -= 1;
        }
        if ilo == ihi {
            ihi -= 1;
            since_deflation = 0;
            continue;
        }
        sweeps += 1;
        since_deflation += 1;
        if sweeps > cap {
            return Err(Error::numerical(format!("QZ iteration exceeded {cap} sweeps")));
        }
        if let Some(j0) = (ilo..=ihi).find(|&k| b[(k, k)].norm() <= f64::EPSILON * b_norm) {
            // Negligible diagonal entry of B (an infinite eigenvalue): chase the
            // zero down to b[ihi][ihi], then split off the trailing 1x1 block.
            b[(j0, j0)] = zero;
            for j in j0..ihi {
                let (c, s) = givens(b[(j, j + 1)], b[(j + 1, j + 1)]);
                rotate_rows(&mut a, j, j + 1, c, s);
                rotate_rows(&mut b, j, j + 1, c, s);
                rotate_rows(&mut q, j, j + 1, c, s);
                b[(j + 1, j + 1)] = zero;
                if j > ilo {
                    let (c, s) = right_rotation(&a, j + 1, j - 1);
                    rotate_cols(&mut a, j - 1, c, s);
                    rotate_cols(&mut b, j - 1, c, s);
                    rotate_cols(&mut z, j - 1, c, s);
                    a[(j + 1, j - 1)] = zero;
                }
            }
            let (c, s) = right_rotation(&a, ihi, ihi - 1);
            rotate_cols(&mut a, ihi - 1, c, s);
            rotate_cols(&mut b, ihi - 1, c, s);
            rotate_cols(&mut z, ihi - 1, c, s);
            a[(ihi, ihi - 1)] = zero;
            continue;
        }

        let shift = if since_deflation % 10 == 0 {
            // Exceptional shift to break cycles.
            a[(ihi, ihi)] / b[(ihi, ihi)] + a[(ihi, ihi - 1)].norm() / b[(ihi - 1, ihi - 1)].norm()
        } else {
            wilkinson_shift(&a, &b, ihi)
        };

        for k in ilo..ihi {
            let (x, y) = if k == ilo {
                (a[(k, k)] - shift * b[(k, k)], a[(k + 1, k)])
            } else {
                (a[(k, k - 1)], a[(k + 1, k - 1)])
            };
            let (c, s) = givens(x, y);
            rotate_rows(&mut a, k, k + 1, c, s);
            rotate_rows(&mut b, k, k + 1, c, s);
            rotate_rows(&mut q, k, k + 1, c, s);
            if k > ilo {
                a[(k + 1, k - 1)] = zero;
            }
            let (c, s) = right_rotation(&b, k + 1, k);
            rotate_cols(&mut a, k, c, s);
            rotate_cols(&mut b, k, c, s);
            rotate_cols(&mut z, k, c, s);
            b[(k + 1, k)] = zero;
        }
    }
    Ok(GeneralizedSchur { q, z, a, b })
}

/// Eigenvalue of the trailing 2x2 pencil closest to `a_nn / b_nn`.
fn wilkinson_shift(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>, k: usize) -> Complex64 {
    let (a11, a12, a21, a22) = (a[(k - 1, k - 1)], a[(k - 1, k)], a[(k, k - 1)], a[(k, k)]);
    let (b11, b12, b22) = (b[(k - 1, k - 1)], b[(k - 1, k)], b[(k, k)]);
    // det(A2 - theta B2) = qa theta^2 - qb theta + qc with b21 = 0.
    let qa = b11 * b22;
    let qb = a11 * b22 + a22 * b11 - a21 * b12;
    let qc = a11 * a22 - a12 * a21;
    let disc = (qb * qb - qa * qc * 4.0).sqrt();
    let r1 = (qb + disc) / (qa * 2.0);
    let r2 = (qb - disc) / (qa * 2.0);
    let target = a22 / b22;
    let pick = if (r1 - target).norm() <= (r2 - target).norm() { r1 } else { r2 };
    if pick.is_finite() {
        pick
    } else {
        target
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn random_matrix(n: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0))
    }

    #[test]
    fn lu_solves_and_transposes() {
        let a = random_matrix(9, 1);
        let lu = DenseLu::factor(&a).unwrap();
        let x = DVector::from_fn(9, |i, _| (i as f64).sin());
        let b = &a * &x;
        assert!((lu.solve(&b) - &x).amax() < 1e-12);
        let bt = a.transpose() * &x;
        let mut y = bt.as_slice().to_vec();
        lu.solve_transpose_in_place(&mut y);
        assert!((DVector::from_vec(y) - &x).amax() < 1e-12);
    }

    #[test]
    fn lu_rejects_singular() {
        let mut a = random_matrix(5, 2);
        let row = a.row(1).clone_owned();
        a.set_row(3, &row);
        assert!(matches!(DenseLu::factor(&a), Err(Error::Numerical(_))));
        assert!(DenseLu::factor(&DMatrix::zeros(3, 3)).is_err());
    }

    #[test]
    fn condition_estimate_is_close_to_exact() {
        for seed in 0..5 {
            let a = random_matrix(12, 10 + seed);
            let lu = DenseLu::factor(&a).unwrap();
            let inv = a.clone().try_inverse().unwrap();
            let exact = norm1(&inv);
            let est = lu.inverse_norm1_estimate();
            assert!(est <= exact * (1.0 + 1e-10) && est >= exact / 10.0, "{est} vs {exact}");
        }
    }

    #[test]
    fn stride2_eigen() {
        let n = 9;
        let mut a = DMatrix::zeros(n, n);
        for i in 0..n {
            a[(i, i)] = 2.0 + i as f64;
            if i + 2 < n {
                a[(i, i + 2)] = -0.3 * (i as f64 + 1.0).sqrt();
                a[(i + 2, i)] = a[(i, i + 2)];
            }
        }
        let (vals, vecs) = symmetric_eigen_stride2(&a).unwrap();
        assert!(vals.as_slice().windows(2).all(|w| w[0] <= w[1]));
        assert!((vecs.transpose() * &vecs - DMatrix::identity(n, n)).amax() < 1e-13);
        assert!((&a * &vecs - &vecs * DMatrix::from_diagonal(&vals)).amax() < 1e-12);
    }

    fn cmax(m: DMatrix<Complex64>) -> f64 {
        m.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    fn check_schur(a0: &DMatrix<f64>, b0: &DMatrix<f64>, tol: f64) -> GeneralizedSchur {
        let f = complex_qz(a0, b0).unwrap();
        let n = a0.nrows();
        let to_c = |m: &DMatrix<f64>| m.map(|v| Complex64::new(v, 0.0));
        let eye = DMatrix::<Complex64>::identity(n, n);
        assert!(cmax(&f.q * to_c(a0) * &f.z - &f.a) < tol);
        assert!(cmax(&f.q * to_c(b0) * &f.z - &f.b) < tol);
        assert!(cmax(&f.q * f.q.adjoint() - &eye) < 1e-12);
        assert!(cmax(&f.z * f.z.adjoint() - &eye) < 1e-12);
        for i in 0..n {
            for j in 0..i {
                assert!(f.a[(i, j)].norm() <= 1e-12 && f.b[(i, j)].norm() <= 1e-12);
            }
        }
        f
    }

    #[test]
    fn qz_identity_pair() {
        let eye = DMatrix::identity(4, 4);
        let f = check_schur(&eye, &eye, 1e-12);
        for i in 0..4 {
            assert!((f.a[(i, i)].norm() - 1.0).abs() < 1e-12);
            assert!((f.a[(i, i)] - f.b[(i, i)]).norm() < 1e-12);
        }
    }

    #[test]
    fn qz_random_pairs() {
        for seed in 0..20 {
            let a = random_matrix(5, 100 + seed);
            let b = random_matrix(5, 200 + seed);
            check_schur(&a, &b, 1e-12);
        }
        let a = random_matrix(30, 7);
        let b = random_matrix(30, 8) + DMatrix::identity(30, 30) * 3.0;
        check_schur(&a, &b, 1e-11);
    }

    #[test]
    fn qz_one_by_one() {
        let a = DMatrix::from_element(1, 1, 2.0);
        let b = DMatrix::from_element(1, 1, 4.0);
        let f = check_schur(&a, &b, 1e-15);
        assert!((f.a[(0, 0)] / f.b[(0, 0)] - Complex64::new(0.5, 0.0)).norm() < 1e-15);
    }
}
