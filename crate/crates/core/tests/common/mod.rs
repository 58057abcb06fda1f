//! Independent oracles shared by the integration tests and the acceptance
//! harness. Nothing here calls the library's quadrature, basis or assembly code.

#![allow(dead_code)]
// Kronrod tables are kept with the digits as published.
#![allow(clippy::excessive_precision)]

use std::sync::Arc;

use muntz_core::assembly::{Forcing, Profile, SeparableTerm};

/// 15-point Kronrod nodes (positive half) and weights, with the embedded 7-point Gauss weights.
const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

fn kronrod(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for i in 0..7 {
        let x = h * XGK[i];
        let (f1, f2) = (f(c - x), f(c + x));
        k += WGK[i] * (f1 + f2);
        if i % 2 == 1 {
            g += WG[i / 2] * (f1 + f2);
        }
    }
    (k * h, ((k - g) * h).abs())
}

fn adaptive(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: usize) -> f64 {
    let (k, err) = kronrod(f, a, b);
    if err <= tol || depth == 0 {
        return k;
    }
    let c = 0.5 * (a + b);
    adaptive(f, a, c, tol * 0.5, depth - 1) + adaptive(f, c, b, tol * 0.5, depth - 1)
}

/// Adaptive Gauss–Kronrod (7/15) integral of `f` over `[a, b]`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    adaptive(&f, a, b, tol, 50)
}

/// Generalized binomial coefficient `C(z, k)`.
pub fn binomial(z: f64, k: usize) -> f64 {
    (1..=k).fold(1.0, |acc, i| acc * (z - k as f64 + i as f64) / i as f64)
}

/// Coefficients `c_k` of `P_n^{(alpha,beta)}(2s - 1) = sum_k c_k s^k`, from
/// `P_n(x) = sum_j C(n+alpha, n-j) C(n+beta, j) ((x-1)/2)^j ((x+1)/2)^{n-j}`
/// with `(x-1)/2 = s - 1` and `(x+1)/2 = s`.
pub fn jacobi_monomial(alpha: f64, beta: f64, n: usize) -> Vec<f64> {
    let mut c = vec![0.0; n + 1];
    for j in 0..=n {
        let w = binomial(n as f64 + alpha, n - j) * binomial(n as f64 + beta, j);
        // (s - 1)^j s^{n-j} = sum_i C(j, i) (-1)^{j-i} s^{n-j+i}
        for i in 0..=j {
            let sign = if (j - i) % 2 == 0 { 1.0 } else { -1.0 };
            c[n - j + i] += w * binomial(j as f64, i) * sign;
        }
    }
    c
}

/// `P_n^{(alpha,beta)}(x)` by the explicit sum.
pub fn jacobi_explicit(alpha: f64, beta: f64, n: usize, x: f64) -> f64 {
    let (lo, hi) = (0.5 * (x - 1.0), 0.5 * (x + 1.0));
    (0..=n)
        .map(|j| {
            binomial(n as f64 + alpha, n - j)
                * binomial(n as f64 + beta, j)
                * lo.powi(j as i32)
                * hi.powi((n - j) as i32)
        })
        .sum()
}

/// Gamma function: Lanczos approximation (g = 7, 9 terms), reflected below 1/2.
pub fn gamma(x: f64) -> f64 {
    const G: [f64; 9] = [
        0.999_999_999_999_809_93,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_13,
        -176.615_029_162_140_59,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_571_6e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        return std::f64::consts::PI / ((std::f64::consts::PI * x).sin() * gamma(1.0 - x));
    }
    let x = x - 1.0;
    let mut a = G[0];
    let t = x + 7.5;
    for (i, g) in G.iter().enumerate().skip(1) {
        a += g / (x + i as f64);
    }
    (2.0 * std::f64::consts::PI).sqrt() * t.powf(x + 0.5) * (-t).exp() * a
}

/// Exponents and coefficients of `J_n(t) = sum_k w_k t^{p_k}` for the
/// temporal basis `J_n = (n+alpha+1)/(n+1) s P_n^{alpha,1}(2s-1)`, `s = t^lambda`.
pub fn muntz_monomial(alpha: f64, lambda: f64, n: usize) -> Vec<(f64, f64)> {
    let a_n = (n as f64 + alpha + 1.0) / (n as f64 + 1.0);
    jacobi_monomial(alpha, 1.0, n).iter().enumerate().map(|(k, c)| (lambda * (k + 1) as f64, a_n * c)).collect()
}

/// `(J_n, J_q)` on `(0, 1)`: `int t^{p+r} dt = 1 / (p + r + 1)`.
pub fn mass_oracle(alpha: f64, lambda: f64, n_max: usize) -> Vec<Vec<f64>> {
    let terms: Vec<_> = (0..=n_max).map(|n| muntz_monomial(alpha, lambda, n)).collect();
    (0..=n_max)
        .map(|q| {
            (0..=n_max)
                .map(|n| {
                    let mut sum = 0.0;
                    for &(p, a) in &terms[n] {
                        for &(r, b) in &terms[q] {
                            sum += a * b / (p + r + 1.0);
                        }
                    }
                    sum
                })
                .collect()
        })
        .collect()
}

/// `(D^mu J_n, J_q)` on `(0, 1)` from the Caputo power rule
/// `D^mu t^p = Gamma(p+1) / Gamma(p+1-mu) t^{p-mu}`.
pub fn stiffness_oracle(alpha: f64, lambda: f64, mu: f64, n_max: usize) -> Vec<Vec<f64>> {
    let terms: Vec<_> = (0..=n_max).map(|n| muntz_monomial(alpha, lambda, n)).collect();
    (0..=n_max)
        .map(|q| {
            (0..=n_max)
                .map(|n| {
                    let mut sum = 0.0;
                    for &(p, a) in &terms[n] {
                        let rule = gamma(p + 1.0) / gamma(p + 1.0 - mu);
                        for &(r, b) in &terms[q] {
                            sum += a * b * rule / (p - mu + r + 1.0);
                        }
                    }
                    sum
                })
                .collect()
        })
        .collect()
}

/// Largest entrywise relative deviation `|a - b| / |b|`.
pub fn max_relative(a: &nalgebra::DMatrix<f64>, b: &[Vec<f64>]) -> f64 {
    let mut worst: f64 = 0.0;
    for (q, row) in b.iter().enumerate() {
        for (n, &expected) in row.iter().enumerate() {
            worst = worst.max((a[(q, n)] - expected).abs() / expected.abs());
        }
    }
    worst
}

/// `phi_1(x) = c_1 (L_1 - L_3) = 5 c_1 x (1 - x^2) / 2` with `c_1 = 1/sqrt(10)`.
pub fn phi1(x: f64) -> f64 {
    2.5 * x * (1.0 - x * x) / 10f64.sqrt()
}

/// `phi_1'(x)`.
pub fn phi1_prime(x: f64) -> f64 {
    2.5 * (1.0 - 3.0 * x * x) / 10f64.sqrt()
}

/// `phi_1''(x)`.
pub fn phi1_second(x: f64) -> f64 {
    -15.0 * x / 10f64.sqrt()
}

pub fn profile(f: fn(f64) -> f64) -> Profile {
    Arc::new(f)
}

/// Forcing for `u = phi_1(x) t^p` in `D^mu u - kappa u_xx + rho u_x`.
pub fn phi1_forcing(mu: f64, kappa: f64, rho: f64, p: f64) -> Forcing {
    let caputo = gamma(p + 1.0) / gamma(p + 1.0 - mu);
    Forcing::Separable(vec![
        SeparableTerm::new(caputo, p - mu, vec![profile(phi1)]),
        SeparableTerm::new(-kappa, p, vec![profile(phi1_second)]),
        SeparableTerm::new(rho, p, vec![profile(phi1_prime)]),
    ])
}
