//! Müntz space-time spectral method for time-fractional convection-diffusion
//! problems, and a small neural network that learns the Müntz exponent
//! parameter `lambda` from the fractional order `mu`.
//!
//! The temporal basis is built from Müntz–Jacobi polynomials
//! `J^{alpha,-1,lambda}_{n+1}(t)`, which span `{t^lambda, t^{2 lambda}, ...}` and
//! therefore capture the `t^mu`-type singularity that sub-diffusion solutions
//! carry at `t = 0`. Space uses the Legendre-difference basis
//! `phi_m = c_m (L_m - L_{m+2})`.
//!
//! Module map:
//!
//! - [`quadrature`]: Gauss–Jacobi rules (Golub–Welsch) on `[-1, 1]` and `[0, 1]`.
//! - [`basis`]: Jacobi, Müntz–Jacobi and spatial basis evaluation, weighted projection.
//! - [`assembly`]: spatial/temporal operators, manufactured problems, forcing matrices.
//! - [`solver1d`]: the 1D space-time Galerkin solve and error norms.
//! - [`solver2d`]: the 2D sub-diffusion solver (Fourier-like basis + complex QZ) and its dense oracle.
//! - [`mltune`]: the network, Adam, warm-restart schedule, solver-in-the-loop training and the spline baseline.

// `!(x > 0.0)`-style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod assembly;
pub mod basis;
mod error;
pub mod exec;
pub mod linalg;
pub mod mltune;
pub mod quadrature;
pub mod solver1d;
pub mod solver2d;

pub use error::{Error, Result};
