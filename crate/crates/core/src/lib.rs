//! Numerical laboratory for weighted resolvent and local-smoothing estimates
//! of Schrödinger operators `H = -Δ + V` on `R^d` with radial potentials.
//!
//! Everything works one spherical-harmonic mode at a time: a function on
//! `R^d` is represented as `u(x) = f(r) Y(x/|x|)` with `Y` a spherical
//! harmonic of degree `ℓ`, sampled on a uniform radial grid.
//!
//! * [`potentials`]: parametric radial potentials and hypothesis checkers.
//! * [`grids`]: radial grids, quadrature, Morrey–Campanato norms.
//! * [`multipliers`]: Morawetz-type multipliers and auxiliary weights.
//! * [`helmholtz`]: the per-mode resolvent solver.
//! * [`identities`]: discrete integration-by-parts identities.
//! * [`evolution`]: spectral calculus, propagators, smoothing sweeps.
//! * [`experiment`]: config-driven runner behind the command line tool.

pub mod error;
pub mod evolution;
pub mod experiment;
pub mod grids;
pub mod helmholtz;
pub mod identities;
pub mod linalg;
pub mod multipliers;
pub mod numeric;
pub mod potentials;

pub use error::{Error, Result};
pub use num_complex::Complex64;
