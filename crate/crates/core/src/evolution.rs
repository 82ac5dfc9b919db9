//! Spectral calculus for the discrete radial Hamiltonian `H = −Δ + V`, the
//! propagator `e^{itH}`, windowed smoothing functionals and the
//! resolvent-side uniformity sweeps.
//!
//! A mode function `u` is mapped to coordinates `x_i = √(ωh) r_i^{(d−1)/2} u_i`
//! whose Euclidean inner product is the discrete `L²(R^d)` product. In these
//! coordinates the operator is the symmetric Liouville-form tridiagonal
//! matrix used by the resolvent solver (without the `τ` and `ε` terms).

use crate::error::{Error, Result};
use crate::grids::{
    grad_density, integrate_density, norm_xstar, sup_ball_average, sup_sphere_average, CumulativeIntegral,
    ModeFunction, RadialGrid, Weight,
};
use crate::helmholtz::{self, solve_resolvent, Boundary, ResolventProblem, Sign, TauConvention};
use crate::linalg::{
    complex_symmetric_tridiagonal_eigen, symmetric_tridiagonal_eigen, ComplexSymmetricEigen, SymmetricEigen,
};
use crate::numeric::{compensated_sum, linear_fit};
use crate::potentials::{PotentialRole, PotentialSpec};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::f64::consts::PI;

/// Largest grid accepted for the dense complex decomposition of the
/// absorbing-layer operator.
pub const MAX_COMPLEX_SIZE: usize = 2000;

/// Modes whose squared coefficient falls below this fraction of the total
/// are ignored by the smoothing functional (and by its guards).
pub const DEFAULT_RETENTION: f64 = 1e-12;

#[derive(Debug, Clone)]
enum Basis {
    Real(SymmetricEigen),
    Complex(ComplexSymmetricEigen),
}

/// Eigen-decomposition of the discrete Hamiltonian on one mode.
#[derive(Debug, Clone)]
pub struct Spectrum {
    grid: RadialGrid,
    free: bool,
    scale: Vec<f64>,
    basis: Basis,
}

fn coordinate_scale(grid: &RadialGrid) -> Vec<f64> {
    let p = (grid.dimension() as f64 - 1.0) / 2.0;
    let c = (grid.sphere_area() * grid.spacing()).sqrt();
    grid.nodes().into_iter().map(|r| c * r.powf(p)).collect()
}

fn total_potential(grid: &RadialGrid, potentials: &[PotentialSpec]) -> Result<Vec<f64>> {
    for p in potentials {
        p.validate()?;
        if p.angular_bound.is_some() {
            return Err(Error::Domain("the spectrum needs radial potentials; drop the angular bound".into()));
        }
    }
    grid.nodes()
        .into_iter()
        .map(|r| {
            let mut v = 0.0;
            for p in potentials {
                v += p.eval(r)?;
            }
            Ok(v)
        })
        .collect()
}

/// Diagonalize `H = −Δ + ΣV` on the grid's mode. A Dirichlet wall gives a
/// real orthonormal eigenbasis; an absorbing layer gives `H − iΓ` with
/// eigenvalues in the closed lower half plane.
pub fn diagonalize(grid: &RadialGrid, potentials: &[PotentialSpec], boundary: Boundary) -> Result<Spectrum> {
    let n = grid.len();
    let h = grid.spacing();
    let potential = total_potential(grid, potentials)?;
    let diag = helmholtz::real_diagonal(grid, &potential);
    let off = vec![-1.0 / (h * h); n - 1];
    let basis = match boundary {
        Boundary::Dirichlet => Basis::Real(symmetric_tridiagonal_eigen(&diag, &off, true)?),
        Boundary::Sponge { width, strength } => {
            if !(width > 0.0 && width < 1.0) || !(strength >= 0.0) {
                return Err(Error::Rejected(format!(
                    "sponge needs width in (0, 1) and strength ≥ 0, got ({width}, {strength})"
                )));
            }
            if n > MAX_COMPLEX_SIZE {
                return Err(Error::Size(format!(
                    "complex decomposition limited to n ≤ {MAX_COMPLEX_SIZE}, got {n}"
                )));
            }
            let gamma = helmholtz::sponge_profile(grid, &boundary);
            let cdiag: Vec<Complex64> = diag.iter().zip(&gamma).map(|(b, g)| Complex64::new(*b, -g)).collect();
            let coff: Vec<Complex64> = off.iter().map(|o| Complex64::new(*o, 0.0)).collect();
            Basis::Complex(complex_symmetric_tridiagonal_eigen(&cdiag, &coff)?)
        }
    };
    Ok(Spectrum {
        grid: *grid,
        free: boundary == Boundary::Dirichlet && potentials.iter().all(PotentialSpec::is_zero),
        scale: coordinate_scale(grid),
        basis,
    })
}

/// Spectrum of the problem's operator, ignoring `ε`, `τ` and the forcing.
pub fn diagonalize_problem(problem: &ResolventProblem) -> Result<Spectrum> {
    diagonalize(&problem.grid, &problem.potentials, problem.boundary)
}

/// Spectrum of the free Dirichlet operator `−Δ`.
pub fn free_spectrum(grid: &RadialGrid) -> Result<Spectrum> {
    diagonalize(grid, &[], Boundary::Dirichlet)
}

impl Spectrum {
    pub fn grid(&self) -> &RadialGrid {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    /// `V ≡ 0` with a Dirichlet wall.
    pub fn is_free(&self) -> bool {
        self.free
    }

    pub fn is_real(&self) -> bool {
        matches!(self.basis, Basis::Real(_))
    }

    /// Eigenvalues, ascending (by real part in the absorbing case).
    pub fn eigenvalues(&self) -> Vec<Complex64> {
        match &self.basis {
            Basis::Real(e) => e.values.iter().map(|&l| Complex64::new(l, 0.0)).collect(),
            Basis::Complex(e) => e.values.clone(),
        }
    }

    /// Eigenvalues of a real spectrum.
    pub fn real_eigenvalues(&self) -> Option<&[f64]> {
        match &self.basis {
            Basis::Real(e) => Some(&e.values),
            Basis::Complex(_) => None,
        }
    }

    fn real_basis(&self) -> Result<&SymmetricEigen> {
        match &self.basis {
            Basis::Real(e) => Ok(e),
            Basis::Complex(_) => Err(Error::Domain(
                "operation needs a real spectrum (Dirichlet wall, no absorbing layer)".into(),
            )),
        }
    }

    fn vector(&self, k: usize) -> Vec<Complex64> {
        match &self.basis {
            Basis::Real(e) => e.vector(k).iter().map(|&x| Complex64::new(x, 0.0)).collect(),
            Basis::Complex(e) => e.vector(k).to_vec(),
        }
    }

    /// Eigenfunction `k` as a mode function (unit discrete `L²` norm in the
    /// real case, unit bilinear norm in the absorbing case).
    pub fn eigenfunction(&self, k: usize) -> ModeFunction {
        let x = self.vector(k);
        self.from_coordinates(&x)
    }

    fn coordinates(&self, u: &ModeFunction) -> Result<Vec<Complex64>> {
        self.grid.ensure_same(u.grid())?;
        Ok(u.values().iter().zip(&self.scale).map(|(z, s)| z * s).collect())
    }

    fn from_coordinates(&self, x: &[Complex64]) -> ModeFunction {
        let values = x.iter().zip(&self.scale).map(|(z, s)| z / s).collect();
        ModeFunction::new(self.grid, values).expect("length matches grid")
    }

    fn coefficients_of(&self, x: &[Complex64]) -> Vec<Complex64> {
        let n = self.len();
        match &self.basis {
            Basis::Real(e) => (0..n)
                .map(|k| {
                    let v = e.vector(k);
                    let (mut re, mut im) = (0.0, 0.0);
                    for (a, z) in v.iter().zip(x) {
                        re += a * z.re;
                        im += a * z.im;
                    }
                    Complex64::new(re, im)
                })
                .collect(),
            Basis::Complex(e) => (0..n).map(|k| e.vector(k).iter().zip(x).map(|(a, z)| a * z).sum()).collect(),
        }
    }

    /// Expansion coefficients `⟨φ_k, u⟩` (bilinear `φ_kᵀx` in the absorbing case).
    pub fn coefficients(&self, u: &ModeFunction) -> Result<Vec<Complex64>> {
        let x = self.coordinates(u)?;
        Ok(self.coefficients_of(&x))
    }

    /// `Σ_k c_k φ_k`.
    pub fn synthesize(&self, coeffs: &[Complex64]) -> Result<ModeFunction> {
        let n = self.len();
        if coeffs.len() != n {
            return Err(Error::Domain(format!("expected {n} coefficients, got {}", coeffs.len())));
        }
        let mut x = vec![Complex64::new(0.0, 0.0); n];
        for (k, c) in coeffs.iter().enumerate() {
            if *c == Complex64::new(0.0, 0.0) {
                continue;
            }
            match &self.basis {
                Basis::Real(e) => {
                    for (xi, a) in x.iter_mut().zip(e.vector(k)) {
                        *xi += c * a;
                    }
                }
                Basis::Complex(e) => {
                    for (xi, a) in x.iter_mut().zip(e.vector(k)) {
                        *xi += c * a;
                    }
                }
            }
        }
        Ok(self.from_coordinates(&x))
    }
}

/// Discrete `L²(R^d)` product `ω h Σ r_i^{d−1} u_i v̄_i`.
pub fn l2_inner(u: &ModeFunction, v: &ModeFunction) -> Result<Complex64> {
    u.grid().ensure_same(v.grid())?;
    let grid = u.grid();
    let p = grid.dimension() as i32 - 1;
    let c = grid.sphere_area() * grid.spacing();
    let terms = u.values().iter().zip(v.values()).enumerate().map(|(i, (a, b))| a * b.conj() * grid.node(i).powi(p));
    let mut re = Vec::with_capacity(grid.len());
    let mut im = Vec::with_capacity(grid.len());
    for z in terms {
        re.push(z.re);
        im.push(z.im);
    }
    Ok(Complex64::new(compensated_sum(re), compensated_sum(im)) * c)
}

/// Discrete `‖u‖₂²`.
pub fn l2_norm_sqr(u: &ModeFunction) -> f64 {
    l2_inner(u, u).expect("same grid").re
}

/// Discrete `H u` with the Dirichlet wall, in the original variable.
pub fn apply_hamiltonian(grid: &RadialGrid, potentials: &[PotentialSpec], u: &ModeFunction) -> Result<ModeFunction> {
    grid.ensure_same(u.grid())?;
    let potential = total_potential(grid, potentials)?;
    let diag = helmholtz::real_diagonal(grid, &potential);
    let h2 = grid.spacing().powi(2);
    let p = (grid.dimension() as f64 - 1.0) / 2.0;
    let nodes = grid.nodes();
    let v: Vec<Complex64> = u.values().iter().zip(&nodes).map(|(z, r)| z * r.powf(p)).collect();
    let n = v.len();
    let zero = Complex64::new(0.0, 0.0);
    let out = (0..n)
        .map(|i| {
            let left = if i > 0 { v[i - 1] } else { zero };
            let right = if i + 1 < n { v[i + 1] } else { zero };
            (v[i] * diag[i] - (left + right) / h2) / nodes[i].powf(p)
        })
        .collect();
    ModeFunction::new(*grid, out)
}

/// A spectral interval with open or closed ends; `upper` may be infinite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralInterval {
    pub lower: f64,
    pub lower_closed: bool,
    pub upper: f64,
    pub upper_closed: bool,
}

impl SpectralInterval {
    /// `[a, b]`.
    pub fn closed(a: f64, b: f64) -> Self {
        Self {
            lower: a,
            lower_closed: true,
            upper: b,
            upper_closed: true,
        }
    }

    /// `[τ, ∞)`.
    pub fn at_least(tau: f64) -> Self {
        Self {
            lower: tau,
            lower_closed: true,
            upper: f64::INFINITY,
            upper_closed: false,
        }
    }

    /// `(a, b]`.
    pub fn left_open(a: f64, b: f64) -> Self {
        Self {
            lower: a,
            lower_closed: false,
            upper: b,
            upper_closed: true,
        }
    }

    pub fn contains(&self, lambda: f64) -> bool {
        let above = if self.lower_closed { lambda >= self.lower } else { lambda > self.lower };
        let below = if self.upper_closed { lambda <= self.upper } else { lambda < self.upper };
        above && below
    }
}

/// Output of [`spectral_project`].
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub function: ModeFunction,
    /// Number of eigenvalues inside the interval.
    pub modes: usize,
    /// No eigenvalue lies in the interval; `function` is zero.
    pub empty: bool,
}

/// `Σ_{λ_k ∈ I} ⟨φ_k, u₀⟩ φ_k`.
pub fn spectral_project(spectrum: &Spectrum, interval: SpectralInterval, u0: &ModeFunction) -> Result<Projection> {
    let basis = spectrum.real_basis()?;
    let mut coeffs = spectrum.coefficients(u0)?;
    let mut modes = 0;
    for (c, &l) in coeffs.iter_mut().zip(&basis.values) {
        if interval.contains(l) {
            modes += 1;
        } else {
            *c = Complex64::new(0.0, 0.0);
        }
    }
    Ok(Projection {
        function: spectrum.synthesize(&coeffs)?,
        modes,
        empty: modes == 0,
    })
}

/// `Σ λ_k^p ⟨φ_k, u₀⟩ φ_k` on a real spectrum. Fractional powers of negative
/// eigenvalues are rejected.
pub fn spectral_power(spectrum: &Spectrum, u0: &ModeFunction, exponent: f64) -> Result<ModeFunction> {
    let basis = spectrum.real_basis()?;
    let mut coeffs = spectrum.coefficients(u0)?;
    let integer = exponent.fract() == 0.0;
    for (c, &l) in coeffs.iter_mut().zip(&basis.values) {
        if l < 0.0 && !integer {
            return Err(Error::Internal(format!("eigenvalue {l} < 0 has no real power {exponent}")));
        }
        *c *= l.powf(exponent);
    }
    spectrum.synthesize(&coeffs)
}

/// `D^{1/2} u₀ = (−Δ₀)^{1/4} u₀` through the free spectrum.
pub fn half_derivative(u0: &ModeFunction, free: &Spectrum) -> Result<ModeFunction> {
    if !free.is_free() {
        return Err(Error::Domain("half_derivative needs the free Dirichlet spectrum".into()));
    }
    spectral_power(free, u0, 0.25)
}

/// `e^{itH} u₀`. With an absorbing layer the damped operator is used in
/// both time directions: `H − iΓ` for `t < 0` and `H + iΓ` for `t ≥ 0`.
pub fn propagate(spectrum: &Spectrum, u0: &ModeFunction, t: f64) -> Result<ModeFunction> {
    let i = Complex64::new(0.0, 1.0);
    let lambdas = spectrum.eigenvalues();
    if spectrum.is_real() || t < 0.0 {
        let mut c = spectrum.coefficients(u0)?;
        for (ck, l) in c.iter_mut().zip(&lambdas) {
            *ck *= (i * t * l).exp();
        }
        return spectrum.synthesize(&c);
    }
    // e^{it(H+iΓ)} u = conj(e^{−it(H−iΓ)} ū).
    let mut c = spectrum.coefficients(&u0.conj())?;
    for (ck, l) in c.iter_mut().zip(&lambdas) {
        *ck *= (-i * t * l).exp();
    }
    Ok(spectrum.synthesize(&c)?.conj())
}

/// Which derivative the smoothing functional applies before weighting.
#[derive(Debug, Clone, Copy)]
pub enum SmoothingDerivative<'a> {
    None,
    /// `D^{1/2}` through the given free spectrum.
    Half(&'a Spectrum),
}

/// Value and bookkeeping of a windowed smoothing functional.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothingValue {
    /// `∫_{−T}^{T} ∫ w |A e^{itH} u₀|² dx dt`.
    pub value: f64,
    /// Traversal guard `T*` (infinite with an absorbing layer).
    pub guard: f64,
    /// Simpson step actually used.
    pub step: f64,
    pub steps: usize,
    pub retained_modes: usize,
    pub max_retained_eigenvalue: f64,
}

struct ModalSet {
    lambdas: Vec<Complex64>,
    coeffs: Vec<Complex64>,
    /// Retained (and possibly differentiated) eigenfunctions on the first nodes.
    columns: Vec<Vec<Complex64>>,
}

impl ModalSet {
    fn density(&self, sign: f64, t: f64, m: usize, n: usize) -> Vec<f64> {
        let i = Complex64::new(0.0, sign * t);
        let mut w = vec![Complex64::new(0.0, 0.0); m];
        for ((l, c), col) in self.lambdas.iter().zip(&self.coeffs).zip(&self.columns) {
            let a = c * (i * l).exp();
            for (wi, phi) in w.iter_mut().zip(col) {
                *wi += a * phi;
            }
        }
        let mut out: Vec<f64> = w.iter().map(|z| z.norm_sqr()).collect();
        out.resize(n, 0.0);
        out
    }
}

fn modal_set(
    spectrum: &Spectrum,
    coeffs: Vec<Complex64>,
    retention: f64,
    derivative: SmoothingDerivative<'_>,
    m: usize,
) -> Result<ModalSet> {
    let total: f64 = coeffs.iter().map(|c| c.norm_sqr()).sum();
    let lambdas_all = spectrum.eigenvalues();
    let mut lambdas = Vec::new();
    let mut kept = Vec::new();
    let mut columns = Vec::new();
    for (k, c) in coeffs.into_iter().enumerate() {
        if total == 0.0 || c.norm_sqr() < retention * total {
            continue;
        }
        let phi = spectrum.eigenfunction(k);
        let col = match derivative {
            SmoothingDerivative::None => phi.values()[..m].to_vec(),
            SmoothingDerivative::Half(free) if spectrum.is_free() && free.grid == spectrum.grid => {
                let l = lambdas_all[k].re;
                if l < 0.0 {
                    return Err(Error::Internal(format!("negative free eigenvalue {l}")));
                }
                phi.values()[..m].iter().map(|z| z * l.powf(0.25)).collect()
            }
            SmoothingDerivative::Half(free) => {
                let dphi = if spectrum.is_real() {
                    half_derivative(&phi, free)?
                } else {
                    let re = ModeFunction::new(spectrum.grid, phi.values().iter().map(|z| Complex64::new(z.re, 0.0)).collect())?;
                    let im = ModeFunction::new(spectrum.grid, phi.values().iter().map(|z| Complex64::new(z.im, 0.0)).collect())?;
                    half_derivative(&re, free)?.add(&half_derivative(&im, free)?.scale(Complex64::new(0.0, 1.0)))?
                };
                dphi.values()[..m].to_vec()
            }
        };
        lambdas.push(lambdas_all[k]);
        kept.push(c);
        columns.push(col);
    }
    Ok(ModalSet {
        lambdas,
        coeffs: kept,
        columns,
    })
}

/// Windowed smoothing functional `∫_{−T}^{T} ∫ w|A e^{itH}u₀|² dx dt` with
/// `A` the identity or `D^{1/2}`, by composite Simpson quadrature.
///
/// Only modes with `|c_k|² ≥ retention·Σ|c|²` enter. On a Dirichlet domain
/// `T` must not exceed `T* = r_max/(4 max λ^{1/2})` over the retained modes,
/// and the step must satisfy `step ≤ π/(4 max|λ|)`.
pub fn smoothing_functional(
    spectrum: &Spectrum,
    u0: &ModeFunction,
    weight: &Weight,
    derivative: SmoothingDerivative<'_>,
    window: f64,
    step: f64,
    retention: f64,
) -> Result<SmoothingValue> {
    if !(window > 0.0) || !(step > 0.0) {
        return Err(Error::Rejected(format!("window and step must be positive, got ({window}, {step})")));
    }
    let grid = spectrum.grid;
    let n = grid.len();
    let (w, upper) = weight.sample(&grid)?;
    let m = match upper {
        Some(r) => (grid.nearest_node(r) + 3).min(n),
        None => n,
    };
    let forward = modal_set(spectrum, spectrum.coefficients(u0)?, retention, derivative, m)?;
    let backward = if spectrum.is_real() {
        None
    } else {
        Some(modal_set(spectrum, spectrum.coefficients(&u0.conj())?, retention, derivative, m)?)
    };
    let max_abs = forward.lambdas.iter().map(|l| l.re.abs()).fold(0.0, f64::max);
    let max_pos = forward.lambdas.iter().map(|l| l.re.max(0.0)).fold(0.0, f64::max);
    let guard = if spectrum.is_real() && max_pos > 0.0 {
        grid.r_max() / (4.0 * max_pos.sqrt())
    } else {
        f64::INFINITY
    };
    if forward.lambdas.is_empty() {
        return Ok(SmoothingValue {
            value: 0.0,
            guard,
            step,
            steps: 0,
            retained_modes: 0,
            max_retained_eigenvalue: 0.0,
        });
    }
    if window > guard {
        return Err(Error::Guard { t: window, guard });
    }
    if max_abs > 0.0 && step > PI / (4.0 * max_abs) {
        return Err(Error::Rejected(format!(
            "time step {step} does not resolve the fastest retained phase; need step ≤ π/(4 max|λ|) = {}",
            PI / (4.0 * max_abs)
        )));
    }
    let half = (window / step).ceil() as usize;
    let steps = 2 * half;
    let dt = 2.0 * window / steps as f64;
    let integrand = |t: f64| -> f64 {
        let mut density = match (&backward, t >= 0.0) {
            (Some(b), true) => b.density(-1.0, t, m, n),
            _ => forward.density(1.0, t, m, n),
        };
        for (d, wi) in density.iter_mut().zip(&w) {
            *d *= wi;
        }
        integrate_density(&grid, &density, upper).value
    };
    let samples: Vec<f64> = (0..=steps)
        .into_par_iter()
        .map(|j| {
            let t = -window + j as f64 * dt;
            let factor = if j == 0 || j == steps {
                1.0
            } else if j % 2 == 1 {
                4.0
            } else {
                2.0
            };
            factor * integrand(t)
        })
        .collect();
    Ok(SmoothingValue {
        value: compensated_sum(samples) * dt / 3.0,
        guard,
        step: dt,
        steps,
        retained_modes: forward.lambdas.len(),
        max_retained_eigenvalue: max_abs,
    })
}

/// Weight `(1/R) V^{1/2} χ_{B(0,R)}`.
pub fn potential_ball_weight(potential: &PotentialSpec, radius: f64) -> Weight {
    Weight::SqrtPotentialIndicator {
        potential: Box::new(potential.scaled(1.0 / (radius * radius))),
        radius,
    }
}

/// Result of the low-energy concentration probe.
#[derive(Debug, Clone, PartialEq)]
pub struct LowEnergyProbe {
    pub delta: f64,
    /// Eigenvalues in `(0, δ]`.
    pub modes: usize,
    /// `sup_R sup_{‖f‖₂=1} R^{-1} ∫_{B(0,R)} |P_{(0,δ]}f|² |x|^{−α/2} dx`.
    pub value: f64,
    /// Radius attaining the supremum.
    pub radius: f64,
    pub empty: bool,
}

/// Largest value of `R^{-1}∫_{B(0,R)}|P_{(0,δ]}f|²|x|^{−α/2}` over unit `f`
/// and the given radii: the top eigenvalue of the weighted Gram matrix of the
/// eigenfunctions with `λ ∈ (0, δ]`.
pub fn low_energy_probe(spectrum: &Spectrum, delta: f64, alpha: f64, radii: &[f64]) -> Result<LowEnergyProbe> {
    let basis = spectrum.real_basis()?;
    let interval = SpectralInterval::left_open(0.0, delta);
    let modes: Vec<ModeFunction> = basis
        .values
        .iter()
        .enumerate()
        .filter(|(_, &l)| interval.contains(l))
        .map(|(k, _)| spectrum.eigenfunction(k))
        .collect();
    let grid = spectrum.grid;
    let mut best = (0.0, radii.first().copied().unwrap_or(0.0));
    if !modes.is_empty() {
        let weight: Vec<f64> = grid.nodes().iter().map(|r| r.powf(-alpha / 2.0)).collect();
        let k = modes.len();
        for &radius in radii {
            let mut gram = nalgebra::DMatrix::<f64>::zeros(k, k);
            for a in 0..k {
                for b in a..k {
                    let density: Vec<f64> = modes[a]
                        .values()
                        .iter()
                        .zip(modes[b].values())
                        .zip(&weight)
                        .map(|((x, y), w)| x.re * y.re * w)
                        .collect();
                    let value = CumulativeIntegral::new(&grid, &density).to(radius) / radius;
                    gram[(a, b)] = value;
                    gram[(b, a)] = value;
                }
            }
            let top = gram.symmetric_eigenvalues().iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if top > best.0 {
                best = (top, radius);
            }
        }
    }
    Ok(LowEnergyProbe {
        delta,
        modes: modes.len(),
        value: best.0,
        radius: best.1,
        empty: modes.is_empty(),
    })
}

/// Left-hand functional of a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Estimate {
    /// Full left side of the repulsive estimate in `X`, `X*`.
    Basic,
    /// Left side of the attractive estimate in `X_ρ`, `X*_ρ`.
    BasicAttractive,
    /// Long-range estimate in `X_ρ` (`ρ` playing `τ₀`).
    Mayo10,
    /// Long-range estimate with the weights `(1+r)^{∓(1+α)}`.
    WeightedSinpeque,
    /// `|Im⟨R(τ±iε)A*f, A*f⟩|` with `A = R^{-1/2}χ_{B(0,R)}D^{1/2}`.
    Juan10Kato,
    /// The same with `A = R^{-1/2}χ_{B(0,R)}V^{1/4}`.
    Juan14Kato,
}

impl Estimate {
    pub const ALL: [Estimate; 6] = [
        Estimate::Basic,
        Estimate::BasicAttractive,
        Estimate::Mayo10,
        Estimate::WeightedSinpeque,
        Estimate::Juan10Kato,
        Estimate::Juan14Kato,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Estimate::Basic => "basic",
            Estimate::BasicAttractive => "basic_attractive",
            Estimate::Mayo10 => "mayo10",
            Estimate::WeightedSinpeque => "weighted_sinpeque",
            Estimate::Juan10Kato => "juan10_kato",
            Estimate::Juan14Kato => "juan14_kato",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|e| e.name() == name)
    }

    fn uses_radii(self) -> bool {
        matches!(self, Estimate::Juan10Kato | Estimate::Juan14Kato)
    }
}

/// Seeded families of right-hand sides.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataFamily {
    Zero,
    /// Gaussians with random centre, width and amplitude.
    Gaussians,
    /// Indicators of random dyadic shells `2^j < r ≤ 2^{j+1}`.
    Shells,
    /// One to three `sin²` bumps on random dyadic shells.
    DyadicBumps,
}

impl DataFamily {
    pub const ALL: [DataFamily; 4] = [DataFamily::Zero, DataFamily::Gaussians, DataFamily::Shells, DataFamily::DyadicBumps];

    pub fn name(self) -> &'static str {
        match self {
            DataFamily::Zero => "zero",
            DataFamily::Gaussians => "gaussians",
            DataFamily::Shells => "shells",
            DataFamily::DyadicBumps => "dyadic_bumps",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|e| e.name() == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DataSpec {
    pub family: DataFamily,
    pub seed: u64,
    pub count: usize,
    /// Common factor applied to every datum.
    pub amplitude: f64,
}

/// Data supported in `(0, support]`, reproducible from the seed.
pub fn generate_data(grid: &RadialGrid, spec: &DataSpec, support: f64) -> Result<Vec<ModeFunction>> {
    let h = grid.spacing();
    if !(support > 4.0 * h) {
        return Err(Error::Domain(format!("data support {support} is too small for spacing {h}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let l = grid.mode() as f64;
    let j_lo = (4.0 * h).log2().ceil().max(-2.0) as i32;
    let j_hi = (support.log2().floor() as i32 - 1).max(j_lo);
    let mut out = Vec::with_capacity(spec.count);
    for _ in 0..spec.count {
        let f = match spec.family {
            DataFamily::Zero => ModeFunction::zeros(*grid),
            DataFamily::Gaussians => {
                let centre = rng.gen_range(0.0..0.5) * support;
                let width = rng.gen_range(0.3..1.5);
                let amp = rng.gen_range(0.5..1.5);
                let cut = 0.9 * support;
                ModeFunction::from_real_fn(*grid, move |r| {
                    if r > support {
                        return 0.0;
                    }
                    let taper = if r > cut { (PI * (support - r) / (2.0 * (support - cut))).sin().powi(2) } else { 1.0 };
                    amp * (r * r / (1.0 + r * r)).powf(l / 2.0) * (-((r - centre) / width).powi(2)).exp() * taper
                })
            }
            DataFamily::Shells => {
                let j = rng.gen_range(j_lo..=j_hi);
                let a = 2f64.powi(j);
                ModeFunction::indicator(*grid, a, 2.0 * a)
            }
            DataFamily::DyadicBumps => {
                let count = rng.gen_range(1..=3);
                let bumps: Vec<(f64, f64)> =
                    (0..count).map(|_| (2f64.powi(rng.gen_range(j_lo..=j_hi)), rng.gen_range(0.5..1.5))).collect();
                ModeFunction::from_real_fn(*grid, move |r| {
                    bumps
                        .iter()
                        .filter(|(a, _)| r > *a && r < 2.0 * a)
                        .map(|(a, amp)| amp * (PI * (r - a) / a).sin().powi(2))
                        .sum()
                })
            }
        };
        out.push(f.scale(Complex64::new(spec.amplitude, 0.0)));
    }
    Ok(out)
}

/// Lattice, data and estimate of a uniformity sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub grid: RadialGrid,
    pub potentials: Vec<PotentialSpec>,
    pub boundary: Boundary,
    pub sign: Sign,
    pub estimate: Estimate,
    pub tau_list: Vec<f64>,
    pub epsilon_list: Vec<f64>,
    /// Ball radii of the Kato-type estimates.
    pub radius_list: Vec<f64>,
    /// Lower radius `ρ` of the `X_ρ`, `X*_ρ` norms.
    pub rho: f64,
    /// Exponent of the `(1+r)^{∓(1+α)}` weights.
    pub alpha: f64,
    pub conventions: Vec<TauConvention>,
    pub data: DataSpec,
    pub leak_threshold: f64,
}

/// One reported ratio: the maximum over the data of `lhs_term / rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub tau: f64,
    pub epsilon: f64,
    pub radius: f64,
    pub estimate: String,
    pub lhs_term: String,
    pub ratio: f64,
    /// Largest boundary leak over the data at this lattice point.
    pub leak: f64,
}

/// Uniformity of one `(estimate, τ, R, term)` series across `ε`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepAggregate {
    pub estimate: String,
    pub tau: f64,
    pub radius: f64,
    pub lhs_term: String,
    pub points: usize,
    /// `max ratio / min ratio` over `ε` (1 for an all-zero series).
    pub spread: f64,
    /// Least-squares slope of `log ratio` against `log ε`.
    pub slope: f64,
    pub max_ratio: f64,
}

/// Largest admissible `max/min` ratio across `ε`.
pub const DECADE_SPREAD: f64 = 10.0;
/// Largest admissible `|d log ratio / d log ε|`.
pub const DECADE_SLOPE: f64 = 0.1;

impl SweepAggregate {
    pub fn meets_decade_criterion(&self) -> bool {
        self.spread <= DECADE_SPREAD && self.slope.abs() <= DECADE_SLOPE
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    pub aggregates: Vec<SweepAggregate>,
    pub kept_points: usize,
    pub dropped_points: usize,
    /// Point counts by leak decade: `< 1e-8`, `[1e-8, 1e-7)`, …, `≥ 1e-1`.
    pub leak_histogram: Vec<usize>,
}

/// Bin of [`SweepReport::leak_histogram`].
pub fn leak_bin(leak: f64) -> usize {
    if !(leak >= 1e-8) {
        0
    } else {
        ((leak.log10().floor() as i64 + 9).clamp(1, 8)) as usize
    }
}

fn estimate_label(estimate: Estimate, convention: TauConvention) -> String {
    match convention {
        TauConvention::MinusTau => estimate.name().to_string(),
        TauConvention::PlusTau => format!("{}/plus_tau", estimate.name()),
    }
}

struct SweepContext<'a> {
    config: &'a SweepConfig,
    data: Vec<ModeFunction>,
    free: Option<Spectrum>,
    upper: f64,
    repulsive: Vec<f64>,
    attractive: Vec<f64>,
    total: Vec<f64>,
}

fn role_samples(grid: &RadialGrid, potentials: &[PotentialSpec], keep: impl Fn(PotentialRole) -> bool) -> Result<Vec<f64>> {
    let selected: Vec<PotentialSpec> = potentials.iter().filter(|p| keep(p.role)).cloned().collect();
    total_potential(grid, &selected)
}

fn inner(u: &ModeFunction, g: &ModeFunction, upper: f64) -> Complex64 {
    let grid = u.grid();
    let prod: Vec<Complex64> = u.values().iter().zip(g.values()).map(|(a, b)| a * b.conj()).collect();
    let re: Vec<f64> = prod.iter().map(|z| z.re).collect();
    let im: Vec<f64> = prod.iter().map(|z| z.im).collect();
    Complex64::new(
        integrate_density(grid, &re, Some(upper)).value,
        integrate_density(grid, &im, Some(upper)).value,
    )
}

impl SweepContext<'_> {
    fn problem(&self, tau: f64, epsilon: f64, convention: TauConvention, rhs: ModeFunction) -> ResolventProblem {
        let c = self.config;
        ResolventProblem::new(c.grid, c.potentials.clone(), c.sign, epsilon, tau, rhs)
            .with_boundary(c.boundary)
            .with_tau_convention(convention)
    }

    /// `(label, lhs, rhs)` triples and the boundary leak for one datum.
    fn terms(
        &self,
        tau: f64,
        epsilon: f64,
        convention: TauConvention,
        radius: f64,
        f: &ModeFunction,
    ) -> Result<(Vec<(&'static str, f64)>, f64, f64)> {
        let c = self.config;
        let grid = &c.grid;
        let upper = self.upper;
        let d = grid.dimension();
        let rho = c.rho;
        match c.estimate {
            Estimate::Juan10Kato | Estimate::Juan14Kato => {
                let ball = ModeFunction::indicator(*grid, 0.0, radius);
                let amplitude: Vec<Complex64> = match c.estimate {
                    Estimate::Juan14Kato => ball
                        .values()
                        .iter()
                        .zip(&self.total)
                        .map(|(chi, v)| *chi * (v.max(0.0).sqrt() / radius).sqrt())
                        .collect(),
                    _ => ball.values().iter().map(|chi| chi / radius.sqrt()).collect(),
                };
                let af = ModeFunction::new(
                    *grid,
                    f.values().iter().zip(&amplitude).map(|(z, a)| z * a).collect(),
                )?;
                let g = match (c.estimate, &self.free) {
                    (Estimate::Juan10Kato, Some(free)) => half_derivative(&af, free)?,
                    _ => af,
                };
                let sol = solve_resolvent(&self.problem(tau, epsilon, convention, g.clone()))?;
                let pairing = inner(&sol.u, &g, grid.r_max());
                let rhs = integrate_density(grid, &f.abs_sqr(), Some(upper)).value;
                Ok((vec![("kato_im", pairing.im.abs()), ("kato_abs", pairing.norm())], rhs, sol.boundary_leak))
            }
            estimate => {
                let sol = solve_resolvent(&self.problem(tau, epsilon, convention, f.clone()))?;
                let u = &sol.u;
                let abs2 = u.abs_sqr();
                let grad = grad_density(u);
                let rho_norm = if estimate == Estimate::Basic { 0.0 } else { rho };
                let tau_plus = tau.max(0.0);
                let with = |w: &dyn Fn(usize) -> f64| -> Vec<f64> { abs2.iter().enumerate().map(|(i, a)| a * w(i)).collect() };
                let mut terms: Vec<(&'static str, f64)> = Vec::new();
                let rhs;
                match estimate {
                    Estimate::WeightedSinpeque => {
                        let decay: Vec<f64> = grid.nodes().iter().map(|r| (1.0 + r).powf(-1.0 - c.alpha)).collect();
                        let gw: Vec<f64> = grad.iter().zip(&decay).map(|(g, w)| g * w).collect();
                        terms.push(("grad_weighted", integrate_density(grid, &gw, Some(upper)).value));
                        terms.push((
                            "tau_weighted",
                            tau_plus * integrate_density(grid, &with(&|i| decay[i]), Some(upper)).value,
                        ));
                        let grow: Vec<f64> = f.abs_sqr().iter().zip(&decay).map(|(a, w)| a / w).collect();
                        rhs = integrate_density(grid, &grow, None).value;
                    }
                    _ => {
                        terms.push(("grad_x", sup_ball_average(grid, &grad, rho_norm, upper, 1.0)));
                        terms.push(("tau_x", tau_plus * sup_ball_average(grid, &abs2, rho_norm, upper, 1.0)));
                        if d > 3 {
                            let cum = CumulativeIntegral::new(grid, &with(&|i| grid.node(i).powi(-3)));
                            let lo = if estimate == Estimate::Mayo10 { rho } else { 0.0 };
                            terms.push(("dim_r3", (d as f64 - 3.0) * cum.between(lo, upper)));
                        }
                        if estimate != Estimate::Mayo10 && self.repulsive.iter().any(|v| *v != 0.0) {
                            let dens = with(&|i| self.repulsive[i] / grid.node(i));
                            terms.push(("v_over_r", integrate_density(grid, &dens, Some(upper)).value));
                        }
                        if estimate == Estimate::Basic {
                            terms.push(("ball_r3", sup_ball_average(grid, &abs2, 0.0, upper, 3.0)));
                        } else {
                            terms.push(("sphere", sup_sphere_average(u, rho, upper)));
                        }
                        if estimate == Estimate::BasicAttractive {
                            let dens = with(&|i| self.attractive[i].abs());
                            terms.push(("n_x", sup_ball_average(grid, &dens, rho, upper, 1.0)));
                        }
                        rhs = norm_xstar(f, rho_norm).powi(2);
                    }
                }
                let total = terms.iter().map(|(_, v)| v).sum();
                terms.push(("total", total));
                Ok((terms, rhs, sol.boundary_leak))
            }
        }
    }
}

struct PointResult {
    ratios: Vec<(&'static str, f64)>,
    leak: f64,
}

/// Solve every lattice point for every datum, form `lhs/rhs` ratios, drop
/// points whose largest boundary leak exceeds the threshold and aggregate
/// the uniformity across `ε`.
pub fn supersmooth_sweep(config: &SweepConfig) -> Result<SweepReport> {
    if config.tau_list.is_empty() || config.epsilon_list.is_empty() || config.conventions.is_empty() {
        return Err(Error::Rejected("sweep needs nonempty τ, ε and convention lists".into()));
    }
    if config.epsilon_list.iter().any(|e| !(*e > 0.0)) {
        return Err(Error::Rejected("every ε must be positive".into()));
    }
    if config.data.count == 0 {
        return Err(Error::Rejected("sweep needs at least one datum".into()));
    }
    if config.estimate.uses_radii() && (config.radius_list.is_empty() || config.radius_list.iter().any(|r| !(*r > 0.0))) {
        return Err(Error::Rejected(format!("{} needs positive radii", config.estimate.name())));
    }
    if !(config.rho >= 0.0) || (config.estimate == Estimate::WeightedSinpeque && !(config.alpha > 0.0)) {
        return Err(Error::Rejected("sweep needs ρ ≥ 0 and α > 0 for the weighted estimate".into()));
    }
    let grid = config.grid;
    let upper = match config.boundary {
        Boundary::Dirichlet => grid.r_max(),
        Boundary::Sponge { width, .. } => grid.r_max() * (1.0 - width),
    };
    let ctx = SweepContext {
        config,
        data: generate_data(&grid, &config.data, 0.5 * upper)?,
        free: if config.estimate == Estimate::Juan10Kato { Some(free_spectrum(&grid)?) } else { None },
        upper,
        repulsive: role_samples(&grid, &config.potentials, |r| r == PotentialRole::VRepulsive)?,
        attractive: role_samples(&grid, &config.potentials, |r| r == PotentialRole::NAttractive)?,
        total: total_potential(&grid, &config.potentials)?,
    };
    let radii = if config.estimate.uses_radii() { config.radius_list.clone() } else { vec![config.rho] };
    let mut lattice = Vec::new();
    for &convention in &config.conventions {
        for &tau in &config.tau_list {
            for &radius in &radii {
                for &epsilon in &config.epsilon_list {
                    lattice.push((convention, tau, radius, epsilon));
                }
            }
        }
    }
    let results: Vec<Result<PointResult>> = lattice
        .par_iter()
        .map(|&(convention, tau, radius, epsilon)| {
            let mut ratios: Vec<(&'static str, f64)> = Vec::new();
            let mut leak: f64 = 0.0;
            for f in &ctx.data {
                let (terms, rhs, datum_leak) = ctx.terms(tau, epsilon, convention, radius, f)?;
                leak = leak.max(datum_leak);
                if ratios.is_empty() {
                    ratios = terms.iter().map(|(l, _)| (*l, 0.0)).collect();
                }
                for ((_, r), (_, lhs)) in ratios.iter_mut().zip(&terms) {
                    let q = if rhs > 0.0 { lhs / rhs } else { 0.0 };
                    *r = r.max(q);
                }
            }
            Ok(PointResult { ratios, leak })
        })
        .collect();
    let mut rows = Vec::new();
    let mut histogram = vec![0usize; 9];
    let (mut kept, mut dropped) = (0, 0);
    for (&(convention, tau, radius, epsilon), result) in lattice.iter().zip(results) {
        let point = result?;
        histogram[leak_bin(point.leak)] += 1;
        if point.leak > config.leak_threshold {
            dropped += 1;
            continue;
        }
        kept += 1;
        for (label, ratio) in point.ratios {
            rows.push(SweepRow {
                tau,
                epsilon,
                radius,
                estimate: estimate_label(config.estimate, convention),
                lhs_term: label.to_string(),
                ratio,
                leak: point.leak,
            });
        }
    }
    if kept == 0 {
        return Err(Error::AllContaminated { histogram });
    }
    let aggregates = aggregate(&rows);
    Ok(SweepReport {
        rows,
        aggregates,
        kept_points: kept,
        dropped_points: dropped,
        leak_histogram: histogram,
    })
}

/// Group rows by `(estimate, τ, R, term)` in order of appearance and measure
/// the spread and trend across `ε`.
pub fn aggregate(rows: &[SweepRow]) -> Vec<SweepAggregate> {
    let mut groups: Vec<(SweepAggregate, Vec<(f64, f64)>)> = Vec::new();
    for row in rows {
        let pos = groups.iter().position(|(g, _)| {
            g.estimate == row.estimate && g.tau == row.tau && g.radius == row.radius && g.lhs_term == row.lhs_term
        });
        let entry = (row.epsilon, row.ratio);
        match pos {
            Some(k) => groups[k].1.push(entry),
            None => groups.push((
                SweepAggregate {
                    estimate: row.estimate.clone(),
                    tau: row.tau,
                    radius: row.radius,
                    lhs_term: row.lhs_term.clone(),
                    points: 0,
                    spread: 1.0,
                    slope: 0.0,
                    max_ratio: 0.0,
                },
                vec![entry],
            )),
        }
    }
    groups
        .into_iter()
        .map(|(mut g, series)| {
            let (spread, slope) = decade_statistics(&series);
            g.points = series.len();
            g.spread = spread;
            g.slope = slope;
            g.max_ratio = series.iter().map(|(_, r)| *r).fold(0.0, f64::max);
            g
        })
        .collect()
}

/// `(max/min, slope of log ratio against log ε)` of an `(ε, ratio)` series.
/// An all-zero series is perfectly uniform; a series that vanishes only at
/// some points has infinite spread.
pub fn decade_statistics(series: &[(f64, f64)]) -> (f64, f64) {
    let max = series.iter().map(|(_, r)| *r).fold(0.0, f64::max);
    let min = series.iter().map(|(_, r)| *r).fold(f64::INFINITY, f64::min);
    if max == 0.0 {
        return (1.0, 0.0);
    }
    if !(min > 0.0) {
        return (f64::INFINITY, f64::INFINITY);
    }
    let x: Vec<f64> = series.iter().map(|(e, _)| e.log10()).collect();
    let y: Vec<f64> = series.iter().map(|(_, r)| r.log10()).collect();
    (max / min, linear_fit(&x, &y).0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interval_membership() {
        let i = SpectralInterval::left_open(0.0, 1.0);
        assert!(!i.contains(0.0));
        assert!(i.contains(1.0));
        assert!(SpectralInterval::at_least(2.0).contains(1e300));
        assert!(!SpectralInterval::closed(1.0, 2.0).contains(2.5));
    }

    #[test]
    fn leak_bins() {
        assert_eq!(leak_bin(0.0), 0);
        assert_eq!(leak_bin(1e-8), 1);
        assert_eq!(leak_bin(5e-4), 5);
        assert_eq!(leak_bin(0.5), 8);
        assert_eq!(leak_bin(3.0), 8);
    }

    #[test]
    fn decade_statistics_of_power_law() {
        let series: Vec<(f64, f64)> = [1e-3, 1e-2, 1e-1, 1.0].iter().map(|&e: &f64| (e, 2.0 * e.powf(0.05))).collect();
        let (spread, slope) = decade_statistics(&series);
        assert!((slope - 0.05).abs() < 1e-12);
        assert!((spread - 1000f64.powf(0.05)).abs() < 1e-12);
        assert_eq!(decade_statistics(&[(1.0, 0.0), (0.1, 0.0)]), (1.0, 0.0));
    }

    #[test]
    fn names_round_trip() {
        for e in Estimate::ALL {
            assert_eq!(Estimate::parse(e.name()), Some(e));
        }
        for f in DataFamily::ALL {
            assert_eq!(DataFamily::parse(f.name()), Some(f));
        }
    }
}
