//! Uniform radial grids, mode functions and the weighted integrals and
//! Morrey–Campanato norms built on them.
//!
//! A [`ModeFunction`] holds samples of the radial profile `f` of
//! `u(x) = f(|x|) Y(x/|x|)`, where `Y` is a degree-`ℓ` spherical harmonic
//! with unit mean square on the unit sphere. With this normalization
//! `∫ w(|x|)|u(x)|² dx = ω ∫ w(r)|f(r)|² r^{d-1} dr`, where `ω` is the area
//! of the unit sphere, so the indicator of the unit ball has integral equal
//! to the ball volume.

use crate::error::{Error, Result};
use crate::numeric::{derivative_4th, sphere_area, CompensatedSum};
use crate::potentials::PotentialSpec;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Uniform radial mesh `r_i = i h`, `i = 1..=n`, for dimension `d` and
/// angular degree `ℓ`. Node indices in the API are zero-based: node `i`
/// sits at `(i + 1) h`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadialGrid {
    d: usize,
    l: usize,
    n: usize,
    h: f64,
}

impl RadialGrid {
    /// Grid with `n` nodes ending at `r_max`.
    pub fn new(d: usize, l: usize, n: usize, r_max: f64) -> Result<Self> {
        if d < 2 {
            return Err(Error::Domain(format!("dimension must be at least 2, got {d}")));
        }
        if n < 5 {
            return Err(Error::Domain(format!("a grid needs at least 5 nodes, got {n}")));
        }
        if !(r_max.is_finite() && r_max > 0.0) {
            return Err(Error::Domain(format!("r_max must be positive, got {r_max}")));
        }
        Ok(Self {
            d,
            l,
            n,
            h: r_max / n as f64,
        })
    }

    pub fn dimension(&self) -> usize {
        self.d
    }

    pub fn mode(&self) -> usize {
        self.l
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn r_max(&self) -> f64 {
        self.n as f64 * self.h
    }

    /// Radius of node `i` (zero-based).
    pub fn node(&self, i: usize) -> f64 {
        (i + 1) as f64 * self.h
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.node(i)).collect()
    }

    /// Area of the unit sphere in `R^d`.
    pub fn sphere_area(&self) -> f64 {
        sphere_area(self.d)
    }

    /// Eigenvalue `ℓ(ℓ + d − 2)` of the spherical Laplacian for this mode.
    pub fn angular_eigenvalue(&self) -> f64 {
        (self.l * (self.l + self.d - 2)) as f64
    }

    /// Node volume weights `ω r_i^{d-1} h`.
    pub fn volume_weights(&self) -> Vec<f64> {
        let area = self.sphere_area();
        self.nodes()
            .iter()
            .map(|r| area * r.powi(self.d as i32 - 1) * self.h)
            .collect()
    }

    /// Same mesh with a different angular degree.
    pub fn with_mode(&self, l: usize) -> Self {
        Self { l, ..*self }
    }

    /// Same radial extent with `factor` times as many nodes.
    pub fn refined(&self, factor: usize) -> Self {
        Self {
            n: self.n * factor,
            h: self.h / factor as f64,
            ..*self
        }
    }

    /// Zero-based index of the node closest to `r`.
    pub fn nearest_node(&self, r: f64) -> usize {
        let k = (r / self.h).round() as isize - 1;
        k.clamp(0, self.n as isize - 1) as usize
    }

    pub(crate) fn ensure_same(&self, other: &RadialGrid) -> Result<()> {
        if self.d == other.d && self.n == other.n && (self.h - other.h).abs() <= 1e-14 * self.h {
            Ok(())
        } else {
            Err(Error::MismatchedGrids)
        }
    }
}

/// Complex samples of one spherical-harmonic coefficient on a grid, with
/// optional derivative samples.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeFunction {
    grid: RadialGrid,
    values: Vec<Complex64>,
    derivative: Option<Vec<Complex64>>,
}

impl ModeFunction {
    pub fn new(grid: RadialGrid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Domain(format!(
                "expected {} samples, got {}",
                grid.len(),
                values.len()
            )));
        }
        if values.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Domain("mode function has non-finite samples".into()));
        }
        Ok(Self {
            grid,
            values,
            derivative: None,
        })
    }

    pub fn zeros(grid: RadialGrid) -> Self {
        Self {
            grid,
            values: vec![Complex64::new(0.0, 0.0); grid.len()],
            derivative: Some(vec![Complex64::new(0.0, 0.0); grid.len()]),
        }
    }

    /// Samples of a complex profile.
    pub fn from_fn(grid: RadialGrid, f: impl Fn(f64) -> Complex64) -> Self {
        Self {
            grid,
            values: grid.nodes().into_iter().map(f).collect(),
            derivative: None,
        }
    }

    /// Samples of a real profile.
    pub fn from_real_fn(grid: RadialGrid, f: impl Fn(f64) -> f64) -> Self {
        Self::from_fn(grid, |r| Complex64::new(f(r), 0.0))
    }

    /// Samples of a real profile together with its exact derivative.
    pub fn from_real_fn_with_derivative(grid: RadialGrid, f: impl Fn(f64) -> f64, df: impl Fn(f64) -> f64) -> Self {
        let nodes = grid.nodes();
        Self {
            grid,
            values: nodes.iter().map(|&r| Complex64::new(f(r), 0.0)).collect(),
            derivative: Some(nodes.iter().map(|&r| Complex64::new(df(r), 0.0)).collect()),
        }
    }

    /// Indicator of the shell `a < r ≤ b` (`a = 0` gives the closed ball).
    /// Nodes lying on a boundary radius get the value `1/√2`, so that `|χ|²`
    /// takes the midpoint value 1/2 there and quadratic quantities keep the
    /// second-order accuracy of the trapezoid rule across the jump.
    pub fn indicator(grid: RadialGrid, a: f64, b: f64) -> Self {
        let tol = 1e-9 * grid.spacing();
        let values = grid
            .nodes()
            .into_iter()
            .map(|r| {
                let v = if (r - a).abs() <= tol && a > 0.0 || (r - b).abs() <= tol {
                    std::f64::consts::FRAC_1_SQRT_2
                } else if r > a && r < b {
                    1.0
                } else {
                    0.0
                };
                Complex64::new(v, 0.0)
            })
            .collect();
        Self {
            grid,
            values,
            derivative: None,
        }
    }

    pub fn with_derivative(mut self, derivative: Vec<Complex64>) -> Result<Self> {
        if derivative.len() != self.grid.len() {
            return Err(Error::Domain("derivative sample count mismatch".into()));
        }
        self.derivative = Some(derivative);
        Ok(self)
    }

    pub fn grid(&self) -> &RadialGrid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn derivative(&self) -> Option<&[Complex64]> {
        self.derivative.as_deref()
    }

    /// Derivative samples, falling back to fourth-order differences of the
    /// values when none are stored.
    pub fn derivative_or_differences(&self) -> Vec<Complex64> {
        match &self.derivative {
            Some(d) => d.clone(),
            None => {
                let h = self.grid.spacing();
                let re: Vec<f64> = self.values.iter().map(|z| z.re).collect();
                let im: Vec<f64> = self.values.iter().map(|z| z.im).collect();
                derivative_4th(&re, h)
                    .into_iter()
                    .zip(derivative_4th(&im, h))
                    .map(|(a, b)| Complex64::new(a, b))
                    .collect()
            }
        }
    }

    /// Pointwise `|u|²`.
    pub fn abs_sqr(&self) -> Vec<f64> {
        self.values.iter().map(|z| z.norm_sqr()).collect()
    }

    /// Value at radius `r` by linear interpolation (zero continuation below
    /// the first node is not assumed; `r` must lie in `[h, r_max]`).
    pub fn interpolate(&self, r: f64) -> Result<Complex64> {
        let h = self.grid.spacing();
        let r_max = self.grid.r_max();
        if !(r >= h * (1.0 - 1e-12) && r <= r_max * (1.0 + 1e-12)) {
            return Err(Error::Domain(format!("radius {r} outside [{h}, {r_max}]")));
        }
        let x = (r / h - 1.0).clamp(0.0, (self.grid.len() - 1) as f64);
        let k = (x.floor() as usize).min(self.grid.len() - 2);
        let t = x - k as f64;
        Ok(self.values[k] * (1.0 - t) + self.values[k + 1] * t)
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|z| z * factor).collect(),
            derivative: self.derivative.as_ref().map(|d| d.iter().map(|z| z * factor).collect()),
        }
    }

    pub fn conj(&self) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|z| z.conj()).collect(),
            derivative: self.derivative.as_ref().map(|d| d.iter().map(|z| z.conj()).collect()),
        }
    }

    /// Pointwise sum (derivatives are kept only when both carry them).
    pub fn add(&self, other: &ModeFunction) -> Result<Self> {
        self.grid.ensure_same(&other.grid)?;
        let derivative = match (&self.derivative, &other.derivative) {
            (Some(a), Some(b)) => Some(a.iter().zip(b).map(|(x, y)| x + y).collect()),
            _ => None,
        };
        Ok(Self {
            grid: self.grid,
            values: self.values.iter().zip(&other.values).map(|(x, y)| x + y).collect(),
            derivative,
        })
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

/// Radial weight in `∫ w(|x|)|u(x)|² dx`.
#[derive(Debug, Clone, PartialEq)]
pub enum Weight {
    One,
    InvR,
    InvR2,
    InvR3,
    /// `V(r)/r` for a potential.
    PotentialOverR(Box<PotentialSpec>),
    /// `(1 + r)^{exponent}`, used with `exponent = ±(1 + α)`.
    OnePlusRPow(f64),
    /// `ψ_R(r) = R/(R² + r²)`.
    Psi(f64),
    /// `V(r)^{1/2}` restricted to the ball of radius `radius`.
    SqrtPotentialIndicator { potential: Box<PotentialSpec>, radius: f64 },
    /// `(1/R) χ_{r ≤ R}`.
    BallAverage(f64),
    /// Arbitrary samples at the nodes.
    Sampled(Vec<f64>),
}

impl Weight {
    /// Samples at the nodes and the support radius (if the weight is an
    /// indicator-restricted function).
    pub fn sample(&self, grid: &RadialGrid) -> Result<(Vec<f64>, Option<f64>)> {
        let nodes = grid.nodes();
        let map = |f: &dyn Fn(f64) -> f64| nodes.iter().map(|&r| f(r)).collect::<Vec<f64>>();
        Ok(match self {
            Weight::One => (vec![1.0; grid.len()], None),
            Weight::InvR => (map(&|r| 1.0 / r), None),
            Weight::InvR2 => (map(&|r| 1.0 / (r * r)), None),
            Weight::InvR3 => (map(&|r| 1.0 / (r * r * r)), None),
            Weight::PotentialOverR(v) => {
                let mut out = Vec::with_capacity(grid.len());
                for &r in &nodes {
                    out.push(v.eval(r)? / r);
                }
                (out, None)
            }
            Weight::OnePlusRPow(p) => (map(&|r| (1.0 + r).powf(*p)), None),
            Weight::Psi(big_r) => (map(&|r| big_r / (big_r * big_r + r * r)), None),
            Weight::SqrtPotentialIndicator { potential, radius } => {
                let mut out = Vec::with_capacity(grid.len());
                for &r in &nodes {
                    let v = potential.eval(r)?;
                    out.push(if r <= *radius { v.max(0.0).sqrt() } else { 0.0 });
                }
                (out, Some(*radius))
            }
            Weight::BallAverage(radius) => (vec![1.0 / radius; grid.len()], Some(*radius)),
            Weight::Sampled(s) => {
                if s.len() != grid.len() {
                    return Err(Error::Domain("sampled weight length mismatch".into()));
                }
                (s.clone(), None)
            }
        })
    }
}

/// Result of a radial integral.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialIntegral {
    pub value: f64,
    /// Contribution of the cell `[0, h]` next to the origin.
    pub first_cell: f64,
    /// The integrand grows at least like `r^{-1}` (in `dr`) at the first
    /// nodes, so the origin cell dominates and the value is unreliable.
    pub singular: bool,
}

/// Cumulative integral `R ↦ ∫_{B(0,R)} D(|x|) dx` of a radial density `D`
/// sampled at the nodes.
///
/// Cells between nodes use the trapezoid rule on `g(r) = ω r^{d-1} D(r)`;
/// the origin cell `[0, h]` uses a power-law fit `g ≈ g₁ (r/h)^q` through the
/// first two nodes, which is exact for power-law singularities and
/// contributes `O(h^{d+1})` for smooth densities.
#[derive(Debug, Clone)]
pub struct CumulativeIntegral {
    h: f64,
    g: Vec<f64>,
    prefix: Vec<f64>,
    first_cell: f64,
    exponent: f64,
    singular: bool,
}

impl CumulativeIntegral {
    pub fn new(grid: &RadialGrid, density: &[f64]) -> Self {
        assert_eq!(density.len(), grid.len());
        let area = grid.sphere_area();
        let d = grid.dimension() as i32;
        let h = grid.spacing();
        let g: Vec<f64> = density
            .iter()
            .enumerate()
            .map(|(i, v)| area * grid.node(i).powi(d - 1) * v)
            .collect();
        Self::from_line_samples(h, g, (d - 1) as f64)
    }

    /// Cumulative `∫₀^R g(r) dr` of samples `g` taken at `r_i = i h`,
    /// `i = 1..=n`. `default_exponent` is the power assumed near the origin
    /// when the first two samples do not determine one.
    pub fn from_line_samples(h: f64, g: Vec<f64>, default_exponent: f64) -> Self {
        assert!(g.len() >= 2, "need at least two samples");
        let (g1, g2) = (g[0], g[1]);
        let mut singular = false;
        let mut exponent = default_exponent;
        if g1 != 0.0 && g2 != 0.0 && g1.signum() == g2.signum() {
            exponent = (g2 / g1).log2();
        }
        let first_cell = if g1 == 0.0 {
            0.0
        } else if exponent <= -1.0 + 1e-6 {
            singular = true;
            exponent = 0.0;
            g1 * h
        } else {
            g1 * h / (exponent + 1.0)
        };
        let mut prefix = Vec::with_capacity(g.len());
        let mut acc = CompensatedSum::new();
        acc.add(first_cell);
        prefix.push(acc.value());
        for i in 1..g.len() {
            acc.add(0.5 * h * (g[i - 1] + g[i]));
            prefix.push(acc.value());
        }
        Self {
            h,
            g,
            prefix,
            first_cell,
            exponent,
            singular,
        }
    }

    /// One-dimensional cumulative integral of samples at `r_i = i h`.
    pub fn on_line(h: f64, samples: &[f64]) -> Self {
        Self::from_line_samples(h, samples.to_vec(), 0.0)
    }

    /// `∫_{B(0,R)} D`, with `R` clamped to `[0, r_max]`.
    pub fn to(&self, radius: f64) -> f64 {
        let n = self.g.len();
        let r_max = n as f64 * self.h;
        if radius <= 0.0 {
            return 0.0;
        }
        if radius >= r_max {
            return self.prefix[n - 1];
        }
        if radius <= self.h {
            if self.first_cell == 0.0 {
                return 0.0;
            }
            let s = radius / self.h;
            return self.first_cell * s.powf(self.exponent + 1.0);
        }
        let x = radius / self.h - 1.0;
        let k = (x.floor() as usize).min(n - 2);
        let t = x - k as f64;
        if t == 0.0 {
            return self.prefix[k];
        }
        let g_end = self.g[k] + (self.g[k + 1] - self.g[k]) * t;
        self.prefix[k] + 0.5 * t * self.h * (self.g[k] + g_end)
    }

    /// `∫_{a < |x| ≤ b} D`, summed over the cells in `(a, b]` so that far
    /// shells of a decaying density keep their relative accuracy.
    pub fn between(&self, a: f64, b: f64) -> f64 {
        let n = self.g.len();
        let r_max = n as f64 * self.h;
        let b = b.min(r_max);
        if a <= self.h || b <= a {
            return self.to(b) - self.to(a);
        }
        let locate = |radius: f64| {
            let x = radius / self.h - 1.0;
            let k = (x.floor() as usize).min(n - 2);
            (k, x - k as f64)
        };
        let at = |k: usize, t: f64| self.g[k] + (self.g[k + 1] - self.g[k]) * t;
        let (ka, ta) = locate(a);
        let (kb, tb) = locate(b);
        if ka == kb {
            return 0.5 * (tb - ta) * self.h * (at(ka, ta) + at(kb, tb));
        }
        let mut acc = CompensatedSum::new();
        acc.add(0.5 * (1.0 - ta) * self.h * (at(ka, ta) + self.g[ka + 1]));
        for k in ka + 1..kb {
            acc.add(0.5 * self.h * (self.g[k] + self.g[k + 1]));
        }
        acc.add(0.5 * tb * self.h * (self.g[kb] + at(kb, tb)));
        acc.value()
    }

    pub fn total(&self) -> f64 {
        *self.prefix.last().expect("non-empty grid")
    }

    pub fn summary(&self, radius: f64) -> RadialIntegral {
        RadialIntegral {
            value: self.to(radius),
            first_cell: self.first_cell,
            singular: self.singular,
        }
    }

    pub fn first_cell(&self) -> f64 {
        self.first_cell
    }

    pub fn is_singular(&self) -> bool {
        self.singular
    }
}

/// `∫ D(|x|) dx` over the grid (or over `B(0, upper)`).
pub fn integrate_density(grid: &RadialGrid, density: &[f64], upper: Option<f64>) -> RadialIntegral {
    let cum = CumulativeIntegral::new(grid, density);
    cum.summary(upper.unwrap_or_else(|| grid.r_max()))
}

/// `∫ w(|x|)|u(x)|² dx`.
pub fn integrate_radial(u: &ModeFunction, weight: &Weight) -> Result<RadialIntegral> {
    let (w, upper) = weight.sample(u.grid())?;
    let density: Vec<f64> = u.values().iter().zip(&w).map(|(z, wi)| z.norm_sqr() * wi).collect();
    Ok(integrate_density(u.grid(), &density, upper))
}

/// `∫_{|x| = R} |u|² dσ = ω R^{d-1} |u(R)|²` with linear interpolation.
pub fn integrate_sphere(u: &ModeFunction, radius: f64) -> Result<f64> {
    let value = u.interpolate(radius)?;
    let grid = u.grid();
    Ok(grid.sphere_area() * radius.powi(grid.dimension() as i32 - 1) * value.norm_sqr())
}

/// Radii used for the discrete supremum over `R ≥ ρ`: powers of two in
/// `[max(ρ, h), upper]` followed by `upper` itself.
pub fn dyadic_radii(grid: &RadialGrid, rho: f64, upper: f64) -> Vec<f64> {
    let upper = upper.min(grid.r_max());
    let lo = rho.max(grid.spacing());
    let mut out = Vec::new();
    let mut k = lo.log2().ceil() as i32;
    loop {
        let r = 2f64.powi(k);
        if r > upper * (1.0 + 1e-12) {
            break;
        }
        if r >= lo * (1.0 - 1e-12) {
            out.push(r);
        }
        k += 1;
    }
    if out.last().map_or(true, |&r| (r - upper).abs() > 1e-12 * upper) {
        out.push(upper);
    }
    out
}

/// `sup_R R^{-power} ∫_{B(0,R)} D` over [`dyadic_radii`].
pub fn sup_ball_average(grid: &RadialGrid, density: &[f64], rho: f64, upper: f64, power: f64) -> f64 {
    let cum = CumulativeIntegral::new(grid, density);
    dyadic_radii(grid, rho, upper)
        .into_iter()
        .map(|r| cum.to(r) / r.powf(power))
        .fold(0.0, f64::max)
}

/// `sup_R R^{-power} ∫_{B(0,R)} D` over every node radius in `[max(ρ,h), upper]`.
pub fn sup_ball_average_all_nodes(grid: &RadialGrid, density: &[f64], rho: f64, upper: f64, power: f64) -> f64 {
    let cum = CumulativeIntegral::new(grid, density);
    grid.nodes()
        .into_iter()
        .filter(|&r| r >= rho && r <= upper * (1.0 + 1e-12))
        .map(|r| cum.to(r) / r.powf(power))
        .fold(0.0, f64::max)
}

/// `‖u‖_{X_ρ}` (`ρ = 0` gives `‖u‖_X`).
pub fn norm_x(u: &ModeFunction, rho: f64) -> f64 {
    norm_x_density(u.grid(), &u.abs_sqr(), rho, u.grid().r_max())
}

/// `(sup_{R ≥ ρ} R^{-1} ∫_{B(0,R)} D)^{1/2}` with radii capped at `upper`.
pub fn norm_x_density(grid: &RadialGrid, density: &[f64], rho: f64, upper: f64) -> f64 {
    sup_ball_average(grid, density, rho, upper, 1.0).sqrt()
}

/// `sup_{R ≥ ρ} R^{-2} ∫_{|x|=R} |u|²` over node radii up to `upper`.
pub fn sup_sphere_average(u: &ModeFunction, rho: f64, upper: f64) -> f64 {
    let grid = u.grid();
    let area = grid.sphere_area();
    let d = grid.dimension() as i32;
    u.values()
        .iter()
        .enumerate()
        .map(|(i, z)| (grid.node(i), z))
        .filter(|(r, _)| *r >= rho && *r <= upper * (1.0 + 1e-12))
        .map(|(r, z)| area * r.powi(d - 3) * z.norm_sqr())
        .fold(0.0, f64::max)
}

/// Index `j₀` with `2^{j₀} < ρ ≤ 2^{j₀+1}`.
pub fn shell_index(rho: f64) -> i32 {
    let j = rho.log2().ceil() as i32 - 1;
    // Guard against rounding at exact powers of two.
    if 2f64.powi(j + 1) < rho {
        j + 1
    } else if 2f64.powi(j) >= rho {
        j - 1
    } else {
        j
    }
}

/// `‖f‖_{X*_ρ}` (`ρ = 0` gives `‖f‖_{X*}`).
pub fn norm_xstar(f: &ModeFunction, rho: f64) -> f64 {
    norm_xstar_density(f.grid(), &f.abs_sqr(), rho)
}

/// Dyadic-shell sum `Σ_j (2^{j+1} ∫_{C_j} D)^{1/2}` plus the ball term
/// `(ρ ∫_{B(0,ρ)} D)^{1/2}` when `ρ > 0`.
pub fn norm_xstar_density(grid: &RadialGrid, density: &[f64], rho: f64) -> f64 {
    let cum = CumulativeIntegral::new(grid, density);
    let j_lo = grid.spacing().log2().floor() as i32;
    let j_hi = grid.r_max().log2().ceil() as i32;
    let mut acc = CompensatedSum::new();
    let j_start = if rho > 0.0 { shell_index(rho).max(j_lo) } else { j_lo };
    for j in j_start..=j_hi {
        let inner = if rho <= 0.0 && j == j_lo { 0.0 } else { 2f64.powi(j) };
        let outer = 2f64.powi(j + 1);
        let mass = cum.between(inner, outer).max(0.0);
        acc.add((2f64.powi(j + 1) * mass).sqrt());
    }
    if rho > 0.0 {
        acc.add((rho * cum.to(rho).max(0.0)).sqrt());
    }
    acc.value()
}

/// Pointwise `|∇u|²` for the mode: `|u'|² + ℓ(ℓ+d−2)|u|²/r²`.
pub fn grad_density(u: &ModeFunction) -> Vec<f64> {
    let grid = u.grid();
    let lam = grid.angular_eigenvalue();
    let du = u.derivative_or_differences();
    u.values()
        .iter()
        .zip(&du)
        .enumerate()
        .map(|(i, (z, dz))| {
            let r = grid.node(i);
            dz.norm_sqr() + lam * z.norm_sqr() / (r * r)
        })
        .collect()
}

/// Outcome of the discrete Hardy probe.
#[derive(Debug, Clone, PartialEq)]
pub struct HardyProbe {
    /// Hardy constant `(2/(d−2))²`.
    pub constant: f64,
    /// `∫|u|²/r² ÷ ∫|∇u|²` for each trial, in trial order.
    pub ratios: Vec<f64>,
    pub worst: f64,
}

/// Hardy ratios for the trial family `r^{(2−d)/2 + δ_k}(1 − r/r_max)²` with
/// `δ_k = 2^{-k}` (`k = 0..trials`), plus `r e^{-r}`. All trials vanish at
/// the far end of the grid; exact derivatives are used.
pub fn check_discrete_hardy(grid: &RadialGrid, trials: usize) -> Result<HardyProbe> {
    let d = grid.dimension();
    if d < 3 {
        return Err(Error::Domain("Hardy's inequality needs d ≥ 3".into()));
    }
    let grid = grid.with_mode(0);
    let r_max = grid.r_max();
    let constant = (2.0 / (d as f64 - 2.0)).powi(2);
    let mut ratios = Vec::with_capacity(trials + 1);
    let ratio = |u: &ModeFunction| -> Result<f64> {
        let num = integrate_radial(u, &Weight::InvR2)?.value;
        let den = integrate_density(&grid, &grad_density(u), None).value;
        Ok(num / den)
    };
    let base = u_exp(&grid, r_max);
    ratios.push(ratio(&base)?);
    for k in 0..trials {
        let a = (2.0 - d as f64) / 2.0 + 2f64.powi(-(k as i32));
        let u = ModeFunction::from_real_fn_with_derivative(
            grid,
            |r| r.powf(a) * (1.0 - r / r_max).powi(2),
            |r| a * r.powf(a - 1.0) * (1.0 - r / r_max).powi(2) - 2.0 * r.powf(a) * (1.0 - r / r_max) / r_max,
        );
        ratios.push(ratio(&u)?);
    }
    let worst = ratios.iter().copied().fold(0.0, f64::max);
    Ok(HardyProbe {
        constant,
        ratios,
        worst,
    })
}

fn u_exp(grid: &RadialGrid, r_max: f64) -> ModeFunction {
    let cut = |r: f64| (1.0 - r / r_max).powi(2);
    let dcut = |r: f64| -2.0 * (1.0 - r / r_max) / r_max;
    ModeFunction::from_real_fn_with_derivative(
        *grid,
        |r| r * (-r).exp() * cut(r),
        |r| (1.0 - r) * (-r).exp() * cut(r) + r * (-r).exp() * dcut(r),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn ball_volume_and_inverse_square_weight() {
        let grid = RadialGrid::new(3, 0, 400, 4.0).unwrap();
        let u = ModeFunction::indicator(grid, 0.0, 1.0);
        let vol = integrate_radial(&u, &Weight::One).unwrap().value;
        assert!((vol - 4.0 * PI / 3.0).abs() < 5e-4, "{vol}");
        let inv = integrate_radial(&u, &Weight::InvR2).unwrap().value;
        assert!((inv - 4.0 * PI).abs() < 1e-3, "{inv}");
    }

    #[test]
    fn sphere_integral_of_constant() {
        let grid = RadialGrid::new(3, 0, 100, 4.0).unwrap();
        let u = ModeFunction::from_real_fn(grid, |_| 1.0);
        assert!((integrate_sphere(&u, 2.0).unwrap() - 16.0 * PI).abs() < 1e-12);
        assert!(integrate_sphere(&u, 5.0).is_err());
    }

    #[test]
    fn x_norm_of_ball_indicator() {
        let grid = RadialGrid::new(3, 0, 1600, 8.0).unwrap();
        let u = ModeFunction::indicator(grid, 0.0, 1.0);
        let x2 = norm_x(&u, 0.0).powi(2);
        // The ball ends exactly on the dyadic radius 1, where the half-cell is lost.
        assert!((x2 - 4.0 * PI / 3.0).abs() < 4.0 * PI * grid.spacing(), "{x2}");
    }

    #[test]
    fn xstar_of_unit_shell() {
        let grid = RadialGrid::new(3, 0, 2000, 8.0).unwrap();
        let bump = |r: f64| if r > 1.0 && r < 2.0 { (PI * (r - 1.0)).sin().powi(2) } else { 0.0 };
        let f = ModeFunction::from_real_fn(grid, bump);
        let mass = 4.0 * PI * crate::numeric::integrate_gl(|r| r * r * bump(r).powi(2), 1.0, 2.0, 16, 8);
        let v = norm_xstar(&f, 0.0);
        assert!((v - (2.0 * mass).sqrt()).abs() < 1e-6, "{v}");
    }

    #[test]
    fn shell_index_brackets_rho() {
        for rho in [0.3, 0.5, 1.0, 1.5, 2.0, 3.0, 4.0, 1000.0] {
            let j = shell_index(rho);
            assert!(2f64.powi(j) < rho && rho <= 2f64.powi(j + 1), "{rho} {j}");
        }
    }

    #[test]
    fn gradient_density_of_angular_mode() {
        let grid = RadialGrid::new(3, 2, 50, 5.0).unwrap();
        let u = ModeFunction::from_real_fn_with_derivative(grid, |_| 1.0, |_| 0.0);
        for (i, g) in grad_density(&u).iter().enumerate() {
            let r = grid.node(i);
            assert!((g - 6.0 / (r * r)).abs() < 1e-12);
        }
    }
}
