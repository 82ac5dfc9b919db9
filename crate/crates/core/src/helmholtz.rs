//! Per-mode solver for `−Δu + Vu ± iεu ∓ τu = f`.
//!
//! With `v = r^{(d−1)/2} u` the radial equation becomes
//! `−v'' + [V + (ℓ(ℓ+d−2) + (d−1)(d−3)/4)/r²] v ± iεv − τv = r^{(d−1)/2} f`,
//! discretized with second-order central differences, `v(0) = 0` and a
//! homogeneous Dirichlet wall one spacing past the last node. The complex
//! symmetric tridiagonal system is solved directly with partial pivoting.

use crate::error::{Error, Result};
use crate::grids::{ModeFunction, RadialGrid};
use crate::linalg::Tridiagonal;
use crate::potentials::PotentialSpec;
use num_complex::Complex64;

/// Sign of the absorption term `±iεu`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn factor(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }
}

/// How the spectral parameter enters: `−τu` (resolvent at `τ ∓ iε`) or `+τu`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TauConvention {
    MinusTau,
    PlusTau,
}

impl TauConvention {
    /// Coefficient of `u` contributed by the `τ` term.
    pub fn coefficient(self, tau: f64) -> f64 {
        match self {
            TauConvention::MinusTau => -tau,
            TauConvention::PlusTau => tau,
        }
    }
}

/// Condition at the far end of the grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Boundary {
    Dirichlet,
    /// Absorbing layer on the last `width` fraction of the domain with
    /// profile `strength · s²`, `s` running from 0 to 1 across the layer,
    /// followed by the Dirichlet wall. The layer has the same sign as the
    /// `±iε` term so that it damps the same waves.
    Sponge { width: f64, strength: f64 },
}

/// One resolvent problem for a single spherical-harmonic mode.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolventProblem {
    pub grid: RadialGrid,
    /// Summed into the total potential; roles matter only to the identities
    /// and the hypothesis checkers.
    pub potentials: Vec<PotentialSpec>,
    pub sign: Sign,
    pub epsilon: f64,
    pub tau: f64,
    pub tau_convention: TauConvention,
    pub rhs: ModeFunction,
    pub boundary: Boundary,
}

impl ResolventProblem {
    /// Problem with the default `−τu` convention and a Dirichlet wall.
    pub fn new(grid: RadialGrid, potentials: Vec<PotentialSpec>, sign: Sign, epsilon: f64, tau: f64, rhs: ModeFunction) -> Self {
        Self {
            grid,
            potentials,
            sign,
            epsilon,
            tau,
            tau_convention: TauConvention::MinusTau,
            rhs,
            boundary: Boundary::Dirichlet,
        }
    }

    pub fn with_boundary(mut self, boundary: Boundary) -> Self {
        self.boundary = boundary;
        self
    }

    pub fn with_tau_convention(mut self, convention: TauConvention) -> Self {
        self.tau_convention = convention;
        self
    }

    pub fn with_rhs(&self, rhs: ModeFunction) -> Self {
        Self { rhs, ..self.clone() }
    }

    /// Total potential at `r`.
    pub fn potential(&self, r: f64) -> Result<f64> {
        let mut v = 0.0;
        for p in &self.potentials {
            v += p.eval(r)?;
        }
        Ok(v)
    }

    /// Radial derivative of the total potential at `r`.
    pub fn potential_derivative(&self, r: f64) -> Result<f64> {
        let mut v = 0.0;
        for p in &self.potentials {
            v += p.derivative(r)?;
        }
        Ok(v)
    }

    pub fn potential_samples(&self) -> Result<Vec<f64>> {
        self.grid.nodes().into_iter().map(|r| self.potential(r)).collect()
    }

    /// Coefficient of `v/r²` in the Liouville form.
    pub fn effective_centrifugal(&self) -> f64 {
        effective_centrifugal(self.grid.dimension(), self.grid.mode())
    }

    /// Absorbing-layer profile `Γ` at the nodes (zeros for Dirichlet).
    pub fn sponge_profile(&self) -> Vec<f64> {
        sponge_profile(&self.grid, &self.boundary)
    }

    /// End of the region free of the absorbing layer.
    pub fn physical_radius(&self) -> f64 {
        match self.boundary {
            Boundary::Dirichlet => self.grid.r_max(),
            Boundary::Sponge { width, .. } => self.grid.r_max() * (1.0 - width),
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
            return Err(Error::Rejected(format!("ε must be strictly positive, got {}", self.epsilon)));
        }
        if !self.tau.is_finite() {
            return Err(Error::Rejected("τ must be finite".into()));
        }
        self.grid.ensure_same(self.rhs.grid())?;
        if let Boundary::Sponge { width, strength } = self.boundary {
            if !(width > 0.0 && width < 1.0) || !(strength >= 0.0) {
                return Err(Error::Rejected(format!(
                    "sponge needs width in (0, 1) and strength ≥ 0, got ({width}, {strength})"
                )));
            }
        }
        for p in &self.potentials {
            p.validate()?;
            if p.angular_bound.is_some() {
                return Err(Error::Domain(
                    "the solver accepts radial potentials only; drop the angular bound".into(),
                ));
            }
        }
        Ok(())
    }
}

/// `ℓ(ℓ+d−2) + (d−1)(d−3)/4`.
pub fn effective_centrifugal(d: usize, l: usize) -> f64 {
    let d = d as f64;
    let l = l as f64;
    l * (l + d - 2.0) + (d - 1.0) * (d - 3.0) / 4.0
}

pub(crate) fn sponge_profile(grid: &RadialGrid, boundary: &Boundary) -> Vec<f64> {
    match *boundary {
        Boundary::Dirichlet => vec![0.0; grid.len()],
        Boundary::Sponge { width, strength } => {
            let r_max = grid.r_max();
            let start = r_max * (1.0 - width);
            grid.nodes()
                .into_iter()
                .map(|r| {
                    let s = ((r - start) / (r_max - start)).clamp(0.0, 1.0);
                    strength * s * s
                })
                .collect()
        }
    }
}

/// Real part of the Liouville-form diagonal (without the `τ` and
/// absorption terms): `2/h² + V + C/r²`.
pub(crate) fn real_diagonal(grid: &RadialGrid, potential: &[f64]) -> Vec<f64> {
    let h = grid.spacing();
    let c = effective_centrifugal(grid.dimension(), grid.mode());
    grid.nodes()
        .iter()
        .zip(potential)
        .map(|(r, v)| 2.0 / (h * h) + v + c / (r * r))
        .collect()
}

/// Tridiagonal matrix of the discrete Liouville-form operator.
pub fn assemble_operator(problem: &ResolventProblem) -> Result<Tridiagonal> {
    problem.validate()?;
    let grid = &problem.grid;
    let h = grid.spacing();
    let potential = problem.potential_samples()?;
    let base = real_diagonal(grid, &potential);
    let sponge = problem.sponge_profile();
    let shift = problem.tau_convention.coefficient(problem.tau);
    let s = problem.sign.factor();
    let diag: Vec<Complex64> = base
        .iter()
        .zip(&sponge)
        .map(|(b, g)| Complex64::new(b + shift, s * (problem.epsilon + g)))
        .collect();
    let off = vec![Complex64::new(-1.0 / (h * h), 0.0); grid.len() - 1];
    Ok(Tridiagonal::new(off.clone(), diag, off))
}

/// Computed solution with diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolventSolution {
    /// Solution with derivative samples.
    pub u: ModeFunction,
    /// Liouville variable `v = r^{(d−1)/2} u`.
    pub v: Vec<Complex64>,
    /// `max|A u − f| / max|f|` in the original variable.
    pub residual: f64,
    /// Normwise backward error `‖Av − g‖ / (‖A‖‖v‖ + ‖g‖)` in the Liouville form.
    pub backward_error: f64,
    /// `max|v|` over the last `max(5, n/100)` nodes divided by `max|v|`.
    pub boundary_leak: f64,
    pub warnings: Vec<String>,
}

/// Leak level above which a solution is treated as boundary contaminated.
pub const LEAK_THRESHOLD: f64 = 1e-3;

/// Solve the resolvent problem.
pub fn solve_resolvent(problem: &ResolventProblem) -> Result<ResolventSolution> {
    let a = assemble_operator(problem)?;
    let grid = &problem.grid;
    let p = (grid.dimension() as f64 - 1.0) / 2.0;
    let nodes = grid.nodes();
    let g: Vec<Complex64> = problem
        .rhs
        .values()
        .iter()
        .zip(&nodes)
        .map(|(f, r)| f * r.powf(p))
        .collect();
    let lu = a.factor()?;
    let v = lu.solve(&g);
    let av = a.apply(&v);
    let res_norm = av.iter().zip(&g).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
    let v_norm = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let g_norm = g.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let denom = a.norm_inf() * v_norm + g_norm;
    let backward_error = if denom == 0.0 { 0.0 } else { res_norm / denom };
    let u_vals: Vec<Complex64> = v.iter().zip(&nodes).map(|(z, r)| z / r.powf(p)).collect();
    let dv = liouville_derivative(&v, grid.spacing());
    let du: Vec<Complex64> = v
        .iter()
        .zip(&dv)
        .zip(&nodes)
        .map(|((z, dz), r)| (dz - z * (p / r)) / r.powf(p))
        .collect();
    let u = ModeFunction::new(*grid, u_vals)?.with_derivative(du)?;
    let residual = residual_check(problem, &u)?;
    let k = (grid.len() / 100).max(5);
    let tail = v[v.len() - k..].iter().map(|z| z.norm()).fold(0.0, f64::max);
    let boundary_leak = if v_norm == 0.0 { 0.0 } else { tail / v_norm };
    let mut warnings = Vec::new();
    if boundary_leak > LEAK_THRESHOLD {
        warnings.push(format!(
            "boundary leak {boundary_leak:.3e} exceeds {LEAK_THRESHOLD:e}; enlarge r_max or add an absorbing layer"
        ));
    }
    Ok(ResolventSolution {
        u,
        v,
        residual,
        backward_error,
        boundary_leak,
        warnings,
    })
}

/// Fourth-order derivative of the Liouville variable using the boundary
/// values `v(0) = 0` and `v(r_max + h) = 0`.
fn liouville_derivative(v: &[Complex64], h: f64) -> Vec<Complex64> {
    let n = v.len();
    let zero = Complex64::new(0.0, 0.0);
    let mut ext = Vec::with_capacity(n + 2);
    ext.push(zero);
    ext.extend_from_slice(v);
    ext.push(zero);
    let m = ext.len();
    (1..=n)
        .map(|j| {
            if j >= 2 && j + 2 < m {
                (ext[j - 2] - ext[j - 1] * 8.0 + ext[j + 1] * 8.0 - ext[j + 2]) / (12.0 * h)
            } else if j < 2 {
                (ext[j - 1] * -3.0 - ext[j] * 10.0 + ext[j + 1] * 18.0 - ext[j + 2] * 6.0 + ext[j + 3]) / (12.0 * h)
            } else {
                (ext[j + 1] * 3.0 + ext[j] * 10.0 - ext[j - 1] * 18.0 + ext[j - 2] * 6.0 - ext[j - 3]) / (12.0 * h)
            }
        })
        .collect()
}

/// `max_i |(A u)_i − f_i| / (max|f| + floor)` with `A` the discrete operator
/// expressed in the original variable.
pub fn residual_check(problem: &ResolventProblem, u: &ModeFunction) -> Result<f64> {
    let a = assemble_operator(problem)?;
    problem.grid.ensure_same(u.grid())?;
    let p = (problem.grid.dimension() as f64 - 1.0) / 2.0;
    let nodes = problem.grid.nodes();
    let v: Vec<Complex64> = u.values().iter().zip(&nodes).map(|(z, r)| z * r.powf(p)).collect();
    let av = a.apply(&v);
    let f = problem.rhs.values();
    let worst = av
        .iter()
        .zip(&nodes)
        .zip(f)
        .map(|((y, r), fi)| (y / r.powf(p) - fi).norm())
        .fold(0.0, f64::max);
    let scale = f.iter().map(|z| z.norm()).fold(0.0, f64::max);
    Ok(worst / (scale + f64::MIN_POSITIVE))
}

/// Manufactured profile `u⋆(r) = r e^{−r²}` with exact derivative samples.
pub fn manufactured_solution(grid: RadialGrid) -> ModeFunction {
    ModeFunction::from_real_fn_with_derivative(grid, |r| r * (-r * r).exp(), |r| (1.0 - 2.0 * r * r) * (-r * r).exp())
}

/// Forcing `f = −Δu⋆ + Vu⋆ ± i(ε + Γ)u⋆ + κτu⋆` of [`manufactured_solution`],
/// with `Δu = u'' + (d−1)u'/r − ℓ(ℓ+d−2)u/r²` applied in closed form and `κ`
/// the sign set by the τ convention. The right-hand side of `problem` is ignored.
pub fn manufactured_rhs(problem: &ResolventProblem) -> Result<ModeFunction> {
    let grid = problem.grid;
    let d = grid.dimension() as f64;
    let l = grid.mode() as f64;
    let angular = l * (l + d - 2.0);
    let shift = problem.tau_convention.coefficient(problem.tau);
    let s = problem.sign.factor();
    let sponge = problem.sponge_profile();
    let nodes = grid.nodes();
    let mut values = Vec::with_capacity(nodes.len());
    for (r, g) in nodes.iter().zip(&sponge) {
        let e = (-r * r).exp();
        let u = r * e;
        let du = (1.0 - 2.0 * r * r) * e;
        let d2u = (4.0 * r * r * r - 6.0 * r) * e;
        let laplacian = d2u + (d - 1.0) * du / r - angular * u / (r * r);
        let real = -laplacian + (problem.potential(*r)? + shift) * u;
        values.push(Complex64::new(real, s * (problem.epsilon + g) * u));
    }
    ModeFunction::new(grid, values)
}
