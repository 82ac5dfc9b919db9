//! Radial multipliers `Φ` and weights used in the virial and Morawetz
//! arguments: the smooth Morawetz multiplier, the piecewise ball family
//! `Φ_R`/`φ_R`, the weight `ψ_R` with its A₂ check, and the quadrature
//! construction of a multiplier with prescribed bilaplacian.
//!
//! Radial coefficients are stored as [`PiecewiseField`]s: each piece holds the
//! samples of a smooth extension on every node, so integrals split exactly at
//! the breakpoints, and surface measures are kept as symbolic [`Atom`]s.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grids::{CumulativeIntegral, ModeFunction, RadialGrid};
use crate::numeric::{cumulative_integral_4th, derivative_4th, integrate_gl};

/// Which construction produced a profile.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MultiplierKind {
    Morawetz,
    Piecewise,
    Appendix2,
}

/// Surface measure `mass · dσ` on the sphere `|x| = radius`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub radius: f64,
    pub mass: f64,
}

/// One smooth piece of a radial coefficient, valid on `lo ≤ r < hi`.
#[derive(Debug, Clone, PartialEq)]
pub struct Piece {
    pub lo: f64,
    pub hi: f64,
    /// Samples of the smooth extension of the piece at every grid node.
    pub values: Vec<f64>,
}

/// Piecewise smooth radial coefficient plus surface atoms.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseField {
    pieces: Vec<Piece>,
    atoms: Vec<Atom>,
}

impl PiecewiseField {
    pub fn smooth(values: Vec<f64>) -> Self {
        Self {
            pieces: vec![Piece {
                lo: 0.0,
                hi: f64::INFINITY,
                values,
            }],
            atoms: Vec::new(),
        }
    }

    pub fn from_fn(grid: &RadialGrid, f: impl Fn(f64) -> f64) -> Self {
        Self::smooth(grid.nodes().into_iter().map(f).collect())
    }

    /// `inside` on `r < radius`, `outside` on `r ≥ radius`.
    pub fn split(grid: &RadialGrid, radius: f64, inside: impl Fn(f64) -> f64, outside: impl Fn(f64) -> f64) -> Self {
        let nodes = grid.nodes();
        Self {
            pieces: vec![
                Piece {
                    lo: 0.0,
                    hi: radius,
                    values: nodes.iter().map(|&r| inside(r)).collect(),
                },
                Piece {
                    lo: radius,
                    hi: f64::INFINITY,
                    values: nodes.iter().map(|&r| outside(r)).collect(),
                },
            ],
            atoms: Vec::new(),
        }
    }

    pub fn with_atom(mut self, atom: Atom) -> Self {
        self.atoms.push(atom);
        self
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn breakpoints(&self) -> Vec<f64> {
        self.pieces.iter().skip(1).map(|p| p.lo).collect()
    }

    /// Pointwise value at node `i`: the piece whose interval contains the node.
    pub fn at_node(&self, grid: &RadialGrid, i: usize) -> f64 {
        let r = grid.node(i);
        let tol = 1e-9 * grid.spacing();
        let piece = self
            .pieces
            .iter()
            .find(|p| r >= p.lo - tol && r < p.hi - tol)
            .unwrap_or_else(|| self.pieces.last().expect("at least one piece"));
        piece.values[i]
    }

    pub fn node_values(&self, grid: &RadialGrid) -> Vec<f64> {
        (0..grid.len()).map(|i| self.at_node(grid, i)).collect()
    }

    /// `∫ c(|x|) D(|x|) dx` over the grid, with the atoms contributing
    /// `mass · |S^{d−1}| R^{d−1} D(R)`.
    pub fn integrate(&self, grid: &RadialGrid, density: &[f64]) -> f64 {
        let r_max = grid.r_max();
        let mut total = 0.0;
        for piece in &self.pieces {
            if piece.lo >= r_max {
                continue;
            }
            let product: Vec<f64> = piece.values.iter().zip(density).map(|(c, d)| c * d).collect();
            let cum = CumulativeIntegral::new(grid, &product);
            total += cum.between(piece.lo, piece.hi.min(r_max));
        }
        for atom in &self.atoms {
            total += atom.mass * sphere_density(grid, density, atom.radius);
        }
        total
    }
}

/// `|S^{d−1}| R^{d−1} D(R)` with `D` linearly interpolated between nodes.
pub fn sphere_density(grid: &RadialGrid, density: &[f64], radius: f64) -> f64 {
    let h = grid.spacing();
    let x = radius / h - 1.0;
    let value = if x <= 0.0 {
        density[0]
    } else {
        let k = (x.floor() as usize).min(grid.len() - 2);
        let t = (x - k as f64).min(1.0);
        density[k] + (density[k + 1] - density[k]) * t
    };
    grid.sphere_area() * radius.powi(grid.dimension() as i32 - 1) * value
}

/// Construction record stored with a profile.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ProfileMeta {
    /// `|R_requested − R_used|` when the radius was snapped to a node.
    pub snap_distance: f64,
    pub epsilon: Option<f64>,
    pub alpha: Option<f64>,
    pub kappa: Option<f64>,
    pub h_profile: Option<String>,
    /// `∫₀^∞ t h(t) dt`, grid part plus declared tail.
    pub moment: Option<f64>,
    /// `lim_{r→∞} φ'(r)` of the compact part of the construction.
    pub phi_prime_limit: Option<f64>,
    /// Measured `C` in `inf_{(0,R)} min(Φ'/r, Φ'') ≥ Cε/R`.
    pub measured_c: Option<f64>,
}

/// Sampled radial multiplier `Φ` on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiplierProfile {
    grid: RadialGrid,
    kind: MultiplierKind,
    radius: f64,
    first: PiecewiseField,
    second: PiecewiseField,
    laplacian: PiecewiseField,
    bilaplacian: Option<PiecewiseField>,
    ball_weight: Option<PiecewiseField>,
    combo_laplacian: Option<PiecewiseField>,
    meta: ProfileMeta,
}

impl MultiplierProfile {
    pub fn grid(&self) -> &RadialGrid {
        &self.grid
    }

    pub fn kind(&self) -> MultiplierKind {
        self.kind
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn meta(&self) -> &ProfileMeta {
        &self.meta
    }

    /// `Φ'` as a piecewise field.
    pub fn first_field(&self) -> &PiecewiseField {
        &self.first
    }

    /// `Φ''` as a piecewise field.
    pub fn second_field(&self) -> &PiecewiseField {
        &self.second
    }

    /// `ΔΦ` as a piecewise field.
    pub fn laplacian_field(&self) -> &PiecewiseField {
        &self.laplacian
    }

    /// `Δ²Φ`, absent when it is not a function (the piecewise family).
    pub fn bilaplacian_field(&self) -> Option<&PiecewiseField> {
        self.bilaplacian.as_ref()
    }

    /// `φ_R = (1/2R)χ_{B(0,R)}` for the piecewise family.
    pub fn ball_weight(&self) -> Option<&PiecewiseField> {
        self.ball_weight.as_ref()
    }

    /// `Δ(2φ_R − ΔΦ_R)` including its surface atom, for the piecewise family.
    pub fn combo_laplacian(&self) -> Option<&PiecewiseField> {
        self.combo_laplacian.as_ref()
    }

    pub fn first_derivative(&self) -> Vec<f64> {
        self.first.node_values(&self.grid)
    }

    pub fn second_derivative(&self) -> Vec<f64> {
        self.second.node_values(&self.grid)
    }

    pub fn laplacian(&self) -> Vec<f64> {
        self.laplacian.node_values(&self.grid)
    }

    pub fn bilaplacian(&self) -> Option<Vec<f64>> {
        self.bilaplacian.as_ref().map(|b| b.node_values(&self.grid))
    }

    pub fn breakpoints(&self) -> Vec<f64> {
        self.first.breakpoints()
    }
}

/// `Φ'(s) = s/√(1+s²) + 1` for `Φ(x) = (1+|x|²)^{1/2} + |x|`.
pub fn morawetz_first(s: f64) -> f64 {
    s / (1.0 + s * s).sqrt() + 1.0
}

/// `Φ''(s) = (1+s²)^{−3/2}`.
pub fn morawetz_second(s: f64) -> f64 {
    (1.0 + s * s).powf(-1.5)
}

fn morawetz_third(s: f64) -> f64 {
    -3.0 * s * (1.0 + s * s).powf(-2.5)
}

fn morawetz_fourth(s: f64) -> f64 {
    let q = 1.0 + s * s;
    -3.0 * q.powf(-2.5) + 15.0 * s * s * q.powf(-3.5)
}

/// Bilaplacian of a radial function from its radial derivatives:
/// `Φ⁗ + 2(d−1)Φ‴/r + (d−1)(d−3)Φ″/r² − (d−1)(d−3)Φ′/r³`.
pub fn radial_bilaplacian(d: usize, r: f64, first: f64, second: f64, third: f64, fourth: f64) -> f64 {
    let a = (d as f64 - 1.0) * (d as f64 - 3.0);
    fourth + 2.0 * (d as f64 - 1.0) * third / r + a * second / (r * r) - a * first / (r * r * r)
}

/// `Δ²Φ(s)` for the unscaled Morawetz multiplier in dimension `d`.
pub fn morawetz_bilaplacian(d: usize, s: f64) -> f64 {
    radial_bilaplacian(d, s, morawetz_first(s), morawetz_second(s), morawetz_third(s), morawetz_fourth(s))
}

/// Morawetz multiplier `Φ_R(x) = RΦ(x/R)` sampled in closed form.
pub fn morawetz_profile(radius: f64, grid: &RadialGrid) -> Result<MultiplierProfile> {
    if !(radius > 0.0 && radius < grid.r_max()) {
        return Err(Error::Domain(format!("radius {radius} must lie in (0, r_max)")));
    }
    let d = grid.dimension();
    let first = PiecewiseField::from_fn(grid, |r| morawetz_first(r / radius));
    let second = PiecewiseField::from_fn(grid, |r| morawetz_second(r / radius) / radius);
    let laplacian = PiecewiseField::from_fn(grid, |r| {
        morawetz_second(r / radius) / radius + (d as f64 - 1.0) * morawetz_first(r / radius) / r
    });
    let bilaplacian = PiecewiseField::from_fn(grid, |r| morawetz_bilaplacian(d, r / radius) / radius.powi(3));
    Ok(MultiplierProfile {
        grid: *grid,
        kind: MultiplierKind::Morawetz,
        radius,
        first,
        second,
        laplacian,
        bilaplacian: Some(bilaplacian),
        ball_weight: None,
        combo_laplacian: None,
        meta: ProfileMeta::default(),
    })
}

/// Piecewise family with `∇Φ_R = (x/R)χ_{|x|<R} + (x/|x|)χ_{|x|≥R}` and
/// `φ_R = (1/2R)χ_{|x|<R}`. The radius is snapped to the nearest node.
pub fn piecewise_profile(radius: f64, grid: &RadialGrid) -> Result<MultiplierProfile> {
    let h = grid.spacing();
    if !(radius >= h) {
        return Err(Error::DegenerateRadius(format!("R = {radius} is below the spacing {h}")));
    }
    if radius > grid.r_max() {
        return Err(Error::Domain(format!("R = {radius} exceeds r_max")));
    }
    let snapped = grid.node(grid.nearest_node(radius));
    let big_r = snapped;
    let dm1 = grid.dimension() as f64 - 1.0;
    let d = grid.dimension() as f64;
    let first = PiecewiseField::split(grid, big_r, |r| r / big_r, |_| 1.0);
    let second = PiecewiseField::split(grid, big_r, |_| 1.0 / big_r, |_| 0.0);
    let laplacian = PiecewiseField::split(grid, big_r, |_| d / big_r, |r| dm1 / r);
    let ball_weight = PiecewiseField::split(grid, big_r, |_| 0.5 / big_r, |_| 0.0);
    let combo_laplacian = PiecewiseField::split(grid, big_r, |_| 0.0, |r| dm1 * (d - 3.0) / r.powi(3)).with_atom(Atom {
        radius: big_r,
        mass: dm1 / (big_r * big_r),
    });
    Ok(MultiplierProfile {
        grid: *grid,
        kind: MultiplierKind::Piecewise,
        radius: big_r,
        first,
        second,
        laplacian,
        bilaplacian: None,
        ball_weight: Some(ball_weight),
        combo_laplacian: Some(combo_laplacian),
        meta: ProfileMeta {
            snap_distance: (radius - snapped).abs(),
            ..ProfileMeta::default()
        },
    })
}

/// `∇ū·D²Φ·∇u` for the mode: `Φ''|u'|² + (Φ'/r) ℓ(ℓ+d−2)|u|²/r²`.
pub fn quadratic_form_density(profile: &MultiplierProfile, u: &ModeFunction) -> Result<Vec<f64>> {
    if profile.grid() != u.grid() {
        return Err(Error::MismatchedGrids);
    }
    let grid = u.grid();
    let lam = grid.angular_eigenvalue();
    let first = profile.first_derivative();
    let second = profile.second_derivative();
    let du = u.derivative_or_differences();
    Ok(u.values()
        .iter()
        .zip(&du)
        .enumerate()
        .map(|(i, (z, dz))| {
            let r = grid.node(i);
            second[i] * dz.norm_sqr() + first[i] / r * lam * z.norm_sqr() / (r * r)
        })
        .collect())
}

/// Outcome of [`bilaplacian_residual`].
#[derive(Debug, Clone, PartialEq)]
pub struct BilaplacianCheck {
    /// `max |Δ²Φ − target| / (max|target| + 10⁻¹²)` over the nodes used.
    pub max_relative: f64,
    /// `max |Δ²Φ − target|` over the nodes used.
    pub max_absolute: f64,
    pub nodes_used: usize,
}

/// Nodes lost at each end (and around each breakpoint) by three successive
/// five-point derivatives.
const STENCIL_REACH: usize = 6;

/// Reconstructs `Δ²Φ` from the `Φ'` samples by three successive fourth-order
/// central differences and compares with `target`. Nodes whose stencils touch
/// the grid ends or straddle a breakpoint of the profile are skipped.
pub fn bilaplacian_residual(profile: &MultiplierProfile, target: &[f64]) -> Result<BilaplacianCheck> {
    let grid = profile.grid();
    bilaplacian_residual_samples(grid, &profile.first_derivative(), target, &profile.breakpoints())
}

/// [`bilaplacian_residual`] on raw `Φ'` samples.
pub fn bilaplacian_residual_samples(
    grid: &RadialGrid,
    first: &[f64],
    target: &[f64],
    breakpoints: &[f64],
) -> Result<BilaplacianCheck> {
    let n = grid.len();
    if n < 2 * STENCIL_REACH + 5 {
        return Err(Error::Stencil(format!("{n} nodes leave no interior for three derivatives")));
    }
    if first.len() != n || target.len() != n {
        return Err(Error::Size("samples must match the grid".into()));
    }
    let h = grid.spacing();
    let d = grid.dimension();
    let second = derivative_4th(first, h);
    let third = derivative_4th(&second, h);
    let fourth = derivative_4th(&third, h);
    let break_nodes: Vec<f64> = breakpoints.iter().map(|b| b / h - 1.0).collect();
    let scale = target.iter().fold(0.0f64, |m, t| m.max(t.abs())) + 1e-12;
    let mut max_abs = 0.0f64;
    let mut used = 0;
    for i in STENCIL_REACH..n - STENCIL_REACH {
        let reach = STENCIL_REACH as f64;
        if break_nodes.iter().any(|&b| (i as f64 - b).abs() < reach) {
            continue;
        }
        let r = grid.node(i);
        let value = radial_bilaplacian(d, r, first[i], second[i], third[i], fourth[i]);
        max_abs = max_abs.max((value - target[i]).abs());
        used += 1;
    }
    if used == 0 {
        return Err(Error::Stencil("no node clear of breakpoints".into()));
    }
    Ok(BilaplacianCheck {
        max_relative: max_abs / scale,
        max_absolute: max_abs,
        nodes_used: used,
    })
}

/// Samples of `ψ_R(r) = 1/(R(1 + r²/R²))` and its reciprocal.
#[derive(Debug, Clone, PartialEq)]
pub struct PsiWeight {
    pub radius: f64,
    pub values: Vec<f64>,
    pub reciprocal: Vec<f64>,
    /// `ψ_R ≤ 1/R` at every node.
    pub below_inverse_radius: bool,
    /// `ψ_R ≤ R/r²` at every node.
    pub below_radius_over_r2: bool,
    /// `ψ_R ≤ 1/r` at every node.
    pub below_inverse_r: bool,
    /// `ψ_R > (1/2R)` at every node with `r < R`.
    pub above_half_ball: bool,
}

pub fn psi(radius: f64, r: f64) -> f64 {
    radius / (radius * radius + r * r)
}

pub fn psi_weight(radius: f64, grid: &RadialGrid) -> Result<PsiWeight> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::Domain(format!("R = {radius} must be positive")));
    }
    let nodes = grid.nodes();
    let values: Vec<f64> = nodes.iter().map(|&r| psi(radius, r)).collect();
    let reciprocal = values.iter().map(|v| 1.0 / v).collect();
    let slack = 1.0 + 1e-14;
    let pairs = || nodes.iter().zip(&values);
    Ok(PsiWeight {
        radius,
        below_inverse_radius: values.iter().all(|&v| v <= slack / radius),
        below_radius_over_r2: pairs().all(|(&r, &v)| v <= slack * radius / (r * r)),
        below_inverse_r: pairs().all(|(&r, &v)| v <= slack / r),
        above_half_ball: pairs().filter(|(&r, _)| r < radius).all(|(_, &v)| v > 0.5 / radius),
        values,
        reciprocal,
    })
}

/// `(avg_Q w)(avg_Q 1/w)` over `Q = [c − a, c + a] ∩ [0, ∞)`, averages taken
/// with the radial measure `r^{d−1} dr`.
pub fn a2_product(weight: impl Fn(f64) -> f64, center: f64, halfwidth: f64, d: usize) -> f64 {
    let lo = (center - halfwidth).max(0.0);
    let hi = center + halfwidth;
    let p = d as i32 - 1;
    let mass = integrate_gl(|r| r.powi(p), lo, hi, 8, 8);
    let avg_w = integrate_gl(|r| r.powi(p) * weight(r), lo, hi, 8, 8) / mass;
    let avg_inv = integrate_gl(|r| r.powi(p) / weight(r), lo, hi, 8, 8) / mass;
    avg_w * avg_inv
}

/// Per-radius A₂ suprema over an interval family.
#[derive(Debug, Clone, PartialEq)]
pub struct A2Report {
    /// `(R, sup_Q product)` in input order.
    pub sups: Vec<(f64, f64)>,
    /// `max_R sup ÷ min_R sup`.
    pub spread: f64,
}

/// A₂ products of `ψ_R` over intervals `(center, halfwidth)` on the radial line.
pub fn check_a2(radii: &[f64], intervals: &[(f64, f64)], d: usize) -> Result<A2Report> {
    if intervals.is_empty() || radii.is_empty() {
        return Err(Error::Domain("A2 check needs radii and a non-empty interval family".into()));
    }
    if intervals.iter().any(|&(c, a)| !(a > 0.0 && c + a > 0.0)) {
        return Err(Error::Domain("intervals need positive halfwidth".into()));
    }
    let sups: Vec<(f64, f64)> = radii
        .iter()
        .map(|&big_r| {
            let sup = intervals
                .iter()
                .map(|&(c, a)| a2_product(|r| psi(big_r, r), c, a, d))
                .fold(0.0f64, f64::max);
            (big_r, sup)
        })
        .collect();
    let max = sups.iter().map(|s| s.1).fold(0.0f64, f64::max);
    let min = sups.iter().map(|s| s.1).fold(f64::INFINITY, f64::min);
    Ok(A2Report { sups, spread: max / min })
}

/// Nonnegative radial profile `h` of the prescribed bilaplacian `−h(|x|)/|x|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HProfile {
    Zero,
    /// `amplitude / (1 + t)^exponent`.
    PowerDecay { amplitude: f64, exponent: f64 },
    /// Node samples continued beyond `r_max` as `h(r_max)(r_max/t)^tail_exponent`.
    Sampled { values: Vec<f64>, tail_exponent: f64 },
}

impl HProfile {
    pub fn id(&self) -> String {
        match self {
            HProfile::Zero => "zero".into(),
            HProfile::PowerDecay { amplitude, exponent } => format!("power_decay({amplitude},{exponent})"),
            HProfile::Sampled { tail_exponent, .. } => format!("sampled(tail {tail_exponent})"),
        }
    }

    /// Samples at `t_k = k h`, `k = 0..=n`, the origin included.
    fn samples_with_origin(&self, grid: &RadialGrid) -> Result<Vec<f64>> {
        let n = grid.len();
        let h = grid.spacing();
        let out = match self {
            HProfile::Zero => vec![0.0; n + 1],
            HProfile::PowerDecay { amplitude, exponent } => {
                (0..=n).map(|k| amplitude * (1.0 + k as f64 * h).powf(-exponent)).collect()
            }
            HProfile::Sampled { values, .. } => {
                if values.len() != n {
                    return Err(Error::Size(format!("h profile has {} samples, grid has {n}", values.len())));
                }
                let origin = 4.0 * values[0] - 6.0 * values[1] + 4.0 * values[2] - values[3];
                std::iter::once(origin.max(0.0)).chain(values.iter().copied()).collect()
            }
        };
        if out.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Domain("h profile must be finite and nonnegative".into()));
        }
        Ok(out)
    }

    /// `(∫_{r_max}^∞ h, ∫_{r_max}^∞ t h)` from the declared decay.
    fn tails(&self, r_max: f64, last: f64) -> Result<(f64, f64)> {
        match self {
            HProfile::Zero => Ok((0.0, 0.0)),
            HProfile::PowerDecay { amplitude, exponent } => {
                let p = *exponent;
                if *amplitude == 0.0 {
                    return Ok((0.0, 0.0));
                }
                if p <= 2.0 {
                    return Err(Error::TailBound(format!("decay exponent {p} ≤ 2 makes ∫ t h(t) dt diverge")));
                }
                let x = 1.0 + r_max;
                let t0 = amplitude * x.powf(1.0 - p) / (p - 1.0);
                let t1 = amplitude * (x.powf(2.0 - p) / (p - 2.0) - x.powf(1.0 - p) / (p - 1.0));
                Ok((t0, t1))
            }
            HProfile::Sampled { tail_exponent, .. } => {
                if last == 0.0 {
                    return Ok((0.0, 0.0));
                }
                let p = *tail_exponent;
                if p <= 2.0 {
                    return Err(Error::TailBound(format!("tail exponent {p} ≤ 2 makes ∫ t h(t) dt diverge")));
                }
                Ok((last * r_max / (p - 1.0), last * r_max * r_max / (p - 2.0)))
            }
        }
    }
}

/// Cumulative fourth-order integral of origin-inclusive samples, restarted at
/// the breakpoint index so each segment is integrated with smooth data only.
/// `inside` supplies the samples up to and including the breakpoint,
/// `outside` those from the breakpoint on.
fn cumulative_split(inside: &[f64], outside: &[f64], h: f64, k_break: usize) -> Vec<f64> {
    let mut out = cumulative_integral_4th(&inside[..=k_break], h);
    let offset = out[k_break];
    let tail = cumulative_integral_4th(&outside[k_break..], h);
    out.extend(tail.into_iter().skip(1).map(|v| v + offset));
    out
}

/// Three-dimensional multiplier with `Δ²Φ = −(ε/R³)χ_{(0,R)} − h(|x|)/|x|`,
/// built as `Φ' = ψ' + φ'` with
/// `ψ' = α + ½∫₀^r th − (1/6r²)∫₀^r t³h + (r/3)∫_r^∞ h`,
/// `φ'' = ∫_r^∞ s^{−4}∫₀^s t⁴m dt ds` (`m = (ε/R³)χ_{(0,R)}`) and `φ' = ∫₀^r φ''`.
/// The radius is snapped to a node.
pub fn appendix2_construct(
    h_profile: &HProfile,
    epsilon: f64,
    radius: f64,
    alpha: f64,
    kappa: f64,
    grid: &RadialGrid,
) -> Result<MultiplierProfile> {
    if grid.dimension() != 3 {
        return Err(Error::Domain("the prescribed-bilaplacian construction is three-dimensional".into()));
    }
    if !(epsilon > 0.0 && alpha > 0.0 && kappa > 0.0 && kappa < 0.5) {
        return Err(Error::Domain("need ε > 0, α > 0 and 0 < κ < 1/2".into()));
    }
    let n = grid.len();
    let h = grid.spacing();
    let r_max = grid.r_max();
    let node = grid.nearest_node(radius);
    let big_r = grid.node(node);
    let k_break = node + 1;
    if k_break < 3 || n - k_break < 3 {
        return Err(Error::DegenerateRadius(format!("R = {radius} leaves fewer than four samples on one side")));
    }

    let hs = h_profile.samples_with_origin(grid)?;
    let ts: Vec<f64> = (0..=n).map(|k| k as f64 * h).collect();
    let (tail0, tail1) = h_profile.tails(r_max, hs[n])?;
    let th: Vec<f64> = ts.iter().zip(&hs).map(|(t, v)| t * v).collect();
    let t3h: Vec<f64> = ts.iter().zip(&hs).map(|(t, v)| t.powi(3) * v).collect();
    let a0 = cumulative_split(&hs, &hs, h, k_break);
    let a1 = cumulative_split(&th, &th, h, k_break);
    let a3 = cumulative_split(&t3h, &t3h, h, k_break);
    let moment = a1[n] + tail1;
    let total_h = a0[n] + tail0;

    let margin = kappa - (alpha + epsilon / 6.0 + moment);
    if margin <= 0.0 {
        return Err(Error::Hypothesis {
            margin,
            needed: "α + ε/6 + ∫₀^∞ t h(t) dt < κ".into(),
        });
    }

    let m_scale = epsilon / big_r.powi(3);
    // φ''(r) = ∫_r^∞ s^{-4}∫₀^s t⁴m = (1/3r³)∫₀^r t⁴m + (1/3)∫_r^∞ t m, with
    // both moments of the step m in closed form.
    let m_inf = m_scale * big_r.powi(5) / 5.0;
    let phi2: Vec<f64> = ts
        .iter()
        .map(|&t| {
            let rc = t.min(big_r);
            let outer = m_scale * (big_r * big_r - rc * rc) / 6.0;
            if t == 0.0 {
                outer
            } else {
                m_scale * rc.powi(5) / (15.0 * t.powi(3)) + outer
            }
        })
        .collect();
    let phi1 = cumulative_split(&phi2, &phi2, h, k_break);
    let phi_prime_limit = phi1[n] + m_inf / (6.0 * r_max * r_max);

    let mut first = vec![0.0; n];
    let mut second = vec![0.0; n];
    for i in 0..n {
        let k = i + 1;
        let r = ts[k];
        let t0 = total_h - a0[k];
        let psi1 = alpha + 0.5 * a1[k] - a3[k] / (6.0 * r * r) + r / 3.0 * t0;
        let psi2 = a3[k] / (3.0 * r.powi(3)) + t0 / 3.0;
        first[i] = psi1 + phi1[k];
        second[i] = psi2 + phi2[k];
    }

    for i in 0..n {
        let r = grid.node(i);
        if !(first[i] > alpha && first[i] < kappa && second[i] >= 0.0) {
            return Err(Error::Profile(format!(
                "construction conclusion fails at r = {r}: Φ' = {}, Φ'' = {}",
                first[i], second[i]
            )));
        }
        if phi1[i + 1] > epsilon / 6.0 * (1.0 + 1e-12) {
            return Err(Error::Profile(format!("φ'({r}) = {} exceeds ε/6", phi1[i + 1])));
        }
    }
    let measured_c = (0..node)
        .map(|i| (first[i] / grid.node(i)).min(second[i]))
        .fold(f64::INFINITY, f64::min)
        * big_r
        / epsilon;

    let laplacian: Vec<f64> = (0..n).map(|i| second[i] + 2.0 * first[i] / grid.node(i)).collect();
    let outside: Vec<f64> = (0..n).map(|i| -hs[i + 1] / grid.node(i)).collect();
    let inside: Vec<f64> = outside.iter().map(|v| v - m_scale).collect();
    let bilaplacian = PiecewiseField {
        pieces: vec![
            Piece {
                lo: 0.0,
                hi: big_r,
                values: inside,
            },
            Piece {
                lo: big_r,
                hi: f64::INFINITY,
                values: outside,
            },
        ],
        atoms: Vec::new(),
    };
    let first_field = split_samples(big_r, first);
    let second_field = split_samples(big_r, second);
    let laplacian_field = split_samples(big_r, laplacian);
    Ok(MultiplierProfile {
        grid: *grid,
        kind: MultiplierKind::Appendix2,
        radius: big_r,
        first: first_field,
        second: second_field,
        laplacian: laplacian_field,
        bilaplacian: Some(bilaplacian),
        ball_weight: None,
        combo_laplacian: None,
        meta: ProfileMeta {
            snap_distance: (radius - big_r).abs(),
            epsilon: Some(epsilon),
            alpha: Some(alpha),
            kappa: Some(kappa),
            h_profile: Some(h_profile.id()),
            moment: Some(moment),
            phi_prime_limit: Some(phi_prime_limit),
            measured_c: Some(measured_c),
        },
    })
}

/// The same node samples on both sides of `radius`; the split only records
/// where the derivatives jump.
fn split_samples(radius: f64, values: Vec<f64>) -> PiecewiseField {
    PiecewiseField {
        pieces: vec![
            Piece {
                lo: 0.0,
                hi: radius,
                values: values.clone(),
            },
            Piece {
                lo: radius,
                hi: f64::INFINITY,
                values,
            },
        ],
        atoms: Vec::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn morawetz_bilaplacian_value_in_five_dimensions() {
        let expected = -(8.0 / 2f64.powf(1.5) + 12.0 / 2f64.powf(2.5) + 15.0 / 2f64.powf(3.5) + 8.0);
        assert!((morawetz_bilaplacian(5, 1.0) - expected).abs() < 1e-12);
    }

    #[test]
    fn piecewise_laplacian_inside_ball() {
        let grid = RadialGrid::new(3, 0, 400, 8.0).unwrap();
        let p = piecewise_profile(2.0, &grid).unwrap();
        let i = grid.nearest_node(1.0);
        assert!((p.laplacian()[i] - 1.5).abs() < 1e-14);
        assert!(p.first_derivative().iter().all(|&g| g <= 1.0 + 1e-15));
        assert!(piecewise_profile(0.001, &grid).is_err());
    }

    #[test]
    fn psi_at_origin() {
        assert_eq!(psi(4.0, 0.0), 0.25);
    }

    #[test]
    fn cumulative_split_matches_unsplit_for_smooth_data() {
        let y: Vec<f64> = (0..40).map(|k| (0.1 * k as f64).sin()).collect();
        let a = cumulative_integral_4th(&y, 0.1);
        let b = cumulative_split(&y, &y, 0.1, 17);
        for (x, z) in a.iter().zip(&b) {
            assert!((x - z).abs() < 1e-6);
        }
    }
}
