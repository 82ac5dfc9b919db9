//! Integration-by-parts identities for solutions of
//! `−Δu + Vu ± i a u + c u = f` (`a = ε` plus any absorbing layer, `c` the
//! `τ` coefficient), evaluated by quadrature on a single mode.
//!
//! Each identity pairs the equation with a radial multiplier and reports both
//! sides term by term:
//!
//! * [`Identity::Energy`]: real part against `φū`,
//! * [`Identity::Absorption`]: imaginary part against `φū`,
//! * [`Identity::Morawetz`]: real part against `∇Φ·∇ū + ½ΔΦū`,
//! * [`Identity::Combined`]: Morawetz minus energy,
//! * [`Identity::MorawetzSplit`] and [`Identity::CombinedSplit`]: the same with
//!   `V = V₁ + V₂`, where only `V₁` is differentiated.

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grids::{grad_density, ModeFunction, RadialGrid};
use crate::helmholtz::{ResolventProblem, ResolventSolution};
use crate::multipliers::{sphere_density, MultiplierProfile, PiecewiseField};
use crate::potentials::PotentialRole;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Identity {
    Energy,
    Absorption,
    Morawetz,
    Combined,
    MorawetzSplit,
    CombinedSplit,
}

impl Identity {
    pub const ALL: [Identity; 6] = [
        Identity::Energy,
        Identity::Absorption,
        Identity::Morawetz,
        Identity::Combined,
        Identity::MorawetzSplit,
        Identity::CombinedSplit,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Identity::Energy => "energy",
            Identity::Absorption => "absorption",
            Identity::Morawetz => "morawetz",
            Identity::Combined => "combined",
            Identity::MorawetzSplit => "morawetz_split",
            Identity::CombinedSplit => "combined_split",
        }
    }

    fn needs_multiplier(self) -> bool {
        !matches!(self, Identity::Energy | Identity::Absorption)
    }

    fn needs_weight(self) -> bool {
        !matches!(self, Identity::Morawetz | Identity::MorawetzSplit)
    }
}

impl fmt::Display for Identity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Radial test weight `φ`.
#[derive(Debug, Clone, PartialEq)]
pub enum TestWeight {
    One,
    /// Node samples of `φ`, `φ'` and `φ''`.
    Smooth {
        value: Vec<f64>,
        first: Vec<f64>,
        second: Vec<f64>,
    },
    /// `φ_R = (1/2R)χ_{B(0,R)}`; the radius is snapped to a node.
    Ball(f64),
}

impl TestWeight {
    pub fn smooth(grid: &RadialGrid, phi: impl Fn(f64) -> f64, dphi: impl Fn(f64) -> f64, d2phi: impl Fn(f64) -> f64) -> Self {
        let nodes = grid.nodes();
        TestWeight::Smooth {
            value: nodes.iter().map(|&r| phi(r)).collect(),
            first: nodes.iter().map(|&r| dphi(r)).collect(),
            second: nodes.iter().map(|&r| d2phi(r)).collect(),
        }
    }

    fn snapped_ball(grid: &RadialGrid, radius: f64) -> Result<f64> {
        if radius < grid.spacing() || radius > grid.r_max() {
            return Err(Error::DegenerateRadius(format!("ball weight radius {radius} is off the grid")));
        }
        Ok(grid.node(grid.nearest_node(radius)))
    }

    fn field(&self, grid: &RadialGrid) -> Result<PiecewiseField> {
        Ok(match self {
            TestWeight::One => PiecewiseField::smooth(vec![1.0; grid.len()]),
            TestWeight::Smooth { value, .. } => {
                check_len(grid, value)?;
                PiecewiseField::smooth(value.clone())
            }
            TestWeight::Ball(radius) => {
                let big_r = Self::snapped_ball(grid, *radius)?;
                PiecewiseField::split(grid, big_r, |_| 0.5 / big_r, |_| 0.0)
            }
        })
    }
}

fn check_len(grid: &RadialGrid, samples: &[f64]) -> Result<()> {
    if samples.len() != grid.len() {
        return Err(Error::Size(format!("{} samples on a {}-node grid", samples.len(), grid.len())));
    }
    Ok(())
}

/// One integral of an identity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub label: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport {
    pub identity: Identity,
    pub lhs: f64,
    pub rhs: f64,
    /// `|lhs − rhs| / (|lhs| + |rhs| + floor)` with `floor = 10⁻¹⁴ Σ|terms|`.
    pub residual: f64,
    pub lhs_terms: Vec<Term>,
    pub rhs_terms: Vec<Term>,
}

impl IdentityReport {
    fn from_terms(identity: Identity, lhs_terms: Vec<Term>, rhs_terms: Vec<Term>) -> Self {
        let lhs: f64 = lhs_terms.iter().map(|t| t.value).sum();
        let rhs: f64 = rhs_terms.iter().map(|t| t.value).sum();
        let scale: f64 = lhs_terms.iter().chain(&rhs_terms).map(|t| t.value.abs()).sum();
        let floor = (1e-14 * scale).max(f64::MIN_POSITIVE);
        Self {
            identity,
            lhs,
            rhs,
            residual: (lhs - rhs).abs() / (lhs.abs() + rhs.abs() + floor),
            lhs_terms,
            rhs_terms,
        }
    }

    pub fn term(&self, label: &str) -> Option<f64> {
        self.lhs_terms
            .iter()
            .chain(&self.rhs_terms)
            .find(|t| t.label == label)
            .map(|t| t.value)
    }
}

fn term(label: &str, value: f64) -> Term {
    Term {
        label: label.to_string(),
        value,
    }
}

/// Pointwise samples shared by every identity.
struct Densities {
    abs2: Vec<f64>,
    grad: Vec<f64>,
    /// `Re(ū u')`, so `∂_r|u|² = 2 re_uu1`.
    re_uu1: Vec<f64>,
    /// `Im(ū u')`.
    im_uu1: Vec<f64>,
    re_fu: Vec<f64>,
    im_fu: Vec<f64>,
    /// `Re(f ū')`.
    re_fu1: Vec<f64>,
    derivative: Vec<Complex64>,
}

impl Densities {
    fn new(u: &ModeFunction, f: &ModeFunction) -> Result<Self> {
        let du = u
            .derivative()
            .ok_or_else(|| Error::MissingDerivative("identity evaluation".into()))?
            .to_vec();
        let uu1: Vec<Complex64> = u.values().iter().zip(&du).map(|(z, dz)| z.conj() * dz).collect();
        let fu: Vec<Complex64> = f.values().iter().zip(u.values()).map(|(g, z)| g * z.conj()).collect();
        Ok(Self {
            abs2: u.abs_sqr(),
            grad: grad_density(u),
            re_uu1: uu1.iter().map(|z| z.re).collect(),
            im_uu1: uu1.iter().map(|z| z.im).collect(),
            re_fu: fu.iter().map(|z| z.re).collect(),
            im_fu: fu.iter().map(|z| z.im).collect(),
            re_fu1: f.values().iter().zip(&du).map(|(g, dz)| (g * dz.conj()).re).collect(),
            derivative: du,
        })
    }
}

fn times(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x * y).collect()
}

/// Evaluates both sides of `identity` for a computed solution.
///
/// `weight` is required by the identities built on the pairing with `φū`,
/// `profile` by those built on `∇Φ·∇ū + ½ΔΦū`.
pub fn check_identity(
    identity: Identity,
    solution: &ResolventSolution,
    problem: &ResolventProblem,
    weight: Option<&TestWeight>,
    profile: Option<&MultiplierProfile>,
) -> Result<IdentityReport> {
    check_identity_for(identity, &solution.u, problem, weight, profile)
}

/// [`check_identity`] for any mode function carrying derivative samples.
pub fn check_identity_for(
    identity: Identity,
    u: &ModeFunction,
    problem: &ResolventProblem,
    weight: Option<&TestWeight>,
    profile: Option<&MultiplierProfile>,
) -> Result<IdentityReport> {
    let grid = problem.grid;
    if u.grid() != &grid || problem.rhs.grid() != &grid {
        return Err(Error::MismatchedGrids);
    }
    if let Some(p) = profile {
        if p.grid() != &grid {
            return Err(Error::MismatchedGrids);
        }
    }
    let weight = if identity.needs_weight() {
        Some(weight.ok_or_else(|| Error::Domain(format!("{identity} needs a test weight")))?)
    } else {
        None
    };
    let profile = if identity.needs_multiplier() {
        Some(profile.ok_or_else(|| Error::Domain(format!("{identity} needs a multiplier profile")))?)
    } else {
        None
    };
    let dens = Densities::new(u, &problem.rhs)?;
    let ctx = Context::new(problem, &grid, dens)?;

    let (lhs, rhs) = match identity {
        Identity::Energy => ctx.energy(weight.expect("checked"))?,
        Identity::Absorption => ctx.absorption(weight.expect("checked"))?,
        Identity::Morawetz => ctx.morawetz(profile.expect("checked"), false)?,
        Identity::MorawetzSplit => ctx.morawetz(profile.expect("checked"), true)?,
        Identity::Combined => ctx.combined(weight.expect("checked"), profile.expect("checked"), false)?,
        Identity::CombinedSplit => ctx.combined(weight.expect("checked"), profile.expect("checked"), true)?,
    };
    Ok(IdentityReport::from_terms(identity, lhs, rhs))
}

struct Context<'a> {
    grid: &'a RadialGrid,
    dens: Densities,
    sign: f64,
    /// `a(r) = ε + Γ(r)`.
    absorption: Vec<f64>,
    tau_coefficient: f64,
    potential: Vec<f64>,
    /// Potentials with role `V2LongRange`, the undifferentiated part.
    v2: Vec<f64>,
    /// Derivative of everything else.
    dv1: Vec<f64>,
    dv: Vec<f64>,
    /// A potential at least as singular as `1/r²` forces `u(0) = 0`.
    pinned_origin: bool,
}

type Sides = (Vec<Term>, Vec<Term>);

impl<'a> Context<'a> {
    fn new(problem: &ResolventProblem, grid: &'a RadialGrid, dens: Densities) -> Result<Self> {
        let nodes = grid.nodes();
        let sponge = problem.sponge_profile();
        let mut v2 = vec![0.0; grid.len()];
        let mut dv1 = vec![0.0; grid.len()];
        for p in &problem.potentials {
            for (i, &r) in nodes.iter().enumerate() {
                if p.role == PotentialRole::V2LongRange {
                    v2[i] += p.eval(r)?;
                } else {
                    dv1[i] += p.derivative(r)?;
                }
            }
        }
        let dv = nodes
            .iter()
            .map(|&r| problem.potential_derivative(r))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            grid,
            dens,
            sign: problem.sign.factor(),
            absorption: sponge.iter().map(|g| problem.epsilon + g).collect(),
            tau_coefficient: problem.tau_convention.coefficient(problem.tau),
            potential: problem.potential_samples()?,
            v2,
            dv1,
            dv,
            pinned_origin: problem.potentials.iter().any(|p| !p.is_zero() && p.origin_exponent() >= 2.0),
        })
    }

    fn integrate(&self, field: &PiecewiseField, density: &[f64]) -> f64 {
        field.integrate(self.grid, density)
    }

    fn plain(&self, density: &[f64]) -> f64 {
        PiecewiseField::smooth(vec![1.0; self.grid.len()]).integrate(self.grid, density)
    }

    /// `(∫Δφ|u|², Im∫φ'u'ū)`.
    fn weight_derivative_terms(&self, weight: &TestWeight) -> Result<(f64, f64)> {
        let d = self.grid.dimension() as f64;
        match weight {
            TestWeight::One => Ok((0.0, 0.0)),
            TestWeight::Smooth { first, second, .. } => {
                check_len(self.grid, first)?;
                check_len(self.grid, second)?;
                let lap: Vec<f64> = (0..self.grid.len())
                    .map(|i| second[i] + (d - 1.0) * first[i] / self.grid.node(i))
                    .collect();
                let lap_term = self.plain(&times(&lap, &self.dens.abs2));
                let im_term = self.plain(&times(first, &self.dens.im_uu1));
                Ok((lap_term, im_term))
            }
            TestWeight::Ball(radius) => {
                // ∇φ_R = −(1/2R) δ(|x| − R) x/|x|.
                let big_r = TestWeight::snapped_ball(self.grid, *radius)?;
                let lap_term = sphere_density(self.grid, &self.dens.re_uu1, big_r) / big_r;
                let im_term = -0.5 / big_r * sphere_density(self.grid, &self.dens.im_uu1, big_r);
                Ok((lap_term, im_term))
            }
        }
    }

    fn energy(&self, weight: &TestWeight) -> Result<Sides> {
        let phi = weight.field(self.grid)?;
        let (lap, _) = self.weight_derivative_terms(weight)?;
        let lhs = vec![
            term("phi_grad_sq", self.integrate(&phi, &self.dens.grad)),
            term("minus_half_lap_phi_abs_sq", -0.5 * lap),
            term("phi_v_abs_sq", self.integrate(&phi, &times(&self.potential, &self.dens.abs2))),
            term("tau_phi_abs_sq", self.tau_coefficient * self.integrate(&phi, &self.dens.abs2)),
        ];
        let rhs = vec![term("re_phi_f_ubar", self.integrate(&phi, &self.dens.re_fu))];
        Ok((lhs, rhs))
    }

    fn absorption(&self, weight: &TestWeight) -> Result<Sides> {
        let phi = weight.field(self.grid)?;
        let (_, im) = self.weight_derivative_terms(weight)?;
        let lhs = vec![
            term(
                "absorption_phi_abs_sq",
                self.sign * self.integrate(&phi, &times(&self.absorption, &self.dens.abs2)),
            ),
            term("im_grad_phi_u1_ubar", im),
        ];
        let rhs = vec![term("im_phi_f_ubar", self.integrate(&phi, &self.dens.im_fu))];
        Ok((lhs, rhs))
    }

    /// Terms common to both multiplier identities, without the bilaplacian
    /// and the weight terms.
    fn multiplier_terms(&self, profile: &MultiplierProfile, split: bool) -> Result<Sides> {
        let first = profile.first_field();
        let laplacian = profile.laplacian_field();
        // Φ''|u'|² + (Φ'/r)ℓ(ℓ+d−2)|u|²/r², split so each factor stays within its pieces.
        let lam = self.grid.angular_eigenvalue();
        let du2: Vec<f64> = self.dens.derivative.iter().map(|z| z.norm_sqr()).collect();
        let angular: Vec<f64> = (0..self.grid.len())
            .map(|i| lam * self.dens.abs2[i] / self.grid.node(i).powi(3))
            .collect();
        let hessian = self.integrate(profile.second_field(), &du2) + self.integrate(first, &angular);
        let mut lhs = vec![term("hessian_form", hessian)];
        if split {
            lhs.push(term("minus_half_dv1_dphi_abs_sq", -0.5 * self.integrate(first, &times(&self.dv1, &self.dens.abs2))));
            lhs.push(term("half_v2_lap_phi_abs_sq", 0.5 * self.integrate(laplacian, &times(&self.v2, &self.dens.abs2))));
            let dr_abs2: Vec<f64> = self.dens.re_uu1.iter().map(|x| 2.0 * x).collect();
            lhs.push(term("half_v2_dphi_dr_abs_sq", 0.5 * self.integrate(first, &times(&self.v2, &dr_abs2))));
        } else {
            lhs.push(term("minus_half_dv_dphi_abs_sq", -0.5 * self.integrate(first, &times(&self.dv, &self.dens.abs2))));
        }
        // Im(ū' u) = −Im(ū u').
        let im_u1bar_u: Vec<f64> = self.dens.im_uu1.iter().map(|x| -x).collect();
        let rhs = vec![
            term(
                "absorption_im_dphi_u1bar_u",
                self.sign * self.integrate(first, &times(&self.absorption, &im_u1bar_u)),
            ),
            term("re_f_dphi_u1bar", self.integrate(first, &self.dens.re_fu1)),
            term("re_f_half_lap_phi_ubar", 0.5 * self.integrate(laplacian, &self.dens.re_fu)),
        ];
        Ok((lhs, rhs))
    }

    /// In dimension three `Δ²Φ` carries `−8πΦ'(0)δ₀`, contributing
    /// `2πΦ'(0)|u(0)|²`; only the radial mode is nonzero at the origin.
    /// Both factors are extrapolated quadratically from the first three nodes.
    fn origin_term(&self, profile: &MultiplierProfile) -> Option<Term> {
        if self.grid.dimension() != 3 || self.grid.mode() != 0 || self.pinned_origin {
            return None;
        }
        let first = profile.first_derivative();
        let at_origin = |y: &[f64]| 3.0 * y[0] - 3.0 * y[1] + y[2];
        let slope0 = at_origin(&first);
        let abs2_0 = at_origin(&self.dens.abs2).max(0.0);
        Some(term("origin_point_mass", 2.0 * std::f64::consts::PI * slope0 * abs2_0))
    }

    fn morawetz(&self, profile: &MultiplierProfile, split: bool) -> Result<Sides> {
        let bilaplacian = profile.bilaplacian_field().ok_or_else(|| {
            Error::Profile("this multiplier has no pointwise bilaplacian; use the combined identity with φ_R".into())
        })?;
        let (mut lhs, rhs) = self.multiplier_terms(profile, split)?;
        lhs.insert(1, term("minus_quarter_bilap_abs_sq", -0.25 * self.integrate(bilaplacian, &self.dens.abs2)));
        if let Some(t) = self.origin_term(profile) {
            lhs.insert(2, t);
        }
        Ok((lhs, rhs))
    }

    fn combined(&self, weight: &TestWeight, profile: &MultiplierProfile, split: bool) -> Result<Sides> {
        let phi = weight.field(self.grid)?;
        let combo = match (profile.combo_laplacian(), weight) {
            (Some(combo), TestWeight::Ball(radius)) => {
                let big_r = TestWeight::snapped_ball(self.grid, *radius)?;
                if (big_r - profile.radius()).abs() > 1e-9 * self.grid.spacing() {
                    return Err(Error::Profile("φ_R and Φ_R must share the radius".into()));
                }
                0.25 * self.integrate(combo, &self.dens.abs2)
            }
            _ => {
                let bilaplacian = profile.bilaplacian_field().ok_or_else(|| {
                    Error::Profile("a multiplier without pointwise bilaplacian needs φ = φ_R with the same R".into())
                })?;
                let (lap, _) = self.weight_derivative_terms(weight)?;
                0.5 * lap - 0.25 * self.integrate(bilaplacian, &self.dens.abs2)
            }
        };
        let (mut lhs, mut rhs) = self.multiplier_terms(profile, split)?;
        lhs.insert(1, term("minus_phi_grad_sq", -self.integrate(&phi, &self.dens.grad)));
        lhs.insert(2, term("quarter_lap_combo_abs_sq", combo));
        if let Some(t) = self.origin_term(profile) {
            lhs.insert(3, t);
        }
        lhs.push(term("minus_phi_v_abs_sq", -self.integrate(&phi, &times(&self.potential, &self.dens.abs2))));
        lhs.push(term("minus_tau_phi_abs_sq", -self.tau_coefficient * self.integrate(&phi, &self.dens.abs2)));
        rhs.insert(0, term("minus_re_phi_f_ubar", -self.integrate(&phi, &self.dens.re_fu)));
        Ok((lhs, rhs))
    }
}

/// Left-hand ingredients of the ball bound obtained from the combined
/// identity with `Φ_R` and `φ_R`, for `V = c/r^γ`:
/// `(1/2R)∫_B|∇u|²`, `((d−1)/4R²)∫_{|x|=R}|u|²`, `(τ/2R)∫_B|u|²`,
/// `((d−3)/4)∫_{|x|>R}|u|²/r³`, `(γ/2R)∫_B V|u|²`, `(γ/2)∫_{|x|>R} V|u|²/r`.
pub fn ball_bound_terms(u: &ModeFunction, problem: &ResolventProblem, radius: f64, gamma: f64) -> Result<Vec<Term>> {
    let grid = problem.grid;
    if u.grid() != &grid {
        return Err(Error::MismatchedGrids);
    }
    let big_r = TestWeight::snapped_ball(&grid, radius)?;
    let d = grid.dimension() as f64;
    let abs2 = u.abs_sqr();
    let grad = grad_density(u);
    let potential = problem.potential_samples()?;
    let ball = PiecewiseField::split(&grid, big_r, |_| 1.0, |_| 0.0);
    let outside = PiecewiseField::split(&grid, big_r, |_| 0.0, |r| 1.0 / r);
    let outside_cube = PiecewiseField::split(&grid, big_r, |_| 0.0, |r| r.powi(-3));
    let v_abs2 = times(&potential, &abs2);
    Ok(vec![
        term("ball_grad_sq", ball.integrate(&grid, &grad) / (2.0 * big_r)),
        term(
            "sphere_abs_sq",
            (d - 1.0) / (4.0 * big_r * big_r) * sphere_density(&grid, &abs2, big_r),
        ),
        term("tau_ball_abs_sq", problem.tau / (2.0 * big_r) * ball.integrate(&grid, &abs2)),
        term("outside_abs_sq_over_r3", (d - 3.0) / 4.0 * outside_cube.integrate(&grid, &abs2)),
        term("ball_v_abs_sq", gamma / (2.0 * big_r) * ball.integrate(&grid, &v_abs2)),
        term("outside_v_abs_sq_over_r", gamma / 2.0 * outside.integrate(&grid, &v_abs2)),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::helmholtz::{solve_resolvent, Sign};

    #[test]
    fn zero_data_gives_zero_residual() {
        let grid = RadialGrid::new(3, 0, 100, 10.0).unwrap();
        let problem = ResolventProblem::new(grid, vec![], Sign::Plus, 0.5, 1.0, ModeFunction::zeros(grid));
        let solution = solve_resolvent(&problem).unwrap();
        for id in [Identity::Energy, Identity::Absorption] {
            let report = check_identity(id, &solution, &problem, Some(&TestWeight::One), None).unwrap();
            assert_eq!(report.lhs, 0.0);
            assert_eq!(report.rhs, 0.0);
            assert_eq!(report.residual, 0.0);
        }
    }

    #[test]
    fn missing_inputs_are_reported() {
        let grid = RadialGrid::new(3, 0, 100, 10.0).unwrap();
        let problem = ResolventProblem::new(grid, vec![], Sign::Plus, 0.5, 1.0, ModeFunction::zeros(grid));
        let solution = solve_resolvent(&problem).unwrap();
        assert!(check_identity(Identity::Morawetz, &solution, &problem, None, None).is_err());
        let bare = ResolventSolution {
            u: ModeFunction::new(grid, vec![Complex64::new(0.0, 0.0); grid.len()]).unwrap(),
            ..solution
        };
        assert!(matches!(
            check_identity(Identity::Energy, &bare, &problem, Some(&TestWeight::One), None),
            Err(Error::MissingDerivative(_))
        ));
    }
}
