//! Parametric radial potentials and numerical checkers for the repulsivity,
//! attraction, Sobolev-split and long-range decay hypotheses.

use crate::error::{Error, Result};
use crate::grids::{shell_index, CumulativeIntegral, RadialGrid};
use crate::numeric::derivative_4th;

/// Shape of an exponential well built from `g' = b/(1+r)^{γ_g}` with
/// `G(r) = g(∞) − g(r) = b (1+r)^{1−γ_g}/(γ_g − 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExpWellForm {
    /// `ω = μ(1 − e^{G})`.
    Omega,
    /// `ω − μ = −μ e^{G}`, the attractive well that tends to `−μ`.
    OmegaMinusMu,
    /// `μ(e^{−G} − 1)`, bounded by `μ(1 − e^{−g(∞)+g(0)})`.
    Relaxed,
}

/// Closed-form profiles with exact derivatives, used for manufactured tests.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ManufacturedProfile {
    /// `V = Δw/w` for `w = (1+r²)^λ` in dimension `d`, which makes `w` a
    /// zero-energy solution of `−Δw + Vw = 0`.
    ZeroMode { lambda: f64, d: usize },
    /// `amplitude · e^{−r²/width²}`.
    Gaussian { amplitude: f64, width: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub enum PotentialKind {
    Zero,
    /// `c / r^γ`.
    InversePower { c: f64, gamma: f64 },
    /// `c / (1 + r²)^{α/2}`.
    SmoothInversePower { c: f64, alpha: f64 },
    /// `c / (1 + r)^γ`.
    ShiftedInversePower { c: f64, gamma: f64 },
    ExpWell { mu: f64, b: f64, gamma_g: f64, form: ExpWellForm },
    /// Sampled profile with cubic Hermite interpolation and power-law
    /// continuation `V(r_last)(r_last/r)^{decay}` beyond the table.
    NeumannTable { radii: Vec<f64>, values: Vec<f64>, decay: f64 },
    Manufactured(ManufacturedProfile),
}

/// Which part of a decomposition a potential plays.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PotentialRole {
    VRepulsive,
    NAttractive,
    V1LongRange,
    V2LongRange,
}

/// Decomposition `n = n₁ + n₂` with `n₁` bounded and `n₂` of Hardy type.
#[derive(Debug, Clone, PartialEq)]
pub struct SobolevSplit {
    pub n1_bound: f64,
    pub n2: Box<PotentialSpec>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PotentialSpec {
    pub kind: PotentialKind,
    pub role: PotentialRole,
    /// Multiplies the profile.
    pub scale: f64,
    /// Upper bound of an angular factor `V_∞(x/|x|) ≥ 0`; the checkers use it
    /// while the solver only sees the radial profile.
    pub angular_bound: Option<f64>,
    pub split: Option<SobolevSplit>,
}

impl PotentialSpec {
    pub fn new(kind: PotentialKind, role: PotentialRole) -> Result<Self> {
        let spec = Self {
            kind,
            role,
            scale: 1.0,
            angular_bound: None,
            split: None,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn zero(role: PotentialRole) -> Self {
        Self {
            kind: PotentialKind::Zero,
            role,
            scale: 1.0,
            angular_bound: None,
            split: None,
        }
    }

    /// `μ · self`.
    pub fn scaled(&self, mu: f64) -> Self {
        Self {
            scale: self.scale * mu,
            ..self.clone()
        }
    }

    pub fn with_angular_bound(mut self, bound: f64) -> Self {
        self.angular_bound = Some(bound);
        self
    }

    pub fn with_split(mut self, split: SobolevSplit) -> Self {
        self.split = Some(split);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Profile(m));
        if !self.scale.is_finite() {
            return bad("scale must be finite".into());
        }
        match &self.kind {
            PotentialKind::Zero => {}
            PotentialKind::InversePower { c, gamma } => {
                if !(*gamma > 0.0) || !c.is_finite() {
                    return bad(format!("inverse_power needs γ_pow > 0, got {gamma}"));
                }
            }
            PotentialKind::SmoothInversePower { c, alpha } => {
                if !(*alpha > 0.0) || !c.is_finite() {
                    return bad(format!("smooth_inverse_power needs α_pow > 0, got {alpha}"));
                }
            }
            PotentialKind::ShiftedInversePower { c, gamma } => {
                if !(*gamma > 0.0) || !c.is_finite() {
                    return bad(format!("shifted_inverse_power needs γ > 0, got {gamma}"));
                }
            }
            PotentialKind::ExpWell { mu, b, gamma_g, .. } => {
                if !(*mu > 0.0) || !(*b >= 0.0) || !(*gamma_g > 1.0) {
                    return bad(format!("exp_well needs μ > 0, b ≥ 0, γ_g > 1 (got μ={mu}, b={b}, γ_g={gamma_g})"));
                }
            }
            PotentialKind::NeumannTable { radii, values, decay } => {
                if radii.len() < 5 || radii.len() != values.len() {
                    return bad("table needs at least 5 (radius, value) pairs of equal length".into());
                }
                if radii[0] <= 0.0 || radii.windows(2).any(|w| w[1] <= w[0]) {
                    return bad("table radii must be positive and strictly increasing".into());
                }
                if values.iter().any(|v| !v.is_finite()) || !(*decay >= 0.0) {
                    return bad("table values must be finite and decay ≥ 0".into());
                }
            }
            PotentialKind::Manufactured(ManufacturedProfile::ZeroMode { d, .. }) => {
                if *d < 2 {
                    return bad("zero-mode profile needs d ≥ 2".into());
                }
            }
            PotentialKind::Manufactured(ManufacturedProfile::Gaussian { width, .. }) => {
                if !(*width > 0.0) {
                    return bad("gaussian profile needs width > 0".into());
                }
            }
        }
        if let Some(split) = &self.split {
            if !(split.n1_bound >= 0.0) {
                return bad("n₁ bound must be nonnegative".into());
            }
            split.n2.validate()?;
        }
        Ok(())
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.kind, PotentialKind::Zero) || self.scale == 0.0
    }

    /// `V(r)`.
    pub fn eval(&self, r: f64) -> Result<f64> {
        if !(r > 0.0) {
            return Err(Error::Domain(format!("potential evaluated at r = {r} ≤ 0")));
        }
        let v = self.scale * self.raw(r);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Profile(format!("non-finite potential value at r = {r}")))
        }
    }

    /// `∂_r V(r)`: exact for closed-form kinds, from the interpolant of
    /// fourth-order differenced table slopes for tables.
    pub fn derivative(&self, r: f64) -> Result<f64> {
        if !(r > 0.0) {
            return Err(Error::Domain(format!("potential derivative at r = {r} ≤ 0")));
        }
        let v = self.scale * self.raw_derivative(r);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Profile(format!("non-finite potential derivative at r = {r}")))
        }
    }

    /// `γV + r ∂_rV`, with exact cancellation for homogeneous profiles.
    pub fn repulsion_lhs(&self, r: f64, gamma: f64) -> Result<f64> {
        if let PotentialKind::InversePower { c, gamma: p } = self.kind {
            return Ok(self.scale * c * (gamma - p) / r.powf(p));
        }
        Ok(gamma * self.eval(r)? + r * self.derivative(r)?)
    }

    /// Whether the derivative is available in closed form.
    pub fn has_exact_derivative(&self) -> bool {
        !matches!(self.kind, PotentialKind::NeumannTable { .. })
    }

    /// Exponent `p` with `|V(r)| ≲ r^{-p}` as `r → ∞` (`∞` for compact or
    /// zero profiles, `0` for profiles with a nonzero limit).
    pub fn decay_exponent(&self) -> f64 {
        match &self.kind {
            PotentialKind::Zero => f64::INFINITY,
            PotentialKind::InversePower { gamma, .. } => *gamma,
            PotentialKind::SmoothInversePower { alpha, .. } => *alpha,
            PotentialKind::ShiftedInversePower { gamma, .. } => *gamma,
            PotentialKind::ExpWell { gamma_g, form, .. } => match form {
                ExpWellForm::OmegaMinusMu => 0.0,
                _ => gamma_g - 1.0,
            },
            PotentialKind::NeumannTable { decay, .. } => *decay,
            PotentialKind::Manufactured(ManufacturedProfile::ZeroMode { lambda, d }) => {
                let k = *d as f64 + 2.0 * lambda - 2.0;
                if k == 0.0 {
                    4.0
                } else {
                    2.0
                }
            }
            PotentialKind::Manufactured(ManufacturedProfile::Gaussian { .. }) => f64::INFINITY,
        }
    }

    /// Exponent `s` with `|V(r)| ~ r^{-s}` as `r → 0` (`0` for bounded profiles).
    pub fn origin_exponent(&self) -> f64 {
        match &self.kind {
            PotentialKind::InversePower { gamma, .. } => *gamma,
            _ => 0.0,
        }
    }

    fn raw(&self, r: f64) -> f64 {
        match &self.kind {
            PotentialKind::Zero => 0.0,
            PotentialKind::InversePower { c, gamma } => c / r.powf(*gamma),
            PotentialKind::SmoothInversePower { c, alpha } => c / (1.0 + r * r).powf(alpha / 2.0),
            PotentialKind::ShiftedInversePower { c, gamma } => c / (1.0 + r).powf(*gamma),
            PotentialKind::ExpWell { mu, b, gamma_g, form } => {
                let big_g = b * (1.0 + r).powf(1.0 - gamma_g) / (gamma_g - 1.0);
                match form {
                    ExpWellForm::Omega => -mu * big_g.exp_m1(),
                    ExpWellForm::OmegaMinusMu => -mu * big_g.exp(),
                    ExpWellForm::Relaxed => mu * (-big_g).exp_m1(),
                }
            }
            PotentialKind::NeumannTable { radii, values, decay } => table_eval(radii, values, *decay, r).0,
            PotentialKind::Manufactured(ManufacturedProfile::ZeroMode { lambda, d }) => {
                let s = 1.0 + r * r;
                let k = *d as f64 + 2.0 * lambda - 2.0;
                2.0 * lambda * (*d as f64 + k * r * r) / (s * s)
            }
            PotentialKind::Manufactured(ManufacturedProfile::Gaussian { amplitude, width }) => {
                amplitude * (-(r / width).powi(2)).exp()
            }
        }
    }

    fn raw_derivative(&self, r: f64) -> f64 {
        match &self.kind {
            PotentialKind::Zero => 0.0,
            PotentialKind::InversePower { c, gamma } => -gamma * c / r.powf(gamma + 1.0),
            PotentialKind::SmoothInversePower { c, alpha } => -c * alpha * r / (1.0 + r * r).powf(alpha / 2.0 + 1.0),
            PotentialKind::ShiftedInversePower { c, gamma } => -gamma * c / (1.0 + r).powf(gamma + 1.0),
            PotentialKind::ExpWell { mu, b, gamma_g, form } => {
                let big_g = b * (1.0 + r).powf(1.0 - gamma_g) / (gamma_g - 1.0);
                let g_prime = b / (1.0 + r).powf(*gamma_g);
                match form {
                    ExpWellForm::Omega | ExpWellForm::OmegaMinusMu => mu * big_g.exp() * g_prime,
                    ExpWellForm::Relaxed => mu * (-big_g).exp() * g_prime,
                }
            }
            PotentialKind::NeumannTable { radii, values, decay } => table_eval(radii, values, *decay, r).1,
            PotentialKind::Manufactured(ManufacturedProfile::ZeroMode { lambda, d }) => {
                let s = 1.0 + r * r;
                let k = *d as f64 + 2.0 * lambda - 2.0;
                4.0 * lambda * r * (k - 2.0 * *d as f64 - k * r * r) / (s * s * s)
            }
            PotentialKind::Manufactured(ManufacturedProfile::Gaussian { amplitude, width }) => {
                -2.0 * r / (width * width) * amplitude * (-(r / width).powi(2)).exp()
            }
        }
    }
}

/// Value and slope of the table interpolant at `r`.
fn table_eval(radii: &[f64], values: &[f64], decay: f64, r: f64) -> (f64, f64) {
    let n = radii.len();
    if r <= radii[0] {
        return (values[0], 0.0);
    }
    if r >= radii[n - 1] {
        let v = values[n - 1] * (radii[n - 1] / r).powf(decay);
        return (v, -decay * v / r);
    }
    let slopes = table_slopes(radii, values);
    let k = radii.partition_point(|&x| x <= r) - 1;
    let w = radii[k + 1] - radii[k];
    let t = (r - radii[k]) / w;
    let (y0, y1, m0, m1) = (values[k], values[k + 1], slopes[k] * w, slopes[k + 1] * w);
    let h00 = 2.0 * t.powi(3) - 3.0 * t * t + 1.0;
    let h10 = t.powi(3) - 2.0 * t * t + t;
    let h01 = -2.0 * t.powi(3) + 3.0 * t * t;
    let h11 = t.powi(3) - t * t;
    let v = h00 * y0 + h10 * m0 + h01 * y1 + h11 * m1;
    let dv = ((6.0 * t * t - 6.0 * t) * y0
        + (3.0 * t * t - 4.0 * t + 1.0) * m0
        + (-6.0 * t * t + 6.0 * t) * y1
        + (3.0 * t * t - 2.0 * t) * m1)
        / w;
    (v, dv)
}

/// Table slopes: fourth-order differences on uniform tables, three-point
/// nonuniform differences otherwise.
fn table_slopes(radii: &[f64], values: &[f64]) -> Vec<f64> {
    let n = radii.len();
    let spacing = radii[1] - radii[0];
    let uniform = radii.windows(2).all(|w| ((w[1] - w[0]) - spacing).abs() <= 1e-9 * spacing);
    if uniform {
        return derivative_4th(values, spacing);
    }
    (0..n)
        .map(|i| {
            let (a, b, c) = if i == 0 {
                (0, 1, 2)
            } else if i == n - 1 {
                (n - 3, n - 2, n - 1)
            } else {
                (i - 1, i, i + 1)
            };
            let (x0, x1, x2) = (radii[a], radii[b], radii[c]);
            let x = radii[i];
            let l0 = (2.0 * x - x1 - x2) / ((x0 - x1) * (x0 - x2));
            let l1 = (2.0 * x - x0 - x2) / ((x1 - x0) * (x1 - x2));
            let l2 = (2.0 * x - x0 - x1) / ((x2 - x0) * (x2 - x1));
            l0 * values[a] + l1 * values[b] + l2 * values[c]
        })
        .collect()
}

/// Outcome of the repulsivity check.
#[derive(Debug, Clone, PartialEq)]
pub struct RepulsivityReport {
    pub dimension: usize,
    pub gamma: f64,
    /// `V ≥ 0` held at every node.
    pub nonnegative: bool,
    /// Samples of `γV + r∂_rV` (after applying any angular bound).
    pub lhs: Vec<f64>,
    /// Largest admissible margin (dimensions above three).
    pub eta: Option<f64>,
    /// Envelope `W(t) = max(0, γV + t∂_rV)` at the nodes (dimension three).
    pub envelope: Option<Vec<f64>>,
    /// `∫₀^∞ t W(t) dt`, including the tail bound (dimension three).
    pub moment: Option<f64>,
    /// Tail `∫_{r_max}^∞ t W dt` bound included in `moment`.
    pub tail: Option<f64>,
    /// `χ(d)`: 1 in dimension three, 0 otherwise.
    pub chi: u8,
    pub pass: bool,
}

/// Check `V ≥ 0` and the radial-derivative condition on `V` at every node.
pub fn check_repulsive(spec: &PotentialSpec, d: usize, gamma: f64, grid: &RadialGrid) -> Result<RepulsivityReport> {
    if d < 3 {
        return Err(Error::Domain(format!("repulsivity conditions need d ≥ 3, got {d}")));
    }
    if !(gamma > 0.0) {
        return Err(Error::Domain(format!("γ must be positive, got {gamma}")));
    }
    let nodes = grid.nodes();
    let mut lhs = Vec::with_capacity(nodes.len());
    for (i, &r) in nodes.iter().enumerate() {
        let v = spec.eval(r)?;
        if v < 0.0 {
            return Err(Error::NegativePotential { node: i, r });
        }
        let raw = spec.repulsion_lhs(r, gamma)?;
        lhs.push(match spec.angular_bound {
            Some(bound) => (bound * raw).max(0.0),
            None => raw,
        });
    }
    let dim = d as f64;
    if d > 3 {
        let hardy = (dim - 1.0) * (dim - 3.0) / 2.0;
        let worst = nodes
            .iter()
            .zip(&lhs)
            .map(|(r, l)| r * r * l / hardy)
            .fold(f64::NEG_INFINITY, f64::max);
        let eta = (1.0 - worst).min(1.0);
        return Ok(RepulsivityReport {
            dimension: d,
            gamma,
            nonnegative: true,
            lhs,
            eta: Some(eta),
            envelope: None,
            moment: None,
            tail: None,
            chi: 0,
            pass: eta > 0.0,
        });
    }
    let envelope: Vec<f64> = lhs.iter().map(|l| l.max(0.0)).collect();
    let t_w: Vec<f64> = nodes.iter().zip(&envelope).map(|(t, w)| t * w).collect();
    let body = CumulativeIntegral::on_line(grid.spacing(), &t_w).total();
    let last = *envelope.last().expect("non-empty grid");
    let r_max = grid.r_max();
    let p = spec.decay_exponent();
    let tail = if last == 0.0 {
        0.0
    } else if p > 2.0 {
        last * r_max * r_max / (p - 2.0)
    } else {
        f64::INFINITY
    };
    let moment = body + tail;
    Ok(RepulsivityReport {
        dimension: d,
        gamma,
        nonnegative: true,
        lhs,
        eta: None,
        envelope: Some(envelope),
        moment: Some(moment),
        tail: Some(tail),
        chi: 1,
        pass: moment < 0.5,
    })
}

/// One dyadic shell's contribution to `β_ρ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShellTerm {
    pub j: i32,
    /// `sup_{C_j} ∂_r n/|n|` before clamping.
    pub sup: f64,
    /// `2^{j+1} max(sup, 0)`.
    pub term: f64,
}

/// Outcome of the attraction index computation.
#[derive(Debug, Clone, PartialEq)]
pub struct AttractionReport {
    pub dimension: usize,
    pub rho: f64,
    pub j0: i32,
    pub shells: Vec<ShellTerm>,
    /// `ρ · max(sup_{B(0,ρ)} ∂_r n/|n|, 0)`.
    pub ball_term: f64,
    /// Shell sum plus ball term over shells meeting the grid.
    pub beta_grid: f64,
    /// Bound for the shells beyond `r_max` (may be infinite).
    pub tail_bound: f64,
    /// `beta_grid + tail_bound`.
    pub beta: f64,
    /// Shells extended past `r_max`, so the tail bound was used.
    pub truncated: bool,
    /// Threshold verdict (`β_ρ < 1/4` above dimension three, `β_ρ + ∫tW < 1/2`
    /// in dimension three with the moment supplied to
    /// [`AttractionReport::verdict_with_moment`]; `W ≡ 0` by default).
    pub pass: bool,
    /// Hardy-sufficient constant of the Sobolev split, when one is given.
    pub split_constant: Option<f64>,
}

impl AttractionReport {
    pub fn verdict_with_moment(&self, moment: f64) -> bool {
        if self.dimension > 3 {
            self.beta < 0.25
        } else {
            self.beta + moment < 0.5
        }
    }
}

/// `β_ρ = Σ_{j ≥ j₀} 2^{j+1} sup_{C_j} ∂_r n/|n| + ρ sup_{B(0,ρ)} ∂_r n/|n|`
/// with suprema taken over the nodes in each shell and the shell endpoints.
pub fn compute_beta_rho(n: &PotentialSpec, rho: f64, grid: &RadialGrid) -> Result<AttractionReport> {
    let r_max = grid.r_max();
    if !(rho > 0.0 && rho < r_max) {
        return Err(Error::Domain(format!("ρ must lie in (0, r_max), got {rho}")));
    }
    let ratio = |r: f64| -> Result<f64> {
        let v = n.eval(r)?;
        Ok(n.derivative(r)? / v.abs())
    };
    let nodes = grid.nodes();
    let mut node_ratio = Vec::with_capacity(nodes.len());
    for (i, &r) in nodes.iter().enumerate() {
        let v = n.eval(r)?;
        if v >= 0.0 {
            return Err(Error::SignViolation { node: i, r });
        }
        node_ratio.push(n.derivative(r)? / v.abs());
    }
    let sup_over = |a: f64, b: f64, include_a: bool| -> Result<f64> {
        // Nodes in (a, b] plus the endpoints that lie in (0, r_max].
        let mut s = f64::NEG_INFINITY;
        for (r, q) in nodes.iter().zip(&node_ratio) {
            if *r > a && *r <= b {
                s = s.max(*q);
            }
        }
        if include_a && a > 0.0 && a <= r_max {
            s = s.max(ratio(a)?);
        }
        if b <= r_max {
            s = s.max(ratio(b)?);
        } else {
            s = s.max(ratio(r_max)?);
        }
        Ok(s)
    };
    let j0 = shell_index(rho);
    let mut shells = Vec::new();
    let mut j = j0;
    while 2f64.powi(j) < r_max {
        let a = 2f64.powi(j);
        let b = 2f64.powi(j + 1);
        let sup = sup_over(a, b, true)?;
        shells.push(ShellTerm {
            j,
            sup,
            term: b * sup.max(0.0),
        });
        j += 1;
    }
    let ball_sup = sup_over(0.0, rho, false)?;
    let ball_term = rho * ball_sup.max(0.0);
    let beta_grid = shells.iter().map(|s| s.term).sum::<f64>() + ball_term;
    let truncated = 2f64.powi(j) >= r_max;
    let q_end = ratio(r_max)?;
    let tail_bound = if q_end <= 0.0 {
        0.0
    } else {
        let q_half = ratio(0.5 * r_max)?;
        let kappa = if q_half > 0.0 { (q_half / q_end).log2() } else { 0.0 };
        if kappa <= 1.0 {
            f64::INFINITY
        } else {
            let big_j = j as f64;
            2.0 * q_end * r_max.powf(kappa) * 2f64.powf(big_j * (1.0 - kappa)) / (1.0 - 2f64.powf(1.0 - kappa))
        }
    };
    let beta = beta_grid + tail_bound;
    let dimension = grid.dimension();
    let split_constant = match &n.split {
        Some(split) if dimension >= 3 => Some(check_sobolev_split(split.n1_bound, &split.n2, dimension, grid)?.c1),
        _ => None,
    };
    let mut report = AttractionReport {
        dimension,
        rho,
        j0,
        shells,
        ball_term,
        beta_grid,
        tail_bound,
        beta,
        truncated,
        pass: false,
        split_constant,
    };
    report.pass = report.verdict_with_moment(0.0);
    Ok(report)
}

/// Outcome of the Hardy-sufficient Sobolev split check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SobolevSplitReport {
    /// `sup r²|n₂(r)|` over the grid.
    pub kappa: f64,
    /// `κ (2/(d−2))²`.
    pub c1: f64,
    /// `c₁ < 1`; sufficient, not necessary.
    pub pass: bool,
    pub n1_bound: f64,
}

/// Hardy-sufficient constant for `∫|n₂||g|² ≤ c₁ ∫|∇g|²`: with
/// `|n₂| ≤ κ/r²`, Hardy's inequality gives `c₁ = κ(2/(d−2))²`.
pub fn check_sobolev_split(n1_bound: f64, n2: &PotentialSpec, d: usize, grid: &RadialGrid) -> Result<SobolevSplitReport> {
    if d < 3 {
        return Err(Error::Domain(format!("the Hardy criterion needs d ≥ 3, got {d}")));
    }
    if !(n1_bound >= 0.0 && n1_bound.is_finite()) {
        return Err(Error::Domain("n₁ bound must be finite and nonnegative".into()));
    }
    if n2.is_zero() {
        return Ok(SobolevSplitReport {
            kappa: 0.0,
            c1: 0.0,
            pass: true,
            n1_bound,
        });
    }
    if n2.origin_exponent() > 2.0 {
        return Err(Error::UnsupportedSplit(format!(
            "n₂ blows up like r^-{} at the origin, faster than κ/r²",
            n2.origin_exponent()
        )));
    }
    if n2.decay_exponent() < 2.0 {
        return Err(Error::UnsupportedSplit(format!(
            "n₂ decays like r^-{} at infinity, slower than κ/r²",
            n2.decay_exponent()
        )));
    }
    let mut kappa: f64 = 0.0;
    for r in grid.nodes() {
        kappa = kappa.max(r * r * n2.eval(r)?.abs());
    }
    let c1 = kappa * (2.0 / (d as f64 - 2.0)).powi(2);
    Ok(SobolevSplitReport {
        kappa,
        c1,
        pass: c1 < 1.0,
        n1_bound,
    })
}

/// Which decay condition a constant belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecayCondition {
    /// `|V₁| ≤ a/(1+r)^γ`.
    V1Size,
    /// `|V₂| ≤ a/(1+r)^{γ+1}`.
    V2Size,
    /// `∂_rV₁ ≤ a/(1+r)^{γ+1}`.
    V1Slope,
}

/// One `B(τ₀)` evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BEntry {
    pub tau0: f64,
    pub b: f64,
    /// `1/(2 B(τ₀) τ₀²) < 1`, needed in dimension two.
    pub d2_admissible: bool,
}

/// Outcome of the long-range decay check.
#[derive(Debug, Clone, PartialEq)]
pub struct LongRangeReport {
    pub gamma: f64,
    /// Smallest constants for the three conditions, in the order
    /// `V1Size`, `V2Size`, `V1Slope`.
    pub constants: [f64; 3],
    /// Node index where each constant is attained.
    pub argmax: [usize; 3],
    /// `max` of the three constants.
    pub a: f64,
    /// First condition with an unbounded ratio near the origin.
    pub failing: Option<DecayCondition>,
    pub b_values: Vec<BEntry>,
}

/// Smallest `a` with `|V₁| ≤ a(1+r)^{-γ}`, `|V₂| ≤ a(1+r)^{-γ-1}` and
/// `∂_rV₁ ≤ a(1+r)^{-γ-1}` at every node, plus `B(τ₀)` for each `τ₀`.
pub fn check_long_range(
    v1: &PotentialSpec,
    v2: &PotentialSpec,
    gamma: f64,
    grid: &RadialGrid,
    tau0_list: &[f64],
) -> Result<LongRangeReport> {
    if !(gamma > 0.0) {
        return Err(Error::Domain(format!("γ must be positive, got {gamma}")));
    }
    let mut constants = [0.0f64; 3];
    let mut argmax = [0usize; 3];
    let mut failing = None;
    if v1.origin_exponent() > 0.0 {
        failing = Some(DecayCondition::V1Size);
    } else if v2.origin_exponent() > 0.0 {
        failing = Some(DecayCondition::V2Size);
    }
    if failing.is_some() {
        let a = f64::INFINITY;
        return Ok(LongRangeReport {
            gamma,
            constants: [a; 3],
            argmax,
            a,
            failing,
            b_values: tau0_list
                .iter()
                .map(|&tau0| BEntry {
                    tau0,
                    b: f64::INFINITY,
                    d2_admissible: false,
                })
                .collect(),
        });
    }
    for (i, r) in grid.nodes().into_iter().enumerate() {
        let w = (1.0 + r).powf(gamma);
        let candidates = [
            v1.eval(r)?.abs() * w,
            v2.eval(r)?.abs() * w * (1.0 + r),
            v1.derivative(r)?.max(0.0) * w * (1.0 + r),
        ];
        for k in 0..3 {
            if candidates[k] > constants[k] {
                constants[k] = candidates[k];
                argmax[k] = i;
            }
        }
    }
    let a = constants.iter().copied().fold(0.0, f64::max);
    let d = grid.dimension();
    let mut b_values = Vec::with_capacity(tau0_list.len());
    for &tau0 in tau0_list {
        let b = compute_b_tau0(a, d, gamma, tau0)?;
        b_values.push(BEntry {
            tau0,
            b,
            d2_admissible: 1.0 / (2.0 * b * tau0 * tau0) < 1.0,
        });
    }
    Ok(LongRangeReport {
        gamma,
        constants,
        argmax,
        a,
        failing,
        b_values,
    })
}

/// `B(τ₀) = 16a(d²−1)(1 + F(γ) max{1, 1/τ₀ − 1}) + a(2a+1)` with
/// `F(γ) = 2^γ/(2^γ − 1)`.
pub fn compute_b_tau0(a: f64, d: usize, gamma: f64, tau0: f64) -> Result<f64> {
    if !(a >= 0.0) || d < 2 || !(tau0 > 0.0) {
        return Err(Error::Domain(format!("B(τ₀) needs a ≥ 0, d ≥ 2, τ₀ > 0 (a={a}, d={d}, τ₀={tau0})")));
    }
    if gamma == 0.0 {
        return Err(Error::Domain("F(γ) = 2^γ/(2^γ − 1) is undefined at γ = 0".into()));
    }
    if !(gamma > 0.0) {
        return Err(Error::Domain(format!("γ must be positive, got {gamma}")));
    }
    let f = 2f64.powf(gamma) / (2f64.powf(gamma) - 1.0);
    let d = d as f64;
    Ok(16.0 * a * (d * d - 1.0) * (1.0 + f * (1.0 / tau0 - 1.0).max(1.0)) + a * (2.0 * a + 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(kind: PotentialKind) -> PotentialSpec {
        PotentialSpec::new(kind, PotentialRole::VRepulsive).unwrap()
    }

    #[test]
    fn evaluations() {
        assert_eq!(spec(PotentialKind::Zero).eval(1.0).unwrap(), 0.0);
        let v = spec(PotentialKind::InversePower { c: 0.5, gamma: 2.0 });
        assert!((v.eval(2.0).unwrap() - 0.125).abs() < 1e-15);
        assert!(v.eval(0.0).is_err());
        assert!(PotentialSpec::new(PotentialKind::InversePower { c: 1.0, gamma: 0.0 }, PotentialRole::VRepulsive).is_err());
    }

    #[test]
    fn b_tau0_example() {
        assert!((compute_b_tau0(0.1, 3, 1.0, 1.0).unwrap() - 38.52).abs() < 1e-12);
        assert_eq!(compute_b_tau0(0.0, 3, 1.0, 0.3).unwrap(), 0.0);
        assert!(compute_b_tau0(0.1, 3, 0.0, 1.0).is_err());
    }

    #[test]
    fn table_reproduces_smooth_profile() {
        let radii: Vec<f64> = (1..=200).map(|i| i as f64 * 0.05).collect();
        let values: Vec<f64> = radii.iter().map(|r| (-r).exp()).collect();
        let v = spec(PotentialKind::NeumannTable {
            radii,
            values,
            decay: 3.0,
        });
        for r in [0.33, 1.234, 5.5] {
            assert!((v.eval(r).unwrap() - (-r as f64).exp()).abs() < 1e-6);
            assert!((v.derivative(r).unwrap() + (-r as f64).exp()).abs() < 1e-4);
        }
    }

    #[test]
    fn exact_derivatives_match_differences() {
        let kinds = [
            PotentialKind::SmoothInversePower { c: 0.7, alpha: 1.5 },
            PotentialKind::ShiftedInversePower { c: 0.2, gamma: 1.0 },
            PotentialKind::ExpWell {
                mu: 1.0,
                b: 0.3,
                gamma_g: 2.0,
                form: ExpWellForm::Omega,
            },
            PotentialKind::ExpWell {
                mu: 2.0,
                b: 0.3,
                gamma_g: 2.5,
                form: ExpWellForm::OmegaMinusMu,
            },
            PotentialKind::ExpWell {
                mu: 1.0,
                b: 0.3,
                gamma_g: 2.0,
                form: ExpWellForm::Relaxed,
            },
            PotentialKind::Manufactured(ManufacturedProfile::ZeroMode { lambda: -2.0, d: 3 }),
            PotentialKind::Manufactured(ManufacturedProfile::Gaussian { amplitude: 1.5, width: 0.8 }),
        ];
        for kind in kinds {
            let v = PotentialSpec::new(kind, PotentialRole::VRepulsive).unwrap();
            for r in [0.3, 1.0, 2.7] {
                let eps = 1e-5;
                let fd = (v.eval(r + eps).unwrap() - v.eval(r - eps).unwrap()) / (2.0 * eps);
                assert!((fd - v.derivative(r).unwrap()).abs() < 1e-8, "{:?} at {r}", v.kind);
            }
        }
    }
}
