//! Config-driven experiment runner behind the `smoothing-lab` binary.
//!
//! A run parses a strict TOML config, executes one subcommand and returns a
//! [`RunReport`]: tables of results, header diagnostics, the resolved config
//! with its SHA-256 hash, and the list of violated assertions. Writing the
//! report to disk is left to the caller.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::evolution::{
    diagonalize, free_spectrum, low_energy_probe, potential_ball_weight, smoothing_functional, supersmooth_sweep,
    DataFamily, DataSpec, Estimate, SmoothingDerivative, SweepConfig, DEFAULT_RETENTION,
};
use crate::grids::{ModeFunction, RadialGrid, Weight};
use crate::helmholtz::{
    manufactured_rhs, manufactured_solution, solve_resolvent, Boundary, ResolventProblem, Sign, TauConvention,
    LEAK_THRESHOLD,
};
use crate::identities::{check_identity, Identity, TestWeight};
use crate::multipliers::{appendix2_construct, morawetz_profile, piecewise_profile, psi_weight, HProfile, MultiplierProfile};
use crate::numeric::compensated_sum;
use crate::potentials::{
    check_long_range, check_repulsive, compute_beta_rho, ExpWellForm, ManufacturedProfile, PotentialKind,
    PotentialRole, PotentialSpec,
};
use crate::Complex64;

/// Subcommands of the runner.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subcommand {
    CheckPotential,
    Multiplier,
    Solve,
    VerifyIdentities,
    Sweep,
    Evolve,
    Spectrum,
}

impl Subcommand {
    pub const ALL: [Subcommand; 7] = [
        Subcommand::CheckPotential,
        Subcommand::Multiplier,
        Subcommand::Solve,
        Subcommand::VerifyIdentities,
        Subcommand::Sweep,
        Subcommand::Evolve,
        Subcommand::Spectrum,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Subcommand::CheckPotential => "check-potential",
            Subcommand::Multiplier => "multiplier",
            Subcommand::Solve => "solve",
            Subcommand::VerifyIdentities => "verify-identities",
            Subcommand::Sweep => "sweep",
            Subcommand::Evolve => "evolve",
            Subcommand::Spectrum => "spectrum",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|s| s.name() == name)
    }
}

// ---------------------------------------------------------------------------
// Config schema
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dimension: usize,
    pub grid: GridConfig,
    pub potential: Vec<PotentialConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub multiplier: Option<MultiplierConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub problem: Option<ProblemConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rhs: Option<RhsConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checks: Option<ChecksConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub identities: Option<IdentitiesConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<DataConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evolve: Option<EvolveConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spectrum: Option<SpectrumConfig>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub n: usize,
    pub rmax: f64,
    pub mode_l: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PotentialKindName {
    Zero,
    InversePower,
    SmoothInversePower,
    ShiftedInversePower,
    ExpWell,
    NeumannTable,
    Manufactured,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RoleName {
    #[serde(rename = "V_repulsive")]
    VRepulsive,
    #[serde(rename = "n_attractive")]
    NAttractive,
    #[serde(rename = "V1_long_range")]
    V1LongRange,
    #[serde(rename = "V2_long_range")]
    V2LongRange,
}

impl From<RoleName> for PotentialRole {
    fn from(role: RoleName) -> Self {
        match role {
            RoleName::VRepulsive => PotentialRole::VRepulsive,
            RoleName::NAttractive => PotentialRole::NAttractive,
            RoleName::V1LongRange => PotentialRole::V1LongRange,
            RoleName::V2LongRange => PotentialRole::V2LongRange,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExpWellFormName {
    Omega,
    OmegaMinusMu,
    Relaxed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ManufacturedName {
    ZeroMode,
    Gaussian,
}

/// Parameters of every potential kind; each kind accepts only its own keys.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_g: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub form: Option<ExpWellFormName>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radii: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decay: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile: Option<ManufacturedName>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amplitude: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width: Option<f64>,
}

impl PotentialParams {
    fn present(&self) -> Vec<&'static str> {
        let mut keys = Vec::new();
        let mut mark = |set: bool, key: &'static str| {
            if set {
                keys.push(key);
            }
        };
        mark(self.c.is_some(), "c");
        mark(self.gamma.is_some(), "gamma");
        mark(self.alpha.is_some(), "alpha");
        mark(self.mu.is_some(), "mu");
        mark(self.b.is_some(), "b");
        mark(self.gamma_g.is_some(), "gamma_g");
        mark(self.form.is_some(), "form");
        mark(self.radii.is_some(), "radii");
        mark(self.values.is_some(), "values");
        mark(self.decay.is_some(), "decay");
        mark(self.profile.is_some(), "profile");
        mark(self.lambda.is_some(), "lambda");
        mark(self.amplitude.is_some(), "amplitude");
        mark(self.width.is_some(), "width");
        keys
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialConfig {
    pub kind: PotentialKindName,
    pub role: RoleName,
    #[serde(default)]
    pub params: PotentialParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub angular_bound: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum HProfileConfig {
    Zero,
    PowerDecay { amplitude: f64, exponent: f64 },
}

impl From<&HProfileConfig> for HProfile {
    fn from(h: &HProfileConfig) -> Self {
        match *h {
            HProfileConfig::Zero => HProfile::Zero,
            HProfileConfig::PowerDecay { amplitude, exponent } => HProfile::PowerDecay { amplitude, exponent },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MultiplierConfig {
    Morawetz {
        #[serde(rename = "R")]
        radius: f64,
    },
    Piecewise {
        #[serde(rename = "R")]
        radius: f64,
    },
    Psi {
        #[serde(rename = "R")]
        radius: f64,
    },
    Appendix2 {
        #[serde(rename = "R")]
        radius: f64,
        epsilon: f64,
        alpha: f64,
        kappa: f64,
        h_profile: HProfileConfig,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignName {
    Plus,
    Minus,
}

impl From<SignName> for Sign {
    fn from(sign: SignName) -> Self {
        match sign {
            SignName::Plus => Sign::Plus,
            SignName::Minus => Sign::Minus,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConventionName {
    MinusTau,
    PlusTau,
}

impl From<ConventionName> for TauConvention {
    fn from(c: ConventionName) -> Self {
        match c {
            ConventionName::MinusTau => TauConvention::MinusTau,
            ConventionName::PlusTau => TauConvention::PlusTau,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BoundaryConfig {
    Dirichlet,
    Sponge { width: f64, strength: f64 },
}

impl From<BoundaryConfig> for Boundary {
    fn from(b: BoundaryConfig) -> Self {
        match b {
            BoundaryConfig::Dirichlet => Boundary::Dirichlet,
            BoundaryConfig::Sponge { width, strength } => Boundary::Sponge { width, strength },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub tau: f64,
    pub epsilon: f64,
    pub sign: SignName,
    pub boundary: BoundaryConfig,
    #[serde(default = "minus_tau")]
    pub tau_convention: ConventionName,
}

fn minus_tau() -> ConventionName {
    ConventionName::MinusTau
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RhsConfig {
    /// `e^{−(r − center)²/width²}`.
    Gaussian { center: f64, width: f64 },
    /// Indicator of the dyadic shell `2^j < r ≤ 2^{j+1}`.
    Shell { j: i32 },
    /// Forcing of the manufactured profile `r e^{−r²}`.
    Manufactured,
    /// Text file with `r re im` per line, interpolated linearly.
    CustomFile { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChecksConfig {
    /// `γ` of the repulsivity condition.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    /// `ρ` of the attraction index.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    /// Decay exponent of the long-range conditions.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub long_range_gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau0_list: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TestWeightConfig {
    One,
    Ball {
        #[serde(rename = "R")]
        radius: f64,
    },
    /// `e^{−r²/width²}`.
    Gaussian { width: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdentitiesConfig {
    pub list: Vec<Identity>,
    pub n_list: Vec<usize>,
    pub weight: TestWeightConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub estimate: String,
    pub sign: SignName,
    pub boundary: BoundaryConfig,
    pub tau_list: Vec<f64>,
    pub epsilon_list: Vec<f64>,
    #[serde(rename = "R_list", default)]
    pub radius_list: Vec<f64>,
    pub rho: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default = "default_conventions")]
    pub conventions: Vec<ConventionName>,
    #[serde(default = "default_leak_threshold")]
    pub leak_threshold: f64,
    /// Terms whose ratios must meet the decade criterion.
    #[serde(default)]
    pub assert_terms: Vec<String>,
}

fn default_conventions() -> Vec<ConventionName> {
    vec![ConventionName::MinusTau]
}

fn default_leak_threshold() -> f64 {
    LEAK_THRESHOLD
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub family: String,
    pub seed: u64,
    pub count: usize,
    #[serde(default = "unit")]
    pub amplitude: f64,
}

fn unit() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SmoothingWeightName {
    /// `(1/R)χ_{B(0,R)}`.
    Ball,
    /// `(1/R)V^{1/2}χ_{B(0,R)}` with the first potential.
    PotentialBall,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DerivativeName {
    None,
    Half,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeConfig {
    pub deltas: Vec<f64>,
    pub alpha: f64,
    pub radii: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolveConfig {
    pub boundary: BoundaryConfig,
    pub initial: RhsConfig,
    pub window: f64,
    pub step: f64,
    pub radii: Vec<f64>,
    pub weight: SmoothingWeightName,
    pub derivative: DerivativeName,
    #[serde(default = "default_retention")]
    pub retention: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probe: Option<ProbeConfig>,
}

fn default_retention() -> f64 {
    DEFAULT_RETENTION
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumConfig {
    pub boundary: BoundaryConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<usize>,
}

/// Acceptance tolerances checked by the subcommands.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Largest accepted relative residual of a solve.
    pub residual: f64,
    /// Smallest accepted identity residual ratio per halving of `h`.
    pub refinement_ratio: f64,
    /// Residuals below this count as converged.
    pub identity_floor: f64,
    pub decade_spread: f64,
    pub decade_slope: f64,
    /// Largest accepted max/min of the smoothing functional across radii.
    pub smoothing_spread: f64,
    /// Largest accepted growth of probe value/δ relative to the first δ.
    pub probe_growth: f64,
    /// Slack on the pointwise multiplier bounds.
    pub multiplier: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            residual: 1e-8,
            refinement_ratio: 3.5,
            identity_floor: 1e-12,
            decade_spread: 10.0,
            decade_slope: 0.1,
            smoothing_spread: 4.0,
            probe_growth: 2.0,
            multiplier: 1e-12,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(default)]
    pub format: Format,
}

impl ExperimentConfig {
    /// Parse a TOML config; schema errors carry the offending key path.
    pub fn from_toml(text: &str) -> Result<Self> {
        let de = toml::Deserializer::new(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::config(if path.is_empty() { "<root>".into() } else { path }, e.into_inner().message().to_string())
        })
    }

    /// Canonical JSON of the resolved config.
    pub fn resolved(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    /// Hex SHA-256 of [`ExperimentConfig::resolved`].
    pub fn content_hash(&self) -> String {
        let digest = Sha256::digest(self.resolved().as_bytes());
        digest.iter().fold(String::with_capacity(64), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
    }

    fn grid(&self) -> Result<RadialGrid> {
        if self.grid.n < 8 {
            return Err(Error::config("grid.n", "need at least 8 nodes"));
        }
        if !(self.grid.rmax > 0.0 && self.grid.rmax.is_finite()) {
            return Err(Error::config("grid.rmax", "must be positive and finite"));
        }
        RadialGrid::new(self.dimension, self.grid.mode_l, self.grid.n, self.grid.rmax)
            .map_err(|e| Error::config("dimension", e.to_string()))
    }

    fn potentials(&self) -> Result<Vec<PotentialSpec>> {
        self.potential
            .iter()
            .enumerate()
            .map(|(i, p)| build_potential(p, self.dimension, &format!("potential[{i}]")))
            .collect()
    }

    fn section<'a, T>(value: &'a Option<T>, name: &str) -> Result<&'a T> {
        value.as_ref().ok_or_else(|| Error::config(name, "section is required by this subcommand"))
    }
}

fn build_potential(p: &PotentialConfig, dimension: usize, path: &str) -> Result<PotentialSpec> {
    let params = &p.params;
    let allowed: &[&str] = match p.kind {
        PotentialKindName::Zero => &[],
        PotentialKindName::InversePower | PotentialKindName::ShiftedInversePower => &["c", "gamma"],
        PotentialKindName::SmoothInversePower => &["c", "alpha"],
        PotentialKindName::ExpWell => &["mu", "b", "gamma_g", "form"],
        PotentialKindName::NeumannTable => &["radii", "values", "decay"],
        PotentialKindName::Manufactured => match params.profile {
            Some(ManufacturedName::ZeroMode) => &["profile", "lambda"],
            Some(ManufacturedName::Gaussian) => &["profile", "amplitude", "width"],
            None => &["profile"],
        },
    };
    if let Some(extra) = params.present().into_iter().find(|k| !allowed.contains(k)) {
        return Err(Error::config(format!("{path}.params.{extra}"), "not a parameter of this kind"));
    }
    let need = |v: Option<f64>, key: &str| v.ok_or_else(|| Error::config(format!("{path}.params.{key}"), "missing"));
    let kind = match p.kind {
        PotentialKindName::Zero => PotentialKind::Zero,
        PotentialKindName::InversePower => PotentialKind::InversePower {
            c: need(params.c, "c")?,
            gamma: need(params.gamma, "gamma")?,
        },
        PotentialKindName::SmoothInversePower => PotentialKind::SmoothInversePower {
            c: need(params.c, "c")?,
            alpha: need(params.alpha, "alpha")?,
        },
        PotentialKindName::ShiftedInversePower => PotentialKind::ShiftedInversePower {
            c: need(params.c, "c")?,
            gamma: need(params.gamma, "gamma")?,
        },
        PotentialKindName::ExpWell => PotentialKind::ExpWell {
            mu: need(params.mu, "mu")?,
            b: need(params.b, "b")?,
            gamma_g: need(params.gamma_g, "gamma_g")?,
            form: match params.form.ok_or_else(|| Error::config(format!("{path}.params.form"), "missing"))? {
                ExpWellFormName::Omega => ExpWellForm::Omega,
                ExpWellFormName::OmegaMinusMu => ExpWellForm::OmegaMinusMu,
                ExpWellFormName::Relaxed => ExpWellForm::Relaxed,
            },
        },
        PotentialKindName::NeumannTable => PotentialKind::NeumannTable {
            radii: params.radii.clone().ok_or_else(|| Error::config(format!("{path}.params.radii"), "missing"))?,
            values: params.values.clone().ok_or_else(|| Error::config(format!("{path}.params.values"), "missing"))?,
            decay: need(params.decay, "decay")?,
        },
        PotentialKindName::Manufactured => {
            match params.profile.ok_or_else(|| Error::config(format!("{path}.params.profile"), "missing"))? {
                ManufacturedName::ZeroMode => PotentialKind::Manufactured(ManufacturedProfile::ZeroMode {
                    lambda: need(params.lambda, "lambda")?,
                    d: dimension,
                }),
                ManufacturedName::Gaussian => PotentialKind::Manufactured(ManufacturedProfile::Gaussian {
                    amplitude: need(params.amplitude, "amplitude")?,
                    width: need(params.width, "width")?,
                }),
            }
        }
    };
    let spec = PotentialSpec::new(kind, p.role.into()).map_err(|e| Error::config(format!("{path}.params"), e.to_string()))?;
    Ok(match p.angular_bound {
        Some(bound) => spec.with_angular_bound(bound),
        None => spec,
    })
}

fn build_rhs(rhs: &RhsConfig, grid: RadialGrid, problem: Option<&ResolventProblem>, base: &Path, path: &str) -> Result<ModeFunction> {
    Ok(match rhs {
        RhsConfig::Gaussian { center, width } => {
            if !(*width > 0.0) {
                return Err(Error::config(format!("{path}.width"), "must be positive"));
            }
            ModeFunction::from_real_fn(grid, |r| (-((r - center) / width).powi(2)).exp())
        }
        RhsConfig::Shell { j } => {
            let a = 2f64.powi(*j);
            ModeFunction::indicator(grid, a, 2.0 * a)
        }
        RhsConfig::Manufactured => match problem {
            Some(p) => manufactured_rhs(p)?,
            None => manufactured_solution(grid),
        },
        RhsConfig::CustomFile { path: file } => {
            let full = if file.is_absolute() { file.clone() } else { base.join(file) };
            let text = std::fs::read_to_string(&full)
                .map_err(|e| Error::config(format!("{path}.path"), format!("{}: {e}", full.display())))?;
            let samples = parse_custom_rhs(&text).map_err(|m| Error::config(format!("{path}.path"), m))?;
            ModeFunction::from_fn(grid, |r| interpolate_samples(&samples, r))
        }
    })
}

/// Parse `r re im` lines; blank lines and `#` comments are skipped.
pub fn parse_custom_rhs(text: &str) -> std::result::Result<Vec<(f64, Complex64)>, String> {
    let mut out: Vec<(f64, Complex64)> = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(format!("line {}: expected `r re im`", k + 1));
        }
        let mut nums = [0.0; 3];
        for (slot, field) in nums.iter_mut().zip(&fields) {
            *slot = field.parse().map_err(|_| format!("line {}: `{field}` is not a number", k + 1))?;
        }
        if let Some(&(last, _)) = out.last() {
            if !(nums[0] > last) {
                return Err(format!("line {}: radii must increase", k + 1));
            }
        }
        out.push((nums[0], Complex64::new(nums[1], nums[2])));
    }
    if out.is_empty() {
        return Err("no samples".into());
    }
    Ok(out)
}

/// Linear interpolation, zero outside the sampled range.
fn interpolate_samples(samples: &[(f64, Complex64)], r: f64) -> Complex64 {
    let first = samples[0].0;
    let last = samples[samples.len() - 1].0;
    if r < first || r > last {
        return Complex64::new(0.0, 0.0);
    }
    let k = samples.partition_point(|(x, _)| *x <= r);
    if k == samples.len() {
        return samples[k - 1].1;
    }
    let (x0, y0) = samples[k - 1];
    let (x1, y1) = samples[k];
    y0 + (y1 - y0) * ((r - x0) / (x1 - x0))
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

/// One table cell.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Num(x) => format!("{x:.16e}"),
            Cell::Int(k) => k.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }

    fn json(&self) -> serde_json::Value {
        match self {
            Cell::Num(x) => serde_json::Number::from_f64(*x).map_or(serde_json::Value::Null, serde_json::Value::Number),
            Cell::Int(k) => serde_json::Value::from(*k),
            Cell::Text(s) => serde_json::Value::from(s.clone()),
        }
    }
}

fn num(x: f64) -> Cell {
    Cell::Num(x)
}

fn text(s: impl Into<String>) -> Cell {
    Cell::Text(s.into())
}

/// Named table of results.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    /// File stem of the written report.
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    fn new(name: &str, columns: &[&str]) -> Self {
        Self {
            name: name.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    /// Column header plus rows, without the comment header.
    pub fn csv_body(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Cell::csv).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

/// Everything a run produced.
#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub subcommand: Subcommand,
    pub config_hash: String,
    pub resolved_config: String,
    pub seed: Option<u64>,
    /// Output settings of the config.
    pub output: OutputConfig,
    /// Named scalar diagnostics for the header.
    pub diagnostics: Vec<(String, String)>,
    pub tables: Vec<Table>,
    /// Violated assertions; empty on success.
    pub failures: Vec<String>,
}

impl RunReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    fn header_pairs(&self) -> Vec<(String, String)> {
        let mut pairs = vec![
            ("tool".to_string(), format!("smoothing-lab {}", env!("CARGO_PKG_VERSION"))),
            ("subcommand".to_string(), self.subcommand.name().to_string()),
            ("config_hash".to_string(), self.config_hash.clone()),
            ("config".to_string(), self.resolved_config.clone()),
            (
                "seed".to_string(),
                self.seed.map_or_else(|| "none".to_string(), |s| s.to_string()),
            ),
        ];
        pairs.extend(self.diagnostics.iter().cloned());
        pairs.push((
            "status".to_string(),
            if self.passed() { "pass".to_string() } else { "fail".to_string() },
        ));
        for f in &self.failures {
            pairs.push(("failure".to_string(), f.clone()));
        }
        pairs
    }

    /// CSV with a `# key: value` header.
    pub fn render_csv(&self, table: &Table) -> String {
        let mut out = String::new();
        for (k, v) in self.header_pairs() {
            let _ = writeln!(out, "# {k}: {v}");
        }
        out.push_str(&table.csv_body());
        out
    }

    /// JSON object with `header`, `columns` and one object per row.
    pub fn render_json(&self, table: &Table) -> String {
        let mut header = serde_json::Map::new();
        header.insert("tool".into(), format!("smoothing-lab {}", env!("CARGO_PKG_VERSION")).into());
        header.insert("subcommand".into(), self.subcommand.name().into());
        header.insert("config_hash".into(), self.config_hash.clone().into());
        header.insert(
            "config".into(),
            serde_json::from_str(&self.resolved_config).expect("resolved config is JSON"),
        );
        header.insert("seed".into(), self.seed.map_or(serde_json::Value::Null, serde_json::Value::from));
        let diagnostics: serde_json::Map<String, serde_json::Value> =
            self.diagnostics.iter().map(|(k, v)| (k.clone(), v.clone().into())).collect();
        header.insert("diagnostics".into(), diagnostics.into());
        header.insert("status".into(), if self.passed() { "pass" } else { "fail" }.into());
        header.insert("failures".into(), self.failures.clone().into());
        let rows: Vec<serde_json::Value> = table
            .rows
            .iter()
            .map(|row| {
                let obj: serde_json::Map<String, serde_json::Value> =
                    table.columns.iter().cloned().zip(row.iter().map(Cell::json)).collect();
                obj.into()
            })
            .collect();
        let doc = serde_json::json!({ "header": header, "columns": table.columns, "rows": rows });
        let mut s = serde_json::to_string_pretty(&doc).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn render(&self, table: &Table, format: Format) -> String {
        match format {
            Format::Csv => self.render_csv(table),
            Format::Json => self.render_json(table),
        }
    }

    /// Write every table as `<dir>/<name>.<ext>`; returns the written paths.
    pub fn write(&self, dir: &Path, format: Format) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
        let mut written = Vec::new();
        for table in &self.tables {
            let path = dir.join(format!("{}.{}", table.name, format.extension()));
            std::fs::write(&path, self.render(table, format)).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
            written.push(path);
        }
        Ok(written)
    }
}

/// Process exit status for a failed run: 1 for usage and config problems,
/// 2 for violated invariants.
pub fn exit_code(error: &Error) -> i32 {
    match error {
        Error::Config { .. }
        | Error::Io(_)
        | Error::Rejected(_)
        | Error::Guard { .. }
        | Error::Size(_)
        | Error::DegenerateRadius(_)
        | Error::Domain(_) => 1,
        _ => 2,
    }
}

// ---------------------------------------------------------------------------
// Runner
// ---------------------------------------------------------------------------

/// Options that do not belong to the config file.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Replaces `data.seed`.
    pub seed: Option<u64>,
    /// Directory against which relative paths in the config resolve.
    pub base_dir: Option<PathBuf>,
}

struct Context {
    config: ExperimentConfig,
    base: PathBuf,
    diagnostics: Vec<(String, String)>,
    failures: Vec<String>,
    tables: Vec<Table>,
}

impl Context {
    fn diag(&mut self, key: impl Into<String>, value: impl ToString) {
        self.diagnostics.push((key.into(), value.to_string()));
    }

    fn fail(&mut self, message: impl Into<String>) {
        self.failures.push(message.into());
    }

    fn problem(&self, grid: RadialGrid) -> Result<ResolventProblem> {
        let p = ExperimentConfig::section(&self.config.problem, "problem")?;
        let rhs = ExperimentConfig::section(&self.config.rhs, "rhs")?;
        let base = ResolventProblem::new(grid, self.config.potentials()?, p.sign.into(), p.epsilon, p.tau, ModeFunction::zeros(grid))
            .with_boundary(p.boundary.into())
            .with_tau_convention(p.tau_convention.into());
        let f = build_rhs(rhs, grid, Some(&base), &self.base, "rhs")?;
        Ok(base.with_rhs(f))
    }
}

/// Parse `config_text` and run `subcommand`.
pub fn run(subcommand: Subcommand, config_text: &str, options: &RunOptions) -> Result<RunReport> {
    let mut config = ExperimentConfig::from_toml(config_text)?;
    if let (Some(seed), Some(data)) = (options.seed, config.data.as_mut()) {
        data.seed = seed;
    }
    run_config(subcommand, config, options)
}

/// Run `subcommand` on an already parsed config.
pub fn run_config(subcommand: Subcommand, config: ExperimentConfig, options: &RunOptions) -> Result<RunReport> {
    let seed = config.data.as_ref().map(|d| d.seed).or(options.seed);
    let mut ctx = Context {
        base: options.base_dir.clone().unwrap_or_else(|| PathBuf::from(".")),
        config,
        diagnostics: Vec::new(),
        failures: Vec::new(),
        tables: Vec::new(),
    };
    match subcommand {
        Subcommand::CheckPotential => run_check_potential(&mut ctx)?,
        Subcommand::Multiplier => run_multiplier(&mut ctx)?,
        Subcommand::Solve => run_solve(&mut ctx)?,
        Subcommand::VerifyIdentities => run_identities(&mut ctx)?,
        Subcommand::Sweep => run_sweep(&mut ctx)?,
        Subcommand::Evolve => run_evolve(&mut ctx)?,
        Subcommand::Spectrum => run_spectrum(&mut ctx)?,
    }
    Ok(RunReport {
        subcommand,
        config_hash: ctx.config.content_hash(),
        resolved_config: ctx.config.resolved(),
        seed,
        output: ctx.config.output.clone(),
        diagnostics: ctx.diagnostics,
        tables: ctx.tables,
        failures: ctx.failures,
    })
}

fn role_name(role: PotentialRole) -> &'static str {
    match role {
        PotentialRole::VRepulsive => "V_repulsive",
        PotentialRole::NAttractive => "n_attractive",
        PotentialRole::V1LongRange => "V1_long_range",
        PotentialRole::V2LongRange => "V2_long_range",
    }
}

fn flag(pass: bool) -> Cell {
    text(if pass { "true" } else { "false" })
}

fn run_check_potential(ctx: &mut Context) -> Result<()> {
    let grid = ctx.config.grid()?;
    let d = grid.dimension();
    let potentials = ctx.config.potentials()?;
    let checks = ctx.config.checks.clone();
    let require = |value: Option<f64>, key: &str| -> Result<f64> {
        value.ok_or_else(|| Error::config(format!("checks.{key}"), "required by the configured potentials"))
    };
    let mut table = Table::new("check_potential", &["potential", "role", "check", "quantity", "value", "pass"]);
    let mut repulsive_moment = 0.0;
    let mut pending_attractive = Vec::new();
    for (i, p) in potentials.iter().enumerate() {
        let role = role_name(p.role);
        let idx = Cell::Int(i as i64);
        if p.is_zero() {
            table.push(vec![idx, text(role), text("zero"), text("max_abs"), num(0.0), flag(true)]);
            continue;
        }
        match p.role {
            PotentialRole::VRepulsive => {
                let gamma = require(checks.as_ref().and_then(|c| c.gamma), "gamma")?;
                let rep = check_repulsive(p, d, gamma, &grid)?;
                let row = |q: &str, v: f64| vec![Cell::Int(i as i64), text(role), text("repulsive"), text(q), num(v), flag(rep.pass)];
                table.push(row("nonnegative", if rep.nonnegative { 1.0 } else { 0.0 }));
                if let Some(eta) = rep.eta {
                    table.push(row("eta", eta));
                }
                if let Some(m) = rep.moment {
                    table.push(row("moment", m));
                    repulsive_moment += m;
                }
                if !rep.pass {
                    ctx.fail(format!("potential[{i}] violates the repulsivity condition"));
                }
            }
            PotentialRole::NAttractive => pending_attractive.push(i),
            PotentialRole::V1LongRange | PotentialRole::V2LongRange => {}
        }
    }
    for i in pending_attractive {
        let rho = require(checks.as_ref().and_then(|c| c.rho), "rho")?;
        let report = compute_beta_rho(&potentials[i], rho, &grid)?;
        let pass = report.verdict_with_moment(repulsive_moment);
        let role = role_name(potentials[i].role);
        for (q, v) in [
            ("beta_rho", report.beta),
            ("beta_grid", report.beta_grid),
            ("tail_bound", report.tail_bound),
            ("ball_term", report.ball_term),
        ] {
            table.push(vec![Cell::Int(i as i64), text(role), text("attraction"), text(q), num(v), flag(pass)]);
        }
        ctx.diag(format!("beta_rho[{i}]"), format!("{:.16e}", report.beta));
        if !pass {
            ctx.fail(format!("potential[{i}] has β_ρ = {:e} above the threshold", report.beta));
        }
    }
    let v1: Vec<usize> = potentials.iter().enumerate().filter(|(_, p)| p.role == PotentialRole::V1LongRange && !p.is_zero()).map(|(i, _)| i).collect();
    let v2: Vec<usize> = potentials.iter().enumerate().filter(|(_, p)| p.role == PotentialRole::V2LongRange && !p.is_zero()).map(|(i, _)| i).collect();
    if v1.len() > 1 || v2.len() > 1 {
        return Err(Error::config("potential", "at most one V1_long_range and one V2_long_range potential"));
    }
    if !v1.is_empty() || !v2.is_empty() {
        let gamma = require(checks.as_ref().and_then(|c| c.long_range_gamma), "long_range_gamma")?;
        let tau0_list = checks
            .as_ref()
            .and_then(|c| c.tau0_list.clone())
            .ok_or_else(|| Error::config("checks.tau0_list", "required by the configured potentials"))?;
        let zero1 = PotentialSpec::zero(PotentialRole::V1LongRange);
        let zero2 = PotentialSpec::zero(PotentialRole::V2LongRange);
        let p1 = v1.first().map_or(&zero1, |&i| &potentials[i]);
        let p2 = v2.first().map_or(&zero2, |&i| &potentials[i]);
        let report = check_long_range(p1, p2, gamma, &grid, &tau0_list)?;
        let pass = report.failing.is_none();
        let index = v1.first().or(v2.first()).copied().unwrap_or(0) as i64;
        let mut row = |q: String, v: f64, ok: bool| {
            table.push(vec![Cell::Int(index), text("long_range"), text("decay"), text(q), num(v), flag(ok)]);
        };
        for (q, v) in ["v1_size", "v2_size", "v1_slope"].iter().zip(report.constants) {
            row(q.to_string(), v, pass);
        }
        row("a".into(), report.a, pass);
        for entry in &report.b_values {
            row(format!("B(tau0={})", entry.tau0), entry.b, pass);
            if d == 2 {
                row(format!("d2_admissible(tau0={})", entry.tau0), if entry.d2_admissible { 1.0 } else { 0.0 }, entry.d2_admissible);
            }
        }
        for entry in &report.b_values {
            ctx.diag(format!("B(tau0={})", entry.tau0), format!("{:.16e}", entry.b));
        }
        if let Some(cond) = report.failing {
            ctx.fail(format!("long-range condition {cond:?} is unbounded near the origin"));
        }
    }
    ctx.tables.push(table);
    Ok(())
}

fn build_profile(config: &MultiplierConfig, grid: &RadialGrid) -> Result<MultiplierProfile> {
    match config {
        MultiplierConfig::Morawetz { radius } => morawetz_profile(*radius, grid),
        MultiplierConfig::Piecewise { radius } => piecewise_profile(*radius, grid),
        MultiplierConfig::Appendix2 {
            radius,
            epsilon,
            alpha,
            kappa,
            h_profile,
        } => appendix2_construct(&h_profile.into(), *epsilon, *radius, *alpha, *kappa, grid),
        MultiplierConfig::Psi { .. } => Err(Error::config("multiplier.kind", "psi is a weight, not a multiplier profile")),
    }
}

fn run_multiplier(ctx: &mut Context) -> Result<()> {
    let grid = ctx.config.grid()?;
    let m = ExperimentConfig::section(&ctx.config.multiplier, "multiplier")?.clone();
    let tol = ctx.config.tolerances.multiplier;
    if let MultiplierConfig::Psi { radius } = m {
        let w = psi_weight(radius, &grid)?;
        let mut table = Table::new("multiplier", &["r", "psi", "reciprocal"]);
        for (i, r) in grid.nodes().into_iter().enumerate() {
            table.push(vec![num(r), num(w.values[i]), num(w.reciprocal[i])]);
        }
        for (name, ok) in [
            ("below_inverse_radius", w.below_inverse_radius),
            ("below_radius_over_r2", w.below_radius_over_r2),
            ("below_inverse_r", w.below_inverse_r),
            ("above_half_ball", w.above_half_ball),
        ] {
            ctx.diag(name, ok);
            if !ok {
                ctx.fail(format!("ψ_R bound {name} fails"));
            }
        }
        ctx.tables.push(table);
        return Ok(());
    }
    let profile = build_profile(&m, &grid)?;
    let first = profile.first_derivative();
    let second = profile.second_derivative();
    let laplacian = profile.laplacian();
    let bilaplacian = profile.bilaplacian();
    let mut table = Table::new("multiplier", &["r", "phi_first", "phi_second", "laplacian", "bilaplacian"]);
    let nodes = grid.nodes();
    for (i, &r) in nodes.iter().enumerate() {
        let b = bilaplacian.as_ref().map_or(f64::NAN, |b| b[i]);
        table.push(vec![num(r), num(first[i]), num(second[i]), num(laplacian[i]), num(b)]);
    }
    let meta = profile.meta().clone();
    ctx.diag("radius", format!("{:.16e}", profile.radius()));
    ctx.diag("snap_distance", format!("{:.16e}", meta.snap_distance));
    for (key, value) in [
        ("moment", meta.moment),
        ("phi_prime_limit", meta.phi_prime_limit),
        ("measured_c", meta.measured_c),
    ] {
        if let Some(v) = value {
            ctx.diag(key, format!("{v:.16e}"));
        }
    }
    match m {
        MultiplierConfig::Morawetz { .. } => {
            let bad_first = nodes.iter().zip(&first).find(|(_, a)| !(**a >= 1.0 - tol && **a <= 2.0 + tol));
            if let Some((r, a)) = bad_first {
                ctx.fail(format!("Φ' = {a} leaves [1, 2] at r = {r}"));
            }
            let bad_second = nodes.iter().zip(&second).find(|(r, b)| !(*r * **b >= -tol && *r * **b <= 1.0 + tol));
            if let Some((r, b)) = bad_second {
                ctx.fail(format!("rΦ'' = {} leaves [0, 1] at r = {r}", r * b));
            }
            if grid.dimension() >= 4 {
                if let Some((r, b)) = bilaplacian.as_ref().and_then(|bl| nodes.iter().zip(bl).find(|(_, b)| **b > tol)) {
                    ctx.fail(format!("Δ²Φ = {b} is positive at r = {r}"));
                }
            }
        }
        MultiplierConfig::Piecewise { .. } => {
            if let Some((r, a)) = nodes.iter().zip(&first).find(|(_, a)| a.abs() > 1.0 + tol) {
                ctx.fail(format!("|Φ'| = {} exceeds 1 at r = {r}", a.abs()));
            }
        }
        MultiplierConfig::Appendix2 { .. } => {
            if !meta.measured_c.is_some_and(|c| c > 0.0) {
                ctx.fail("the lower bound min(Φ'/r, Φ'') ≥ Cε/R has no positive C");
            }
        }
        MultiplierConfig::Psi { .. } => unreachable!(),
    }
    ctx.tables.push(table);
    Ok(())
}

fn run_solve(ctx: &mut Context) -> Result<()> {
    let grid = ctx.config.grid()?;
    let problem = ctx.problem(grid)?;
    let solution = solve_resolvent(&problem)?;
    let mut table = Table::new("solve", &["r", "re_u", "im_u", "re_du", "im_du"]);
    let du = solution.u.derivative().expect("solver returns derivatives");
    for (i, r) in grid.nodes().into_iter().enumerate() {
        let u = solution.u.values()[i];
        table.push(vec![num(r), num(u.re), num(u.im), num(du[i].re), num(du[i].im)]);
    }
    ctx.diag("residual", format!("{:.16e}", solution.residual));
    ctx.diag("backward_error", format!("{:.16e}", solution.backward_error));
    ctx.diag("boundary_leak", format!("{:.16e}", solution.boundary_leak));
    for w in &solution.warnings {
        ctx.diag("warning", w);
    }
    if matches!(ctx.config.rhs, Some(RhsConfig::Manufactured)) {
        let exact = manufactured_solution(grid);
        let w = grid.volume_weights();
        let err: f64 =
            compensated_sum(solution.u.values().iter().zip(exact.values()).zip(&w).map(|((a, b), wi)| wi * (a - b).norm_sqr()));
        let scale: f64 = compensated_sum(exact.values().iter().zip(&w).map(|(b, wi)| wi * b.norm_sqr()));
        ctx.diag("manufactured_error", format!("{:.16e}", (err / scale).sqrt()));
    }
    if !(solution.residual <= ctx.config.tolerances.residual) {
        ctx.fail(format!(
            "residual {:e} exceeds {:e}",
            solution.residual, ctx.config.tolerances.residual
        ));
    }
    ctx.tables.push(table);
    Ok(())
}

fn test_weight(config: TestWeightConfig, grid: &RadialGrid) -> TestWeight {
    match config {
        TestWeightConfig::One => TestWeight::One,
        TestWeightConfig::Ball { radius } => TestWeight::Ball(radius),
        TestWeightConfig::Gaussian { width } => {
            let w2 = width * width;
            let e = move |r: f64| (-r * r / w2).exp();
            TestWeight::smooth(
                grid,
                e,
                move |r| -2.0 * r / w2 * e(r),
                move |r| (4.0 * r * r / (w2 * w2) - 2.0 / w2) * e(r),
            )
        }
    }
}

fn run_identities(ctx: &mut Context) -> Result<()> {
    let section = ExperimentConfig::section(&ctx.config.identities, "identities")?.clone();
    if section.list.is_empty() {
        return Err(Error::config("identities.list", "must name at least one identity"));
    }
    if section.n_list.windows(2).any(|w| w[1] <= w[0]) || section.n_list.is_empty() {
        return Err(Error::config("identities.n_list", "must be a nonempty increasing list"));
    }
    let base = ctx.config.grid()?;
    let tol = ctx.config.tolerances;
    let multiplier = ctx.config.multiplier.clone();
    let mut table = Table::new("verify_identities", &["identity", "h", "lhs", "rhs", "residual", "order-estimate"]);
    let mut history: Vec<Vec<(f64, f64)>> = vec![Vec::new(); section.list.len()];
    for &n in &section.n_list {
        let grid = RadialGrid::new(base.dimension(), base.mode(), n, base.r_max())?;
        let problem = ctx.problem(grid)?;
        let solution = solve_resolvent(&problem)?;
        let weight = test_weight(section.weight, &grid);
        let profile = multiplier.as_ref().map(|m| build_profile(m, &grid)).transpose()?;
        for (k, &identity) in section.list.iter().enumerate() {
            let report = check_identity(identity, &solution, &problem, Some(&weight), profile.as_ref())?;
            let h = grid.spacing();
            let order = match history[k].last() {
                Some(&(h_prev, res_prev)) => (res_prev / report.residual).ln() / (h_prev / h).ln(),
                None => f64::NAN,
            };
            if let Some(&(h_prev, res_prev)) = history[k].last() {
                let needed = tol.refinement_ratio.powf((h_prev / h).log2());
                let converged = report.residual <= tol.identity_floor;
                if !converged && res_prev / report.residual < needed {
                    ctx.fail(format!(
                        "{identity}: residual ratio {:.3} below {needed:.3} at h = {h:e}",
                        res_prev / report.residual
                    ));
                }
            }
            history[k].push((h, report.residual));
            table.push(vec![text(identity.name()), num(h), num(report.lhs), num(report.rhs), num(report.residual), num(order)]);
        }
    }
    ctx.tables.push(table);
    Ok(())
}

fn run_sweep(ctx: &mut Context) -> Result<()> {
    let grid = ctx.config.grid()?;
    let potentials = ctx.config.potentials()?;
    let s = ExperimentConfig::section(&ctx.config.sweep, "sweep")?.clone();
    let data = ExperimentConfig::section(&ctx.config.data, "data")?.clone();
    let estimate = Estimate::parse(&s.estimate).ok_or_else(|| {
        let names: Vec<&str> = Estimate::ALL.iter().map(|e| e.name()).collect();
        Error::config("sweep.estimate", format!("unknown estimate `{}`; expected one of {names:?}", s.estimate))
    })?;
    let family = DataFamily::parse(&data.family).ok_or_else(|| {
        let names: Vec<&str> = DataFamily::ALL.iter().map(|e| e.name()).collect();
        Error::config("data.family", format!("unknown family `{}`; expected one of {names:?}", data.family))
    })?;
    let alpha = match (estimate, s.alpha) {
        (Estimate::WeightedSinpeque, None) => return Err(Error::config("sweep.alpha", "required by weighted_sinpeque")),
        (_, a) => a.unwrap_or(0.0),
    };
    for (i, p) in potentials.iter().enumerate() {
        if p.role == PotentialRole::NAttractive && !p.is_zero() && s.rho > 0.0 {
            let report = compute_beta_rho(p, s.rho, &grid)?;
            ctx.diag(format!("beta_rho[{i}]"), format!("{:.16e}", report.beta));
        }
    }
    if let Some(gamma) = ctx.config.checks.as_ref().and_then(|c| c.long_range_gamma) {
        let zero1 = PotentialSpec::zero(PotentialRole::V1LongRange);
        let zero2 = PotentialSpec::zero(PotentialRole::V2LongRange);
        let p1 = potentials.iter().find(|p| p.role == PotentialRole::V1LongRange).unwrap_or(&zero1);
        let p2 = potentials.iter().find(|p| p.role == PotentialRole::V2LongRange).unwrap_or(&zero2);
        let report = check_long_range(p1, p2, gamma, &grid, &[s.rho])?;
        ctx.diag(format!("B(tau0={})", s.rho), format!("{:.16e}", report.b_values[0].b));
    }
    let config = SweepConfig {
        grid,
        potentials,
        boundary: s.boundary.into(),
        sign: s.sign.into(),
        estimate,
        tau_list: s.tau_list.clone(),
        epsilon_list: s.epsilon_list.clone(),
        radius_list: s.radius_list.clone(),
        rho: s.rho,
        alpha,
        conventions: s.conventions.iter().map(|&c| c.into()).collect(),
        data: DataSpec {
            family,
            seed: data.seed,
            count: data.count,
            amplitude: data.amplitude,
        },
        leak_threshold: s.leak_threshold,
    };
    let report = supersmooth_sweep(&config)?;
    ctx.diag("kept_points", report.kept_points);
    ctx.diag("dropped_points", report.dropped_points);
    ctx.diag("leak_histogram", format!("{:?}", report.leak_histogram));
    let mut rows = Table::new("sweep", &["tau", "epsilon", "R", "estimate", "lhs_term", "ratio", "leak"]);
    for r in &report.rows {
        rows.push(vec![
            num(r.tau),
            num(r.epsilon),
            num(r.radius),
            text(r.estimate.clone()),
            text(r.lhs_term.clone()),
            num(r.ratio),
            num(r.leak),
        ]);
    }
    let mut aggregates = Table::new(
        "sweep_aggregates",
        &["estimate", "tau", "R", "lhs_term", "points", "spread", "slope", "max_ratio", "pass"],
    );
    let tol = ctx.config.tolerances;
    for a in &report.aggregates {
        let pass = a.spread <= tol.decade_spread && a.slope.abs() <= tol.decade_slope;
        aggregates.push(vec![
            text(a.estimate.clone()),
            num(a.tau),
            num(a.radius),
            text(a.lhs_term.clone()),
            Cell::Int(a.points as i64),
            num(a.spread),
            num(a.slope),
            num(a.max_ratio),
            flag(pass),
        ]);
        if s.assert_terms.contains(&a.lhs_term) && !pass {
            ctx.fail(format!(
                "{} {} at τ = {}, R = {}: spread {:.3}, slope {:.3}",
                a.estimate, a.lhs_term, a.tau, a.radius, a.spread, a.slope
            ));
        }
    }
    for term in &s.assert_terms {
        if !report.aggregates.iter().any(|a| &a.lhs_term == term) {
            return Err(Error::config("sweep.assert_terms", format!("`{term}` is not produced by {}", estimate.name())));
        }
    }
    ctx.tables.push(rows);
    ctx.tables.push(aggregates);
    Ok(())
}

fn run_evolve(ctx: &mut Context) -> Result<()> {
    let grid = ctx.config.grid()?;
    let potentials = ctx.config.potentials()?;
    let e = ExperimentConfig::section(&ctx.config.evolve, "evolve")?.clone();
    if e.radii.is_empty() {
        return Err(Error::config("evolve.radii", "must list at least one radius"));
    }
    let spectrum = diagonalize(&grid, &potentials, e.boundary.into())?;
    let u0 = build_rhs(&e.initial, grid, None, &ctx.base, "evolve.initial")?;
    let free = match e.derivative {
        DerivativeName::Half => Some(free_spectrum(&grid)?),
        DerivativeName::None => None,
    };
    let derivative = match &free {
        Some(f) => SmoothingDerivative::Half(f),
        None => SmoothingDerivative::None,
    };
    let mut table = Table::new("evolve", &["R", "value", "guard", "step", "steps", "retained_modes"]);
    let mut values = Vec::with_capacity(e.radii.len());
    for &radius in &e.radii {
        let weight = match e.weight {
            SmoothingWeightName::Ball => Weight::BallAverage(radius),
            SmoothingWeightName::PotentialBall => {
                let p = potentials
                    .first()
                    .ok_or_else(|| Error::config("evolve.weight", "potential_ball needs a potential"))?;
                potential_ball_weight(p, radius)
            }
        };
        let v = smoothing_functional(&spectrum, &u0, &weight, derivative, e.window, e.step, e.retention)?;
        table.push(vec![
            num(radius),
            num(v.value),
            num(v.guard),
            num(v.step),
            Cell::Int(v.steps as i64),
            Cell::Int(v.retained_modes as i64),
        ]);
        values.push(v.value);
    }
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let spread = if min > 0.0 { max / min } else if max == 0.0 { 1.0 } else { f64::INFINITY };
    ctx.diag("smoothing_spread", format!("{spread:.16e}"));
    if spread > ctx.config.tolerances.smoothing_spread {
        ctx.fail(format!(
            "smoothing functional varies by {spread:.3} across radii (limit {})",
            ctx.config.tolerances.smoothing_spread
        ));
    }
    ctx.tables.push(table);
    if let Some(probe) = &e.probe {
        let mut table = Table::new("evolve_probe", &["delta", "value", "value_over_delta", "modes", "radius"]);
        let mut first = None;
        for &delta in &probe.deltas {
            let p = low_energy_probe(&spectrum, delta, probe.alpha, &probe.radii)?;
            let scaled = p.value / delta;
            table.push(vec![num(delta), num(p.value), num(scaled), Cell::Int(p.modes as i64), num(p.radius)]);
            if p.empty {
                continue;
            }
            match first {
                None => first = Some(scaled),
                Some(f) if scaled > ctx.config.tolerances.probe_growth * f => {
                    ctx.fail(format!("probe value/δ grows to {scaled:e} at δ = {delta} (first {f:e})"));
                }
                Some(_) => {}
            }
        }
        ctx.tables.push(table);
    }
    Ok(())
}

fn run_spectrum(ctx: &mut Context) -> Result<()> {
    let grid = ctx.config.grid()?;
    let potentials = ctx.config.potentials()?;
    let s = *ExperimentConfig::section(&ctx.config.spectrum, "spectrum")?;
    let spectrum = diagonalize(&grid, &potentials, s.boundary.into())?;
    let eigenvalues = spectrum.eigenvalues();
    let count = s.count.unwrap_or(eigenvalues.len()).min(eigenvalues.len());
    let mut table = Table::new("spectrum", &["index", "re_lambda", "im_lambda"]);
    for (k, z) in eigenvalues.iter().take(count).enumerate() {
        table.push(vec![Cell::Int(k as i64), num(z.re), num(z.im)]);
    }
    let nearest = eigenvalues.iter().map(|z| z.norm()).fold(f64::INFINITY, f64::min);
    ctx.diag("modes", eigenvalues.len());
    ctx.diag("min_abs_eigenvalue", format!("{nearest:.16e}"));
    ctx.diag("h_squared", format!("{:.16e}", grid.spacing().powi(2)));
    if let Some(real) = spectrum.real_eigenvalues() {
        if real.windows(2).any(|w| w[1] < w[0]) {
            ctx.fail("real eigenvalues are not ascending");
        }
    } else if eigenvalues.iter().any(|z| z.im > 1e-12 * z.norm().max(1.0)) {
        ctx.fail("a damped eigenvalue has positive imaginary part");
    }
    ctx.tables.push(table);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
dimension = 3
[grid]
n = 200
rmax = 20.0
mode_l = 0
[[potential]]
kind = "zero"
role = "V_repulsive"
"#;

    #[test]
    fn minimal_config_parses_and_hashes_stably() {
        let a = ExperimentConfig::from_toml(MINIMAL).unwrap();
        let b = ExperimentConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(a.content_hash(), b.content_hash());
        assert_eq!(a.content_hash().len(), 64);
    }

    #[test]
    fn unknown_key_reports_its_path() {
        let text = MINIMAL.replace("mode_l = 0", "mode_l = 0\nspacing = 0.1");
        match ExperimentConfig::from_toml(&text) {
            Err(Error::Config { path, message }) => {
                assert_eq!(path, "grid.spacing");
                assert!(message.contains("spacing"), "{message}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn missing_physics_key_is_an_error() {
        let text = MINIMAL.replace("dimension = 3\n", "");
        assert!(matches!(ExperimentConfig::from_toml(&text), Err(Error::Config { .. })));
    }

    #[test]
    fn foreign_potential_parameter_is_rejected() {
        let text = format!("{MINIMAL}\n[[potential]]\nkind = \"inverse_power\"\nrole = \"V_repulsive\"\nparams = {{ c = 0.1, gamma = 2.0, mu = 1.0 }}\n");
        let config = ExperimentConfig::from_toml(&text).unwrap();
        match config.potentials() {
            Err(Error::Config { path, .. }) => assert_eq!(path, "potential[1].params.mu"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn custom_rhs_parsing_and_interpolation() {
        let samples = parse_custom_rhs("# r re im\n0.0 0 0\n1.0 2.0 -2.0\n\n2.0 0 0\n").unwrap();
        let mid = interpolate_samples(&samples, 0.5);
        assert!((mid - Complex64::new(1.0, -1.0)).norm() < 1e-15);
        assert_eq!(interpolate_samples(&samples, 3.0), Complex64::new(0.0, 0.0));
        assert!(parse_custom_rhs("1.0 2.0\n").is_err());
        assert!(parse_custom_rhs("1.0 0 0\n0.5 0 0\n").is_err());
    }

    #[test]
    fn csv_numbers_carry_seventeen_digits() {
        assert_eq!(Cell::Num(0.1).csv(), "1.0000000000000001e-1");
        assert_eq!(Cell::Num(1.0).csv(), "1.0000000000000000e0");
    }

    #[test]
    fn exit_codes_split_usage_from_assertions() {
        assert_eq!(exit_code(&Error::config("a", "b")), 1);
        assert_eq!(exit_code(&Error::AllContaminated { histogram: vec![] }), 2);
    }
}
