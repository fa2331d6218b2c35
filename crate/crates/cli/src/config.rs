//! Typed TOML configuration with per-preset defaults.
//!
//! Every optional numeric field is filled in by [`ExperimentConfig::validate`],
//! so the echoed configuration in a run manifest reloads to an identical value.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use nls_core::formal::{build_exponent_set, exponent_value, parse_exponent, reject_positive_beta, Exponent, Mu};
use nls_core::grid::MeshSpec;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    PlaneWave,
    Soliton,
    PowerLaw,
    Zero,
    Custom,
}

impl Preset {
    /// Presets whose background `f` is built from a formal series.
    pub fn has_profile(self) -> bool {
        matches!(self, Preset::PlaneWave | Preset::PowerLaw | Preset::Custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Solve,
    Converge,
    Uniqueness,
    Independence,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Solve => "solve",
            Mode::Converge => "converge",
            Mode::Uniqueness => "uniqueness",
            Mode::Independence => "independence",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "solve" => Ok(Mode::Solve),
            "converge" => Ok(Mode::Converge),
            "uniqueness" => Ok(Mode::Uniqueness),
            "independence" => Ok(Mode::Independence),
            other => Err(format!(
                "unknown mode `{other}` (expected solve, converge, uniqueness or independence)"
            )),
        }
    }
}

/// An exponent written either as a TOML number or as text (`"-3/2"`, `"-0.5"`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ExponentText {
    Int(i64),
    Float(f64),
    Text(String),
}

impl ExponentText {
    pub fn parse(&self) -> nls_core::Result<Exponent> {
        match self {
            ExponentText::Int(n) => Ok(Exponent::from_integer(*n)),
            ExponentText::Float(v) => parse_exponent(&format!("{v}")),
            ExponentText::Text(s) => parse_exponent(s),
        }
    }
}

impl From<i64> for ExponentText {
    fn from(n: i64) -> Self {
        ExponentText::Int(n)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Coefficient {
    pub exponent: ExponentText,
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

impl Coefficient {
    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    /// `+1` focusing, `-1` defocusing.
    pub mu: i64,
    pub preset: Preset,
    /// Plane-wave amplitude.
    #[serde(default = "one")]
    pub amplitude: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshConfig {
    pub h: Option<f64>,
    pub k: Option<f64>,
    pub half_width: Option<f64>,
    pub horizon: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FormalConfig {
    /// Leading exponent; shorthand for a single generator.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta0: Option<ExponentText>,
    /// `A0`, strictly decreasing.
    #[serde(default)]
    pub generators: Vec<ExponentText>,
    /// Lattice depth `M`: exponents `>= -M` are kept.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub floor: Option<ExponentText>,
    /// Highest retained index; all of the lattice when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub truncation: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ode_step: Option<f64>,
    #[serde(default)]
    pub plus: Vec<Coefficient>,
    #[serde(default)]
    pub minus: Vec<Coefficient>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case", deny_unknown_fields)]
pub enum RadiiConfig {
    Damped,
    Geometric { base: f64, ratio: f64 },
    Explicit { values: Vec<f64> },
}

impl RadiiConfig {
    pub fn rule(&self) -> nls_core::profile::RadiiRule {
        use nls_core::profile::RadiiRule;
        match self {
            RadiiConfig::Damped => RadiiRule::Damped,
            RadiiConfig::Geometric { base, ratio } => RadiiRule::Geometric {
                base: *base,
                ratio: *ratio,
            },
            RadiiConfig::Explicit { values } => RadiiRule::Explicit(values.clone()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZeroModeConfig {
    Blend,
    Cutoff,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileConfig {
    #[serde(default = "damped")]
    pub radii: RadiiConfig,
    #[serde(default = "blend")]
    pub zero_mode: ZeroModeConfig,
    #[serde(default = "one")]
    pub cutoff_sharpness: f64,
}

impl Default for ProfileConfig {
    fn default() -> Self {
        Self {
            radii: damped(),
            zero_mode: blend(),
            cutoff_sharpness: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeConfig {
    #[serde(default = "default_blow_up")]
    pub blow_up_factor: f64,
    #[serde(default = "default_solve_tol")]
    pub solve_tol: f64,
    #[serde(default = "default_k_ceiling")]
    pub k_ceiling: f64,
    #[serde(default = "yes")]
    pub monitor_coercivity: bool,
    /// `(N, n)` pairs for `||<x>^N D+^n u||` in the norm ledger.
    #[serde(default = "default_norm_pairs")]
    pub norm_pairs: Vec<[u32; 2]>,
}

impl Default for SchemeConfig {
    fn default() -> Self {
        Self {
            blow_up_factor: default_blow_up(),
            solve_tol: default_solve_tol(),
            k_ceiling: default_k_ceiling(),
            monitor_coercivity: true,
            norm_pairs: default_norm_pairs(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InterpConfig {
    /// Omitted: sum over every grid node.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window_x: Option<usize>,
    /// Omitted: sum over every stored time level.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window_t: Option<usize>,
    #[serde(default = "one")]
    pub time_cutoff_sharpness: f64,
}

impl Default for InterpConfig {
    fn default() -> Self {
        Self {
            window_x: None,
            window_t: None,
            time_cutoff_sharpness: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    /// Spatial window `|x| <= window` for errors and residuals.
    #[serde(default = "default_verify_window")]
    pub window: f64,
    #[serde(default = "default_residual_nx")]
    pub residual_nx: usize,
    #[serde(default = "default_residual_nt")]
    pub residual_nt: usize,
    /// Required bound on `sup ||u_j||_{S_h}` when the profile is exact.
    #[serde(default = "default_correction_tol")]
    pub correction_tol: f64,
    /// Refinement ladder `(h, k)` for converge mode.
    #[serde(default)]
    pub ladder: Vec<[f64; 2]>,
    #[serde(default = "default_k_band")]
    pub k_band: [f64; 2],
    #[serde(default = "default_h_band")]
    pub h_band: [f64; 2],
    /// Amplitude of the Gaussian perturbation in uniqueness mode.
    #[serde(default = "default_perturbation")]
    pub perturbation: f64,
    #[serde(default = "default_envelope_tol")]
    pub envelope_tol: f64,
    /// Second cutoff family for independence mode.
    #[serde(default = "default_alt_radii")]
    pub alt_radii: RadiiConfig,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            window: default_verify_window(),
            residual_nx: default_residual_nx(),
            residual_nt: default_residual_nt(),
            correction_tol: default_correction_tol(),
            ladder: Vec::new(),
            k_band: default_k_band(),
            h_band: default_h_band(),
            perturbation: default_perturbation(),
            envelope_tol: default_envelope_tol(),
            alt_radii: default_alt_radii(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    /// Levels between field snapshots; about ten snapshots when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub snapshot_stride: Option<usize>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: default_dir(),
            snapshot_stride: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemConfig,
    #[serde(default)]
    pub mesh: MeshConfig,
    #[serde(default)]
    pub formal: FormalConfig,
    #[serde(default)]
    pub profile: ProfileConfig,
    #[serde(default)]
    pub scheme: SchemeConfig,
    #[serde(default)]
    pub interp: InterpConfig,
    #[serde(default)]
    pub verify: VerifyConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

fn one() -> f64 {
    1.0
}
fn yes() -> bool {
    true
}
fn damped() -> RadiiConfig {
    RadiiConfig::Damped
}
fn blend() -> ZeroModeConfig {
    ZeroModeConfig::Blend
}
fn default_blow_up() -> f64 {
    1e3
}
fn default_solve_tol() -> f64 {
    1e-12
}
fn default_k_ceiling() -> f64 {
    0.1
}
fn default_norm_pairs() -> Vec<[u32; 2]> {
    vec![[3, 0], [3, 3]]
}
fn default_verify_window() -> f64 {
    5.0
}
fn default_residual_nx() -> usize {
    21
}
fn default_residual_nt() -> usize {
    11
}
fn default_correction_tol() -> f64 {
    1e-8
}
fn default_k_band() -> [f64; 2] {
    [1.7, 2.3]
}
fn default_h_band() -> [f64; 2] {
    [3.4, 4.6]
}
fn default_perturbation() -> f64 {
    1e-6
}
fn default_envelope_tol() -> f64 {
    0.05
}
fn default_alt_radii() -> RadiiConfig {
    RadiiConfig::Geometric {
        base: 2.0,
        ratio: 2.0,
    }
}
fn default_dir() -> PathBuf {
    PathBuf::from("runs/latest")
}

/// `(h, k, L, T)` pinned by each preset.
fn preset_mesh(p: Preset) -> [f64; 4] {
    match p {
        Preset::PlaneWave => [0.05, 1e-4, 10.0, 1.0],
        Preset::Soliton => [0.0125, 1e-3, 20.0, 0.1],
        Preset::PowerLaw => [0.05, 0.01, 20.0, 1.0],
        Preset::Zero => [0.1, 0.01, 10.0, 1.0],
        Preset::Custom => [0.05, 0.01, 20.0, 1.0],
    }
}

fn invalid(field: &str, message: impl Into<String>) -> CliError {
    CliError::Invalid {
        field: field.to_string(),
        message: message.into(),
    }
}

fn field_error(field: &str, source: nls_core::Error) -> CliError {
    CliError::Field {
        field: field.to_string(),
        source,
    }
}

fn positive(field: &str, v: f64) -> Result<(), CliError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(invalid(field, format!("must be positive and finite, got {v}")))
    }
}

impl ExperimentConfig {
    pub fn mu(&self) -> Mu {
        // Validated to be +-1.
        Mu::from_sign(self.problem.mu).unwrap_or(Mu::Focusing)
    }

    pub fn mesh_spec(&self) -> nls_core::Result<MeshSpec> {
        let m = &self.mesh;
        MeshSpec::new(
            m.h.unwrap_or(f64::NAN),
            m.k.unwrap_or(f64::NAN),
            m.half_width.unwrap_or(f64::NAN),
            m.horizon.unwrap_or(f64::NAN),
        )
    }

    pub fn generators(&self) -> nls_core::Result<Vec<Exponent>> {
        self.formal.generators.iter().map(ExponentText::parse).collect()
    }

    pub fn floor(&self) -> nls_core::Result<Exponent> {
        match &self.formal.floor {
            Some(f) => f.parse(),
            None => Ok(Exponent::from_integer(0)),
        }
    }

    /// Fills preset defaults and checks every field; idempotent.
    pub fn validate(mut self) -> Result<Self, CliError> {
        let preset = self.problem.preset;
        if Mu::from_sign(self.problem.mu).is_none() {
            return Err(invalid("problem.mu", format!("must be +1 or -1, got {}", self.problem.mu)));
        }
        if preset == Preset::Soliton && self.problem.mu != 1 {
            return Err(invalid("problem.mu", "the soliton preset is focusing (mu = 1)"));
        }
        if !self.problem.amplitude.is_finite() {
            return Err(invalid("problem.amplitude", "must be finite"));
        }

        // Exponents first: a positive exponent stops everything else.
        if let Some(b) = &self.formal.beta0 {
            let e = b.parse().map_err(|e| field_error("formal.beta0", e))?;
            reject_positive_beta(exponent_value(&e)).map_err(|e| field_error("formal.beta0", e))?;
        }
        for (i, g) in self.formal.generators.iter().enumerate() {
            let field = format!("formal.generators[{i}]");
            let e = g.parse().map_err(|e| field_error(&field, e))?;
            reject_positive_beta(exponent_value(&e)).map_err(|e| field_error(&field, e))?;
        }
        for (side, list) in [("plus", &self.formal.plus), ("minus", &self.formal.minus)] {
            for (i, c) in list.iter().enumerate() {
                let field = format!("formal.{side}[{i}].exponent");
                let e = c.exponent.parse().map_err(|e| field_error(&field, e))?;
                reject_positive_beta(exponent_value(&e)).map_err(|e| field_error(&field, e))?;
                if !(c.re.is_finite() && c.im.is_finite()) {
                    return Err(invalid(&format!("formal.{side}[{i}]"), "coefficient must be finite"));
                }
            }
        }

        self.fill_formal_defaults()?;

        let [h, k, l, t] = preset_mesh(preset);
        let m = &mut self.mesh;
        m.h.get_or_insert(h);
        m.k.get_or_insert(k);
        m.half_width.get_or_insert(l);
        m.horizon.get_or_insert(t);
        for (name, v) in [
            ("mesh.h", m.h),
            ("mesh.k", m.k),
            ("mesh.half_width", m.half_width),
            ("mesh.horizon", m.horizon),
        ] {
            positive(name, v.unwrap_or(f64::NAN))?;
        }
        let spec = self.mesh_spec().map_err(|e| field_error("mesh", e))?;
        if spec.k > self.scheme.k_ceiling {
            return Err(invalid(
                "mesh.k",
                format!("exceeds scheme.k_ceiling = {}", self.scheme.k_ceiling),
            ));
        }
        if let Some(dt) = self.formal.ode_step {
            positive("formal.ode_step", dt)?;
            if dt > spec.horizon {
                return Err(invalid("formal.ode_step", "must not exceed the horizon"));
            }
        }

        positive("profile.cutoff_sharpness", self.profile.cutoff_sharpness)?;
        check_radii("profile.radii", &self.profile.radii)?;
        check_radii("verify.alt_radii", &self.verify.alt_radii)?;

        let s = &self.scheme;
        positive("scheme.blow_up_factor", s.blow_up_factor)?;
        positive("scheme.solve_tol", s.solve_tol)?;
        positive("scheme.k_ceiling", s.k_ceiling)?;

        let ip = &self.interp;
        if ip.window_x == Some(0) {
            return Err(invalid("interp.window_x", "sinc windows must be positive"));
        }
        if ip.window_t == Some(0) {
            return Err(invalid("interp.window_t", "sinc windows must be positive"));
        }
        positive("interp.time_cutoff_sharpness", ip.time_cutoff_sharpness)?;

        if self.verify.ladder.is_empty() {
            self.verify.ladder = match preset {
                Preset::Soliton => vec![[0.0125, 4e-3], [0.0125, 2e-3], [0.0125, 1e-3], [0.0125, 5e-4]],
                _ => vec![[0.1, 0.01], [0.05, 0.005]],
            };
        }
        let v = &self.verify;
        positive("verify.window", v.window)?;
        positive("verify.correction_tol", v.correction_tol)?;
        positive("verify.perturbation", v.perturbation)?;
        positive("verify.envelope_tol", v.envelope_tol)?;
        for (name, band) in [("verify.k_band", v.k_band), ("verify.h_band", v.h_band)] {
            positive(name, band[0])?;
            if !(band[1] > band[0]) {
                return Err(invalid(name, "upper end must exceed lower end"));
            }
        }
        if v.residual_nx == 0 || v.residual_nt == 0 {
            return Err(invalid("verify.residual_nx", "lattice sizes must be positive"));
        }
        for (i, [h, k]) in v.ladder.iter().enumerate() {
            let field = format!("verify.ladder[{i}]");
            MeshSpec::new(*h, *k, spec.half_width, spec.horizon).map_err(|e| field_error(&field, e))?;
        }
        if self.output.snapshot_stride == Some(0) {
            return Err(invalid("output.snapshot_stride", "must be at least 1"));
        }
        Ok(self)
    }

    fn fill_formal_defaults(&mut self) -> Result<(), CliError> {
        let preset = self.problem.preset;
        let f = &mut self.formal;
        match preset {
            Preset::PlaneWave | Preset::PowerLaw => {
                let (lead, floor) = if preset == Preset::PlaneWave { (0, 2) } else { (-1, 22) };
                if f.generators.is_empty() {
                    f.generators = vec![lead.into()];
                }
                f.floor.get_or_insert(floor.into());
                if preset == Preset::PlaneWave {
                    f.truncation.get_or_insert(0);
                }
                let amp = if preset == Preset::PlaneWave { self.problem.amplitude } else { 1.0 };
                for list in [&mut f.plus, &mut f.minus] {
                    if list.is_empty() {
                        list.push(Coefficient {
                            exponent: lead.into(),
                            re: amp,
                            im: 0.0,
                        });
                    }
                }
            }
            Preset::Custom => {
                if f.generators.is_empty() {
                    match &f.beta0 {
                        Some(b) => f.generators = vec![b.clone()],
                        None => {
                            return Err(invalid(
                                "formal.generators",
                                "the custom preset needs generators or beta0",
                            ))
                        }
                    }
                }
                if f.floor.is_none() {
                    return Err(invalid("formal.floor", "the custom preset needs a lattice floor"));
                }
                if f.plus.is_empty() && f.minus.is_empty() {
                    return Err(invalid("formal.plus", "the custom preset needs coefficients"));
                }
            }
            Preset::Soliton | Preset::Zero => {
                if !f.generators.is_empty() || f.beta0.is_some() || !f.plus.is_empty() || !f.minus.is_empty() {
                    return Err(invalid(
                        "formal",
                        "series data is only used by the plane_wave, power_law and custom presets",
                    ));
                }
                return Ok(());
            }
        }
        let gens = self.generators().map_err(|e| field_error("formal.generators", e))?;
        if let Some(b) = &self.formal.beta0 {
            let b = b.parse().map_err(|e| field_error("formal.beta0", e))?;
            if gens.first() != Some(&b) {
                return Err(invalid("formal.beta0", "must equal the first generator"));
            }
        }
        let floor = self.floor().map_err(|e| field_error("formal.floor", e))?;
        let set = build_exponent_set(&gens, floor).map_err(|e| field_error("formal.generators", e))?;
        if let Some(n) = self.formal.truncation {
            if n >= set.len() {
                return Err(invalid(
                    "formal.truncation",
                    format!("lattice has {} exponents, truncation {n} is out of range", set.len()),
                ));
            }
        }
        for (side, list) in [("plus", &self.formal.plus), ("minus", &self.formal.minus)] {
            for (i, c) in list.iter().enumerate() {
                let e = c.exponent.parse().map_err(|e| field_error("formal", e))?;
                if !gens.contains(&e) {
                    return Err(invalid(
                        &format!("formal.{side}[{i}].exponent"),
                        format!("{e} is not a generator"),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

fn check_radii(field: &str, r: &RadiiConfig) -> Result<(), CliError> {
    match r {
        RadiiConfig::Damped => Ok(()),
        RadiiConfig::Geometric { base, ratio } => {
            if !(*base >= 1.0 && *ratio >= 1.0 && base.is_finite() && ratio.is_finite()) {
                return Err(invalid(field, "geometric radii need base >= 1 and ratio >= 1"));
            }
            Ok(())
        }
        RadiiConfig::Explicit { values } => {
            if values.first().is_some_and(|r| *r < 1.0) || values.windows(2).any(|w| w[1] < w[0]) {
                return Err(invalid(field, "radii must be nondecreasing with the first >= 1"));
            }
            Ok(())
        }
    }
}

/// Parses and validates configuration text; `origin` labels errors.
pub fn parse_config(text: &str, origin: &str) -> Result<ExperimentConfig, CliError> {
    let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| CliError::Parse {
        origin: origin.to_string(),
        message: e.to_string(),
    })?;
    cfg.validate()
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig, CliError> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config(&text, &path.display().to_string())
}
