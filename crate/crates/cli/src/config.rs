//! TOML run configuration.
//!
//! One file drives one command. Every table rejects unknown keys, and
//! semantic errors are reported with the dotted key path of the offending
//! value.

use std::f64::consts::PI;
use std::fmt;
use std::path::{Path, PathBuf};

use gridsync::analysis::{EnergyKind, RoaKind};
use gridsync::dynamics::{IntegratorConfig, Representation, SimOptions};
use gridsync::pll::{Family, PhiFunction, PiecewiseLinear, PllConfig};
use gridsync::scenarios::{builtin_scenario, LabeledPll, Scenario};
use gridsync::signals::{DqVoltage, FrequencyProfile, GridModel, PhaseStep, RocofTable};
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CommandName {
    Simulate,
    Portrait,
    Roa,
    Bound,
    Scenario,
}

impl fmt::Display for CommandName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Simulate => "simulate",
            Self::Portrait => "portrait",
            Self::Roa => "roa",
            Self::Bound => "bound",
            Self::Scenario => "scenario",
        })
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Command this file is meant for; checked against the subcommand.
    pub command: Option<CommandName>,
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    pub grid: Option<GridSpec>,
    pub pll: Option<PllSpec>,
    pub integrator: Option<IntegratorSpec>,
    pub initial: Option<InitialSpec>,
    /// Energy written to the `energy` column; defaults to the matched W.
    pub energy: Option<EnergyKind>,
    pub portrait: Option<PortraitSpec>,
    pub roa: Option<RoaSpec>,
    pub bound: Option<BoundSpec>,
    pub scenario: Option<ScenarioSpec>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    /// Peak phase voltage.
    #[serde(default = "one")]
    pub amplitude: f64,
    #[serde(default)]
    pub phi0: f64,
    #[serde(default)]
    pub frequency: FrequencySpec,
    #[serde(default)]
    pub phase_steps: Vec<PhaseStep>,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            amplitude: 1.0,
            phi0: 0.0,
            frequency: FrequencySpec::default(),
            phase_steps: Vec::new(),
        }
    }
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FrequencySpec {
    Constant {
        omega0: f64,
    },
    DampedSinusoid {
        omega0: f64,
        amplitude: f64,
        decay: f64,
        rate: f64,
        onset: f64,
    },
    /// The 50 Hz low-inertia disturbance of the builtin scenario.
    LowInertiaDisturbance,
    TabulatedRocof {
        omega0: f64,
        period: f64,
        samples: Vec<f64>,
        eta_max: f64,
    },
}

impl Default for FrequencySpec {
    fn default() -> Self {
        Self::Constant { omega0: 100.0 * PI }
    }
}

impl GridSpec {
    pub fn build(&self, path: &str) -> Result<GridModel, CliError> {
        let profile = match &self.frequency {
            FrequencySpec::Constant { omega0 } => FrequencyProfile::Constant { omega0: *omega0 },
            FrequencySpec::DampedSinusoid {
                omega0,
                amplitude,
                decay,
                rate,
                onset,
            } => FrequencyProfile::DampedSinusoid {
                omega0: *omega0,
                amplitude: *amplitude,
                decay: *decay,
                rate: *rate,
                onset: *onset,
            },
            FrequencySpec::LowInertiaDisturbance => FrequencyProfile::low_inertia_disturbance(),
            FrequencySpec::TabulatedRocof {
                omega0,
                period,
                samples,
                eta_max,
            } => FrequencyProfile::TabulatedRocof(
                RocofTable::new(*omega0, *period, samples.clone(), *eta_max)
                    .map_err(|e| at(&format!("{path}.frequency"), e))?,
            ),
        };
        GridModel::new(self.amplitude, self.phi0, profile, self.phase_steps.clone()).map_err(|e| at(path, e))
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PhiSpec {
    Identity,
    ScaledIdentity {
        k: f64,
    },
    PiecewiseLinear {
        points: Vec<(f64, f64)>,
    },
    Saturation {
        slope: f64,
        limit: f64,
    },
    /// Slope 10 near the origin, slope 1 beyond `|s| = 0.1`.
    AdaptiveDefault,
}

impl PhiSpec {
    fn build(&self) -> gridsync::Result<PhiFunction> {
        let phi = match self {
            Self::Identity => PhiFunction::Identity,
            Self::ScaledIdentity { k } => PhiFunction::ScaledIdentity { k: *k },
            Self::PiecewiseLinear { points } => PhiFunction::PiecewiseLinear {
                points: PiecewiseLinear::new(points.clone())?,
            },
            Self::Saturation { slope, limit } => PhiFunction::Saturation {
                slope: *slope,
                limit: *limit,
            },
            Self::AdaptiveDefault => PhiFunction::adaptive_default(),
        };
        phi.validate()?;
        Ok(phi)
    }
}

/// Estimator parameters.
///
/// Without `phi`, `k_p` and `k_i` are the conventional loop gains. With
/// `phi`, the generalized law `u = -k_p phi(y) + omega_hat`,
/// `d/dt omega_hat = -k_i y` is used verbatim.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PllSpec {
    pub label: Option<String>,
    pub family: Family,
    pub k_p: f64,
    pub k_i: f64,
    pub phi: Option<PhiSpec>,
    /// Set-point `[d, q]`; must lie on the circle of radius `gamma * amplitude`.
    pub reference: Option<[f64; 2]>,
}

impl PllSpec {
    pub fn build(&self, gamma_v: f64, path: &str) -> Result<PllConfig, CliError> {
        let phi = self
            .phi
            .as_ref()
            .map(|p| p.build().map_err(|e| at(&format!("{path}.phi"), e)))
            .transpose()?;
        let mut cfg = match (self.family, phi) {
            (Family::Srf, None) => PllConfig::srf(self.k_p, self.k_i, gamma_v),
            (Family::Atan, None) => PllConfig::atan(self.k_p, self.k_i, gamma_v),
            (Family::Srf, Some(phi)) => PllConfig::gsrf(self.k_p, self.k_i, phi, gamma_v),
            (Family::Atan, Some(phi)) => PllConfig::gatan(self.k_p, self.k_i, phi, gamma_v),
        }
        .map_err(|e| at(path, e))?;
        if let Some([d, q]) = self.reference {
            cfg.reference = DqVoltage::new(d, q);
        }
        cfg.validate_for(gamma_v).map_err(|e| at(path, e))?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSpec {
    pub dt: f64,
    pub t_end: f64,
    #[serde(default = "one_usize")]
    pub record_stride: usize,
    #[serde(default = "dq")]
    pub representation: Representation,
    #[serde(default = "yes")]
    pub renormalize: bool,
}

fn one_usize() -> usize {
    1
}

fn dq() -> Representation {
    Representation::Dq
}

fn yes() -> bool {
    true
}

impl IntegratorSpec {
    pub fn build(&self, ov: &Overrides, path: &str) -> Result<IntegratorConfig, CliError> {
        let mut icfg = IntegratorConfig::new(self.dt, self.t_end).with_stride(self.record_stride);
        ov.apply(&mut icfg);
        icfg.validate().map_err(|e| at(path, e))?;
        Ok(icfg)
    }

    pub fn options(&self) -> SimOptions {
        SimOptions {
            renormalize: self.renormalize,
            extra_energies: Vec::new(),
        }
    }
}

/// Initial error. `omega_hat` is absolute; `omega_err` is relative to the
/// grid frequency at t = 0. At most one of them may be given.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSpec {
    #[serde(default)]
    pub delta: f64,
    pub omega_hat: Option<f64>,
    pub omega_err: Option<f64>,
}

impl InitialSpec {
    pub fn omega_hat(&self, omega0: f64, path: &str) -> Result<f64, CliError> {
        match (self.omega_hat, self.omega_err) {
            (Some(_), Some(_)) => Err(CliError::config(path, "give either omega_hat or omega_err, not both")),
            (Some(w), None) => Ok(w),
            (None, e) => Ok(omega0 + e.unwrap_or(0.0)),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PortraitSpec {
    /// `[min, max]` of the initial angle error.
    pub delta: [f64; 2],
    /// `[min, max]` of `omega_hat - omega` at t = 0.
    pub omega_err: [f64; 2],
    pub n_delta: usize,
    pub n_omega: usize,
    #[serde(default = "yes")]
    pub write_trajectories: bool,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoaSpec {
    #[serde(default)]
    pub h: i64,
    pub kind: RoaKind,
    /// Monte-Carlo samples; 0 skips validation.
    #[serde(default)]
    pub n: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundSpec {
    pub k_p: f64,
    pub k_i: f64,
    /// Bound on `|d omega / dt|`; defaults to that of the scenario's source.
    pub eta_max: Option<f64>,
    /// Builtin scenario used by `--empirical`.
    #[serde(default = "low_inertia")]
    pub scenario: String,
}

fn low_inertia() -> String {
    gridsync::scenarios::LOW_INERTIA_DISTURBANCE.to_string()
}

impl Default for BoundSpec {
    fn default() -> Self {
        Self {
            k_p: 200.0,
            k_i: 1000.0,
            eta_max: None,
            scenario: low_inertia(),
        }
    }
}

/// A builtin scenario with optional replacements.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub name: String,
    /// Phase-step magnitudes, one per builtin step.
    pub jumps: Option<Vec<f64>>,
    pub grid: Option<GridSpec>,
    pub plls: Option<Vec<PllSpec>>,
    pub integrator: Option<IntegratorSpec>,
    pub initial: Option<InitialSpec>,
}

impl ScenarioSpec {
    pub fn named(name: &str) -> Self {
        Self {
            name: name.to_string(),
            jumps: None,
            grid: None,
            plls: None,
            integrator: None,
            initial: None,
        }
    }

    pub fn build(&self, ov: &Overrides) -> Result<Scenario, CliError> {
        let mut s = builtin_scenario(&self.name).map_err(CliError::Core)?;
        if let Some(grid) = &self.grid {
            s.grid = grid.build("scenario.grid")?;
        }
        if let Some(jumps) = &self.jumps {
            s = s.with_jumps(jumps).map_err(|e| at("scenario", e))?;
        }
        if let Some(plls) = &self.plls {
            let gamma_v = s.grid.gamma_v();
            s.plls = plls
                .iter()
                .enumerate()
                .map(|(i, p)| {
                    let path = format!("scenario.plls[{i}]");
                    let label = p
                        .label
                        .clone()
                        .ok_or_else(|| CliError::config(&format!("{path}.label"), "required inside a scenario"))?;
                    Ok(LabeledPll {
                        label,
                        config: p.build(gamma_v, &path)?,
                    })
                })
                .collect::<Result<_, CliError>>()?;
        }
        if let Some(ispec) = &self.integrator {
            s.integrator = ispec.build(ov, "scenario.integrator")?;
            s.representation = ispec.representation;
        } else {
            ov.apply(&mut s.integrator);
            s.integrator.validate().map_err(|e| at("scenario.integrator", e))?;
        }
        if let Some(init) = &self.initial {
            let w0 = s.grid.frequency(0.0).0;
            s.initial_error = (init.delta, init.omega_hat(w0, "scenario.initial")? - w0);
        }
        s.validate().map_err(|e| at("scenario", e))?;
        Ok(s)
    }
}

/// Command-line overrides applied on top of a file.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub dt: Option<f64>,
    pub t_end: Option<f64>,
}

impl Overrides {
    pub fn apply(&self, icfg: &mut IntegratorConfig) {
        if let Some(dt) = self.dt {
            icfg.dt = dt;
        }
        if let Some(t) = self.t_end {
            icfg.t_end = t;
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let de = toml::Deserializer::new(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            CliError::Config(if path == "." {
                inner.to_string().trim_end().to_string()
            } else {
                format!("at `{path}`: {}", inner.to_string().trim_end())
            })
        })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Fails when the file names a different command.
    pub fn expect_command(&self, cmd: CommandName) -> Result<(), CliError> {
        match self.command {
            Some(c) if c != cmd => Err(CliError::config("command", &format!("file is for `{c}`, not `{cmd}`"))),
            _ => Ok(()),
        }
    }

    pub fn grid(&self) -> Result<GridModel, CliError> {
        self.grid.clone().unwrap_or_default().build("grid")
    }

    pub fn pll(&self, gamma_v: f64) -> Result<PllConfig, CliError> {
        self.pll
            .as_ref()
            .ok_or_else(|| CliError::config("pll", "missing table [pll]"))?
            .build(gamma_v, "pll")
    }

    pub fn integrator(&self, ov: &Overrides) -> Result<(IntegratorConfig, &IntegratorSpec), CliError> {
        let spec = self
            .integrator
            .as_ref()
            .ok_or_else(|| CliError::config("integrator", "missing table [integrator]"))?;
        Ok((spec.build(ov, "integrator")?, spec))
    }

    pub fn energy(&self) -> Result<Option<EnergyKind>, CliError> {
        if let Some(k) = self.energy {
            k.validate().map_err(|e| at("energy", e))?;
        }
        Ok(self.energy)
    }
}

/// Prefixes the field of a parameter error with a key path.
pub fn at(path: &str, e: gridsync::Error) -> CliError {
    match e {
        gridsync::Error::InvalidParameter { field, reason } => CliError::config(&format!("{path}.{field}"), &reason),
        other => CliError::Core(other),
    }
}
