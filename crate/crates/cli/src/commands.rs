use std::f64::consts::PI;
use std::path::Path;

use gridsync::analysis::{
    default_validation_integrator, roa_validate_with, ultimate_bound, BoundVariant, EnergyKind, RoaEstimate,
    RoaValidation, UltimateBound,
};
use gridsync::dynamics::{simulate_with, InitialError, Trajectory};
use gridsync::pll::{Family, PllConfig};
use gridsync::scenarios::{builtin_scenario, run_scenario, ScenarioReport};
use log::info;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{at, Overrides, RunConfig, ScenarioSpec};
use crate::output::{ensure_dir, label_file, write_json, write_trajectory_csv};
use crate::CliError;

/// Default seed when neither the file nor the command line sets one.
pub const DEFAULT_SEED: u64 = 0;

fn energy_column(tr: &Trajectory, kind: Option<EnergyKind>) -> Result<&[f64], CliError> {
    match kind {
        Some(k) => tr.energy(k),
        None => tr.matched_energy(),
    }
    .ok_or_else(|| CliError::config("energy", "not recorded for this run"))
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulateSummary {
    pub rows: usize,
    pub aligned_samples: usize,
    pub renormalizations: usize,
    pub final_delta: f64,
    pub final_omega_hat: f64,
}

pub fn simulate(cfg: &RunConfig, ov: &Overrides, out: &Path) -> Result<SimulateSummary, CliError> {
    let grid = cfg.grid()?;
    let pll = cfg.pll(grid.gamma_v())?;
    let (icfg, ispec) = cfg.integrator(ov)?;
    let init = cfg.initial.clone().unwrap_or_default();
    let omega_hat = init.omega_hat(grid.frequency(0.0).0, "initial")?;
    let energy = cfg.energy()?;
    let mut opts = ispec.options();
    opts.extra_energies.extend(energy);
    let x0 = InitialError::new(init.delta, omega_hat).to_state(&grid);
    let tr = simulate_with(&grid, &pll, ispec.representation, &icfg, x0, &opts)?;
    ensure_dir(out)?;
    write_trajectory_csv(&out.join("trajectory.csv"), &tr, energy_column(&tr, energy)?)?;
    let last = tr.len() - 1;
    let summary = SimulateSummary {
        rows: tr.len(),
        aligned_samples: tr.aligned_samples,
        renormalizations: tr.renormalizations,
        final_delta: tr.delta[last],
        final_omega_hat: tr.omega_hat[last],
    };
    write_json(&out.join("summary.json"), &summary)?;
    Ok(summary)
}

/// Where a portrait trajectory ended.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Limit {
    /// Index `h` of the equilibrium `(h pi, omega)`.
    Equilibrium(i64),
    /// `"saddle"`, `"unconverged"` or `"diverged"`.
    Other(&'static str),
}

#[derive(Debug, Clone, Serialize)]
pub struct PortraitPoint {
    pub index: usize,
    pub delta0: f64,
    pub omega_err0: f64,
    pub limit: Limit,
    pub final_delta: Option<f64>,
    pub final_omega_err: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PortraitSummary {
    pub family: Family,
    pub points: Vec<PortraitPoint>,
}

/// Classifies the end of a trajectory against the equilibria `(h pi, omega)`.
pub fn limit_of(delta: f64, omega_err: f64) -> Limit {
    let h = (delta / PI).round();
    if (delta - h * PI).abs() < 1e-3 && omega_err.abs() < 1e-2 {
        if h as i64 % 2 == 0 {
            Limit::Equilibrium(h as i64)
        } else {
            Limit::Other("saddle")
        }
    } else {
        Limit::Other("unconverged")
    }
}

fn linspace(r: [f64; 2], n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![r[0]],
        _ => (0..n)
            .map(|i| r[0] + (r[1] - r[0]) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

pub fn portrait(cfg: &RunConfig, ov: &Overrides, out: &Path) -> Result<PortraitSummary, CliError> {
    let spec = cfg
        .portrait
        .as_ref()
        .ok_or_else(|| CliError::config("portrait", "missing table [portrait]"))?;
    if spec.n_delta == 0 || spec.n_omega == 0 {
        return Err(CliError::config("portrait", "n_delta and n_omega must be at least 1"));
    }
    let grid = cfg.grid()?;
    let pll = cfg.pll(grid.gamma_v())?;
    let (icfg, ispec) = cfg.integrator(ov)?;
    let energy = cfg.energy()?;
    let mut opts = ispec.options();
    opts.extra_energies.extend(energy);
    let w0 = grid.frequency(0.0).0;
    let ics: Vec<(f64, f64)> = linspace(spec.omega_err, spec.n_omega)
        .into_iter()
        .flat_map(|w| linspace(spec.delta, spec.n_delta).into_iter().map(move |d| (d, w)))
        .collect();
    info!("portrait: {} initial conditions", ics.len());
    ensure_dir(out)?;
    let runs: Vec<_> = ics
        .par_iter()
        .map(|&(d, w)| {
            simulate_with(
                &grid,
                &pll,
                ispec.representation,
                &icfg,
                InitialError::new(d, w0 + w).to_state(&grid),
                &opts,
            )
        })
        .collect();
    let mut points = Vec::with_capacity(ics.len());
    for (index, (&(delta0, omega_err0), run)) in ics.iter().zip(runs).enumerate() {
        let point = match run {
            Ok(tr) => {
                if spec.write_trajectories {
                    let path = out.join(format!("portrait_{index:04}.csv"));
                    write_trajectory_csv(&path, &tr, energy_column(&tr, energy)?)?;
                }
                let last = tr.len() - 1;
                let err = tr.omega_hat[last] - tr.omega[last];
                PortraitPoint {
                    index,
                    delta0,
                    omega_err0,
                    limit: limit_of(tr.delta[last], err),
                    final_delta: Some(tr.delta[last]),
                    final_omega_err: Some(err),
                }
            }
            Err(e) if is_divergence(&e) => PortraitPoint {
                index,
                delta0,
                omega_err0,
                limit: Limit::Other("diverged"),
                final_delta: None,
                final_omega_err: None,
            },
            Err(e) => return Err(e.into()),
        };
        points.push(point);
    }
    let summary = PortraitSummary {
        family: pll.family,
        points,
    };
    write_json(&out.join("portrait.json"), &summary)?;
    Ok(summary)
}

fn is_divergence(e: &gridsync::Error) -> bool {
    matches!(
        e.root(),
        gridsync::Error::Diverged { .. } | gridsync::Error::IllDefinedAngle
    )
}

#[derive(Debug, Clone, Serialize)]
pub struct RoaReport {
    pub estimate: RoaEstimate,
    pub bounding_box: ([f64; 2], [f64; 2]),
    pub omega_extent: f64,
    pub seed: u64,
    /// Absent when `n = 0`.
    pub validation: Option<RoaValidation>,
}

pub fn roa(cfg: &RunConfig, ov: &Overrides, out: &Path) -> Result<RoaReport, CliError> {
    let spec = cfg
        .roa
        .as_ref()
        .ok_or_else(|| CliError::config("roa", "missing table [roa]"))?;
    let grid = cfg.grid()?;
    let gamma_v = grid.gamma_v();
    let pll = cfg.pll(gamma_v)?;
    let omega = grid.frequency(0.0).0;
    let estimate = RoaEstimate::for_config(&pll, spec.h, gamma_v, spec.kind, omega).map_err(|e| at("roa", e))?;
    let seed = ov.seed.or(cfg.seed).unwrap_or(DEFAULT_SEED);
    let validation = if spec.n == 0 {
        None
    } else {
        let mut icfg = default_validation_integrator();
        ov.apply(&mut icfg);
        info!("roa: validating with {} samples", spec.n);
        Some(roa_validate_with(&estimate, &pll, spec.n, seed, &icfg)?)
    };
    let report = RoaReport {
        bounding_box: estimate.bounding_box(),
        omega_extent: estimate.omega_extent(),
        estimate,
        seed,
        validation,
    };
    ensure_dir(out)?;
    write_json(&out.join("roa.json"), &report)?;
    Ok(report)
}

#[derive(Debug, Clone, Serialize)]
pub struct EmpiricalCheck {
    pub scenario: String,
    pub window: (f64, f64),
    /// Peak of `|(delta, omega_err / K_I)|` over the window, per label.
    pub limsup: Vec<(String, f64)>,
    /// Whether every label stays below the derived-khalil bound.
    pub sound: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundReport {
    pub k_p: f64,
    pub k_i: f64,
    pub eta_max: f64,
    pub as_printed: UltimateBound,
    pub derived_khalil: UltimateBound,
    pub empirical: Option<EmpiricalCheck>,
}

pub fn bound(cfg: &RunConfig, ov: &Overrides, empirical: bool, out: &Path) -> Result<BoundReport, CliError> {
    let spec = cfg.bound.clone().unwrap_or_default();
    let mut scenario = builtin_scenario(&spec.scenario).map_err(CliError::Core)?;
    let eta_max = spec.eta_max.unwrap_or_else(|| scenario.grid.profile().eta_bound());
    let variant = |v| ultimate_bound(spec.k_p, spec.k_i, eta_max, v).map_err(|e| at("bound", e));
    let as_printed = variant(BoundVariant::AsPrinted)?;
    let derived_khalil = variant(BoundVariant::DerivedKhalil)?;
    let empirical = if empirical {
        let gamma_v = scenario.grid.gamma_v();
        for p in &mut scenario.plls {
            p.config = match p.config.family {
                Family::Srf => PllConfig::srf(spec.k_p, spec.k_i, gamma_v),
                Family::Atan => PllConfig::atan(spec.k_p, spec.k_i, gamma_v),
            }
            .map_err(|e| at("bound", e))?;
        }
        ov.apply(&mut scenario.integrator);
        let window = scenario
            .tail_window
            .ok_or_else(|| CliError::config("bound.scenario", "scenario has no tail window"))?;
        info!("bound: running `{}` for the empirical check", scenario.name);
        let run = run_scenario(&scenario)?;
        let limsup: Vec<(String, f64)> = run
            .report
            .summaries
            .iter()
            .map(|s| (s.label.clone(), s.tail_peak.unwrap_or(0.0)))
            .collect();
        let sound = limsup.iter().all(|(_, v)| *v <= derived_khalil.bound);
        Some(EmpiricalCheck {
            scenario: scenario.name.clone(),
            window,
            limsup,
            sound,
        })
    } else {
        None
    };
    let report = BoundReport {
        k_p: spec.k_p,
        k_i: spec.k_i,
        eta_max,
        as_printed,
        derived_khalil,
        empirical,
    };
    ensure_dir(out)?;
    write_json(&out.join("bound.json"), &report)?;
    Ok(report)
}

pub fn scenario(spec: &ScenarioSpec, ov: &Overrides, out: &Path) -> Result<ScenarioReport, CliError> {
    let s = spec.build(ov)?;
    info!("scenario `{}`: {} estimators", s.name, s.plls.len());
    let run = run_scenario(&s)?;
    ensure_dir(out)?;
    for (label, tr) in &run.trajectories {
        write_trajectory_csv(&label_file(out, label, "csv"), tr, energy_column(tr, None)?)?;
    }
    write_json(&out.join("report.json"), &run.report)?;
    Ok(run.report)
}

/// Builds every object the command would use, without running it.
pub fn validate(cfg: &RunConfig, cmd: crate::config::CommandName, ov: &Overrides) -> Result<(), CliError> {
    use crate::config::CommandName as C;
    match cmd {
        C::Simulate | C::Portrait => {
            let grid = cfg.grid()?;
            cfg.pll(grid.gamma_v())?;
            let (_, _) = cfg.integrator(ov)?;
            cfg.energy()?;
            if cmd == C::Simulate {
                let init = cfg.initial.clone().unwrap_or_default();
                init.omega_hat(grid.frequency(0.0).0, "initial")?;
            } else if cfg.portrait.is_none() {
                return Err(CliError::config("portrait", "missing table [portrait]"));
            }
        }
        C::Roa => {
            let spec = cfg
                .roa
                .as_ref()
                .ok_or_else(|| CliError::config("roa", "missing table [roa]"))?;
            let grid = cfg.grid()?;
            let pll = cfg.pll(grid.gamma_v())?;
            RoaEstimate::for_config(&pll, spec.h, grid.gamma_v(), spec.kind, grid.frequency(0.0).0)
                .map_err(|e| at("roa", e))?;
        }
        C::Bound => {
            let spec = cfg.bound.clone().unwrap_or_default();
            builtin_scenario(&spec.scenario).map_err(CliError::Core)?;
            if !(spec.k_p > 0.0) || !(spec.k_i > 0.0) {
                return Err(CliError::config("bound", "k_p and k_i must be positive"));
            }
            if let Some(eta) = spec.eta_max {
                if !(eta >= 0.0) || !eta.is_finite() {
                    return Err(CliError::config("bound.eta_max", "must be non-negative"));
                }
            }
        }
        C::Scenario => {
            let spec = cfg
                .scenario
                .as_ref()
                .ok_or_else(|| CliError::config("scenario", "missing table [scenario]"))?;
            spec.build(ov)?;
        }
    }
    Ok(())
}
