//! Named experiments: a source, several estimators and a common integrator.

use std::collections::HashSet;
use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use crate::analysis::{max_energy_increase, settling_time, Channel, EnergyKind};
use crate::dynamics::{simulate_closed_loop, InitialError, IntegratorConfig, Representation, Trajectory};
use crate::error::{invalid, Error, Result};
use crate::pll::{Family, PhiFunction, PllConfig};
use crate::signals::{wrap_angle, FrequencyProfile, GridModel, PhaseStep, GAMMA};

pub const HIGH_INERTIA_STEPS: &str = "high-inertia-steps";
pub const LOW_INERTIA_DISTURBANCE: &str = "low-inertia-disturbance";

/// Phase jumps applied every 0.1 s in the high-inertia scenario.
pub const DEFAULT_JUMPS: [f64; 5] = [0.2, -0.2, 0.4, -0.4, 0.2];

/// Band on `|omega_hat - omega|` used for settling times, rad/s.
pub const SETTLING_BAND: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LabeledPll {
    pub label: String,
    pub config: PllConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scenario {
    pub name: String,
    pub grid: GridModel,
    pub plls: Vec<LabeledPll>,
    pub integrator: IntegratorConfig,
    pub representation: Representation,
    /// Initial `(delta, omega_hat - omega(0))`, shared by every estimator.
    pub initial_error: (f64, f64),
    /// Window `[t0, t1]` over which the peak of `|(delta, omega_err / K)|` is
    /// reported, with `K` the polar integral gain.
    pub tail_window: Option<(f64, f64)>,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if self.plls.is_empty() {
            return Err(invalid("plls", "at least one estimator is required"));
        }
        let mut seen = HashSet::new();
        for p in &self.plls {
            if !seen.insert(p.label.as_str()) {
                return Err(invalid("plls", format!("duplicate label `{}`", p.label)));
            }
            p.config
                .validate_for(self.grid.gamma_v())
                .map_err(|e| label(&p.label, e))?;
        }
        self.integrator.validate()
    }

    /// Replaces the phase-step magnitudes, keeping the step times.
    pub fn with_jumps(mut self, jumps: &[f64]) -> Result<Self> {
        let steps = self.grid.phase_steps();
        if jumps.len() != steps.len() {
            return Err(invalid(
                "jumps",
                format!("expected {} magnitudes, got {}", steps.len(), jumps.len()),
            ));
        }
        let steps = steps
            .iter()
            .zip(jumps)
            .map(|(s, &jump)| PhaseStep { time: s.time, jump })
            .collect();
        self.grid = self.grid.with_phase_steps(steps)?;
        Ok(self)
    }
}

fn label(label: &str, e: Error) -> Error {
    Error::Labeled {
        label: label.to_string(),
        source: Box::new(e),
    }
}

pub fn builtin_scenario_names() -> [&'static str; 2] {
    [HIGH_INERTIA_STEPS, LOW_INERTIA_DISTURBANCE]
}

pub fn builtin_scenario(name: &str) -> Result<Scenario> {
    let omega0 = 100.0 * PI;
    // per-unit amplitude (base 320 kV)
    let v = 1.0;
    let gamma_v = GAMMA * v;
    match name {
        HIGH_INERTIA_STEPS => {
            let steps = DEFAULT_JUMPS
                .iter()
                .enumerate()
                .map(|(k, &jump)| PhaseStep {
                    time: 0.1 * (k + 1) as f64,
                    jump,
                })
                .collect();
            let grid = GridModel::new(v, 0.0, FrequencyProfile::Constant { omega0 }, steps)?;
            let plls = vec![
                LabeledPll {
                    label: "atan-pll-1".into(),
                    config: PllConfig::atan(200.0, 1000.0, gamma_v)?,
                },
                LabeledPll {
                    label: "atan-pll-10".into(),
                    config: PllConfig::atan(2000.0, 1000.0, gamma_v)?,
                },
                LabeledPll {
                    label: "gatan-pll".into(),
                    config: PllConfig::gatan(200.0, 1000.0, PhiFunction::adaptive_default(), gamma_v)?,
                },
            ];
            Ok(Scenario {
                name: name.into(),
                grid,
                plls,
                integrator: IntegratorConfig::new(1e-5, 0.6).with_stride(10),
                representation: Representation::Dq,
                initial_error: (0.0, 0.0),
                tail_window: None,
            })
        }
        LOW_INERTIA_DISTURBANCE => {
            let grid = GridModel::new(v, 0.0, FrequencyProfile::low_inertia_disturbance(), Vec::new())?;
            let plls = vec![
                LabeledPll {
                    label: "srf-pll".into(),
                    config: PllConfig::srf(200.0, 1000.0, gamma_v)?,
                },
                LabeledPll {
                    label: "atan-pll".into(),
                    config: PllConfig::atan(200.0, 1000.0, gamma_v)?,
                },
            ];
            Ok(Scenario {
                name: name.into(),
                grid,
                plls,
                integrator: IntegratorConfig::new(1e-4, 60.0).with_stride(100),
                representation: Representation::Dq,
                initial_error: (0.0, 0.0),
                tail_window: Some((30.0, 60.0)),
            })
        }
        other => Err(Error::UnknownScenario(other.to_string())),
    }
}

/// Summary of one labelled run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LabelSummary {
    pub label: String,
    pub family: Family,
    /// Settling time of `|omega_hat - omega|` into [`SETTLING_BAND`].
    pub settling_time: Option<f64>,
    pub final_delta: f64,
    pub final_omega_hat: f64,
    pub final_omega_err: f64,
    /// Largest row-to-row increase of the matched W away from phase steps.
    pub max_lyapunov_increase: f64,
    /// Whether that increase stays below `1e-9`.
    pub lyapunov_monotone: bool,
    /// Wrapped `|delta|` just before each phase step.
    pub delta_before_events: Vec<f64>,
    /// Peak of `|(delta, omega_err / K)|` over the tail window.
    pub tail_peak: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairDeviation {
    pub a: String,
    pub b: String,
    /// `sup |omega_hat_a - omega_hat_b|` over common rows.
    pub omega_hat: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioReport {
    pub scenario: String,
    pub summaries: Vec<LabelSummary>,
    pub deviations: Vec<PairDeviation>,
    /// Largest entry of `deviations` (0 for a single estimator).
    pub max_omega_hat_deviation: f64,
}

/// Report plus the trajectories it was computed from, in label order.
#[derive(Debug, Clone)]
pub struct ScenarioRun {
    pub report: ScenarioReport,
    pub trajectories: Vec<(String, Trajectory)>,
}

/// Runs every estimator (in parallel) and summarizes the results.
pub fn run_scenario(s: &Scenario) -> Result<ScenarioRun> {
    s.validate()?;
    let omega_start = s.grid.frequency(0.0).0;
    let x0 = InitialError::new(s.initial_error.0, omega_start + s.initial_error.1).to_state(&s.grid);
    let runs: Vec<Result<Trajectory>> = s
        .plls
        .par_iter()
        .map(|p| {
            simulate_closed_loop(&s.grid, &p.config, s.representation, &s.integrator, x0)
                .map_err(|e| label(&p.label, e))
        })
        .collect();
    let mut trajectories = Vec::with_capacity(runs.len());
    for (p, r) in s.plls.iter().zip(runs) {
        trajectories.push((p.label.clone(), r?));
    }

    let mut summaries = Vec::new();
    for ((name, tr), p) in trajectories.iter().zip(&s.plls) {
        summaries.push(summarize(name, tr, &p.config, s).map_err(|e| label(name, e))?);
    }
    let mut deviations = Vec::new();
    for i in 0..trajectories.len() {
        for j in i + 1..trajectories.len() {
            let (a, ta) = &trajectories[i];
            let (b, tb) = &trajectories[j];
            let dev = ta
                .omega_hat
                .iter()
                .zip(&tb.omega_hat)
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max);
            deviations.push(PairDeviation {
                a: a.clone(),
                b: b.clone(),
                omega_hat: dev,
            });
        }
    }
    let max_omega_hat_deviation = deviations.iter().map(|d| d.omega_hat).fold(0.0, f64::max);
    Ok(ScenarioRun {
        report: ScenarioReport {
            scenario: s.name.clone(),
            summaries,
            deviations,
            max_omega_hat_deviation,
        },
        trajectories,
    })
}

fn summarize(name: &str, tr: &Trajectory, cfg: &PllConfig, s: &Scenario) -> Result<LabelSummary> {
    let last = tr.len() - 1;
    let matched = match cfg.family {
        Family::Srf => EnergyKind::W1,
        Family::Atan => EnergyKind::W2,
    };
    let max_inc = max_energy_increase(tr, matched)?;
    let k = cfg.polar_integral_gain(tr.gamma_v);
    let tail_peak = s.tail_window.map(|(t0, t1)| {
        (0..tr.len())
            .filter(|&i| tr.times[i] >= t0 && tr.times[i] <= t1)
            .map(|i| wrap_angle(tr.delta[i]).hypot((tr.omega_hat[i] - tr.omega[i]) / k))
            .fold(0.0, f64::max)
    });
    Ok(LabelSummary {
        label: name.to_string(),
        family: cfg.family,
        settling_time: settling_time(tr, Channel::OmegaErr, SETTLING_BAND)?,
        final_delta: tr.delta[last],
        final_omega_hat: tr.omega_hat[last],
        final_omega_err: tr.omega_hat[last] - tr.omega[last],
        max_lyapunov_increase: max_inc,
        lyapunov_monotone: max_inc <= 1e-9,
        delta_before_events: tr.events.iter().map(|e| wrap_angle(tr.delta[e.row]).abs()).collect(),
        tail_peak,
    })
}

/// Phase jump `arcsin(2 X_g dP / (3 V^2))` that carries an extra active power
/// `delta_p` (W) across a reactance `x_g` (ohm), with `v` the peak phase
/// voltage (V) so that `P = 3 V^2 sin(phi) / (2 X_g)`.
pub fn power_step_to_phase_step(delta_p: f64, x_g: f64, v: f64) -> Result<f64> {
    if !(x_g > 0.0) || !(v > 0.0) || !delta_p.is_finite() {
        return Err(invalid("power_step", "x_g and v must be positive, delta_p finite"));
    }
    let argument = delta_p * 2.0 * x_g / (3.0 * v * v);
    if !(-1.0..=1.0).contains(&argument) {
        return Err(Error::TransferInfeasible { argument });
    }
    Ok(argument.asin())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn builtin_definitions() {
        let low = builtin_scenario(LOW_INERTIA_DISTURBANCE).unwrap();
        assert_eq!(low.grid.frequency(0.5).0, 100.0 * PI);
        assert_eq!(low.grid.frequency(1.0).0, 100.0 * PI);
        assert_eq!(low.plls.len(), 2);

        let high = builtin_scenario(HIGH_INERTIA_STEPS).unwrap();
        let times: Vec<f64> = high.grid.phase_steps().iter().map(|s| s.time).collect();
        assert_eq!(times.len(), 5);
        for (k, t) in times.iter().enumerate() {
            assert_abs_diff_eq!(*t, 0.1 * (k + 1) as f64, epsilon = 1e-15);
        }
        assert_eq!(high.plls.len(), 3);
        assert!(matches!(builtin_scenario("nope"), Err(Error::UnknownScenario(_))));
    }

    #[test]
    fn disturbance_peak() {
        // maximize 8 pi exp(-0.1 tau) |sin 0.2 tau|: tan(0.2 tau) = 2
        let tau = 2f64.atan() / 0.2;
        let peak = 8.0 * PI * (-0.1 * tau).exp() * (0.2 * tau).sin();
        assert_abs_diff_eq!(1.0 + tau, 6.5357, epsilon = 1e-4);
        assert_abs_diff_eq!(peak, 12.92, epsilon = 5e-3);
        let p = FrequencyProfile::low_inertia_disturbance();
        let dense = (0..600_000)
            .map(|k| (100.0 * PI - p.eval(k as f64 * 1e-4).0).abs())
            .fold(0.0, f64::max);
        assert_abs_diff_eq!(dense, peak, epsilon = 1e-6);
    }

    #[test]
    fn high_inertia_run() {
        let run = run_scenario(&builtin_scenario(HIGH_INERTIA_STEPS).unwrap()).unwrap();
        let r = &run.report;
        assert_eq!(r.summaries.len(), 3);
        for s in &r.summaries {
            assert!(s.lyapunov_monotone, "{}: {}", s.label, s.max_lyapunov_increase);
            assert_eq!(s.delta_before_events.len(), 5);
        }
        // the fast variants re-converge in delta between steps; the K_P = 200
        // one is dominated by its slow mode near -5.13 rad/s
        for s in &r.summaries[1..] {
            assert!(s.final_delta.abs() < 1e-3, "{}: {}", s.label, s.final_delta);
            assert!(
                s.delta_before_events[1..].iter().all(|d| *d < 1e-2),
                "{}: {:?}",
                s.label,
                s.delta_before_events
            );
        }
    }

    #[test]
    fn custom_jumps() {
        let s = builtin_scenario(HIGH_INERTIA_STEPS)
            .unwrap()
            .with_jumps(&[0.1; 5])
            .unwrap();
        assert!(s.grid.phase_steps().iter().all(|p| p.jump == 0.1));
        assert!(builtin_scenario(HIGH_INERTIA_STEPS)
            .unwrap()
            .with_jumps(&[0.1])
            .is_err());
    }

    #[test]
    fn duplicate_labels_rejected() {
        let mut s = builtin_scenario(LOW_INERTIA_DISTURBANCE).unwrap();
        s.plls[1].label = s.plls[0].label.clone();
        assert!(run_scenario(&s).is_err());
    }

    #[test]
    fn power_angle_helper() {
        assert_eq!(power_step_to_phase_step(0.0, 10.0, 1.0).unwrap(), 0.0);
        let full = 3.0 * 4.0 / (2.0 * 10.0);
        assert_abs_diff_eq!(
            power_step_to_phase_step(full, 10.0, 2.0).unwrap(),
            PI / 2.0,
            epsilon = 1e-12
        );
        let x_g = 2.0 * PI * 50.0 * 32.60e-3;
        assert_abs_diff_eq!(x_g, 10.242, epsilon = 1e-3);
        let phi = power_step_to_phase_step(1e9, x_g, 3.2e5).unwrap();
        assert_abs_diff_eq!(phi, 0.0667, epsilon = 1e-4);
        assert!(matches!(
            power_step_to_phase_step(2.0 * full, 10.0, 2.0),
            Err(Error::TransferInfeasible { .. })
        ));
    }
}
