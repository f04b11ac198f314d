use serde::{Deserialize, Serialize};

use super::{drive, IntegratorConfig, Sample, StepObserver};
use crate::analysis::{energy_eval, EnergyKind, EnergyParams, EnergyPoint};
use crate::error::{invalid, Result};
use crate::pll::{control_from_output, output_y1, output_y2, rhs_dq, rhs_polar, Family, PllConfig, PllState};
use crate::signals::{wrap_angle, DqVoltage, GridModel};

/// State coordinates used for integration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Representation {
    /// `(delta, omega_hat)`
    Polar,
    /// `(v_hat_d, v_hat_q, omega_hat)`
    Dq,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOptions {
    /// Pull `|v_hat|` back onto the circle of radius `gamma V` when it drifts
    /// by more than `1e-9 gamma V` (dq representation only).
    pub renormalize: bool,
    /// Energy functions recorded in addition to H1, H2 and the matched W.
    pub extra_energies: Vec<EnergyKind>,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            renormalize: true,
            extra_energies: Vec::new(),
        }
    }
}

/// Initial condition in error coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitialError {
    pub delta: f64,
    pub omega_hat: f64,
}

impl InitialError {
    pub fn new(delta: f64, omega_hat: f64) -> Self {
        Self { delta, omega_hat }
    }

    /// Estimator state with `theta_hat(0) = theta(0) + delta`.
    pub fn to_state(&self, grid: &GridModel) -> PllState {
        PllState {
            theta_hat: grid.angle(0.0) + self.delta,
            omega_hat: self.omega_hat,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyChannel {
    pub kind: EnergyKind,
    pub values: Vec<f64>,
}

/// A phase step as applied during integration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AppliedEvent {
    pub time: f64,
    pub jump: f64,
    /// Row holding the left limit; the right limit is the next row.
    pub row: usize,
}

/// Recorded closed-loop (or open-loop) run. All channels have one entry per
/// row. Rows share a timestamp only at phase steps (left and right limit).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub representation: Representation,
    /// `None` for open-loop runs.
    pub family: Option<Family>,
    pub gamma_v: f64,
    pub times: Vec<f64>,
    /// Angle estimation error `theta_hat - theta`, unwrapped.
    pub delta: Vec<f64>,
    pub omega_hat: Vec<f64>,
    /// Grid frequency.
    pub omega: Vec<f64>,
    pub v_hat: Vec<DqVoltage>,
    pub u_hat: Vec<f64>,
    pub y1: Vec<f64>,
    pub y2: Vec<f64>,
    /// Output driving the loop (`y1` for SRF, `y2` for ATAN, `y1` open loop).
    pub y_tilde: Vec<f64>,
    /// H1, H2, then the matched W (closed loop), then the requested extras.
    pub energies: Vec<EnergyChannel>,
    pub events: Vec<AppliedEvent>,
    /// Rows recorded off the stride grid.
    pub aligned_samples: usize,
    pub renormalizations: usize,
}

impl Trajectory {
    fn empty(representation: Representation, family: Option<Family>, gamma_v: f64, kinds: &[EnergyKind]) -> Self {
        Self {
            representation,
            family,
            gamma_v,
            times: Vec::new(),
            delta: Vec::new(),
            omega_hat: Vec::new(),
            omega: Vec::new(),
            v_hat: Vec::new(),
            u_hat: Vec::new(),
            y1: Vec::new(),
            y2: Vec::new(),
            y_tilde: Vec::new(),
            energies: kinds
                .iter()
                .map(|&kind| EnergyChannel {
                    kind,
                    values: Vec::new(),
                })
                .collect(),
            events: Vec::new(),
            aligned_samples: 0,
            renormalizations: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn energy(&self, kind: EnergyKind) -> Option<&[f64]> {
        self.energies
            .iter()
            .find(|c| c.kind == kind)
            .map(|c| c.values.as_slice())
    }

    /// W1 for the SRF family, W2 for ATAN.
    pub fn matched_energy(&self) -> Option<&[f64]> {
        match self.family? {
            Family::Srf => self.energy(EnergyKind::W1),
            Family::Atan => self.energy(EnergyKind::W2),
        }
    }

    /// `omega_hat - omega` per row.
    pub fn omega_err(&self) -> Vec<f64> {
        self.omega_hat.iter().zip(&self.omega).map(|(a, b)| a - b).collect()
    }

    /// `delta` wrapped to `[-pi, pi)`.
    pub fn delta_wrapped(&self) -> Vec<f64> {
        self.delta.iter().map(|&d| wrap_angle(d)).collect()
    }

    /// Whether rows `i` and `i + 1` are the two sides of a phase step.
    pub fn is_event_gap(&self, i: usize) -> bool {
        self.events.iter().any(|e| e.row == i)
    }
}

/// Largest deviation between the two representations over common rows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Deviation {
    /// Wrapped angle difference.
    pub delta: f64,
    pub omega_hat: f64,
}

enum Law<'a> {
    Closed(&'a PllConfig),
    Open {
        reference: DqVoltage,
        u: &'a dyn Fn(f64) -> f64,
    },
}

struct Recorder<'a> {
    grid: &'a GridModel,
    law: Law<'a>,
    gamma_v: f64,
    kinds: Vec<EnergyKind>,
    traj: Trajectory,
}

impl Recorder<'_> {
    fn reference(&self) -> DqVoltage {
        match &self.law {
            Law::Closed(cfg) => cfg.reference,
            Law::Open { reference, .. } => *reference,
        }
    }

    fn push(&mut self, t: f64, delta: f64, v_hat: DqVoltage, omega_hat: f64, polar: bool, sample: Sample) {
        let (omega, _) = self.grid.frequency(t);
        let reference = self.reference();
        let y1 = output_y1(v_hat, reference);
        let y2 = if polar {
            wrap_angle(delta - reference.q.atan2(reference.d))
        } else {
            output_y2(v_hat, reference).unwrap_or(f64::NAN)
        };
        let (u, y_tilde) = match &self.law {
            Law::Closed(cfg) => {
                let y = match cfg.family {
                    Family::Srf if polar => cfg.output_polar(delta, self.gamma_v),
                    Family::Srf => y1,
                    Family::Atan => y2,
                };
                (control_from_output(cfg, y, omega_hat), y)
            }
            Law::Open { u, .. } => (u(t), y1),
        };
        let point = EnergyPoint {
            delta,
            v_hat,
            omega_hat,
        };
        for (i, &kind) in self.kinds.iter().enumerate() {
            let params = match &self.law {
                Law::Closed(cfg) => EnergyParams::for_config(cfg, kind, self.gamma_v, omega),
                Law::Open { reference, .. } => EnergyParams {
                    gamma_v: self.gamma_v,
                    k_i: f64::NAN,
                    omega,
                    reference: *reference,
                },
            };
            let value = energy_eval(kind, &point, &params).unwrap_or(f64::NAN);
            self.traj.energies[i].values.push(value);
        }
        let tr = &mut self.traj;
        tr.times.push(t);
        tr.delta.push(delta);
        tr.omega_hat.push(omega_hat);
        tr.omega.push(omega);
        tr.v_hat.push(v_hat);
        tr.u_hat.push(u);
        tr.y1.push(y1);
        tr.y2.push(y2);
        tr.y_tilde.push(y_tilde);
        if sample != Sample::Grid {
            tr.aligned_samples += 1;
        }
    }

    fn note_event(&mut self, index: usize, t: f64) -> f64 {
        let jump = self.grid.phase_steps()[index].jump;
        let row = self.traj.times.len() - 1;
        self.traj.events.push(AppliedEvent { time: t, jump, row });
        jump
    }
}

struct PolarObserver<'a> {
    rec: Recorder<'a>,
    first_event: usize,
}

impl StepObserver<2> for PolarObserver<'_> {
    fn apply_event(&mut self, index: usize, t: f64, x: &mut [f64; 2]) {
        x[0] -= self.rec.note_event(self.first_event + index, t);
    }

    fn record(&mut self, t: f64, x: &[f64; 2], sample: Sample) {
        let v = DqVoltage::from_polar(self.rec.gamma_v, x[0]);
        self.rec.push(t, x[0], v, x[1], true, sample);
    }
}

struct DqObserver<'a> {
    rec: Recorder<'a>,
    first_event: usize,
    delta: f64,
    renormalize: bool,
}

impl StepObserver<3> for DqObserver<'_> {
    fn after_step(&mut self, t: f64, x: &mut [f64; 3]) {
        let angle = x[1].atan2(x[0]);
        self.delta += wrap_angle(angle - self.delta);
        if self.renormalize {
            let r = x[0].hypot(x[1]);
            let gv = self.rec.gamma_v;
            if (r - gv).abs() > 1e-9 * gv && r > 0.0 {
                log::debug!("renormalizing |v_hat| = {r} at t = {t}");
                x[0] *= gv / r;
                x[1] *= gv / r;
                self.rec.traj.renormalizations += 1;
            }
        }
    }

    fn apply_event(&mut self, index: usize, t: f64, x: &mut [f64; 3]) {
        let jump = self.rec.note_event(self.first_event + index, t);
        let v = DqVoltage::new(x[0], x[1]).rotate(-jump);
        x[0] = v.d;
        x[1] = v.q;
        self.delta -= jump;
    }

    fn record(&mut self, t: f64, x: &[f64; 3], sample: Sample) {
        self.rec
            .push(t, self.delta, DqVoltage::new(x[0], x[1]), x[2], false, sample);
    }
}

/// Phase steps strictly after `t = 0`; earlier ones are already part of `theta(0)`.
fn pending_events(grid: &GridModel, icfg: &IntegratorConfig) -> (usize, Vec<f64>) {
    let steps = grid.phase_steps();
    let first = steps.partition_point(|s| s.time <= 1e-6 * icfg.dt);
    (first, steps[first..].iter().map(|s| s.time).collect())
}

fn check_state(x0: &PllState) -> Result<()> {
    if !x0.theta_hat.is_finite() || !x0.omega_hat.is_finite() {
        return Err(invalid("x0", "initial state must be finite"));
    }
    Ok(())
}

/// Simulates the closed loop with default options.
pub fn simulate_closed_loop(
    grid: &GridModel,
    cfg: &PllConfig,
    representation: Representation,
    icfg: &IntegratorConfig,
    x0: PllState,
) -> Result<Trajectory> {
    simulate_with(grid, cfg, representation, icfg, x0, &SimOptions::default())
}

pub fn simulate_with(
    grid: &GridModel,
    cfg: &PllConfig,
    representation: Representation,
    icfg: &IntegratorConfig,
    x0: PllState,
    options: &SimOptions,
) -> Result<Trajectory> {
    cfg.validate()?;
    icfg.validate()?;
    check_state(&x0)?;
    for kind in &options.extra_energies {
        kind.validate()?;
    }
    let gamma_v = grid.gamma_v();
    let matched = match cfg.family {
        Family::Srf => EnergyKind::W1,
        Family::Atan => EnergyKind::W2,
    };
    let mut kinds = vec![EnergyKind::H1, EnergyKind::H2, matched];
    kinds.extend(options.extra_energies.iter().copied());
    let rec = Recorder {
        grid,
        law: Law::Closed(cfg),
        gamma_v,
        traj: Trajectory::empty(representation, Some(cfg.family), gamma_v, &kinds),
        kinds,
    };
    let (first_event, events) = pending_events(grid, icfg);
    let delta0 = x0.theta_hat - grid.angle(0.0);

    match representation {
        Representation::Polar => {
            let mut rhs = |t: f64, x: &[f64; 2]| {
                let (omega, eta) = grid.frequency(t);
                let r = rhs_polar(cfg, gamma_v, x[0], x[1], omega, eta);
                [r.delta_dot, r.omega_hat_dot]
            };
            let mut obs = PolarObserver { rec, first_event };
            drive([delta0, x0.omega_hat], icfg, &events, &mut rhs, &mut obs)?;
            Ok(obs.rec.traj)
        }
        Representation::Dq => {
            let v0 = DqVoltage::from_polar(gamma_v, delta0);
            let mut rhs = |t: f64, x: &[f64; 3]| {
                let (omega, _) = grid.frequency(t);
                match rhs_dq(cfg, DqVoltage::new(x[0], x[1]), x[2], omega) {
                    Ok((v, w)) => [v.d, v.q, w],
                    Err(_) => [f64::NAN; 3],
                }
            };
            let mut obs = DqObserver {
                rec,
                first_event,
                delta: delta0,
                renormalize: options.renormalize,
            };
            drive([v0.d, v0.q, x0.omega_hat], icfg, &events, &mut rhs, &mut obs)?;
            Ok(obs.rec.traj)
        }
    }
}

/// Integrates `d/dt v_hat = J2 (u(t) - omega) v_hat` for a prescribed
/// frequency command `u`. The `omega_hat` channel holds `x0.omega_hat`
/// unchanged; the loop output is `y1`.
pub fn simulate_open_loop(
    grid: &GridModel,
    reference: DqVoltage,
    u: &dyn Fn(f64) -> f64,
    icfg: &IntegratorConfig,
    x0: PllState,
) -> Result<Trajectory> {
    icfg.validate()?;
    check_state(&x0)?;
    let gamma_v = grid.gamma_v();
    let kinds = vec![EnergyKind::H1, EnergyKind::H2];
    let rec = Recorder {
        grid,
        law: Law::Open { reference, u },
        gamma_v,
        traj: Trajectory::empty(Representation::Dq, None, gamma_v, &kinds),
        kinds,
    };
    let (first_event, events) = pending_events(grid, icfg);
    let delta0 = x0.theta_hat - grid.angle(0.0);
    let v0 = DqVoltage::from_polar(gamma_v, delta0);
    let mut rhs = |t: f64, x: &[f64; 3]| {
        let (omega, _) = grid.frequency(t);
        let v = DqVoltage::new(x[0], x[1]).rotate_quarter().scale(u(t) - omega);
        [v.d, v.q, 0.0]
    };
    let mut obs = DqObserver {
        rec,
        first_event,
        delta: delta0,
        renormalize: false,
    };
    drive([v0.d, v0.q, x0.omega_hat], icfg, &events, &mut rhs, &mut obs)?;
    Ok(obs.rec.traj)
}

/// Runs both representations from the same initial state and returns the
/// largest row-wise disagreement.
pub fn representation_equivalence(
    grid: &GridModel,
    cfg: &PllConfig,
    icfg: &IntegratorConfig,
    x0: PllState,
) -> Result<Deviation> {
    let polar = simulate_closed_loop(grid, cfg, Representation::Polar, icfg, x0)?;
    let dq = simulate_closed_loop(grid, cfg, Representation::Dq, icfg, x0)?;
    let mut dev = Deviation {
        delta: 0.0,
        omega_hat: 0.0,
    };
    for i in 0..polar.len().min(dq.len()) {
        dev.delta = dev.delta.max(wrap_angle(polar.delta[i] - dq.delta[i]).abs());
        dev.omega_hat = dev.omega_hat.max((polar.omega_hat[i] - dq.omega_hat[i]).abs());
    }
    Ok(dev)
}
