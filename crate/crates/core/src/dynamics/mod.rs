//! Fixed-step integration of the closed-loop error dynamics.
//!
//! Stepping rule: steps land on the grid `t_k = k * dt`; a step is split at
//! every event time strictly inside it and the final step is shortened to end
//! exactly at `t_end`. Grid points with `k % record_stride == 0` are recorded,
//! plus *aligned* samples: the left limit at each event, the right limit when
//! the event is not itself a recorded grid point, and `t_end` when it is not a
//! recorded grid point. A trajectory therefore has
//! `floor(t_end / (dt * record_stride)) + 1 + aligned` rows.

mod closed_loop;

pub use closed_loop::{
    representation_equivalence, simulate_closed_loop, simulate_open_loop, simulate_with, AppliedEvent, Deviation,
    EnergyChannel, InitialError, Representation, SimOptions, Trajectory,
};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Rk4,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub dt: f64,
    pub t_end: f64,
    pub method: Method,
    pub record_stride: usize,
}

impl IntegratorConfig {
    pub fn new(dt: f64, t_end: f64) -> Self {
        Self {
            dt,
            t_end,
            method: Method::Rk4,
            record_stride: 1,
        }
    }

    pub fn with_stride(mut self, record_stride: usize) -> Self {
        self.record_stride = record_stride;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(invalid("dt", format!("must be positive, got {}", self.dt)));
        }
        if !(self.t_end > 0.0) || !self.t_end.is_finite() {
            return Err(invalid("t_end", format!("must be positive, got {}", self.t_end)));
        }
        if self.record_stride == 0 {
            return Err(invalid("record_stride", "must be at least 1"));
        }
        Ok(())
    }

    /// Number of integration steps, not counting splits at events.
    pub fn steps(&self) -> usize {
        let r = self.t_end / self.dt;
        let n = if (r - r.round()).abs() <= 1e-9 * r.max(1.0) {
            r.round()
        } else {
            r.ceil()
        };
        n as usize
    }

    /// Rows recorded on the stride grid (excluding aligned samples).
    pub fn grid_rows(&self) -> usize {
        let n = self.steps();
        let last_full = if self.lands_on_grid() { n } else { n - 1 };
        last_full / self.record_stride + 1
    }

    fn lands_on_grid(&self) -> bool {
        let r = self.t_end / self.dt;
        (r - r.round()).abs() <= 1e-9 * r.max(1.0)
    }

    fn snap(&self) -> f64 {
        1e-6 * self.dt
    }
}

/// One classical Runge–Kutta step of length `h`.
pub fn rk4_step<const N: usize, F>(rhs: &mut F, t: f64, x: &[f64; N], h: f64) -> [f64; N]
where
    F: FnMut(f64, &[f64; N]) -> [f64; N],
{
    let k1 = rhs(t, x);
    let k2 = rhs(t + 0.5 * h, &axpy(x, 0.5 * h, &k1));
    let k3 = rhs(t + 0.5 * h, &axpy(x, 0.5 * h, &k2));
    let k4 = rhs(t + h, &axpy(x, h, &k3));
    let mut out = *x;
    for i in 0..N {
        out[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    out
}

fn axpy<const N: usize>(x: &[f64; N], a: f64, y: &[f64; N]) -> [f64; N] {
    let mut out = *x;
    for i in 0..N {
        out[i] += a * y[i];
    }
    out
}

/// Sampled solution of an ODE.
#[derive(Debug, Clone, PartialEq)]
pub struct OdeSolution<const N: usize> {
    pub times: Vec<f64>,
    pub states: Vec<[f64; N]>,
}

impl<const N: usize> OdeSolution<N> {
    pub fn last(&self) -> (f64, [f64; N]) {
        (*self.times.last().unwrap(), *self.states.last().unwrap())
    }
}

/// Integrates `dx/dt = rhs(t, x)` from `t = 0` with fixed-step RK4.
pub fn integrate<const N: usize, F>(mut rhs: F, x0: [f64; N], cfg: &IntegratorConfig) -> Result<OdeSolution<N>>
where
    F: FnMut(f64, &[f64; N]) -> [f64; N],
{
    struct Collect<const N: usize>(OdeSolution<N>);
    impl<const N: usize> StepObserver<N> for Collect<N> {
        fn record(&mut self, t: f64, x: &[f64; N], _sample: Sample) {
            self.0.times.push(t);
            self.0.states.push(*x);
        }
    }
    let mut obs = Collect(OdeSolution {
        times: Vec::new(),
        states: Vec::new(),
    });
    drive(x0, cfg, &[], &mut rhs, &mut obs)?;
    Ok(obs.0)
}

/// Why a row was recorded.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Sample {
    Grid,
    /// Left limit at an event.
    BeforeEvent,
    /// Right limit at an event that is not a recorded grid point.
    AfterEvent,
    /// Final time off the record grid.
    Final,
}

pub(crate) trait StepObserver<const N: usize> {
    /// Called after every completed step (or partial step).
    fn after_step(&mut self, _t: f64, _x: &mut [f64; N]) {}
    /// Applies event `index` to the state.
    fn apply_event(&mut self, _index: usize, _t: f64, _x: &mut [f64; N]) {}
    fn record(&mut self, t: f64, x: &[f64; N], sample: Sample);
}

/// Shared stepping loop. `events` must be sorted; events at or before `t = 0`
/// and after `t_end` are ignored.
pub(crate) fn drive<const N: usize, F, O>(
    x0: [f64; N],
    cfg: &IntegratorConfig,
    events: &[f64],
    rhs: &mut F,
    obs: &mut O,
) -> Result<[f64; N]>
where
    F: FnMut(f64, &[f64; N]) -> [f64; N],
    O: StepObserver<N>,
{
    cfg.validate()?;
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(invalid("x0", "initial state must be finite"));
    }
    let n_steps = cfg.steps();
    let snap = cfg.snap();
    let mut ev = events.partition_point(|&te| te <= snap);
    let mut t = 0.0;
    let mut x = x0;
    obs.record(t, &x, Sample::Grid);

    let mut advance = |t: &mut f64, x: &mut [f64; N], to: f64, obs: &mut O| -> Result<()> {
        let next = rk4_step(rhs, *t, x, to - *t);
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::Diverged { last_valid_time: *t });
        }
        *x = next;
        *t = to;
        obs.after_step(*t, x);
        Ok(())
    };

    for k in 0..n_steps {
        let is_last = k + 1 == n_steps;
        let t_next = if is_last { cfg.t_end } else { (k + 1) as f64 * cfg.dt };
        while ev < events.len() && events[ev] < t_next - snap {
            let te = events[ev];
            advance(&mut t, &mut x, te, obs)?;
            obs.record(t, &x, Sample::BeforeEvent);
            obs.apply_event(ev, t, &mut x);
            obs.record(t, &x, Sample::AfterEvent);
            ev += 1;
        }
        advance(&mut t, &mut x, t_next, obs)?;
        let on_grid = !is_last || cfg.lands_on_grid();
        let recorded = on_grid && (k + 1) % cfg.record_stride == 0;
        while ev < events.len() && (events[ev] - t_next).abs() <= snap {
            obs.record(t, &x, Sample::BeforeEvent);
            obs.apply_event(ev, t, &mut x);
            if !recorded && !is_last {
                obs.record(t, &x, Sample::AfterEvent);
            }
            ev += 1;
        }
        if recorded {
            obs.record(t, &x, Sample::Grid);
        } else if is_last {
            obs.record(t, &x, Sample::Final);
        }
    }
    Ok(x)
}
