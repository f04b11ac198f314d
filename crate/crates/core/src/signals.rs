//! Three-phase source model, Clarke/Park transforms and angle recovery.
//!
//! The source is a balanced sinusoid `v(t) = V * sin3(theta(t))` where
//! `sin3(x) = (sin x, sin(x - 2pi/3), sin(x + 2pi/3))`. The transforms are
//! scaled so that
//!
//! * `clarke(v) = gamma * V * (cos theta, sin theta)`
//! * `park(v, theta_hat) = gamma * V * (cos delta, sin delta)` with
//!   `delta = theta_hat - theta`
//!
//! where `gamma = sqrt(3/2)`.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// `sqrt(3/2)`, the amplitude scaling of the stationary and rotating frames.
pub const GAMMA: f64 = 1.224_744_871_391_589;

const SQRT3_OVER_2: f64 = 0.866_025_403_784_438_6;
const TWO_PI_OVER_3: f64 = 2.0 * PI / 3.0;

/// Row-major 2x3 matrix `(1/gamma) [[0, -sqrt3/2, sqrt3/2], [0, -1/2, -1/2]]`.
///
/// Kept for comparison only: its second row yields `sin(theta) / (2 gamma)`
/// rather than `gamma sin(theta)`. [`clarke_transform`] uses `(1, -1/2, -1/2)`
/// in that row.
pub const PRINTED_CLARKE_MATRIX: [[f64; 3]; 2] = [
    [0.0, -SQRT3_OVER_2 / GAMMA, SQRT3_OVER_2 / GAMMA],
    [0.0, -0.5 / GAMMA, -0.5 / GAMMA],
];

/// The rotating-frame matrix `(1/gamma) [sin3(vt); cos3(vt)]` at `vt = theta_hat - pi/2`.
///
/// Kept for comparison only: applied to `V sin3(theta)` it returns
/// `gamma V (sin delta, cos delta)`, i.e. the d and q components swapped with
/// respect to [`park_transform`].
pub fn printed_park_matrix(theta_hat: f64) -> [[f64; 3]; 2] {
    let vt = theta_hat - PI / 2.0;
    let s = sin3(vt);
    let c = cos3(vt);
    [
        [s[0] / GAMMA, s[1] / GAMMA, s[2] / GAMMA],
        [c[0] / GAMMA, c[1] / GAMMA, c[2] / GAMMA],
    ]
}

/// Applies a 2x3 matrix to a three-phase sample.
pub fn apply_matrix(m: &[[f64; 3]; 2], s: ThreePhaseSample) -> [f64; 2] {
    let v = [s.a, s.b, s.c];
    [
        m[0].iter().zip(v).map(|(a, b)| a * b).sum(),
        m[1].iter().zip(v).map(|(a, b)| a * b).sum(),
    ]
}

fn sin3(x: f64) -> [f64; 3] {
    [x.sin(), (x - TWO_PI_OVER_3).sin(), (x + TWO_PI_OVER_3).sin()]
}

fn cos3(x: f64) -> [f64; 3] {
    [x.cos(), (x - TWO_PI_OVER_3).cos(), (x + TWO_PI_OVER_3).cos()]
}

/// Wraps an angle into `[-pi, pi)`.
pub fn wrap_angle(x: f64) -> f64 {
    let r = (x + PI).rem_euclid(TAU) - PI;
    if r >= PI {
        r - TAU
    } else {
        r
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThreePhaseSample {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl ThreePhaseSample {
    pub fn new(a: f64, b: f64, c: f64) -> Self {
        Self { a, b, c }
    }

    /// `V * sin3(theta)`.
    pub fn balanced(amplitude: f64, theta: f64) -> Self {
        let s = sin3(theta);
        Self::new(amplitude * s[0], amplitude * s[1], amplitude * s[2])
    }

    pub fn sum(&self) -> f64 {
        self.a + self.b + self.c
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaBetaVoltage {
    pub alpha: f64,
    pub beta: f64,
}

impl AlphaBetaVoltage {
    pub fn new(alpha: f64, beta: f64) -> Self {
        Self { alpha, beta }
    }

    pub fn norm(&self) -> f64 {
        self.alpha.hypot(self.beta)
    }
}

/// Rotating-frame voltage `(V_d, V_q)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DqVoltage {
    pub d: f64,
    pub q: f64,
}

impl DqVoltage {
    pub fn new(d: f64, q: f64) -> Self {
        Self { d, q }
    }

    /// The point `radius * (cos angle, sin angle)`.
    pub fn from_polar(radius: f64, angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self::new(radius * c, radius * s)
    }

    pub fn norm(&self) -> f64 {
        self.d.hypot(self.q)
    }

    /// `atan2(q, d)` in `[-pi, pi)`.
    pub fn angle(&self) -> Result<f64> {
        checked_atan2(self.q, self.d)
    }

    /// `J2 * self`, with `J2 = [[0, -1], [1, 0]]`.
    pub fn rotate_quarter(&self) -> Self {
        Self::new(-self.q, self.d)
    }

    pub fn rotate(&self, angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self::new(c * self.d - s * self.q, s * self.d + c * self.q)
    }

    pub fn dot(&self, other: &Self) -> f64 {
        self.d * other.d + self.q * other.q
    }

    pub fn scale(&self, k: f64) -> Self {
        Self::new(k * self.d, k * self.q)
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self::new(self.d - other.d, self.q - other.q)
    }
}

pub(crate) fn checked_atan2(y: f64, x: f64) -> Result<f64> {
    if x == 0.0 && y == 0.0 {
        return Err(Error::IllDefinedAngle);
    }
    Ok(wrap_angle(y.atan2(x)))
}

/// An instantaneous jump of the source angle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseStep {
    /// Time of the jump in s.
    pub time: f64,
    /// Jump of `theta` in rad.
    pub jump: f64,
}

/// RoCoF samples `eta_k` at `t = k * period`, linearly interpolated and held
/// after the last sample. Frequency and phase are integrated in closed form.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RocofTable {
    omega0: f64,
    period: f64,
    samples: Vec<f64>,
    eta_max: f64,
    // omega and integral of omega at every knot
    #[serde(skip)]
    knot_omega: Vec<f64>,
    #[serde(skip)]
    knot_phase: Vec<f64>,
}

impl RocofTable {
    pub fn new(omega0: f64, period: f64, samples: Vec<f64>, eta_max: f64) -> Result<Self> {
        if !(omega0 > 0.0) || !omega0.is_finite() {
            return Err(invalid("omega0", "must be positive and finite"));
        }
        if !(period > 0.0) || !period.is_finite() {
            return Err(invalid("period", "must be positive and finite"));
        }
        if samples.is_empty() {
            return Err(invalid("samples", "at least one RoCoF sample is required"));
        }
        if let Some(bad) = samples.iter().find(|e| !e.is_finite() || e.abs() > eta_max) {
            return Err(invalid(
                "samples",
                format!("sample {bad} violates |eta| <= eta_max = {eta_max}"),
            ));
        }
        let mut knot_omega = Vec::with_capacity(samples.len());
        let mut knot_phase = Vec::with_capacity(samples.len());
        let (mut w, mut p) = (omega0, 0.0);
        knot_omega.push(w);
        knot_phase.push(p);
        for pair in samples.windows(2) {
            let (e0, e1) = (pair[0], pair[1]);
            let m = (e1 - e0) / period;
            let s = period;
            p += w * s + e0 * s * s / 2.0 + m * s * s * s / 6.0;
            w += e0 * s + m * s * s / 2.0;
            knot_omega.push(w);
            knot_phase.push(p);
        }
        Ok(Self {
            omega0,
            period,
            samples,
            eta_max,
            knot_omega,
            knot_phase,
        })
    }

    pub fn omega0(&self) -> f64 {
        self.omega0
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn eta_max(&self) -> f64 {
        self.eta_max
    }

    // (knot index, offset into segment, segment slope of eta)
    fn locate(&self, t: f64) -> (usize, f64, f64) {
        let last = self.samples.len() - 1;
        let k = ((t / self.period).floor() as usize).min(last);
        let s = t - k as f64 * self.period;
        let m = if k < last {
            (self.samples[k + 1] - self.samples[k]) / self.period
        } else {
            0.0
        };
        (k, s, m)
    }

    fn eval(&self, t: f64) -> (f64, f64) {
        let (k, s, m) = self.locate(t);
        let e0 = self.samples[k];
        (self.knot_omega[k] + e0 * s + m * s * s / 2.0, e0 + m * s)
    }

    fn phase(&self, t: f64) -> f64 {
        let (k, s, m) = self.locate(t);
        let e0 = self.samples[k];
        self.knot_phase[k] + self.knot_omega[k] * s + e0 * s * s / 2.0 + m * s * s * s / 6.0
    }
}

/// Frequency of the source as a function of time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum FrequencyProfile {
    Constant {
        omega0: f64,
    },
    /// `omega0` before `onset`, then
    /// `omega0 + amplitude * exp(-decay * tau) * sin(rate * tau)` with `tau = t - onset`.
    DampedSinusoid {
        omega0: f64,
        amplitude: f64,
        decay: f64,
        rate: f64,
        onset: f64,
    },
    TabulatedRocof(RocofTable),
}

impl FrequencyProfile {
    /// 50 Hz followed, from t = 1 s, by the additive deviation
    /// `-8 pi exp(-0.1 (t-1)) sin(0.2 (t-1))` rad/s.
    pub fn low_inertia_disturbance() -> Self {
        Self::DampedSinusoid {
            omega0: 100.0 * PI,
            amplitude: -8.0 * PI,
            decay: 0.1,
            rate: 0.2,
            onset: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Constant { omega0 } => positive("omega0", *omega0),
            Self::DampedSinusoid {
                omega0,
                amplitude,
                decay,
                rate,
                onset,
            } => {
                positive("omega0", *omega0)?;
                finite("amplitude", *amplitude)?;
                if !(*decay >= 0.0) || !decay.is_finite() {
                    return Err(invalid("decay", "must be non-negative"));
                }
                finite("rate", *rate)?;
                if decay * decay + rate * rate == 0.0 {
                    return Err(invalid("rate", "decay and rate cannot both vanish"));
                }
                if !(*onset >= 0.0) || !onset.is_finite() {
                    return Err(invalid("onset", "must be non-negative"));
                }
                Ok(())
            }
            // validated on construction
            Self::TabulatedRocof(_) => Ok(()),
        }
    }

    /// Nominal frequency before any deviation.
    pub fn omega0(&self) -> f64 {
        match self {
            Self::Constant { omega0 } | Self::DampedSinusoid { omega0, .. } => *omega0,
            Self::TabulatedRocof(t) => t.omega0(),
        }
    }

    /// Instantaneous frequency `omega(t)` and RoCoF `eta(t)`.
    pub fn eval(&self, t: f64) -> (f64, f64) {
        match self {
            Self::Constant { omega0 } => (*omega0, 0.0),
            Self::DampedSinusoid {
                omega0,
                amplitude,
                decay,
                rate,
                onset,
            } => {
                if t < *onset {
                    return (*omega0, 0.0);
                }
                let tau = t - onset;
                let e = (-decay * tau).exp();
                let (s, c) = (rate * tau).sin_cos();
                (omega0 + amplitude * e * s, amplitude * e * (rate * c - decay * s))
            }
            Self::TabulatedRocof(table) => table.eval(t),
        }
    }

    /// `integral_0^t omega(tau) dtau`.
    pub fn phase_integral(&self, t: f64) -> f64 {
        match self {
            Self::Constant { omega0 } => omega0 * t,
            Self::DampedSinusoid {
                omega0,
                amplitude,
                decay,
                rate,
                onset,
            } => {
                let base = omega0 * t;
                if t <= *onset {
                    return base;
                }
                let tau = t - onset;
                let (a, b) = (*decay, *rate);
                let (s, c) = (b * tau).sin_cos();
                let integral = (b - (-a * tau).exp() * (a * s + b * c)) / (a * a + b * b);
                base + amplitude * integral
            }
            Self::TabulatedRocof(table) => table.phase(t),
        }
    }

    /// Upper bound of `|eta|` over all time.
    pub fn eta_bound(&self) -> f64 {
        match self {
            Self::Constant { .. } => 0.0,
            Self::DampedSinusoid {
                amplitude, decay, rate, ..
            } => {
                // |A e^{-a tau} (b cos - a sin)| peaks at tau = 0 whenever the
                // envelope derivative is non-positive there, which holds for a >= 0.
                let (a, b) = (*decay, *rate);
                let at_onset = (amplitude * b).abs();
                let envelope = amplitude.abs() * a.hypot(b);
                if a == 0.0 {
                    envelope
                } else {
                    at_onset.max(sampled_eta_peak(*amplitude, a, b)).min(envelope)
                }
            }
            Self::TabulatedRocof(table) => table.eta_max(),
        }
    }
}

// Peak of |A e^{-a tau} (b cos b tau - a sin b tau)| on its first few lobes.
fn sampled_eta_peak(amplitude: f64, a: f64, b: f64) -> f64 {
    let horizon = 10.0 / a;
    let n = 20_000;
    (0..=n)
        .map(|i| {
            let tau = horizon * i as f64 / n as f64;
            let (s, c) = (b * tau).sin_cos();
            (amplitude * (-a * tau).exp() * (b * c - a * s)).abs()
        })
        .fold(0.0, f64::max)
}

fn positive(field: &str, x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(invalid(field, format!("must be positive and finite, got {x}")))
    }
}

fn finite(field: &str, x: f64) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(invalid(field, "must be finite"))
    }
}

/// Balanced three-phase source at the point of common coupling.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridModel {
    amplitude: f64,
    phi0: f64,
    profile: FrequencyProfile,
    phase_steps: Vec<PhaseStep>,
}

impl GridModel {
    pub fn new(amplitude: f64, phi0: f64, profile: FrequencyProfile, phase_steps: Vec<PhaseStep>) -> Result<Self> {
        positive("amplitude", amplitude)?;
        finite("phi0", phi0)?;
        profile.validate()?;
        for (i, step) in phase_steps.iter().enumerate() {
            if !(step.time >= 0.0) || !step.time.is_finite() || !step.jump.is_finite() {
                return Err(invalid(
                    &format!("phase_steps[{i}]"),
                    "time must be non-negative and jump finite",
                ));
            }
            if i > 0 && step.time <= phase_steps[i - 1].time {
                return Err(invalid(
                    &format!("phase_steps[{i}].time"),
                    "phase-step times must be strictly increasing",
                ));
            }
        }
        Ok(Self {
            amplitude,
            phi0,
            profile,
            phase_steps,
        })
    }

    /// Constant-frequency source without phase steps.
    pub fn constant(amplitude: f64, omega0: f64) -> Result<Self> {
        Self::new(amplitude, 0.0, FrequencyProfile::Constant { omega0 }, Vec::new())
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    /// `gamma * V`, the radius of the circle the dq voltage lives on.
    pub fn gamma_v(&self) -> f64 {
        GAMMA * self.amplitude
    }

    pub fn phi0(&self) -> f64 {
        self.phi0
    }

    pub fn profile(&self) -> &FrequencyProfile {
        &self.profile
    }

    pub fn phase_steps(&self) -> &[PhaseStep] {
        &self.phase_steps
    }

    pub fn with_phase_steps(mut self, steps: Vec<PhaseStep>) -> Result<Self> {
        self.phase_steps = steps;
        Self::new(self.amplitude, self.phi0, self.profile, self.phase_steps)
    }

    /// Sum of all jumps with time `<= t`.
    pub fn accumulated_steps(&self, t: f64) -> f64 {
        self.phase_steps
            .iter()
            .take_while(|s| s.time <= t)
            .map(|s| s.jump)
            .sum()
    }

    /// `theta(t) = phi0 + integral omega + accumulated phase steps`.
    pub fn angle(&self, t: f64) -> f64 {
        self.phi0 + self.profile.phase_integral(t) + self.accumulated_steps(t)
    }

    pub fn frequency(&self, t: f64) -> (f64, f64) {
        self.profile.eval(t)
    }
}

pub fn three_phase_voltage(model: &GridModel, t: f64) -> ThreePhaseSample {
    ThreePhaseSample::balanced(model.amplitude, model.angle(t))
}

pub fn clarke_transform(s: ThreePhaseSample) -> AlphaBetaVoltage {
    AlphaBetaVoltage::new(SQRT3_OVER_2 * (s.c - s.b) / GAMMA, (s.a - 0.5 * (s.b + s.c)) / GAMMA)
}

/// dq components of `s` in the frame with estimated angle `theta_hat`;
/// for a balanced source this is `gamma V (cos delta, sin delta)`.
pub fn park_transform(s: ThreePhaseSample, theta_hat: f64) -> DqVoltage {
    let ab = clarke_transform(s);
    let (sn, cs) = theta_hat.sin_cos();
    DqVoltage::new(cs * ab.alpha + sn * ab.beta, sn * ab.alpha - cs * ab.beta)
}

/// `atan2(V_beta, V_alpha)` in `[-pi, pi)`.
pub fn angle_from_alpha_beta(v: AlphaBetaVoltage) -> Result<f64> {
    checked_atan2(v.beta, v.alpha)
}

pub fn frequency_profile_eval(p: &FrequencyProfile, t: f64) -> (f64, f64) {
    p.eval(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    const W50: f64 = 100.0 * PI;

    // Adaptive Simpson on omega(t); independent of the closed-form integral.
    fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
        fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> f64 {
            let m = 0.5 * (a + b);
            (b - a) / 6.0 * (f(a) + 4.0 * f(m) + f(b))
        }
        fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, whole: f64, tol: f64, depth: u32) -> f64 {
            let m = 0.5 * (a + b);
            let left = simpson(f, a, m);
            let right = simpson(f, m, b);
            if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
                return left + right + (left + right - whole) / 15.0;
            }
            rec(f, a, m, left, tol / 2.0, depth - 1) + rec(f, m, b, right, tol / 2.0, depth - 1)
        }
        rec(f, a, b, simpson(f, a, b), tol, 40)
    }

    fn low_inertia_grid() -> GridModel {
        GridModel::new(1.0, 0.0, FrequencyProfile::low_inertia_disturbance(), vec![]).unwrap()
    }

    #[test]
    fn voltage_at_zero_and_quarter_period() {
        let g = GridModel::constant(1.0, W50).unwrap();
        let v = three_phase_voltage(&g, 0.0);
        assert_abs_diff_eq!(v.a, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(v.b, -0.866_025_403_784_438_6, epsilon = 1e-12);
        assert_abs_diff_eq!(v.c, 0.866_025_403_784_438_6, epsilon = 1e-12);
        let v = three_phase_voltage(&g, 0.005);
        assert_abs_diff_eq!(v.a, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(v.b, -0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(v.c, -0.5, epsilon = 1e-12);
    }

    #[test]
    fn damped_profile_angle_matches_quadrature() {
        let g = low_inertia_grid();
        let omega = |t: f64| g.profile().eval(t).0;
        let oracle = adaptive_simpson(&omega, 0.0, 1.0, 1e-13) + adaptive_simpson(&omega, 1.0, 2.0, 1e-13);
        assert_abs_diff_eq!(g.angle(2.0), oracle, epsilon = 1e-9);
        let v = three_phase_voltage(&g, 2.0);
        let expected = ThreePhaseSample::balanced(1.0, oracle);
        assert_abs_diff_eq!(v.a, expected.a, epsilon = 1e-9);
        assert_abs_diff_eq!(v.b, expected.b, epsilon = 1e-9);
        assert_abs_diff_eq!(v.c, expected.c, epsilon = 1e-9);
    }

    #[test]
    fn clarke_examples() {
        let ab = clarke_transform(ThreePhaseSample::new(
            0.0,
            -0.866_025_403_784_438_6,
            0.866_025_403_784_438_6,
        ));
        assert_abs_diff_eq!(ab.alpha, 1.224_744_9, epsilon = 1e-7);
        assert_abs_diff_eq!(ab.beta, 0.0, epsilon = 1e-12);
        let ab = clarke_transform(ThreePhaseSample::new(1.0, -0.5, -0.5));
        assert_abs_diff_eq!(ab.alpha, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(ab.beta, 1.224_744_9, epsilon = 1e-7);
        let ab = clarke_transform(ThreePhaseSample::new(0.0, 0.0, 0.0));
        assert_eq!((ab.alpha, ab.beta), (0.0, 0.0));
    }

    #[test]
    fn printed_clarke_second_row_is_scaled_wrong() {
        let theta = 0.7;
        let out = apply_matrix(&PRINTED_CLARKE_MATRIX, ThreePhaseSample::balanced(1.0, theta));
        assert_abs_diff_eq!(out[0], GAMMA * theta.cos(), epsilon = 1e-12);
        assert_abs_diff_eq!(out[1], theta.sin() / (2.0 * GAMMA), epsilon = 1e-12);
        let ab = clarke_transform(ThreePhaseSample::balanced(1.0, theta));
        assert_abs_diff_eq!(ab.beta, GAMMA * theta.sin(), epsilon = 1e-12);
    }

    #[test]
    fn printed_park_swaps_components() {
        let (theta, theta_hat) = (0.4, 1.3);
        let delta = theta_hat - theta;
        let out = apply_matrix(&printed_park_matrix(theta_hat), ThreePhaseSample::balanced(1.0, theta));
        assert_abs_diff_eq!(out[0], GAMMA * delta.sin(), epsilon = 1e-12);
        assert_abs_diff_eq!(out[1], GAMMA * delta.cos(), epsilon = 1e-12);
    }

    #[test]
    fn park_examples() {
        let theta = 0.9;
        let s = ThreePhaseSample::balanced(1.0, theta);
        let dq = park_transform(s, theta);
        assert_abs_diff_eq!(dq.d, 1.224_744_9, epsilon = 1e-7);
        assert_abs_diff_eq!(dq.q, 0.0, epsilon = 1e-12);
        let dq = park_transform(s, theta + PI / 2.0);
        assert_abs_diff_eq!(dq.d, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(dq.q, 1.224_744_9, epsilon = 1e-7);
        let dq = park_transform(s, theta + PI);
        assert_abs_diff_eq!(dq.d, -1.224_744_9, epsilon = 1e-7);
        assert_abs_diff_eq!(dq.q, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn angle_recovery_and_wrap() {
        assert_eq!(angle_from_alpha_beta(AlphaBetaVoltage::new(GAMMA, 0.0)).unwrap(), 0.0);
        assert_abs_diff_eq!(
            angle_from_alpha_beta(AlphaBetaVoltage::new(0.0, GAMMA)).unwrap(),
            PI / 2.0
        );
        assert_eq!(angle_from_alpha_beta(AlphaBetaVoltage::new(-GAMMA, 0.0)).unwrap(), -PI);
        assert_eq!(
            angle_from_alpha_beta(AlphaBetaVoltage::new(0.0, 0.0)),
            Err(Error::IllDefinedAngle)
        );
        assert_eq!(wrap_angle(PI), -PI);
        assert_eq!(wrap_angle(-PI), -PI);
        assert_abs_diff_eq!(wrap_angle(3.0 * PI + 0.1), -PI + 0.1, epsilon = 1e-12);
    }

    #[test]
    fn frequency_profile_examples() {
        let (w, e) = frequency_profile_eval(&FrequencyProfile::Constant { omega0: W50 }, 3.0);
        assert_abs_diff_eq!(w, 314.159_265, epsilon = 1e-6);
        assert_eq!(e, 0.0);

        let p = FrequencyProfile::low_inertia_disturbance();
        let (w, eta) = p.eval(1.0);
        assert_eq!(w, W50);
        assert_abs_diff_eq!(eta, -8.0 * PI * 0.2, epsilon = 1e-12);

        let (w, _) = p.eval(2.0);
        let direct = W50 - 8.0 * PI * (-0.1f64).exp() * 0.2f64.sin();
        assert_abs_diff_eq!(w, direct, epsilon = 1e-12);
        assert_abs_diff_eq!(w, 314.159_265 - 4.517_95, epsilon = 1e-5);
    }

    #[test]
    fn damped_eta_is_derivative_of_omega() {
        let p = FrequencyProfile::low_inertia_disturbance();
        for &t in &[1.5, 3.0, 6.54, 20.0] {
            let h = 1e-5;
            let fd = (p.eval(t + h).0 - p.eval(t - h).0) / (2.0 * h);
            assert_abs_diff_eq!(p.eval(t).1, fd, epsilon = 1e-6);
        }
        assert_abs_diff_eq!(p.eta_bound(), 1.6 * PI, epsilon = 1e-12);
    }

    #[test]
    fn tabulated_rocof_integrates_exactly() {
        let table = RocofTable::new(W50, 0.5, vec![0.0, 2.0, -1.0, 0.0], 2.0).unwrap();
        let p = FrequencyProfile::TabulatedRocof(table);
        // eta = 4t on [0, 0.5] -> omega = W50 + 2 t^2, phase = W50 t + 2 t^3 / 3
        let (w, e) = p.eval(0.25);
        assert_abs_diff_eq!(w, W50 + 2.0 * 0.0625, epsilon = 1e-12);
        assert_abs_diff_eq!(e, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(
            p.phase_integral(0.25),
            W50 * 0.25 + 2.0 * 0.25f64.powi(3) / 3.0,
            epsilon = 1e-10
        );
        let omega = |t: f64| p.eval(t).0;
        let oracle = adaptive_simpson(&omega, 0.0, 0.5, 1e-13)
            + adaptive_simpson(&omega, 0.5, 1.0, 1e-13)
            + adaptive_simpson(&omega, 1.0, 1.5, 1e-13)
            + adaptive_simpson(&omega, 1.5, 2.3, 1e-13);
        assert_abs_diff_eq!(p.phase_integral(2.3), oracle, epsilon = 1e-9);
        assert!(RocofTable::new(W50, 0.5, vec![0.0, 3.0], 2.0).is_err());
    }

    #[test]
    fn phase_steps_accumulate_right_continuously() {
        let g = GridModel::new(
            1.0,
            0.1,
            FrequencyProfile::Constant { omega0: W50 },
            vec![PhaseStep { time: 0.1, jump: 0.2 }, PhaseStep { time: 0.2, jump: -0.5 }],
        )
        .unwrap();
        assert_abs_diff_eq!(g.angle(0.05), 0.1 + W50 * 0.05);
        assert_abs_diff_eq!(g.angle(0.1), 0.1 + W50 * 0.1 + 0.2);
        assert_abs_diff_eq!(g.angle(0.3), 0.1 + W50 * 0.3 - 0.3, epsilon = 1e-12);
        let bad = GridModel::new(
            1.0,
            0.0,
            FrequencyProfile::Constant { omega0: W50 },
            vec![PhaseStep { time: 0.2, jump: 0.1 }, PhaseStep { time: 0.2, jump: 0.1 }],
        );
        assert!(bad.is_err());
        assert!(GridModel::constant(0.0, W50).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn transforms_match_their_identities(
                v in 0.1f64..400.0,
                phi in -10.0f64..10.0,
                t in 0.0f64..2.0,
                theta_hat in -20.0f64..20.0,
            ) {
                let g = GridModel::new(v, phi, FrequencyProfile::low_inertia_disturbance(), vec![]).unwrap();
                let s = three_phase_voltage(&g, t);
                let theta = g.angle(t);
                prop_assert!(s.sum().abs() <= 1e-12 * v);

                let ab = clarke_transform(s);
                prop_assert!((ab.alpha - GAMMA * v * theta.cos()).abs() <= 1e-12 * v);
                prop_assert!((ab.beta - GAMMA * v * theta.sin()).abs() <= 1e-12 * v);
                prop_assert!((ab.norm() - GAMMA * v).abs() <= 1e-12 * v);

                let recovered = angle_from_alpha_beta(ab).unwrap();
                prop_assert!(wrap_angle(recovered - wrap_angle(theta)).abs() <= 1e-9);

                let dq = park_transform(s, theta_hat);
                let delta = theta_hat - theta;
                prop_assert!((dq.d - GAMMA * v * delta.cos()).abs() <= 1e-12 * v);
                prop_assert!((dq.q - GAMMA * v * delta.sin()).abs() <= 1e-12 * v);
                prop_assert!((dq.norm() - GAMMA * v).abs() <= 1e-12 * v);
            }

            #[test]
            fn wrap_lands_in_half_open_interval(x in -1e4f64..1e4) {
                let w = wrap_angle(x);
                prop_assert!((-PI..PI).contains(&w));
                prop_assert!(((x - w) / TAU - ((x - w) / TAU).round()).abs() < 1e-9);
            }
        }
    }
}
