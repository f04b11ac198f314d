use std::f64::consts::PI;

use crate::error::{invalid, Error, Result};

/// Checkpoints used to detect that `delta` left `[-pi, pi)`.
const EXIT_SAMPLES: usize = 1024;

/// Closed-form solution of the ATAN error dynamics inside `[-pi, pi)`:
///
/// ```text
/// d/dt delta     = -k_p delta + omega_err
/// d/dt omega_err = -k_i delta
/// ```
///
/// With `s = -k_p / 2` and `q^2 = s^2 - k_i`,
/// `exp(A t) = exp(s t) (C I + S (A - s I))` where `(C, S)` is
/// `(cosh qt, sinh(qt)/q)`, `(cos |q|t, sin(|q|t)/|q|)` or `(1, t)`.
/// Returns [`Error::IntervalExit`] if `delta` leaves `[-pi, pi)` at any of
/// 1024 evenly spaced checkpoints in `[0, t]`.
pub fn atan_linear_solution(k_p: f64, k_i: f64, x0: (f64, f64), t: f64) -> Result<(f64, f64)> {
    if !(k_p > 0.0) || !(k_i > 0.0) || !k_p.is_finite() || !k_i.is_finite() {
        return Err(invalid("gains", "k_p and k_i must be positive"));
    }
    if !(t >= 0.0) || !t.is_finite() {
        return Err(invalid("t", "must be non-negative"));
    }
    for j in 0..=EXIT_SAMPLES {
        let tj = t * j as f64 / EXIT_SAMPLES as f64;
        let (d, _) = propagate(k_p, k_i, x0, tj);
        if !(-PI..PI).contains(&d) {
            return Err(Error::IntervalExit { time: tj });
        }
    }
    Ok(propagate(k_p, k_i, x0, t))
}

fn propagate(k_p: f64, k_i: f64, (d0, w0): (f64, f64), t: f64) -> (f64, f64) {
    let s = -0.5 * k_p;
    let q2 = s * s - k_i;
    // (exp(st) C, exp(st) S)
    let (c, sn) = if q2 > 0.0 {
        let q = q2.sqrt();
        let slow = ((s + q) * t).exp();
        let fast = ((s - q) * t).exp();
        let sinh = if q * t < 0.5 {
            fast * (2.0 * q * t).exp_m1() / (2.0 * q)
        } else {
            (slow - fast) / (2.0 * q)
        };
        (0.5 * (slow + fast), sinh)
    } else if q2 < 0.0 {
        let m = (-q2).sqrt();
        let e = (s * t).exp();
        (e * (m * t).cos(), e * (m * t).sin() / m)
    } else {
        let e = (s * t).exp();
        (e, e * t)
    };
    // A - sI = [[-k_p/2, 1], [-k_i, k_p/2]]
    let m00 = -0.5 * k_p;
    let m11 = 0.5 * k_p;
    (c * d0 + sn * (m00 * d0 + w0), c * w0 + sn * (-k_i * d0 + m11 * w0))
}
