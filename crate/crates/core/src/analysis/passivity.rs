use crate::analysis::EnergyKind;
use crate::dynamics::Trajectory;
use crate::error::{invalid, Result};

/// `|H(t_end) - H(t_0) - integral y (u_hat - omega) dt|`.
///
/// `kind` selects the storage function and its port output: `H1` pairs with
/// `y1`, `H2` with `y2`. Phase steps are not part of the balance, so the
/// zero-length interval across each step is skipped on both sides. The
/// supply is integrated with composite Simpson on each run of rows between
/// steps (spacing may vary), falling back to trapezoids on two-row runs.
pub fn passivity_residual(traj: &Trajectory, kind: EnergyKind) -> Result<f64> {
    let y = match kind {
        EnergyKind::H1 => &traj.y1,
        EnergyKind::H2 => &traj.y2,
        other => return Err(invalid("kind", format!("{other} is not a storage function"))),
    };
    let h = traj
        .energy(kind)
        .ok_or_else(|| invalid("kind", format!("{kind} was not recorded")))?;
    let supply: Vec<f64> = (0..traj.len())
        .map(|i| y[i] * (traj.u_hat[i] - traj.omega[i]))
        .collect();
    let mut stored = 0.0;
    let mut supplied = 0.0;
    let mut start = 0;
    for end in 1..=traj.len() {
        if end == traj.len() || traj.times[end] == traj.times[end - 1] {
            stored += h[end - 1] - h[start];
            supplied += simpson(&traj.times[start..end], &supply[start..end]);
            start = end;
        }
    }
    Ok((stored - supplied).abs())
}

/// Composite Simpson over strictly increasing, possibly uneven abscissae.
/// An odd interval count closes with the quadratic through the last three
/// points.
pub(crate) fn simpson(t: &[f64], f: &[f64]) -> f64 {
    let n = t.len();
    match n {
        0 | 1 => return 0.0,
        2 => return 0.5 * (t[1] - t[0]) * (f[0] + f[1]),
        _ => {}
    }
    let mut sum = 0.0;
    let mut i = 0;
    while i + 2 < n {
        let (h0, h1) = (t[i + 1] - t[i], t[i + 2] - t[i + 1]);
        sum += (h0 + h1) / 6.0
            * ((2.0 - h1 / h0) * f[i] + (h0 + h1) * (h0 + h1) / (h0 * h1) * f[i + 1] + (2.0 - h0 / h1) * f[i + 2]);
        i += 2;
    }
    if i + 1 < n {
        let (h0, h1) = (t[i] - t[i - 1], t[i + 1] - t[i]);
        sum += h1 / (6.0 * h0 * (h0 + h1))
            * (-h1 * h1 * f[i - 1]
                + (3.0 * h0 * h0 + 4.0 * h0 * h1 + h1 * h1) * f[i]
                + (3.0 * h0 * h0 + 2.0 * h0 * h1) * f[i + 1]);
    }
    sum
}

/// Largest one-row increase of the recorded energy `kind`, ignoring the
/// jumps across phase steps. Non-positive means monotone.
pub fn max_energy_increase(traj: &Trajectory, kind: EnergyKind) -> Result<f64> {
    let e = traj
        .energy(kind)
        .ok_or_else(|| invalid("kind", format!("{kind} was not recorded")))?;
    let mut worst = f64::NEG_INFINITY;
    for i in 0..e.len().saturating_sub(1) {
        if traj.is_event_gap(i) {
            continue;
        }
        worst = worst.max(e[i + 1] - e[i]);
    }
    Ok(worst)
}

/// Whether `kind` never grows by more than `tol` from one row to the next.
pub fn is_non_increasing(traj: &Trajectory, kind: EnergyKind, tol: f64) -> Result<bool> {
    Ok(max_energy_increase(traj, kind)? <= tol)
}
