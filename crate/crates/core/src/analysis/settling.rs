use serde::{Deserialize, Serialize};

use crate::dynamics::Trajectory;
use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Channel {
    /// `delta` wrapped to `[-pi, pi)`.
    Delta,
    /// `omega_hat - omega`.
    OmegaErr,
}

/// First sample time after which `|values| <= band` holds through the last
/// sample. `None` if the final sample is outside the band.
pub fn settling_time_of(times: &[f64], values: &[f64], band: f64) -> Result<Option<f64>> {
    if !(band > 0.0) {
        return Err(invalid("band", "must be positive"));
    }
    if times.len() != values.len() {
        return Err(invalid("values", "length differs from times"));
    }
    match values.iter().rposition(|v| !(v.abs() <= band)) {
        None => Ok(times.first().copied()),
        Some(i) if i + 1 == values.len() => Ok(None),
        Some(i) => Ok(Some(times[i + 1])),
    }
}

pub fn settling_time(traj: &Trajectory, channel: Channel, band: f64) -> Result<Option<f64>> {
    let values = match channel {
        Channel::Delta => traj.delta_wrapped(),
        Channel::OmegaErr => traj.omega_err(),
    };
    settling_time_of(&traj.times, &values, band)
}
