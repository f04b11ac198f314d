//! Storage and Lyapunov functions.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::pll::{output_y2, PllConfig};
use crate::signals::DqVoltage;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum EnergyKind {
    /// `1/2 |v_hat - ref|^2`
    H1,
    /// `1/2 y2^2`
    H2,
    /// `H1 + (omega_hat - omega)^2 / (2 k_i)`
    W1,
    /// `H2 + (omega_hat - omega)^2 / (2 k_i)`
    W2,
    /// `gamma V (1 - cos(delta - h pi)) + (omega_hat - omega)^2 / (2 k_i)`
    W1h { h: i64 },
    /// `1/2 (delta - h pi)^2 + (omega_hat - omega)^2 / (2 k_i)`
    W2h { h: i64 },
    /// `1/2 delta^2 + w^2 / (2 k_i) - eps delta w / k_i` with `w = omega_hat - omega`,
    /// defined for `delta` in `(-pi, pi)`.
    W2eps { eps: f64 },
}

impl fmt::Display for EnergyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::H1 => write!(f, "H1"),
            Self::H2 => write!(f, "H2"),
            Self::W1 => write!(f, "W1"),
            Self::W2 => write!(f, "W2"),
            Self::W1h { h } => write!(f, "W1h[{h}]"),
            Self::W2h { h } => write!(f, "W2h[{h}]"),
            Self::W2eps { eps } => write!(f, "W2eps[{eps}]"),
        }
    }
}

impl EnergyKind {
    pub fn validate(&self) -> Result<()> {
        match self {
            Self::W1h { h } | Self::W2h { h } if h % 2 != 0 => {
                Err(invalid("h", format!("equilibrium index must be even, got {h}")))
            }
            Self::W2eps { eps } if !(*eps > 0.0) || !eps.is_finite() => Err(invalid("eps", "must be positive")),
            _ => Ok(()),
        }
    }
}

/// Constants entering the energy formulas. `k_i` is the integral gain as it
/// appears in the chosen formula.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyParams {
    pub gamma_v: f64,
    pub k_i: f64,
    pub omega: f64,
    pub reference: DqVoltage,
}

impl EnergyParams {
    /// Set-point `(gamma_v, 0)`.
    pub fn new(gamma_v: f64, k_i: f64, omega: f64) -> Self {
        Self {
            gamma_v,
            k_i,
            omega,
            reference: DqVoltage::new(gamma_v, 0.0),
        }
    }

    /// Constants matching an estimator configuration. `W1h` carries the
    /// integral gain acting on `sin delta`, i.e. `k_i * gamma_v`.
    pub fn for_config(cfg: &PllConfig, kind: EnergyKind, gamma_v: f64, omega: f64) -> Self {
        let k_i = match kind {
            EnergyKind::W1h { .. } => cfg.k_i * gamma_v,
            _ => cfg.k_i,
        };
        Self {
            gamma_v,
            k_i,
            omega,
            reference: cfg.reference,
        }
    }
}

/// A state expressed in both coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyPoint {
    pub delta: f64,
    pub v_hat: DqVoltage,
    pub omega_hat: f64,
}

impl EnergyPoint {
    pub fn polar(delta: f64, omega_hat: f64, gamma_v: f64) -> Self {
        Self {
            delta,
            v_hat: DqVoltage::from_polar(gamma_v, delta),
            omega_hat,
        }
    }

    pub fn dq(v_hat: DqVoltage, omega_hat: f64) -> Result<Self> {
        Ok(Self {
            delta: v_hat.angle()?,
            v_hat,
            omega_hat,
        })
    }
}

pub fn energy_eval(kind: EnergyKind, point: &EnergyPoint, params: &EnergyParams) -> Result<f64> {
    kind.validate()?;
    let w = point.omega_hat - params.omega;
    let freq = || w * w / (2.0 * params.k_i);
    let h1 = || {
        let e = point.v_hat.sub(&params.reference);
        0.5 * e.dot(&e)
    };
    let h2 = || -> Result<f64> {
        let y = output_y2(point.v_hat, params.reference)?;
        Ok(0.5 * y * y)
    };
    Ok(match kind {
        EnergyKind::H1 => h1(),
        EnergyKind::H2 => h2()?,
        EnergyKind::W1 => h1() + freq(),
        EnergyKind::W2 => h2()? + freq(),
        EnergyKind::W1h { h } => params.gamma_v * (1.0 - (point.delta - h as f64 * PI).cos()) + freq(),
        EnergyKind::W2h { h } => {
            let e = point.delta - h as f64 * PI;
            0.5 * e * e + freq()
        }
        EnergyKind::W2eps { eps } => {
            let d = point.delta;
            if !(d > -PI && d < PI) {
                return Err(Error::Domain {
                    function: "W2eps".into(),
                    reason: format!("delta = {d} outside (-pi, pi)"),
                });
            }
            0.5 * d * d + freq() - eps * d * w / params.k_i
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signals::GAMMA;
    use approx::assert_abs_diff_eq;

    const W50: f64 = 100.0 * PI;

    fn params() -> EnergyParams {
        EnergyParams::new(GAMMA, 1000.0, W50)
    }

    #[test]
    fn examples() {
        let p = params();
        let at_ref = EnergyPoint::dq(DqVoltage::new(GAMMA, 0.0), W50).unwrap();
        assert_eq!(energy_eval(EnergyKind::H1, &at_ref, &p).unwrap(), 0.0);

        let antipode = EnergyPoint::dq(DqVoltage::new(-GAMMA, 0.0), W50).unwrap();
        assert_abs_diff_eq!(
            energy_eval(EnergyKind::H1, &antipode, &p).unwrap(),
            3.0,
            epsilon = 1e-12
        );

        let pt = EnergyPoint::polar(PI, W50, GAMMA);
        assert_abs_diff_eq!(
            energy_eval(EnergyKind::W2h { h: 0 }, &pt, &p).unwrap(),
            4.934_802_2,
            epsilon = 1e-7
        );
    }

    #[test]
    fn polar_and_dq_forms_agree() {
        let p = params();
        let pt = EnergyPoint::polar(0.8, W50 + 20.0, GAMMA);
        let w1 = energy_eval(EnergyKind::W1, &pt, &p).unwrap();
        // H1 on the circle is (gamma V)^2 (1 - cos delta)
        let expected = GAMMA * GAMMA * (1.0 - 0.8f64.cos()) + 400.0 / 2000.0;
        assert_abs_diff_eq!(w1, expected, epsilon = 1e-12);
        let w2 = energy_eval(EnergyKind::W2, &pt, &p).unwrap();
        let w2h = energy_eval(EnergyKind::W2h { h: 0 }, &pt, &p).unwrap();
        assert_abs_diff_eq!(w2, w2h, epsilon = 1e-12);
        // W2h is the unwrapped branch: shifted by 2 pi it differs from W2 unless h matches
        let shifted = EnergyPoint::polar(0.8 + 2.0 * PI, W50 + 20.0, GAMMA);
        let w2h2 = energy_eval(EnergyKind::W2h { h: 2 }, &shifted, &p).unwrap();
        assert_abs_diff_eq!(w2h2, w2h, epsilon = 1e-12);
    }

    #[test]
    fn w2eps_domain_and_value() {
        let p = params();
        let pt = EnergyPoint::polar(0.5, W50 + 10.0, GAMMA);
        let v = energy_eval(EnergyKind::W2eps { eps: 2.0 }, &pt, &p).unwrap();
        assert_abs_diff_eq!(v, 0.125 + 100.0 / 2000.0 - 2.0 * 0.5 * 10.0 / 1000.0, epsilon = 1e-12);
        let out = EnergyPoint::polar(PI, W50, GAMMA);
        assert!(matches!(
            energy_eval(EnergyKind::W2eps { eps: 2.0 }, &out, &p),
            Err(Error::Domain { .. })
        ));
    }

    #[test]
    fn odd_index_rejected() {
        let pt = EnergyPoint::polar(0.0, W50, GAMMA);
        assert!(energy_eval(EnergyKind::W1h { h: 1 }, &pt, &params()).is_err());
    }
}
