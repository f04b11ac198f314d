use num_complex::Complex64;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::pll::{rhs_polar, PllConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum EquilibriumClass {
    /// `det > 0`, `trace < 0`
    Stable,
    /// `det < 0`
    Saddle,
    /// `det > 0`, `trace > 0`
    Unstable,
    /// `det = 0` or `trace = 0`
    NonHyperbolic,
}

/// Linearization of the polar error dynamics at `(delta_eq, omega)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquilibriumReport {
    pub delta_eq: f64,
    /// Rows of the Jacobian in `(delta, omega_hat - omega)`.
    pub jacobian: [[f64; 2]; 2],
    pub eigenvalues: [Complex64; 2],
    pub class: EquilibriumClass,
}

impl EquilibriumReport {
    pub fn det(&self) -> f64 {
        let j = &self.jacobian;
        j[0][0] * j[1][1] - j[0][1] * j[1][0]
    }

    pub fn trace(&self) -> f64 {
        self.jacobian[0][0] + self.jacobian[1][1]
    }
}

/// Classifies the equilibrium `delta = delta_eq`, `omega_hat = omega`.
///
/// The Jacobian is `[[-k_p phi'(0) y'(delta), 1], [-k_i y'(delta), 0]]`, where
/// `y'` is the slope of the family output on the circle of radius `gamma_v`.
pub fn classify_equilibrium(cfg: &PllConfig, delta_eq: f64, gamma_v: f64) -> Result<EquilibriumReport> {
    cfg.validate()?;
    if !(gamma_v > 0.0) || !delta_eq.is_finite() {
        return Err(invalid("gamma_v", "must be positive with a finite delta_eq"));
    }
    let rate = rhs_polar(cfg, gamma_v, delta_eq, 0.0, 0.0, 0.0);
    let residual = rate.delta_dot.hypot(rate.omega_hat_dot);
    if residual > 1e-9 {
        return Err(Error::NotEquilibrium {
            delta: delta_eq,
            residual,
        });
    }
    let dphi = cfg
        .phi
        .derivative_at_zero()
        .ok_or_else(|| invalid("phi", "not differentiable at the origin"))?;
    let slope = cfg.output_polar_slope(delta_eq, gamma_v);
    let jacobian = [[-cfg.k_p * dphi * slope, 1.0], [-cfg.k_i * slope, 0.0]];
    let tr = jacobian[0][0];
    let det = -jacobian[1][0];
    let half = 0.5 * tr;
    let root = Complex64::new(half * half - det, 0.0).sqrt();
    let eigenvalues = [half - root, half + root];
    let class = if det < 0.0 {
        EquilibriumClass::Saddle
    } else if det > 0.0 && tr < 0.0 {
        EquilibriumClass::Stable
    } else if det > 0.0 && tr > 0.0 {
        EquilibriumClass::Unstable
    } else {
        EquilibriumClass::NonHyperbolic
    };
    Ok(EquilibriumReport {
        delta_eq,
        jacobian,
        eigenvalues,
        class,
    })
}
