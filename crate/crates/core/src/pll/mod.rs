//! Estimator laws of the generalized SRF and ATAN phase-locked loops.
//!
//! Both families drive the frequency estimate with a PI law on a passive
//! output `y` of the dq error dynamics `d/dt v_hat = J2 (u_hat - omega) v_hat`:
//!
//! ```text
//! u_hat            = -k_p * phi(y) + omega_hat
//! d/dt omega_hat   = -k_i * y
//! ```
//!
//! with `y = y1 = -ref' J2 v_hat` (SRF family) or
//! `y = y2 = wrap(angle(v_hat) - angle(ref))` (ATAN family).

mod phi;

pub use phi::{phi_eval, PhiFunction, PiecewiseLinear};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::signals::{wrap_angle, DqVoltage};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    /// Synchronous-reference-frame family, driven by `y1`.
    Srf,
    /// Arctangent family, driven by `y2`.
    Atan,
}

/// Gains, sector nonlinearity and set-point of one estimator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PllConfig {
    pub family: Family,
    pub k_p: f64,
    /// Integral gain multiplying the family output `y`.
    pub k_i: f64,
    pub phi: PhiFunction,
    pub reference: DqVoltage,
}

impl PllConfig {
    pub fn new(family: Family, k_p: f64, k_i: f64, phi: PhiFunction, reference: DqVoltage) -> Result<Self> {
        let cfg = Self {
            family,
            k_p,
            k_i,
            phi,
            reference,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Generalized SRF loop with set-point `(gamma_v, 0)`.
    pub fn gsrf(k_p: f64, k_i: f64, phi: PhiFunction, gamma_v: f64) -> Result<Self> {
        Self::new(Family::Srf, k_p, k_i, phi, DqVoltage::new(gamma_v, 0.0))
    }

    /// Conventional SRF loop `u_hat = -k_p V_q + omega_hat`, `d/dt omega_hat = -k_i V_q`.
    ///
    /// Since `y1 = gamma_v * V_q` for the set-point `(gamma_v, 0)`, this is the
    /// generalized loop with `phi = id / gamma_v` and integral gain `k_i / gamma_v`.
    pub fn srf(k_p: f64, k_i: f64, gamma_v: f64) -> Result<Self> {
        if !(gamma_v > 0.0) {
            return Err(invalid("gamma_v", "must be positive"));
        }
        Self::gsrf(
            k_p,
            k_i / gamma_v,
            PhiFunction::ScaledIdentity { k: 1.0 / gamma_v },
            gamma_v,
        )
    }

    /// Generalized ATAN loop with set-point `(gamma_v, 0)`.
    pub fn gatan(k_p: f64, k_i: f64, phi: PhiFunction, gamma_v: f64) -> Result<Self> {
        Self::new(Family::Atan, k_p, k_i, phi, DqVoltage::new(gamma_v, 0.0))
    }

    /// Conventional ATAN loop (`phi = id`, set-point `(gamma_v, 0)`).
    pub fn atan(k_p: f64, k_i: f64, gamma_v: f64) -> Result<Self> {
        Self::gatan(k_p, k_i, PhiFunction::Identity, gamma_v)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.k_p > 0.0) || !self.k_p.is_finite() {
            return Err(invalid("k_p", format!("must be positive, got {}", self.k_p)));
        }
        if !(self.k_i > 0.0) || !self.k_i.is_finite() {
            return Err(invalid("k_i", format!("must be positive, got {}", self.k_i)));
        }
        self.phi.validate()?;
        let r = self.reference.norm();
        if !(r > 0.0) || !r.is_finite() {
            return Err(invalid("reference", "must be a finite non-zero vector"));
        }
        Ok(())
    }

    /// Checks that the set-point lies on the circle of radius `gamma_v`.
    pub fn validate_for(&self, gamma_v: f64) -> Result<()> {
        self.validate()?;
        let r = self.reference.norm();
        if (r - gamma_v).abs() > 1e-9 * gamma_v {
            return Err(invalid(
                "reference",
                format!("norm {r} differs from gamma*V = {gamma_v}"),
            ));
        }
        Ok(())
    }

    /// Angle of the set-point, i.e. the targeted `delta`.
    pub fn reference_angle(&self) -> f64 {
        wrap_angle(self.reference.q.atan2(self.reference.d))
    }

    /// Family output `y` for a measured dq voltage.
    pub fn output(&self, v_hat: DqVoltage) -> Result<f64> {
        match self.family {
            Family::Srf => Ok(output_y1(v_hat, self.reference)),
            Family::Atan => output_y2(v_hat, self.reference),
        }
    }

    /// Family output as a function of `delta` on the circle of radius `gamma_v`.
    pub fn output_polar(&self, delta: f64, gamma_v: f64) -> f64 {
        match self.family {
            Family::Srf => {
                let (s, c) = delta.sin_cos();
                gamma_v * (self.reference.d * s - self.reference.q * c)
            }
            Family::Atan => wrap_angle(delta - self.reference_angle()),
        }
    }

    /// Integral gain of the polar dynamics: `d/dt omega_hat = -K gamma_v sin(delta)`
    /// for SRF with set-point `(gamma_v, 0)`, `d/dt omega_hat = -K delta` for ATAN.
    pub fn polar_integral_gain(&self, gamma_v: f64) -> f64 {
        match self.family {
            Family::Srf => self.k_i * gamma_v,
            Family::Atan => self.k_i,
        }
    }

    /// `d y / d delta` away from the ATAN discontinuity.
    pub fn output_polar_slope(&self, delta: f64, gamma_v: f64) -> f64 {
        match self.family {
            Family::Srf => {
                let (s, c) = delta.sin_cos();
                gamma_v * (self.reference.d * c + self.reference.q * s)
            }
            Family::Atan => 1.0,
        }
    }
}

/// Estimator state: angle and frequency estimates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PllState {
    pub theta_hat: f64,
    pub omega_hat: f64,
}

/// `y1 = -ref' J2 v_hat = ref_d * V_q - ref_q * V_d`.
pub fn output_y1(v_hat: DqVoltage, reference: DqVoltage) -> f64 {
    -reference.dot(&v_hat.rotate_quarter())
}

/// `y2 = atan2(V_q, V_d) - atan2(ref_q, ref_d)`, wrapped to `[-pi, pi)`.
pub fn output_y2(v_hat: DqVoltage, reference: DqVoltage) -> Result<f64> {
    Ok(wrap_angle(v_hat.angle()? - reference.angle()?))
}

/// `u_hat = -k_p phi(y) + omega_hat`.
pub fn control_u(cfg: &PllConfig, state: &PllState, v_hat: DqVoltage) -> Result<f64> {
    Ok(control_from_output(cfg, cfg.output(v_hat)?, state.omega_hat))
}

pub(crate) fn control_from_output(cfg: &PllConfig, y: f64, omega_hat: f64) -> f64 {
    -cfg.k_p * cfg.phi.eval(y) + omega_hat
}

/// Closed-loop vector field in dq coordinates:
/// `(J2 (u_hat - omega) v_hat, -k_i y)`.
pub fn rhs_dq(cfg: &PllConfig, v_hat: DqVoltage, omega_hat: f64, omega: f64) -> Result<(DqVoltage, f64)> {
    let y = cfg.output(v_hat)?;
    let u = control_from_output(cfg, y, omega_hat);
    Ok((v_hat.rotate_quarter().scale(u - omega), -cfg.k_i * y))
}

/// Time derivatives of the polar error state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PolarRate {
    pub delta_dot: f64,
    pub omega_hat_dot: f64,
    /// `d/dt (omega_hat - omega) = omega_hat_dot - eta`.
    pub omega_err_dot: f64,
}

/// Closed-loop vector field in polar coordinates `(delta, omega_hat)`,
/// for a source of frequency `omega` and RoCoF `eta`.
pub fn rhs_polar(cfg: &PllConfig, gamma_v: f64, delta: f64, omega_hat: f64, omega: f64, eta: f64) -> PolarRate {
    let y = cfg.output_polar(delta, gamma_v);
    let delta_dot = control_from_output(cfg, y, omega_hat) - omega;
    let omega_hat_dot = -cfg.k_i * y;
    PolarRate {
        delta_dot,
        omega_hat_dot,
        omega_err_dot: omega_hat_dot - eta,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signals::GAMMA;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    const W50: f64 = 100.0 * PI;

    fn on_circle(angle: f64) -> DqVoltage {
        DqVoltage::from_polar(GAMMA, angle)
    }

    #[test]
    fn y1_examples() {
        let r = DqVoltage::new(GAMMA, 0.0);
        assert_eq!(output_y1(r, r), 0.0);
        assert_abs_diff_eq!(output_y1(DqVoltage::new(0.0, GAMMA), r), 1.5, epsilon = 1e-12);
        assert_abs_diff_eq!(output_y1(r, DqVoltage::new(0.0, GAMMA)), -1.5, epsilon = 1e-12);
    }

    #[test]
    fn y2_examples() {
        let r = DqVoltage::new(GAMMA, 0.0);
        assert_eq!(output_y2(r, r).unwrap(), 0.0);
        assert_abs_diff_eq!(output_y2(DqVoltage::new(0.0, GAMMA), r).unwrap(), PI / 2.0);
        let y = output_y2(on_circle(-3.0 * PI / 4.0), on_circle(PI / 2.0)).unwrap();
        assert_abs_diff_eq!(y, 3.0 * PI / 4.0, epsilon = 1e-12);
        assert!(output_y2(DqVoltage::new(0.0, 0.0), r).is_err());
        assert!(output_y2(r, DqVoltage::new(0.0, 0.0)).is_err());
    }

    #[test]
    fn control_examples() {
        let r = DqVoltage::new(GAMMA, 0.0);
        let atan = PllConfig::gatan(200.0, 1000.0, PhiFunction::Identity, GAMMA).unwrap();
        let state = PllState {
            theta_hat: 0.0,
            omega_hat: 314.159,
        };
        assert_eq!(control_u(&atan, &state, r).unwrap(), 314.159);

        let state = PllState {
            theta_hat: 0.0,
            omega_hat: W50,
        };
        let u = control_u(&atan, &state, on_circle(PI / 2.0)).unwrap();
        assert_abs_diff_eq!(u, 0.0, epsilon = 1e-9);

        let gsrf = PllConfig::gsrf(200.0, 1000.0, PhiFunction::Identity, GAMMA).unwrap();
        let state = PllState {
            theta_hat: 0.0,
            omega_hat: 0.0,
        };
        let u = control_u(&gsrf, &state, DqVoltage::new(0.0, GAMMA)).unwrap();
        assert_abs_diff_eq!(u, -300.0, epsilon = 1e-9);
    }

    #[test]
    fn rhs_dq_examples() {
        let gsrf = PllConfig::gsrf(200.0, 1000.0, PhiFunction::Identity, GAMMA).unwrap();
        let (dv, dw) = rhs_dq(&gsrf, DqVoltage::new(GAMMA, 0.0), W50, W50).unwrap();
        assert_eq!((dv.d, dv.q, dw), (0.0, 0.0, 0.0));

        let (dv, dw) = rhs_dq(&gsrf, DqVoltage::new(-GAMMA, 0.0), W50, W50).unwrap();
        assert_abs_diff_eq!(dv.d, 0.0);
        assert_abs_diff_eq!(dv.q, 0.0);
        assert_abs_diff_eq!(dw, 0.0);

        let (dv, dw) = rhs_dq(&gsrf, DqVoltage::new(0.0, GAMMA), W50, W50).unwrap();
        assert_abs_diff_eq!(dv.d, 300.0 * GAMMA, epsilon = 1e-9);
        assert_abs_diff_eq!(dv.q, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(dw, -1500.0, epsilon = 1e-9);
    }

    #[test]
    fn rhs_polar_examples() {
        let srf = PllConfig::srf(200.0, 1000.0, GAMMA).unwrap();
        let r = rhs_polar(&srf, GAMMA, 0.0, W50, W50, 0.0);
        assert_eq!((r.delta_dot, r.omega_hat_dot), (0.0, 0.0));

        let r = rhs_polar(&srf, GAMMA, PI / 2.0, W50, W50, 0.0);
        assert_abs_diff_eq!(r.delta_dot, -244.948_97, epsilon = 1e-5);
        assert_abs_diff_eq!(r.omega_hat_dot, -1_224.744_9, epsilon = 1e-4);

        let atan = PllConfig::atan(200.0, 1000.0, GAMMA).unwrap();
        let r = rhs_polar(&atan, GAMMA, 1.0, W50, W50, 0.0);
        assert_abs_diff_eq!(r.delta_dot, -200.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.omega_err_dot, -1000.0, epsilon = 1e-12);

        let r = rhs_polar(&atan, GAMMA, 1.0, W50, W50, 2.5);
        assert_abs_diff_eq!(r.omega_err_dot, -1002.5, epsilon = 1e-12);
    }

    #[test]
    fn polar_equilibria() {
        let srf = PllConfig::srf(200.0, 1000.0, GAMMA).unwrap();
        let atan = PllConfig::atan(200.0, 1000.0, GAMMA).unwrap();
        for h in -4i32..=4 {
            let delta = f64::from(h) * PI;
            let r = rhs_polar(&srf, GAMMA, delta, W50, W50, 0.0);
            assert!(r.delta_dot.abs() < 1e-9 && r.omega_hat_dot.abs() < 1e-9, "srf h={h}");
            let r = rhs_polar(&atan, GAMMA, delta, W50, W50, 0.0);
            if h % 2 == 0 {
                assert!(r.delta_dot.abs() < 1e-9 && r.omega_hat_dot.abs() < 1e-9, "atan h={h}");
            } else {
                assert!(r.delta_dot.abs() > 1.0, "atan h={h} is not an equilibrium");
            }
        }
    }

    #[test]
    fn invalid_configs_are_rejected() {
        assert!(PllConfig::atan(-1.0, 1000.0, GAMMA).is_err());
        assert!(PllConfig::atan(200.0, 0.0, GAMMA).is_err());
        let cfg = PllConfig::new(Family::Srf, 1.0, 1.0, PhiFunction::Identity, DqVoltage::new(1.0, 0.0)).unwrap();
        assert!(cfg.validate_for(GAMMA).is_err());
        assert!(cfg.validate_for(1.0).is_ok());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn gsrf_specializes_to_conventional_srf(
            v in 0.2f64..5.0, delta in -10.0f64..10.0, omega_hat in -500.0f64..500.0,
            k_p in 1.0f64..3000.0, k_i in 1.0f64..1e4,
        ) {
            let gv = GAMMA * v;
            let v_hat = DqVoltage::from_polar(gv, delta);
            let state = PllState { theta_hat: 0.0, omega_hat };
            // generalized loop with phi = id / (gamma V): same proportional path
            let g = PllConfig::gsrf(k_p, k_i, PhiFunction::ScaledIdentity { k: 1.0 / gv }, gv).unwrap();
            let u = control_u(&g, &state, v_hat).unwrap();
            let u_conv = -k_p * v_hat.q + omega_hat;
            prop_assert!((u - u_conv).abs() <= 1e-12 * (1.0 + u_conv.abs()));
            // integral path matches once the gain is referred to V_q
            let c = PllConfig::srf(k_p, k_i, gv).unwrap();
            let (_, dw) = rhs_dq(&c, v_hat, omega_hat, 0.0).unwrap();
            let dw_conv = -k_i * v_hat.q;
            prop_assert!((dw - dw_conv).abs() <= 1e-12 * (1.0 + dw_conv.abs()));
            let u = control_u(&c, &state, v_hat).unwrap();
            prop_assert!((u - u_conv).abs() <= 1e-12 * (1.0 + u_conv.abs()));
        }

        #[test]
        fn gatan_specializes_to_conventional_atan(
            v in 0.2f64..5.0, delta in -3.1f64..3.1, omega_hat in -500.0f64..500.0,
            k_p in 1.0f64..3000.0, k_i in 1.0f64..1e4,
        ) {
            let gv = GAMMA * v;
            let v_hat = DqVoltage::from_polar(gv, delta);
            let cfg = PllConfig::gatan(k_p, k_i, PhiFunction::Identity, gv).unwrap();
            let state = PllState { theta_hat: 0.0, omega_hat };
            let a = v_hat.q.atan2(v_hat.d);
            let u = control_u(&cfg, &state, v_hat).unwrap();
            prop_assert!((u - (-k_p * a + omega_hat)).abs() <= 1e-12 * (1.0 + u.abs()));
            let (_, dw) = rhs_dq(&cfg, v_hat, omega_hat, 0.0).unwrap();
            prop_assert!((dw + k_i * a).abs() <= 1e-12 * (1.0 + dw.abs()));
        }

        #[test]
        fn polar_and_dq_fields_agree(
            family in prop_oneof![Just(Family::Srf), Just(Family::Atan)],
            delta in -3.1f64..3.1, omega_hat in 250.0f64..380.0,
            ref_angle in -0.5f64..0.5,
        ) {
            let cfg = PllConfig::new(
                family, 200.0, 1000.0, PhiFunction::Saturation { slope: 3.0, limit: 2.0 },
                DqVoltage::from_polar(GAMMA, ref_angle),
            ).unwrap();
            // keep away from the ATAN discontinuity
            prop_assume!(family == Family::Srf || wrap_angle(delta - ref_angle).abs() < PI - 1e-6);
            let v_hat = DqVoltage::from_polar(GAMMA, delta);
            let (dv, dw) = rhs_dq(&cfg, v_hat, omega_hat, W50).unwrap();
            let induced = (v_hat.d * dv.q - v_hat.q * dv.d) / (GAMMA * GAMMA);
            let p = rhs_polar(&cfg, GAMMA, delta, omega_hat, W50, 0.0);
            prop_assert!((induced - p.delta_dot).abs() <= 1e-10 * (1.0 + p.delta_dot.abs()));
            prop_assert!((dw - p.omega_hat_dot).abs() <= 1e-10 * (1.0 + dw.abs()));
        }
    }
}
