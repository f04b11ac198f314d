//! Inner estimates of the region of attraction of `(h pi, omega)` and their
//! Monte-Carlo validation.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{simulate_closed_loop, InitialError, IntegratorConfig, Representation};
use crate::error::{invalid, Result};
use crate::pll::{Family, PllConfig};
use crate::signals::{GridModel, GAMMA};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RoaKind {
    /// Largest sublevel set of the Lyapunov function inside the basin.
    DerivedSublevel,
    /// Closed-form inequalities in their published form.
    AsPrinted,
}

/// Inner estimate around `(h pi, omega)`.
///
/// `k_i` is the integral gain of the polar dynamics:
/// `d/dt omega_hat = -k_i gamma_v sin(delta)` for SRF and
/// `d/dt omega_hat = -k_i delta` for ATAN.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoaEstimate {
    pub family: Family,
    pub h: i64,
    pub kind: RoaKind,
    /// Threshold `c*` of the defining inequality.
    pub level: f64,
    pub gamma_v: f64,
    pub k_i: f64,
    pub omega: f64,
}

/// Builds the estimate. Returns an error for odd `h` or non-positive parameters.
pub fn roa_inner_estimate(
    family: Family,
    h: i64,
    k_i: f64,
    gamma_v: f64,
    kind: RoaKind,
    omega: f64,
) -> Result<RoaEstimate> {
    if h % 2 != 0 {
        return Err(invalid("h", format!("equilibrium index must be even, got {h}")));
    }
    if !(k_i > 0.0) || !k_i.is_finite() {
        return Err(invalid("k_i", "must be positive"));
    }
    if !(gamma_v > 0.0) || !gamma_v.is_finite() {
        return Err(invalid("gamma_v", "must be positive"));
    }
    if !omega.is_finite() {
        return Err(invalid("omega", "must be finite"));
    }
    let level = match (family, kind) {
        // value of W1h at the neighbouring saddles
        (Family::Srf, RoaKind::DerivedSublevel) => 2.0 * gamma_v,
        // W2h on the edge of the interval where y2 = delta - h pi
        (Family::Atan, RoaKind::DerivedSublevel) => 0.5 * PI * PI,
        (Family::Srf, RoaKind::AsPrinted) => k_i / gamma_v,
        (Family::Atan, RoaKind::AsPrinted) => 4.0 * PI * PI * k_i,
    };
    Ok(RoaEstimate {
        family,
        h,
        kind,
        level,
        gamma_v,
        k_i,
        omega,
    })
}

impl RoaEstimate {
    /// Estimate matching an estimator configuration with set-point `(gamma_v, 0)`.
    pub fn for_config(cfg: &PllConfig, h: i64, gamma_v: f64, kind: RoaKind, omega: f64) -> Result<Self> {
        check_config(cfg, gamma_v)?;
        roa_inner_estimate(cfg.family, h, cfg.polar_integral_gain(gamma_v), gamma_v, kind, omega)
    }

    fn center(&self) -> f64 {
        self.h as f64 * PI
    }

    /// Left-hand side of the defining inequality (`value < level`).
    pub fn value(&self, delta: f64, omega_hat: f64) -> f64 {
        let e = delta - self.center();
        let w = omega_hat - self.omega;
        match (self.family, self.kind) {
            (Family::Srf, RoaKind::DerivedSublevel) => self.gamma_v * (1.0 - e.cos()) + w * w / (2.0 * self.k_i),
            (Family::Atan, RoaKind::DerivedSublevel) => 0.5 * e * e + w * w / (2.0 * self.k_i),
            (Family::Srf, RoaKind::AsPrinted) => (1.0 - e.cos()) + w * w / (2.0 * self.gamma_v),
            (Family::Atan, RoaKind::AsPrinted) => 4.0 * e * e + w * w,
        }
    }

    pub fn contains(&self, delta: f64, omega_hat: f64) -> bool {
        let inside = self.value(delta, omega_hat) < self.level;
        match (self.family, self.kind) {
            // connected component around the centre
            (Family::Srf, RoaKind::DerivedSublevel) => inside && (delta - self.center()).abs() < PI,
            _ => inside,
        }
    }

    /// Box `[delta_lo, delta_hi] x [omega_lo, omega_hi]` enclosing the set.
    /// For the periodic printed SRF inequality the `delta` range is one period.
    pub fn bounding_box(&self) -> ([f64; 2], [f64; 2]) {
        let c = self.center();
        let (dd, dw) = match (self.family, self.kind) {
            (Family::Srf, RoaKind::DerivedSublevel) => (PI, (2.0 * self.k_i * self.level).sqrt()),
            (Family::Atan, RoaKind::DerivedSublevel) => {
                ((2.0 * self.level).sqrt(), (2.0 * self.k_i * self.level).sqrt())
            }
            (Family::Srf, RoaKind::AsPrinted) => (PI, (2.0 * self.gamma_v * self.level).sqrt()),
            (Family::Atan, RoaKind::AsPrinted) => (0.5 * self.level.sqrt(), self.level.sqrt()),
        };
        ([c - dd, c + dd], [self.omega - dw, self.omega + dw])
    }

    /// Half-width of the set along `omega_hat`.
    pub fn omega_extent(&self) -> f64 {
        let (_, w) = self.bounding_box();
        0.5 * (w[1] - w[0])
    }
}

fn check_config(cfg: &PllConfig, gamma_v: f64) -> Result<()> {
    cfg.validate_for(gamma_v)?;
    if cfg.reference.q.abs() > 1e-12 * gamma_v || cfg.reference.d <= 0.0 {
        return Err(invalid("reference", "estimates assume the set-point (gamma V, 0)"));
    }
    Ok(())
}

/// Outcome of a Monte-Carlo validation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoaValidation {
    pub samples: usize,
    pub converged: usize,
    pub fraction: f64,
    /// Initial `(delta, omega_hat)` of samples that missed the equilibrium.
    pub failures: Vec<(f64, f64)>,
}

/// Simulation horizon used by [`roa_validate`].
pub fn default_validation_integrator() -> IntegratorConfig {
    IntegratorConfig::new(1e-4, 5.0)
}

/// Draws `n` samples uniformly from the estimate (rejection on its bounding
/// box), simulates each and returns the fraction that ends within
/// `1e-3` rad and `1e-2` rad/s of `(h pi, omega)`.
///
/// Sample `i` uses its own ChaCha8 stream, so the result does not depend on
/// the number of worker threads.
pub fn roa_validate(est: &RoaEstimate, cfg: &PllConfig, n: usize, seed: u64) -> Result<RoaValidation> {
    roa_validate_with(est, cfg, n, seed, &default_validation_integrator())
}

pub fn roa_validate_with(
    est: &RoaEstimate,
    cfg: &PllConfig,
    n: usize,
    seed: u64,
    icfg: &IntegratorConfig,
) -> Result<RoaValidation> {
    if n == 0 {
        return Err(invalid("n", "at least one sample is required"));
    }
    let points = roa_sample(est, n, seed);
    roa_validate_points(est, cfg, &points, icfg)
}

/// Uniform samples inside the estimate.
pub fn roa_sample(est: &RoaEstimate, n: usize, seed: u64) -> Vec<(f64, f64)> {
    let (bd, bw) = est.bounding_box();
    (0..n)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            loop {
                let d = rng.gen_range(bd[0]..bd[1]);
                let w = rng.gen_range(bw[0]..bw[1]);
                if est.contains(d, w) {
                    break (d, w);
                }
            }
        })
        .collect()
}

/// Validates explicit initial conditions `(delta, omega_hat)`.
pub fn roa_validate_points(
    est: &RoaEstimate,
    cfg: &PllConfig,
    points: &[(f64, f64)],
    icfg: &IntegratorConfig,
) -> Result<RoaValidation> {
    if cfg.family != est.family {
        return Err(invalid("family", "estimate and configuration differ"));
    }
    check_config(cfg, est.gamma_v)?;
    let k = cfg.polar_integral_gain(est.gamma_v);
    if ((k - est.k_i) / est.k_i).abs() > 1e-9 {
        return Err(invalid(
            "k_i",
            format!("estimate uses {}, configuration {}", est.k_i, k),
        ));
    }
    let grid = GridModel::constant(est.gamma_v / GAMMA, est.omega)?;
    let target = est.h as f64 * PI;
    let outcomes: Vec<Result<bool>> = points
        .par_iter()
        .map(|&(d, w)| {
            let x0 = InitialError::new(d, w).to_state(&grid);
            let tr = simulate_closed_loop(&grid, cfg, Representation::Polar, icfg, x0)?;
            let last = tr.len() - 1;
            Ok((tr.delta[last] - target).abs() < 1e-3 && (tr.omega_hat[last] - est.omega).abs() < 1e-2)
        })
        .collect();
    let mut failures = Vec::new();
    for (p, ok) in points.iter().zip(outcomes) {
        if !ok? {
            failures.push(*p);
        }
    }
    let converged = points.len() - failures.len();
    Ok(RoaValidation {
        samples: points.len(),
        converged,
        fraction: converged as f64 / points.len() as f64,
        failures,
    })
}
