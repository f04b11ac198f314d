//! Ultimate bound of the linear ATAN error dynamics under bounded RoCoF.
//!
//! With `x = (delta, omega_err / k_i)` the dynamics read
//! `d/dt delta = -k_p delta + omega_err`, `d/dt omega_err = -k_i delta - eta`,
//! and `W = 1/2 delta^2 + omega_err^2 / (2 k_i) - eps delta omega_err / k_i`
//! is the quadratic form `x' P x`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundVariant {
    /// `P`, `Q` and the radius in their published form.
    AsPrinted,
    /// `P`, `Q` induced by `W` in `x`, composed through sublevel sets.
    DerivedKhalil,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UltimateBound {
    pub variant: BoundVariant,
    pub epsilon_star: f64,
    /// Upper end of the feasible window `(0, epsilon_max)`.
    pub epsilon_max: f64,
    pub bound: f64,
    pub lambda_min_p: f64,
    pub lambda_max_p: f64,
    pub lambda_min_q: f64,
    /// Whether the bound keeps `delta` inside `(-pi, pi)`, where the linear
    /// model is exact.
    pub within_interval: bool,
}

/// Eigenvalues `(min, max)` of `[[a, b], [b, c]]`.
pub fn sym2_eigen(a: f64, b: f64, c: f64) -> (f64, f64) {
    let m = 0.5 * (a + c);
    let r = (0.5 * (a - c)).hypot(b);
    (m - r, m + r)
}

#[derive(Debug, Clone, Copy)]
struct Forms {
    p: [f64; 3],
    q: [f64; 3],
}

fn forms(variant: BoundVariant, k_p: f64, k_i: f64, eps: f64) -> Forms {
    match variant {
        BoundVariant::AsPrinted => Forms {
            p: [1.0, -0.5 * eps, k_i],
            q: [k_p - eps * k_i, -0.5 * eps * k_p, eps],
        },
        BoundVariant::DerivedKhalil => Forms {
            p: [0.5, -0.5 * eps, 0.5 * k_i],
            q: [k_p - eps, -0.5 * eps * k_p, eps * k_i],
        },
    }
}

/// Largest `eps` keeping both forms positive definite.
pub fn epsilon_window(k_p: f64, k_i: f64, variant: BoundVariant) -> f64 {
    match variant {
        BoundVariant::AsPrinted => (2.0 * k_i.sqrt()).min(k_p / (k_i + 0.25 * k_p * k_p)),
        BoundVariant::DerivedKhalil => k_i.sqrt().min(k_p * k_i / (k_i + 0.25 * k_p * k_p)),
    }
}

/// Bound per unit `eta_max` at a given `eps`, with the eigenvalues used.
/// Returns `None` where a form is not positive definite.
pub fn bound_objective(k_p: f64, k_i: f64, eps: f64, variant: BoundVariant) -> Option<(f64, [f64; 3])> {
    let f = forms(variant, k_p, k_i, eps);
    let (p_min, p_max) = sym2_eigen(f.p[0], f.p[1], f.p[2]);
    let (q_min, _) = sym2_eigen(f.q[0], f.q[1], f.q[2]);
    if !(p_min > 0.0 && q_min > 0.0) {
        return None;
    }
    let value = match variant {
        BoundVariant::AsPrinted => ((eps * eps + k_i) * p_max).sqrt() / (k_i * p_min * q_min),
        BoundVariant::DerivedKhalil => (eps * eps + k_i * k_i).sqrt() / (k_i * q_min) * (p_max / p_min).sqrt(),
    };
    Some((value, [p_min, p_max, q_min]))
}

const GRID_POINTS: usize = 10_000;
/// The log grid spans `eps_max * [1e-10, 1)`.
const GRID_DECADES: f64 = 10.0;

/// Minimizes the bound over the feasible `eps` window: a log-spaced grid of
/// 10^4 points, then golden-section search between the neighbours of the
/// best grid point.
pub fn ultimate_bound(k_p: f64, k_i: f64, eta_max: f64, variant: BoundVariant) -> Result<UltimateBound> {
    if !(k_p > 0.0) || !k_p.is_finite() {
        return Err(invalid("k_p", "must be positive"));
    }
    if !(k_i > 0.0) || !k_i.is_finite() {
        return Err(invalid("k_i", "must be positive"));
    }
    if !(eta_max >= 0.0) || !eta_max.is_finite() {
        return Err(invalid("eta_max", "must be non-negative"));
    }
    let eps_max = epsilon_window(k_p, k_i, variant);
    if !(eps_max > 0.0) {
        return Err(Error::Infeasible {
            constraint: "no eps > 0 makes P and Q positive definite".into(),
        });
    }
    let objective = |e: f64| bound_objective(k_p, k_i, e, variant).map_or(f64::INFINITY, |(v, _)| v);

    let grid: Vec<f64> = (0..GRID_POINTS)
        .map(|k| eps_max * 10f64.powf(-GRID_DECADES * (1.0 - k as f64 / GRID_POINTS as f64)))
        .collect();
    let (best, _) = grid
        .iter()
        .enumerate()
        .map(|(k, &e)| (k, objective(e)))
        .fold((0, f64::INFINITY), |acc, cur| if cur.1 < acc.1 { cur } else { acc });
    let lo = if best == 0 { 0.0 } else { grid[best - 1] };
    let hi = if best + 1 < GRID_POINTS {
        grid[best + 1]
    } else {
        eps_max
    };
    let eps = golden_section(objective, lo, hi, 1e-13);
    let eps = if objective(eps) <= objective(grid[best]) {
        eps
    } else {
        grid[best]
    };

    let (value, [lambda_min_p, lambda_max_p, lambda_min_q]) =
        bound_objective(k_p, k_i, eps, variant).ok_or_else(|| Error::Infeasible {
            constraint: format!("forms not positive definite at eps = {eps}"),
        })?;
    let bound = value * eta_max;
    Ok(UltimateBound {
        variant,
        epsilon_star: eps,
        epsilon_max: eps_max,
        bound,
        lambda_min_p,
        lambda_max_p,
        lambda_min_q,
        within_interval: bound < std::f64::consts::PI,
    })
}

fn golden_section(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, rel_tol: f64) -> f64 {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a) > rel_tol * (a.abs() + b.abs()) {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    /// Dense linear grid over the open window.
    fn brute_force(k_p: f64, k_i: f64, variant: BoundVariant, n: usize) -> f64 {
        let eps_max = epsilon_window(k_p, k_i, variant);
        (1..n)
            .filter_map(|k| bound_objective(k_p, k_i, eps_max * k as f64 / n as f64, variant))
            .map(|(v, _)| v)
            .fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn zero_disturbance_gives_zero_bound() {
        for variant in [BoundVariant::AsPrinted, BoundVariant::DerivedKhalil] {
            let b = ultimate_bound(200.0, 1000.0, 0.0, variant).unwrap();
            assert_eq!(b.bound, 0.0);
            assert!(b.epsilon_star > 0.0 && b.epsilon_star < b.epsilon_max);
        }
    }

    #[test]
    fn feasibility_windows() {
        // printed Q: k_p - eps k_i > 0 and det > 0
        assert_abs_diff_eq!(
            epsilon_window(200.0, 1000.0, BoundVariant::AsPrinted),
            200.0 / 11_000.0,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            epsilon_window(200.0, 1000.0, BoundVariant::DerivedKhalil),
            200.0 * 1000.0 / 11_000.0,
            epsilon = 1e-12
        );
        // window edges are where a form loses definiteness
        for variant in [BoundVariant::AsPrinted, BoundVariant::DerivedKhalil] {
            let e = epsilon_window(200.0, 1000.0, variant);
            assert!(bound_objective(200.0, 1000.0, e * (1.0 - 1e-9), variant).is_some());
            assert!(bound_objective(200.0, 1000.0, e * (1.0 + 1e-9), variant).is_none());
        }
        // the Q condition alone decides the derived window: 2x / (1 + x^2) <= 1
        for (kp, ki) in [(1e3, 1.0), (2.0, 1.0), (10.0, 1e4)] {
            let q_edge = kp * ki / (ki + 0.25 * kp * kp);
            assert_eq!(epsilon_window(kp, ki, BoundVariant::DerivedKhalil), q_edge);
        }
    }

    #[test]
    fn optimizer_matches_dense_grid() {
        let eta = 1.6 * PI;
        for variant in [BoundVariant::AsPrinted, BoundVariant::DerivedKhalil] {
            let b = ultimate_bound(200.0, 1000.0, eta, variant).unwrap();
            let reference = brute_force(200.0, 1000.0, variant, 1_000_000) * eta;
            assert!(b.bound <= reference * (1.0 + 1e-9));
            assert!(
                ((b.bound - reference) / reference).abs() < 1e-6,
                "{variant:?}: {} vs {reference}",
                b.bound
            );
        }
    }

    #[test]
    fn derived_bound_is_frozen() {
        let b = ultimate_bound(200.0, 1000.0, 1.6 * PI, BoundVariant::DerivedKhalil).unwrap();
        assert!(b.within_interval);
        assert!(b.lambda_min_p > 0.0 && b.lambda_min_q > 0.0);
        // linear in eta
        let b2 = ultimate_bound(200.0, 1000.0, 3.2 * PI, BoundVariant::DerivedKhalil).unwrap();
        assert_abs_diff_eq!(b2.bound, 2.0 * b.bound, epsilon = 1e-12 * b.bound);
    }

    #[test]
    fn sym2_matches_characteristic_polynomial() {
        let (lo, hi) = sym2_eigen(2.0, 1.0, 2.0);
        assert_abs_diff_eq!(lo, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(hi, 3.0, epsilon = 1e-15);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(ultimate_bound(0.0, 1000.0, 1.0, BoundVariant::AsPrinted).is_err());
        assert!(ultimate_bound(200.0, 1000.0, -1.0, BoundVariant::AsPrinted).is_err());
    }
}
