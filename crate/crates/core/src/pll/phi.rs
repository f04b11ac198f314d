use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Piecewise-linear map through validated breakpoints; the outermost
/// segments are extended linearly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<(f64, f64)>", into = "Vec<(f64, f64)>")]
pub struct PiecewiseLinear {
    points: Vec<(f64, f64)>,
}

impl PiecewiseLinear {
    /// Builds the map and checks the sector condition `s * phi(s) > 0` for `s != 0`.
    ///
    /// The breakpoints must be strictly increasing in `s` and contain the origin.
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.len() < 2 {
            return Err(invalid("phi.points", "at least two breakpoints are required"));
        }
        if points.iter().any(|(s, p)| !s.is_finite() || !p.is_finite()) {
            return Err(invalid("phi.points", "breakpoints must be finite"));
        }
        if points.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(invalid("phi.points", "breakpoints must be strictly increasing in s"));
        }
        if !points.iter().any(|&(s, p)| s == 0.0 && p == 0.0) {
            return Err(invalid("phi.points", "breakpoints must include the origin (0, 0)"));
        }
        for &(s, p) in &points {
            if s != 0.0 && s * p <= 0.0 {
                return Err(invalid(
                    "phi.points",
                    format!("sector condition violated at breakpoint ({s}, {p})"),
                ));
            }
        }
        // Interior segments join same-sign values (or the origin), so only the
        // extrapolated tails can leave the sector.
        let n = points.len();
        let left = slope(points[0], points[1]);
        let right = slope(points[n - 2], points[n - 1]);
        let left_ok = if points[0].0 == 0.0 { left > 0.0 } else { left >= 0.0 };
        let right_ok = if points[n - 1].0 == 0.0 {
            right > 0.0
        } else {
            right >= 0.0
        };
        if !left_ok || !right_ok {
            return Err(invalid(
                "phi.points",
                "extrapolated tail leaves the sector (negative end slope)",
            ));
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn eval(&self, s: f64) -> f64 {
        let p = &self.points;
        let n = p.len();
        let i = match p.iter().position(|&(x, _)| x > s) {
            Some(0) => 0,
            Some(i) => i - 1,
            None => n - 2,
        };
        let (a, b) = (p[i], p[i + 1]);
        a.1 + slope(a, b) * (s - a.0)
    }

    /// Left and right derivative at `s = 0`.
    fn slopes_at_origin(&self) -> (f64, f64) {
        let p = &self.points;
        let k = p.iter().position(|&(s, _)| s == 0.0).unwrap();
        let n = p.len();
        let right = if k + 1 < n {
            slope(p[k], p[k + 1])
        } else {
            slope(p[k - 1], p[k])
        };
        let left = if k > 0 { slope(p[k - 1], p[k]) } else { right };
        (left, right)
    }
}

impl TryFrom<Vec<(f64, f64)>> for PiecewiseLinear {
    type Error = crate::error::Error;

    fn try_from(points: Vec<(f64, f64)>) -> Result<Self> {
        Self::new(points)
    }
}

impl From<PiecewiseLinear> for Vec<(f64, f64)> {
    fn from(p: PiecewiseLinear) -> Self {
        p.points
    }
}

fn slope(a: (f64, f64), b: (f64, f64)) -> f64 {
    (b.1 - a.1) / (b.0 - a.0)
}

/// Sector nonlinearity shaping the proportional path: `phi(0) = 0` and
/// `s * phi(s) > 0` for every `s != 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PhiFunction {
    Identity,
    ScaledIdentity {
        k: f64,
    },
    PiecewiseLinear {
        points: PiecewiseLinear,
    },
    /// `clamp(slope * s, -limit, limit)`
    Saturation {
        slope: f64,
        limit: f64,
    },
}

impl PhiFunction {
    /// Gain-scheduled map used by the generalized ATAN estimator: slope 10 for
    /// `|s| <= 0.1`, slope 1 beyond, continuous at the knots.
    pub fn adaptive_default() -> Self {
        let points = vec![(-4.0, -4.9), (-0.1, -1.0), (0.0, 0.0), (0.1, 1.0), (4.0, 4.9)];
        Self::PiecewiseLinear {
            points: PiecewiseLinear::new(points).expect("default breakpoints satisfy the sector condition"),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Identity | Self::PiecewiseLinear { .. } => Ok(()),
            Self::ScaledIdentity { k } => {
                if *k > 0.0 && k.is_finite() {
                    Ok(())
                } else {
                    Err(invalid("phi.k", "scale must be positive"))
                }
            }
            Self::Saturation { slope, limit } => {
                if !(*slope > 0.0) || !slope.is_finite() {
                    Err(invalid("phi.slope", "must be positive"))
                } else if !(*limit > 0.0) || !limit.is_finite() {
                    Err(invalid("phi.limit", "must be positive"))
                } else {
                    Ok(())
                }
            }
        }
    }

    pub fn eval(&self, s: f64) -> f64 {
        match self {
            Self::Identity => s,
            Self::ScaledIdentity { k } => k * s,
            Self::PiecewiseLinear { points } => points.eval(s),
            Self::Saturation { slope, limit } => (slope * s).clamp(-limit, *limit),
        }
    }

    /// `phi'(0)`, or `None` when the map has a kink at the origin.
    pub fn derivative_at_zero(&self) -> Option<f64> {
        match self {
            Self::Identity => Some(1.0),
            Self::ScaledIdentity { k } => Some(*k),
            Self::Saturation { slope, .. } => Some(*slope),
            Self::PiecewiseLinear { points } => {
                let (l, r) = points.slopes_at_origin();
                ((l - r).abs() <= 1e-12 * l.abs().max(r.abs())).then_some(r)
            }
        }
    }
}

pub fn phi_eval(phi: &PhiFunction, s: f64) -> f64 {
    phi.eval(s)
}
