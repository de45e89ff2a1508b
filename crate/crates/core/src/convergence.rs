//! Least-squares convergence orders from step-halving studies.

use std::fmt;

/// Residuals at or below this level are treated as rounding noise and left
/// out of order fits.
pub const RESIDUAL_FLOOR: f64 = 1e-13;

/// A study whose residuals never exceed this is reported as exact. Rounding
/// accumulated over 10⁴ steps sits a little above [`RESIDUAL_FLOOR`], and
/// the central-difference residuals amplify it by 1/Δt.
pub const EXACT_TIER: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FittedOrder {
    /// Every residual is at or below [`EXACT_TIER`].
    Exact,
    /// Slope of log(residual) against log(Δt) over the rows above the floor.
    Slope(f64),
    /// Only one row above the floor; no slope can be fitted.
    Undetermined,
}

impl FittedOrder {
    pub fn slope(self) -> Option<f64> {
        match self {
            FittedOrder::Slope(p) => Some(p),
            _ => None,
        }
    }

    /// True for `Exact`, or a slope within `tol` of `target`.
    pub fn matches(self, target: f64, tol: f64) -> bool {
        match self {
            FittedOrder::Exact => true,
            FittedOrder::Slope(p) => (p - target).abs() <= tol,
            FittedOrder::Undetermined => false,
        }
    }

    /// True for `Exact`, or a slope of at least `min`.
    pub fn at_least(self, min: f64) -> bool {
        match self {
            FittedOrder::Exact => true,
            FittedOrder::Slope(p) => p >= min,
            FittedOrder::Undetermined => false,
        }
    }
}

impl fmt::Display for FittedOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FittedOrder::Exact => f.write_str("exact"),
            FittedOrder::Slope(p) => write!(f, "{p:.4}"),
            FittedOrder::Undetermined => f.write_str("undetermined"),
        }
    }
}

/// Fits residual ≈ C·Δt^p by least squares in log-log space, skipping rows
/// whose residual is at or below [`RESIDUAL_FLOOR`].
pub fn fitted_order(dts: &[f64], residuals: &[f64]) -> FittedOrder {
    assert_eq!(dts.len(), residuals.len(), "one residual per step size");
    if residuals.iter().all(|&r| r <= EXACT_TIER) {
        return FittedOrder::Exact;
    }
    let pts: Vec<(f64, f64)> = dts
        .iter()
        .zip(residuals)
        .filter(|(_, &r)| r > RESIDUAL_FLOOR)
        .map(|(&h, &r)| (h.ln(), r.ln()))
        .collect();
    match pts.len() {
        0 => FittedOrder::Exact,
        1 => FittedOrder::Undetermined,
        n => {
            let n = n as f64;
            let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
            let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
            let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
            let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
            FittedOrder::Slope(sxy / sxx)
        }
    }
}

/// True when each value is at most `1 + noise` times its predecessor, or
/// both are within [`EXACT_TIER`].
pub fn is_monotone_decreasing(values: &[f64], noise: f64) -> bool {
    values
        .windows(2)
        .all(|w| w[1] <= w[0] * (1.0 + noise) || (w[0] <= EXACT_TIER && w[1] <= EXACT_TIER))
}
