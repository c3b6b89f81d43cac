//! Log-log slope fits for width sweeps.

use crate::error::{Error, Result};
use crate::math;
use alloc::vec::Vec;

/// Ordinary least squares on `(ln width, ln value)`.
#[derive(Debug, Clone)]
pub struct ScalingFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// The transformed points the fit was computed on.
    pub points: Vec<(f64, f64)>,
}

/// Fit `value ≈ exp(intercept) · width^slope` by OLS in log-log space.
/// Needs at least three points with strictly positive coordinates.
pub fn scaling_fit(points: &[(f64, f64)]) -> Result<ScalingFit> {
    if points.len() < 3 {
        return Err(Error::Empty { what: "scaling fit (need >= 3 points)" });
    }
    let mut logs = Vec::with_capacity(points.len());
    for &(w, v) in points {
        if w <= 0.0 {
            return Err(Error::NonPositiveValue { what: "width", value: w });
        }
        if v <= 0.0 {
            return Err(Error::NonPositiveValue { what: "value", value: v });
        }
        logs.push((math::ln(w), math::ln(v)));
    }
    let n = logs.len() as f64;
    let mean_x = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for &(x, y) in &logs {
        sxx += (x - mean_x) * (x - mean_x);
        sxy += (x - mean_x) * (y - mean_y);
        syy += (y - mean_y) * (y - mean_y);
    }
    if sxx == 0.0 {
        return Err(Error::NonPositiveValue { what: "width spread", value: 0.0 });
    }
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let r_squared = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    Ok(ScalingFit { slope, intercept, r_squared, points: logs })
}
