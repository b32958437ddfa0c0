//! Log-log rate fits.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ordinary least squares line through `(x, y)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

pub fn linear_regression(xs: &[f64], ys: &[f64]) -> Result<LineFit> {
    if xs.len() != ys.len() {
        return Err(Error::FitUndefined("x and y lengths differ".into()));
    }
    if xs.len() < 2 {
        return Err(Error::FitUndefined("need at least two points".into()));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(Error::FitUndefined("non-finite data".into()));
    }
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(Error::FitUndefined("degenerate design: all abscissae equal".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = xs.iter().zip(ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let r2 = if syy > 0.0 { (1.0 - sse / syy).clamp(0.0, 1.0) } else { 1.0 };
    Ok(LineFit { slope, intercept, r2 })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RateModel {
    /// `value ~ C n^slope`
    PurePower,
    /// `value ~ C n^slope log n`
    PowerTimesLog,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub model: RateModel,
}

/// Fits a convergence rate to `(n, value)` pairs.
pub fn fit_rate(points: &[(f64, f64)], model: RateModel) -> Result<RateFit> {
    if points.len() < 3 {
        return Err(Error::FitUndefined(format!("need at least 3 points, got {}", points.len())));
    }
    if let Some(&(n, v)) = points.iter().find(|&&(n, v)| !(v > 0.0) || !(n > 0.0)) {
        return Err(Error::FitUndefined(format!("non-positive data point ({n}, {v})")));
    }
    let xs: Vec<f64> = points.iter().map(|&(n, _)| n.ln()).collect();
    let ys: Vec<f64> = match model {
        RateModel::PurePower => points.iter().map(|&(_, v)| v.ln()).collect(),
        RateModel::PowerTimesLog => {
            if points.iter().any(|&(n, _)| !(n > 1.0)) {
                return Err(Error::FitUndefined("log n must be positive for the n^p log n model".into()));
            }
            points.iter().map(|&(n, v)| (v / n.ln()).ln()).collect()
        }
    };
    let line = linear_regression(&xs, &ys)?;
    Ok(RateFit { slope: line.slope, intercept: line.intercept, r2: line.r2, model })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Vec<f64> {
        (6..=12).map(|k| 2f64.powi(k)).collect()
    }

    #[test]
    fn exact_power_law() {
        let pts: Vec<_> = grid().into_iter().map(|n| (n, 7.0 / n)).collect();
        let f = fit_rate(&pts, RateModel::PurePower).unwrap();
        assert!((f.slope + 1.0).abs() < 1e-12);
        assert!((f.intercept - 7f64.ln()).abs() < 1e-12);
        assert!((f.r2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn power_times_log() {
        let pts: Vec<_> = grid().into_iter().map(|n| (n, 3.0 * n.ln() / n)).collect();
        let f = fit_rate(&pts, RateModel::PowerTimesLog).unwrap();
        assert!((f.slope + 1.0).abs() < 1e-12);
        // The log factor flattens a pure-power fit.
        let g = fit_rate(&pts, RateModel::PurePower).unwrap();
        assert!(g.slope > -1.0 && g.slope < -0.8, "{g:?}");
    }

    #[test]
    fn degenerate_inputs() {
        assert!(matches!(
            fit_rate(&[(4.0, 1.0), (4.0, 2.0), (4.0, 3.0)], RateModel::PurePower),
            Err(Error::FitUndefined(_))
        ));
        assert!(fit_rate(&[(2.0, 1.0), (4.0, 0.0), (8.0, 1.0)], RateModel::PurePower).is_err());
        assert!(fit_rate(&[(2.0, 1.0), (4.0, 1.0)], RateModel::PurePower).is_err());
    }
}
