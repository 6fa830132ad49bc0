//! Least-squares scaling fits of regret against the horizon.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

pub const MIN_POINTS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScalingModel {
    /// `R = a`; the coefficient is the slope of `R` on `T`, tested against 0.
    Constant,
    /// `R = a + b ln T`.
    LogT,
    /// `R = a + b √T`.
    SqrtT,
    /// `ln R = a + b ln T`; the exponent is `b`.
    PowerLaw,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FitError {
    #[error("need at least {MIN_POINTS} points, got {0}")]
    InsufficientPoints(usize),
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub model: ScalingModel,
    pub intercept: f64,
    pub coefficient: f64,
    /// Power-law exponent (`None` for other models).
    pub exponent: Option<f64>,
    /// 95% confidence interval of `coefficient`.
    pub ci: (f64, f64),
    /// Residual sum of squares, in regret units except for the power law,
    /// where it is in log units.
    pub residual_ss: f64,
    /// Whether regret was shifted by +1 before taking logs.
    pub shifted: bool,
}

struct Ols {
    intercept: f64,
    slope: f64,
    slope_se: f64,
    rss: f64,
}

fn ols(x: &[f64], y: &[f64]) -> Result<Ols, FitError> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(FitError::DegenerateFit(
            "all regressor values are equal".into(),
        ));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - intercept - slope * a).powi(2))
        .sum();
    let slope_se = (rss / (n - 2.0) / sxx).sqrt();
    Ok(Ols {
        intercept,
        slope,
        slope_se,
        rss,
    })
}

fn t_quantile(df: f64) -> f64 {
    StudentsT::new(0.0, 1.0, df)
        .expect("positive degrees of freedom")
        .inverse_cdf(0.975)
}

/// Fits `model` to `(T, mean regret)` points.
pub fn fit_scaling(points: &[(f64, f64)], model: ScalingModel) -> Result<ScalingFit, FitError> {
    if points.len() < MIN_POINTS {
        return Err(FitError::InsufficientPoints(points.len()));
    }
    if points.iter().any(|&(t, r)| !(t > 0.0) || !r.is_finite()) {
        return Err(FitError::DegenerateFit(
            "horizons must be positive and regrets finite".into(),
        ));
    }
    let ts: Vec<f64> = points.iter().map(|p| p.0).collect();
    let rs: Vec<f64> = points.iter().map(|p| p.1).collect();
    let mut shifted = false;
    let (x, y): (Vec<f64>, Vec<f64>) = match model {
        ScalingModel::Constant => (ts.clone(), rs.clone()),
        ScalingModel::LogT => (ts.iter().map(|t| t.ln()).collect(), rs.clone()),
        ScalingModel::SqrtT => (ts.iter().map(|t| t.sqrt()).collect(), rs.clone()),
        ScalingModel::PowerLaw => {
            shifted = rs.iter().any(|&r| r <= 0.0);
            let shift = if shifted { 1.0 } else { 0.0 };
            if rs.iter().any(|&r| r + shift <= 0.0) {
                return Err(FitError::DegenerateFit(
                    "regret ≤ −1 cannot be log-transformed".into(),
                ));
            }
            (
                ts.iter().map(|t| t.ln()).collect(),
                rs.iter().map(|r| (r + shift).ln()).collect(),
            )
        }
    };
    let fit = ols(&x, &y)?;
    let half = t_quantile(points.len() as f64 - 2.0) * fit.slope_se;
    let (intercept, residual_ss) = if model == ScalingModel::Constant {
        let mean = rs.iter().sum::<f64>() / rs.len() as f64;
        (mean, rs.iter().map(|r| (r - mean).powi(2)).sum())
    } else {
        (fit.intercept, fit.rss)
    };
    Ok(ScalingFit {
        model,
        intercept,
        coefficient: fit.slope,
        exponent: (model == ScalingModel::PowerLaw).then_some(fit.slope),
        ci: (fit.slope - half, fit.slope + half),
        residual_ss,
        shifted,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const TS: [f64; 4] = [1000.0, 4000.0, 16000.0, 64000.0];

    #[test]
    fn exact_log_model() {
        let pts: Vec<(f64, f64)> = TS.iter().map(|&t| (t, 5.0 * t.ln())).collect();
        let fit = fit_scaling(&pts, ScalingModel::LogT).unwrap();
        assert!((fit.coefficient - 5.0).abs() < 0.01);
        assert!(fit.residual_ss < 1e-18);
        assert!(fit.intercept.abs() < 1e-9);
    }

    #[test]
    fn exact_sqrt_power_law() {
        let pts: Vec<(f64, f64)> = TS.iter().map(|&t| (t, 2.0 * t.sqrt())).collect();
        let fit = fit_scaling(&pts, ScalingModel::PowerLaw).unwrap();
        assert!((fit.exponent.unwrap() - 0.5).abs() < 1e-12);
        assert!((fit.intercept - 2f64.ln()).abs() < 1e-9);
        assert!(!fit.shifted);
    }

    #[test]
    fn constant_slope_ci_covers_zero_for_noise() {
        let pts = [(1000.0, 3.0), (2000.0, 3.2), (4000.0, 2.9), (8000.0, 3.1)];
        let fit = fit_scaling(&pts, ScalingModel::Constant).unwrap();
        assert!(fit.ci.0 < 0.0 && fit.ci.1 > 0.0);
        assert!((fit.intercept - 3.05).abs() < 1e-12);
    }

    #[test]
    fn nonpositive_regret_is_shifted() {
        let pts = [(1000.0, 0.0), (2000.0, 1.0), (4000.0, 2.0), (8000.0, 3.0)];
        assert!(fit_scaling(&pts, ScalingModel::PowerLaw).unwrap().shifted);
        let bad = [(1000.0, -2.0), (2000.0, 1.0), (4000.0, 2.0), (8000.0, 3.0)];
        assert!(matches!(
            fit_scaling(&bad, ScalingModel::PowerLaw),
            Err(FitError::DegenerateFit(_))
        ));
    }

    #[test]
    fn needs_four_points() {
        let pts = [(1.0, 1.0), (2.0, 2.0), (3.0, 3.0)];
        assert_eq!(
            fit_scaling(&pts, ScalingModel::LogT),
            Err(FitError::InsufficientPoints(3))
        );
    }

    #[test]
    fn t_quantile_two_dof() {
        assert!((t_quantile(2.0) - 4.302_652_729_7).abs() < 1e-6);
    }
}
