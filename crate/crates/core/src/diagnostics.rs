//! Norms, the boundedness-criterion exponent, and exponential rate fits.

use thiserror::Error;

use crate::grid::Field;

/// Default `ε` in the criterion exponent `κn/2 + ε`.
pub const DEFAULT_EPS: f64 = 0.5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiagnosticsError {
    #[error("L^p norm needs p >= 1, got {0}")]
    BadExponent(f64),
    #[error("eps must be > 0, got {0}")]
    NonPositiveEps(f64),
    #[error("embedding exponent undefined: r = {r} >= kappa n = {limit}")]
    EmbeddingUndefined { r: f64, limit: f64 },
    #[error("series has a non-positive value {value} at t = {t}")]
    NonPositiveValues { t: f64, value: f64 },
    #[error("need at least 10 points in the fit window, got {0}")]
    TooFewPoints(usize),
    #[error("window fraction must lie in (0, 1], got {0}")]
    BadWindow(f64),
}

/// Exponent of an `L^p` norm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Exponent {
    Finite(f64),
    Infinity,
}

/// Midpoint-rule `(Σ|u|^p h^n)^(1/p)`, or the max-abs for `p = ∞`.
pub fn lp_norm(field: &Field, p: Exponent) -> Result<f64, DiagnosticsError> {
    match p {
        Exponent::Infinity => Ok(field.values().iter().fold(0.0, |m, x| m.max(x.abs()))),
        Exponent::Finite(p) if p >= 1.0 && p.is_finite() => {
            let vol = field.grid().cell_volume();
            let sum: f64 = field.values().iter().map(|x| x.abs().powf(p)).sum();
            Ok((sum * vol).powf(1.0 / p))
        }
        Exponent::Finite(p) => Err(DiagnosticsError::BadExponent(p)),
    }
}

/// Criterion exponent `p* = κn/2 + ε` and elliptic embedding exponent
/// `q' = n r / (κn - r)` with `r = p*`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriterionExponent {
    pub p_star: f64,
    pub q_prime: f64,
}

pub fn criterion_exponent(
    n: usize,
    kappa: f64,
    eps: f64,
) -> Result<CriterionExponent, DiagnosticsError> {
    if !(eps > 0.0) {
        return Err(DiagnosticsError::NonPositiveEps(eps));
    }
    let n = n as f64;
    let p_star = kappa * n / 2.0 + eps;
    let limit = kappa * n;
    if p_star >= limit {
        return Err(DiagnosticsError::EmbeddingUndefined { r: p_star, limit });
    }
    Ok(CriterionExponent {
        p_star,
        q_prime: n * p_star / (limit - p_star),
    })
}

/// Result of a log-linear least-squares fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesFit {
    /// Slope of `ln(value)` against `t`; negative for decay.
    pub rate: f64,
    pub window: (f64, f64),
    /// Root-mean-square residual of the fit in log space.
    pub residual: f64,
    pub points: usize,
}

/// Fits `ln(value) = c + rate t` over the trailing `window_fraction` of the
/// series (by time span).
pub fn fit_exponential_decay(
    series: &[(f64, f64)],
    window_fraction: f64,
) -> Result<SeriesFit, DiagnosticsError> {
    if !(window_fraction > 0.0 && window_fraction <= 1.0) {
        return Err(DiagnosticsError::BadWindow(window_fraction));
    }
    let (Some(first), Some(last)) = (series.first(), series.last()) else {
        return Err(DiagnosticsError::TooFewPoints(0));
    };
    let t_start = last.0 - window_fraction * (last.0 - first.0);
    let window: Vec<(f64, f64)> = series
        .iter()
        .copied()
        .filter(|&(t, _)| t >= t_start - 1e-12 * t_start.abs().max(1.0))
        .collect();
    if window.len() < 10 {
        return Err(DiagnosticsError::TooFewPoints(window.len()));
    }
    if let Some(&(t, value)) = window.iter().find(|&&(_, v)| !(v > 0.0)) {
        return Err(DiagnosticsError::NonPositiveValues { t, value });
    }
    let m = window.len() as f64;
    let t_mean = window.iter().map(|p| p.0).sum::<f64>() / m;
    let y_mean = window.iter().map(|p| p.1.ln()).sum::<f64>() / m;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for &(t, v) in &window {
        sxy += (t - t_mean) * (v.ln() - y_mean);
        sxx += (t - t_mean) * (t - t_mean);
    }
    let rate = sxy / sxx;
    let intercept = y_mean - rate * t_mean;
    let residual = (window
        .iter()
        .map(|&(t, v)| (v.ln() - intercept - rate * t).powi(2))
        .sum::<f64>()
        / m)
        .sqrt();
    Ok(SeriesFit {
        rate,
        window: (window[0].0, window[window.len() - 1].0),
        residual,
        points: window.len(),
    })
}
