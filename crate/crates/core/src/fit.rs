//! Least-squares power-law fits.

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerFit {
    pub slope: f64,
    pub intercept: f64,
}

/// Fits `log y = slope · log x + intercept`.
pub fn loglog_fit(xs: &[f64], ys: &[f64]) -> Result<PowerFit> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(LabError::InvalidInput("need at least two (x, y) pairs".into()));
    }
    if xs.iter().chain(ys).any(|&v| !(v > 0.0 && v.is_finite())) {
        return Err(LabError::InvalidInput("log-log fit needs positive finite data".into()));
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let m = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / m;
    let my = ly.iter().sum::<f64>() / m;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(LabError::InvalidInput("abscissae are all equal".into()));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    Ok(PowerFit {
        slope,
        intercept: my - slope * mx,
    })
}

pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> Result<f64> {
    loglog_fit(xs, ys).map(|f| f.slope)
}
