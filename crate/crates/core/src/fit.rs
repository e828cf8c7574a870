//! Least-squares fit of `ln(error) = slope * ln(eps) + intercept`.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogLogFit {
    pub slope: f64,
    pub intercept: f64,
    /// root-mean-square residual in log space
    pub residual: f64,
}

/// `None` if fewer than two points or any coordinate is not strictly positive.
pub fn fit_loglog(eps: &[f64], err: &[f64]) -> Option<LogLogFit> {
    if eps.len() != err.len() || eps.len() < 2 {
        return None;
    }
    if eps.iter().chain(err).any(|v| !(v.is_finite() && *v > 0.0)) {
        return None;
    }
    let xs: Vec<f64> = eps.iter().map(|v| v.ln()).collect();
    let ys: Vec<f64> = err.iter().map(|v| v.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let r = y - (slope * x + intercept);
            r * r
        })
        .sum();
    Some(LogLogFit {
        slope,
        intercept,
        residual: (ss / n).sqrt(),
    })
}
