//! Self-similarity diagnostics on the raw numeric streams: rescaled-range
//! Hurst exponent, autocorrelation, and partial autocorrelation.

use serde::Serialize;

use crate::error::{Error, Result};

/// Minimum series length for the rescaled-range fit.
pub const HURST_MIN_LEN: usize = 64;

/// Rescaled-range estimate with its fit metadata.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HurstEstimate {
    /// Fitted slope, clamped to [0, 1].
    pub h: f64,
    /// True when the raw slope fell outside [0, 1].
    pub clamped: bool,
    /// Window sizes used in the log-log fit.
    pub window_sizes: Vec<usize>,
    /// Mean R/S per window size (same order as `window_sizes`).
    pub mean_rs: Vec<f64>,
}

/// Rescaled-range Hurst exponent.
///
/// Partitions the series into disjoint windows of power-of-two sizes
/// 8, 16, ... up to N/2, computes the mean rescaled range per size, and fits
/// log(R/S) against log(size) by least squares; the slope is H.
pub fn hurst_rs(series: &[f64]) -> Result<HurstEstimate> {
    if series.len() < HURST_MIN_LEN {
        return Err(Error::InvalidParameter(format!(
            "rescaled-range fit needs at least {HURST_MIN_LEN} samples, got {}",
            series.len()
        )));
    }
    ensure_finite(series)?;
    if is_constant(series) {
        return Err(Error::ZeroRange);
    }

    let mut window_sizes = Vec::new();
    let mut size = 8usize;
    while size <= series.len() / 2 {
        window_sizes.push(size);
        size *= 2;
    }

    let mut sizes_used = Vec::new();
    let mut mean_rs = Vec::new();
    for &size in &window_sizes {
        let mut ratios = Vec::new();
        for window in series.chunks_exact(size) {
            let mean = window.iter().sum::<f64>() / size as f64;
            let mut cum = 0.0f64;
            let mut min = f64::INFINITY;
            let mut max = f64::NEG_INFINITY;
            let mut sq = 0.0f64;
            for x in window {
                let d = x - mean;
                cum += d;
                min = min.min(cum);
                max = max.max(cum);
                sq += d * d;
            }
            let std = (sq / size as f64).sqrt();
            if std > 0.0 {
                ratios.push((max - min) / std);
            }
        }
        if !ratios.is_empty() {
            sizes_used.push(size);
            mean_rs.push(ratios.iter().sum::<f64>() / ratios.len() as f64);
        }
    }
    if sizes_used.len() < 2 {
        return Err(Error::ZeroRange);
    }

    let xs: Vec<f64> = sizes_used.iter().map(|s| (*s as f64).ln()).collect();
    let ys: Vec<f64> = mean_rs.iter().map(|r| r.ln()).collect();
    let slope = ols_slope(&xs, &ys)?;
    let clamped = !(0.0..=1.0).contains(&slope);
    Ok(HurstEstimate {
        h: slope.clamp(0.0, 1.0),
        clamped,
        window_sizes: sizes_used,
        mean_rs,
    })
}

fn ols_slope(xs: &[f64], ys: &[f64]) -> Result<f64> {
    let n = xs.len() as f64;
    let sx: f64 = xs.iter().sum();
    let sy: f64 = ys.iter().sum();
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| x * y).sum();
    let denom = n * sxx - sx * sx;
    if denom.abs() < 1e-12 {
        return Err(Error::Degenerate("all fit abscissae coincide".into()));
    }
    Ok((n * sxy - sx * sy) / denom)
}

/// Autocorrelation for lags 0..=max_lag, biased (1/N) estimator:
/// `acf(k) = sum (x_t - mean)(x_{t+k} - mean) / sum (x_t - mean)^2`.
///
/// The biased form keeps the sequence positive semidefinite, which the
/// Durbin-Levinson recursion needs.
pub fn acf(series: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    if series.len() <= max_lag {
        return Err(Error::InvalidParameter(format!(
            "series length {} must exceed max lag {max_lag}",
            series.len()
        )));
    }
    ensure_finite(series)?;
    let n = series.len();
    let mean = series.iter().sum::<f64>() / n as f64;
    let denom: f64 = series.iter().map(|x| (x - mean).powi(2)).sum();
    if denom == 0.0 {
        return Err(Error::ZeroVariance);
    }
    let mut out = Vec::with_capacity(max_lag + 1);
    for k in 0..=max_lag {
        let num: f64 = (0..n - k)
            .map(|t| (series[t] - mean) * (series[t + k] - mean))
            .sum();
        out.push(num / denom);
    }
    Ok(out)
}

/// Partial autocorrelation for lags 1..=max_lag via the Durbin-Levinson
/// recursion over the biased acf sequence.
pub fn pacf(series: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    let rho = acf(series, max_lag)?;
    pacf_from_acf(&rho)
}

/// Durbin-Levinson over an autocorrelation sequence (`rho[0]` = 1).
pub fn pacf_from_acf(rho: &[f64]) -> Result<Vec<f64>> {
    let max_lag = rho.len().saturating_sub(1);
    let mut pacf = Vec::with_capacity(max_lag);
    // phi holds the current-order prediction coefficients
    let mut phi = vec![0.0f64; max_lag + 1];
    let mut prev = vec![0.0f64; max_lag + 1];
    let mut err = 1.0f64;
    for k in 1..=max_lag {
        let mut acc = rho[k];
        for j in 1..k {
            acc -= prev[j] * rho[k - j];
        }
        if err <= 0.0 {
            return Err(Error::Degenerate(format!(
                "prediction error vanished at lag {k}; acf sequence is singular"
            )));
        }
        let reflection = acc / err;
        if !reflection.is_finite() || reflection.abs() > 1.0 + 1e-9 {
            return Err(Error::Degenerate(format!(
                "reflection coefficient {reflection} out of range at lag {k}"
            )));
        }
        phi[k] = reflection;
        for j in 1..k {
            phi[j] = prev[j] - reflection * prev[k - j];
        }
        err *= 1.0 - reflection * reflection;
        prev[..=k].copy_from_slice(&phi[..=k]);
        pacf.push(reflection);
    }
    Ok(pacf)
}

/// Hurst, acf and pacf for one series.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeriesDiagnostics {
    pub hurst: HurstEstimate,
    pub acf: Vec<f64>,
    pub pacf: Vec<f64>,
}

/// Run all three diagnostics on one series.
pub fn diagnose_series(series: &[f64], max_lag: usize) -> Result<SeriesDiagnostics> {
    let hurst = hurst_rs(series)?;
    let acf = acf(series, max_lag)?;
    let pacf = pacf_from_acf(&acf)?;
    Ok(SeriesDiagnostics { hurst, acf, pacf })
}

fn ensure_finite(series: &[f64]) -> Result<()> {
    if let Some(x) = series.iter().find(|x| !x.is_finite()) {
        return Err(Error::NonFinite(format!("diagnostics input contains {x}")));
    }
    Ok(())
}

fn is_constant(series: &[f64]) -> bool {
    series.windows(2).all(|w| w[0] == w[1])
}
