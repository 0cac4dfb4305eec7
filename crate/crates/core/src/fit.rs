//! Power-law fits of decay curves in log–log coordinates.

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MIN_WINDOW_SAMPLES: usize = 8;
pub const MIN_WINDOW_DECADES: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FitError {
    #[error("fit window has {samples} samples spanning {decades:.2} decades (need >= 8 over >= 1 decade)")]
    WindowTooNarrow { samples: usize, decades: f64 },
    #[error("non-positive or non-finite sample at t = {0}")]
    NonPositive(f64),
    #[error("no power-law window found")]
    WindowNotFound,
    #[error("times and values differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
}

/// Ordinary least squares line through `(ln x, ln y)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogLogFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_std_err: f64,
    pub samples: usize,
}

pub fn loglog_fit(x: &[f64], y: &[f64]) -> Result<LogLogFit, FitError> {
    if x.len() != y.len() {
        return Err(FitError::LengthMismatch(x.len(), y.len()));
    }
    for (&xi, &yi) in x.iter().zip(y) {
        if !(xi > 0.0 && yi > 0.0 && xi.is_finite() && yi.is_finite()) {
            return Err(FitError::NonPositive(xi));
        }
    }
    let n = x.len();
    if n < 2 {
        return Err(FitError::WindowTooNarrow { samples: n, decades: 0.0 });
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n as f64;
    let my = ly.iter().sum::<f64>() / n as f64;
    let sxx: f64 = lx.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = lx.iter().zip(&ly).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let slope_std_err = if n > 2 { (ssr / (n - 2) as f64 / sxx).sqrt() } else { 0.0 };
    Ok(LogLogFit { slope, intercept, slope_std_err, samples: n })
}

/// A sampled decay curve with its power-law fit over `fit_window`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayCurve {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub fitted_slope: f64,
    pub slope_std_err: f64,
    pub prefactor: f64,
    pub fit_window: (f64, f64),
}

/// Fits `value ≈ prefactor · t^slope` using the samples inside `window`.
pub fn fit_decay(times: &[f64], values: &[f64], window: (f64, f64)) -> Result<DecayCurve, FitError> {
    if times.len() != values.len() {
        return Err(FitError::LengthMismatch(times.len(), values.len()));
    }
    let (x, y): (Vec<f64>, Vec<f64>) = times
        .iter()
        .zip(values)
        .filter(|(t, _)| **t >= window.0 && **t <= window.1)
        .map(|(t, v)| (*t, *v))
        .unzip();
    let decades = match (x.first(), x.last()) {
        (Some(a), Some(b)) if *a > 0.0 => (b / a).log10(),
        _ => 0.0,
    };
    if x.len() < MIN_WINDOW_SAMPLES || decades < MIN_WINDOW_DECADES - 1e-12 {
        return Err(FitError::WindowTooNarrow { samples: x.len(), decades });
    }
    let f = loglog_fit(&x, &y)?;
    Ok(DecayCurve {
        times: times.to_vec(),
        values: values.to_vec(),
        fitted_slope: f.slope,
        slope_std_err: f.slope_std_err,
        prefactor: f.intercept.exp(),
        fit_window: window,
    })
}

/// Longest window (in `log t`) over which the local log–log slope varies by
/// less than `max_variation`, subject to the minimum sample and decade counts.
pub fn detect_window(times: &[f64], values: &[f64], max_variation: f64) -> Result<(f64, f64), FitError> {
    if times.len() != values.len() {
        return Err(FitError::LengthMismatch(times.len(), values.len()));
    }
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(values)
        .filter(|(t, v)| **t > 0.0 && **v > 0.0 && v.is_finite())
        .map(|(t, v)| (t.ln(), v.ln()))
        .collect();
    if pts.len() < MIN_WINDOW_SAMPLES {
        return Err(FitError::WindowNotFound);
    }
    let slopes: Vec<f64> = pts.windows(2).map(|w| (w[1].1 - w[0].1) / (w[1].0 - w[0].0)).collect();
    let mut best: Option<(usize, usize)> = None;
    for a in 0..pts.len() {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for b in a + 1..pts.len() {
            lo = lo.min(slopes[b - 1]);
            hi = hi.max(slopes[b - 1]);
            if hi - lo >= max_variation || !slopes[b - 1].is_finite() {
                break;
            }
            let span = (pts[b].0 - pts[a].0) / std::f64::consts::LN_10;
            if b + 1 - a >= MIN_WINDOW_SAMPLES && span >= MIN_WINDOW_DECADES {
                let better = match best {
                    None => true,
                    Some((ba, bb)) => pts[b].0 - pts[a].0 > pts[bb].0 - pts[ba].0,
                };
                if better {
                    best = Some((a, b));
                }
            }
        }
    }
    best.map(|(a, b)| (pts[a].0.exp(), pts[b].0.exp())).ok_or(FitError::WindowNotFound)
}

/// `n` log-spaced samples on `[a, b]`.
pub fn logspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    let (la, lb) = (a.ln(), b.ln());
    (0..n).map(|i| (la + (lb - la) * i as f64 / (n - 1) as f64).exp()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_law() {
        let t = logspace(1.0, 1e3, 30);
        let v: Vec<f64> = t.iter().map(|t| 3.0 * t.powf(-0.75)).collect();
        let c = fit_decay(&t, &v, (1.0, 1e3)).unwrap();
        assert!((c.fitted_slope + 0.75).abs() < 1e-12);
        assert!((c.prefactor - 3.0).abs() < 1e-10);
        assert!(c.slope_std_err < 1e-12);
    }

    #[test]
    fn narrow_windows_rejected() {
        let t = logspace(1.0, 5.0, 30);
        let v: Vec<f64> = t.iter().map(|t| t.powf(-1.0)).collect();
        assert!(matches!(fit_decay(&t, &v, (1.0, 5.0)), Err(FitError::WindowTooNarrow { .. })));
        let t = logspace(1.0, 1e3, 5);
        let v: Vec<f64> = t.iter().map(|t| t.powf(-1.0)).collect();
        assert!(matches!(fit_decay(&t, &v, (1.0, 1e3)), Err(FitError::WindowTooNarrow { .. })));
    }

    #[test]
    fn detects_intermediate_regime() {
        // transient, then t^-1/2, then saturation to a constant
        let t = logspace(0.1, 1e5, 120);
        let v: Vec<f64> = t.iter().map(|&t: &f64| (1.0 + 1.0 / t).powi(3) * t.powf(-0.5) + 1e-3).collect();
        let (a, b) = detect_window(&t, &v, 0.1).unwrap();
        assert!(a >= 1.0 && b <= 1e5 && b / a >= 10.0);
        let c = fit_decay(&t, &v, (a, b)).unwrap();
        assert!((c.fitted_slope + 0.5).abs() < 0.1);
    }

    #[test]
    fn zero_curve_has_no_window() {
        let t = logspace(1.0, 1e3, 40);
        assert_eq!(detect_window(&t, &vec![0.0; 40], 0.1), Err(FitError::WindowNotFound));
    }
}
