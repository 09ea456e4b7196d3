use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `⟨t⟩ = √(1 + t²)`.
#[inline]
pub fn japanese(t: f64) -> f64 {
    t.hypot(1.0)
}

/// Least-squares line through `(x, y)`: `(slope, intercept, r²)`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<(f64, f64, f64)> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::Fit(format!("need at least two paired points, got {} and {}", x.len(), y.len())));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxx += (a - mx) * (a - mx);
        sxy += (a - mx) * (b - my);
        syy += (b - my) * (b - my);
    }
    if !(sxx > 0.0) {
        return Err(Error::Fit("abscissae are all equal".into()));
    }
    let slope = sxy / sxx;
    let r2 = if syy > 0.0 { (sxy * sxy / (sxx * syy)).clamp(0.0, 1.0) } else { 1.0 };
    Ok((slope, my - slope * mx, r2))
}

/// Fitted `log y = exponent · log⟨t⟩ + intercept` over a time window.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub exponent: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub window: (f64, f64),
}

/// Minimum number of samples a window must hold.
pub const MIN_FIT_POINTS: usize = 8;

/// Last decade `[t_max/10, t_max]` of a grid.
pub fn last_decade(t: &[f64]) -> (f64, f64) {
    let hi = t.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (hi / 10.0, hi)
}

fn windowed(t: &[f64], y: &[f64], window: Option<(f64, f64)>) -> Result<((f64, f64), Vec<(f64, f64)>)> {
    if t.len() != y.len() {
        return Err(Error::Fit("series lengths differ".into()));
    }
    let w = window.unwrap_or_else(|| last_decade(t));
    let pts: Vec<(f64, f64)> = t.iter().zip(y).filter(|(s, _)| **s >= w.0 && **s <= w.1).map(|(a, b)| (*a, *b)).collect();
    if pts.len() < MIN_FIT_POINTS {
        return Err(Error::Fit(format!("window [{}, {}] holds {} points, need {MIN_FIT_POINTS}", w.0, w.1, pts.len())));
    }
    if let Some((s, v)) = pts.iter().find(|(_, v)| !(*v > 0.0)) {
        return Err(Error::Fit(format!("nonpositive value {v} at t = {s}")));
    }
    Ok((w, pts))
}

/// Slope of `log y` against `log⟨t⟩` (default window: last decade).
pub fn fit_power_law(t: &[f64], y: &[f64], window: Option<(f64, f64)>) -> Result<RateFit> {
    let (w, pts) = windowed(t, y, window)?;
    let lx: Vec<f64> = pts.iter().map(|(s, _)| japanese(*s).ln()).collect();
    let ly: Vec<f64> = pts.iter().map(|(_, v)| v.ln()).collect();
    let (exponent, intercept, r_squared) = linear_fit(&lx, &ly)?;
    Ok(RateFit { exponent, intercept, r_squared, window: w })
}

/// Power-law fit of the compensated series `y⟨t⟩ / (log⟨t⟩)^θ`.
pub fn fit_log_corrected(t: &[f64], y: &[f64], theta: f64, window: Option<(f64, f64)>) -> Result<RateFit> {
    let (w, pts) = windowed(t, y, window)?;
    if pts.iter().any(|(s, _)| *s <= 0.0) {
        return Err(Error::Fit("log-corrected fit needs t > 0 on the window".into()));
    }
    let (ts, zs): (Vec<f64>, Vec<f64>) = pts
        .iter()
        .map(|(s, v)| {
            let b = japanese(*s);
            (*s, v * b / b.ln().powf(theta))
        })
        .unzip();
    fit_power_law(&ts, &zs, Some(w))
}

/// Envelope check: the constant is calibrated on the calibration prefix of
/// a series and every sample must stay below `slack · constant`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeCheck {
    pub constant: f64,
    pub slack: f64,
    pub worst_ratio: f64,
    pub worst_t: f64,
    pub passed: bool,
}

/// `ratio[k]` is the series divided by its envelope shape; the constant is
/// `max` over samples with `t ≤ t_calib`.
pub fn calibrate_envelope(t: &[f64], ratio: &[f64], t_calib: f64, slack: f64) -> Result<EnvelopeCheck> {
    let constant = t.iter().zip(ratio).filter(|(s, _)| **s <= t_calib).map(|(_, r)| *r).fold(f64::NEG_INFINITY, f64::max);
    if !constant.is_finite() || constant <= 0.0 {
        return Err(Error::Fit(format!("no positive calibration sample with t <= {t_calib}")));
    }
    let (mut worst_ratio, mut worst_t) = (f64::NEG_INFINITY, f64::NAN);
    for (s, r) in t.iter().zip(ratio) {
        let q = r / constant;
        if q > worst_ratio {
            worst_ratio = q;
            worst_t = *s;
        }
    }
    Ok(EnvelopeCheck { constant, slack, worst_ratio, worst_t, passed: worst_ratio <= slack })
}
