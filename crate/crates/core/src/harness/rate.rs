//! Linear-convergence rate from a loss curve.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fit window as fractions of the run length `T`: steps `[start·T, end·T]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RateWindow {
    pub start: f64,
    pub end: f64,
}

impl Default for RateWindow {
    fn default() -> Self {
        RateWindow { start: 0.1, end: 1.0 }
    }
}

impl RateWindow {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 <= self.start && self.start < self.end && self.end <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "rate window needs 0 <= start < end <= 1, got [{}, {}]",
                self.start, self.end
            )));
        }
        Ok(())
    }

    /// Inclusive step range for a curve with `n_points` entries.
    pub fn range(&self, n_points: usize) -> (usize, usize) {
        let last = n_points.saturating_sub(1);
        let lo = (self.start * last as f64).floor() as usize;
        let hi = ((self.end * last as f64).ceil() as usize).min(last);
        (lo.min(hi), hi)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateEstimate {
    /// Slope of `ln L` per step.
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// `exp(slope / 2)`, the per-step contraction of `sqrt(L)`.
    pub per_step_rate: f64,
    /// Inclusive step range used in the fit.
    pub window: (usize, usize),
    pub diverged: bool,
}

impl RateEstimate {
    fn diverged(window: (usize, usize)) -> Self {
        RateEstimate {
            slope: f64::INFINITY,
            intercept: f64::NAN,
            r_squared: f64::NAN,
            per_step_rate: f64::INFINITY,
            window,
            diverged: true,
        }
    }
}

/// Least-squares fit of `ln L_t = a + b t` over the window.
///
/// A curve that exceeds `divergence_factor · L_0` (or goes non-finite)
/// reports `per_step_rate = inf`. A non-positive loss inside the window is
/// an error, since its log is undefined.
pub fn estimate_rate(losses: &[f64], window: RateWindow, divergence_factor: f64) -> Result<RateEstimate> {
    window.validate()?;
    if losses.len() < 2 {
        return Err(Error::InvalidConfig("rate fit needs at least two points".into()));
    }
    let l0 = losses[0];
    let range = window.range(losses.len());
    if losses.iter().any(|l| !l.is_finite() || *l > divergence_factor * l0) {
        return Ok(RateEstimate::diverged(range));
    }
    let (lo, hi) = range;
    let mut pts = Vec::with_capacity(hi - lo + 1);
    for (t, &l) in losses.iter().enumerate().take(hi + 1).skip(lo) {
        if l <= 0.0 {
            return Err(Error::NonPositiveLoss { step: t, value: l });
        }
        pts.push((t as f64, l.ln()));
    }
    if pts.len() < 2 {
        return Err(Error::InvalidConfig("rate window holds fewer than two points".into()));
    }
    let (slope, intercept, r_squared) = ols(&pts);
    Ok(RateEstimate {
        slope,
        intercept,
        r_squared,
        per_step_rate: (slope / 2.0).exp(),
        window: range,
        diverged: false,
    })
}

fn ols(pts: &[(f64, f64)]) -> (f64, f64, f64) {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let r2 = if syy == 0.0 { 1.0 } else { 1.0 - ss_res / syy };
    (slope, intercept, r2)
}
