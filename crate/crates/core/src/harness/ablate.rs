//! Mask ablation: best-grid rate per mask variant.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::masks::MaskRule;
use crate::optimizers::{simulate, OptimizerConfig, RunLimits};
use crate::problems::Objective;

use super::config::GridSpec;
use super::rate::RateWindow;
use super::sweep::{sweep_grid, BestCell, Heatmap};

/// Heavy-ball optimum on a quadratic with Hessian spectrum `[lo, hi]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalyticOptimum {
    pub lr: f64,
    pub beta: f64,
    pub rate: f64,
}

/// `lr = 4/(sqrt(hi)+sqrt(lo))^2`, `beta = rate^2`,
/// `rate = (sqrt(k)-1)/(sqrt(k)+1)` with `k = hi/lo`.
pub fn heavy_ball_optimum(lo: f64, hi: f64) -> Result<AnalyticOptimum> {
    if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
        return Err(Error::InvalidProblem(format!("spectrum [{lo}, {hi}] is not positive definite")));
    }
    let (a, b) = (hi.sqrt(), lo.sqrt());
    let rate = (a - b) / (a + b);
    Ok(AnalyticOptimum {
        lr: 4.0 / (a + b).powi(2),
        beta: rate * rate,
        rate,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub label: String,
    pub mask: Option<MaskRule>,
    pub best: BestCell,
    /// Loss curve at the best cell.
    pub best_curve: Vec<f64>,
    pub heatmap: Heatmap,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub rows: Vec<AblationRow>,
    /// Present when the objective is a quadratic and the base is GDM.
    pub analytic_baseline: Option<AnalyticOptimum>,
}

impl AblationReport {
    pub fn row(&self, label: &str) -> Option<&AblationRow> {
        self.rows.iter().find(|r| r.label == label)
    }
}

/// Sweeps the unmasked base and each mask variant over the same grid.
#[allow(clippy::too_many_arguments)]
pub fn ablate_phi(
    base: &OptimizerConfig,
    masks: &[MaskRule],
    objective: &Objective,
    w0: &[f64],
    n_steps: usize,
    grid: &GridSpec,
    window: RateWindow,
    workers: usize,
) -> Result<AblationReport> {
    let base = base.clone().without_mask();
    let variants = std::iter::once(base.clone()).chain(masks.iter().map(|m| base.clone().with_mask(m.clone())));
    let mut rows = Vec::new();
    for cfg in variants {
        let heatmap = sweep_grid(&cfg, objective, w0, n_steps, grid, window, workers)?;
        let best = heatmap.best();
        let best_curve = if best.rate.is_finite() {
            let mut at_best = cfg.clone().with_lr(best.lr);
            at_best.base = at_best.base.with_momentum(best.beta);
            simulate(&at_best, objective, w0, RunLimits::steps(n_steps))?.losses()
        } else {
            Vec::new()
        };
        rows.push(AblationRow {
            label: cfg.label(),
            mask: cfg.mask.clone(),
            best,
            best_curve,
            heatmap,
        });
    }
    let analytic_baseline = match (&base.base, objective.quadratic_spectrum()) {
        (crate::optimizers::BaseOptimizer::Gdm { .. }, Some((lo, hi))) => Some(heavy_ball_optimum(lo, hi)?),
        _ => None,
    };
    Ok(AblationReport {
        rows,
        analytic_baseline,
    })
}
