//! Learning-rate by momentum heatmaps.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::optimizers::{simulate, OptimizerConfig, RunLimits};
use crate::problems::Objective;
use crate::verify::par_map;

use super::config::GridSpec;
use super::rate::{estimate_rate, RateEstimate, RateWindow};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Heatmap {
    pub label: String,
    pub lrs: Vec<f64>,
    pub betas: Vec<f64>,
    /// `rates[i][j]` is the per-step rate at `(lrs[i], betas[j])`.
    pub rates: Vec<Vec<f64>>,
    pub r_squared: Vec<Vec<f64>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BestCell {
    pub lr: f64,
    pub beta: f64,
    pub rate: f64,
}

impl Heatmap {
    /// Smallest rate; ties go to the first cell in row-major order.
    pub fn best(&self) -> BestCell {
        let mut best = BestCell {
            lr: f64::NAN,
            beta: f64::NAN,
            rate: f64::INFINITY,
        };
        for (i, row) in self.rates.iter().enumerate() {
            for (j, &r) in row.iter().enumerate() {
                if r < best.rate || best.lr.is_nan() {
                    best = BestCell {
                        lr: self.lrs[i],
                        beta: self.betas[j],
                        rate: r,
                    };
                }
            }
        }
        best
    }

    /// Number of cells with the divergence sentinel.
    pub fn diverged_cells(&self) -> usize {
        self.rates.iter().flatten().filter(|r| r.is_infinite()).count()
    }
}

/// Rate of one `(lr, beta)` cell.
#[allow(clippy::too_many_arguments)]
pub fn cell_rate(
    base: &OptimizerConfig,
    objective: &Objective,
    w0: &[f64],
    n_steps: usize,
    grid: &GridSpec,
    window: RateWindow,
    lr: f64,
    beta: f64,
) -> Result<RateEstimate> {
    let mut cfg = base.clone().with_lr(lr);
    cfg.base = cfg.base.with_momentum(beta);
    let limits = RunLimits {
        n_steps,
        divergence_factor: Some(grid.divergence_factor),
        floor_factor: Some(grid.floor_factor),
    };
    let traj = simulate(&cfg, objective, w0, limits)?;
    estimate_rate(&traj.losses(), window, grid.divergence_factor)
}

/// Sweeps every grid cell for one optimizer. Cells run on `workers`
/// threads and are collected by index.
pub fn sweep_grid(
    config: &OptimizerConfig,
    objective: &Objective,
    w0: &[f64],
    n_steps: usize,
    grid: &GridSpec,
    window: RateWindow,
    workers: usize,
) -> Result<Heatmap> {
    let lrs = grid.lr.values();
    let betas = grid.beta.values();
    let nb = betas.len();
    let cells = par_map(workers, lrs.len() * nb, |k| {
        cell_rate(config, objective, w0, n_steps, grid, window, lrs[k / nb], betas[k % nb])
    })?
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let mut rates = vec![vec![0.0; nb]; lrs.len()];
    let mut r_squared = rates.clone();
    for (k, est) in cells.into_iter().enumerate() {
        rates[k / nb][k % nb] = est.per_step_rate;
        r_squared[k / nb][k % nb] = est.r_squared;
    }
    Ok(Heatmap {
        label: config.label(),
        lrs,
        betas,
        rates,
        r_squared,
    })
}
