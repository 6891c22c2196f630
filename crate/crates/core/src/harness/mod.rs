//! Experiment engine: trajectory runs, rate estimation, heatmap sweeps,
//! mask ablations, the training trend benchmark, flows and file output.
//!
//! Each `cmd_*` function computes its artifacts from an [`ExperimentConfig`]
//! and writes them to `config.outputs`. Results never depend on
//! `config.workers`.

pub mod ablate;
pub mod config;
pub mod flows;
pub mod output;
pub mod rate;
pub mod svg;
pub mod sweep;
pub mod train;

use std::path::PathBuf;

use serde::Serialize;

use crate::error::Result;
use crate::optimizers::{simulate, Abort, RunLimits, Trajectory};
use crate::problems::make_problem;
use crate::verify::{par_map, run_all, VerifyReport};

pub use ablate::{ablate_phi, heavy_ball_optimum, AblationReport, AnalyticOptimum};
pub use config::{ExperimentConfig, Format, GridSpec};
pub use flows::run_dynamics;
pub use rate::{estimate_rate, RateEstimate, RateWindow};
pub use sweep::{sweep_grid, BestCell, Heatmap};
pub use train::{train_benchmark, TrainReport, TREND_LABEL};

use output::Emitter;

/// Runs every configured optimizer from every seed. Results are ordered by
/// optimizer, then seed.
pub fn run_trajectories(cfg: &ExperimentConfig) -> Result<Vec<Trajectory>> {
    let obj = make_problem(&cfg.problem)?;
    let fp = cfg.fingerprint();
    let ns = cfg.seeds.len();
    par_map(cfg.workers, cfg.optimizers.len() * ns, |k| -> Result<Trajectory> {
        let opt = &cfg.optimizers[k / ns];
        let seed = cfg.seeds[k % ns];
        let w0 = cfg.w0.resolve(obj.dim(), seed)?;
        let mut traj = simulate(opt, &obj, &w0, RunLimits::steps(cfg.n_steps))?;
        traj.fingerprint = fp.clone();
        traj.seed = seed;
        Ok(traj)
    })?
    .into_iter()
    .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct RunSummary {
    pub label: String,
    pub seed: u64,
    pub points: usize,
    pub initial_loss: f64,
    pub final_loss: f64,
    pub rate: Option<RateEstimate>,
    /// Why no rate was fitted, if none was.
    pub rate_error: Option<String>,
    /// Largest one-step loss increase; negative when the loss never rose.
    pub max_loss_increase: f64,
    pub mean_mask_ratio: f64,
    pub abort: Option<Abort>,
}

pub fn summarize(traj: &Trajectory, window: RateWindow, divergence_factor: f64) -> RunSummary {
    let losses = traj.losses();
    let (rate, rate_error) = match estimate_rate(&losses, window, divergence_factor) {
        Ok(r) => (Some(r), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let ratios: Vec<f64> = traj.steps.iter().skip(1).map(|s| s.mask_ratio).collect();
    RunSummary {
        label: traj.label.clone(),
        seed: traj.seed,
        points: traj.steps.len(),
        initial_loss: losses[0],
        final_loss: *losses.last().expect("start point"),
        rate,
        rate_error,
        max_loss_increase: losses.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max),
        mean_mask_ratio: if ratios.is_empty() {
            1.0
        } else {
            ratios.iter().sum::<f64>() / ratios.len() as f64
        },
        abort: traj.abort.clone(),
    }
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    command: &'a str,
    fingerprint: String,
    config: &'a ExperimentConfig,
    result: T,
}

fn emitter(cfg: &ExperimentConfig, command: &str) -> Result<Emitter> {
    Emitter::new(&cfg.outputs.dir, &cfg.outputs.formats, command, &cfg.fingerprint())
}

fn envelope<'a, T: Serialize>(cfg: &'a ExperimentConfig, command: &'a str, result: T) -> Envelope<'a, T> {
    Envelope {
        command,
        fingerprint: cfg.fingerprint(),
        config: cfg,
        result,
    }
}

/// `run`: one CSV per (optimizer, seed), a JSON summary and a loss plot.
pub fn cmd_run(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    let trajs = run_trajectories(cfg)?;
    let div = cfg.grid_or_default().divergence_factor;
    let mut em = emitter(cfg, "run")?;
    for t in &trajs {
        em.csv(Some(&format!("{}-seed{}", t.label, t.seed)), output::trajectory_csv(t))?;
    }
    let summaries: Vec<RunSummary> = trajs.iter().map(|t| summarize(t, cfg.rate_window, div)).collect();
    em.json(None, &envelope(cfg, "run", summaries))?;
    em.svg(None, || output::loss_plot("loss", &trajs.iter().collect::<Vec<_>>()))?;
    Ok(em.finish())
}

/// One heatmap per configured optimizer, starting from the first seed's `w0`.
pub fn compute_sweep(cfg: &ExperimentConfig) -> Result<Vec<Heatmap>> {
    let obj = make_problem(&cfg.problem)?;
    let w0 = cfg.w0.resolve(obj.dim(), cfg.seeds[0])?;
    let grid = cfg.grid_or_default();
    cfg.optimizers
        .iter()
        .map(|opt| sweep_grid(opt, &obj, &w0, cfg.n_steps, &grid, cfg.rate_window, cfg.workers))
        .collect()
}

#[derive(Serialize)]
struct SweepResult<'a> {
    heatmap: &'a Heatmap,
    best: BestCell,
    diverged_cells: usize,
}

pub fn cmd_sweep(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    let maps = compute_sweep(cfg)?;
    let mut em = emitter(cfg, "sweep")?;
    for hm in &maps {
        em.csv(Some(&hm.label), output::heatmap_csv(hm))?;
        em.svg(Some(&hm.label), || svg::heatmap(&hm.label, &hm.lrs, &hm.betas, &hm.rates, 1.0))?;
    }
    let results: Vec<SweepResult> = maps
        .iter()
        .map(|hm| SweepResult {
            heatmap: hm,
            best: hm.best(),
            diverged_cells: hm.diverged_cells(),
        })
        .collect();
    em.json(None, &envelope(cfg, "sweep", results))?;
    Ok(em.finish())
}

/// Ablation over the configured masks with the first optimizer as base.
pub fn compute_ablation(cfg: &ExperimentConfig) -> Result<AblationReport> {
    let obj = make_problem(&cfg.problem)?;
    let w0 = cfg.w0.resolve(obj.dim(), cfg.seeds[0])?;
    let masks = cfg.ablation.clone().unwrap_or_default().masks;
    ablate_phi(
        &cfg.optimizers[0],
        &masks,
        &obj,
        &w0,
        cfg.n_steps,
        &cfg.grid_or_default(),
        cfg.rate_window,
        cfg.workers,
    )
}

pub fn cmd_ablate(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    let rep = compute_ablation(cfg)?;
    let mut em = emitter(cfg, "ablate-phi")?;
    em.csv(None, output::ablation_csv(&rep))?;
    em.json(None, &envelope(cfg, "ablate-phi", &rep))?;
    em.svg(None, || {
        let series: Vec<(String, Vec<f64>)> =
            rep.rows.iter().map(|r| (r.label.clone(), r.best_curve.clone())).collect();
        svg::line_plot("loss at best grid cell", &series, true)
    })?;
    Ok(em.finish())
}

pub fn cmd_train(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    let rep = train_benchmark(&cfg.train.clone().unwrap_or_default(), cfg.workers)?;
    let mut em = emitter(cfg, "train")?;
    em.csv(None, output::train_csv(&rep))?;
    em.json(None, &envelope(cfg, "train", &rep))?;
    Ok(em.finish())
}

pub fn cmd_dynamics(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    let spec = cfg.dynamics.clone().unwrap_or_default();
    let obj = make_problem(&cfg.problem)?;
    let w0 = cfg.w0.resolve(obj.dim(), cfg.seeds[0])?;
    let trace = run_dynamics(&spec, &obj, &w0)?;
    #[derive(Serialize)]
    struct FlowSummary {
        integrator: crate::dynamics::Integrator,
        dt: f64,
        inner_dt: f64,
        samples: usize,
        max_hamiltonian_increase: f64,
        max_loss_increase: f64,
        final_loss: f64,
        final_hamiltonian: f64,
        final_grad_norm: f64,
    }
    let summary = FlowSummary {
        integrator: trace.integrator,
        dt: trace.dt,
        inner_dt: trace.inner_dt,
        samples: trace.times.len(),
        max_hamiltonian_increase: trace.max_hamiltonian_increase(),
        max_loss_increase: trace.max_loss_increase(),
        final_loss: *trace.loss_samples.last().expect("start point"),
        final_hamiltonian: *trace.hamiltonian_samples.last().expect("start point"),
        final_grad_norm: crate::vector::norm(&obj.grad(&trace.final_state().w)),
    };
    let mut em = emitter(cfg, "dynamics")?;
    em.csv(None, output::flow_csv(&trace, spec.sample_every))?;
    em.json(None, &envelope(cfg, "dynamics", summary))?;
    em.svg(None, || {
        let step = spec.sample_every.max(1);
        let thin = |xs: &[f64]| xs.iter().step_by(step).copied().collect::<Vec<_>>();
        svg::line_plot(
            "flow",
            &[
                ("loss".into(), thin(&trace.loss_samples)),
                ("hamiltonian".into(), thin(&trace.hamiltonian_samples)),
            ],
            true,
        )
    })?;
    Ok(em.finish())
}

/// Runs the verification suites. Returns the report with the written files.
pub fn cmd_verify(cfg: &ExperimentConfig) -> Result<(VerifyReport, Vec<PathBuf>)> {
    cfg.validate()?;
    let plan = cfg.verify.unwrap_or_default();
    let rep = run_all(&plan, cfg.workers)?;
    let mut em = emitter(cfg, "verify")?;
    em.csv(None, output::verify_csv(&rep))?;
    em.json(None, &envelope(cfg, "verify", &rep))?;
    Ok((rep, em.finish()))
}
