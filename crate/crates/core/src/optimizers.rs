//! Base momentum optimizers and the cautious step combinator.
//!
//! A step is split into [`propose_update`], which advances the optimizer
//! state and returns the negative update direction `u`, and the step
//! functions, which apply `u` (masked or not) and weight decay to `w`.

use serde::{Deserialize, Serialize};

use crate::dynamics::discrete_hamiltonian;
use crate::error::{check_dims, Error, Result};
use crate::masks::{apply_mask, MaskOutcome, MaskRule};
use crate::problems::Objective;
use crate::vector;

fn default_adam_eps() -> f64 {
    1e-8
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BaseOptimizer {
    Gd,
    /// `s <- beta s + g`, `u = s`.
    Gdm { beta: f64 },
    /// `s <- beta s + (1 - beta) g`, `u = sign(s)`.
    SignedMomentum { beta: f64 },
    AdamW {
        beta1: f64,
        beta2: f64,
        #[serde(default = "default_adam_eps")]
        eps: f64,
        #[serde(default)]
        weight_decay: f64,
    },
    Lion {
        beta1: f64,
        beta2: f64,
        #[serde(default)]
        weight_decay: f64,
    },
}

impl BaseOptimizer {
    pub fn name(&self) -> &'static str {
        match self {
            BaseOptimizer::Gd => "gd",
            BaseOptimizer::Gdm { .. } => "gdm",
            BaseOptimizer::SignedMomentum { .. } => "signed_momentum",
            BaseOptimizer::AdamW { .. } => "adamw",
            BaseOptimizer::Lion { .. } => "lion",
        }
    }

    pub fn weight_decay(&self) -> f64 {
        match self {
            BaseOptimizer::AdamW { weight_decay, .. } | BaseOptimizer::Lion { weight_decay, .. } => {
                *weight_decay
            }
            _ => 0.0,
        }
    }

    /// Replaces the leading momentum coefficient (`beta` or `beta1`).
    pub fn with_momentum(&self, beta: f64) -> Self {
        let mut out = self.clone();
        match &mut out {
            BaseOptimizer::Gd => {}
            BaseOptimizer::Gdm { beta: b } | BaseOptimizer::SignedMomentum { beta: b } => *b = beta,
            BaseOptimizer::AdamW { beta1, .. } | BaseOptimizer::Lion { beta1, .. } => *beta1 = beta,
        }
        out
    }

    fn validate(&self) -> Result<()> {
        let unit = |name: &str, b: f64| {
            if (0.0..1.0).contains(&b) {
                Ok(())
            } else {
                Err(Error::InvalidConfig(format!("{name} must be in [0, 1), got {b}")))
            }
        };
        match self {
            BaseOptimizer::Gd => Ok(()),
            BaseOptimizer::Gdm { beta } | BaseOptimizer::SignedMomentum { beta } => unit("beta", *beta),
            BaseOptimizer::AdamW {
                beta1,
                beta2,
                eps,
                weight_decay,
            } => {
                unit("beta1", *beta1)?;
                unit("beta2", *beta2)?;
                if !(eps.is_finite() && *eps > 0.0) {
                    return Err(Error::InvalidConfig(format!("eps must be positive, got {eps}")));
                }
                decay_ok(*weight_decay)
            }
            BaseOptimizer::Lion {
                beta1,
                beta2,
                weight_decay,
            } => {
                unit("beta1", *beta1)?;
                unit("beta2", *beta2)?;
                decay_ok(*weight_decay)
            }
        }
    }
}

fn decay_ok(gamma: f64) -> Result<()> {
    if gamma.is_finite() && gamma >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!("weight decay must be >= 0, got {gamma}")))
    }
}

/// Learning rate as a function of the 1-based step counter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LrSchedule {
    Constant(f64),
    /// Linear warmup to `peak`, then cosine decay to `min_lr` at `total_steps`.
    WarmupCosine {
        peak: f64,
        warmup_steps: u64,
        total_steps: u64,
        #[serde(default)]
        min_lr: f64,
    },
}

impl LrSchedule {
    pub fn at(&self, t: u64) -> f64 {
        match *self {
            LrSchedule::Constant(lr) => lr,
            LrSchedule::WarmupCosine {
                peak,
                warmup_steps,
                total_steps,
                min_lr,
            } => {
                if t <= warmup_steps && warmup_steps > 0 {
                    peak * t as f64 / warmup_steps as f64
                } else {
                    let span = total_steps.saturating_sub(warmup_steps).max(1) as f64;
                    let progress = ((t - warmup_steps.min(t)) as f64 / span).min(1.0);
                    min_lr + 0.5 * (peak - min_lr) * (1.0 + (std::f64::consts::PI * progress).cos())
                }
            }
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            LrSchedule::Constant(lr) => {
                if lr.is_finite() && lr >= 0.0 {
                    Ok(())
                } else {
                    Err(Error::InvalidConfig(format!("lr must be finite and >= 0, got {lr}")))
                }
            }
            LrSchedule::WarmupCosine {
                peak,
                total_steps,
                min_lr,
                ..
            } => {
                if peak.is_finite() && peak > 0.0 && min_lr.is_finite() && min_lr >= 0.0 && total_steps > 0 {
                    Ok(())
                } else {
                    Err(Error::InvalidConfig("invalid warmup-cosine schedule".into()))
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerConfig {
    pub base: BaseOptimizer,
    pub lr: LrSchedule,
    /// `None` runs the base optimizer.
    #[serde(default)]
    pub mask: Option<MaskRule>,
    /// Weight decay uses the mask-scaled lr when true. Defaults: scaled for
    /// AdamW, unscaled for Lion.
    #[serde(default)]
    pub decay_uses_scaled_lr: Option<bool>,
}

impl OptimizerConfig {
    pub fn new(base: BaseOptimizer, lr: f64) -> Self {
        OptimizerConfig {
            base,
            lr: LrSchedule::Constant(lr),
            mask: None,
            decay_uses_scaled_lr: None,
        }
    }

    pub fn with_mask(mut self, mask: MaskRule) -> Self {
        self.mask = Some(mask);
        self
    }

    pub fn without_mask(mut self) -> Self {
        self.mask = None;
        self
    }

    pub fn with_lr(mut self, lr: f64) -> Self {
        self.lr = LrSchedule::Constant(lr);
        self
    }

    pub fn gdm(beta: f64, lr: f64) -> Self {
        Self::new(BaseOptimizer::Gdm { beta }, lr)
    }

    pub fn adamw(beta1: f64, beta2: f64, lr: f64) -> Self {
        Self::new(
            BaseOptimizer::AdamW {
                beta1,
                beta2,
                eps: 1e-8,
                weight_decay: 0.0,
            },
            lr,
        )
    }

    pub fn lion(beta1: f64, beta2: f64, lr: f64) -> Self {
        Self::new(
            BaseOptimizer::Lion {
                beta1,
                beta2,
                weight_decay: 0.0,
            },
            lr,
        )
    }

    /// C-AdamW: strict comparator, `xi = 1`.
    pub fn cautious_adamw(beta1: f64, beta2: f64, lr: f64) -> Self {
        Self::adamw(beta1, beta2, lr).with_mask(MaskRule::default_scaled())
    }

    /// C-Lion: non-strict comparator, `xi = 1`.
    pub fn cautious_lion(beta1: f64, beta2: f64, lr: f64) -> Self {
        Self::lion(beta1, beta2, lr).with_mask(MaskRule::default_scaled_nonstrict())
    }

    pub fn decay_uses_scaled_lr(&self) -> bool {
        self.decay_uses_scaled_lr
            .unwrap_or(!matches!(self.base, BaseOptimizer::Lion { .. }))
    }

    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        self.lr.validate()?;
        if let Some(mask) = &self.mask {
            mask.validate()?;
        }
        Ok(())
    }

    /// Short label such as `gdm` or `c-gdm[phi_c0.1]`.
    pub fn label(&self) -> String {
        match &self.mask {
            None => self.base.name().to_string(),
            Some(rule) => format!("c-{}[{}]", self.base.name(), rule.tag()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    pub t: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub s: Vec<f64>,
}

pub fn init_state(config: &OptimizerConfig, dim: usize) -> Result<OptimizerState> {
    if dim == 0 {
        return Err(Error::InvalidConfig("dimension must be at least 1".into()));
    }
    let zeros = || vec![0.0; dim];
    let (m, v, s) = match config.base {
        BaseOptimizer::Gd => (vec![], vec![], vec![]),
        BaseOptimizer::Gdm { .. } | BaseOptimizer::SignedMomentum { .. } => (vec![], vec![], zeros()),
        BaseOptimizer::AdamW { .. } => (zeros(), zeros(), vec![]),
        BaseOptimizer::Lion { .. } => (zeros(), vec![], vec![]),
    };
    Ok(OptimizerState { t: 0, m, v, s })
}

impl OptimizerState {
    /// Length of the moment vectors, or `None` for stateless GD.
    fn dim(&self) -> Option<usize> {
        [&self.m, &self.s].iter().find(|x| !x.is_empty()).map(|x| x.len())
    }
}

/// Advances `state` by one step and returns the negative update direction.
/// Weight decay is not part of `u`.
pub fn propose_update(config: &OptimizerConfig, state: &mut OptimizerState, g: &[f64]) -> Result<Vec<f64>> {
    if let Some(d) = state.dim() {
        check_dims(d, g.len())?;
    }
    state.t += 1;
    let u = match config.base {
        BaseOptimizer::Gd => g.to_vec(),
        BaseOptimizer::Gdm { beta } => {
            for (s, gi) in state.s.iter_mut().zip(g) {
                *s = beta * *s + gi;
            }
            state.s.clone()
        }
        BaseOptimizer::SignedMomentum { beta } => {
            for (s, gi) in state.s.iter_mut().zip(g) {
                *s = beta * *s + (1.0 - beta) * gi;
            }
            state.s.iter().map(|s| vector::sign(*s)).collect()
        }
        BaseOptimizer::AdamW { beta1, beta2, eps, .. } => {
            let t = state.t as i32;
            let c1 = 1.0 - beta1.powi(t);
            let c2 = 1.0 - beta2.powi(t);
            let first = state.t == 1;
            let mut u = Vec::with_capacity(g.len());
            for ((m, v), gi) in state.m.iter_mut().zip(state.v.iter_mut()).zip(g) {
                // From zero moments the first corrected moments are exactly g
                // and g^2; dividing by (1 - beta) would round.
                let fresh = first && *m == 0.0 && *v == 0.0;
                *m = beta1 * *m + (1.0 - beta1) * gi;
                *v = beta2 * *v + (1.0 - beta2) * gi * gi;
                let (m_hat, v_hat) = if fresh { (*gi, gi * gi) } else { (*m / c1, *v / c2) };
                u.push(m_hat / (v_hat.sqrt() + eps));
            }
            u
        }
        BaseOptimizer::Lion { beta1, beta2, .. } => {
            let u = state
                .m
                .iter()
                .zip(g)
                .map(|(m, gi)| vector::sign(beta1 * m + (1.0 - beta1) * gi))
                .collect();
            for (m, gi) in state.m.iter_mut().zip(g) {
                *m = beta2 * *m + (1.0 - beta2) * gi;
            }
            u
        }
    };
    Ok(u)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    pub u: Vec<f64>,
    /// `phi ∘ u`; the parameter moved by `-lr * masked_update` before decay.
    pub masked_update: Vec<f64>,
    pub effective_lr: f64,
    pub mask_outcome: Option<MaskOutcome>,
    pub w_next: Vec<f64>,
    pub loss_before: Option<f64>,
    pub loss_after: Option<f64>,
}

impl StepReport {
    pub fn with_losses(mut self, objective: &Objective, w: &[f64]) -> Self {
        self.loss_before = Some(objective.loss(w));
        self.loss_after = Some(objective.loss(&self.w_next));
        self
    }
}

fn apply_decay(config: &OptimizerConfig, w: &mut [f64], decay_lr: f64) {
    let gamma = config.base.weight_decay();
    if gamma > 0.0 {
        for x in w.iter_mut() {
            *x -= decay_lr * gamma * *x;
        }
    }
}

/// `w' = w - lr * u`, then decoupled decay on the updated point.
pub fn base_step(config: &OptimizerConfig, state: &mut OptimizerState, w: &[f64], g: &[f64]) -> Result<StepReport> {
    check_dims(w.len(), g.len())?;
    let lr = config.lr.at(state.t + 1);
    let u = propose_update(config, state, g)?;
    let mut w_next: Vec<f64> = w.iter().zip(&u).map(|(wi, ui)| wi - lr * ui).collect();
    apply_decay(config, &mut w_next, lr);
    Ok(StepReport {
        masked_update: u.clone(),
        u,
        effective_lr: lr,
        mask_outcome: None,
        w_next,
        loss_before: None,
        loss_after: None,
    })
}

/// Masked step: the update keeps only coordinates the mask lets through
/// and the lr is multiplied by the mask scale.
pub fn cautious_step(
    config: &OptimizerConfig,
    state: &mut OptimizerState,
    w: &[f64],
    g: &[f64],
) -> Result<StepReport> {
    let rule = config
        .mask
        .as_ref()
        .ok_or_else(|| Error::InvalidConfig("cautious_step needs a mask".into()))?;
    check_dims(w.len(), g.len())?;
    let lr = config.lr.at(state.t + 1);
    rule.validate_step(lr)?;
    let u = propose_update(config, state, g)?;
    let outcome = apply_mask(rule, &u, g)?;
    let scale = outcome.scale;
    let effective_lr = lr * scale;
    let masked_update: Vec<f64> = outcome.weights.iter().zip(&u).map(|(p, ui)| p * ui).collect();
    // Weights are either `scale * indicator` or carry their own values with
    // scale 1, so `p / scale` recovers the unscaled multiplier exactly.
    let mut w_next: Vec<f64> = w
        .iter()
        .zip(&u)
        .zip(&outcome.weights)
        .map(|((wi, ui), p)| {
            let unit = if scale == 0.0 { 0.0 } else { p / scale };
            wi - effective_lr * (unit * ui)
        })
        .collect();
    let decay_lr = if config.decay_uses_scaled_lr() { effective_lr } else { lr };
    apply_decay(config, &mut w_next, decay_lr);
    Ok(StepReport {
        u,
        masked_update,
        effective_lr,
        mask_outcome: Some(outcome),
        w_next,
        loss_before: None,
        loss_after: None,
    })
}

/// Dispatches to [`cautious_step`] or [`base_step`] depending on the mask.
pub fn step(config: &OptimizerConfig, state: &mut OptimizerState, w: &[f64], g: &[f64]) -> Result<StepReport> {
    if config.mask.is_some() {
        cautious_step(config, state, w, g)
    } else {
        base_step(config, state, w, g)
    }
}

/// One point of a discrete run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub w: Vec<f64>,
    pub loss: f64,
    pub hamiltonian: f64,
    /// Ratio of the mask that produced this point (1 for base runs and for
    /// the initial point).
    pub mask_ratio: f64,
    /// Effective lr of the step that produced this point (0 initially).
    pub effective_lr: f64,
}

/// Per-update quantities needed by the convergence-bound check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UpdateRecord {
    /// `||u_t||^2`.
    pub update_norm_sq: f64,
    /// `g_t^T (phi_t ∘ u_t)`.
    pub masked_inner: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Abort {
    pub step: usize,
    pub reason: String,
}

/// Discrete run record: `n_steps + 1` points including the start.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub label: String,
    pub steps: Vec<StepRecord>,
    pub updates: Vec<UpdateRecord>,
    pub fingerprint: String,
    pub seed: u64,
    pub abort: Option<Abort>,
}

impl Trajectory {
    pub fn losses(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.loss).collect()
    }

    pub fn hamiltonians(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.hamiltonian).collect()
    }

    pub fn final_point(&self) -> &[f64] {
        &self.steps.last().expect("trajectory has a start point").w
    }
}

/// Stopping rules for [`simulate`].
#[derive(Clone, Copy, Debug)]
pub struct RunLimits {
    pub n_steps: usize,
    /// Stop once `loss > divergence_factor * loss_0`.
    pub divergence_factor: Option<f64>,
    /// Stop once `loss <= floor_factor * loss_0`.
    pub floor_factor: Option<f64>,
}

impl RunLimits {
    pub fn steps(n_steps: usize) -> Self {
        RunLimits {
            n_steps,
            divergence_factor: None,
            floor_factor: None,
        }
    }
}

/// Runs the optimizer and records every point. Non-finite values stop the
/// run and are reported in `abort` rather than returned as an error.
pub fn simulate(config: &OptimizerConfig, objective: &Objective, w0: &[f64], limits: RunLimits) -> Result<Trajectory> {
    config.validate()?;
    check_dims(objective.dim(), w0.len())?;
    let mut state = init_state(config, objective.dim())?;
    let mut w = w0.to_vec();
    let loss0 = objective.loss(&w);
    let lr0 = config.lr.at(1);
    let mut traj = Trajectory {
        label: config.label(),
        steps: vec![StepRecord {
            w: w.clone(),
            loss: loss0,
            hamiltonian: discrete_hamiltonian(config, lr0, loss0, &state),
            mask_ratio: 1.0,
            effective_lr: 0.0,
        }],
        updates: Vec::with_capacity(limits.n_steps),
        fingerprint: String::new(),
        seed: 0,
        abort: None,
    };
    if !loss0.is_finite() {
        traj.abort = Some(Abort {
            step: 0,
            reason: "non-finite loss".into(),
        });
        return Ok(traj);
    }
    for k in 1..=limits.n_steps {
        let g = objective.grad(&w);
        if !vector::all_finite(&g) {
            traj.abort = Some(Abort {
                step: k - 1,
                reason: "non-finite gradient".into(),
            });
            break;
        }
        let lr = config.lr.at(state.t + 1);
        let report = step(config, &mut state, &w, &g)?;
        let loss = objective.loss(&report.w_next);
        traj.updates.push(UpdateRecord {
            update_norm_sq: vector::norm_sq(&report.u),
            masked_inner: vector::dot(&g, &report.masked_update),
        });
        w = report.w_next;
        traj.steps.push(StepRecord {
            w: w.clone(),
            loss,
            hamiltonian: discrete_hamiltonian(config, lr, loss, &state),
            mask_ratio: report.mask_outcome.as_ref().map_or(1.0, |o| o.ratio),
            effective_lr: report.effective_lr,
        });
        if !loss.is_finite() || !vector::all_finite(&w) {
            traj.abort = Some(Abort {
                step: k,
                reason: "non-finite loss or iterate".into(),
            });
            break;
        }
        if limits.divergence_factor.is_some_and(|f| loss > f * loss0) {
            break;
        }
        if limits.floor_factor.is_some_and(|f| loss <= f * loss0) {
            break;
        }
    }
    Ok(traj)
}

/// Runs exactly `n_steps` steps; a non-finite loss or gradient is an error
/// naming the offending step.
pub fn run_steps(config: &OptimizerConfig, objective: &Objective, w0: &[f64], n_steps: usize) -> Result<Trajectory> {
    if n_steps == 0 {
        return Err(Error::InvalidConfig("n_steps must be at least 1".into()));
    }
    let traj = simulate(config, objective, w0, RunLimits::steps(n_steps))?;
    if let Some(abort) = &traj.abort {
        let what = if abort.reason.contains("gradient") {
            "gradient"
        } else {
            "loss"
        };
        return Err(Error::NonFinite { what, step: abort.step });
    }
    Ok(traj)
}
