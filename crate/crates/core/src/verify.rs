//! Numerical checks of the discrete-time descent guarantees.
//!
//! Every check returns a [`Verdict`] whose margin is the slack of the tested
//! inequality (`>= 0` means it holds). The suites draw randomized instances
//! from fixed seeds and fan out over a bounded worker pool; results are
//! returned in instance order regardless of scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dims, Error, Result};
use crate::masks::{apply_mask, MaskRule};
use crate::optimizers::{
    self, base_step, cautious_step, init_state, simulate, BaseOptimizer, OptimizerConfig, OptimizerState,
    RunLimits, Trajectory,
};
use crate::problems::{make_problem, Objective, ProblemSpec};
use crate::vector::{self, norm};

/// Relative tolerance applied to every compared quantity.
pub const REL_TOL: f64 = 1e-12;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CheckContext {
    pub seed: Option<u64>,
    pub dim: usize,
    pub lr: f64,
    /// Step-size bound or comparison bound, when the check has one.
    pub bound: Option<f64>,
    pub descriptor: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub passed: bool,
    /// Slack of the inequality, `rhs - lhs`.
    pub margin: f64,
    pub tolerance: f64,
    pub context: CheckContext,
}

impl Verdict {
    /// `lhs <= rhs` up to `REL_TOL * (1 + scale)`.
    fn compare(lhs: f64, rhs: f64, scale: f64, context: CheckContext) -> Self {
        let margin = rhs - lhs;
        let tolerance = REL_TOL * (1.0 + scale.abs());
        Verdict {
            passed: margin >= -tolerance,
            margin,
            tolerance,
            context,
        }
    }
}

fn require_mask(config: &OptimizerConfig) -> Result<&MaskRule> {
    config
        .mask
        .as_ref()
        .ok_or_else(|| Error::Precondition("check needs a cautious config (mask set)".into()))
}

fn require_no_decay(config: &OptimizerConfig) -> Result<()> {
    if config.base.weight_decay() != 0.0 {
        return Err(Error::Precondition(
            "single-step comparisons assume no weight decay".into(),
        ));
    }
    Ok(())
}

/// Largest step size for which the masked step is guaranteed no worse than
/// the base step:
/// `2Δ / (μ ||r|| (2||u|| + ||r||))`, `r = u ∘ (1 - phi)`,
/// `Δ = -(u∘g)^T (1 - phi)`. Returns `+∞` when `r = 0`.
pub fn step_size_bound(u: &[f64], g: &[f64], mask_weights: &[f64], mu: f64) -> Result<f64> {
    check_dims(u.len(), g.len())?;
    check_dims(u.len(), mask_weights.len())?;
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(Error::Precondition(format!("mu must be positive, got {mu}")));
    }
    let mut delta = 0.0;
    let mut r = Vec::with_capacity(u.len());
    for i in 0..u.len() {
        let rest = 1.0 - mask_weights[i];
        delta -= u[i] * g[i] * rest;
        r.push(u[i] * rest);
    }
    let r_norm = norm(&r);
    if r_norm == 0.0 {
        return Ok(f64::INFINITY);
    }
    if delta < 0.0 {
        return Err(Error::Precondition(format!(
            "mask violates Δ(u∘g) >= 0 at this point (Δ = {delta})"
        )));
    }
    Ok(2.0 * delta / (mu * r_norm * (2.0 * norm(u) + r_norm)))
}

/// Direction `u` the configured optimizer would propose from `state`, and
/// the resulting mask weights. `state` is not modified.
fn peek(config: &OptimizerConfig, state: &OptimizerState, g: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut probe = state.clone();
    let u = optimizers::propose_update(config, &mut probe, g)?;
    let weights = apply_mask(require_mask(config)?, &u, g)?.weights;
    Ok((u, weights))
}

/// One base step and one cautious step from the same `(w, state)` at
/// learning rate `lr`; the verdict is `L(cautious) <= L(base)`. No bound is
/// enforced.
pub fn compare_single_step(
    objective: &Objective,
    w: &[f64],
    state: &OptimizerState,
    config: &OptimizerConfig,
    lr: f64,
) -> Result<Verdict> {
    require_mask(config)?;
    require_no_decay(config)?;
    check_dims(objective.dim(), w.len())?;
    let cfg = config.clone().with_lr(lr);
    let g = objective.try_grad(w)?;
    let base = base_step(&cfg.clone().without_mask(), &mut state.clone(), w, &g)?;
    let caut = cautious_step(&cfg, &mut state.clone(), w, &g)?;
    let lb = objective.loss(&base.w_next);
    let lc = objective.loss(&caut.w_next);
    Ok(Verdict::compare(
        lc,
        lb,
        lb.abs().max(lc.abs()),
        CheckContext {
            seed: None,
            dim: w.len(),
            lr,
            bound: None,
            descriptor: format!("{} {}", objective.label(), config.label()),
        },
    ))
}

/// Single-step dominance of the masked step at `lr <= step_size_bound`.
pub fn check_single_step(
    objective: &Objective,
    w: &[f64],
    state: &OptimizerState,
    config: &OptimizerConfig,
    lr: f64,
) -> Result<Verdict> {
    let mu = objective
        .mu()
        .ok_or_else(|| Error::Precondition("objective has no smoothness constant".into()))?;
    let g = objective.try_grad(w)?;
    let (u, weights) = peek(config, state, &g)?;
    let bound = step_size_bound(&u, &g, &weights, mu)?;
    if lr > bound {
        return Err(Error::Precondition(format!("lr = {lr} exceeds the step-size bound {bound}")));
    }
    let mut v = compare_single_step(objective, w, state, config, lr)?;
    v.context.bound = Some(bound);
    Ok(v)
}

/// Inner-product mask on a convex objective: the masked step is no worse
/// than the base step at any step size.
pub fn check_inner_product_any_step(
    objective: &Objective,
    w: &[f64],
    state: &OptimizerState,
    config: &OptimizerConfig,
    lr: f64,
) -> Result<Verdict> {
    if !objective.convex() {
        return Err(Error::Precondition("objective is not marked convex".into()));
    }
    if require_mask(config)? != &MaskRule::InnerProduct {
        return Err(Error::Precondition("check needs the inner-product mask".into()));
    }
    compare_single_step(objective, w, state, config, lr)
}

/// Coordinatewise form of the inner-product result on a separable convex
/// objective: every coordinate of the masked step is no worse than the base
/// step. Needs mask weights in `{0, 1}`; the margin is the smallest
/// per-coordinate slack.
pub fn check_separable_elementwise(
    objective: &Objective,
    w: &[f64],
    state: &OptimizerState,
    config: &OptimizerConfig,
    lr: f64,
) -> Result<Verdict> {
    if !objective.convex() {
        return Err(Error::Precondition("objective is not marked convex".into()));
    }
    require_no_decay(config)?;
    let g = objective.try_grad(w)?;
    let (_, weights) = peek(config, state, &g)?;
    if weights.iter().any(|p| *p != 0.0 && *p != 1.0) {
        return Err(Error::Precondition("coordinatewise comparison needs 0/1 mask weights".into()));
    }
    let cfg = config.clone().with_lr(lr);
    let base = base_step(&cfg.clone().without_mask(), &mut state.clone(), w, &g)?.w_next;
    let caut = cautious_step(&cfg, &mut state.clone(), w, &g)?.w_next;
    // For a separable loss, swapping one coordinate changes only that term.
    let lb = objective.loss(&base);
    let mut worst = f64::INFINITY;
    let mut probe = base.clone();
    for i in 0..w.len() {
        probe[i] = caut[i];
        worst = worst.min(lb - objective.loss(&probe));
        probe[i] = base[i];
    }
    let margin = if w.is_empty() { 0.0 } else { worst };
    let tolerance = REL_TOL * (1.0 + lb.abs());
    Ok(Verdict {
        passed: margin >= -tolerance,
        margin,
        tolerance,
        context: CheckContext {
            seed: None,
            dim: w.len(),
            lr,
            bound: None,
            descriptor: format!("{} {} per-coordinate", objective.label(), config.label()),
        },
    })
}

/// Threshold masks: the cautious iterate itself does not increase the loss.
pub fn check_guaranteed_descent(
    objective: &Objective,
    w: &[f64],
    state: &OptimizerState,
    config: &OptimizerConfig,
) -> Result<Verdict> {
    let rule = require_mask(config)?;
    let rule_mu = match rule {
        MaskRule::GuaranteedDescentElementwise { mu, .. } | MaskRule::GuaranteedDescentInner { mu, .. } => *mu,
        _ => return Err(Error::Precondition("check needs a guaranteed-descent mask".into())),
    };
    require_no_decay(config)?;
    if let Some(mu) = objective.mu() {
        if rule_mu < mu {
            return Err(Error::Precondition(format!(
                "mask mu = {rule_mu} is below the objective's smoothness {mu}"
            )));
        }
    }
    let g = objective.try_grad(w)?;
    let before = objective.loss(w);
    let rep = cautious_step(config, &mut state.clone(), w, &g)?;
    let after = objective.loss(&rep.w_next);
    Ok(Verdict::compare(
        after,
        before,
        before.abs(),
        CheckContext {
            seed: None,
            dim: w.len(),
            lr: rep.effective_lr / rep.mask_outcome.as_ref().map_or(1.0, |o| if o.scale == 0.0 { 1.0 } else { o.scale }),
            bound: None,
            descriptor: format!("{} {}", objective.label(), config.label()),
        },
    ))
}

/// Average masked alignment versus the telescoped smoothness bound over a
/// recorded cautious run with constant step size `lr`:
/// `(1/T) Σ g_t^T(phi_t ∘ u_t) <= (L(w_1) - L*)/(T lr) + (μ lr / 2T) Σ ||u_t||^2`.
pub fn check_convergence_bound(
    trajectory: &Trajectory,
    objective: &Objective,
    lr: f64,
    mask_rule: &MaskRule,
) -> Result<Verdict> {
    let l_star = objective
        .optimum_value()
        .ok_or_else(|| Error::Precondition("objective has no known optimum value".into()))?;
    let mu = objective
        .mu()
        .ok_or_else(|| Error::Precondition("objective has no smoothness constant".into()))?;
    match mask_rule {
        MaskRule::SoftNegative { c } if *c > 0.0 => {
            return Err(Error::Precondition("mask does not satisfy x·phi(x) >= 0".into()));
        }
        _ => {}
    }
    if lr.is_nan() || lr <= 0.0 {
        return Err(Error::Precondition(format!("lr must be positive, got {lr}")));
    }
    let t = trajectory.updates.len();
    if t == 0 {
        return Err(Error::Precondition("trajectory has no updates".into()));
    }
    let tf = t as f64;
    let lhs = trajectory.updates.iter().map(|u| u.masked_inner).sum::<f64>() / tf;
    let b_t: f64 = trajectory.updates.iter().map(|u| u.update_norm_sq).sum();
    let l1 = trajectory.steps[0].loss;
    let rhs = (l1 - l_star) / (tf * lr) + mu * lr / (2.0 * tf) * b_t;
    Ok(Verdict::compare(
        lhs,
        rhs,
        lhs.abs().max(rhs.abs()),
        CheckContext {
            seed: Some(trajectory.seed),
            dim: objective.dim(),
            lr,
            bound: Some(rhs),
            descriptor: format!("{} {} T={t}", objective.label(), trajectory.label),
        },
    ))
}

/// Base run versus the same run through the cautious path with the
/// identity mask; passes only if every iterate is bitwise equal.
pub fn check_reduction(config: &OptimizerConfig, objective: &Objective, w0: &[f64], n_steps: usize) -> Result<Verdict> {
    let base = simulate(&config.clone().without_mask(), objective, w0, RunLimits::steps(n_steps))?;
    let ident = simulate(
        &config.clone().with_mask(MaskRule::Identity),
        objective,
        w0,
        RunLimits::steps(n_steps),
    )?;
    let mut worst = 0.0_f64;
    let mut equal = base.steps.len() == ident.steps.len();
    for (a, b) in base.steps.iter().zip(&ident.steps) {
        for (x, y) in a.w.iter().zip(&b.w) {
            if x.to_bits() != y.to_bits() {
                equal = false;
                worst = worst.max((x - y).abs());
            }
        }
    }
    Ok(Verdict {
        passed: equal,
        margin: if equal { 0.0 } else { -worst.max(f64::MIN_POSITIVE) },
        tolerance: 0.0,
        context: CheckContext {
            seed: None,
            dim: w0.len(),
            lr: config.lr.at(1),
            bound: None,
            descriptor: format!("{} {} identity-mask reduction over {n_steps} steps", objective.label(), config.base.name()),
        },
    })
}

// ---------------------------------------------------------------------------
// Randomized suites

/// One row of a suite report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckRecord {
    pub seed: u64,
    pub instance: String,
    pub lr: f64,
    pub bound: Option<f64>,
    pub margin: f64,
    pub passed: bool,
    /// Set when the instance could not be checked (precondition failure).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl CheckRecord {
    fn from_result(seed: u64, instance: String, res: Result<Verdict>) -> Self {
        match res {
            Ok(v) => CheckRecord {
                seed,
                instance,
                lr: v.context.lr,
                bound: v.context.bound,
                margin: v.margin,
                passed: v.passed,
                error: None,
            },
            Err(e) => CheckRecord {
                seed,
                instance,
                lr: f64::NAN,
                bound: None,
                margin: f64::NAN,
                passed: false,
                error: Some(e.to_string()),
            },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Evidence {
    /// The checked statement has a proof; the suite tests the implementation.
    Proved,
    /// Stated without proof; the suite is the only evidence.
    EmpiricalOnly,
    /// Recorded for information; failures do not fail the run.
    Informational,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub name: String,
    pub evidence: Evidence,
    pub total: usize,
    pub passed: usize,
    pub min_margin: f64,
    pub checks: Vec<CheckRecord>,
}

impl SuiteReport {
    fn new(name: &str, evidence: Evidence, checks: Vec<CheckRecord>) -> Self {
        let passed = checks.iter().filter(|c| c.passed).count();
        let min_margin = checks.iter().map(|c| c.margin).fold(f64::INFINITY, f64::min);
        SuiteReport {
            name: name.to_string(),
            evidence,
            total: checks.len(),
            passed,
            min_margin,
            checks,
        }
    }

    pub fn all_passed(&self) -> bool {
        self.passed == self.total
    }

    /// Whether this suite should fail a verification run.
    pub fn gating(&self) -> bool {
        self.evidence != Evidence::Informational
    }

    pub fn failure_rate(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            (self.total - self.passed) as f64 / self.total as f64
        }
    }
}

/// Runs `f(i)` for `i in 0..n` on at most `workers` threads; output is in
/// index order.
pub fn par_map<T, F>(workers: usize, n: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidConfig(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(|| (0..n).into_par_iter().map(&f).collect()))
}

/// A randomized starting point for one check.
#[derive(Clone, Debug)]
pub struct Instance {
    pub seed: u64,
    pub objective: Objective,
    pub w: Vec<f64>,
    pub state: OptimizerState,
    /// Base optimizer with the suite's mask attached.
    pub config: OptimizerConfig,
    /// `synthetic` (Gaussian optimizer state) or `trajectory` (state taken
    /// from a real run).
    pub source: &'static str,
}

impl Instance {
    pub fn describe(&self) -> String {
        format!(
            "{} {} source={}",
            self.objective.label(),
            self.config.label(),
            self.source
        )
    }
}

fn normal(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

/// Random μ-smooth convex objective: mostly dense quadratics (dims 2–50),
/// every tenth a small logistic regression.
pub fn random_objective(seed: u64) -> Result<Objective> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_0b1e);
    if seed % 10 == 9 {
        let dim = 2 + (seed as usize / 10) % 9;
        make_problem(&ProblemSpec::Logistic {
            n_samples: 64,
            dim,
            seed,
        })
    } else {
        let dim = 2 + (seed as usize) % 49;
        let mu = (rng.random_range(-2.0..2.0_f64)).exp();
        make_problem(&ProblemSpec::RandomSmoothQuadratic { dim, mu, seed })
    }
}

/// Random instance: objective, point and optimizer state. Even seeds use a
/// Gaussian optimizer state; odd seeds run the base optimizer for a few
/// steps and take its state.
pub fn random_instance(seed: u64, mask: &MaskRule) -> Result<Instance> {
    let objective = random_objective(seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ 0xc0ffee);
    let d = objective.dim();
    let mu = objective.mu().unwrap_or(1.0);
    let beta = rng.random_range(0.0..0.99);
    let (base, pre_lr) = match (seed / 2) % 4 {
        0 => (BaseOptimizer::Gdm { beta }, 0.5 * (1.0 - beta) / mu),
        1 => (BaseOptimizer::SignedMomentum { beta }, 0.01),
        2 => (
            BaseOptimizer::AdamW {
                beta1: 0.9,
                beta2: 0.999,
                eps: 1e-8,
                weight_decay: 0.0,
            },
            0.01,
        ),
        _ => (
            BaseOptimizer::Lion {
                beta1: 0.9,
                beta2: 0.99,
                weight_decay: 0.0,
            },
            0.01,
        ),
    };
    let config = OptimizerConfig::new(base, pre_lr).with_mask(mask.clone());
    let mut w = normal(&mut rng, d);
    let mut state = init_state(&config, d)?;
    let source = if seed.is_multiple_of(2) {
        let gscale = vector::norm(&objective.grad(&w)) / (d as f64).sqrt();
        let mut fill = |v: &mut Vec<f64>, scale: f64| {
            for x in v.iter_mut() {
                *x = scale * rng.sample::<f64, _>(StandardNormal);
            }
        };
        fill(&mut state.s, gscale.max(1e-3) * 3.0);
        fill(&mut state.m, gscale.max(1e-3));
        for x in state.v.iter_mut() {
            let z: f64 = rng.sample(StandardNormal);
            *x = (gscale.max(1e-3) * z).powi(2);
        }
        if !state.m.is_empty() || !state.v.is_empty() {
            state.t = rng.random_range(1..50);
        }
        "synthetic"
    } else {
        let steps = rng.random_range(1..=20);
        let base_cfg = config.clone().without_mask();
        for _ in 0..steps {
            let g = objective.grad(&w);
            w = base_step(&base_cfg, &mut state, &w, &g)?.w_next;
        }
        "trajectory"
    };
    Ok(Instance {
        seed,
        objective,
        w,
        state,
        config,
        source,
    })
}

/// Options shared by the randomized suites.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteOptions {
    pub instances: usize,
    pub seed_offset: u64,
    pub workers: usize,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        SuiteOptions {
            instances: 1000,
            seed_offset: 0,
            workers: 1,
        }
    }
}

/// Single-step dominance at `lr = factor · bound` over random instances.
/// Masks alternate between the clamped default and `phi_c` with `c = 0.1`,
/// both of which satisfy `Δ >= 0`. With `factor > 1` the bound no longer
/// applies and the suite is informational.
pub fn single_step_suite(opts: SuiteOptions, factor: f64) -> Result<SuiteReport> {
    let checks = par_map(opts.workers, opts.instances, |i| {
        let seed = opts.seed_offset + i as u64;
        let mask = if seed % 3 == 2 {
            MaskRule::SoftNegative { c: 0.1 }
        } else {
            MaskRule::default_clamped()
        };
        let run = || -> Result<(String, Verdict)> {
            let inst = random_instance(seed, &mask)?;
            let mu = inst.objective.mu().expect("generated objectives carry mu");
            let g = inst.objective.grad(&inst.w);
            let (u, weights) = peek(&inst.config, &inst.state, &g)?;
            let bound = step_size_bound(&u, &g, &weights, mu)?;
            let lr = if bound.is_finite() { factor * bound } else { 1.0 / mu };
            let mut v = compare_single_step(&inst.objective, &inst.w, &inst.state, &inst.config, lr)?;
            v.context.bound = Some(bound);
            Ok((inst.describe(), v))
        };
        match run() {
            Ok((desc, v)) => CheckRecord::from_result(seed, desc, Ok(v)),
            Err(e) => CheckRecord::from_result(seed, format!("seed {seed}"), Err(e)),
        }
    })?;
    let evidence = if factor <= 1.0 { Evidence::Proved } else { Evidence::Informational };
    Ok(SuiteReport::new(&format!("single_step(lr={factor}*bound)"), evidence, checks))
}

/// Default step sizes for the any-step-size suite.
pub const ANY_STEP_SIZES: [f64; 5] = [1e-3, 1e-2, 1e-1, 1.0, 10.0];

/// Inner-product mask on convex instances at every step size in `lrs`.
/// The step sizes are relative to `1/μ` so they span stable and unstable
/// regimes on every instance.
pub fn inner_product_suite(opts: SuiteOptions, lrs: &[f64]) -> Result<SuiteReport> {
    let per = lrs.len();
    let checks = par_map(opts.workers, opts.instances * per, |k| {
        let seed = opts.seed_offset + (k / per) as u64;
        let factor = lrs[k % per];
        let run = || -> Result<(String, Verdict)> {
            let inst = random_instance(seed, &MaskRule::InnerProduct)?;
            let lr = factor / inst.objective.mu().unwrap_or(1.0);
            let v = check_inner_product_any_step(&inst.objective, &inst.w, &inst.state, &inst.config, lr)?;
            Ok((format!("{} lr*mu={factor}", inst.describe()), v))
        };
        match run() {
            Ok((desc, v)) => CheckRecord::from_result(seed, desc, Ok(v)),
            Err(e) => CheckRecord::from_result(seed, format!("seed {seed}"), Err(e)),
        }
    })?;
    Ok(SuiteReport::new("inner_product_any_step", Evidence::Proved, checks))
}

/// Coordinatewise check on `L = ½||a∘w||²` with random `a`, `w` and GDM
/// state, using the non-strict clamped default mask (weights in `{0, 1}`
/// for `d = 2`).
pub fn separable_suite(opts: SuiteOptions, lrs: &[f64]) -> Result<SuiteReport> {
    let per = lrs.len();
    let checks = par_map(opts.workers, opts.instances * per, |k| {
        let seed = opts.seed_offset + (k / per) as u64;
        let lr = lrs[k % per];
        let run = || -> Result<(String, Verdict)> {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5e9a);
            let a: Vec<f64> = if seed == 0 {
                vec![1.0, 2.0]
            } else {
                (0..2).map(|_| rng.random_range(0.1..3.0)).collect()
            };
            let obj = make_problem(&ProblemSpec::SeparableQuadratic { a: a.clone() })?;
            let mask = MaskRule::DefaultScaled {
                xi: 1.0,
                strict: false,
                clamp_alpha_min_1: true,
                form: Default::default(),
            };
            let cfg = OptimizerConfig::gdm(rng.random_range(0.0..0.99), lr).with_mask(mask);
            let mut st = init_state(&cfg, 2)?;
            st.s = normal(&mut rng, 2);
            let w = normal(&mut rng, 2);
            let v = check_separable_elementwise(&obj, &w, &st, &cfg, lr)?;
            Ok((format!("{} a={a:?} lr={lr}", obj.label()), v))
        };
        match run() {
            Ok((desc, v)) => CheckRecord::from_result(seed, desc, Ok(v)),
            Err(e) => CheckRecord::from_result(seed, format!("seed {seed}"), Err(e)),
        }
    })?;
    Ok(SuiteReport::new("separable_elementwise", Evidence::Proved, checks))
}

/// Which threshold mask a guaranteed-descent suite uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DescentForm {
    Elementwise,
    Inner,
}

/// Single-step descent of the threshold-masked iterate. Step sizes are drawn
/// log-uniformly in `[1e-3, 10]/μ`, `alpha_k` uniformly in `[0, 3]`; the
/// elementwise form uses `sigma = lr·alpha_k·(1 + U[0,1))`. Every 50th
/// inner-form instance uses `lr = 1e3/μ`.
pub fn guaranteed_descent_suite(opts: SuiteOptions, form: DescentForm) -> Result<SuiteReport> {
    let checks = par_map(opts.workers, opts.instances, |i| {
        let seed = opts.seed_offset + i as u64;
        let run = || -> Result<(String, Verdict)> {
            let inst = random_instance(seed, &MaskRule::Identity)?;
            let mu = inst.objective.mu().expect("generated objectives carry mu");
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xde5c);
            let mut lr = 10f64.powf(rng.random_range(-3.0..1.0)) / mu;
            let alpha_k = rng.random_range(0.0..3.0);
            let mask = match form {
                DescentForm::Elementwise => MaskRule::GuaranteedDescentElementwise {
                    mu,
                    sigma: lr * alpha_k * (1.0 + rng.random::<f64>()),
                    alpha_k,
                },
                DescentForm::Inner => {
                    if i % 50 == 49 {
                        lr = 1e3 / mu;
                    }
                    MaskRule::GuaranteedDescentInner { mu, eps_k: lr, alpha_k }
                }
            };
            let cfg = OptimizerConfig {
                mask: Some(mask),
                ..inst.config.clone().with_lr(lr)
            };
            let mut v = check_guaranteed_descent(&inst.objective, &inst.w, &inst.state, &cfg)?;
            v.context.lr = lr;
            Ok((format!("{} lr={lr:.3e} alpha={alpha_k:.3}", inst.describe()), v))
        };
        match run() {
            Ok((desc, v)) => CheckRecord::from_result(seed, desc, Ok(v)),
            Err(e) => CheckRecord::from_result(seed, format!("seed {seed}"), Err(e)),
        }
    })?;
    let name = match form {
        DescentForm::Elementwise => "guaranteed_descent_elementwise",
        DescentForm::Inner => "guaranteed_descent_inner",
    };
    let evidence = match form {
        DescentForm::Elementwise => Evidence::Proved,
        DescentForm::Inner => Evidence::EmpiricalOnly,
    };
    Ok(SuiteReport::new(name, evidence, checks))
}

/// One convergence-bound case: a cautious run and its inequality.
#[derive(Clone, Debug)]
pub struct BoundCase {
    pub name: &'static str,
    pub problem: ProblemSpec,
    pub config: OptimizerConfig,
    pub w0: Option<Vec<f64>>,
    pub n_steps: usize,
}

/// C-GDM and C-AdamW on the toy quadratic and a logistic instance.
pub fn standard_bound_cases() -> Vec<BoundCase> {
    let toy = ProblemSpec::ToyQuadratic { kappa: 4.0 };
    let logistic = ProblemSpec::Logistic {
        n_samples: 512,
        dim: 32,
        seed: 0,
    };
    vec![
        BoundCase {
            name: "c-gdm toy",
            problem: toy.clone(),
            config: OptimizerConfig::gdm(0.9, 0.01).with_mask(MaskRule::default_scaled()),
            w0: Some(vec![1.0, 1.0]),
            n_steps: 1000,
        },
        BoundCase {
            name: "c-adamw toy",
            problem: toy,
            config: OptimizerConfig::cautious_adamw(0.9, 0.999, 0.01),
            w0: Some(vec![1.0, 1.0]),
            n_steps: 1000,
        },
        BoundCase {
            name: "c-gdm logistic",
            problem: logistic.clone(),
            config: OptimizerConfig::gdm(0.9, 0.1).with_mask(MaskRule::default_scaled()),
            w0: None,
            n_steps: 2000,
        },
        BoundCase {
            name: "c-adamw logistic",
            problem: logistic,
            config: OptimizerConfig::cautious_adamw(0.9, 0.999, 0.01),
            w0: None,
            n_steps: 2000,
        },
    ]
}

pub fn convergence_bound_suite(cases: &[BoundCase], workers: usize) -> Result<SuiteReport> {
    let checks = par_map(workers, cases.len(), |i| {
        let case = &cases[i];
        let run = || -> Result<Verdict> {
            let obj = make_problem(&case.problem)?;
            let w0 = case.w0.clone().unwrap_or_else(|| vec![0.0; obj.dim()]);
            let traj = simulate(&case.config, &obj, &w0, RunLimits::steps(case.n_steps))?;
            let lr = case.config.lr.at(1);
            check_convergence_bound(&traj, &obj, lr, case.config.mask.as_ref().unwrap_or(&MaskRule::Identity))
        };
        CheckRecord::from_result(i as u64, case.name.to_string(), run())
    })?;
    Ok(SuiteReport::new("convergence_bound", Evidence::Proved, checks))
}

/// Identity-mask reduction for every base optimizer over `n_steps` on the
/// toy quadratic from `(1, 1)`.
pub fn reduction_suite(n_steps: usize) -> Result<SuiteReport> {
    let obj = make_problem(&ProblemSpec::ToyQuadratic { kappa: 4.0 })?;
    let mut with_decay = OptimizerConfig::adamw(0.9, 0.999, 0.01);
    if let BaseOptimizer::AdamW { weight_decay, .. } = &mut with_decay.base {
        *weight_decay = 0.1;
    }
    let configs = [
        OptimizerConfig::new(BaseOptimizer::Gd, 0.05),
        OptimizerConfig::gdm(0.9, 0.01),
        OptimizerConfig::new(BaseOptimizer::SignedMomentum { beta: 0.9 }, 0.01),
        OptimizerConfig::adamw(0.9, 0.999, 0.01),
        with_decay,
        OptimizerConfig::lion(0.9, 0.99, 0.01),
    ];
    let checks = configs
        .iter()
        .enumerate()
        .map(|(i, cfg)| {
            CheckRecord::from_result(
                i as u64,
                cfg.base.name().to_string(),
                check_reduction(cfg, &obj, &[1.0, 1.0], n_steps),
            )
        })
        .collect();
    Ok(SuiteReport::new("identity_reduction", Evidence::Proved, checks))
}

/// Collected suite results, serialized as the `verify` report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub suites: Vec<SuiteReport>,
}

impl VerifyReport {
    /// True when every gating suite passed all its checks.
    pub fn passed(&self) -> bool {
        self.suites.iter().filter(|s| s.gating()).all(|s| s.all_passed())
    }
}

/// Sizes for [`run_all`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyPlan {
    pub single_step_instances: usize,
    pub inner_product_instances: usize,
    pub separable_instances: usize,
    pub descent_instances: usize,
    pub reduction_steps: usize,
    pub seed: u64,
}

impl Default for VerifyPlan {
    fn default() -> Self {
        VerifyPlan {
            single_step_instances: 1000,
            inner_product_instances: 500,
            separable_instances: 100,
            descent_instances: 1000,
            reduction_steps: 100,
            seed: 0,
        }
    }
}

pub fn run_all(plan: &VerifyPlan, workers: usize) -> Result<VerifyReport> {
    let opts = |n| SuiteOptions {
        instances: n,
        seed_offset: plan.seed,
        workers,
    };
    Ok(VerifyReport {
        suites: vec![
            single_step_suite(opts(plan.single_step_instances), 0.9)?,
            single_step_suite(opts(plan.single_step_instances), 2.0)?,
            inner_product_suite(opts(plan.inner_product_instances), &ANY_STEP_SIZES)?,
            separable_suite(opts(plan.separable_instances), &ANY_STEP_SIZES)?,
            guaranteed_descent_suite(opts(plan.descent_instances), DescentForm::Elementwise)?,
            guaranteed_descent_suite(opts(plan.descent_instances), DescentForm::Inner)?,
            convergence_bound_suite(&standard_bound_cases(), workers)?,
            reduction_suite(plan.reduction_steps)?,
        ],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn half_square() -> Objective {
        Objective::diagonal_quadratic(vec![1.0, 1.0], vec![0.0, 0.0])
            .unwrap()
            .with_mu(1.0)
    }

    #[test]
    fn bound_matches_hand_value() {
        let b = step_size_bound(&[1.0, -1.0], &[1.0, 1.0], &[1.0, 0.0], 1.0).unwrap();
        assert!((b - 2.0 / (2.0 * 2f64.sqrt() + 1.0)).abs() < 1e-15);
        assert!((b - 0.5224).abs() < 1e-4);
    }

    #[test]
    fn bound_is_infinite_without_residual() {
        assert_eq!(step_size_bound(&[1.0, 2.0], &[1.0, 1.0], &[1.0, 1.0], 1.0).unwrap(), f64::INFINITY);
        assert_eq!(step_size_bound(&[0.0, 0.0], &[1.0, 1.0], &[0.0, 0.0], 1.0).unwrap(), f64::INFINITY);
    }

    #[test]
    fn bound_rejects_negative_delta() {
        // phi = 0 on an aligned coordinate: Δ = -1.
        let err = step_size_bound(&[1.0], &[1.0], &[0.0], 1.0).unwrap_err();
        assert!(matches!(err, Error::Precondition(_)));
    }

    #[test]
    fn zero_lr_single_step_has_zero_margin() {
        let obj = half_square();
        let cfg = OptimizerConfig::gdm(0.9, 0.1).with_mask(MaskRule::default_clamped());
        let mut st = init_state(&cfg, 2).unwrap();
        st.s = vec![-3.0, 1.0];
        let v = check_single_step(&obj, &[1.0, 1.0], &st, &cfg, 0.0).unwrap();
        assert!(v.passed);
        assert_eq!(v.margin, 0.0);
    }

    #[test]
    fn inner_product_uphill_case() {
        // L = ½||w||², w = (1, 0), u = (-1, 0) via GD on a shifted state: use
        // GDM with beta = 1/2, s = (-4, 0) so u = 0.5*(-4) + 1 = -1.
        let obj = half_square();
        let cfg = OptimizerConfig::gdm(0.5, 1.0).with_mask(MaskRule::InnerProduct);
        let mut st = init_state(&cfg, 2).unwrap();
        st.s = vec![-4.0, 0.0];
        for lr in ANY_STEP_SIZES {
            let v = check_inner_product_any_step(&obj, &[1.0, 0.0], &st, &cfg, lr).unwrap();
            assert!(v.passed && v.margin > 0.0, "{v:?}");
        }
    }

    #[test]
    fn inner_product_aligned_case_is_identity() {
        let obj = half_square();
        let cfg = OptimizerConfig::gdm(0.5, 1.0).with_mask(MaskRule::InnerProduct);
        let st = init_state(&cfg, 2).unwrap();
        let v = check_inner_product_any_step(&obj, &[1.0, 0.5], &st, &cfg, 0.3).unwrap();
        assert_eq!(v.margin, 0.0);
    }

    #[test]
    fn inner_product_requires_convex() {
        let obj = half_square().with_convex(false);
        let cfg = OptimizerConfig::gdm(0.5, 1.0).with_mask(MaskRule::InnerProduct);
        let st = init_state(&cfg, 2).unwrap();
        assert!(check_inner_product_any_step(&obj, &[1.0, 0.5], &st, &cfg, 0.3).is_err());
    }

    #[test]
    fn huge_step_inner_threshold_masks_out() {
        let obj = half_square();
        let cfg = OptimizerConfig::gdm(0.9, 1e3).with_mask(MaskRule::GuaranteedDescentInner {
            mu: 1.0,
            eps_k: 1e3,
            alpha_k: 1.0,
        });
        let st = init_state(&cfg, 2).unwrap();
        let v = check_guaranteed_descent(&obj, &[1.0, -2.0], &st, &cfg).unwrap();
        assert!(v.passed);
        assert_eq!(v.margin, 0.0);
    }

    #[test]
    fn guaranteed_descent_rejects_small_sigma() {
        let obj = half_square();
        let cfg = OptimizerConfig::gdm(0.9, 0.5).with_mask(MaskRule::GuaranteedDescentElementwise {
            mu: 1.0,
            sigma: 0.1,
            alpha_k: 1.0,
        });
        let st = init_state(&cfg, 2).unwrap();
        assert!(check_guaranteed_descent(&obj, &[1.0, 1.0], &st, &cfg).is_err());
    }

    #[test]
    fn convergence_bound_from_optimum() {
        let obj = half_square().with_optimum(0.0);
        let cfg = OptimizerConfig::gdm(0.9, 0.1).with_mask(MaskRule::default_scaled());
        let traj = simulate(&cfg, &obj, &[0.0, 0.0], RunLimits::steps(1)).unwrap();
        let v = check_convergence_bound(&traj, &obj, 0.1, &MaskRule::default_scaled()).unwrap();
        assert!(v.passed);
        assert_eq!(v.margin, 0.0);
    }

    #[test]
    fn convergence_bound_needs_optimum() {
        let obj = Objective::from_fns(1, |w| w[0] * w[0], |w| vec![2.0 * w[0]]).with_mu(2.0);
        let cfg = OptimizerConfig::gdm(0.9, 0.1).with_mask(MaskRule::default_scaled());
        let traj = simulate(&cfg, &obj, &[1.0], RunLimits::steps(3)).unwrap();
        assert!(check_convergence_bound(&traj, &obj, 0.1, &MaskRule::default_scaled()).is_err());
    }

    #[test]
    fn reductions_hold() {
        let rep = reduction_suite(100).unwrap();
        assert!(rep.all_passed(), "{:?}", rep.checks);
    }

    #[test]
    fn suites_are_deterministic_across_workers() {
        let a = single_step_suite(
            SuiteOptions {
                instances: 24,
                seed_offset: 0,
                workers: 1,
            },
            0.9,
        )
        .unwrap();
        let b = single_step_suite(
            SuiteOptions {
                instances: 24,
                seed_offset: 0,
                workers: 4,
            },
            0.9,
        )
        .unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        assert!(a.all_passed(), "{:?}", a.checks.iter().filter(|c| !c.passed).collect::<Vec<_>>());
    }
}
