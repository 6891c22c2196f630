//! JSON experiment configuration.

use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dynamics::{DescentMap, KineticEnergy};
use crate::error::{Error, Result};
use crate::masks::MaskRule;
use crate::optimizers::{LrSchedule, OptimizerConfig};
use crate::problems::ProblemSpec;
use crate::verify::VerifyPlan;

use super::rate::RateWindow;

/// Largest accepted `n_steps` for discrete runs.
pub const MAX_STEPS: usize = 10_000_000;
/// Largest accepted grid axis length.
pub const MAX_AXIS: usize = 1_000;

/// A grid axis: explicit values or `n` evenly (or log-evenly) spaced points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Axis {
    Values(Vec<f64>),
    Spaced(Spacing),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "spacing", rename_all = "snake_case", deny_unknown_fields)]
pub enum Spacing {
    Linear { start: f64, stop: f64, n: usize },
    Log { start: f64, stop: f64, n: usize },
}

impl Axis {
    pub fn values(&self) -> Vec<f64> {
        match self {
            Axis::Values(v) => v.clone(),
            Axis::Spaced(Spacing::Linear { start, stop, n }) => spaced(*start, *stop, *n),
            Axis::Spaced(Spacing::Log { start, stop, n }) => {
                spaced(start.log10(), stop.log10(), *n).into_iter().map(|e| 10f64.powf(e)).collect()
            }
        }
    }

    fn validate(&self, name: &str) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(format!("grid axis {name}: {m}")));
        match self {
            Axis::Values(v) => {
                if v.is_empty() || v.len() > MAX_AXIS {
                    return bad(format!("needs 1..={MAX_AXIS} values"));
                }
                if !v.iter().all(|x| x.is_finite()) {
                    return bad("values must be finite".into());
                }
            }
            Axis::Spaced(Spacing::Linear { start, stop, n }) | Axis::Spaced(Spacing::Log { start, stop, n }) => {
                if *n == 0 || *n > MAX_AXIS {
                    return bad(format!("n must be in 1..={MAX_AXIS}"));
                }
                if !(start.is_finite() && stop.is_finite()) {
                    return bad("endpoints must be finite".into());
                }
                if matches!(self, Axis::Spaced(Spacing::Log { .. })) && !(*start > 0.0 && *stop > 0.0) {
                    return bad("log spacing needs positive endpoints".into());
                }
            }
        }
        Ok(())
    }
}

fn spaced(start: f64, stop: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![start];
    }
    let step = (stop - start) / (n - 1) as f64;
    (0..n)
        .map(|i| if i == n - 1 { stop } else { start + step * i as f64 })
        .collect()
}

/// Learning-rate by momentum grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(default = "default_lr_axis")]
    pub lr: Axis,
    #[serde(default = "default_beta_axis")]
    pub beta: Axis,
    /// A cell diverges once `L_t > divergence_factor * L_0`.
    #[serde(default = "default_divergence")]
    pub divergence_factor: f64,
    /// A run stops early once `L_t <= floor_factor * L_0`.
    #[serde(default = "default_floor")]
    pub floor_factor: f64,
}

fn default_lr_axis() -> Axis {
    Axis::Spaced(Spacing::Log {
        start: 1e-2,
        stop: 1.0,
        n: 25,
    })
}

fn default_beta_axis() -> Axis {
    Axis::Spaced(Spacing::Linear {
        start: 0.0,
        stop: 0.96,
        n: 25,
    })
}

fn default_divergence() -> f64 {
    1e6
}

fn default_floor() -> f64 {
    1e-100
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            lr: default_lr_axis(),
            beta: default_beta_axis(),
            divergence_factor: default_divergence(),
            floor_factor: default_floor(),
        }
    }
}

impl GridSpec {
    fn validate(&self) -> Result<()> {
        self.lr.validate("lr")?;
        self.beta.validate("beta")?;
        if self.lr.values().iter().any(|x| *x <= 0.0) {
            return Err(Error::InvalidConfig("grid learning rates must be > 0".into()));
        }
        if self.beta.values().iter().any(|b| !(0.0..1.0).contains(b)) {
            return Err(Error::InvalidConfig("grid momentum values must be in [0, 1)".into()));
        }
        if !(self.divergence_factor > 1.0 && self.divergence_factor.is_finite()) {
            return Err(Error::InvalidConfig("divergence_factor must be finite and > 1".into()));
        }
        if !(self.floor_factor >= 0.0 && self.floor_factor < 1.0) {
            return Err(Error::InvalidConfig("floor_factor must be in [0, 1)".into()));
        }
        Ok(())
    }
}

/// Starting point: explicit coordinates or a named preset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StartPoint {
    Vector(Vec<f64>),
    Preset(Preset),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    Ones,
    Zeros,
    /// Standard normal coordinates drawn from the run seed.
    Random,
}

impl Default for StartPoint {
    fn default() -> Self {
        StartPoint::Preset(Preset::Ones)
    }
}

impl StartPoint {
    pub fn resolve(&self, dim: usize, seed: u64) -> Result<Vec<f64>> {
        match self {
            StartPoint::Vector(v) => {
                if v.len() != dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        found: v.len(),
                    });
                }
                if !crate::vector::all_finite(v) {
                    return Err(Error::InvalidConfig("w0 must be finite".into()));
                }
                Ok(v.clone())
            }
            StartPoint::Preset(Preset::Ones) => Ok(vec![1.0; dim]),
            StartPoint::Preset(Preset::Zeros) => Ok(vec![0.0; dim]),
            StartPoint::Preset(Preset::Random) => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                Ok((0..dim).map(|_| StandardNormal.sample(&mut rng)).collect())
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
    Svg,
}

impl std::str::FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            "svg" => Ok(Format::Svg),
            other => Err(Error::InvalidConfig(format!("unknown format {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default = "default_out_dir")]
    pub dir: PathBuf,
    #[serde(default = "default_formats")]
    pub formats: Vec<Format>,
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_formats() -> Vec<Format> {
    vec![Format::Csv, Format::Json]
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec {
            dir: default_out_dir(),
            formats: default_formats(),
        }
    }
}

/// Mask variants compared by `ablate-phi`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AblationSpec {
    #[serde(default = "default_ablation_masks")]
    pub masks: Vec<MaskRule>,
}

pub fn default_ablation_masks() -> Vec<MaskRule> {
    vec![
        MaskRule::default_scaled(),
        MaskRule::default_clamped(),
        MaskRule::SoftNegative { c: 0.01 },
        MaskRule::SoftNegative { c: 0.1 },
        MaskRule::SoftNegative { c: 0.0 },
        MaskRule::InnerProduct,
        MaskRule::Identity,
    ]
}

impl Default for AblationSpec {
    fn default() -> Self {
        AblationSpec {
            masks: default_ablation_masks(),
        }
    }
}

/// Continuous-flow integration settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicsSpec {
    #[serde(default = "default_kinetic")]
    pub kinetic: KineticEnergy,
    #[serde(default)]
    pub phi_map: DescentMap,
    #[serde(default = "default_psi")]
    pub psi_map: DescentMap,
    #[serde(default)]
    pub mask: Option<MaskRule>,
    /// Initial momentum; zeros when absent.
    #[serde(default)]
    pub s0: Option<Vec<f64>>,
    /// Initial second moment for the Adam flow; `∇L(w0)^2` when absent.
    #[serde(default)]
    pub v0: Option<Vec<f64>>,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_t_end")]
    pub t_end: f64,
    /// Write every n-th sample to the output files.
    #[serde(default = "default_sample_every")]
    pub sample_every: usize,
}

fn default_kinetic() -> KineticEnergy {
    KineticEnergy::Quadratic
}

fn default_psi() -> DescentMap {
    DescentMap::Linear { c: 1.0 }
}

fn default_dt() -> f64 {
    1e-3
}

fn default_t_end() -> f64 {
    20.0
}

fn default_sample_every() -> usize {
    10
}

impl Default for DynamicsSpec {
    fn default() -> Self {
        DynamicsSpec {
            kinetic: default_kinetic(),
            phi_map: DescentMap::Zero,
            psi_map: default_psi(),
            mask: Some(MaskRule::default_clamped()),
            s0: None,
            v0: None,
            dt: default_dt(),
            t_end: default_t_end(),
            sample_every: default_sample_every(),
        }
    }
}

/// Paired base/cautious training benchmark settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSpec {
    #[serde(default = "default_train_n")]
    pub n_samples: usize,
    #[serde(default = "default_train_dim")]
    pub dim: usize,
    #[serde(default = "default_train_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_train_steps")]
    pub n_steps: usize,
    /// Base optimizer; any mask here is ignored.
    #[serde(default = "default_train_optimizer")]
    pub optimizer: OptimizerConfig,
    /// Mask added for the cautious run.
    #[serde(default = "MaskRule::default_scaled")]
    pub mask: MaskRule,
    /// Loss target as a fraction of the initial gap: `L* + f (L_0 - L*)`.
    #[serde(default = "default_target_fraction")]
    pub target_fraction: f64,
}

fn default_train_n() -> usize {
    512
}

fn default_train_dim() -> usize {
    32
}

fn default_train_seeds() -> Vec<u64> {
    (0..10).collect()
}

fn default_train_steps() -> usize {
    2000
}

fn default_train_optimizer() -> OptimizerConfig {
    OptimizerConfig {
        lr: LrSchedule::WarmupCosine {
            peak: 0.01,
            warmup_steps: 100,
            total_steps: 2000,
            min_lr: 0.001,
        },
        ..OptimizerConfig::adamw(0.9, 0.999, 0.01)
    }
}

fn default_target_fraction() -> f64 {
    1e-3
}

impl Default for TrainSpec {
    fn default() -> Self {
        TrainSpec {
            n_samples: default_train_n(),
            dim: default_train_dim(),
            seeds: default_train_seeds(),
            n_steps: default_train_steps(),
            optimizer: default_train_optimizer(),
            mask: MaskRule::default_scaled(),
            target_fraction: default_target_fraction(),
        }
    }
}

fn default_optimizers() -> Vec<OptimizerConfig> {
    vec![
        OptimizerConfig::gdm(0.99, 0.01),
        OptimizerConfig::gdm(0.99, 0.01).with_mask(MaskRule::default_scaled()),
    ]
}

fn default_n_steps() -> usize {
    1000
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

fn default_workers() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub problem: ProblemSpec,
    #[serde(default = "default_optimizers")]
    pub optimizers: Vec<OptimizerConfig>,
    #[serde(default)]
    pub w0: StartPoint,
    #[serde(default = "default_n_steps")]
    pub n_steps: usize,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub grid: Option<GridSpec>,
    #[serde(default)]
    pub rate_window: RateWindow,
    #[serde(default)]
    pub ablation: Option<AblationSpec>,
    #[serde(default)]
    pub dynamics: Option<DynamicsSpec>,
    #[serde(default)]
    pub train: Option<TrainSpec>,
    #[serde(default)]
    pub verify: Option<VerifyPlan>,
    #[serde(default)]
    pub outputs: OutputSpec,
    /// Worker threads; never changes results.
    #[serde(default = "default_workers")]
    pub workers: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("empty config uses defaults")
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.problem.validate()?;
        if self.optimizers.is_empty() {
            return Err(Error::InvalidConfig("at least one optimizer is required".into()));
        }
        for opt in &self.optimizers {
            opt.validate()?;
            if let LrSchedule::Constant(lr) = opt.lr {
                if lr <= 0.0 {
                    return Err(Error::InvalidConfig(format!("lr must be > 0, got {lr}")));
                }
            }
        }
        if let StartPoint::Vector(v) = &self.w0 {
            if v.len() != self.problem.dim() {
                return Err(Error::DimensionMismatch {
                    expected: self.problem.dim(),
                    found: v.len(),
                });
            }
        }
        if self.n_steps > MAX_STEPS {
            return Err(Error::InvalidConfig(format!("n_steps must be <= {MAX_STEPS}")));
        }
        if self.seeds.is_empty() {
            return Err(Error::InvalidConfig("seeds must be non-empty".into()));
        }
        if let Some(grid) = &self.grid {
            grid.validate()?;
        }
        self.rate_window.validate()?;
        if let Some(ab) = &self.ablation {
            for m in &ab.masks {
                m.validate()?;
            }
        }
        if let Some(dy) = &self.dynamics {
            if !(dy.dt > 0.0 && dy.dt.is_finite() && dy.t_end >= dy.dt && dy.t_end.is_finite()) {
                return Err(Error::InvalidConfig("dynamics needs dt > 0 and t_end >= dt".into()));
            }
            if dy.t_end / dy.dt > MAX_STEPS as f64 {
                return Err(Error::InvalidConfig(format!("dynamics may take at most {MAX_STEPS} steps")));
            }
            if dy.sample_every == 0 {
                return Err(Error::InvalidConfig("sample_every must be >= 1".into()));
            }
        }
        if let Some(tr) = &self.train {
            tr.optimizer.validate()?;
            tr.mask.validate()?;
            if tr.seeds.is_empty() || tr.n_steps > MAX_STEPS {
                return Err(Error::InvalidConfig("train needs seeds and a bounded n_steps".into()));
            }
            ProblemSpec::Logistic {
                n_samples: tr.n_samples,
                dim: tr.dim,
                seed: 0,
            }
            .validate()?;
            if !(0.0..1.0).contains(&tr.target_fraction) {
                return Err(Error::InvalidConfig("target_fraction must be in [0, 1)".into()));
            }
        }
        if self.workers == 0 {
            return Err(Error::InvalidConfig("workers must be >= 1".into()));
        }
        Ok(())
    }

    /// The grid to sweep, or the default grid when none is configured.
    pub fn grid_or_default(&self) -> GridSpec {
        self.grid.clone().unwrap_or_default()
    }

    /// Short SHA-256 of the canonical JSON of every result-affecting field
    /// (outputs and worker count excluded).
    pub fn fingerprint(&self) -> String {
        let mut scrubbed = self.clone();
        scrubbed.outputs = OutputSpec::default();
        scrubbed.workers = 1;
        let json = serde_json::to_vec(&scrubbed).expect("config serializes");
        let digest = Sha256::digest(&json);
        hex::encode(&digest[..6])
    }
}
