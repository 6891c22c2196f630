//! Paired base/cautious trend benchmark on logistic regression.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::optimizers::{simulate, RunLimits};
use crate::problems::{make_problem, ProblemSpec};
use crate::verify::par_map;

use super::config::TrainSpec;

pub const TREND_LABEL: &str = "trend report — not an acceptance gate";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedResult {
    pub seed: u64,
    pub initial_loss: f64,
    pub target: f64,
    pub final_loss_base: f64,
    pub final_loss_cautious: f64,
    /// First step with `loss <= target`; `None` if never reached.
    pub steps_to_target_base: Option<usize>,
    pub steps_to_target_cautious: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub label: String,
    pub base: String,
    pub cautious: String,
    pub n_steps: usize,
    pub seeds: Vec<SeedResult>,
    /// Seeds where the cautious final loss is `<=` the base final loss.
    pub cautious_wins: usize,
    pub base_wins: usize,
}

fn first_below(losses: &[f64], target: f64) -> Option<usize> {
    losses.iter().position(|l| *l <= target)
}

/// Runs base and cautious optimizers from `w = 0` on one logistic problem
/// per seed. Seeds run in parallel and are reported in input order.
pub fn train_benchmark(spec: &TrainSpec, workers: usize) -> Result<TrainReport> {
    let base = spec.optimizer.clone().without_mask();
    let cautious = base.clone().with_mask(spec.mask.clone());
    let results = par_map(workers, spec.seeds.len(), |k| -> Result<SeedResult> {
        let seed = spec.seeds[k];
        let obj = make_problem(&ProblemSpec::Logistic {
            n_samples: spec.n_samples,
            dim: spec.dim,
            seed,
        })?;
        let w0 = vec![0.0; spec.dim];
        let lb = simulate(&base, &obj, &w0, RunLimits::steps(spec.n_steps))?.losses();
        let lc = simulate(&cautious, &obj, &w0, RunLimits::steps(spec.n_steps))?.losses();
        let l0 = lb[0];
        let opt = obj.optimum_value().unwrap_or(0.0);
        let target = opt + spec.target_fraction * (l0 - opt);
        Ok(SeedResult {
            seed,
            initial_loss: l0,
            target,
            final_loss_base: *lb.last().expect("start point"),
            final_loss_cautious: *lc.last().expect("start point"),
            steps_to_target_base: first_below(&lb, target),
            steps_to_target_cautious: first_below(&lc, target),
        })
    })?
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let cautious_wins = results.iter().filter(|r| r.final_loss_cautious <= r.final_loss_base).count();
    let base_wins = results.iter().filter(|r| r.final_loss_base <= r.final_loss_cautious).count();
    Ok(TrainReport {
        label: TREND_LABEL.to_string(),
        base: base.label(),
        cautious: cautious.label(),
        n_steps: spec.n_steps,
        seeds: results,
        cautious_wins,
        base_wins,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::masks::MaskRule;

    fn small() -> TrainSpec {
        TrainSpec {
            n_samples: 64,
            dim: 4,
            seeds: vec![0, 1],
            n_steps: 50,
            ..TrainSpec::default()
        }
    }

    #[test]
    fn zero_steps_reports_initial_losses() {
        let rep = train_benchmark(&TrainSpec { n_steps: 0, ..small() }, 1).unwrap();
        for r in &rep.seeds {
            assert_eq!(r.final_loss_base, r.initial_loss);
            assert_eq!(r.final_loss_cautious, r.initial_loss);
        }
    }

    #[test]
    fn identity_mask_gives_identical_columns() {
        let rep = train_benchmark(
            &TrainSpec {
                mask: MaskRule::Identity,
                ..small()
            },
            2,
        )
        .unwrap();
        for r in &rep.seeds {
            assert_eq!(r.final_loss_base.to_bits(), r.final_loss_cautious.to_bits());
            assert_eq!(r.steps_to_target_base, r.steps_to_target_cautious);
        }
        assert_eq!(rep.label, TREND_LABEL);
    }
}
