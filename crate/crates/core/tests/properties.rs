//! Property tests over randomized inputs.

use cautious::harness::{estimate_rate, ExperimentConfig, RateWindow};
use cautious::masks::ScaleForm;
use cautious::optimizers::{run_steps, simulate, BaseOptimizer, RunLimits};
use cautious::verify::{check_single_step, step_size_bound};
use cautious::{apply_mask, make_problem, MaskRule, OptimizerConfig, OptimizerState, ProblemSpec};
use proptest::prelude::*;

fn vec_pair(max_dim: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (1..=max_dim).prop_flat_map(|d| {
        (
            prop::collection::vec(-10.0f64..10.0, d),
            prop::collection::vec(-10.0f64..10.0, d),
        )
    })
}

fn any_mask() -> impl Strategy<Value = MaskRule> {
    prop_oneof![
        (0.0f64..2.0, any::<bool>(), any::<bool>(), any::<bool>()).prop_map(|(xi, strict, clamp, mean)| {
            MaskRule::DefaultScaled {
                xi: xi + 1e-3,
                strict,
                clamp_alpha_min_1: clamp,
                form: if mean { ScaleForm::Mean } else { ScaleForm::Count },
            }
        }),
        (0.0f64..1.0).prop_map(|c| MaskRule::SoftNegative { c }),
        Just(MaskRule::InnerProduct),
        Just(MaskRule::Identity),
    ]
}

fn any_base() -> impl Strategy<Value = BaseOptimizer> {
    prop_oneof![
        Just(BaseOptimizer::Gd),
        (0.0f64..0.99).prop_map(|beta| BaseOptimizer::Gdm { beta }),
        (0.0f64..0.99).prop_map(|beta| BaseOptimizer::SignedMomentum { beta }),
        (0.0f64..0.99, 0.9f64..0.999, 0.0f64..0.1).prop_map(|(beta1, beta2, weight_decay)| BaseOptimizer::AdamW {
            beta1,
            beta2,
            eps: 1e-8,
            weight_decay,
        }),
        (0.0f64..0.99, 0.9f64..0.999, 0.0f64..0.1).prop_map(|(beta1, beta2, weight_decay)| BaseOptimizer::Lion {
            beta1,
            beta2,
            weight_decay,
        }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn mask_ratio_in_unit_interval(rule in any_mask(), (u, g) in vec_pair(40)) {
        let out = apply_mask(&rule, &u, &g).unwrap();
        prop_assert!((0.0..=1.0).contains(&out.ratio));
        prop_assert_eq!(out.weights.len(), u.len());
    }

    #[test]
    fn default_mask_matches_direct_formula((u, g) in vec_pair(40), xi in 0.01f64..3.0) {
        let rule = MaskRule::DefaultScaled { xi, strict: true, clamp_alpha_min_1: false, form: ScaleForm::Count };
        let out = apply_mask(&rule, &u, &g).unwrap();
        let ind: Vec<f64> = u.iter().zip(&g).map(|(a, b)| if a * b > 0.0 { 1.0 } else { 0.0 }).collect();
        let alpha = u.len() as f64 / (ind.iter().sum::<f64>() + xi);
        for (w, i) in out.weights.iter().zip(&ind) {
            prop_assert_eq!(*w, alpha * i);
        }
    }

    #[test]
    fn masked_update_never_opposes_gradient((u, g) in vec_pair(40)) {
        // Every coordinate kept by the strict indicator has u_i g_i > 0.
        let out = apply_mask(&MaskRule::default_scaled(), &u, &g).unwrap();
        let inner: f64 = out.weights.iter().zip(u.iter().zip(&g)).map(|(w, (a, b))| w * a * b).sum();
        prop_assert!(inner >= 0.0);
    }

    #[test]
    fn identity_mask_reduces_to_base(base in any_base(), lr in 1e-4f64..0.05, w0 in prop::collection::vec(-2.0f64..2.0, 3)) {
        let obj = make_problem(&ProblemSpec::SeparableQuadratic { a: vec![1.0, 2.0, 3.0] }).unwrap();
        let plain = OptimizerConfig::new(base, lr);
        let masked = plain.clone().with_mask(MaskRule::Identity);
        let a = run_steps(&plain, &obj, &w0, 25).unwrap();
        let b = run_steps(&masked, &obj, &w0, 25).unwrap();
        for (x, y) in a.steps.iter().zip(&b.steps) {
            for (p, q) in x.w.iter().zip(&y.w) {
                prop_assert_eq!(p.to_bits(), q.to_bits());
            }
        }
    }

    #[test]
    fn base_runs_record_unit_mask_ratio(base in any_base(), lr in 1e-4f64..0.05) {
        let obj = make_problem(&ProblemSpec::ToyQuadratic { kappa: 4.0 }).unwrap();
        let traj = run_steps(&OptimizerConfig::new(base, lr), &obj, &[1.0, 1.0], 20).unwrap();
        prop_assert_eq!(traj.steps.len(), 21);
        prop_assert!(traj.steps.iter().all(|s| s.mask_ratio == 1.0));
    }

    #[test]
    fn geometric_sequences_are_fit_exactly(l0 in 1e-3f64..1e3, rate in 0.2f64..0.999, n in 20usize..200) {
        let losses: Vec<f64> = (0..=n).map(|t| l0 * rate.powi(2 * t as i32)).collect();
        let est = estimate_rate(&losses, RateWindow::default(), 1e6).unwrap();
        prop_assert!((est.slope - 2.0 * rate.ln()).abs() < 1e-10);
        prop_assert!(est.r_squared > 1.0 - 1e-12);
        prop_assert!((est.per_step_rate - rate).abs() < 1e-10);
    }

    #[test]
    fn below_bound_step_never_loses_to_base(seed in 0u64..10_000, dim in 2usize..12, frac in 0.05f64..0.95) {
        let obj = make_problem(&ProblemSpec::RandomSmoothQuadratic { dim, mu: 5.0, seed }).unwrap();
        let w: Vec<f64> = (0..dim).map(|i| ((seed as f64 + 1.0) * (i as f64 + 0.7)).sin()).collect();
        let g = obj.grad(&w);
        let s: Vec<f64> = (0..dim).map(|i| 4.0 * ((seed as f64) * 0.37 + i as f64 * 1.3).cos()).collect();
        // GDM with beta = 0.5 proposes u = s/2 + g.
        let u: Vec<f64> = s.iter().zip(&g).map(|(a, b)| 0.5 * a + b).collect();
        // alpha >= 1 keeps Δ >= 0, which the bound requires.
        let cfg = OptimizerConfig::gdm(0.5, 1.0).with_mask(MaskRule::default_clamped());
        let weights = apply_mask(&MaskRule::default_clamped(), &u, &g).unwrap().weights;
        let bound = step_size_bound(&u, &g, &weights, 5.0).unwrap();
        prop_assume!(bound.is_finite() && bound > 0.0);
        let state = OptimizerState { t: 0, m: vec![], v: vec![], s };
        let verdict = check_single_step(&obj, &w, &state, &cfg, frac * bound).unwrap();
        prop_assert!(verdict.passed, "margin {}", verdict.margin);
    }

    #[test]
    fn zero_start_stays_put_on_quadratics(base in any_base(), lr in 1e-3f64..0.5) {
        let obj = make_problem(&ProblemSpec::ToyQuadratic { kappa: 4.0 }).unwrap();
        let cfg = OptimizerConfig::new(base, lr).with_mask(MaskRule::default_scaled());
        let traj = simulate(&cfg, &obj, &[0.0, 0.0], RunLimits::steps(10)).unwrap();
        prop_assert!(traj.steps.iter().all(|s| s.w == vec![0.0, 0.0] && s.loss == 0.0));
    }

    #[test]
    fn fingerprint_tracks_result_fields(n_steps in 1usize..10_000, workers in 1usize..16) {
        let a = ExperimentConfig { n_steps, ..ExperimentConfig::default() };
        let mut b = a.clone();
        b.workers = workers;
        prop_assert_eq!(a.fingerprint(), b.fingerprint());
        let json = serde_json::to_string(&a).unwrap();
        let back = ExperimentConfig::from_json(&json).unwrap();
        prop_assert_eq!(back.fingerprint(), a.fingerprint());
    }
}
