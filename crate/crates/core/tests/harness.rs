use std::fs;

use cautious::harness::config::{AblationSpec, Axis, Format, GridSpec, TrainSpec};
use cautious::harness::output::{heatmap_csv, trajectory_csv};
use cautious::harness::{
    cmd_run, cmd_sweep, compute_ablation, compute_sweep, estimate_rate, run_trajectories, train_benchmark,
    ExperimentConfig, RateWindow, TREND_LABEL,
};
use cautious::optimizers::{run_steps, simulate, RunLimits};
use cautious::{make_problem, Error, MaskRule, OptimizerConfig, ProblemSpec};

fn toy() -> cautious::Objective {
    make_problem(&ProblemSpec::ToyQuadratic { kappa: 4.0 }).unwrap()
}

#[test]
fn rate_of_one_ninth_sequence() {
    let losses: Vec<f64> = (0..=60).map(|t| 5.0 * (1.0f64 / 9.0).powi(t)).collect();
    let est = estimate_rate(&losses, RateWindow::default(), 1e6).unwrap();
    assert!((est.slope - (1.0f64 / 9.0).ln()).abs() < 1e-10);
    assert!((est.slope + 2.1972).abs() < 1e-4);
    assert!((est.per_step_rate - 1.0 / 3.0).abs() < 1e-10);
    assert!(est.r_squared > 1.0 - 1e-12);
}

#[test]
fn gdm_at_heavy_ball_optimum_has_rate_one_third() {
    // lr = 4/(sqrt(8)+sqrt(2))^2 = 2/9, beta = 1/9.
    let cfg = OptimizerConfig::gdm(1.0 / 9.0, 2.0 / 9.0);
    let traj = run_steps(&cfg, &toy(), &[1.0, 1.0], 200).unwrap();
    let est = estimate_rate(&traj.losses(), RateWindow::default(), 1e6).unwrap();
    assert!((est.per_step_rate - 1.0 / 3.0).abs() < 0.02, "rate {}", est.per_step_rate);
}

#[test]
fn rate_error_names_the_zero_step() {
    let err = estimate_rate(&[1.0, 1.0, 1.0, 0.0], RateWindow::default(), 1e6).unwrap_err();
    assert!(matches!(err, Error::NonPositiveLoss { step: 3, .. }));
}

fn increases(losses: &[f64]) -> usize {
    losses.windows(2).filter(|w| w[1] > w[0] + 1e-12 * (1.0 + w[0])).count()
}

#[test]
fn cautious_gdm_rarely_increases_the_loss() {
    let obj = toy();
    let gdm = run_steps(&OptimizerConfig::gdm(0.99, 0.01), &obj, &[1.0, 1.0], 10_000).unwrap();
    let c = OptimizerConfig::gdm(0.99, 0.01).with_mask(MaskRule::default_scaled());
    let cautious = run_steps(&c, &obj, &[1.0, 1.0], 10_000).unwrap();
    assert!(increases(&gdm.losses()) > 1000);
    assert!(increases(&cautious.losses()) < 10);
    let (lg, lc) = (gdm.losses(), cautious.losses());
    assert!(lc[10_000] < lg[10_000]);
}

#[test]
fn sweep_with_huge_lr_is_all_sentinel() {
    let cfg = ExperimentConfig {
        n_steps: 300,
        grid: Some(GridSpec {
            lr: Axis::Values(vec![3.0, 30.0]),
            beta: Axis::Values(vec![0.0, 0.9]),
            ..GridSpec::default()
        }),
        ..ExperimentConfig::default()
    };
    for hm in compute_sweep(&cfg).unwrap() {
        let csv = String::from_utf8(heatmap_csv(&hm).unwrap()).unwrap();
        assert_eq!(csv.lines().nth(1).unwrap(), "3,inf,inf");
        assert_eq!(hm.diverged_cells(), 4);
    }
}

fn small_grid() -> GridSpec {
    GridSpec {
        lr: Axis::Values(vec![0.05, 0.2, 0.4]),
        beta: Axis::Values(vec![0.0, 0.1, 0.5, 0.9]),
        ..GridSpec::default()
    }
}

#[test]
fn ablation_identity_row_equals_gdm_and_c0_is_plain_indicator() {
    let cfg = ExperimentConfig {
        n_steps: 400,
        grid: Some(small_grid()),
        ablation: Some(AblationSpec {
            masks: vec![MaskRule::Identity, MaskRule::SoftNegative { c: 0.0 }],
        }),
        ..ExperimentConfig::default()
    };
    let rep = compute_ablation(&cfg).unwrap();
    let gdm = rep.row("gdm").unwrap();
    let id = rep.row("c-gdm[identity]").unwrap();
    assert_eq!(gdm.heatmap.rates, id.heatmap.rates);
    assert_eq!(gdm.best_curve, id.best_curve);
    // phi_c at c = 0 keeps aligned coordinates with weight 1, drops the rest.
    let phi0 = rep.row("c-gdm[phi_c0]").unwrap();
    let obj = toy();
    let a = simulate(
        &OptimizerConfig::gdm(phi0.best.beta, phi0.best.lr).with_mask(MaskRule::SoftNegative { c: 0.0 }),
        &obj,
        &[1.0, 1.0],
        RunLimits::steps(50),
    )
    .unwrap();
    let manual: Vec<f64> = {
        // Independent loop: s <- beta s + g, keep coordinates with s_i g_i > 0.
        let (beta, lr) = (phi0.best.beta, phi0.best.lr);
        let (mut w, mut s) = (vec![1.0f64, 1.0], vec![0.0f64, 0.0]);
        let mut out = vec![4.0 * w[0] * w[0] + w[1] * w[1]];
        for _ in 0..50 {
            let g = [8.0 * w[0], 2.0 * w[1]];
            for i in 0..2 {
                s[i] = beta * s[i] + g[i];
                if s[i] * g[i] > 0.0 {
                    w[i] -= lr * s[i];
                }
            }
            out.push(4.0 * w[0] * w[0] + w[1] * w[1]);
        }
        out
    };
    for (x, y) in a.losses().iter().zip(&manual) {
        assert!((x - y).abs() <= 1e-12 * (1.0 + y.abs()));
    }
    let analytic = rep.analytic_baseline.unwrap();
    assert!((analytic.rate - 1.0 / 3.0).abs() < 1e-15);
}

#[test]
fn sweep_is_independent_of_worker_count() {
    let base = ExperimentConfig {
        n_steps: 300,
        grid: Some(small_grid()),
        ..ExperimentConfig::default()
    };
    let one = compute_sweep(&ExperimentConfig { workers: 1, ..base.clone() }).unwrap();
    let many = compute_sweep(&ExperimentConfig { workers: 6, ..base }).unwrap();
    for (a, b) in one.iter().zip(&many) {
        assert_eq!(heatmap_csv(a).unwrap(), heatmap_csv(b).unwrap());
    }
}

#[test]
fn run_twice_gives_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig {
        n_steps: 50,
        seeds: vec![0, 1],
        ..ExperimentConfig::default()
    };
    let mut a = cfg.clone();
    a.outputs.dir = dir.path().join("a");
    a.outputs.formats = vec![Format::Csv, Format::Json, Format::Svg];
    let mut b = a.clone();
    b.outputs.dir = dir.path().join("b");
    b.workers = 4;
    let fa = cmd_run(&a).unwrap();
    let fb = cmd_run(&b).unwrap();
    assert_eq!(fa.len(), fb.len());
    for (x, y) in fa.iter().zip(&fb) {
        assert_eq!(x.file_name(), y.file_name());
        let name = x.file_name().unwrap().to_string_lossy();
        assert!(name.contains(&cfg.fingerprint()), "{name}");
        if !name.ends_with(".json") {
            assert_eq!(fs::read(x).unwrap(), fs::read(y).unwrap(), "{name}");
        }
    }
}

#[test]
fn three_step_trajectory_csv() {
    let cfg = ExperimentConfig {
        n_steps: 3,
        ..ExperimentConfig::default()
    };
    let trajs = run_trajectories(&cfg).unwrap();
    let text = String::from_utf8(trajectory_csv(&trajs[1]).unwrap()).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "step,loss,hamiltonian,mask_ratio,effective_lr,w0,w1");
    assert_eq!(lines.len(), 5);
    assert_eq!(trajs[1].fingerprint, cfg.fingerprint());
}

#[test]
fn io_errors_carry_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, b"x").unwrap();
    let mut cfg = ExperimentConfig {
        n_steps: 5,
        ..ExperimentConfig::default()
    };
    cfg.outputs.dir = blocker.join("sub");
    match cmd_sweep(&cfg) {
        Err(Error::Io { path, .. }) => assert!(path.starts_with(&blocker)),
        other => panic!("expected an i/o error, got {other:?}"),
    }
}

#[test]
fn train_report_shape() {
    let spec = TrainSpec {
        n_samples: 128,
        dim: 8,
        seeds: vec![3, 4, 5],
        n_steps: 100,
        ..TrainSpec::default()
    };
    let rep = train_benchmark(&spec, 3).unwrap();
    assert_eq!(rep.label, TREND_LABEL);
    assert_eq!(rep.seeds.iter().map(|s| s.seed).collect::<Vec<_>>(), vec![3, 4, 5]);
    assert!(rep.cautious_wins + rep.base_wins >= 3);
    for s in &rep.seeds {
        assert!((s.initial_loss - std::f64::consts::LN_2).abs() < 1e-12);
        assert!(s.final_loss_base < s.initial_loss && s.final_loss_cautious < s.initial_loss);
    }
}
