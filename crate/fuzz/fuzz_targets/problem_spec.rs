#![no_main]

use cautious::{make_problem, ProblemSpec};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(spec) = serde_json::from_slice::<ProblemSpec>(data) else { return };
    if spec.validate().is_err() {
        assert!(make_problem(&spec).is_err());
        return;
    }
    // Keep construction cheap.
    let small = match &spec {
        ProblemSpec::RandomSmoothQuadratic { dim, .. } | ProblemSpec::Rosenbrock { dim } => *dim <= 64,
        ProblemSpec::Logistic { n_samples, dim, .. } => *n_samples <= 128 && *dim <= 16,
        _ => true,
    };
    if !small {
        return;
    }
    let obj = make_problem(&spec).unwrap();
    let w = vec![0.5; obj.dim()];
    let _ = obj.try_loss(&w);
    let _ = obj.try_grad(&w);
    assert!(obj.try_grad(&vec![0.0; obj.dim() + 1]).is_err());
});
