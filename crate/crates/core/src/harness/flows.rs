//! Continuous-flow runs driven by the config file.

use crate::dynamics::{integrate, ContinuousSystem, FlowState, FlowTrace, KineticEnergy};
use crate::error::{check_dims, Result};
use crate::problems::Objective;

use super::config::DynamicsSpec;

/// Integrates the configured flow from `w0`. Momentum starts at `s0` (zeros
/// by default); the Adam flow's `v` starts at `v0` or `∇L(w0)^2`.
pub fn run_dynamics(spec: &DynamicsSpec, objective: &Objective, w0: &[f64]) -> Result<FlowTrace> {
    let dim = objective.dim();
    check_dims(dim, w0.len())?;
    let s0 = match &spec.s0 {
        Some(s) => {
            check_dims(dim, s.len())?;
            s.clone()
        }
        None => vec![0.0; dim],
    };
    let mut start = FlowState::new(w0.to_vec(), s0);
    if matches!(spec.kinetic, KineticEnergy::AdamCoupled { .. }) {
        let v0 = match &spec.v0 {
            Some(v) => {
                check_dims(dim, v.len())?;
                v.clone()
            }
            None => objective.try_grad(w0)?.iter().map(|g| g * g).collect(),
        };
        start = start.with_v(v0);
    }
    let system = ContinuousSystem::new(
        objective.clone(),
        spec.kinetic.clone(),
        spec.phi_map,
        spec.psi_map,
        spec.mask.clone(),
    )?;
    integrate(&system, &start, spec.dt, spec.t_end)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::DescentMap;
    use crate::problems::{make_problem, ProblemSpec};

    #[test]
    fn adam_flow_defaults_v_to_squared_gradient() {
        let obj = make_problem(&ProblemSpec::ToyQuadratic { kappa: 4.0 }).unwrap();
        let spec = DynamicsSpec {
            kinetic: KineticEnergy::AdamCoupled { a: 1.0, b: 1.0, e: 1e-8 },
            psi_map: DescentMap::Zero,
            t_end: 0.01,
            ..DynamicsSpec::default()
        };
        let tr = run_dynamics(&spec, &obj, &[1.0, 1.0]).unwrap();
        assert_eq!(tr.states[0].v, vec![64.0, 4.0]);
        assert_eq!(tr.times.len(), 11);
    }

    #[test]
    fn adam_flow_with_friction_rejected() {
        let obj = make_problem(&ProblemSpec::ToyQuadratic { kappa: 4.0 }).unwrap();
        let spec = DynamicsSpec {
            kinetic: KineticEnergy::AdamCoupled { a: 1.0, b: 1.0, e: 1e-8 },
            ..DynamicsSpec::default()
        };
        assert!(run_dynamics(&spec, &obj, &[1.0, 1.0]).is_err());
    }
}
