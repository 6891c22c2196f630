//! Continuous-time Hamiltonian descent systems and their masked variants.
//!
//! The generic system is
//!
//! ```text
//! dw/dt = -phi(x) ∘ ∇K(s) - Φ(∇L(w))
//! ds/dt =  ∇L(w) - Ψ(∇K(s)),        x = ∇L(w) ∘ ∇K(s)
//! ```
//!
//! with `phi ≡ 1` when no mask is configured. Adam and Lion-K flows have their
//! own state layout and are special-cased.

use serde::{Deserialize, Serialize};

use crate::error::{check_dims, Error, Result};
use crate::masks::{apply_mask, MaskRule};
use crate::optimizers::{BaseOptimizer, OptimizerConfig, OptimizerState};
use crate::problems::Objective;
use crate::vector::{self, dot, norm_l1, norm_sq};

/// Largest step used for non-smooth kinetic energies.
pub const NONSMOOTH_MAX_DT: f64 = 1e-4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum KineticEnergy {
    /// `K(s) = ||s||^2 / 2`.
    Quadratic,
    /// `K(s) = ||s||_1`, subgradient `sign(s)` with `sign(0) = 0`.
    L1,
    /// Adam flow on `(m, v)`:
    /// `dw = -m/(sqrt(v)+e)`, `dm = a(g - m)`, `dv = b(g^2 - v)`.
    AdamCoupled { a: f64, b: f64, e: f64 },
    /// Lion-K flow with `K = ||.||_1`:
    /// `dw = ∇K((1-b) m - b g)`, `dm = -a(g + m)`.
    LionK { a: f64, b: f64 },
}

impl KineticEnergy {
    fn is_smooth(&self) -> bool {
        matches!(self, KineticEnergy::Quadratic | KineticEnergy::AdamCoupled { .. })
    }

    /// `K(s)` for the separable variants; `None` for the coupled flows.
    pub fn value(&self, s: &[f64]) -> Option<f64> {
        match self {
            KineticEnergy::Quadratic => Some(0.5 * norm_sq(s)),
            KineticEnergy::L1 => Some(norm_l1(s)),
            _ => None,
        }
    }

    /// `∇K(s)` for the separable variants; `None` for the coupled flows.
    pub fn grad(&self, s: &[f64]) -> Option<Vec<f64>> {
        match self {
            KineticEnergy::Quadratic => Some(s.to_vec()),
            KineticEnergy::L1 => Some(s.iter().map(|x| vector::sign(*x)).collect()),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DescentMap {
    #[default]
    Zero,
    Linear { c: f64 },
}

impl DescentMap {
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        match *self {
            DescentMap::Zero => vec![0.0; x.len()],
            DescentMap::Linear { c } => x.iter().map(|v| c * v).collect(),
        }
    }

    /// `||x||^2_map = <x, map(x)>`.
    pub fn norm_sq(&self, x: &[f64]) -> f64 {
        match *self {
            DescentMap::Zero => 0.0,
            DescentMap::Linear { c } => c * norm_sq(x),
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            DescentMap::Linear { c } if !(c.is_finite() && c >= 0.0) => {
                Err(Error::InvalidConfig(format!("descent map needs c >= 0, got {c}")))
            }
            _ => Ok(()),
        }
    }
}

/// Phase-space point. `v` is empty except for the Adam flow, where `s`
/// holds `m`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowState {
    pub w: Vec<f64>,
    pub s: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub v: Vec<f64>,
}

impl FlowState {
    pub fn new(w: Vec<f64>, s: Vec<f64>) -> Self {
        FlowState { w, s, v: Vec::new() }
    }

    pub fn with_v(mut self, v: Vec<f64>) -> Self {
        self.v = v;
        self
    }

    fn axpy(&self, h: f64, d: &FlowState) -> FlowState {
        let f = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x + h * y).collect();
        FlowState {
            w: f(&self.w, &d.w),
            s: f(&self.s, &d.s),
            v: f(&self.v, &d.v),
        }
    }

    fn all_finite(&self) -> bool {
        vector::all_finite(&self.w) && vector::all_finite(&self.s) && vector::all_finite(&self.v)
    }
}

#[derive(Clone, Debug)]
pub struct ContinuousSystem {
    pub objective: Objective,
    pub kinetic: KineticEnergy,
    pub phi_map: DescentMap,
    pub psi_map: DescentMap,
    pub mask: Option<MaskRule>,
}

impl ContinuousSystem {
    pub fn new(
        objective: Objective,
        kinetic: KineticEnergy,
        phi_map: DescentMap,
        psi_map: DescentMap,
        mask: Option<MaskRule>,
    ) -> Result<Self> {
        let sys = ContinuousSystem {
            objective,
            kinetic,
            phi_map,
            psi_map,
            mask,
        };
        sys.validate()?;
        Ok(sys)
    }

    /// Heavy ball: quadratic kinetic energy with friction `Ψ = c·I`.
    pub fn heavy_ball(objective: Objective, friction: f64, mask: Option<MaskRule>) -> Result<Self> {
        Self::new(
            objective,
            KineticEnergy::Quadratic,
            DescentMap::Zero,
            DescentMap::Linear { c: friction },
            mask,
        )
    }

    pub fn validate(&self) -> Result<()> {
        self.phi_map.validate()?;
        self.psi_map.validate()?;
        if let Some(mask) = &self.mask {
            mask.validate()?;
        }
        let coupled = !matches!(self.kinetic, KineticEnergy::Quadratic | KineticEnergy::L1);
        if coupled && (self.phi_map != DescentMap::Zero || self.psi_map != DescentMap::Zero) {
            return Err(Error::InvalidConfig(
                "Adam and Lion-K flows carry their own damping; phi_map and psi_map must be zero".into(),
            ));
        }
        match self.kinetic {
            KineticEnergy::AdamCoupled { a, b, e } => {
                if !(a > 0.0 && b >= 0.0 && e >= 0.0 && a.is_finite() && b.is_finite() && e.is_finite()) {
                    return Err(Error::InvalidConfig("Adam flow needs a > 0, b >= 0, e >= 0".into()));
                }
                if a < b / 4.0 {
                    return Err(Error::Precondition(format!(
                        "Adam flow needs a >= b/4 for a decreasing Hamiltonian (a = {a}, b = {b})"
                    )));
                }
            }
            KineticEnergy::LionK { a, b } if !(a >= 0.0 && a.is_finite() && (0.0..1.0).contains(&b)) => {
                return Err(Error::InvalidConfig("Lion-K flow needs a >= 0 and b in [0, 1)".into()));
            }
            _ => {}
        }
        Ok(())
    }

    fn check_state(&self, st: &FlowState) -> Result<()> {
        let d = self.objective.dim();
        check_dims(d, st.w.len())?;
        check_dims(d, st.s.len())?;
        let vlen = if matches!(self.kinetic, KineticEnergy::AdamCoupled { .. }) { d } else { 0 };
        check_dims(vlen, st.v.len())
    }

    /// Descent direction `u` (so that the unmasked flow moves `w` along `-u`)
    /// and the mask weights applied to it.
    fn direction(&self, g: &[f64], st: &FlowState) -> Result<(Vec<f64>, Vec<f64>)> {
        let u = match self.kinetic {
            KineticEnergy::Quadratic | KineticEnergy::L1 => self.kinetic.grad(&st.s).expect("separable"),
            KineticEnergy::AdamCoupled { e, .. } => st
                .s
                .iter()
                .zip(&st.v)
                .map(|(m, v)| m / (v.max(0.0).sqrt() + e))
                .collect(),
            KineticEnergy::LionK { b, .. } => st
                .s
                .iter()
                .zip(g)
                .map(|(m, gi)| -vector::sign((1.0 - b) * m - b * gi))
                .collect(),
        };
        let weights = match &self.mask {
            None => vec![1.0; u.len()],
            // The Adam mask compares m with the gradient; m and m/(sqrt(v)+e)
            // share signs, so masking on `u` is the same test.
            Some(rule) => apply_mask(rule, &u, g)?.weights,
        };
        Ok((u, weights))
    }
}

/// Right-hand side of the flow at `st`.
pub fn system_rhs(system: &ContinuousSystem, st: &FlowState) -> Result<FlowState> {
    system.check_state(st)?;
    let g = system.objective.grad(&st.w);
    if !vector::all_finite(&g) {
        return Err(Error::NonFinite {
            what: "gradient",
            step: 0,
        });
    }
    let (u, weights) = system.direction(&g, st)?;
    let phi_g = system.phi_map.apply(&g);
    let dw: Vec<f64> = u
        .iter()
        .zip(&weights)
        .zip(&phi_g)
        .map(|((ui, p), f)| -p * ui - f)
        .collect();
    let (ds, dv) = match system.kinetic {
        KineticEnergy::Quadratic | KineticEnergy::L1 => {
            let psi = system.psi_map.apply(&system.kinetic.grad(&st.s).expect("separable"));
            (g.iter().zip(&psi).map(|(gi, p)| gi - p).collect(), Vec::new())
        }
        KineticEnergy::AdamCoupled { a, b, .. } => (
            st.s.iter().zip(&g).map(|(m, gi)| a * (gi - m)).collect(),
            st.v.iter().zip(&g).map(|(v, gi)| b * (gi * gi - v)).collect(),
        ),
        KineticEnergy::LionK { a, .. } => (st.s.iter().zip(&g).map(|(m, gi)| -a * (gi + m)).collect(), Vec::new()),
    };
    Ok(FlowState { w: dw, s: ds, v: dv })
}

/// Closed-form Hamiltonian of the configured flow.
pub fn hamiltonian_value(system: &ContinuousSystem, st: &FlowState) -> f64 {
    let loss = system.objective.loss(&st.w);
    match system.kinetic {
        KineticEnergy::Quadratic | KineticEnergy::L1 => loss + system.kinetic.value(&st.s).expect("separable"),
        KineticEnergy::AdamCoupled { a, e, .. } => {
            let k: f64 = st.s.iter().zip(&st.v).map(|(m, v)| m * m / (v.max(0.0).sqrt() + e)).sum();
            loss + k / (2.0 * a)
        }
        KineticEnergy::LionK { a, b } => {
            let scaled: Vec<f64> = st.s.iter().map(|m| (1.0 - b) * m).collect();
            a * loss + norm_l1(&scaled) / (1.0 - b)
        }
    }
}

/// Instantaneous rates along the flow and the unmasked reference terms.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rates {
    /// `dH/dt`.
    pub dh: f64,
    /// `dL/dt`.
    pub dl: f64,
    /// `||∇L||^2_Φ + ||∇K||^2_Ψ`; the unmasked flow has `dH = -delta_h`.
    pub delta_h: f64,
    /// `∇L^T ∇K + ||∇L||^2_Φ`; the unmasked flow has `dL = -delta_l`.
    pub delta_l: f64,
}

/// Exact `dH/dt` and `dL/dt` at `st`.
///
/// For the separable kinetic energies this is the closed form
/// `dH = x^T(1 - phi(x)) - Δ_H`, `dL = -x^T phi(x) - ||∇L||^2_Φ`; the coupled
/// flows use the chain rule on their Hamiltonian.
pub fn analytic_rates(system: &ContinuousSystem, st: &FlowState) -> Result<Rates> {
    system.check_state(st)?;
    let g = system.objective.grad(&st.w);
    let (u, weights) = system.direction(&g, st)?;
    let x = vector::hadamard(&g, &u);
    let cross: f64 = x.iter().sum();
    let masked: f64 = dot(&x, &weights);
    let phi_norm = system.phi_map.norm_sq(&g);
    match system.kinetic {
        KineticEnergy::Quadratic | KineticEnergy::L1 => {
            let delta_h = phi_norm + system.psi_map.norm_sq(&u);
            Ok(Rates {
                dh: (cross - masked) - delta_h,
                dl: -masked - phi_norm,
                delta_h,
                delta_l: cross + phi_norm,
            })
        }
        _ => {
            let d = system_rhs(system, st)?;
            let dl = dot(&g, &d.w);
            let (dh_kin, scale) = coupled_kinetic_rate(system, st, &d);
            let base = FlowState {
                w: u.iter().map(|x| -x).collect(),
                ..d.clone()
            };
            let (base_kin, _) = coupled_kinetic_rate(system, st, &base);
            Ok(Rates {
                dh: scale * dl + dh_kin,
                dl,
                delta_h: -(scale * -cross + base_kin),
                delta_l: cross,
            })
        }
    }
}

/// `∇_{s,v} H · (ds, dv)` for the coupled flows, plus the factor on `L` in `H`.
fn coupled_kinetic_rate(system: &ContinuousSystem, st: &FlowState, d: &FlowState) -> (f64, f64) {
    match system.kinetic {
        KineticEnergy::AdamCoupled { a, e, .. } => {
            let mut rate = 0.0;
            for i in 0..st.s.len() {
                let (m, v) = (st.s[i], st.v[i].max(0.0));
                let r = v.sqrt();
                rate += m * d.s[i] / (a * (r + e));
                if m != 0.0 && d.v[i] != 0.0 {
                    rate -= m * m * d.v[i] / (4.0 * a * r * (r + e) * (r + e));
                }
            }
            (rate, 1.0)
        }
        KineticEnergy::LionK { a, .. } => {
            let rate = st.s.iter().zip(&d.s).map(|(m, dm)| vector::sign(*m) * dm).sum();
            (rate, a)
        }
        _ => unreachable!("separable kinetic energies use the closed form"),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Integrator {
    Rk4,
    /// Substituted for non-smooth kinetic energies.
    ForwardEuler,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowTrace {
    pub times: Vec<f64>,
    pub states: Vec<FlowState>,
    pub loss_samples: Vec<f64>,
    pub hamiltonian_samples: Vec<f64>,
    /// `(H_{k+1} - H_k) / dt` per interval.
    pub numeric_dh: Vec<f64>,
    /// `(L_{k+1} - L_k) / dt` per interval.
    pub numeric_dl: Vec<f64>,
    pub integrator: Integrator,
    /// Sampling interval.
    pub dt: f64,
    /// Internal step actually taken (smaller than `dt` for forward Euler).
    pub inner_dt: f64,
}

impl FlowTrace {
    pub fn final_state(&self) -> &FlowState {
        self.states.last().expect("trace has a start point")
    }

    /// Largest one-interval increase of the Hamiltonian.
    pub fn max_hamiltonian_increase(&self) -> f64 {
        max_increase(&self.hamiltonian_samples)
    }

    /// Largest one-interval increase of the loss.
    pub fn max_loss_increase(&self) -> f64 {
        max_increase(&self.loss_samples)
    }
}

fn max_increase(xs: &[f64]) -> f64 {
    xs.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max)
}

fn rk4_step(system: &ContinuousSystem, st: &FlowState, h: f64) -> Result<FlowState> {
    let k1 = system_rhs(system, st)?;
    let k2 = system_rhs(system, &st.axpy(h / 2.0, &k1))?;
    let k3 = system_rhs(system, &st.axpy(h / 2.0, &k2))?;
    let k4 = system_rhs(system, &st.axpy(h, &k3))?;
    let comb = |a: &[f64], b: &[f64], c: &[f64], d: &[f64]| -> Vec<f64> {
        (0..a.len()).map(|i| (a[i] + 2.0 * b[i] + 2.0 * c[i] + d[i]) / 6.0).collect()
    };
    let incr = FlowState {
        w: comb(&k1.w, &k2.w, &k3.w, &k4.w),
        s: comb(&k1.s, &k2.s, &k3.s, &k4.s),
        v: comb(&k1.v, &k2.v, &k3.v, &k4.v),
    };
    Ok(st.axpy(h, &incr))
}

/// Fixed-step integration from `start` over `[0, t_end]`, sampled every `dt`.
///
/// Smooth systems use classical RK4. Non-smooth kinetic energies (L1,
/// Lion-K) use forward Euler with internal steps of at most
/// [`NONSMOOTH_MAX_DT`]; the trace records which integrator ran.
pub fn integrate(system: &ContinuousSystem, start: &FlowState, dt: f64, t_end: f64) -> Result<FlowTrace> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::InvalidConfig(format!("dt must be positive, got {dt}")));
    }
    if !(t_end.is_finite() && t_end >= dt) {
        return Err(Error::InvalidConfig(format!("t_end must be >= dt, got {t_end}")));
    }
    system.validate()?;
    system.check_state(start)?;
    let n = (t_end / dt).round() as usize;
    let (integrator, substeps) = if system.kinetic.is_smooth() {
        (Integrator::Rk4, 1)
    } else {
        (Integrator::ForwardEuler, (dt / NONSMOOTH_MAX_DT).ceil().max(1.0) as usize)
    };
    let h = dt / substeps as f64;

    let mut trace = FlowTrace {
        times: Vec::with_capacity(n + 1),
        states: Vec::with_capacity(n + 1),
        loss_samples: Vec::with_capacity(n + 1),
        hamiltonian_samples: Vec::with_capacity(n + 1),
        numeric_dh: Vec::with_capacity(n),
        numeric_dl: Vec::with_capacity(n),
        integrator,
        dt,
        inner_dt: h,
    };
    let mut st = start.clone();
    let record = |trace: &mut FlowTrace, k: usize, st: &FlowState| -> Result<()> {
        let t = k as f64 * dt;
        let loss = system.objective.loss(&st.w);
        let ham = hamiltonian_value(system, st);
        if !(st.all_finite() && loss.is_finite() && ham.is_finite()) {
            return Err(Error::FlowBlowUp { time: t });
        }
        if let (Some(l0), Some(h0)) = (trace.loss_samples.last(), trace.hamiltonian_samples.last()) {
            trace.numeric_dl.push((loss - l0) / dt);
            trace.numeric_dh.push((ham - h0) / dt);
        }
        trace.times.push(t);
        trace.states.push(st.clone());
        trace.loss_samples.push(loss);
        trace.hamiltonian_samples.push(ham);
        Ok(())
    };
    record(&mut trace, 0, &st)?;
    for k in 1..=n {
        for _ in 0..substeps {
            st = match integrator {
                Integrator::Rk4 => rk4_step(system, &st, h),
                Integrator::ForwardEuler => system_rhs(system, &st).map(|d| st.axpy(h, &d)),
            }
            .map_err(|e| match e {
                Error::NonFinite { .. } => Error::FlowBlowUp { time: k as f64 * dt },
                other => other,
            })?;
        }
        record(&mut trace, k, &st)?;
    }
    Ok(trace)
}

/// Discrete-trajectory Hamiltonian after a step taken with learning rate `lr`.
///
/// Each form is the continuous Hamiltonian of the flow obtained by reading
/// one optimizer step as `lr` units of time:
/// GDM `L + (lr/2)||s||^2`; signed momentum `L + lr/(1-β)·||s||_1`;
/// AdamW `L + lr/(2(1-β1))·<m̂/(sqrt(v̂)+e), m̂>`; Lion `L + lr/(1-β2)·||m||_1`;
/// GD `L`.
pub fn discrete_hamiltonian(config: &OptimizerConfig, lr: f64, loss: f64, state: &OptimizerState) -> f64 {
    match config.base {
        BaseOptimizer::Gd => loss,
        BaseOptimizer::Gdm { .. } => loss + 0.5 * lr * norm_sq(&state.s),
        BaseOptimizer::SignedMomentum { beta } => loss + lr / (1.0 - beta) * norm_l1(&state.s),
        BaseOptimizer::AdamW { beta1, beta2, eps, .. } => {
            if state.t == 0 {
                return loss;
            }
            let t = state.t as i32;
            let c1 = 1.0 - beta1.powi(t);
            let c2 = 1.0 - beta2.powi(t);
            let k: f64 = state
                .m
                .iter()
                .zip(&state.v)
                .map(|(m, v)| {
                    let mh = m / c1;
                    mh * mh / ((v / c2).sqrt() + eps)
                })
                .sum();
            loss + lr / (2.0 * (1.0 - beta1)) * k
        }
        BaseOptimizer::Lion { beta2, .. } => loss + lr / (1.0 - beta2) * norm_l1(&state.m),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{make_problem, ProblemSpec};

    fn toy() -> Objective {
        make_problem(&ProblemSpec::ToyQuadratic { kappa: 4.0 }).unwrap()
    }

    #[test]
    fn masked_rhs_matches_hand_evaluation() {
        let sys = ContinuousSystem::heavy_ball(toy(), 1.0, Some(MaskRule::default_scaled())).unwrap();
        let d = system_rhs(&sys, &FlowState::new(vec![1.0, 1.0], vec![-1.0, 1.0])).unwrap();
        assert_eq!(d.w, vec![0.0, -1.0]);
        assert_eq!(d.s, vec![9.0, 1.0]);
    }

    #[test]
    fn unmasked_rhs_matches_hand_evaluation() {
        let sys = ContinuousSystem::heavy_ball(toy(), 1.0, None).unwrap();
        let d = system_rhs(&sys, &FlowState::new(vec![1.0, 1.0], vec![-1.0, 1.0])).unwrap();
        assert_eq!(d.w, vec![1.0, -1.0]);
        assert_eq!(d.s, vec![9.0, 1.0]);
    }

    #[test]
    fn stationary_point_is_fixed() {
        for mask in [None, Some(MaskRule::default_scaled())] {
            let sys = ContinuousSystem::heavy_ball(toy(), 1.0, mask).unwrap();
            let d = system_rhs(&sys, &FlowState::new(vec![0.0, 0.0], vec![0.0, 0.0])).unwrap();
            assert_eq!((d.w, d.s), (vec![0.0, 0.0], vec![0.0, 0.0]));
        }
    }

    #[test]
    fn signed_momentum_hamiltonian() {
        let sys = ContinuousSystem::new(toy(), KineticEnergy::L1, DescentMap::Zero, DescentMap::Linear { c: 1.0 }, None)
            .unwrap();
        let h = hamiltonian_value(&sys, &FlowState::new(vec![1.0, 1.0], vec![1.0, -2.0]));
        assert_eq!(h, 8.0);
    }

    #[test]
    fn adam_hamiltonian() {
        let obj = Objective::diagonal_quadratic(vec![1.0], vec![0.0]).unwrap();
        let sys = ContinuousSystem::new(
            obj,
            KineticEnergy::AdamCoupled { a: 1.0, b: 1.0, e: 0.0 },
            DescentMap::Zero,
            DescentMap::Zero,
            None,
        )
        .unwrap();
        let st = FlowState::new(vec![1.0], vec![1.0]).with_v(vec![1.0]);
        assert_eq!(hamiltonian_value(&sys, &st), 1.0);
    }

    #[test]
    fn adam_requires_a_at_least_quarter_b() {
        let err = ContinuousSystem::new(
            toy(),
            KineticEnergy::AdamCoupled { a: 0.1, b: 1.0, e: 1e-8 },
            DescentMap::Zero,
            DescentMap::Zero,
            None,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Precondition(_)));
    }

    #[test]
    fn zero_kinetic_state_leaves_loss() {
        for kinetic in [KineticEnergy::Quadratic, KineticEnergy::L1] {
            let sys = ContinuousSystem::new(toy(), kinetic, DescentMap::Zero, DescentMap::Zero, None).unwrap();
            assert_eq!(hamiltonian_value(&sys, &FlowState::new(vec![1.0, 1.0], vec![0.0, 0.0])), 5.0);
        }
    }

    #[test]
    fn unmasked_heavy_ball_rate() {
        let sys = ContinuousSystem::heavy_ball(toy(), 1.0, None).unwrap();
        let r = analytic_rates(&sys, &FlowState::new(vec![0.3, -0.7], vec![1.5, 2.0])).unwrap();
        assert!((r.dh + 6.25).abs() < 1e-14);
    }

    #[test]
    fn fully_masked_flow_stalls_loss() {
        let sys = ContinuousSystem::heavy_ball(toy(), 1.0, Some(MaskRule::default_scaled())).unwrap();
        // g = (8, 2), s = (-1, -1): every coordinate misaligned.
        let r = analytic_rates(&sys, &FlowState::new(vec![1.0, 1.0], vec![-1.0, -1.0])).unwrap();
        assert_eq!(r.dl, 0.0);
    }

    #[test]
    fn closed_form_rates_match_chain_rule() {
        let sys = ContinuousSystem::new(
            toy(),
            KineticEnergy::Quadratic,
            DescentMap::Linear { c: 0.3 },
            DescentMap::Linear { c: 0.7 },
            Some(MaskRule::default_clamped()),
        )
        .unwrap();
        let st = FlowState::new(vec![0.4, -1.2], vec![-0.5, 0.9]);
        let d = system_rhs(&sys, &st).unwrap();
        let g = sys.objective.grad(&st.w);
        let dl = dot(&g, &d.w);
        let dh = dl + dot(&st.s, &d.s);
        let r = analytic_rates(&sys, &st).unwrap();
        assert!((r.dl - dl).abs() < 1e-12 && (r.dh - dh).abs() < 1e-12, "{r:?} vs {dh} {dl}");
    }

    #[test]
    fn adam_rates_match_finite_differences() {
        let sys = ContinuousSystem::new(
            toy(),
            KineticEnergy::AdamCoupled { a: 1.0, b: 2.0, e: 1e-3 },
            DescentMap::Zero,
            DescentMap::Zero,
            Some(MaskRule::default_clamped()),
        )
        .unwrap();
        let st = FlowState::new(vec![0.4, -1.2], vec![0.5, 0.9]).with_v(vec![0.3, 2.0]);
        let r = analytic_rates(&sys, &st).unwrap();
        let d = system_rhs(&sys, &st).unwrap();
        let h = 1e-6;
        let fd = (hamiltonian_value(&sys, &st.axpy(h, &d)) - hamiltonian_value(&sys, &st.axpy(-h, &d))) / (2.0 * h);
        assert!((r.dh - fd).abs() < 1e-6, "{} vs {fd}", r.dh);
        assert!(r.dh <= 0.0);
    }

    #[test]
    fn integrate_from_stationary_point_is_constant() {
        let sys = ContinuousSystem::heavy_ball(toy(), 1.0, Some(MaskRule::default_clamped())).unwrap();
        let tr = integrate(&sys, &FlowState::new(vec![0.0, 0.0], vec![0.0, 0.0]), 0.01, 1.0).unwrap();
        assert_eq!(tr.times.len(), 101);
        assert!(tr.loss_samples.iter().all(|l| *l == 0.0));
        assert_eq!(tr.integrator, Integrator::Rk4);
    }

    #[test]
    fn l1_kinetic_uses_euler() {
        let sys = ContinuousSystem::new(toy(), KineticEnergy::L1, DescentMap::Zero, DescentMap::Linear { c: 1.0 }, None)
            .unwrap();
        let tr = integrate(&sys, &FlowState::new(vec![1.0, 1.0], vec![0.0, 0.0]), 1e-3, 0.1).unwrap();
        assert_eq!(tr.integrator, Integrator::ForwardEuler);
        assert!(tr.inner_dt <= NONSMOOTH_MAX_DT);
        assert_eq!(tr.times.len(), 101);
    }

    #[test]
    fn integrate_rejects_bad_steps() {
        let sys = ContinuousSystem::heavy_ball(toy(), 1.0, None).unwrap();
        let st = FlowState::new(vec![1.0, 1.0], vec![0.0, 0.0]);
        assert!(integrate(&sys, &st, 0.0, 1.0).is_err());
        assert!(integrate(&sys, &st, 0.1, 0.01).is_err());
    }

    #[test]
    fn discrete_gdm_hamiltonian() {
        let cfg = OptimizerConfig::gdm(0.9, 0.01);
        let st = OptimizerState {
            t: 3,
            m: vec![],
            v: vec![],
            s: vec![3.0, 4.0],
        };
        assert!((discrete_hamiltonian(&cfg, 0.01, 1.0, &st) - 1.125).abs() < 1e-15);
    }
}
