//! Alignment masks. Each rule maps an update direction `u` and gradient `g`
//! to per-coordinate weights `phi` so the applied update is `phi ∘ u`.

use serde::{Deserialize, Serialize};

use crate::error::{check_dims, Error, Result};
use crate::vector;

fn default_xi() -> f64 {
    1.0
}

fn default_true() -> bool {
    true
}

/// How the compensating scale is normalised for [`MaskRule::DefaultScaled`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScaleForm {
    /// `alpha = d / (nnz + xi)`.
    #[default]
    Count,
    /// `alpha = 1 / (mean(indicator) + xi)`; `xi` acts as a small epsilon.
    Mean,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MaskRule {
    /// Sign-alignment indicator rescaled by `alpha`.
    DefaultScaled {
        #[serde(default = "default_xi")]
        xi: f64,
        /// `u_i g_i > 0` when true, `>= 0` otherwise.
        #[serde(default = "default_true")]
        strict: bool,
        /// Raise `alpha` to at least 1.
        #[serde(default)]
        clamp_alpha_min_1: bool,
        #[serde(default)]
        form: ScaleForm,
    },
    /// Weight 1 where `u_i g_i > 0`, `-c` elsewhere.
    SoftNegative { c: f64 },
    /// All-ones when `u^T g >= 0`, else all-zeros.
    InnerProduct,
    /// `alpha_k` where `g_i u_i >= (mu sigma / 2) u_i^2`, else 0.
    GuaranteedDescentElementwise { mu: f64, sigma: f64, alpha_k: f64 },
    /// `alpha_k` everywhere when `g^T u >= (alpha_k mu eps_k / 2) ||u||^2`, else 0.
    GuaranteedDescentInner { mu: f64, eps_k: f64, alpha_k: f64 },
    Identity,
}

impl MaskRule {
    /// Strict comparator, count form, `xi = 1`.
    pub fn default_scaled() -> Self {
        MaskRule::DefaultScaled {
            xi: 1.0,
            strict: true,
            clamp_alpha_min_1: false,
            form: ScaleForm::Count,
        }
    }

    /// Non-strict (`>= 0`) comparator, as used by C-Lion.
    pub fn default_scaled_nonstrict() -> Self {
        MaskRule::DefaultScaled {
            xi: 1.0,
            strict: false,
            clamp_alpha_min_1: false,
            form: ScaleForm::Count,
        }
    }

    /// Strict default with `alpha >= 1`; satisfies `phi_i >= 1` on aligned
    /// coordinates and `phi_i = 0` elsewhere.
    pub fn default_clamped() -> Self {
        MaskRule::DefaultScaled {
            xi: 1.0,
            strict: true,
            clamp_alpha_min_1: true,
            form: ScaleForm::Count,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        match self {
            MaskRule::DefaultScaled { xi, .. } => {
                if !(xi.is_finite() && *xi > 0.0) {
                    return bad(format!("xi must be positive and finite, got {xi}"));
                }
            }
            MaskRule::SoftNegative { c } => {
                if !(c.is_finite() && *c >= 0.0) {
                    return bad(format!("c must be nonnegative and finite, got {c}"));
                }
            }
            // A negative alpha_k would reverse the surviving update.
            MaskRule::GuaranteedDescentElementwise { mu, sigma, alpha_k } => {
                if ![mu, sigma, alpha_k].iter().all(|x| x.is_finite() && **x >= 0.0) {
                    return bad("guaranteed-descent mask needs finite mu, sigma, alpha_k >= 0".into());
                }
            }
            MaskRule::GuaranteedDescentInner { mu, eps_k, alpha_k } => {
                if ![mu, eps_k, alpha_k].iter().all(|x| x.is_finite() && **x >= 0.0) {
                    return bad("guaranteed-descent mask needs finite mu, eps_k, alpha_k >= 0".into());
                }
            }
            MaskRule::InnerProduct | MaskRule::Identity => {}
        }
        Ok(())
    }

    /// Checks the step-size coupling a rule needs for its descent guarantee
    /// when used with learning rate `lr`.
    pub fn validate_step(&self, lr: f64) -> Result<()> {
        match self {
            MaskRule::GuaranteedDescentElementwise { sigma, alpha_k, .. } => {
                if *sigma < lr * alpha_k {
                    return Err(Error::Precondition(format!(
                        "sigma = {sigma} < lr * alpha_k = {}",
                        lr * alpha_k
                    )));
                }
            }
            MaskRule::GuaranteedDescentInner { eps_k, .. } if *eps_k < lr => {
                return Err(Error::Precondition(format!(
                    "mask threshold step eps_k = {eps_k} is smaller than the applied lr {lr}"
                )));
            }
            _ => {}
        }
        Ok(())
    }

    /// Short stable name used in reports and file names.
    pub fn tag(&self) -> String {
        match self {
            MaskRule::DefaultScaled {
                xi,
                strict,
                clamp_alpha_min_1,
                form,
            } => {
                let mut s = String::from("default");
                if *xi != 1.0 {
                    s.push_str(&format!("_xi{xi}"));
                }
                if !strict {
                    s.push_str("_ge");
                }
                if *clamp_alpha_min_1 {
                    s.push_str("_clamp");
                }
                if *form == ScaleForm::Mean {
                    s.push_str("_mean");
                }
                s
            }
            MaskRule::SoftNegative { c } => format!("phi_c{c}"),
            MaskRule::InnerProduct => "phi_inner".into(),
            MaskRule::GuaranteedDescentElementwise { .. } => "gd_elementwise".into(),
            MaskRule::GuaranteedDescentInner { .. } => "gd_inner".into(),
            MaskRule::Identity => "identity".into(),
        }
    }
}

/// Per-step mask result.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaskOutcome {
    /// Multiplier applied to `u`, scale already included.
    pub weights: Vec<f64>,
    pub scale: f64,
    pub aligned_count: usize,
    /// `aligned_count / dim`.
    pub ratio: f64,
}

impl MaskOutcome {
    fn new(weights: Vec<f64>, scale: f64, aligned_count: usize) -> Self {
        let ratio = aligned_count as f64 / weights.len() as f64;
        MaskOutcome {
            weights,
            scale,
            aligned_count,
            ratio,
        }
    }
}

pub fn apply_mask(rule: &MaskRule, u: &[f64], g: &[f64]) -> Result<MaskOutcome> {
    check_dims(u.len(), g.len())?;
    let d = u.len();
    if d == 0 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            found: 0,
        });
    }
    let out = match rule {
        MaskRule::DefaultScaled {
            xi,
            strict,
            clamp_alpha_min_1,
            form,
        } => {
            let aligned: Vec<bool> = u
                .iter()
                .zip(g)
                .map(|(a, b)| if *strict { a * b > 0.0 } else { a * b >= 0.0 })
                .collect();
            let nnz = aligned.iter().filter(|x| **x).count();
            let mut alpha = match form {
                ScaleForm::Count => d as f64 / (nnz as f64 + xi),
                ScaleForm::Mean => 1.0 / (nnz as f64 / d as f64 + xi),
            };
            if *clamp_alpha_min_1 {
                alpha = alpha.max(1.0);
            }
            let weights = aligned.iter().map(|a| if *a { alpha } else { 0.0 }).collect();
            MaskOutcome::new(weights, alpha, nnz)
        }
        MaskRule::SoftNegative { c } => {
            let mut nnz = 0;
            let weights = u
                .iter()
                .zip(g)
                .map(|(a, b)| {
                    if a * b > 0.0 {
                        nnz += 1;
                        1.0
                    } else {
                        -c
                    }
                })
                .collect();
            MaskOutcome::new(weights, 1.0, nnz)
        }
        MaskRule::InnerProduct => {
            if vector::dot(u, g) >= 0.0 {
                MaskOutcome::new(vec![1.0; d], 1.0, d)
            } else {
                MaskOutcome::new(vec![0.0; d], 1.0, 0)
            }
        }
        MaskRule::GuaranteedDescentElementwise { mu, sigma, alpha_k } => {
            let half = 0.5 * mu * sigma;
            let mut nnz = 0;
            let weights = u
                .iter()
                .zip(g)
                .map(|(a, b)| {
                    if b * a >= half * a * a {
                        nnz += 1;
                        *alpha_k
                    } else {
                        0.0
                    }
                })
                .collect();
            MaskOutcome::new(weights, *alpha_k, nnz)
        }
        MaskRule::GuaranteedDescentInner { mu, eps_k, alpha_k } => {
            let threshold = 0.5 * alpha_k * mu * eps_k * vector::norm_sq(u);
            if vector::dot(g, u) >= threshold {
                MaskOutcome::new(vec![*alpha_k; d], *alpha_k, d)
            } else {
                MaskOutcome::new(vec![0.0; d], *alpha_k, 0)
            }
        }
        MaskRule::Identity => MaskOutcome::new(vec![1.0; d], 1.0, d),
    };
    Ok(out)
}

/// Fraction of coordinates with `u_i g_i > 0`.
pub fn mask_ratio(u: &[f64], g: &[f64]) -> Result<f64> {
    check_dims(u.len(), g.len())?;
    if u.is_empty() {
        return Err(Error::DimensionMismatch {
            expected: 1,
            found: 0,
        });
    }
    let nnz = u.iter().zip(g).filter(|(a, b)| *a * *b > 0.0).count();
    Ok(nnz as f64 / u.len() as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhiCondition {
    /// `x^T (1 - phi(x)) <= 0`: H and L decrease at least as fast as the
    /// unmasked flow.
    pub decrease_ok: bool,
    /// `x^T phi(x) >= 0`: L is monotone along the masked flow.
    pub monotone_ok: bool,
}

/// Evaluates `phi` at the alignment product `x = u ∘ g` and reports which
/// flow-decrease conditions hold at this `x`.
pub fn check_phi_condition(rule: &MaskRule, x: &[f64]) -> Result<PhiCondition> {
    let ones = vec![1.0; x.len()];
    let phi = apply_mask(rule, x, &ones)?.weights;
    let residual: f64 = x.iter().zip(&phi).map(|(xi, p)| xi * (1.0 - p)).sum();
    Ok(PhiCondition {
        decrease_ok: residual <= 0.0,
        monotone_ok: vector::dot(x, &phi) >= 0.0,
    })
}
