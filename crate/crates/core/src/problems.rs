//! Test objectives: loss and gradient oracles with optional smoothness,
//! convexity and known-minimum metadata.
//!
//! Every objective is immutable after construction and cheap to clone
//! (data-heavy variants are reference counted), so workers can share one
//! instance for concurrent evaluation.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{check_dims, Error, Result};
use crate::vector;

/// Largest coordinate dimension accepted by [`make_problem`].
pub const MAX_DIM: usize = 10_000;
/// Dense Hessians are stored explicitly, so their dimension is capped lower.
pub const MAX_DENSE_DIM: usize = 1_024;
/// Cap on `n_samples * dim` for generated logistic-regression data.
pub const MAX_LOGISTIC_ENTRIES: usize = 4_000_000;

/// L2 coefficient added to the logistic loss so it is strongly convex.
pub const LOGISTIC_L2: f64 = 1e-4;

/// Declarative description of a generated objective.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemSpec {
    /// `L(w) = kappa * w1^2 + w2^2`.
    ToyQuadratic { kappa: f64 },
    /// `L(w) = 0.5 * ||a ∘ w||^2`.
    SeparableQuadratic { a: Vec<f64> },
    /// `L(w) = 0.5 (w - c)^T A (w - c)` with a random rotation, spectrum in
    /// `[0, mu]` and largest eigenvalue exactly `mu`.
    RandomSmoothQuadratic { dim: usize, mu: f64, seed: u64 },
    /// Chained Rosenbrock function.
    Rosenbrock { dim: usize },
    /// L2-regularised logistic regression on synthetic Gaussian features.
    Logistic {
        n_samples: usize,
        dim: usize,
        seed: u64,
    },
}

impl Default for ProblemSpec {
    fn default() -> Self {
        ProblemSpec::ToyQuadratic { kappa: 4.0 }
    }
}

impl ProblemSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidProblem(msg));
        match self {
            ProblemSpec::ToyQuadratic { kappa } => {
                if !(kappa.is_finite() && *kappa > 0.0) {
                    return bad(format!("kappa must be positive and finite, got {kappa}"));
                }
            }
            ProblemSpec::SeparableQuadratic { a } => {
                if a.is_empty() || a.len() > MAX_DIM {
                    return bad(format!("separable quadratic needs 1..={MAX_DIM} coefficients"));
                }
                if !vector::all_finite(a) {
                    return bad("coefficients must be finite".into());
                }
                if a.iter().all(|x| *x == 0.0) {
                    return bad("coefficient vector a must be nonzero".into());
                }
            }
            ProblemSpec::RandomSmoothQuadratic { dim, mu, .. } => {
                if *dim < 1 || *dim > MAX_DENSE_DIM {
                    return bad(format!("dim must be in 1..={MAX_DENSE_DIM}, got {dim}"));
                }
                if !(mu.is_finite() && *mu > 0.0) {
                    return bad(format!("mu must be positive and finite, got {mu}"));
                }
            }
            ProblemSpec::Rosenbrock { dim } => {
                if *dim < 2 || *dim > MAX_DIM {
                    return bad(format!("rosenbrock dim must be in 2..={MAX_DIM}, got {dim}"));
                }
            }
            ProblemSpec::Logistic { n_samples, dim, .. } => {
                if *dim < 1 || *dim > MAX_DENSE_DIM {
                    return bad(format!("dim must be in 1..={MAX_DENSE_DIM}, got {dim}"));
                }
                if *n_samples < 1 || n_samples.saturating_mul(*dim) > MAX_LOGISTIC_ENTRIES {
                    return bad(format!(
                        "n_samples must be >= 1 with n_samples * dim <= {MAX_LOGISTIC_ENTRIES}"
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        match self {
            ProblemSpec::ToyQuadratic { .. } => 2,
            ProblemSpec::SeparableQuadratic { a } => a.len(),
            ProblemSpec::RandomSmoothQuadratic { dim, .. }
            | ProblemSpec::Rosenbrock { dim }
            | ProblemSpec::Logistic { dim, .. } => *dim,
        }
    }
}

#[derive(Clone, Debug)]
enum Hessian {
    Diagonal(Vec<f64>),
    Dense(DMatrix<f64>),
}

#[derive(Clone, Debug)]
struct Quadratic {
    hessian: Hessian,
    center: Vec<f64>,
}

impl Quadratic {
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        match &self.hessian {
            Hessian::Diagonal(d) => vector::hadamard(d, x),
            Hessian::Dense(m) => {
                let v = m * DVector::from_column_slice(x);
                v.as_slice().to_vec()
            }
        }
    }

    fn loss(&self, w: &[f64]) -> f64 {
        let x = vector::sub(w, &self.center);
        0.5 * vector::dot(&x, &self.apply(&x))
    }

    fn grad(&self, w: &[f64]) -> Vec<f64> {
        self.apply(&vector::sub(w, &self.center))
    }

    fn spectrum(&self) -> (f64, f64) {
        let eig: Vec<f64> = match &self.hessian {
            Hessian::Diagonal(d) => d.clone(),
            Hessian::Dense(m) => m.clone().symmetric_eigen().eigenvalues.as_slice().to_vec(),
        };
        let lo = eig.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = eig.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    }
}

#[derive(Debug)]
struct LogisticData {
    /// Row-major `n x d` features.
    features: DMatrix<f64>,
    labels: DVector<f64>,
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl LogisticData {
    fn n(&self) -> f64 {
        self.features.nrows() as f64
    }

    fn loss(&self, w: &[f64]) -> f64 {
        let w = DVector::from_column_slice(w);
        let z = &self.features * &w;
        let data: f64 = z
            .iter()
            .zip(self.labels.iter())
            .map(|(z, y)| softplus(*z) - y * z)
            .sum();
        data / self.n() + LOGISTIC_L2 * w.norm_squared()
    }

    fn grad(&self, w: &[f64]) -> Vec<f64> {
        let wv = DVector::from_column_slice(w);
        let z = &self.features * &wv;
        let resid = DVector::from_iterator(
            z.len(),
            z.iter().zip(self.labels.iter()).map(|(z, y)| sigmoid(*z) - y),
        );
        let g = self.features.tr_mul(&resid) / self.n() + wv * (2.0 * LOGISTIC_L2);
        g.as_slice().to_vec()
    }

    fn hessian(&self, w: &[f64]) -> DMatrix<f64> {
        let wv = DVector::from_column_slice(w);
        let z = &self.features * &wv;
        let mut weighted = self.features.clone();
        for (i, zi) in z.iter().enumerate() {
            let s = sigmoid(*zi);
            let scale = s * (1.0 - s);
            weighted.row_mut(i).scale_mut(scale);
        }
        let d = self.features.ncols();
        self.features.tr_mul(&weighted) / self.n() + DMatrix::identity(d, d) * (2.0 * LOGISTIC_L2)
    }

    /// `lambda_max(X^T X) / (4n) + 2 * l2`, a global bound on the Hessian.
    fn smoothness_bound(&self) -> f64 {
        let gram = self.features.tr_mul(&self.features);
        let top = gram
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .copied()
            .fold(0.0, f64::max);
        top / (4.0 * self.n()) + 2.0 * LOGISTIC_L2
    }

    /// Damped Newton iteration; the problem is strongly convex so this
    /// converges to the unique minimiser.
    fn minimize(&self) -> Vec<f64> {
        let d = self.features.ncols();
        let mut w = vec![0.0; d];
        for _ in 0..100 {
            let g = self.grad(&w);
            if vector::norm(&g) < 1e-13 {
                break;
            }
            let h = self.hessian(&w);
            let Some(chol) = h.cholesky() else { break };
            let step = chol.solve(&DVector::from_column_slice(&g));
            let f0 = self.loss(&w);
            let slope = vector::dot(&g, step.as_slice());
            let mut t = 1.0;
            let mut accepted = false;
            while t > 1e-12 {
                let cand: Vec<f64> = w.iter().zip(step.iter()).map(|(wi, si)| wi - t * si).collect();
                if self.loss(&cand) <= f0 - 1e-4 * t * slope {
                    w = cand;
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        w
    }
}

type LossFn = dyn Fn(&[f64]) -> f64 + Send + Sync;
type GradFn = dyn Fn(&[f64]) -> Vec<f64> + Send + Sync;

#[derive(Clone)]
enum Form {
    Quadratic(Quadratic),
    Rosenbrock,
    Logistic(Arc<LogisticData>),
    Custom { loss: Arc<LossFn>, grad: Arc<GradFn> },
}

/// A differentiable loss oracle.
#[derive(Clone)]
pub struct Objective {
    dim: usize,
    mu: Option<f64>,
    convex: bool,
    optimum_value: Option<f64>,
    minimizer: Option<Vec<f64>>,
    label: String,
    form: Form,
}

impl fmt::Debug for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Objective")
            .field("label", &self.label)
            .field("dim", &self.dim)
            .field("mu", &self.mu)
            .field("convex", &self.convex)
            .field("optimum_value", &self.optimum_value)
            .finish()
    }
}

impl Objective {
    /// Wraps arbitrary loss and gradient closures. Metadata defaults to
    /// "unknown" (no `mu`, nonconvex, no known optimum).
    pub fn from_fns<L, G>(dim: usize, loss: L, grad: G) -> Self
    where
        L: Fn(&[f64]) -> f64 + Send + Sync + 'static,
        G: Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        Objective {
            dim,
            mu: None,
            convex: false,
            optimum_value: None,
            minimizer: None,
            label: "custom".into(),
            form: Form::Custom {
                loss: Arc::new(loss),
                grad: Arc::new(grad),
            },
        }
    }

    /// `0.5 * sum_i diag_i * (w_i - center_i)^2`.
    pub fn diagonal_quadratic(diag: Vec<f64>, center: Vec<f64>) -> Result<Self> {
        check_dims(diag.len(), center.len())?;
        if diag.is_empty() || diag.iter().any(|d| !(d.is_finite() && *d >= 0.0)) {
            return Err(Error::InvalidProblem(
                "diagonal must be nonempty, finite and nonnegative".into(),
            ));
        }
        let mu = diag.iter().copied().fold(0.0, f64::max);
        Ok(Objective {
            dim: diag.len(),
            mu: Some(mu),
            convex: true,
            optimum_value: Some(0.0),
            minimizer: Some(center.clone()),
            label: "diagonal_quadratic".into(),
            form: Form::Quadratic(Quadratic {
                hessian: Hessian::Diagonal(diag),
                center,
            }),
        })
    }

    pub fn with_mu(mut self, mu: f64) -> Self {
        self.mu = Some(mu);
        self
    }

    pub fn with_convex(mut self, convex: bool) -> Self {
        self.convex = convex;
        self
    }

    pub fn with_optimum(mut self, value: f64) -> Self {
        self.optimum_value = Some(value);
        self
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn mu(&self) -> Option<f64> {
        self.mu
    }

    pub fn convex(&self) -> bool {
        self.convex
    }

    pub fn optimum_value(&self) -> Option<f64> {
        self.optimum_value
    }

    /// Known minimiser, when the generator provides one.
    pub fn minimizer(&self) -> Option<&[f64]> {
        self.minimizer.as_deref()
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn loss(&self, w: &[f64]) -> f64 {
        debug_assert_eq!(w.len(), self.dim);
        match &self.form {
            Form::Quadratic(q) => q.loss(w),
            Form::Rosenbrock => rosenbrock_loss(w),
            Form::Logistic(d) => d.loss(w),
            Form::Custom { loss, .. } => loss(w),
        }
    }

    pub fn grad(&self, w: &[f64]) -> Vec<f64> {
        debug_assert_eq!(w.len(), self.dim);
        match &self.form {
            Form::Quadratic(q) => q.grad(w),
            Form::Rosenbrock => rosenbrock_grad(w),
            Form::Logistic(d) => d.grad(w),
            Form::Custom { grad, .. } => grad(w),
        }
    }

    /// Checked variants used at API boundaries.
    pub fn try_loss(&self, w: &[f64]) -> Result<f64> {
        check_dims(self.dim, w.len())?;
        Ok(self.loss(w))
    }

    pub fn try_grad(&self, w: &[f64]) -> Result<Vec<f64>> {
        check_dims(self.dim, w.len())?;
        Ok(self.grad(w))
    }

    /// Smallest and largest Hessian eigenvalue, for quadratic objectives.
    pub fn quadratic_spectrum(&self) -> Option<(f64, f64)> {
        match &self.form {
            Form::Quadratic(q) => Some(q.spectrum()),
            _ => None,
        }
    }
}

fn rosenbrock_loss(w: &[f64]) -> f64 {
    w.windows(2)
        .map(|p| 100.0 * (p[1] - p[0] * p[0]).powi(2) + (1.0 - p[0]).powi(2))
        .sum()
}

fn rosenbrock_grad(w: &[f64]) -> Vec<f64> {
    let mut g = vec![0.0; w.len()];
    for i in 0..w.len().saturating_sub(1) {
        let r = w[i + 1] - w[i] * w[i];
        g[i] += -400.0 * w[i] * r - 2.0 * (1.0 - w[i]);
        g[i + 1] += 200.0 * r;
    }
    g
}

fn normal_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

fn random_rotation(rng: &mut ChaCha8Rng, dim: usize) -> DMatrix<f64> {
    let g = DMatrix::from_iterator(dim, dim, normal_vec(rng, dim * dim));
    let qr = g.qr();
    let mut q = qr.q();
    // Fix column signs so the rotation is a deterministic function of the draw.
    let r = qr.r();
    for j in 0..dim {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Builds an [`Objective`] from its declarative description.
pub fn make_problem(spec: &ProblemSpec) -> Result<Objective> {
    spec.validate()?;
    let obj = match spec {
        ProblemSpec::ToyQuadratic { kappa } => {
            Objective::diagonal_quadratic(vec![2.0 * kappa, 2.0], vec![0.0, 0.0])?
                .with_label(format!("toy_quadratic(kappa={kappa})"))
        }
        ProblemSpec::SeparableQuadratic { a } => {
            let diag = a.iter().map(|x| x * x).collect();
            Objective::diagonal_quadratic(diag, vec![0.0; a.len()])?
                .with_label(format!("separable_quadratic(d={})", a.len()))
        }
        ProblemSpec::RandomSmoothQuadratic { dim, mu, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let mut eig: Vec<f64> = (0..*dim).map(|_| rng.random::<f64>() * mu).collect();
            eig[0] = *mu;
            let q = random_rotation(&mut rng, *dim);
            let center = normal_vec(&mut rng, *dim);
            let lambda = DMatrix::from_diagonal(&DVector::from_vec(eig));
            let a = &q * lambda * q.transpose();
            let a = (&a + a.transpose()) * 0.5;
            Objective {
                dim: *dim,
                mu: Some(*mu),
                convex: true,
                optimum_value: Some(0.0),
                minimizer: Some(center.clone()),
                label: format!("random_smooth_quadratic(d={dim},mu={mu},seed={seed})"),
                form: Form::Quadratic(Quadratic {
                    hessian: Hessian::Dense(a),
                    center,
                }),
            }
        }
        ProblemSpec::Rosenbrock { dim } => {
            let mut obj = Objective {
                dim: *dim,
                mu: None,
                convex: false,
                optimum_value: Some(0.0),
                minimizer: Some(vec![1.0; *dim]),
                label: format!("rosenbrock(d={dim})"),
                form: Form::Rosenbrock,
            };
            obj.mu = Some(sample_smoothness(&obj, 1000, 0)?);
            obj
        }
        ProblemSpec::Logistic {
            n_samples,
            dim,
            seed,
        } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let planted = normal_vec(&mut rng, *dim);
            let rows = normal_vec(&mut rng, n_samples * dim);
            let features = DMatrix::from_row_slice(*n_samples, *dim, &rows);
            let labels = DVector::from_iterator(
                *n_samples,
                (0..*n_samples).map(|i| {
                    let z: f64 = features.row(i).iter().zip(&planted).map(|(x, w)| x * w).sum();
                    let p = sigmoid(z);
                    if rng.random::<f64>() < p {
                        1.0
                    } else {
                        0.0
                    }
                }),
            );
            let data = LogisticData { features, labels };
            let mu = data.smoothness_bound();
            let w_star = data.minimize();
            let opt = data.loss(&w_star);
            Objective {
                dim: *dim,
                mu: Some(mu),
                convex: true,
                optimum_value: Some(opt),
                minimizer: Some(w_star),
                label: format!("logistic(n={n_samples},d={dim},seed={seed})"),
                form: Form::Logistic(Arc::new(data)),
            }
        }
    };
    Ok(obj)
}

/// Central finite differences with a uniform step `h`.
pub fn finite_diff_gradient(obj: &Objective, w: &[f64], h: f64) -> Result<Vec<f64>> {
    check_dims(obj.dim(), w.len())?;
    if h.is_nan() || h <= 0.0 {
        return Err(Error::Precondition(format!("finite-difference step must be positive, got {h}")));
    }
    let mut probe = w.to_vec();
    let mut out = Vec::with_capacity(w.len());
    for i in 0..w.len() {
        let orig = probe[i];
        probe[i] = orig + h;
        let up = obj.loss(&probe);
        probe[i] = orig - h;
        let down = obj.loss(&probe);
        probe[i] = orig;
        out.push((up - down) / (2.0 * h));
    }
    Ok(out)
}

/// Empirical lower bound on the gradient-Lipschitz constant: the largest
/// `||grad(w) - grad(w')|| / ||w - w'||` over `n_pairs` standard-normal pairs.
pub fn sample_smoothness(obj: &Objective, n_pairs: usize, seed: u64) -> Result<f64> {
    if n_pairs == 0 {
        return Err(Error::Precondition("n_pairs must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = 0.0_f64;
    for _ in 0..n_pairs {
        let a = normal_vec(&mut rng, obj.dim());
        let b = normal_vec(&mut rng, obj.dim());
        let dw = vector::norm(&vector::sub(&a, &b));
        if dw == 0.0 {
            continue;
        }
        let dg = vector::norm(&vector::sub(&obj.grad(&a), &obj.grad(&b)));
        let ratio = dg / dw;
        if ratio.is_finite() {
            best = best.max(ratio);
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> Objective {
        make_problem(&ProblemSpec::ToyQuadratic { kappa: 4.0 }).unwrap()
    }

    #[test]
    fn toy_quadratic_values() {
        let obj = toy();
        assert_eq!(obj.loss(&[1.0, 1.0]), 5.0);
        assert_eq!(obj.grad(&[1.0, 1.0]), vec![8.0, 2.0]);
        assert_eq!(obj.mu(), Some(8.0));
        assert_eq!(obj.optimum_value(), Some(0.0));
        assert!(obj.convex());
    }

    #[test]
    fn separable_quadratic_at_optimum() {
        let obj = make_problem(&ProblemSpec::SeparableQuadratic { a: vec![1.0, 2.0] }).unwrap();
        assert_eq!(obj.loss(&[0.0, 0.0]), 0.0);
        assert_eq!(obj.grad(&[0.0, 0.0]), vec![0.0, 0.0]);
        assert_eq!(obj.mu(), Some(4.0));
    }

    #[test]
    fn rejects_invalid_specs() {
        for spec in [
            ProblemSpec::ToyQuadratic { kappa: 0.0 },
            ProblemSpec::ToyQuadratic { kappa: -1.0 },
            ProblemSpec::ToyQuadratic { kappa: f64::NAN },
            ProblemSpec::SeparableQuadratic { a: vec![0.0, 0.0] },
            ProblemSpec::SeparableQuadratic { a: vec![] },
            ProblemSpec::RandomSmoothQuadratic { dim: 0, mu: 1.0, seed: 0 },
            ProblemSpec::RandomSmoothQuadratic { dim: 3, mu: 0.0, seed: 0 },
            ProblemSpec::Rosenbrock { dim: 1 },
            ProblemSpec::Logistic { n_samples: 0, dim: 3, seed: 0 },
            ProblemSpec::Logistic { n_samples: 10, dim: 0, seed: 0 },
        ] {
            assert!(
                matches!(make_problem(&spec), Err(Error::InvalidProblem(_))),
                "{spec:?} accepted"
            );
        }
    }

    #[test]
    fn finite_diff_matches_toy_gradient() {
        let obj = toy();
        let fd = finite_diff_gradient(&obj, &[1.0, 1.0], 1e-6).unwrap();
        assert!((fd[0] - 8.0).abs() / 8.0 < 1e-5);
        assert!((fd[1] - 2.0).abs() / 2.0 < 1e-5);
        assert!(finite_diff_gradient(&obj, &[1.0, 1.0], 0.0).is_err());
        assert!(finite_diff_gradient(&obj, &[1.0], 1e-6).is_err());
    }

    #[test]
    fn finite_diff_vanishes_at_stationary_point() {
        let obj = make_problem(&ProblemSpec::Rosenbrock { dim: 4 }).unwrap();
        let fd = finite_diff_gradient(&obj, &[1.0; 4], 1e-6).unwrap();
        assert!(vector::norm(&fd) < 1e-6, "{fd:?}");
    }

    #[test]
    fn logistic_gradient_matches_finite_differences() {
        let obj = make_problem(&ProblemSpec::Logistic { n_samples: 32, dim: 4, seed: 7 }).unwrap();
        let w = [0.3, -0.7, 1.1, 0.05];
        let fd = finite_diff_gradient(&obj, &w, 1e-6).unwrap();
        let g = obj.grad(&w);
        let err = vector::norm(&vector::sub(&fd, &g)) / vector::norm(&g);
        assert!(err < 1e-5, "relative error {err}");
    }

    #[test]
    fn logistic_minimizer_is_stationary() {
        let obj = make_problem(&ProblemSpec::Logistic { n_samples: 64, dim: 5, seed: 3 }).unwrap();
        let w_star = obj.minimizer().unwrap();
        assert!(vector::norm(&obj.grad(w_star)) < 1e-10);
        assert_eq!(obj.loss(w_star), obj.optimum_value().unwrap());
    }

    #[test]
    fn smoothness_sampling_on_quadratics() {
        let est = sample_smoothness(&toy(), 1000, 11).unwrap();
        assert!((7.5..=8.0).contains(&est), "{est}");
        let sep = make_problem(&ProblemSpec::SeparableQuadratic { a: vec![1.0, 2.0] }).unwrap();
        assert!(sample_smoothness(&sep, 1000, 5).unwrap() <= 4.0);
        assert!(sample_smoothness(&sep, 0, 5).is_err());
    }

    #[test]
    fn constant_objective_has_zero_smoothness() {
        let obj = Objective::from_fns(3, |_| 1.5, |w| vec![0.0; w.len()]);
        assert_eq!(sample_smoothness(&obj, 50, 1).unwrap(), 0.0);
    }

    #[test]
    fn random_quadratic_spectrum_is_exact() {
        let obj = make_problem(&ProblemSpec::RandomSmoothQuadratic { dim: 6, mu: 3.5, seed: 9 }).unwrap();
        let (lo, hi) = obj.quadratic_spectrum().unwrap();
        assert!((hi - 3.5).abs() < 1e-12, "{hi}");
        assert!(lo >= -1e-12);
    }

    #[test]
    fn generated_data_is_deterministic() {
        let spec = ProblemSpec::Logistic { n_samples: 16, dim: 3, seed: 42 };
        let a = make_problem(&spec).unwrap();
        let b = make_problem(&spec).unwrap();
        let w = [0.1, 0.2, -0.3];
        assert_eq!(a.loss(&w).to_bits(), b.loss(&w).to_bits());
        assert_eq!(a.mu().unwrap().to_bits(), b.mu().unwrap().to_bits());
        let spec = ProblemSpec::RandomSmoothQuadratic { dim: 5, mu: 2.0, seed: 42 };
        let a = make_problem(&spec).unwrap();
        let b = make_problem(&spec).unwrap();
        let w = [0.1, 0.2, -0.3, 1.0, 2.0];
        assert_eq!(a.grad(&w), b.grad(&w));
    }

    #[test]
    fn spec_json_shape() {
        let spec: ProblemSpec = serde_json::from_str(r#"{"kind":"toy_quadratic","kappa":4.0}"#).unwrap();
        assert_eq!(spec, ProblemSpec::ToyQuadratic { kappa: 4.0 });
        assert!(serde_json::from_str::<ProblemSpec>(r#"{"kind":"toy_quadratic","kapa":4.0}"#).is_err());
    }
}
