//! Differentiable test objectives with exact gradients and a seeded
//! stochastic gradient oracle.
//!
//! The regularized objective is `F(θ) = f(θ) + (λ/2)‖θ‖²`. Whether the λ-term
//! is folded into `loss_grad` is controlled per problem: with
//! `l2_in_objective = false` the evaluation returns the bare `f` and the
//! optimizer's decoupled decay is expected to handle λ (the harness then
//! measures the matching dynamic objective).
//!
//! Noise is injected after the exact gradient (oracle noise), not through data
//! subsampling; a minibatch mode over the synthetic datasets exists separately
//! for the logistic and MLP problems.

mod mlp;

pub use mlp::MlpNet;

use crate::rng::SplitMix64;
use crate::vecmath::ParamVector;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ProblemError {
    #[error("objective overflow: non-finite value at coordinate {coord}")]
    Overflow { coord: usize },
    #[error("minibatch mode is only available for dataset-backed problems")]
    NoMinibatch,
}

/// Additive gradient noise satisfying the unbiased-oracle assumption.
///
/// `Gaussian` draws each coordinate from `N(0, σ²)`, so `E‖ξ‖² = σ²·d`.
/// `BoundedUniform` draws each coordinate from `U[-b, b]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseModel {
    None,
    Gaussian { sigma: f64 },
    BoundedUniform { bound: f64 },
}

impl NoiseModel {
    pub fn apply(&self, grad: &ParamVector, rng: &mut SplitMix64) -> ParamVector {
        match *self {
            NoiseModel::None => grad.clone(),
            NoiseModel::Gaussian { sigma } => grad.map_with(rng, |g, r| g + sigma * r.normal()),
            NoiseModel::BoundedUniform { bound } => {
                grad.map_with(rng, |g, r| g + r.uniform(-bound, bound))
            }
        }
    }
}

trait MapWith {
    fn map_with(&self, rng: &mut SplitMix64, f: impl FnMut(f64, &mut SplitMix64) -> f64) -> Self;
}

impl MapWith for ParamVector {
    fn map_with(
        &self,
        rng: &mut SplitMix64,
        mut f: impl FnMut(f64, &mut SplitMix64) -> f64,
    ) -> Self {
        ParamVector::new(self.as_slice().iter().map(|&g| f(g, rng)).collect())
    }
}

/// Synthetic supervised dataset (features plus scalar targets).
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Kind {
    /// `f(θ) = ½ Σ_i a_i (θ_i - c_i)²` with diagonal curvature `a`.
    Quadratic { diag: Vec<f64>, center: Vec<f64> },
    /// Chained Rosenbrock, global minimizer at the all-ones vector.
    Rosenbrock { dim: usize },
    /// Mean logistic loss over a planted-separator dataset, labels in ±1.
    Logistic { data: Dataset },
    /// Fixed-architecture MLP regression (tanh hidden layer, squared loss).
    Mlp { net: MlpNet, data: Dataset },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    kind: Kind,
    /// ℓ2 regularization weight of the underlying objective.
    pub lambda: f64,
    /// When true the λ-term is part of `loss_grad`; when false the optimizer's
    /// decoupled decay is expected to carry it.
    pub l2_in_objective: bool,
}

impl Problem {
    pub fn quadratic(diag: Vec<f64>, center: Option<Vec<f64>>) -> Self {
        assert!(!diag.is_empty());
        let center = center.unwrap_or_else(|| vec![0.0; diag.len()]);
        assert_eq!(diag.len(), center.len());
        Self {
            kind: Kind::Quadratic { diag, center },
            lambda: 0.0,
            l2_in_objective: false,
        }
    }

    /// Diagonal quadratic with eigenvalues log-spaced from 1 to `cond`.
    pub fn quadratic_conditioned(dim: usize, cond: f64) -> Self {
        assert!(dim >= 1 && cond >= 1.0);
        let diag = (0..dim)
            .map(|i| {
                if dim == 1 {
                    1.0
                } else {
                    cond.powf(i as f64 / (dim - 1) as f64)
                }
            })
            .collect();
        Self::quadratic(diag, None)
    }

    pub fn rosenbrock(dim: usize) -> Self {
        assert!(dim >= 2);
        Self {
            kind: Kind::Rosenbrock { dim },
            lambda: 0.0,
            l2_in_objective: false,
        }
    }

    /// Logistic regression data: features are standard normal, labels come
    /// from a planted separator of norm 2 and are flipped with probability
    /// `flip_prob`. Per sample the stream order is `d` feature draws, then one
    /// flip draw, so regeneration is reproducible from `data_seed` alone.
    pub fn logistic(dim: usize, n_samples: usize, data_seed: u64, flip_prob: f64) -> Self {
        assert!(dim >= 1 && n_samples >= 1);
        let mut rng = SplitMix64::new(data_seed);
        let mut w_star: Vec<f64> = (0..dim).map(|_| rng.normal()).collect();
        let norm = w_star.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
        for v in &mut w_star {
            *v *= 2.0 / norm;
        }
        let mut features = Vec::with_capacity(n_samples);
        let mut targets = Vec::with_capacity(n_samples);
        for _ in 0..n_samples {
            let x: Vec<f64> = (0..dim).map(|_| rng.normal()).collect();
            let margin: f64 = x.iter().zip(&w_star).map(|(a, b)| a * b).sum();
            let mut y = if margin >= 0.0 { 1.0 } else { -1.0 };
            if rng.next_f64() < flip_prob {
                y = -y;
            }
            features.push(x);
            targets.push(y);
        }
        Self {
            kind: Kind::Logistic {
                data: Dataset { features, targets },
            },
            lambda: 0.0,
            l2_in_objective: false,
        }
    }

    /// MLP regression against a seeded teacher network of the same shape.
    pub fn mlp(input_dim: usize, hidden: usize, n_samples: usize, data_seed: u64) -> Self {
        let mut rng = SplitMix64::new(data_seed);
        let teacher = MlpNet::new(input_dim, hidden);
        let teacher_params = teacher.random_params(&mut rng, 1.0);
        let mut features = Vec::with_capacity(n_samples);
        let mut targets = Vec::with_capacity(n_samples);
        for _ in 0..n_samples {
            let x: Vec<f64> = (0..input_dim).map(|_| rng.normal()).collect();
            let y = teacher.forward(&teacher_params, &x);
            features.push(x);
            targets.push(y);
        }
        Self {
            kind: Kind::Mlp {
                net: teacher,
                data: Dataset { features, targets },
            },
            lambda: 0.0,
            l2_in_objective: false,
        }
    }

    pub fn with_lambda(mut self, lambda: f64, l2_in_objective: bool) -> Self {
        assert!(lambda >= 0.0);
        self.lambda = lambda;
        self.l2_in_objective = l2_in_objective;
        self
    }

    pub fn dim(&self) -> usize {
        match &self.kind {
            Kind::Quadratic { diag, .. } => diag.len(),
            Kind::Rosenbrock { dim } => *dim,
            Kind::Logistic { data } => data.features[0].len(),
            Kind::Mlp { net, .. } => net.param_dim(),
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match &self.kind {
            Kind::Quadratic { .. } => "quadratic",
            Kind::Rosenbrock { .. } => "rosenbrock",
            Kind::Logistic { .. } => "logistic",
            Kind::Mlp { .. } => "mlp",
        }
    }

    pub fn dataset(&self) -> Option<&Dataset> {
        match &self.kind {
            Kind::Logistic { data } | Kind::Mlp { data, .. } => Some(data),
            _ => None,
        }
    }

    /// Conventional starting point for each objective.
    pub fn default_start(&self) -> ParamVector {
        match &self.kind {
            Kind::Quadratic { diag, .. } => ParamVector::filled(diag.len(), 1.0),
            Kind::Rosenbrock { dim } => ParamVector::new(
                (0..*dim)
                    .map(|i| if i % 2 == 0 { -1.2 } else { 1.0 })
                    .collect(),
            ),
            Kind::Logistic { data } => ParamVector::zeros(data.features[0].len()),
            Kind::Mlp { net, .. } => {
                // Seeded small init, distinct from the data stream.
                let mut rng = SplitMix64::new(0x5eed_1234);
                let mut p = net.random_params(&mut rng, 0.5);
                for v in p.as_mut_slice() {
                    *v *= 0.5;
                }
                p
            }
        }
    }

    /// Loss and exact analytic gradient, including the λ-term when
    /// `l2_in_objective` is set.
    pub fn loss_grad(&self, theta: &ParamVector) -> Result<(f64, ParamVector), ProblemError> {
        let (mut loss, mut grad) = self.raw_loss_grad(theta);
        if self.l2_in_objective && self.lambda > 0.0 {
            loss += 0.5 * self.lambda * theta.dot(theta);
            grad = grad.add_scaled(theta, self.lambda);
        }
        if !loss.is_finite() || !grad.is_finite() {
            let coord = grad
                .first_non_finite()
                .unwrap_or_else(|| argmax_abs(theta.as_slice()));
            return Err(ProblemError::Overflow { coord });
        }
        Ok((loss, grad))
    }

    /// Loss and gradient of the bare `f`, with no λ-term regardless of mode.
    pub fn raw_loss_grad(&self, theta: &ParamVector) -> (f64, ParamVector) {
        assert_eq!(theta.dim(), self.dim(), "dimension mismatch");
        match &self.kind {
            Kind::Quadratic { diag, center } => {
                let mut loss = 0.0;
                let mut g = vec![0.0; diag.len()];
                for i in 0..diag.len() {
                    let d = theta[i] - center[i];
                    loss += 0.5 * diag[i] * d * d;
                    g[i] = diag[i] * d;
                }
                (loss, ParamVector::new(g))
            }
            Kind::Rosenbrock { dim } => rosenbrock_loss_grad(theta, *dim),
            Kind::Logistic { data } => logistic_loss_grad(theta, data, None),
            Kind::Mlp { net, data } => net.loss_grad(theta, data, None),
        }
    }

    fn loss_only(&self, theta: &ParamVector) -> f64 {
        let (mut loss, _) = self.raw_loss_grad(theta);
        if self.l2_in_objective && self.lambda > 0.0 {
            loss += 0.5 * self.lambda * theta.dot(theta);
        }
        loss
    }

    /// One unbiased stochastic gradient draw: exact gradient plus oracle
    /// noise. Identical seeds give bit-identical draws.
    pub fn sample_stochastic_grad(
        &self,
        theta: &ParamVector,
        noise: &NoiseModel,
        rng: &mut SplitMix64,
    ) -> Result<ParamVector, ProblemError> {
        let (_, grad) = self.loss_grad(theta)?;
        Ok(noise.apply(&grad, rng))
    }

    /// Gradient over `batch` uniformly drawn samples (with replacement) of the
    /// synthetic dataset. Only dataset-backed problems support this.
    pub fn minibatch_grad(
        &self,
        theta: &ParamVector,
        batch: usize,
        rng: &mut SplitMix64,
    ) -> Result<ParamVector, ProblemError> {
        assert!(batch >= 1);
        let n = self.dataset().ok_or(ProblemError::NoMinibatch)?.len();
        let idx: Vec<usize> = (0..batch).map(|_| rng.below(n)).collect();
        let (_, mut grad) = match &self.kind {
            Kind::Logistic { data } => logistic_loss_grad(theta, data, Some(&idx)),
            Kind::Mlp { net, data } => net.loss_grad(theta, data, Some(&idx)),
            _ => unreachable!(),
        };
        if self.l2_in_objective && self.lambda > 0.0 {
            grad = grad.add_scaled(theta, self.lambda);
        }
        Ok(grad)
    }

    /// Central finite differences of the (flag-respecting) loss.
    pub fn finite_diff_grad(&self, theta: &ParamVector, h: f64) -> ParamVector {
        assert!(h > 0.0);
        let mut g = vec![0.0; theta.dim()];
        let mut probe = theta.clone();
        for i in 0..theta.dim() {
            let orig = probe[i];
            probe[i] = orig + h;
            let up = self.loss_only(&probe);
            probe[i] = orig - h;
            let down = self.loss_only(&probe);
            probe[i] = orig;
            g[i] = (up - down) / (2.0 * h);
        }
        ParamVector::new(g)
    }
}

fn argmax_abs(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() || !x.is_finite() {
            best = i;
        }
    }
    best
}

fn rosenbrock_loss_grad(theta: &ParamVector, dim: usize) -> (f64, ParamVector) {
    let t = theta.as_slice();
    let mut loss = 0.0;
    let mut g = vec![0.0; dim];
    for i in 0..dim - 1 {
        let a = t[i + 1] - t[i] * t[i];
        let b = 1.0 - t[i];
        loss += 100.0 * a * a + b * b;
        g[i] += -400.0 * t[i] * a - 2.0 * b;
        g[i + 1] += 200.0 * a;
    }
    (loss, ParamVector::new(g))
}

/// Numerically stable ln(1 + e^t).
fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

fn logistic_loss_grad(
    theta: &ParamVector,
    data: &Dataset,
    subset: Option<&[usize]>,
) -> (f64, ParamVector) {
    let d = theta.dim();
    let mut loss = 0.0;
    let mut g = vec![0.0; d];
    let count = subset.map_or(data.len(), <[usize]>::len);
    let inv = 1.0 / count as f64;
    let mut visit = |s: usize| {
        let x = &data.features[s];
        let y = data.targets[s];
        let z: f64 = x.iter().zip(theta.as_slice()).map(|(a, b)| a * b).sum();
        loss += softplus(-y * z) * inv;
        // dL/dz = -y * sigmoid(-y z) = -y / (1 + e^{y z})
        let dz = -y / (1.0 + (y * z).exp()) * inv;
        for i in 0..d {
            g[i] += dz * x[i];
        }
    };
    match subset {
        Some(idx) => idx.iter().for_each(|&s| visit(s)),
        None => (0..data.len()).for_each(visit),
    }
    (loss, ParamVector::new(g))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grad_close(a: &ParamVector, b: &ParamVector, tol: f64) -> bool {
        a.sub(b).norm_linf() <= tol * (1.0 + a.norm_linf())
    }

    #[test]
    fn quadratic_hand_values() {
        let p = Problem::quadratic(vec![1.0, 2.0], None);
        let (loss, grad) = p.loss_grad(&ParamVector::new(vec![1.0, 1.0])).unwrap();
        assert_eq!(loss, 1.5);
        assert_eq!(grad.as_slice(), &[1.0, 2.0]);
    }

    #[test]
    fn rosenbrock_minimizer_is_stationary() {
        let p = Problem::rosenbrock(2);
        let (loss, grad) = p.loss_grad(&ParamVector::new(vec![1.0, 1.0])).unwrap();
        assert_eq!(loss, 0.0);
        assert_eq!(grad.as_slice(), &[0.0, 0.0]);
        let fd = p.finite_diff_grad(&ParamVector::new(vec![1.0, 1.0]), 1e-5);
        assert!(
            fd.norm_linf() <= 1e-6,
            "fd at minimizer: {:?}",
            fd.as_slice()
        );
    }

    #[test]
    fn logistic_at_zero_is_ln2() {
        let p = Problem::logistic(5, 50, 7, 0.05);
        let (loss, _) = p.loss_grad(&ParamVector::zeros(5)).unwrap();
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn linear_objective_finite_diff_is_exact() {
        // A quadratic with zero curvature on one axis behaves linearly there.
        let p = Problem::quadratic(vec![3.0], None);
        let fd = p.finite_diff_grad(&ParamVector::scalar(2.0), 1e-5);
        // f = 1.5 θ², grad = 3θ = 6; Taylor remainder is O(h²).
        assert!((fd[0] - 6.0).abs() < 1e-4);
    }

    #[test]
    fn scalar_square_finite_diff() {
        let p = Problem::quadratic(vec![2.0], None);
        let fd = p.finite_diff_grad(&ParamVector::scalar(1.0), 1e-5);
        assert!((fd[0] - 2.0).abs() < 1e-4);
    }

    #[test]
    fn analytic_matches_finite_difference_everywhere() {
        let problems = vec![
            Problem::quadratic_conditioned(6, 100.0),
            Problem::rosenbrock(4),
            Problem::logistic(8, 64, 11, 0.05),
            Problem::mlp(3, 4, 32, 13),
            Problem::logistic(5, 40, 3, 0.0).with_lambda(0.1, true),
        ];
        let mut rng = SplitMix64::new(2024);
        for p in &problems {
            for _ in 0..100 {
                let theta =
                    ParamVector::new((0..p.dim()).map(|_| rng.uniform(-2.0, 2.0)).collect());
                let (_, grad) = p.loss_grad(&theta).unwrap();
                let fd = p.finite_diff_grad(&theta, 1e-5);
                assert!(
                    grad_close(&grad, &fd, 1e-4),
                    "{} gradient check failed: max dev {}",
                    p.kind_name(),
                    grad.sub(&fd).norm_linf()
                );
            }
        }
    }

    #[test]
    fn quadratic_gap_identity() {
        let p = Problem::quadratic_conditioned(8, 1e3);
        let star = ParamVector::zeros(8);
        let (f_star, _) = p.loss_grad(&star).unwrap();
        let mut rng = SplitMix64::new(5);
        for _ in 0..50 {
            let theta = ParamVector::new((0..8).map(|_| rng.uniform(-5.0, 5.0)).collect());
            let (f, _) = p.loss_grad(&theta).unwrap();
            let d = theta.sub(&star);
            let mut quad = 0.0;
            for i in 0..8 {
                quad += 0.5 * 1e3f64.powf(i as f64 / 7.0) * d[i] * d[i];
            }
            assert!((f - f_star - quad).abs() <= 1e-10 * (1.0 + quad.abs()));
        }
    }

    #[test]
    fn overflow_reports_coordinate() {
        let p = Problem::rosenbrock(2);
        let huge = ParamVector::new(vec![1e200, 0.0]);
        match p.loss_grad(&huge) {
            Err(ProblemError::Overflow { .. }) => {}
            other => panic!("expected overflow, got {other:?}"),
        }
    }

    #[test]
    fn noise_none_equals_exact() {
        let p = Problem::logistic(4, 32, 9, 0.05);
        let theta = ParamVector::filled(4, 0.3);
        let mut rng = SplitMix64::new(1);
        let s = p
            .sample_stochastic_grad(&theta, &NoiseModel::None, &mut rng)
            .unwrap();
        let (_, exact) = p.loss_grad(&theta).unwrap();
        assert_eq!(s, exact);
    }

    #[test]
    fn gaussian_noise_mean_matches_exact_gradient() {
        // Monte Carlo: mean of 1e5 draws within 5σ/√N of the exact gradient.
        let p = Problem::quadratic(vec![1.0, 2.0, 3.0], None);
        let theta = ParamVector::new(vec![0.5, -1.0, 2.0]);
        let (_, exact) = p.loss_grad(&theta).unwrap();
        let sigma = 1.0;
        let n = 100_000;
        let mut rng = SplitMix64::new(31415);
        let mut acc = ParamVector::zeros(3);
        for _ in 0..n {
            let g = p
                .sample_stochastic_grad(&theta, &NoiseModel::Gaussian { sigma }, &mut rng)
                .unwrap();
            acc = acc.add(&g);
        }
        let mean = acc.scale(1.0 / n as f64);
        let tol = 5.0 * sigma / (n as f64).sqrt();
        for i in 0..3 {
            assert!(
                (mean[i] - exact[i]).abs() <= tol,
                "coord {i}: {} vs {}",
                mean[i],
                exact[i]
            );
        }
    }

    #[test]
    fn bounded_noise_respects_bound() {
        let p = Problem::quadratic(vec![1.0, 1.0], None);
        let theta = ParamVector::new(vec![1.0, -1.0]);
        let (_, exact) = p.loss_grad(&theta).unwrap();
        let mut rng = SplitMix64::new(8);
        for _ in 0..1000 {
            let g = p
                .sample_stochastic_grad(
                    &theta,
                    &NoiseModel::BoundedUniform { bound: 0.1 },
                    &mut rng,
                )
                .unwrap();
            assert!(g.sub(&exact).norm_linf() <= 0.1);
        }
    }

    #[test]
    fn same_seed_same_draws() {
        let p = Problem::logistic(6, 32, 21, 0.05);
        let theta = ParamVector::filled(6, 0.1);
        let noise = NoiseModel::Gaussian { sigma: 0.5 };
        let mut r1 = SplitMix64::new(77);
        let mut r2 = SplitMix64::new(77);
        for _ in 0..10 {
            let a = p.sample_stochastic_grad(&theta, &noise, &mut r1).unwrap();
            let b = p.sample_stochastic_grad(&theta, &noise, &mut r2).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn minibatch_only_for_dataset_problems() {
        let p = Problem::rosenbrock(2);
        let mut rng = SplitMix64::new(3);
        assert_eq!(
            p.minibatch_grad(&ParamVector::zeros(2), 4, &mut rng),
            Err(ProblemError::NoMinibatch)
        );
    }

    #[test]
    fn minibatch_full_dataset_mean_is_unbiased() {
        // Averaging many minibatch gradients approaches the full gradient.
        let p = Problem::logistic(4, 50, 15, 0.0);
        let theta = ParamVector::filled(4, 0.2);
        let (_, exact) = p.loss_grad(&theta).unwrap();
        let mut rng = SplitMix64::new(55);
        let reps = 20_000;
        let mut acc = ParamVector::zeros(4);
        for _ in 0..reps {
            acc = acc.add(&p.minibatch_grad(&theta, 5, &mut rng).unwrap());
        }
        let mean = acc.scale(1.0 / reps as f64);
        assert!(
            grad_close(&mean, &exact, 5e-2),
            "mean {:?}",
            mean.as_slice()
        );
    }
}
