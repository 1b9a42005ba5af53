//! Fixed-architecture MLP with hand-derived backpropagation.
//!
//! Shape is input → tanh hidden → scalar linear output, trained with mean
//! squared loss. Parameters live flattened in one vector, laid out as
//! `[W1 (hidden×input, row-major) | b1 (hidden) | w2 (hidden) | b2]`.

use super::Dataset;
use crate::rng::SplitMix64;
use crate::vecmath::ParamVector;

#[derive(Debug, Clone, PartialEq)]
pub struct MlpNet {
    pub input_dim: usize,
    pub hidden: usize,
}

impl MlpNet {
    pub fn new(input_dim: usize, hidden: usize) -> Self {
        assert!(input_dim >= 1 && hidden >= 1);
        Self { input_dim, hidden }
    }

    pub fn param_dim(&self) -> usize {
        self.hidden * self.input_dim + self.hidden + self.hidden + 1
    }

    /// Parameters with Gaussian entries scaled by `scale/√fan_in`.
    pub fn random_params(&self, rng: &mut SplitMix64, scale: f64) -> ParamVector {
        let mut p = Vec::with_capacity(self.param_dim());
        let w1_scale = scale / (self.input_dim as f64).sqrt();
        for _ in 0..self.hidden * self.input_dim {
            p.push(w1_scale * rng.normal());
        }
        for _ in 0..self.hidden {
            p.push(0.1 * scale * rng.normal());
        }
        let w2_scale = scale / (self.hidden as f64).sqrt();
        for _ in 0..self.hidden {
            p.push(w2_scale * rng.normal());
        }
        p.push(0.0);
        ParamVector::new(p)
    }

    fn split<'a>(&self, p: &'a [f64]) -> (&'a [f64], &'a [f64], &'a [f64], f64) {
        let hw = self.hidden * self.input_dim;
        let (w1, rest) = p.split_at(hw);
        let (b1, rest) = rest.split_at(self.hidden);
        let (w2, rest) = rest.split_at(self.hidden);
        (w1, b1, w2, rest[0])
    }

    pub fn forward(&self, params: &ParamVector, x: &[f64]) -> f64 {
        let (w1, b1, w2, b2) = self.split(params.as_slice());
        let mut out = b2;
        for j in 0..self.hidden {
            let row = &w1[j * self.input_dim..(j + 1) * self.input_dim];
            let pre: f64 = row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + b1[j];
            out += w2[j] * pre.tanh();
        }
        out
    }

    /// Mean squared loss `(1/n) Σ ½(f(x)−y)²` and its gradient over the whole
    /// dataset or an index subset.
    pub fn loss_grad(
        &self,
        params: &ParamVector,
        data: &Dataset,
        subset: Option<&[usize]>,
    ) -> (f64, ParamVector) {
        let (w1, b1, w2, b2) = self.split(params.as_slice());
        let count = subset.map_or(data.len(), <[usize]>::len);
        let inv = 1.0 / count as f64;
        let mut loss = 0.0;
        let mut grad = vec![0.0; self.param_dim()];
        let hw = self.hidden * self.input_dim;
        let mut h = vec![0.0; self.hidden];

        let mut visit = |s: usize| {
            let x = &data.features[s];
            let y = data.targets[s];
            let mut out = b2;
            for j in 0..self.hidden {
                let row = &w1[j * self.input_dim..(j + 1) * self.input_dim];
                let pre: f64 = row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + b1[j];
                h[j] = pre.tanh();
                out += w2[j] * h[j];
            }
            let resid = out - y;
            loss += 0.5 * resid * resid * inv;
            let dout = resid * inv;
            for j in 0..self.hidden {
                grad[hw + self.hidden + j] += dout * h[j]; // w2
                let dpre = dout * w2[j] * (1.0 - h[j] * h[j]);
                grad[hw + j] += dpre; // b1
                for i in 0..self.input_dim {
                    grad[j * self.input_dim + i] += dpre * x[i]; // W1
                }
            }
            grad[hw + 2 * self.hidden] += dout; // b2
        };
        match subset {
            Some(idx) => idx.iter().for_each(|&s| visit(s)),
            None => (0..data.len()).for_each(visit),
        }
        (loss, ParamVector::new(grad))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::Problem;

    #[test]
    fn every_weight_block_passes_finite_differences() {
        let p = Problem::mlp(4, 5, 16, 99);
        let mut rng = SplitMix64::new(4242);
        for _ in 0..20 {
            let theta = ParamVector::new((0..p.dim()).map(|_| rng.uniform(-1.0, 1.0)).collect());
            let (_, grad) = p.loss_grad(&theta).unwrap();
            let fd = p.finite_diff_grad(&theta, 1e-5);
            let dev = grad.sub(&fd).norm_linf();
            assert!(
                dev <= 1e-4 * (1.0 + grad.norm_linf()),
                "backprop deviates: {dev}"
            );
        }
    }

    #[test]
    fn teacher_data_is_learnable_signal() {
        let p = Problem::mlp(3, 4, 64, 7);
        // Zero parameters predict the constant b2 = 0; the teacher targets are
        // not all zero, so the loss at zero must be positive.
        let (loss, _) = p.loss_grad(&ParamVector::zeros(p.dim())).unwrap();
        assert!(loss > 1e-4);
    }
}
