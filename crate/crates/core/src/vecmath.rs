//! Dense parameter vectors and the weighted norms used by the update rules.
//!
//! Everything here is pure value arithmetic over `f64`; operations never
//! mutate shared state and are safe to call from any thread.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum VecError {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("negative entry at coordinate {index}: {value}")]
    NegativeEntry { index: usize, value: f64 },
    #[error("non-finite entry at coordinate {index}")]
    NonFinite { index: usize },
}

/// Dense real vector of optimization variables or per-coordinate statistics.
///
/// The dimension is fixed at construction and all entries are expected to stay
/// finite; the optimizer layer checks for NaN/Inf after every step.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector {
    values: Vec<f64>,
}

impl ParamVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    /// Like [`ParamVector::new`] but rejects non-finite entries.
    pub fn checked(values: Vec<f64>) -> Result<Self, VecError> {
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(VecError::NonFinite { index });
        }
        Ok(Self { values })
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            values: vec![0.0; dim],
        }
    }

    pub fn filled(dim: usize, value: f64) -> Self {
        Self {
            values: vec![value; dim],
        }
    }

    pub fn scalar(value: f64) -> Self {
        Self {
            values: vec![value],
        }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }

    pub fn first_non_finite(&self) -> Option<usize> {
        self.values.iter().position(|v| !v.is_finite())
    }

    pub fn is_finite(&self) -> bool {
        self.first_non_finite().is_none()
    }

    fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        assert_eq!(self.dim(), other.dim(), "dimension mismatch");
        Self {
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            values: self.values.iter().map(|&a| f(a)).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a * b)
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|a| a * c)
    }

    /// a + c*b, the usual axpy.
    pub fn add_scaled(&self, other: &Self, c: f64) -> Self {
        self.zip_with(other, |a, b| a + c * b)
    }

    pub fn square(&self) -> Self {
        self.map(|a| a * a)
    }

    pub fn sqrt(&self) -> Self {
        self.map(f64::sqrt)
    }

    /// Element-wise `self / (sqrt(n) + eps)`. Every denominator must be
    /// strictly positive; with the configured `eps > 0` that always holds.
    pub fn div_sqrt_guarded(&self, n: &Self, eps: f64) -> Self {
        self.zip_with(n, |a, ni| {
            let den = ni.sqrt() + eps;
            assert!(den > 0.0, "zero denominator in guarded division");
            a / den
        })
    }

    pub fn dot(&self, other: &Self) -> f64 {
        assert_eq!(self.dim(), other.dim(), "dimension mismatch");
        self.values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| a * b)
            .sum()
    }

    pub fn norm_l2(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn norm_linf(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

impl std::ops::Index<usize> for ParamVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.values[i]
    }
}

impl std::ops::IndexMut<usize> for ParamVector {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.values[i]
    }
}

/// Weighted squared norm `‖x‖²_{√n} = Σ_i (√n_i + ε)·x_i²`.
///
/// `n` must be non-negative element-wise; the dimensions must agree.
pub fn weighted_sq_norm(x: &ParamVector, n: &ParamVector, eps: f64) -> Result<f64, VecError> {
    if x.dim() != n.dim() {
        return Err(VecError::DimensionMismatch {
            left: x.dim(),
            right: n.dim(),
        });
    }
    let mut acc = 0.0;
    for i in 0..x.dim() {
        let ni = n[i];
        if ni < 0.0 {
            return Err(VecError::NegativeEntry {
                index: i,
                value: ni,
            });
        }
        acc += (ni.sqrt() + eps) * x[i] * x[i];
    }
    Ok(acc)
}

/// Rescale `g` so its global ℓ2 norm is at most `c`; vectors already inside
/// the ball pass through unchanged.
///
/// Clipping is exactly idempotent: when rescaling rounds the norm a few ulp
/// above `c`, the scale factor is nudged down until the squared norm fits, so
/// a second application is a no-op.
pub fn global_norm_clip(g: &ParamVector, c: f64) -> ParamVector {
    assert!(c > 0.0, "clip threshold must be positive");
    let norm_sq = g.dot(g);
    if norm_sq <= c * c {
        return g.clone();
    }
    let mut s = c / norm_sq.sqrt();
    let mut out = g.scale(s);
    while out.dot(&out) > c * c {
        s = f64::from_bits(s.to_bits() - 1); // next float towards zero
        out = g.scale(s);
    }
    out
}
