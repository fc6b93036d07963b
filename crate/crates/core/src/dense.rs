//! Fully-connected affine maps `x W + b`.

use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;

use crate::activation::ActivationKind;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::Rng;
use crate::scalar::Scalar;

/// Weights are stored `in_dim x out_dim` so a batch `x` maps as `x W + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseParams<T: Scalar = f32> {
    weights: Matrix<T>,
    bias: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseGrads<T: Scalar = f32> {
    pub grad_in: Matrix<T>,
    pub grad_w: Matrix<T>,
    pub grad_b: Vec<T>,
}

impl<T: Scalar> DenseParams<T> {
    pub fn new(weights: Matrix<T>, bias: Vec<T>) -> Result<Self> {
        if bias.len() != weights.cols() || weights.rows() == 0 || weights.cols() == 0 {
            return Err(Error::Dimension {
                op: "DenseParams::new",
                left: weights.shape(),
                right: (1, bias.len()),
            });
        }
        Ok(Self { weights, bias })
    }

    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Self {
            weights: Matrix::zeros(in_dim, out_dim),
            bias: vec![T::zero(); out_dim],
        }
    }

    /// He-uniform for Relu layers, Xavier-uniform otherwise; zero bias.
    pub fn init(in_dim: usize, out_dim: usize, activation: ActivationKind, rng: &mut Rng) -> Self {
        let limit = match activation {
            ActivationKind::Relu => Float::sqrt(6.0 / in_dim as f64),
            _ => Float::sqrt(6.0 / (in_dim + out_dim) as f64),
        };
        let weights =
            Matrix::from_fn(in_dim, out_dim, |_, _| T::lit(rng.uniform_f64(-limit, limit)));
        Self {
            weights,
            bias: vec![T::zero(); out_dim],
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weights.rows()
    }

    pub fn out_dim(&self) -> usize {
        self.weights.cols()
    }

    pub fn weights(&self) -> &Matrix<T> {
        &self.weights
    }

    pub fn bias(&self) -> &[T] {
        &self.bias
    }

    pub fn weights_mut(&mut self) -> &mut [T] {
        self.weights.as_mut_slice()
    }

    pub fn bias_mut(&mut self) -> &mut [T] {
        &mut self.bias
    }

    /// Weights and bias as disjoint mutable slices.
    pub fn slices_mut(&mut self) -> (&mut [T], &mut [T]) {
        (self.weights.as_mut_slice(), &mut self.bias)
    }

    pub fn param_count(&self) -> usize {
        self.in_dim() * self.out_dim() + self.out_dim()
    }

    /// Pre-activation `x W + b`.
    pub fn forward(&self, x: &Matrix<T>) -> Result<Matrix<T>> {
        if x.cols() != self.in_dim() {
            return Err(Error::Dimension {
                op: "dense_forward",
                left: x.shape(),
                right: self.weights.shape(),
            });
        }
        let mut z = x.matmul(&self.weights)?;
        z.add_row_vector(&self.bias)?;
        Ok(z)
    }

    /// Given the layer input and `dL/dz`, returns `dL/dx`, `dL/dW` and `dL/db`.
    pub fn backward(&self, x: &Matrix<T>, grad_out: &Matrix<T>) -> Result<DenseGrads<T>> {
        if x.cols() != self.in_dim()
            || grad_out.cols() != self.out_dim()
            || x.rows() != grad_out.rows()
        {
            return Err(Error::Dimension {
                op: "dense_backward",
                left: x.shape(),
                right: grad_out.shape(),
            });
        }
        Ok(DenseGrads {
            grad_w: x.matmul_tn(grad_out)?,
            grad_b: grad_out.column_sums(),
            grad_in: grad_out.matmul_nt(&self.weights)?,
        })
    }

    /// Keeps the first `k` output units.
    pub fn leading_outputs(&self, k: usize) -> Self {
        Self {
            weights: self.weights.leading_columns(k),
            bias: self.bias[..k.min(self.bias.len())].to_vec(),
        }
    }

    /// Keeps the first `k` input rows.
    pub fn leading_inputs(&self, k: usize) -> Self {
        Self {
            weights: self.weights.leading_rows(k),
            bias: self.bias.clone(),
        }
    }

    pub fn cast<U: Scalar>(&self) -> DenseParams<U> {
        DenseParams {
            weights: self.weights.cast(),
            bias: self
                .bias
                .iter()
                .map(|v| U::from_f64(v.to_f64().unwrap_or(f64::NAN)).unwrap_or(U::nan()))
                .collect(),
        }
    }
}
