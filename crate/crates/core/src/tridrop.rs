//! Dense layers whose outputs are prefix-masked during training.
//!
//! Training computes `y = M ⊙ act(x W + b)` with no rescaling of the kept
//! units. At evaluation time any width `k` is selected by zeroing units
//! `k..n`, and [`TriDropLayer::prune`] copies the first `k` units into a
//! physically smaller layer.

use crate::activation::ActivationKind;
use crate::dense::{DenseGrads, DenseParams};
use crate::error::{check_range, Error, Result};
use crate::mask::{MaskMode, TriangularMask};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

/// Plain dense layer with an activation.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer<T: Scalar = f32> {
    pub params: DenseParams<T>,
    pub activation: ActivationKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TriDropLayer<T: Scalar = f32> {
    pub params: DenseParams<T>,
    pub activation: ActivationKind,
    pub mode: MaskMode,
    /// Width used by [`crate::Model::forward`]; `None` means full width.
    pub eval_width: Option<usize>,
}

/// Values retained from a training forward pass.
#[derive(Debug, Clone)]
pub struct LayerCache<T: Scalar = f32> {
    pub input: Matrix<T>,
    pub pre_activation: Matrix<T>,
    pub mask: Option<TriangularMask>,
}

impl<T: Scalar> DenseLayer<T> {
    pub fn forward_train(&self, x: &Matrix<T>) -> Result<(Matrix<T>, LayerCache<T>)> {
        let z = self.params.forward(x)?;
        let y = self.activation.apply(&z);
        Ok((
            y,
            LayerCache {
                input: x.clone(),
                pre_activation: z,
                mask: None,
            },
        ))
    }

    pub fn forward(&self, x: &Matrix<T>) -> Result<Matrix<T>> {
        Ok(self.activation.apply(&self.params.forward(x)?))
    }

    pub fn backward(&self, cache: &LayerCache<T>, grad_out: &Matrix<T>) -> Result<DenseGrads<T>> {
        let gz = self.activation.backward(&cache.pre_activation, grad_out)?;
        self.params.backward(&cache.input, &gz)
    }
}

impl<T: Scalar> TriDropLayer<T> {
    pub fn new(params: DenseParams<T>, activation: ActivationKind) -> Self {
        Self {
            params,
            activation,
            mode: MaskMode::DeterministicPrefix,
            eval_width: None,
        }
    }

    pub fn width(&self) -> usize {
        self.params.out_dim()
    }

    /// `mask ⊙ act(x W + b)`.
    pub fn forward_train(
        &self,
        x: &Matrix<T>,
        mask: &TriangularMask,
    ) -> Result<(Matrix<T>, LayerCache<T>)> {
        if x.rows() != mask.batch() || self.width() != mask.width() {
            return Err(Error::Dimension {
                op: "tridrop_forward_train",
                left: (x.rows(), self.width()),
                right: (mask.batch(), mask.width()),
            });
        }
        let z = self.params.forward(x)?;
        let mut y = self.activation.apply(&z);
        mask.apply(&mut y)?;
        Ok((
            y,
            LayerCache {
                input: x.clone(),
                pre_activation: z,
                mask: Some(mask.clone()),
            },
        ))
    }

    /// Gradients flow only through the unmasked entries.
    pub fn backward(&self, cache: &LayerCache<T>, grad_out: &Matrix<T>) -> Result<DenseGrads<T>> {
        let mut g = grad_out.clone();
        if let Some(mask) = &cache.mask {
            mask.apply(&mut g)?;
        }
        let gz = self.activation.backward(&cache.pre_activation, &g)?;
        self.params.backward(&cache.input, &gz)
    }

    /// Forward pass behaving like a layer of width `width`.
    pub fn forward_eval(&self, x: &Matrix<T>, width: usize) -> Result<Matrix<T>> {
        check_range("eval width", width, 1, self.width())?;
        let mut y = self.activation.apply(&self.params.forward(x)?);
        if width < self.width() {
            for r in 0..y.rows() {
                y.row_mut(r)[width..].fill(T::zero());
            }
        }
        Ok(y)
    }

    /// Copies the first `k` units into a plain layer and trims the inputs of
    /// the following layer to match.
    pub fn prune(
        &self,
        next: &DenseParams<T>,
        k: usize,
    ) -> Result<(DenseLayer<T>, DenseParams<T>)> {
        check_range("pruned width", k, 1, self.width())?;
        if next.in_dim() != self.width() {
            return Err(Error::Dimension {
                op: "prune_layer",
                left: self.params.weights().shape(),
                right: next.weights().shape(),
            });
        }
        Ok((
            DenseLayer {
                params: self.params.leading_outputs(k),
                activation: self.activation,
            },
            next.leading_inputs(k),
        ))
    }
}
