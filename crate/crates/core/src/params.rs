//! Parameter accounting, including the two-hidden-layer VGG19 classifier head.

use alloc::vec::Vec;

use crate::activation::ActivationKind;
use crate::loss::LossKind;
use crate::model::{LayerKind, ModelSpec};

/// Features produced by the VGG19 convolutional trunk.
pub const VGG_FEATURES: usize = 25_088;
pub const VGG_CLASSES: usize = 1_000;
pub const VGG_HIDDEN: usize = 4_096;

/// `25088 -> w -> w -> 1000` with Triangular Dropout on both hidden layers.
pub fn vgg_classifier_spec(width: usize) -> ModelSpec {
    ModelSpec::new("vgg19-classifier", VGG_FEATURES, LossKind::SoftmaxCrossEntropy)
        .layer(LayerKind::TriDrop, width, ActivationKind::Relu)
        .layer(LayerKind::TriDrop, width, ActivationKind::Relu)
        .layer(LayerKind::Dense, VGG_CLASSES, ActivationKind::Identity)
}

/// Parameter count of the classifier head at hidden width `w`:
/// `25088 w + w + w^2 + w + 1000 w + 1000`.
pub fn vgg_classifier_param_count(width: usize) -> usize {
    VGG_FEATURES * width + width + width * width + width + VGG_CLASSES * width + VGG_CLASSES
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamCountReport {
    pub per_layer: Vec<usize>,
    pub total: usize,
    pub reference_total: usize,
}

impl ParamCountReport {
    pub fn new(spec: &ModelSpec, reference_total: usize) -> Self {
        let per_layer: Vec<usize> = spec.layers.iter().map(|l| l.param_count()).collect();
        let total = per_layer.iter().sum();
        Self {
            per_layer,
            total,
            reference_total,
        }
    }

    pub fn for_vgg_width(width: usize) -> Self {
        Self::new(
            &vgg_classifier_spec(width),
            vgg_classifier_param_count(VGG_HIDDEN),
        )
    }

    /// `1 - total / reference`.
    pub fn reduction(&self) -> f64 {
        1.0 - self.total as f64 / self.reference_total as f64
    }

    /// Reduction in percent, rounded to one decimal.
    pub fn reduction_percent(&self) -> f64 {
        let pct = self.reduction() * 100.0;
        num_traits::Float::round(pct * 10.0) / 10.0
    }
}
