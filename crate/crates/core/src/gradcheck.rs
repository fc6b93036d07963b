//! Central-difference check of backpropagated gradients.
//!
//! The model is promoted to `f64` and both the analytic gradient and the
//! finite differences are computed there, with every Triangular Dropout mask
//! held fixed. A parameter whose perturbation flips the sign of any Relu
//! pre-activation straddles the kink and is skipped.

use alloc::format;
use alloc::vec::Vec;

use crate::activation::ActivationKind;
use crate::error::{Error, Result};
use crate::loss::LossKind;
use crate::mask::TriangularMask;
use crate::matrix::Matrix;
use crate::model::{Model, ModelCache};
use crate::rng::Rng;

/// Models with fewer parameters than this are checked exhaustively.
pub const EXHAUSTIVE_LIMIT: usize = 2000;
/// Number of sampled parameters for larger models.
pub const SAMPLE_SIZE: usize = 2000;
/// Below this magnitude the absolute error is reported instead.
pub const ABS_FALLBACK: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct GradcheckReport {
    pub max_error: f64,
    /// `(layer, offset within the layer's weights-then-bias)` of the worst parameter.
    pub worst: Option<(usize, usize)>,
    pub checked: usize,
    pub skipped_at_kink: usize,
}

fn relu_signs(model: &Model<f64>, cache: &ModelCache<f64>) -> Vec<bool> {
    let mut out = Vec::new();
    for (layer, c) in model.layers().iter().zip(&cache.layers) {
        if layer.activation() == ActivationKind::Relu {
            out.extend(c.pre_activation.as_slice().iter().map(|&z| z > 0.0));
        }
    }
    out
}

fn loss_at(
    model: &Model<f64>,
    x: &Matrix<f64>,
    target: &Matrix<f64>,
    loss: LossKind,
    masks: &[TriangularMask],
) -> Result<(f64, Vec<bool>)> {
    let (pred, cache) = model.forward_train(x, masks)?;
    let l = loss.loss(&pred, target)?;
    Ok((l, relu_signs(model, &cache)))
}

/// Worst relative error between backprop and central differences with step `eps`.
pub fn gradcheck(
    model: &Model,
    x: &Matrix,
    target: &Matrix,
    loss: LossKind,
    masks: &[TriangularMask],
    eps: f64,
) -> Result<GradcheckReport> {
    let base = model.cast::<f64>();
    let x = x.cast::<f64>();
    let target = target.cast::<f64>();

    let (pred, cache) = base.forward_train(&x, masks)?;
    let (l0, grad_out) = loss.loss_and_grad(&pred, &target)?;
    if !l0.is_finite() {
        return Err(Error::Numeric("loss is not finite".into()));
    }
    let grads = base.backward(&cache, &grad_out)?;
    let analytic: Vec<f64> = grads.slices().concat();
    let base_signs = relu_signs(&base, &cache);

    // Map each flat index back to (layer, offset in layer).
    let mut owner = Vec::with_capacity(analytic.len());
    for (layer, l) in base.layers().iter().enumerate() {
        let n = l.params().param_count();
        owner.extend((0..n).map(|off| (layer, off)));
    }

    let total = analytic.len();
    let indices: Vec<usize> = if total < EXHAUSTIVE_LIMIT {
        (0..total).collect()
    } else {
        let mut perm = Rng::new(0).permutation(total);
        perm.truncate(SAMPLE_SIZE);
        perm.sort_unstable();
        perm
    };

    let mut report = GradcheckReport {
        max_error: 0.0,
        worst: None,
        checked: 0,
        skipped_at_kink: 0,
    };
    let base_flat = base.flat_params();
    let mut probe = base.clone();
    for idx in indices {
        let original = base_flat[idx];
        set_flat(&mut probe, idx, original + eps);
        let (lp, sp) = loss_at(&probe, &x, &target, loss, masks)?;
        set_flat(&mut probe, idx, original - eps);
        let (lm, sm) = loss_at(&probe, &x, &target, loss, masks)?;
        set_flat(&mut probe, idx, original);
        if !lp.is_finite() || !lm.is_finite() {
            return Err(Error::Numeric(format!(
                "non-finite loss while perturbing parameter {idx}"
            )));
        }
        if sp != base_signs || sm != base_signs {
            report.skipped_at_kink += 1;
            continue;
        }
        let numeric = (lp - lm) / (2.0 * eps);
        let a = analytic[idx];
        let scale = numeric.abs().max(a.abs());
        let err = if scale < ABS_FALLBACK {
            (numeric - a).abs()
        } else {
            (numeric - a).abs() / scale
        };
        report.checked += 1;
        if report.worst.is_none() || err > report.max_error {
            report.max_error = err;
            report.worst = Some(owner[idx]);
        }
    }
    Ok(report)
}

fn set_flat(model: &mut Model<f64>, mut idx: usize, value: f64) {
    for slice in model.param_slices_mut() {
        if idx < slice.len() {
            slice[idx] = value;
            return;
        }
        idx -= slice.len();
    }
    panic!("parameter index out of range");
}
