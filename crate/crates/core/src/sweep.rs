//! Evaluating one trained model at many widths.
//!
//! Everything up to and including the first Triangular Dropout layer is
//! computed once at full width. Width `k` of that layer is its first `k`
//! output columns, so each configuration only reruns the remaining layers,
//! pruned to the requested widths.

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::model::Model;

pub struct WidthSweep<'m> {
    model: &'m Model,
    first_td: Option<usize>,
    prefix: Matrix,
}

impl<'m> WidthSweep<'m> {
    pub fn new(model: &'m Model, x: &Matrix) -> Result<Self> {
        let first_td = model.tridrop_indices().first().copied();
        let mut h = x.clone();
        let stop = first_td.map_or(model.layers().len(), |i| i + 1);
        for layer in &model.layers()[..stop] {
            let full = layer.params().forward(&h)?;
            h = layer.activation().apply(&full);
        }
        Ok(Self {
            model,
            first_td,
            prefix: h,
        })
    }

    /// Output with one width per Triangular Dropout layer.
    pub fn output(&self, widths: &[usize]) -> Result<Matrix> {
        let Some(first) = self.first_td else {
            if !widths.is_empty() {
                return Err(Error::Config("model has no Triangular Dropout layers".into()));
            }
            return Ok(self.prefix.clone());
        };
        let pruned = self.model.prune(widths)?;
        let h = self.prefix.leading_columns(widths[0]);
        pruned.forward_from(first + 1, &h)
    }
}
