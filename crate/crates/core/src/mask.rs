//! Prefix masks over a batch of layer outputs.
//!
//! Row `i` of a mask keeps the first `w(i)` units and zeroes the rest. With the
//! deterministic mode `w(i) = ceil((i + 1) n / B)`, which gives the unit lower
//! triangle when `B == n`, repeats each width `B / n` times when `B > n`, and
//! steps by `n / B` columns per row when `B < n`.

use alloc::vec::Vec;

use crate::error::{check_range, Error, Result};
use crate::matrix::Matrix;
use crate::rng::Rng;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum MaskMode {
    #[default]
    DeterministicPrefix,
    /// Each row draws its width uniformly from `1..=n`.
    RandomPrefix,
}

impl MaskMode {
    pub fn name(self) -> &'static str {
        match self {
            MaskMode::DeterministicPrefix => "deterministic",
            MaskMode::RandomPrefix => "random",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "deterministic" => Some(MaskMode::DeterministicPrefix),
            "random" => Some(MaskMode::RandomPrefix),
            _ => None,
        }
    }
}

/// Number of leading units kept in row `i` of a deterministic `batch x width` mask.
pub fn effective_width(i: usize, batch: usize, width: usize) -> Result<usize> {
    if batch == 0 || width == 0 {
        return Err(Error::Config(alloc::format!(
            "mask needs batch >= 1 and width >= 1, got {batch}x{width}"
        )));
    }
    if i >= batch {
        return Err(Error::Range {
            what: "mask row",
            value: i,
            min: 0,
            max: batch - 1,
        });
    }
    Ok(((i + 1) * width).div_ceil(batch))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TriangularMask {
    width: usize,
    widths: Vec<usize>,
}

impl TriangularMask {
    pub fn build(batch: usize, width: usize, mode: MaskMode, rng: &mut Rng) -> Result<Self> {
        match mode {
            MaskMode::DeterministicPrefix => Self::deterministic(batch, width),
            MaskMode::RandomPrefix => Self::random(batch, width, rng),
        }
    }

    pub fn deterministic(batch: usize, width: usize) -> Result<Self> {
        let widths = (0..batch)
            .map(|i| effective_width(i, batch, width))
            .collect::<Result<Vec<_>>>()?;
        if widths.is_empty() {
            return Err(Error::Config("mask needs batch >= 1".into()));
        }
        Ok(Self { width, widths })
    }

    pub fn random(batch: usize, width: usize, rng: &mut Rng) -> Result<Self> {
        if batch == 0 || width == 0 {
            return Err(Error::Config(alloc::format!(
                "mask needs batch >= 1 and width >= 1, got {batch}x{width}"
            )));
        }
        let widths = (0..batch).map(|_| rng.int_inclusive(1, width)).collect();
        Ok(Self { width, widths })
    }

    /// Every row keeps the same `k` units.
    pub fn constant(batch: usize, width: usize, k: usize) -> Result<Self> {
        check_range("mask width", k, 1, width)?;
        Self::from_widths(alloc::vec![k; batch], width)
    }

    pub fn from_widths(widths: Vec<usize>, width: usize) -> Result<Self> {
        if widths.is_empty() {
            return Err(Error::Config("mask needs batch >= 1".into()));
        }
        for &w in &widths {
            check_range("row width", w, 1, width)?;
        }
        Ok(Self { width, widths })
    }

    pub fn batch(&self) -> usize {
        self.widths.len()
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Per-row effective widths.
    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn entry(&self, i: usize, j: usize) -> bool {
        j < self.widths[i]
    }

    pub fn to_matrix<T: Scalar>(&self) -> Matrix<T> {
        Matrix::from_fn(self.batch(), self.width, |i, j| {
            if self.entry(i, j) {
                T::one()
            } else {
                T::zero()
            }
        })
    }

    /// Zeroes the masked entries of `m` in place.
    pub fn apply<T: Scalar>(&self, m: &mut Matrix<T>) -> Result<()> {
        if m.shape() != (self.batch(), self.width) {
            return Err(Error::Dimension {
                op: "mask_apply",
                left: m.shape(),
                right: (self.batch(), self.width),
            });
        }
        for (i, &w) in self.widths.iter().enumerate() {
            m.row_mut(i)[w..].fill(T::zero());
        }
        Ok(())
    }
}

/// Standard dropout keep-mask: each entry is 1 with probability `p`.
pub fn standard_dropout_mask<T: Scalar>(
    batch: usize,
    width: usize,
    p: f64,
    rng: &mut Rng,
) -> Result<Matrix<T>> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Config(alloc::format!(
            "keep probability {p} outside [0, 1]"
        )));
    }
    Ok(Matrix::from_fn(batch, width, |_, _| {
        if rng.bernoulli(p) {
            T::one()
        } else {
            T::zero()
        }
    }))
}
