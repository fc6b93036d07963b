//! In-memory datasets and mini-batch iteration.

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub inputs: Matrix,
    pub targets: Matrix,
    pub name: String,
    pub provenance: String,
}

impl Dataset {
    pub fn new(name: &str, inputs: Matrix, targets: Matrix) -> Result<Self> {
        if inputs.rows() != targets.rows() {
            return Err(Error::Dimension {
                op: "Dataset::new",
                left: inputs.shape(),
                right: targets.shape(),
            });
        }
        Ok(Self {
            inputs,
            targets,
            name: name.into(),
            provenance: String::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.inputs.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// The first `n` examples.
    pub fn head(&self, n: usize) -> Self {
        let n = n.min(self.len());
        Self {
            inputs: self.inputs.leading_rows(n),
            targets: self.targets.leading_rows(n),
            name: self.name.clone(),
            provenance: self.provenance.clone(),
        }
    }
}

/// One-hot rows for integer class labels.
pub fn one_hot(labels: &[u8], classes: usize) -> Result<Matrix> {
    if let Some((i, &bad)) = labels
        .iter()
        .enumerate()
        .find(|(_, &l)| l as usize >= classes)
    {
        return Err(Error::Data(alloc::format!(
            "label {bad} at index {i} is not below {classes} classes"
        )));
    }
    Ok(Matrix::from_fn(labels.len(), classes, |r, c| {
        if labels[r] as usize == c {
            1.0
        } else {
            0.0
        }
    }))
}

/// Index of the largest entry of each row.
pub fn argmax_rows(m: &Matrix) -> Vec<usize> {
    (0..m.rows())
        .map(|r| {
            m.row(r)
                .iter()
                .enumerate()
                .fold((0, f32::NEG_INFINITY), |best, (i, &v)| {
                    if v > best.1 {
                        (i, v)
                    } else {
                        best
                    }
                })
                .0
        })
        .collect()
}

/// Seeded mini-batch order over a dataset.
#[derive(Debug, Clone)]
pub struct BatchIterator<'a> {
    data: &'a Dataset,
    batch_size: usize,
    shuffle: bool,
    drop_last: bool,
    rng: Rng,
}

impl<'a> BatchIterator<'a> {
    pub fn new(data: &'a Dataset, batch_size: usize, shuffle: bool, drop_last: bool, seed: u64) -> Result<Self> {
        if batch_size == 0 {
            return Err(Error::Config("batch size must be >= 1".into()));
        }
        Ok(Self {
            data,
            batch_size,
            shuffle,
            drop_last,
            rng: Rng::new(seed),
        })
    }

    /// Index groups for the next epoch.
    pub fn epoch_indices(&mut self) -> Vec<Vec<usize>> {
        let n = self.data.len();
        let order = if self.shuffle {
            self.rng.permutation(n)
        } else {
            (0..n).collect()
        };
        order
            .chunks(self.batch_size)
            .filter(|c| !self.drop_last || c.len() == self.batch_size)
            .map(|c| c.to_vec())
            .collect()
    }

    /// `(inputs, targets)` batches for the next epoch.
    pub fn epoch(&mut self) -> impl Iterator<Item = (Matrix, Matrix)> + 'a {
        let data = self.data;
        self.epoch_indices()
            .into_iter()
            .map(move |idx| (data.inputs.select_rows(&idx), data.targets.select_rows(&idx)))
    }
}
