use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

/// Clamp applied to predictions before taking logs in binary cross entropy.
pub const BCE_EPS: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LossKind {
    /// Mean over all elements; predictions are probabilities.
    BinaryCrossEntropy,
    /// Mean over all elements.
    MeanSquaredError,
    /// Mean over rows; predictions are logits, targets one-hot.
    SoftmaxCrossEntropy,
}

impl LossKind {
    pub const ALL: [LossKind; 3] = [
        LossKind::BinaryCrossEntropy,
        LossKind::MeanSquaredError,
        LossKind::SoftmaxCrossEntropy,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LossKind::BinaryCrossEntropy => "bce",
            LossKind::MeanSquaredError => "mse",
            LossKind::SoftmaxCrossEntropy => "softmax_ce",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|l| l.name() == name)
    }

    /// Loss only, skipping the gradient buffer.
    pub fn loss<T: Scalar>(self, pred: &Matrix<T>, target: &Matrix<T>) -> Result<T> {
        self.compute(pred, target, false).map(|(l, _)| l)
    }

    /// Mean loss and its gradient with respect to `pred`.
    pub fn loss_and_grad<T: Scalar>(
        self,
        pred: &Matrix<T>,
        target: &Matrix<T>,
    ) -> Result<(T, Matrix<T>)> {
        self.compute(pred, target, true)
            .map(|(l, g)| (l, g.expect("gradient requested")))
    }

    fn compute<T: Scalar>(
        self,
        pred: &Matrix<T>,
        target: &Matrix<T>,
        want_grad: bool,
    ) -> Result<(T, Option<Matrix<T>>)> {
        if pred.shape() != target.shape() {
            return Err(Error::Dimension {
                op: "loss_and_grad",
                left: pred.shape(),
                right: target.shape(),
            });
        }
        // Clamping would silently turn NaN into a valid probability.
        if !pred.is_finite() {
            return Err(Error::Numeric(alloc::format!(
                "{} loss received non-finite predictions",
                self.name()
            )));
        }
        // Sums run in f64 so large batches do not lose precision.
        let count = pred.as_slice().len().max(1) as f64;
        let n_elem = T::lit(count);
        let wide = |v: T| v.to_f64().unwrap_or(f64::NAN);
        let mut grad = want_grad.then(|| Matrix::zeros(pred.rows(), pred.cols()));
        let loss = match self {
            LossKind::MeanSquaredError => {
                let two = T::lit(2.0);
                let mut acc = 0.0f64;
                for (i, (&p, &t)) in pred.as_slice().iter().zip(target.as_slice()).enumerate() {
                    let d = p - t;
                    acc += wide(d * d);
                    if let Some(g) = grad.as_mut() {
                        g.as_mut_slice()[i] = two * d / n_elem;
                    }
                }
                T::lit(acc / count)
            }
            LossKind::BinaryCrossEntropy => {
                let eps = T::lit(BCE_EPS);
                let hi = T::one() - eps;
                let mut acc = 0.0f64;
                for (i, (&p, &t)) in pred.as_slice().iter().zip(target.as_slice()).enumerate() {
                    let pc = p.max(eps).min(hi);
                    acc -= wide(t * pc.ln() + (T::one() - t) * (T::one() - pc).ln());
                    if let Some(g) = grad.as_mut() {
                        g.as_mut_slice()[i] = (pc - t) / (pc * (T::one() - pc)) / n_elem;
                    }
                }
                T::lit(acc / count)
            }
            LossKind::SoftmaxCrossEntropy => {
                let rows = T::from_usize(pred.rows().max(1)).unwrap();
                let mut acc = 0.0f64;
                for r in 0..pred.rows() {
                    let logits = pred.row(r);
                    let tgt = target.row(r);
                    let max = logits.iter().fold(T::neg_infinity(), |m, &v| m.max(v));
                    let sum: T = logits.iter().map(|&v| (v - max).exp()).sum();
                    let log_z = max + sum.ln();
                    for (c, (&z, &t)) in logits.iter().zip(tgt).enumerate() {
                        acc -= wide(t * (z - log_z));
                        if let Some(g) = grad.as_mut() {
                            g.set(r, c, ((z - log_z).exp() - t) / rows);
                        }
                    }
                }
                T::lit(acc / pred.rows().max(1) as f64)
            }
        };
        if !loss.is_finite() {
            return Err(Error::Numeric(alloc::format!(
                "{} loss is not finite",
                self.name()
            )));
        }
        Ok((loss, grad))
    }
}
