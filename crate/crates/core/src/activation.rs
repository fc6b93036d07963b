use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ActivationKind {
    Identity,
    Relu,
    Sigmoid,
    Tanh,
}

impl ActivationKind {
    pub const ALL: [ActivationKind; 4] = [
        ActivationKind::Identity,
        ActivationKind::Relu,
        ActivationKind::Sigmoid,
        ActivationKind::Tanh,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ActivationKind::Identity => "identity",
            ActivationKind::Relu => "relu",
            ActivationKind::Sigmoid => "sigmoid",
            ActivationKind::Tanh => "tanh",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|a| a.name() == name)
    }

    #[inline]
    pub fn eval<T: Scalar>(self, z: T) -> T {
        match self {
            ActivationKind::Identity => z,
            ActivationKind::Relu => z.max(T::zero()),
            ActivationKind::Sigmoid => sigmoid(z),
            ActivationKind::Tanh => z.tanh(),
        }
    }

    /// Derivative at `z`. The Relu derivative at exactly 0 is 0.
    #[inline]
    pub fn derivative<T: Scalar>(self, z: T) -> T {
        match self {
            ActivationKind::Identity => T::one(),
            ActivationKind::Relu => {
                if z > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
            ActivationKind::Sigmoid => {
                let s = sigmoid(z);
                s * (T::one() - s)
            }
            ActivationKind::Tanh => {
                let t = z.tanh();
                T::one() - t * t
            }
        }
    }

    pub fn apply<T: Scalar>(self, z: &Matrix<T>) -> Matrix<T> {
        if self == ActivationKind::Identity {
            return z.clone();
        }
        z.map(|v| self.eval(v))
    }

    /// `grad_out * act'(z)`, elementwise.
    pub fn backward<T: Scalar>(self, z: &Matrix<T>, grad_out: &Matrix<T>) -> Result<Matrix<T>> {
        if z.shape() != grad_out.shape() {
            return Err(Error::Dimension {
                op: "activation_backward",
                left: z.shape(),
                right: grad_out.shape(),
            });
        }
        if self == ActivationKind::Identity {
            return Ok(grad_out.clone());
        }
        let mut out = grad_out.clone();
        for (g, &zv) in out.as_mut_slice().iter_mut().zip(z.as_slice()) {
            *g = *g * self.derivative(zv);
        }
        Ok(out)
    }
}

#[inline]
fn sigmoid<T: Scalar>(z: T) -> T {
    // Split on sign so exp never overflows.
    if z >= T::zero() {
        T::one() / (T::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (T::one() + e)
    }
}
