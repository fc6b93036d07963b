//! Triangular Dropout and the small dense-network engine it runs on.
//!
//! A Triangular Dropout layer masks its batch output during training so that
//! row `i` only keeps its first `w(i)` units. Unit `j` is therefore trained
//! only in the presence of units `0..j`, which orders the representation: after
//! training, the layer can be evaluated at any width `k`, or its first `k`
//! units copied into a physically smaller dense network with the same output.
//!
//! The crate is `no_std` (with `alloc`) when built without the default `std`
//! feature; file formats, dataset ingestion and the CLI live in the `tridrop`
//! crate.
//!
//! Module map:
//! - [`matrix`], [`activation`], [`loss`], [`dense`], [`optim`], [`schedule`]:
//!   the numeric engine, generic over `f32` / `f64`.
//! - [`mask`], [`tridrop`]: mask construction and the masked layer.
//! - [`model`], [`params`], [`sweep`]: layer stacks, pruning, parameter
//!   accounting and multi-width evaluation.
//! - [`data`], [`train`], [`gradcheck`]: batching, training and the
//!   finite-difference oracle.
//! - [`control`]: the point-mass environment used for policy distillation.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod activation;
pub mod control;
pub mod data;
pub mod dense;
pub mod error;
pub mod gradcheck;
pub mod loss;
pub mod mask;
pub mod matrix;
pub mod model;
pub mod optim;
pub mod params;
pub mod rng;
pub mod scalar;
pub mod schedule;
pub mod sweep;
pub mod train;
pub mod tridrop;

pub use activation::ActivationKind;
pub use data::{one_hot, BatchIterator, Dataset};
pub use dense::{DenseGrads, DenseParams};
pub use error::{Error, Result};
pub use loss::LossKind;
pub use mask::{effective_width, standard_dropout_mask, MaskMode, TriangularMask};
pub use matrix::Matrix;
pub use model::{Layer, LayerKind, LayerSpec, Model, ModelSpec};
pub use optim::AdamState;
pub use params::{vgg_classifier_param_count, ParamCountReport};
pub use rng::Rng;
pub use scalar::Scalar;
pub use schedule::{PlateauScheduler, StepScheduler};
pub use tridrop::{DenseLayer, TriDropLayer};
