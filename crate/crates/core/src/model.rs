//! Layer stacks: specification, construction, training passes, and pruning.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write as _;

use crate::activation::ActivationKind;
use crate::dense::DenseParams;
use crate::error::{check_range, Error, Result};
use crate::loss::LossKind;
use crate::mask::TriangularMask;
use crate::matrix::Matrix;
use crate::rng::Rng;
use crate::scalar::Scalar;
use crate::tridrop::{DenseLayer, LayerCache, TriDropLayer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LayerKind {
    Dense,
    TriDrop,
}

impl LayerKind {
    pub fn name(self) -> &'static str {
        match self {
            LayerKind::Dense => "dense",
            LayerKind::TriDrop => "tridrop",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "dense" => Some(LayerKind::Dense),
            "tridrop" => Some(LayerKind::TriDrop),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerSpec {
    pub kind: LayerKind,
    pub in_dim: usize,
    pub out_dim: usize,
    pub activation: ActivationKind,
}

impl LayerSpec {
    pub fn dense(in_dim: usize, out_dim: usize, activation: ActivationKind) -> Self {
        Self {
            kind: LayerKind::Dense,
            in_dim,
            out_dim,
            activation,
        }
    }

    pub fn tridrop(in_dim: usize, out_dim: usize, activation: ActivationKind) -> Self {
        Self {
            kind: LayerKind::TriDrop,
            in_dim,
            out_dim,
            activation,
        }
    }

    pub fn param_count(&self) -> usize {
        self.in_dim * self.out_dim + self.out_dim
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelSpec {
    pub name: String,
    pub input_dim: usize,
    pub layers: Vec<LayerSpec>,
    pub loss: LossKind,
    pub seed: u64,
    /// Free-form note on how the weights were produced.
    pub provenance: String,
}

impl ModelSpec {
    pub fn new(name: &str, input_dim: usize, loss: LossKind) -> Self {
        Self {
            name: name.into(),
            input_dim,
            layers: Vec::new(),
            loss,
            seed: 0,
            provenance: String::new(),
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Appends a layer fed by the previous layer's output.
    pub fn layer(mut self, kind: LayerKind, out_dim: usize, activation: ActivationKind) -> Self {
        let in_dim = self.output_dim();
        self.layers.push(LayerSpec {
            kind,
            in_dim,
            out_dim,
            activation,
        });
        self
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(self.input_dim, |l| l.out_dim)
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::Config("model needs at least one layer".into()));
        }
        let mut prev = self.input_dim;
        for (t, l) in self.layers.iter().enumerate() {
            if l.in_dim == 0 || l.out_dim == 0 {
                return Err(Error::Config(format!("layer {t} has a zero dimension")));
            }
            if l.in_dim != prev {
                return Err(Error::Config(format!(
                    "layer {t} expects {} inputs but receives {prev}",
                    l.in_dim
                )));
            }
            prev = l.out_dim;
        }
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(LayerSpec::param_count).sum()
    }

    /// Indices of the Triangular Dropout layers.
    pub fn tridrop_layers(&self) -> Vec<usize> {
        self.layers
            .iter()
            .enumerate()
            .filter(|(_, l)| l.kind == LayerKind::TriDrop)
            .map(|(i, _)| i)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Layer<T: Scalar = f32> {
    Dense(DenseLayer<T>),
    TriDrop(TriDropLayer<T>),
}

impl<T: Scalar> Layer<T> {
    pub fn params(&self) -> &DenseParams<T> {
        match self {
            Layer::Dense(l) => &l.params,
            Layer::TriDrop(l) => &l.params,
        }
    }

    pub fn params_mut(&mut self) -> &mut DenseParams<T> {
        match self {
            Layer::Dense(l) => &mut l.params,
            Layer::TriDrop(l) => &mut l.params,
        }
    }

    pub fn activation(&self) -> ActivationKind {
        match self {
            Layer::Dense(l) => l.activation,
            Layer::TriDrop(l) => l.activation,
        }
    }

    pub fn kind(&self) -> LayerKind {
        match self {
            Layer::Dense(_) => LayerKind::Dense,
            Layer::TriDrop(_) => LayerKind::TriDrop,
        }
    }

    pub fn spec(&self) -> LayerSpec {
        LayerSpec {
            kind: self.kind(),
            in_dim: self.params().in_dim(),
            out_dim: self.params().out_dim(),
            activation: self.activation(),
        }
    }

    fn cast<U: Scalar>(&self) -> Layer<U> {
        match self {
            Layer::Dense(l) => Layer::Dense(DenseLayer {
                params: l.params.cast(),
                activation: l.activation,
            }),
            Layer::TriDrop(l) => Layer::TriDrop(TriDropLayer {
                params: l.params.cast(),
                activation: l.activation,
                mode: l.mode,
                eval_width: l.eval_width,
            }),
        }
    }
}

/// Retained activations of a training forward pass.
#[derive(Debug, Clone)]
pub struct ModelCache<T: Scalar = f32> {
    pub layers: Vec<LayerCache<T>>,
}

/// Per-layer `(dL/dW, dL/db)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelGrads<T: Scalar = f32> {
    pub layers: Vec<(Matrix<T>, Vec<T>)>,
}

impl<T: Scalar> ModelGrads<T> {
    /// Flat views in the same order as [`Model::param_slices_mut`].
    pub fn slices(&self) -> Vec<&[T]> {
        self.layers
            .iter()
            .flat_map(|(w, b)| [w.as_slice(), b.as_slice()])
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model<T: Scalar = f32> {
    pub name: String,
    pub seed: u64,
    pub provenance: String,
    pub loss: LossKind,
    layers: Vec<Layer<T>>,
}

impl<T: Scalar> Model<T> {
    /// Fresh weights drawn from the spec's seed.
    pub fn from_spec(spec: &ModelSpec) -> Result<Self> {
        spec.validate()?;
        let mut rng = Rng::new(spec.seed);
        let layers = spec
            .layers
            .iter()
            .map(|l| {
                let params = DenseParams::init(l.in_dim, l.out_dim, l.activation, &mut rng);
                match l.kind {
                    LayerKind::Dense => Layer::Dense(DenseLayer {
                        params,
                        activation: l.activation,
                    }),
                    LayerKind::TriDrop => Layer::TriDrop(TriDropLayer::new(params, l.activation)),
                }
            })
            .collect();
        Ok(Self {
            name: spec.name.clone(),
            seed: spec.seed,
            provenance: spec.provenance.clone(),
            loss: spec.loss,
            layers,
        })
    }

    /// Assembles a model from existing layers, checking that dimensions chain.
    pub fn from_layers(spec: &ModelSpec, layers: Vec<Layer<T>>) -> Result<Self> {
        let model = Self {
            name: spec.name.clone(),
            seed: spec.seed,
            provenance: spec.provenance.clone(),
            loss: spec.loss,
            layers,
        };
        let rebuilt = model.spec_with_input(spec.input_dim);
        rebuilt.validate()?;
        if rebuilt.layers != spec.layers {
            return Err(Error::Config("layers do not match the spec".into()));
        }
        Ok(model)
    }

    fn spec_with_input(&self, input_dim: usize) -> ModelSpec {
        ModelSpec {
            name: self.name.clone(),
            input_dim,
            layers: self.layers.iter().map(Layer::spec).collect(),
            loss: self.loss,
            seed: self.seed,
            provenance: self.provenance.clone(),
        }
    }

    pub fn spec(&self) -> ModelSpec {
        self.spec_with_input(self.input_dim())
    }

    pub fn layers(&self) -> &[Layer<T>] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer<T>] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].params().in_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].params().out_dim()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.params().param_count()).sum()
    }

    pub fn tridrop_indices(&self) -> Vec<usize> {
        self.layers
            .iter()
            .enumerate()
            .filter(|(_, l)| l.kind() == LayerKind::TriDrop)
            .map(|(i, _)| i)
            .collect()
    }

    /// Full widths of the Triangular Dropout layers, in order.
    pub fn tridrop_widths(&self) -> Vec<usize> {
        self.tridrop_indices()
            .into_iter()
            .map(|i| self.layers[i].params().out_dim())
            .collect()
    }

    /// Sets the widths used by [`Model::forward`]; `None` selects full width.
    pub fn set_eval_widths(&mut self, widths: &[Option<usize>]) -> Result<()> {
        let idx = self.tridrop_indices();
        if idx.len() != widths.len() {
            return Err(Error::Config(format!(
                "expected {} widths, got {}",
                idx.len(),
                widths.len()
            )));
        }
        for (&i, &w) in idx.iter().zip(widths) {
            if let Layer::TriDrop(l) = &mut self.layers[i] {
                if let Some(k) = w {
                    check_range("eval width", k, 1, l.width())?;
                }
                l.eval_width = w;
            }
        }
        Ok(())
    }

    /// Inference using each Triangular Dropout layer's configured eval width.
    pub fn forward(&self, x: &Matrix<T>) -> Result<Matrix<T>> {
        self.forward_from(0, x)
    }

    /// Runs layers `start..` on `x` at their configured eval widths.
    pub fn forward_from(&self, start: usize, x: &Matrix<T>) -> Result<Matrix<T>> {
        let mut h = x.clone();
        for layer in &self.layers[start.min(self.layers.len())..] {
            h = match layer {
                Layer::Dense(l) => l.forward(&h)?,
                Layer::TriDrop(l) => l.forward_eval(&h, l.eval_width.unwrap_or(l.width()))?,
            };
        }
        Ok(h)
    }

    /// Turns dense layer `idx` into a Triangular Dropout layer with the same
    /// weights, so a plain model can be ablated like a trained one.
    pub fn convert_to_tridrop(&mut self, idx: usize) -> Result<()> {
        check_range("layer index", idx, 0, self.layers.len() - 1)?;
        if let Layer::Dense(l) = &self.layers[idx] {
            self.layers[idx] = Layer::TriDrop(TriDropLayer::new(l.params.clone(), l.activation));
        }
        Ok(())
    }

    /// Inference with one explicit width per Triangular Dropout layer.
    pub fn forward_at_widths(&self, x: &Matrix<T>, widths: &[usize]) -> Result<Matrix<T>> {
        let idx = self.tridrop_indices();
        if idx.len() != widths.len() {
            return Err(Error::Config(format!(
                "expected {} widths, got {}",
                idx.len(),
                widths.len()
            )));
        }
        let mut h = x.clone();
        let mut next_width = widths.iter();
        for layer in &self.layers {
            h = match layer {
                Layer::Dense(l) => l.forward(&h)?,
                Layer::TriDrop(l) => l.forward_eval(&h, *next_width.next().unwrap())?,
            };
        }
        Ok(h)
    }

    /// Training pass; `masks` holds one mask per Triangular Dropout layer.
    pub fn forward_train(
        &self,
        x: &Matrix<T>,
        masks: &[TriangularMask],
    ) -> Result<(Matrix<T>, ModelCache<T>)> {
        let n_td = self.tridrop_indices().len();
        if masks.len() != n_td {
            return Err(Error::Config(format!(
                "expected {n_td} masks, got {}",
                masks.len()
            )));
        }
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut h = x.clone();
        let mut next_mask = masks.iter();
        for layer in &self.layers {
            let (y, cache) = match layer {
                Layer::Dense(l) => l.forward_train(&h)?,
                Layer::TriDrop(l) => l.forward_train(&h, next_mask.next().unwrap())?,
            };
            caches.push(cache);
            h = y;
        }
        Ok((h, ModelCache { layers: caches }))
    }

    pub fn backward(&self, cache: &ModelCache<T>, grad_out: &Matrix<T>) -> Result<ModelGrads<T>> {
        if cache.layers.len() != self.layers.len() {
            return Err(Error::Config("cache does not belong to this model".into()));
        }
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut g = grad_out.clone();
        for (layer, c) in self.layers.iter().zip(&cache.layers).rev() {
            let dg = match layer {
                Layer::Dense(l) => l.backward(c, &g)?,
                Layer::TriDrop(l) => l.backward(c, &g)?,
            };
            grads.push((dg.grad_w, dg.grad_b));
            g = dg.grad_in;
        }
        grads.reverse();
        Ok(ModelGrads { layers: grads })
    }

    /// Lengths of the flat parameter tensors (weights then bias, per layer).
    pub fn param_sizes(&self) -> Vec<usize> {
        self.layers
            .iter()
            .flat_map(|l| [l.params().weights().as_slice().len(), l.params().bias().len()])
            .collect()
    }

    pub fn param_slices_mut(&mut self) -> Vec<&mut [T]> {
        let mut out = Vec::with_capacity(2 * self.layers.len());
        for l in &mut self.layers {
            let (w, b) = l.params_mut().slices_mut();
            out.push(w);
            out.push(b);
        }
        out
    }

    /// All parameters flattened in storage order.
    pub fn flat_params(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend_from_slice(l.params().weights().as_slice());
            out.extend_from_slice(l.params().bias());
        }
        out
    }

    pub fn cast<U: Scalar>(&self) -> Model<U> {
        Model {
            name: self.name.clone(),
            seed: self.seed,
            provenance: self.provenance.clone(),
            loss: self.loss,
            layers: self.layers.iter().map(Layer::cast).collect(),
        }
    }

    /// Replaces every Triangular Dropout layer by a plain dense layer holding
    /// its first `widths[t]` units, trimming the inputs of each following layer.
    pub fn prune(&self, widths: &[usize]) -> Result<Model<T>> {
        let idx = self.tridrop_indices();
        if idx.len() != widths.len() {
            return Err(Error::Config(format!(
                "expected {} widths, got {}",
                idx.len(),
                widths.len()
            )));
        }
        if idx.last() == Some(&(self.layers.len() - 1)) {
            return Err(Error::Config(
                "a Triangular Dropout output layer cannot be pruned".into(),
            ));
        }
        let mut next_width = widths.iter();
        let mut keep_inputs: Option<usize> = None;
        let mut layers = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let mut params = layer.params().clone();
            if let Some(k) = keep_inputs.take() {
                params = params.leading_inputs(k);
            }
            if let Layer::TriDrop(l) = layer {
                let k = *next_width.next().unwrap();
                check_range("pruned width", k, 1, l.width())?;
                params = params.leading_outputs(k);
                keep_inputs = Some(k);
            }
            layers.push(Layer::Dense(DenseLayer {
                params,
                activation: layer.activation(),
            }));
        }
        Ok(Model {
            name: self.name.clone(),
            seed: self.seed,
            provenance: format!("pruned to {widths:?}"),
            loss: self.loss,
            layers,
        })
    }

    /// Per-layer table with parameter counts and total.
    pub fn summarize(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "model {:?}: input {} -> output {}, loss {}",
            self.name,
            self.input_dim(),
            self.output_dim(),
            self.loss.name()
        );
        let _ = writeln!(
            s,
            "{:>3}  {:<8} {:>7} {:>7}  {:<9} {:>12}  {}",
            "#", "kind", "in", "out", "act", "params", "eval_width"
        );
        for (i, l) in self.layers.iter().enumerate() {
            let eval = match l {
                Layer::Dense(_) => String::from("-"),
                Layer::TriDrop(t) => match t.eval_width {
                    Some(k) => format!("{k}"),
                    None => String::from("full"),
                },
            };
            let p = l.params();
            let _ = writeln!(
                s,
                "{:>3}  {:<8} {:>7} {:>7}  {:<9} {:>12}  {}",
                i,
                l.kind().name(),
                p.in_dim(),
                p.out_dim(),
                l.activation().name(),
                p.param_count(),
                eval
            );
        }
        let _ = writeln!(s, "total params: {}", self.param_count());
        s
    }
}
