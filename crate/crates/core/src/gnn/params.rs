use rand_distr::{Distribution, Uniform};

use super::GnnError;
use crate::graph::NodeType;
use crate::rng;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AggregationMode {
    Mean,
    Attention,
}

impl AggregationMode {
    pub fn name(self) -> &'static str {
        match self {
            AggregationMode::Mean => "mean",
            AggregationMode::Attention => "attention",
        }
    }
}

impl std::str::FromStr for AggregationMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mean" => Ok(AggregationMode::Mean),
            "attention" => Ok(AggregationMode::Attention),
            other => Err(format!("unknown aggregation mode `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Identity => x,
        }
    }

    /// Derivative given the pre-activation.
    #[inline]
    pub fn grad(self, pre: f64) -> f64 {
        match self {
            Activation::Relu => {
                if pre > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }
}

/// Slope of the leaky rectifier applied to attention scores.
pub const ATTENTION_LEAK: f64 = 0.2;

/// One aggregation layer.
///
/// `transform`/`bias` implement the neighbor transformation
/// `f(x) = act(W x + b)`; `self_weights` carry the node's own previous
/// representation; `attention` is the scoring vector `a` over
/// `[f(center) || f(neighbor)]`, only read in attention mode.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderLayer<T> {
    pub in_dim: usize,
    pub out_dim: usize,
    /// Row-major `out_dim x in_dim`.
    pub transform: Vec<T>,
    pub bias: Vec<T>,
    /// Row-major `out_dim x in_dim`.
    pub self_weights: Vec<T>,
    /// Length `2 * out_dim`.
    pub attention: Vec<T>,
    pub activation: Activation,
}

impl<T: Scalar> EncoderLayer<T> {
    pub fn zeros(in_dim: usize, out_dim: usize, activation: Activation) -> Self {
        Self {
            in_dim,
            out_dim,
            transform: vec![T::zero(); out_dim * in_dim],
            bias: vec![T::zero(); out_dim],
            self_weights: vec![T::zero(); out_dim * in_dim],
            attention: vec![T::zero(); 2 * out_dim],
            activation,
        }
    }

    pub fn cast<U: Scalar>(&self) -> EncoderLayer<U> {
        let c = |v: &[T]| v.iter().map(|x| U::of(x.as_f64())).collect();
        EncoderLayer {
            in_dim: self.in_dim,
            out_dim: self.out_dim,
            transform: c(&self.transform),
            bias: c(&self.bias),
            self_weights: c(&self.self_weights),
            attention: c(&self.attention),
            activation: self.activation,
        }
    }

    fn check(&self) -> Result<(), GnnError> {
        let ok = self.transform.len() == self.out_dim * self.in_dim
            && self.bias.len() == self.out_dim
            && self.self_weights.len() == self.out_dim * self.in_dim
            && self.attention.len() == 2 * self.out_dim;
        if !ok {
            return Err(GnnError::ShapeMismatch(format!(
                "layer {}x{} has inconsistent parameter lengths",
                self.out_dim, self.in_dim
            )));
        }
        Ok(())
    }
}

/// Shape of an encoder.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderConfig {
    /// Raw feature width; narrower feature vectors are zero padded.
    pub feature_dim: usize,
    /// Output width of each layer; the last entry is the embedding size.
    pub layer_dims: Vec<usize>,
    pub mode: AggregationMode,
    /// Append a one-hot of the node type to every input vector.
    pub type_encoding: bool,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self {
            feature_dim: 16,
            layer_dims: vec![32, 32],
            mode: AggregationMode::Mean,
            type_encoding: true,
        }
    }
}

impl EncoderConfig {
    pub fn input_dim(&self) -> usize {
        self.feature_dim + if self.type_encoding { NodeType::COUNT } else { 0 }
    }
}

/// Learnable encoder parameters, generic over the storage scalar.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams<T> {
    pub mode: AggregationMode,
    pub feature_dim: usize,
    pub type_encoding: bool,
    pub layers: Vec<EncoderLayer<T>>,
}

impl<T: Scalar> EncoderParams<T> {
    /// Glorot-uniform weights, zero biases, small random attention vectors.
    /// Hidden layers use a rectifier, the output layer is linear.
    pub fn init(config: &EncoderConfig, seed: u64) -> Self {
        let mut r = rng::rng(seed);
        let mut layers = Vec::with_capacity(config.layer_dims.len());
        let mut in_dim = config.input_dim();
        for (i, &out_dim) in config.layer_dims.iter().enumerate() {
            let activation = if i + 1 == config.layer_dims.len() {
                Activation::Identity
            } else {
                Activation::Relu
            };
            let mut layer = EncoderLayer::zeros(in_dim, out_dim, activation);
            let limit = (6.0 / (in_dim + out_dim) as f64).sqrt();
            let u = Uniform::new_inclusive(-limit, limit);
            for w in layer.transform.iter_mut().chain(layer.self_weights.iter_mut()) {
                *w = T::of(u.sample(&mut r));
            }
            let ua = Uniform::new_inclusive(-0.1, 0.1);
            for a in layer.attention.iter_mut() {
                *a = T::of(ua.sample(&mut r));
            }
            layers.push(layer);
            in_dim = out_dim;
        }
        Self {
            mode: config.mode,
            feature_dim: config.feature_dim,
            type_encoding: config.type_encoding,
            layers,
        }
    }

    pub fn config(&self) -> EncoderConfig {
        EncoderConfig {
            feature_dim: self.feature_dim,
            layer_dims: self.layers.iter().map(|l| l.out_dim).collect(),
            mode: self.mode,
            type_encoding: self.type_encoding,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.config().input_dim()
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.out_dim)
    }

    pub fn cast<U: Scalar>(&self) -> EncoderParams<U> {
        EncoderParams {
            mode: self.mode,
            feature_dim: self.feature_dim,
            type_encoding: self.type_encoding,
            layers: self.layers.iter().map(EncoderLayer::cast).collect(),
        }
    }

    pub fn validate(&self) -> Result<(), GnnError> {
        if self.layers.is_empty() {
            return Err(GnnError::ShapeMismatch("encoder has no layers".into()));
        }
        let mut in_dim = self.input_dim();
        for (i, l) in self.layers.iter().enumerate() {
            l.check()?;
            if l.in_dim != in_dim {
                return Err(GnnError::ShapeMismatch(format!(
                    "layer {} expects input {}, previous layer produces {in_dim}",
                    i + 1,
                    l.in_dim
                )));
            }
            in_dim = l.out_dim;
        }
        if !self.tensors().iter().all(|t| t.iter().all(|x| x.is_finite())) {
            return Err(GnnError::NonFinite("encoder parameters".into()));
        }
        Ok(())
    }

    /// Parameter tensors in a fixed order: per layer W, b, U, a.
    pub fn tensors(&self) -> Vec<&[T]> {
        self.layers
            .iter()
            .flat_map(|l| {
                [
                    l.transform.as_slice(),
                    l.bias.as_slice(),
                    l.self_weights.as_slice(),
                    l.attention.as_slice(),
                ]
            })
            .collect()
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [T]> {
        self.layers
            .iter_mut()
            .flat_map(|l| {
                [
                    l.transform.as_mut_slice(),
                    l.bias.as_mut_slice(),
                    l.self_weights.as_mut_slice(),
                    l.attention.as_mut_slice(),
                ]
            })
            .collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }
}

/// Gradient buffers aligned with a parameter set's `tensors()` order.
#[derive(Debug, Clone, PartialEq)]
pub struct Grads(pub Vec<Vec<f64>>);

impl Grads {
    pub fn zeros_like<T>(tensors: &[&[T]]) -> Self {
        Grads(tensors.iter().map(|t| vec![0.0; t.len()]).collect())
    }

    pub fn add_assign(&mut self, other: &Grads) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, s: f64) {
        for t in &mut self.0 {
            for x in t {
                *x *= s;
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|t| t.iter().all(|x| *x == 0.0))
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|t| t.iter().all(|x| x.is_finite()))
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.0.iter().flatten().copied().collect()
    }
}
