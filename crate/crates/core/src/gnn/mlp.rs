use rand_distr::{Distribution, Uniform};

use super::params::Grads;
use super::GnnError;
use crate::rng;
use crate::scalar::Scalar;

/// Fully connected layer, row-major `out x in` weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense<T> {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weights: Vec<T>,
    pub bias: Vec<T>,
}

/// Feed-forward network with rectified hidden layers and a single linear
/// output unit.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp<T> {
    pub layers: Vec<Dense<T>>,
}

/// Activations of one forward pass.
#[derive(Debug, Clone)]
pub struct MlpTape {
    /// Input followed by the post-activation output of each layer.
    acts: Vec<Vec<f64>>,
    pre: Vec<Vec<f64>>,
}

impl MlpTape {
    pub fn output(&self) -> f64 {
        self.acts.last().expect("tape has an output")[0]
    }

    /// Smallest `|pre-activation|` over the rectified hidden units.
    pub fn relu_margin(&self) -> f64 {
        let hidden = &self.pre[..self.pre.len().saturating_sub(1)];
        hidden.iter().flatten().fold(f64::INFINITY, |m, z| m.min(z.abs()))
    }
}

impl<T: Scalar> Mlp<T> {
    /// Glorot-uniform initialisation; `hidden` lists hidden widths.
    pub fn init(input_dim: usize, hidden: &[usize], seed: u64) -> Self {
        let mut r = rng::rng(seed);
        let mut dims = vec![input_dim];
        dims.extend_from_slice(hidden);
        dims.push(1);
        let layers = dims
            .windows(2)
            .map(|w| {
                let (i, o) = (w[0], w[1]);
                let limit = (6.0 / (i + o) as f64).sqrt();
                let u = Uniform::new_inclusive(-limit, limit);
                Dense {
                    in_dim: i,
                    out_dim: o,
                    weights: (0..i * o).map(|_| T::of(u.sample(&mut r))).collect(),
                    bias: vec![T::zero(); o],
                }
            })
            .collect();
        Self { layers }
    }

    pub fn zeros(input_dim: usize, hidden: &[usize]) -> Self {
        let mut m = Self::init(input_dim, hidden, 0);
        for t in m.tensors_mut() {
            t.fill(T::zero());
        }
        m
    }

    pub fn input_dim(&self) -> usize {
        self.layers.first().map_or(0, |l| l.in_dim)
    }

    pub fn hidden_dims(&self) -> Vec<usize> {
        self.layers[..self.layers.len().saturating_sub(1)]
            .iter()
            .map(|l| l.out_dim)
            .collect()
    }

    pub fn validate(&self) -> Result<(), GnnError> {
        let Some(last) = self.layers.last() else {
            return Err(GnnError::ShapeMismatch("network has no layers".into()));
        };
        if last.out_dim != 1 {
            return Err(GnnError::ShapeMismatch("network output must be scalar".into()));
        }
        for (i, l) in self.layers.iter().enumerate() {
            if l.weights.len() != l.in_dim * l.out_dim || l.bias.len() != l.out_dim {
                return Err(GnnError::ShapeMismatch(format!("dense layer {i} has bad lengths")));
            }
            if i > 0 && self.layers[i - 1].out_dim != l.in_dim {
                return Err(GnnError::ShapeMismatch(format!("dense layer {i} does not chain")));
            }
        }
        if !self.tensors().iter().all(|t| t.iter().all(|x| x.is_finite())) {
            return Err(GnnError::NonFinite("network parameters".into()));
        }
        Ok(())
    }

    pub fn cast<U: Scalar>(&self) -> Mlp<U> {
        Mlp {
            layers: self
                .layers
                .iter()
                .map(|l| Dense {
                    in_dim: l.in_dim,
                    out_dim: l.out_dim,
                    weights: l.weights.iter().map(|x| U::of(x.as_f64())).collect(),
                    bias: l.bias.iter().map(|x| U::of(x.as_f64())).collect(),
                })
                .collect(),
        }
    }

    /// Parameter tensors: per layer weights then bias.
    pub fn tensors(&self) -> Vec<&[T]> {
        self.layers
            .iter()
            .flat_map(|l| [l.weights.as_slice(), l.bias.as_slice()])
            .collect()
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [T]> {
        self.layers
            .iter_mut()
            .flat_map(|l| [l.weights.as_mut_slice(), l.bias.as_mut_slice()])
            .collect()
    }
}

impl Mlp<f64> {
    pub fn forward(&self, input: &[f64]) -> Result<MlpTape, GnnError> {
        if input.len() != self.input_dim() {
            return Err(GnnError::ShapeMismatch(format!(
                "network expects {} inputs, got {}",
                self.input_dim(),
                input.len()
            )));
        }
        let mut acts = vec![input.to_vec()];
        let mut pre = Vec::with_capacity(self.layers.len());
        let last = self.layers.len() - 1;
        for (li, l) in self.layers.iter().enumerate() {
            let x = &acts[li];
            let mut z = vec![0.0; l.out_dim];
            for (r, zr) in z.iter_mut().enumerate() {
                let row = &l.weights[r * l.in_dim..(r + 1) * l.in_dim];
                *zr = l.bias[r] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
            }
            let a = if li == last {
                z.clone()
            } else {
                z.iter().map(|v| v.max(0.0)).collect()
            };
            pre.push(z);
            acts.push(a);
        }
        Ok(MlpTape { acts, pre })
    }

    pub fn score(&self, input: &[f64]) -> Result<f64, GnnError> {
        Ok(self.forward(input)?.output())
    }

    /// Accumulates `d_out * d(output)/d(params)` into `grads` and returns the
    /// gradient with respect to the input.
    pub fn backward(&self, tape: &MlpTape, d_out: f64, grads: &mut Grads) -> Vec<f64> {
        let last = self.layers.len() - 1;
        let mut delta = vec![d_out];
        for li in (0..self.layers.len()).rev() {
            let l = &self.layers[li];
            if li != last {
                for (d, z) in delta.iter_mut().zip(&tape.pre[li]) {
                    if *z <= 0.0 {
                        *d = 0.0;
                    }
                }
            }
            let x = &tape.acts[li];
            let mut dx = vec![0.0; l.in_dim];
            let (gw, gb) = grads.0[2 * li..2 * li + 2].split_at_mut(1);
            for (r, &g) in delta.iter().enumerate() {
                if g == 0.0 {
                    continue;
                }
                gb[0][r] += g;
                let row = &l.weights[r * l.in_dim..(r + 1) * l.in_dim];
                let grow = &mut gw[0][r * l.in_dim..(r + 1) * l.in_dim];
                for j in 0..l.in_dim {
                    grow[j] += g * x[j];
                    dx[j] += g * row[j];
                }
            }
            delta = dx;
        }
        delta
    }
}
