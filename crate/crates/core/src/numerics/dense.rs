use ndarray::{Array1, Array2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Identity => x,
        }
    }

    fn derivative(self, pre: f64) -> f64 {
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

/// Fully connected layer computing `activation(x · Wᵀ + b)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    /// `[out_dim × in_dim]`
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
    pub activation: Activation,
}

/// Values saved by [`dense_forward`] for the matching backward pass.
#[derive(Debug, Clone)]
pub struct DenseCache {
    pub input: Array2<f64>,
    pub preactivation: Array2<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseGrads {
    pub input: Array2<f64>,
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl DenseLayer {
    /// Random layer: He-uniform for ReLU, Xavier-uniform for Identity, zero bias.
    pub fn init<R: Rng + ?Sized>(in_dim: usize, out_dim: usize, activation: Activation, rng: &mut R) -> Self {
        let limit = match activation {
            Activation::Relu => (6.0 / in_dim as f64).sqrt(),
            Activation::Identity => (6.0 / (in_dim + out_dim) as f64).sqrt(),
        };
        let weights = Array2::from_shape_fn((out_dim, in_dim), |_| rng.random_range(-limit..limit));
        Self {
            weights,
            bias: Array1::zeros(out_dim),
            activation,
        }
    }

    pub fn zeros(in_dim: usize, out_dim: usize, activation: Activation) -> Self {
        Self {
            weights: Array2::zeros((out_dim, in_dim)),
            bias: Array1::zeros(out_dim),
            activation,
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weights.ncols()
    }

    pub fn out_dim(&self) -> usize {
        self.weights.nrows()
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    /// Weight and bias buffers, in that order.
    pub fn params_mut(&mut self) -> [&mut [f64]; 2] {
        [
            self.weights.as_slice_mut().expect("standard layout"),
            self.bias.as_slice_mut().expect("standard layout"),
        ]
    }

    pub fn params(&self) -> [&[f64]; 2] {
        [
            self.weights.as_slice().expect("standard layout"),
            self.bias.as_slice().expect("standard layout"),
        ]
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().chain(self.bias.iter()).all(|v| v.is_finite())
    }
}

pub fn dense_forward(input: &Array2<f64>, layer: &DenseLayer) -> Result<(Array2<f64>, DenseCache)> {
    if input.ncols() != layer.in_dim() {
        return Err(Error::Dimension(format!(
            "dense layer expects {} inputs, got {}",
            layer.in_dim(),
            input.ncols()
        )));
    }
    if layer.bias.len() != layer.out_dim() {
        return Err(Error::Dimension(format!(
            "bias length {} does not match {} outputs",
            layer.bias.len(),
            layer.out_dim()
        )));
    }
    let pre = input.dot(&layer.weights.t()) + &layer.bias;
    let out = pre.mapv(|v| layer.activation.apply(v));
    Ok((
        out,
        DenseCache {
            input: input.clone(),
            preactivation: pre,
        },
    ))
}

pub fn dense_backward(grad_output: &Array2<f64>, cache: &DenseCache, layer: &DenseLayer) -> Result<DenseGrads> {
    if grad_output.dim() != cache.preactivation.dim()
        || cache.input.ncols() != layer.in_dim()
        || cache.preactivation.ncols() != layer.out_dim()
    {
        return Err(Error::Dimension(format!(
            "stale cache: grad {:?}, cached pre-activation {:?}, layer {}→{}",
            grad_output.dim(),
            cache.preactivation.dim(),
            layer.in_dim(),
            layer.out_dim()
        )));
    }
    let mut delta = grad_output.clone();
    if layer.activation != Activation::Identity {
        delta.zip_mut_with(&cache.preactivation, |g, &p| *g *= layer.activation.derivative(p));
    }
    Ok(DenseGrads {
        input: delta.dot(&layer.weights),
        weights: delta.t().dot(&cache.input),
        bias: delta.sum_axis(Axis(0)),
    })
}

/// An ordered stack of dense layers applied one after another.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerStack {
    pub layers: Vec<DenseLayer>,
}

impl LayerStack {
    pub fn new(layers: Vec<DenseLayer>) -> Self {
        Self { layers }
    }

    /// Builds a stack for consecutive `widths`, one activation per layer.
    pub fn init<R: Rng + ?Sized>(widths: &[usize], activations: &[Activation], rng: &mut R) -> Self {
        assert_eq!(widths.len(), activations.len() + 1, "one activation per layer");
        let layers = widths
            .windows(2)
            .zip(activations)
            .map(|(w, &act)| DenseLayer::init(w[0], w[1], act, rng))
            .collect();
        Self { layers }
    }

    pub fn forward(&self, input: &Array2<f64>) -> Result<(Array2<f64>, Vec<DenseCache>)> {
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut x = input.clone();
        for layer in &self.layers {
            let (out, cache) = dense_forward(&x, layer)?;
            caches.push(cache);
            x = out;
        }
        Ok((x, caches))
    }

    /// Forward pass without keeping caches.
    pub fn infer(&self, input: &Array2<f64>) -> Result<Array2<f64>> {
        let mut x = input.clone();
        for layer in &self.layers {
            x = dense_forward(&x, layer)?.0;
        }
        Ok(x)
    }

    /// Returns the gradient w.r.t. the stack input and per-layer grads.
    pub fn backward(&self, grad_output: &Array2<f64>, caches: &[DenseCache]) -> Result<(Array2<f64>, Vec<DenseGrads>)> {
        if caches.len() != self.layers.len() {
            return Err(Error::Dimension(format!(
                "{} caches for {} layers",
                caches.len(),
                self.layers.len()
            )));
        }
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut g = grad_output.clone();
        for (layer, cache) in self.layers.iter().zip(caches).rev() {
            let lg = dense_backward(&g, cache, layer)?;
            g = lg.input.clone();
            grads.push(lg);
        }
        grads.reverse();
        Ok((g, grads))
    }

    pub fn params_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers.iter_mut().flat_map(|l| l.params_mut()).collect()
    }

    pub fn params(&self) -> Vec<&[f64]> {
        self.layers.iter().flat_map(|l| l.params()).collect()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(DenseLayer::param_count).sum()
    }

    pub fn widths(&self) -> Vec<usize> {
        let mut w: Vec<usize> = self.layers.first().map(|l| vec![l.in_dim()]).unwrap_or_default();
        w.extend(self.layers.iter().map(DenseLayer::out_dim));
        w
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(DenseLayer::is_finite)
    }

    /// Copies every parameter into one flat vector (weights then bias per layer).
    pub fn flatten(&self) -> Vec<f64> {
        self.params().into_iter().flatten().copied().collect()
    }

    pub fn load_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(Error::Dimension(format!(
                "expected {} parameters, got {}",
                self.param_count(),
                flat.len()
            )));
        }
        let mut offset = 0;
        for buf in self.params_mut() {
            buf.copy_from_slice(&flat[offset..offset + buf.len()]);
            offset += buf.len();
        }
        Ok(())
    }
}

/// Flattens per-layer gradients in the same order as [`LayerStack::params_mut`].
pub fn flatten_grads(grads: &[DenseGrads]) -> Vec<Vec<f64>> {
    grads
        .iter()
        .flat_map(|g| [g.weights.iter().copied().collect(), g.bias.to_vec()])
        .collect()
}
