use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::numerics::RandomSource;

/// Elementwise (or, for softmax, vector-wise) output nonlinearity.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Activation {
    Identity,
    Relu,
    Sigmoid,
    Tanh,
    Softmax,
}

impl Activation {
    pub const ALL: [Activation; 5] = [
        Activation::Identity,
        Activation::Relu,
        Activation::Sigmoid,
        Activation::Tanh,
        Activation::Softmax,
    ];

    /// Tag stored in model files.
    pub fn tag(self) -> u32 {
        match self {
            Activation::Identity => 0,
            Activation::Relu => 1,
            Activation::Sigmoid => 2,
            Activation::Tanh => 3,
            Activation::Softmax => 4,
        }
    }

    pub fn from_tag(tag: u32) -> Option<Activation> {
        Activation::ALL.into_iter().find(|a| a.tag() == tag)
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Identity => "identity",
            Activation::Relu => "relu",
            Activation::Sigmoid => "sigmoid",
            Activation::Tanh => "tanh",
            Activation::Softmax => "softmax",
        }
    }

    fn apply(self, z: &mut [f64]) {
        match self {
            Activation::Identity => {}
            Activation::Relu => z.iter_mut().for_each(|v| *v = v.max(0.0)),
            Activation::Sigmoid => z.iter_mut().for_each(|v| *v = sigmoid(*v)),
            Activation::Tanh => z.iter_mut().for_each(|v| *v = v.tanh()),
            Activation::Softmax => softmax_in_place(z),
        }
    }

    /// Turns `g` from a gradient w.r.t. the output `y` into one w.r.t. the
    /// pre-activation.
    fn backprop(self, y: &[f64], g: &mut [f64]) {
        match self {
            Activation::Identity => {}
            Activation::Relu => {
                for (gi, &yi) in g.iter_mut().zip(y) {
                    if yi <= 0.0 {
                        *gi = 0.0;
                    }
                }
            }
            Activation::Sigmoid => {
                for (gi, &yi) in g.iter_mut().zip(y) {
                    *gi *= yi * (1.0 - yi);
                }
            }
            Activation::Tanh => {
                for (gi, &yi) in g.iter_mut().zip(y) {
                    *gi *= 1.0 - yi * yi;
                }
            }
            Activation::Softmax => {
                let dot: f64 = g.iter().zip(y).map(|(a, b)| a * b).sum();
                for (gi, &yi) in g.iter_mut().zip(y) {
                    *gi = yi * (*gi - dot);
                }
            }
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Activation::ALL
            .into_iter()
            .find(|a| a.name() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| Error::config(format!("unknown activation {s:?}")))
    }
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn softmax_in_place(z: &mut [f64]) {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in z.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    z.iter_mut().for_each(|v| *v /= sum);
}

/// Affine map `y = act(W x + b)` with `W` stored row-major as `rows x cols`
/// (output by input), plus gradient accumulators of the same shape.
#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    rows: usize,
    cols: usize,
    activation: Activation,
    weights: Vec<f64>,
    bias: Vec<f64>,
    grad_weights: Vec<f64>,
    grad_bias: Vec<f64>,
}

impl Layer {
    pub fn zeros(rows: usize, cols: usize, activation: Activation) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::config(format!("layer shape {rows}x{cols} has a zero dimension")));
        }
        Ok(Self {
            rows,
            cols,
            activation,
            weights: vec![0.0; rows * cols],
            bias: vec![0.0; rows],
            grad_weights: vec![0.0; rows * cols],
            grad_bias: vec![0.0; rows],
        })
    }

    /// Glorot-uniform weights, zero bias.
    pub fn random(rows: usize, cols: usize, activation: Activation, rng: &mut RandomSource) -> Result<Self> {
        let mut layer = Self::zeros(rows, cols, activation)?;
        let s = (6.0 / (rows + cols) as f64).sqrt();
        for w in &mut layer.weights {
            *w = s * (2.0 * rng.unit() - 1.0);
        }
        Ok(layer)
    }

    pub fn from_parts(
        rows: usize,
        cols: usize,
        activation: Activation,
        weights: Vec<f64>,
        bias: Vec<f64>,
    ) -> Result<Self> {
        if weights.len() != rows * cols {
            return Err(Error::Shape {
                expected: rows * cols,
                actual: weights.len(),
            });
        }
        if bias.len() != rows {
            return Err(Error::Shape {
                expected: rows,
                actual: bias.len(),
            });
        }
        let mut layer = Self::zeros(rows, cols, activation)?;
        layer.weights = weights;
        layer.bias = bias;
        Ok(layer)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn bias_mut(&mut self) -> &mut [f64] {
        &mut self.bias
    }

    pub fn grad_weights(&self) -> &[f64] {
        &self.grad_weights
    }

    pub fn grad_bias(&self) -> &[f64] {
        &self.grad_bias
    }

    pub(crate) fn params_and_grads_mut(&mut self) -> [(&mut [f64], &[f64]); 2] {
        [
            (&mut self.weights[..], &self.grad_weights[..]),
            (&mut self.bias[..], &self.grad_bias[..]),
        ]
    }

    fn forward(&self, x: &[f64]) -> Vec<f64> {
        let mut y = self.bias.clone();
        for (r, yr) in y.iter_mut().enumerate() {
            let row = &self.weights[r * self.cols..(r + 1) * self.cols];
            *yr += row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
        }
        self.activation.apply(&mut y);
        y
    }

    /// Accumulates parameter gradients and returns the gradient w.r.t. `x`.
    fn backward(&mut self, x: &[f64], y: &[f64], grad_y: &[f64]) -> Vec<f64> {
        let mut gz = grad_y.to_vec();
        self.activation.backprop(y, &mut gz);
        let mut gx = vec![0.0; self.cols];
        for (r, &g) in gz.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            self.grad_bias[r] += g;
            let row = &self.weights[r * self.cols..(r + 1) * self.cols];
            let grow = &mut self.grad_weights[r * self.cols..(r + 1) * self.cols];
            for c in 0..self.cols {
                grow[c] += g * x[c];
                gx[c] += row[c] * g;
            }
        }
        gx
    }
}

/// Layer inputs and outputs recorded by [`DenseModel::forward_cached`].
/// `values[0]` is the network input and `values[k + 1]` the output of
/// layer `k`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ForwardCache {
    values: Vec<Vec<f64>>,
}

impl ForwardCache {
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn input(&self) -> &[f64] {
        self.values.first().map_or(&[], Vec::as_slice)
    }

    pub fn output(&self) -> &[f64] {
        self.values.last().map_or(&[], Vec::as_slice)
    }
}

/// A chain of dense layers.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseModel {
    layers: Vec<Layer>,
}

impl DenseModel {
    pub fn from_layers(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::config("a model needs at least one layer"));
        }
        for pair in layers.windows(2) {
            if pair[0].rows != pair[1].cols {
                return Err(Error::config(format!(
                    "layer outputs {} values but the next layer expects {}",
                    pair[0].rows, pair[1].cols
                )));
            }
        }
        Ok(Self { layers })
    }

    /// Randomly initialised stack through `dims` (input first); hidden
    /// layers use `hidden`, the last one `output`.
    pub fn random(dims: &[usize], hidden: Activation, output: Activation, rng: &mut RandomSource) -> Result<Self> {
        if dims.len() < 2 {
            return Err(Error::config("a model needs an input and an output dimension"));
        }
        let n = dims.len() - 1;
        let layers = (0..n)
            .map(|k| {
                let act = if k + 1 == n { output } else { hidden };
                Layer::random(dims[k + 1], dims[k], act, rng)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_layers(layers)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].cols
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].rows
    }

    pub fn output_activation(&self) -> Activation {
        self.layers[self.layers.len() - 1].activation
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::Shape {
                expected: self.input_dim(),
                actual: x.len(),
            });
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let mut v = x.to_vec();
        for layer in &self.layers {
            v = layer.forward(&v);
        }
        Ok(v)
    }

    pub fn forward_cached(&self, x: &[f64]) -> Result<ForwardCache> {
        self.check_input(x)?;
        let mut values = Vec::with_capacity(self.layers.len() + 1);
        values.push(x.to_vec());
        for layer in &self.layers {
            let next = layer.forward(values.last().expect("nonempty"));
            values.push(next);
        }
        Ok(ForwardCache { values })
    }

    /// Backpropagates `grad_out` through the cached pass, adding into the
    /// gradient buffers, and returns the gradient w.r.t. the input.
    pub fn backward(&mut self, cache: &ForwardCache, grad_out: &[f64]) -> Result<Vec<f64>> {
        if cache.values.len() != self.layers.len() + 1
            || cache.values.iter().zip(self.dims()).any(|(v, d)| v.len() != d)
        {
            return Err(Error::State("no forward pass of this model is cached".into()));
        }
        if grad_out.len() != self.output_dim() {
            return Err(Error::Shape {
                expected: self.output_dim(),
                actual: grad_out.len(),
            });
        }
        let mut g = grad_out.to_vec();
        for (k, layer) in self.layers.iter_mut().enumerate().rev() {
            g = layer.backward(&cache.values[k], &cache.values[k + 1], &g);
        }
        Ok(g)
    }

    /// Layer widths, input first.
    pub fn dims(&self) -> Vec<usize> {
        std::iter::once(self.input_dim())
            .chain(self.layers.iter().map(|l| l.rows))
            .collect()
    }

    pub fn zero_grad(&mut self) {
        for layer in &mut self.layers {
            layer.grad_weights.iter_mut().for_each(|g| *g = 0.0);
            layer.grad_bias.iter_mut().for_each(|g| *g = 0.0);
        }
    }

    pub(crate) fn scale_grad(&mut self, s: f64) {
        for layer in &mut self.layers {
            layer.grad_weights.iter_mut().for_each(|g| *g *= s);
            layer.grad_bias.iter_mut().for_each(|g| *g *= s);
        }
    }
}
