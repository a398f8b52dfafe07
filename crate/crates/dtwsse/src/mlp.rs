//! Minimal dense feed-forward networks with reverse-mode gradients and Adam.
//!
//! Everything is f64 and batch-first: activations are `(batch, width)`
//! matrices, weights are `(fan_out, fan_in)`. The backward pass consumes the
//! tape recorded by the forward pass and returns raw parameter gradients;
//! loss-specific scaling (like a 1/batch factor) is the caller's job, which
//! lets the siamese trainer accumulate gradients from both branches into one
//! set before stepping.

use ndarray::{Array1, Array2, ArrayView1, Axis};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Elementwise nonlinearity of a layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Linear,
}

impl Activation {
    fn apply(&self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Linear => z,
        }
    }

    /// Derivative at pre-activation `z`; the relu subgradient at 0 is 0.
    fn slope(&self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Linear => 1.0,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Linear => "linear",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "relu" => Ok(Activation::Relu),
            "linear" => Ok(Activation::Linear),
            other => Err(Error::InvalidModel {
                reason: format!("unknown activation {other:?}"),
            }),
        }
    }
}

/// One affine-plus-activation layer: `act(W x + b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    /// `(fan_out, fan_in)`.
    pub weights: Array2<f64>,
    /// `(fan_out,)`.
    pub biases: Array1<f64>,
    pub activation: Activation,
}

impl DenseLayer {
    pub fn new(weights: Array2<f64>, biases: Array1<f64>, activation: Activation) -> Result<Self> {
        if weights.nrows() != biases.len() {
            return Err(Error::DimensionMismatch {
                what: "bias vector",
                expected: weights.nrows(),
                found: biases.len(),
            });
        }
        let layer = Self {
            weights,
            biases,
            activation,
        };
        layer.check_finite()?;
        Ok(layer)
    }

    /// Glorot-uniform weights in `±sqrt(6 / (fan_in + fan_out))`, zero biases.
    pub fn glorot(fan_in: usize, fan_out: usize, activation: Activation, rng: &mut ChaCha8Rng) -> Self {
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let weights =
            Array2::from_shape_fn((fan_out, fan_in), |_| rng.random_range(-limit..limit));
        Self {
            weights,
            biases: Array1::zeros(fan_out),
            activation,
        }
    }

    /// Square identity layer; a test hook for pass-through networks.
    pub fn identity(dim: usize, activation: Activation) -> Self {
        Self {
            weights: Array2::eye(dim),
            biases: Array1::zeros(dim),
            activation,
        }
    }

    pub fn fan_in(&self) -> usize {
        self.weights.ncols()
    }

    pub fn fan_out(&self) -> usize {
        self.weights.nrows()
    }

    fn check_finite(&self) -> Result<()> {
        let ok = self.weights.iter().all(|w| w.is_finite())
            && self.biases.iter().all(|b| b.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidModel {
                reason: "layer parameters contain non-finite values".into(),
            })
        }
    }
}

/// A stack of dense layers with consistent adjacent dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layers: Vec<DenseLayer>,
}

/// Per-layer values recorded by a forward pass, consumed by `backward`.
#[derive(Debug, Clone)]
pub struct Tape {
    /// Input to each layer, `(batch, fan_in)`.
    inputs: Vec<Array2<f64>>,
    /// Pre-activation of each layer, `(batch, fan_out)`.
    preacts: Vec<Array2<f64>>,
}

/// Gradients (or Adam moments) with the same shapes as an [`Mlp`]'s
/// parameters.
#[derive(Debug, Clone)]
pub struct GradientSet {
    pub layers: Vec<LayerGradients>,
}

#[derive(Debug, Clone)]
pub struct LayerGradients {
    pub weights: Array2<f64>,
    pub biases: Array1<f64>,
}

impl GradientSet {
    pub fn zeros_like(net: &Mlp) -> Self {
        Self {
            layers: net
                .layers
                .iter()
                .map(|l| LayerGradients {
                    weights: Array2::zeros(l.weights.raw_dim()),
                    biases: Array1::zeros(l.biases.raw_dim()),
                })
                .collect(),
        }
    }

    /// Accumulates `other` elementwise; shapes must match.
    pub fn add_assign(&mut self, other: &GradientSet) {
        assert_eq!(self.layers.len(), other.layers.len());
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.weights += &b.weights;
            a.biases += &b.biases;
        }
    }

    /// Flat coordinate read; same ordering as [`Mlp::get_param`].
    pub fn get(&self, index: usize) -> f64 {
        let mut rest = index;
        for layer in &self.layers {
            let w = layer.weights.len();
            if rest < w {
                return layer.weights.as_slice().expect("row-major")[rest];
            }
            rest -= w;
            let b = layer.biases.len();
            if rest < b {
                return layer.biases[rest];
            }
            rest -= b;
        }
        panic!("parameter index {index} out of range");
    }
}

impl Mlp {
    /// Builds a Glorot-initialized network. `sizes` lists layer widths from
    /// input to output; `activations` has one entry per weight layer.
    pub fn glorot(sizes: &[usize], activations: &[Activation], rng: &mut ChaCha8Rng) -> Result<Self> {
        if sizes.len() < 2 || activations.len() != sizes.len() - 1 {
            return Err(Error::InvalidConfig {
                reason: format!(
                    "network needs n+1 sizes for n activations, got {} sizes and {} activations",
                    sizes.len(),
                    activations.len()
                ),
            });
        }
        if sizes.contains(&0) {
            return Err(Error::InvalidConfig {
                reason: "layer widths must be at least 1".into(),
            });
        }
        let layers = sizes
            .windows(2)
            .zip(activations)
            .map(|(w, &act)| DenseLayer::glorot(w[0], w[1], act, rng))
            .collect();
        Ok(Self { layers })
    }

    /// Wraps pre-built layers, checking dimension consistency and finiteness.
    pub fn from_layers(layers: Vec<DenseLayer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::EmptyInput);
        }
        for pair in layers.windows(2) {
            if pair[0].fan_out() != pair[1].fan_in() {
                return Err(Error::DimensionMismatch {
                    what: "layer input",
                    expected: pair[0].fan_out(),
                    found: pair[1].fan_in(),
                });
            }
        }
        for layer in &layers {
            layer.check_finite()?;
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].fan_in()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].fan_out()
    }

    /// Runs a batch `(batch, input_dim)` forward, returning the output batch
    /// and the tape needed for [`Mlp::backward`].
    pub fn forward_batch(&self, x: &Array2<f64>) -> Result<(Array2<f64>, Tape)> {
        if x.nrows() == 0 {
            return Err(Error::EmptyInput);
        }
        if x.ncols() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                what: "network input",
                expected: self.input_dim(),
                found: x.ncols(),
            });
        }
        let mut tape = Tape {
            inputs: Vec::with_capacity(self.layers.len()),
            preacts: Vec::with_capacity(self.layers.len()),
        };
        let mut act = x.clone();
        for layer in &self.layers {
            let mut z = act.dot(&layer.weights.t());
            z += &layer.biases;
            tape.inputs.push(act);
            act = z.mapv(|v| layer.activation.apply(v));
            tape.preacts.push(z);
        }
        Ok((act, tape))
    }

    /// Single-sample forward pass without tape bookkeeping.
    pub fn forward(&self, x: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
        let batch = x.insert_axis(Axis(0)).to_owned();
        let (out, _) = self.forward_batch(&batch)?;
        Ok(out.row(0).to_owned())
    }

    /// Backpropagates `output_grad` = dL/d(output), `(batch, output_dim)`,
    /// through the tape. Returns parameter gradients and dL/d(input).
    /// Gradients sum over the batch; any mean scaling belongs to the caller.
    pub fn backward(&self, tape: &Tape, output_grad: &Array2<f64>) -> (GradientSet, Array2<f64>) {
        assert_eq!(tape.inputs.len(), self.layers.len(), "tape/network mismatch");
        let mut grads = GradientSet::zeros_like(self);
        let mut delta = output_grad.clone();
        for (idx, layer) in self.layers.iter().enumerate().rev() {
            let slope = tape.preacts[idx].mapv(|z| layer.activation.slope(z));
            delta *= &slope;
            grads.layers[idx].weights = delta.t().dot(&tape.inputs[idx]);
            grads.layers[idx].biases = delta.sum_axis(Axis(0));
            if idx > 0 {
                delta = delta.dot(&layer.weights);
            } else {
                return (grads, delta.dot(&layer.weights));
            }
        }
        unreachable!("networks always have at least one layer");
    }

    /// Total number of scalar parameters.
    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.biases.len())
            .sum()
    }

    /// Flat coordinate read: layer 0 weights row-major, layer 0 biases,
    /// layer 1 weights, ... Used by finite-difference checks.
    pub fn get_param(&self, index: usize) -> f64 {
        let mut rest = index;
        for layer in &self.layers {
            let w = layer.weights.len();
            if rest < w {
                return layer.weights.as_slice().expect("row-major")[rest];
            }
            rest -= w;
            let b = layer.biases.len();
            if rest < b {
                return layer.biases[rest];
            }
            rest -= b;
        }
        panic!("parameter index {index} out of range");
    }

    /// Flat coordinate write; counterpart of [`Mlp::get_param`]. Finiteness
    /// is not re-checked here, callers perturb with finite values.
    pub fn set_param(&mut self, index: usize, value: f64) {
        let mut rest = index;
        for layer in &mut self.layers {
            let w = layer.weights.len();
            if rest < w {
                layer.weights.as_slice_mut().expect("row-major")[rest] = value;
                return;
            }
            rest -= w;
            let b = layer.biases.len();
            if rest < b {
                layer.biases[rest] = value;
                return;
            }
            rest -= b;
        }
        panic!("parameter index {index} out of range");
    }
}

/// First and second moment estimates plus hyperparameters for Adam.
#[derive(Debug, Clone)]
pub struct AdamState {
    m: GradientSet,
    v: GradientSet,
    step: u64,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    /// Zero moments matching `net`, with the usual defaults
    /// beta1=0.9, beta2=0.999, epsilon=1e-8.
    pub fn new(net: &Mlp, learning_rate: f64) -> Self {
        Self {
            m: GradientSet::zeros_like(net),
            v: GradientSet::zeros_like(net),
            step: 0,
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }
}

/// One Adam update with bias correction, mutating `net` in place.
pub fn adam_step(net: &mut Mlp, grads: &GradientSet, state: &mut AdamState) -> Result<()> {
    if grads.layers.len() != net.layers.len() || state.m.layers.len() != net.layers.len() {
        return Err(Error::DimensionMismatch {
            what: "gradient layer count",
            expected: net.layers.len(),
            found: grads.layers.len(),
        });
    }
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - state.beta1.powi(t);
    let bc2 = 1.0 - state.beta2.powi(t);
    for ((layer, g), (m, v)) in net
        .layers
        .iter_mut()
        .zip(&grads.layers)
        .zip(state.m.layers.iter_mut().zip(state.v.layers.iter_mut()))
    {
        if g.weights.raw_dim() != layer.weights.raw_dim()
            || g.biases.raw_dim() != layer.biases.raw_dim()
        {
            return Err(Error::DimensionMismatch {
                what: "gradient shape",
                expected: layer.weights.len(),
                found: g.weights.len(),
            });
        }
        update(
            layer.weights.as_slice_mut().expect("row-major"),
            g.weights.as_slice().expect("row-major"),
            m.weights.as_slice_mut().expect("row-major"),
            v.weights.as_slice_mut().expect("row-major"),
            state.learning_rate,
            state.beta1,
            state.beta2,
            state.epsilon,
            bc1,
            bc2,
        );
        update(
            layer.biases.as_slice_mut().expect("contiguous"),
            g.biases.as_slice().expect("contiguous"),
            m.biases.as_slice_mut().expect("contiguous"),
            v.biases.as_slice_mut().expect("contiguous"),
            state.learning_rate,
            state.beta1,
            state.beta2,
            state.epsilon,
            bc1,
            bc2,
        );
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn update(
    params: &mut [f64],
    grads: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    lr: f64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
    bc1: f64,
    bc2: f64,
) {
    for i in 0..params.len() {
        let g = grads[i];
        m[i] = beta1 * m[i] + (1.0 - beta1) * g;
        v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
        let m_hat = m[i] / bc1;
        let v_hat = v[i] / bc2;
        params[i] -= lr * m_hat / (v_hat.sqrt() + epsilon);
    }
}
