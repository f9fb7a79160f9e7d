//! Small dense networks with hand-written reverse-mode gradients.
//!
//! Parameters live in one flat vector, layer by layer, each layer storing
//! its `out x in` row-major weight matrix followed by its bias.

use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;
use rand::Rng as _;

use crate::error::{check_len, domain, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Activation {
    Tanh,
    Identity,
}

impl Activation {
    fn apply(self, a: f64) -> f64 {
        match self {
            Activation::Tanh => a.tanh(),
            Activation::Identity => a,
        }
    }

    /// Derivative expressed through the activation output `y`.
    fn slope(self, y: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - y * y,
            Activation::Identity => 1.0,
        }
    }

    /// Second derivative expressed through the activation output `y`.
    fn curvature(self, y: f64) -> f64 {
        match self {
            Activation::Tanh => -2.0 * y * (1.0 - y * y),
            Activation::Identity => 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LayerShape {
    pub inputs: usize,
    pub outputs: usize,
    pub activation: Activation,
}

impl LayerShape {
    pub const fn new(inputs: usize, outputs: usize, activation: Activation) -> Self {
        Self {
            inputs,
            outputs,
            activation,
        }
    }

    fn weights(&self) -> usize {
        self.inputs * self.outputs
    }

    fn params(&self) -> usize {
        self.weights() + self.outputs
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DenseNet {
    layers: Vec<LayerShape>,
    offsets: Vec<usize>,
    params: Vec<f64>,
}

/// Activations recorded by a forward pass: `values[0]` is the input and
/// `values[l + 1]` the output of layer `l`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub values: Vec<Vec<f64>>,
}

impl Trace {
    pub fn output(&self) -> &[f64] {
        self.values.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

impl DenseNet {
    /// All-zero network with the given layer shapes.
    pub fn zeros(layers: &[LayerShape]) -> Result<Self> {
        if layers.is_empty() {
            return Err(domain("network needs at least one layer"));
        }
        for w in layers.windows(2) {
            check_len("layer input", w[0].outputs, w[1].inputs)?;
        }
        if layers.iter().any(|l| l.inputs == 0 || l.outputs == 0) {
            return Err(domain("layer sizes must be positive"));
        }
        let mut offsets = Vec::with_capacity(layers.len());
        let mut total = 0;
        for l in layers {
            offsets.push(total);
            total += l.params();
        }
        Ok(Self {
            layers: layers.to_vec(),
            offsets,
            params: vec![0.0; total],
        })
    }

    /// Weights and biases uniform in `+-1/sqrt(fan_in)`.
    pub fn init(layers: &[LayerShape], rng: &mut impl rand::RngCore) -> Result<Self> {
        let mut net = Self::zeros(layers)?;
        for (l, &off) in net.layers.iter().zip(&net.offsets) {
            let bound = 1.0 / (l.inputs as f64).sqrt();
            for p in &mut net.params[off..off + l.params()] {
                *p = rng.random_range(-bound..bound);
            }
        }
        Ok(net)
    }

    pub fn layers(&self) -> &[LayerShape] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].outputs
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn set_params(&mut self, p: &[f64]) -> Result<()> {
        check_len("network parameters", self.params.len(), p.len())?;
        if p.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericHealth("network parameters".into()));
        }
        self.params.copy_from_slice(p);
        Ok(())
    }

    /// Weights and bias of the last layer.
    pub fn output_layer_mut(&mut self) -> (&mut [f64], &mut [f64]) {
        let l = self.layers.len() - 1;
        let s = &self.layers[l];
        let off = self.offsets[l];
        self.params[off..off + s.params()].split_at_mut(s.weights())
    }

    fn layer(&self, l: usize) -> (&LayerShape, &[f64], &[f64]) {
        let s = &self.layers[l];
        let off = self.offsets[l];
        let w = &self.params[off..off + s.weights()];
        let b = &self.params[off + s.weights()..off + s.params()];
        (s, w, b)
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len("network input", self.input_dim(), x.len())?;
        let mut h = x.to_vec();
        for l in 0..self.layers.len() {
            h = self.layer_forward(l, &h);
        }
        Ok(h)
    }

    fn layer_forward(&self, l: usize, x: &[f64]) -> Vec<f64> {
        let (s, w, b) = self.layer(l);
        (0..s.outputs)
            .map(|i| {
                s.activation
                    .apply(dot(&w[i * s.inputs..(i + 1) * s.inputs], x) + b[i])
            })
            .collect()
    }

    pub fn forward_trace(&self, x: &[f64]) -> Result<Trace> {
        check_len("network input", self.input_dim(), x.len())?;
        let mut values = Vec::with_capacity(self.layers.len() + 1);
        values.push(x.to_vec());
        for l in 0..self.layers.len() {
            let next = self.layer_forward(l, &values[l]);
            values.push(next);
        }
        Ok(Trace { values })
    }

    /// Accumulate `d loss / d params` into `grads` given `d loss / d output`.
    /// Returns `d loss / d input` when `want_input` is set.
    pub fn backward(
        &self,
        trace: &Trace,
        grad_out: &[f64],
        grads: &mut [f64],
        want_input: bool,
    ) -> Result<Option<Vec<f64>>> {
        check_len("output gradient", self.output_dim(), grad_out.len())?;
        check_len("gradient buffer", self.params.len(), grads.len())?;
        let mut upstream = grad_out.to_vec();
        let mut pre = vec![0.0; 0];
        for l in (0..self.layers.len()).rev() {
            let y = &trace.values[l + 1];
            let s = &self.layers[l];
            pre.clear();
            pre.extend(
                upstream
                    .iter()
                    .zip(y)
                    .map(|(g, &v)| g * s.activation.slope(v)),
            );
            let need_input = want_input || l > 0;
            upstream = self.layer_backward(l, &trace.values[l], &pre, grads, need_input);
        }
        Ok(want_input.then_some(upstream))
    }

    /// Given the pre-activation gradient of layer `l`, accumulate its weight
    /// and bias gradients and return the gradient at its input.
    fn layer_backward(
        &self,
        l: usize,
        x: &[f64],
        pre: &[f64],
        grads: &mut [f64],
        need_input: bool,
    ) -> Vec<f64> {
        let (s, w, _) = self.layer(l);
        let off = self.offsets[l];
        let (gw, gb) = grads[off..off + s.params()].split_at_mut(s.weights());
        let mut gx = if need_input {
            vec![0.0; s.inputs]
        } else {
            Vec::new()
        };
        for (i, &d) in pre.iter().enumerate() {
            if d == 0.0 {
                continue;
            }
            gb[i] += d;
            axpy(&mut gw[i * s.inputs..(i + 1) * s.inputs], d, x);
            if need_input {
                axpy(&mut gx, d, &w[i * s.inputs..(i + 1) * s.inputs]);
            }
        }
        gx
    }

    /// Gradient of the scalar output with respect to the input.
    pub fn input_gradient(&self, trace: &Trace) -> Result<Vec<f64>> {
        check_len("scalar output", 1, self.output_dim())?;
        Ok(self.input_gradient_parts(trace).0)
    }

    /// Returns the input gradient plus, per layer, the upstream gradient at
    /// the layer output and the pre-activation gradient.
    fn input_gradient_parts(&self, trace: &Trace) -> (Vec<f64>, Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let depth = self.layers.len();
        let mut ups = vec![Vec::new(); depth];
        let mut deltas = vec![Vec::new(); depth];
        let mut u = vec![1.0];
        for l in (0..depth).rev() {
            let (s, w, _) = self.layer(l);
            let y = &trace.values[l + 1];
            let d: Vec<f64> = u
                .iter()
                .zip(y)
                .map(|(g, &v)| g * s.activation.slope(v))
                .collect();
            let mut next = vec![0.0; s.inputs];
            for (i, &di) in d.iter().enumerate() {
                if di != 0.0 {
                    axpy(&mut next, di, &w[i * s.inputs..(i + 1) * s.inputs]);
                }
            }
            ups[l] = core::mem::replace(&mut u, next);
            deltas[l] = d;
        }
        (u, ups, deltas)
    }

    /// Gradient penalty `(|d out / d x| - 1)^2` for a scalar-output network
    /// at the traced input. Accumulates `weight * d penalty / d params` into
    /// `grads` and returns the penalty.
    pub fn gradient_penalty_backward(
        &self,
        trace: &Trace,
        weight: f64,
        grads: &mut [f64],
    ) -> Result<f64> {
        check_len("scalar output", 1, self.output_dim())?;
        check_len("gradient buffer", self.params.len(), grads.len())?;
        let depth = self.layers.len();
        let (g, ups, deltas) = self.input_gradient_parts(trace);
        let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        let penalty = (norm - 1.0) * (norm - 1.0);
        if weight == 0.0 || norm == 0.0 {
            // at a zero gradient the penalty has no defined direction
            return Ok(penalty);
        }
        // adjoint of the input-gradient pass, walking layers forward
        let scale = weight * 2.0 * (norm - 1.0) / norm;
        let mut adj: Vec<f64> = g.iter().map(|v| scale * v).collect();
        let mut pre_adj: Vec<Vec<f64>> = Vec::with_capacity(depth);
        for l in 0..depth {
            let (s, w, _) = self.layer(l);
            let off = self.offsets[l];
            let y = &trace.values[l + 1];
            let delta = &deltas[l];
            let gw = &mut grads[off..off + s.weights()];
            let mut delta_adj = vec![0.0; s.outputs];
            for i in 0..s.outputs {
                let row = &w[i * s.inputs..(i + 1) * s.inputs];
                delta_adj[i] = dot(row, &adj);
                if delta[i] != 0.0 {
                    axpy(&mut gw[i * s.inputs..(i + 1) * s.inputs], delta[i], &adj);
                }
            }
            let mut a_adj = vec![0.0; s.outputs];
            let mut next = vec![0.0; s.outputs];
            for i in 0..s.outputs {
                next[i] = s.activation.slope(y[i]) * delta_adj[i];
                a_adj[i] = ups[l][i] * delta_adj[i] * s.activation.curvature(y[i]);
            }
            pre_adj.push(a_adj);
            adj = next;
        }
        // ordinary backprop of the injected pre-activation adjoints
        let mut carry: Vec<f64> = vec![0.0; self.output_dim()];
        for l in (0..depth).rev() {
            let s = &self.layers[l];
            let y = &trace.values[l + 1];
            let total: Vec<f64> = pre_adj[l]
                .iter()
                .zip(&carry)
                .zip(y)
                .map(|((a, c), &v)| a + c * s.activation.slope(v))
                .collect();
            carry = self.layer_backward(l, &trace.values[l], &total, grads, l > 0);
        }
        Ok(penalty)
    }
}

/// Dot product with four independent partial sums (fixed order, so still
/// bit-deterministic).
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0; 4];
    let chunks = n / 4;
    for c in 0..chunks {
        let i = 4 * c;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut tail = 0.0;
    for i in 4 * chunks..n {
        tail += a[i] * b[i];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// `y += alpha * x`.
pub fn axpy(y: &mut [f64], alpha: f64, x: &[f64]) {
    for (a, b) in y.iter_mut().zip(x) {
        *a += alpha * b;
    }
}
