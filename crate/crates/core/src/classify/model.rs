//! Convolutional network with all parameters in one flat vector.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::layers::{
    conv_backward, conv_forward, conv_out_len, dense_backward, dense_forward, pool_backward, pool_forward,
    pool_out_len, relu_backward, relu_forward,
};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CnnShape {
    pub input_len: usize,
    pub input_dim: usize,
    pub conv_layers: usize,
    pub filters: usize,
    pub kernel_width: usize,
    pub pool_size: usize,
    pub pool_stride: usize,
    pub dense_units: usize,
    pub n_labels: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
struct ConvSpec {
    in_ch: usize,
    in_len: usize,
    w: usize,
    b: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
struct DenseSpec {
    n_in: usize,
    n_out: usize,
    w: usize,
    b: usize,
}

/// conv → ReLU → max-pool, repeated, then flatten → dense ReLU → logits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cnn {
    shape: CnnShape,
    convs: Vec<ConvSpec>,
    hidden: DenseSpec,
    output: DenseSpec,
    theta: Vec<f64>,
}

/// Intermediate activations kept for the backward pass.
pub struct Trace {
    conv_in: Vec<Vec<f64>>,
    conv_z: Vec<Vec<f64>>,
    pool_arg: Vec<Vec<usize>>,
    flat: Vec<f64>,
    hidden_z: Vec<f64>,
    hidden_a: Vec<f64>,
    pub logits: Vec<f64>,
}

impl Cnn {
    /// Glorot-uniform weights, zero biases, drawn in layer order from `rng`.
    pub fn new(shape: CnnShape, rng: &mut ChaCha8Rng) -> Result<Self> {
        let sizes = [
            shape.input_len,
            shape.input_dim,
            shape.conv_layers,
            shape.filters,
            shape.kernel_width,
            shape.pool_size,
            shape.pool_stride,
            shape.dense_units,
            shape.n_labels,
        ];
        if sizes.contains(&0) {
            return Err(Error::Config("all network sizes must be positive".into()));
        }
        let mut offset = 0;
        let mut alloc = |n: usize| {
            let at = offset;
            offset += n;
            at
        };
        let mut convs = Vec::with_capacity(shape.conv_layers);
        let (mut len, mut ch) = (shape.input_len, shape.input_dim);
        for layer in 0..shape.conv_layers {
            let too_short = || {
                Error::Config(format!(
                    "sequence length {} is too short for {} conv/pool stages (fails at stage {})",
                    shape.input_len,
                    shape.conv_layers,
                    layer + 1
                ))
            };
            let conv_len = conv_out_len(len, shape.kernel_width).ok_or_else(too_short)?;
            let pooled = pool_out_len(conv_len, shape.pool_size, shape.pool_stride).ok_or_else(too_short)?;
            let w = alloc(shape.filters * shape.kernel_width * ch);
            let b = alloc(shape.filters);
            convs.push(ConvSpec {
                in_ch: ch,
                in_len: len,
                w,
                b,
            });
            len = pooled;
            ch = shape.filters;
        }
        let flat = len * ch;
        let hidden = DenseSpec {
            n_in: flat,
            n_out: shape.dense_units,
            w: alloc(flat * shape.dense_units),
            b: alloc(shape.dense_units),
        };
        let output = DenseSpec {
            n_in: shape.dense_units,
            n_out: shape.n_labels,
            w: alloc(shape.dense_units * shape.n_labels),
            b: alloc(shape.n_labels),
        };
        let mut theta = vec![0.0; offset];
        for c in &convs {
            let fan_in = shape.kernel_width * c.in_ch;
            let fan_out = shape.kernel_width * shape.filters;
            glorot(&mut theta[c.w..c.b], fan_in, fan_out, rng);
        }
        for d in [&hidden, &output] {
            glorot(&mut theta[d.w..d.b], d.n_in, d.n_out, rng);
        }
        Ok(Cnn {
            shape,
            convs,
            hidden,
            output,
            theta,
        })
    }

    pub fn shape(&self) -> &CnnShape {
        &self.shape
    }

    pub fn params(&self) -> &[f64] {
        &self.theta
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.theta
    }

    pub fn n_params(&self) -> usize {
        self.theta.len()
    }

    fn conv_w(&self, i: usize) -> (&[f64], &[f64]) {
        let c = &self.convs[i];
        let end = c.b + self.shape.filters;
        (&self.theta[c.w..c.b], &self.theta[c.b..end])
    }

    fn dense_w(&self, d: &DenseSpec) -> (&[f64], &[f64]) {
        (&self.theta[d.w..d.b], &self.theta[d.b..d.b + d.n_out])
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        let expected = self.shape.input_len * self.shape.input_dim;
        if x.len() != expected {
            return Err(Error::Dimension {
                expected,
                got: x.len(),
            });
        }
        Ok(())
    }

    pub fn logits(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward(x)?.logits)
    }

    pub fn forward(&self, x: &[f64]) -> Result<Trace> {
        self.check_input(x)?;
        let s = &self.shape;
        let mut conv_in = Vec::with_capacity(s.conv_layers);
        let mut conv_z = Vec::with_capacity(s.conv_layers);
        let mut pool_arg = Vec::with_capacity(s.conv_layers);
        let mut cur = x.to_vec();
        for i in 0..s.conv_layers {
            let spec = self.convs[i];
            let (w, b) = self.conv_w(i);
            let z = conv_forward(&cur, spec.in_len, spec.in_ch, w, b, s.kernel_width);
            let a = relu_forward(&z);
            let conv_len = spec.in_len + 1 - s.kernel_width;
            let (pooled, arg) = pool_forward(&a, conv_len, s.filters, s.pool_size, s.pool_stride);
            conv_in.push(std::mem::replace(&mut cur, pooled));
            conv_z.push(z);
            pool_arg.push(arg);
        }
        let flat = cur;
        let (hw, hb) = self.dense_w(&self.hidden);
        let hidden_z = dense_forward(&flat, hw, hb);
        let hidden_a = relu_forward(&hidden_z);
        let (ow, ob) = self.dense_w(&self.output);
        let logits = dense_forward(&hidden_a, ow, ob);
        Ok(Trace {
            conv_in,
            conv_z,
            pool_arg,
            flat,
            hidden_z,
            hidden_a,
            logits,
        })
    }

    /// Accumulates parameter gradients into `grad` (same layout as the
    /// parameters) given the gradient of the loss with respect to the logits.
    /// Returns the input gradient when `want_dx` is set.
    pub fn backward(&self, trace: &Trace, dlogits: &[f64], grad: &mut [f64], want_dx: bool) -> Option<Vec<f64>> {
        let s = &self.shape;
        let (ow, _) = self.dense_w(&self.output);
        let (gw, gb) = split_wb(grad, &self.output);
        let da = dense_backward(&trace.hidden_a, ow, dlogits, gw, gb, true).expect("requested dx");
        let dz = relu_backward(&trace.hidden_z, &da);
        let (hw, _) = self.dense_w(&self.hidden);
        let (gw, gb) = split_wb(grad, &self.hidden);
        let mut d = dense_backward(&trace.flat, hw, &dz, gw, gb, true).expect("requested dx");
        for i in (0..s.conv_layers).rev() {
            let spec = self.convs[i];
            let z = &trace.conv_z[i];
            let da = pool_backward(&trace.pool_arg[i], &d, z.len());
            let dz = relu_backward(z, &da);
            let (w, _) = self.conv_w(i);
            let (gw, gb) = grad[spec.w..spec.b + s.filters].split_at_mut(spec.b - spec.w);
            let need = i > 0 || want_dx;
            {
                let dx = conv_backward(&trace.conv_in[i], spec.in_len, spec.in_ch, w, s.kernel_width, &dz, gw, gb, need)?;
                d = dx
            }
        }
        Some(d)
    }
}

fn split_wb<'a>(grad: &'a mut [f64], d: &DenseSpec) -> (&'a mut [f64], &'a mut [f64]) {
    grad[d.w..d.b + d.n_out].split_at_mut(d.b - d.w)
}

fn glorot(w: &mut [f64], fan_in: usize, fan_out: usize, rng: &mut ChaCha8Rng) {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    for v in w {
        *v = rng.random_range(-limit..limit);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamParams {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamParams {
    fn default() -> Self {
        AdamParams {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-7,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Adam {
    params: AdamParams,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub fn new(params: AdamParams, n: usize) -> Self {
        Adam {
            params,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    pub fn step(&mut self, theta: &mut [f64], grad: &[f64]) {
        let AdamParams {
            learning_rate,
            beta1,
            beta2,
            epsilon,
        } = self.params;
        self.t += 1;
        let bc1 = 1.0 - beta1.powi(self.t as i32);
        let bc2 = 1.0 - beta2.powi(self.t as i32);
        let lr = learning_rate * bc2.sqrt() / bc1;
        for i in 0..theta.len() {
            let g = grad[i];
            self.m[i] = beta1 * self.m[i] + (1.0 - beta1) * g;
            self.v[i] = beta2 * self.v[i] + (1.0 - beta2) * g * g;
            theta[i] -= lr * self.m[i] / (self.v[i].sqrt() + epsilon);
        }
    }
}
