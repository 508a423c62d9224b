//! Dense feed-forward networks with exact reverse-mode gradients and an Adam
//! optimizer.
//!
//! Inputs are batched row-wise: a `(batch, features)` matrix goes in, a
//! `(batch, outputs)` matrix comes out. Each layer computes
//! `act(x·Wᵀ + b)` with `W` stored as `(out, in)`.

use std::fmt::Write as _;

use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Tanh,
    Identity,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
            Activation::Identity => z,
        }
    }

    /// Derivative expressed through the activation's output.
    fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - y * y,
            Activation::Identity => 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
            Activation::Identity => "identity",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "relu" => Some(Activation::Relu),
            "tanh" => Some(Activation::Tanh),
            "identity" => Some(Activation::Identity),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    /// `(out, in)`.
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
    pub activation: Activation,
}

impl Dense {
    pub fn in_dim(&self) -> usize {
        self.weight.ncols()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.nrows()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layers: Vec<Dense>,
}

/// Per-layer inputs and outputs recorded by [`Mlp::forward`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    inputs: Vec<Array2<f64>>,
    outputs: Vec<Array2<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &Array2<f64> {
        self.outputs.last().expect("cache has at least one layer")
    }
}

/// Parameter-shaped collection of `(weight, bias)` pairs; used for gradients
/// and optimizer moments.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<(Array2<f64>, Array1<f64>)>,
}

impl Gradients {
    pub fn zeros_like(mlp: &Mlp) -> Self {
        Self {
            layers: mlp
                .layers
                .iter()
                .map(|l| (Array2::zeros(l.weight.raw_dim()), Array1::zeros(l.bias.len())))
                .collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.layers
            .iter()
            .flat_map(|(w, b)| w.iter().chain(b.iter()))
            .fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Euclidean norm over every entry.
    pub fn norm(&self) -> f64 {
        self.layers
            .iter()
            .flat_map(|(w, b)| w.iter().chain(b.iter()))
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }
}

impl Mlp {
    pub fn from_layers(layers: Vec<Dense>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Structural("network needs at least one layer".into()));
        }
        for (i, l) in layers.iter().enumerate() {
            if l.bias.len() != l.out_dim() {
                return Err(Error::Structural(format!(
                    "layer {i}: bias length {} != {} outputs",
                    l.bias.len(),
                    l.out_dim()
                )));
            }
            if i > 0 && layers[i - 1].out_dim() != l.in_dim() {
                return Err(Error::Structural(format!(
                    "layer {i} expects {} inputs, previous layer gives {}",
                    l.in_dim(),
                    layers[i - 1].out_dim()
                )));
            }
            if !(l.weight.iter().chain(l.bias.iter()).all(|v| v.is_finite())) {
                return Err(Error::NumericDomain(format!("layer {i} has non-finite entries")));
            }
        }
        Ok(Self { layers })
    }

    /// Random network over `dims` (input first). Hidden weights and biases are
    /// uniform in `±1/√fan_in`; the final layer's range is further scaled by
    /// `final_scale`.
    pub fn init<R: Rng + ?Sized>(
        dims: &[usize],
        hidden: Activation,
        output: Activation,
        final_scale: f64,
        rng: &mut R,
    ) -> Self {
        assert!(dims.len() >= 2, "need input and output dimensions");
        let n = dims.len() - 1;
        let layers = (0..n)
            .map(|i| {
                let (fan_in, fan_out) = (dims[i], dims[i + 1]);
                let last = i + 1 == n;
                let bound = (1.0 / (fan_in as f64).sqrt()) * if last { final_scale } else { 1.0 };
                let weight =
                    Array2::from_shape_fn((fan_out, fan_in), |_| rng.random_range(-bound..=bound));
                let bias = Array1::from_shape_fn(fan_out, |_| rng.random_range(-bound..=bound));
                Dense {
                    weight,
                    bias,
                    activation: if last { output } else { hidden },
                }
            })
            .collect();
        Self { layers }
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim()
    }

    /// Input dimension followed by each layer's output dimension.
    pub fn dims(&self) -> Vec<usize> {
        std::iter::once(self.input_dim())
            .chain(self.layers.iter().map(Dense::out_dim))
            .collect()
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.weight.len() + l.bias.len()).sum()
    }

    pub fn forward(&self, input: ArrayView2<f64>) -> Result<ForwardCache> {
        if input.ncols() != self.input_dim() {
            return Err(Error::Structural(format!(
                "input has {} features, network expects {}",
                input.ncols(),
                self.input_dim()
            )));
        }
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut outputs = Vec::with_capacity(self.layers.len());
        let mut x = input.to_owned();
        for layer in &self.layers {
            let mut z = x.dot(&layer.weight.t());
            let act = layer.activation;
            Zip::from(z.rows_mut()).for_each(|mut row| {
                Zip::from(&mut row)
                    .and(&layer.bias)
                    .for_each(|v, &b| *v = act.apply(*v + b));
            });
            inputs.push(x);
            x = z.clone();
            outputs.push(z);
        }
        Ok(ForwardCache { inputs, outputs })
    }

    /// Output for a single feature vector.
    pub fn predict(&self, input: &[f64]) -> Result<Vec<f64>> {
        let view = ArrayView2::from_shape((1, input.len()), input)
            .map_err(|e| Error::Structural(e.to_string()))?;
        Ok(self.forward(view)?.output().row(0).to_vec())
    }

    /// Gradients of `Σ output ⊙ upstream` with respect to every parameter and
    /// to the input, summed over the batch.
    pub fn backward(
        &self,
        cache: &ForwardCache,
        upstream: ArrayView2<f64>,
    ) -> Result<(Gradients, Array2<f64>)> {
        self.check_cache(cache)?;
        let out = cache.output();
        if upstream.dim() != out.dim() {
            return Err(Error::Structural(format!(
                "upstream gradient shape {:?} != output shape {:?}",
                upstream.dim(),
                out.dim()
            )));
        }
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut g = upstream.to_owned();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let act = layer.activation;
            Zip::from(&mut g)
                .and(&cache.outputs[i])
                .for_each(|d, &y| *d *= act.derivative_from_output(y));
            let dw = g.t().dot(&cache.inputs[i]);
            let db = g.sum_axis(Axis(0));
            let next = g.dot(&layer.weight);
            grads.push((dw, db));
            g = next;
        }
        grads.reverse();
        Ok((Gradients { layers: grads }, g))
    }

    fn check_cache(&self, cache: &ForwardCache) -> Result<()> {
        if cache.inputs.len() != self.layers.len() || cache.outputs.len() != self.layers.len() {
            return Err(Error::Structural(format!(
                "cache has {} layers, network has {}",
                cache.outputs.len(),
                self.layers.len()
            )));
        }
        let batch = cache.inputs[0].nrows();
        for (i, layer) in self.layers.iter().enumerate() {
            let (x, y) = (&cache.inputs[i], &cache.outputs[i]);
            if x.dim() != (batch, layer.in_dim()) || y.dim() != (batch, layer.out_dim()) {
                return Err(Error::Structural(format!(
                    "cache layer {i} does not match network shape"
                )));
            }
        }
        Ok(())
    }

    /// `self ← tau·source + (1 - tau)·self`, entry-wise.
    pub fn soft_update_from(&mut self, source: &Mlp, tau: f64) {
        assert_eq!(self.dims(), source.dims(), "soft update between different shapes");
        for (dst, src) in self.layers.iter_mut().zip(&source.layers) {
            Zip::from(&mut dst.weight)
                .and(&src.weight)
                .for_each(|d, &s| *d = tau * s + (1.0 - tau) * *d);
            Zip::from(&mut dst.bias)
                .and(&src.bias)
                .for_each(|d, &s| *d = tau * s + (1.0 - tau) * *d);
        }
    }

    pub fn all_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weight.iter().chain(l.bias.iter()).all(|v| v.is_finite()))
    }

    /// Appends one text block per layer: a header line
    /// `layer <i> <activation> <in> <out>`, then the row-major weights on one
    /// line, then the biases on one line.
    pub fn write_text(&self, out: &mut String) {
        for (i, l) in self.layers.iter().enumerate() {
            let _ = writeln!(
                out,
                "layer {i} {} {} {}",
                l.activation.name(),
                l.in_dim(),
                l.out_dim()
            );
            write_numbers(out, l.weight.iter());
            write_numbers(out, l.bias.iter());
        }
    }

    /// Reads `n_layers` blocks written by [`Mlp::write_text`]. `lines` yields
    /// `(line_number, text)` pairs.
    pub fn read_text<'a, I>(lines: &mut I, n_layers: usize) -> Result<Self>
    where
        I: Iterator<Item = (usize, &'a str)>,
    {
        let mut layers = Vec::with_capacity(n_layers);
        for i in 0..n_layers {
            let (ln, header) = next_line(lines)?;
            let parts: Vec<&str> = header.split_whitespace().collect();
            let bad = |msg: &str| Error::Format {
                line: ln,
                msg: format!("{msg}: {header:?}"),
            };
            if parts.len() != 5 || parts[0] != "layer" || parts[1] != i.to_string() {
                return Err(bad(&format!("expected header for layer {i}")));
            }
            let activation = Activation::from_name(parts[2]).ok_or_else(|| bad("unknown activation"))?;
            let fan_in: usize = parts[3].parse().map_err(|_| bad("bad input dimension"))?;
            let fan_out: usize = parts[4].parse().map_err(|_| bad("bad output dimension"))?;
            let w = read_numbers(lines, fan_in * fan_out)?;
            let b = read_numbers(lines, fan_out)?;
            layers.push(Dense {
                weight: Array2::from_shape_vec((fan_out, fan_in), w)
                    .map_err(|e| Error::Format { line: ln, msg: e.to_string() })?,
                bias: Array1::from(b),
                activation,
            });
        }
        Mlp::from_layers(layers).map_err(|e| Error::Format {
            line: 0,
            msg: e.to_string(),
        })
    }
}

fn write_numbers<'a>(out: &mut String, values: impl Iterator<Item = &'a f64>) {
    let mut first = true;
    for v in values {
        if !first {
            out.push(' ');
        }
        first = false;
        let _ = write!(out, "{v:e}");
    }
    out.push('\n');
}

pub(crate) fn next_line<'a, I>(lines: &mut I) -> Result<(usize, &'a str)>
where
    I: Iterator<Item = (usize, &'a str)>,
{
    lines.next().ok_or(Error::Format {
        line: 0,
        msg: "unexpected end of model file".into(),
    })
}

fn read_numbers<'a, I>(lines: &mut I, count: usize) -> Result<Vec<f64>>
where
    I: Iterator<Item = (usize, &'a str)>,
{
    let (ln, text) = next_line(lines)?;
    let values = text
        .split_whitespace()
        .map(|tok| {
            tok.parse::<f64>().map_err(|_| Error::Format {
                line: ln,
                msg: format!("{tok:?} is not a number"),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    if values.len() != count {
        return Err(Error::Format {
            line: ln,
            msg: format!("expected {count} values, found {}", values.len()),
        });
    }
    Ok(values)
}

/// Bias-corrected adaptive-moment optimizer state for one network.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    first: Gradients,
    second: Gradients,
    pub step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(mlp: &Mlp) -> Self {
        Self {
            first: Gradients::zeros_like(mlp),
            second: Gradients::zeros_like(mlp),
            step: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    /// One descent step: `θ ← θ - lr·m̂/(√v̂ + ε)`.
    pub fn step(&mut self, mlp: &mut Mlp, grads: &Gradients, lr: f64) -> Result<()> {
        if grads.layers.len() != mlp.layers.len() || self.first.layers.len() != mlp.layers.len() {
            return Err(Error::Structural("gradient/optimizer shape mismatch".into()));
        }
        self.step += 1;
        let (b1, b2, eps) = (self.beta1, self.beta2, self.eps);
        let c1 = 1.0 - b1.powi(self.step.min(i32::MAX as u64) as i32);
        let c2 = 1.0 - b2.powi(self.step.min(i32::MAX as u64) as i32);
        let update = |p: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
            *m = flush_subnormal(b1 * *m + (1.0 - b1) * g);
            *v = flush_subnormal(b2 * *v + (1.0 - b2) * g * g);
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= lr * m_hat / (v_hat.sqrt() + eps);
        };
        for (((layer, (gw, gb)), (mw, mb)), (vw, vb)) in mlp
            .layers
            .iter_mut()
            .zip(&grads.layers)
            .zip(self.first.layers.iter_mut())
            .zip(self.second.layers.iter_mut())
        {
            if gw.dim() != layer.weight.dim() || gb.len() != layer.bias.len() {
                return Err(Error::Structural("gradient shape mismatch".into()));
            }
            Zip::from(&mut layer.weight)
                .and(gw)
                .and(mw)
                .and(vw)
                .for_each(|p, &g, m, v| update(p, g, m, v));
            Zip::from(&mut layer.bias)
                .and(gb)
                .and(mb)
                .and(vb)
                .for_each(|p, &g, m, v| update(p, g, m, v));
        }
        Ok(())
    }
}

/// Moments of parameters whose gradient is exactly zero decay geometrically
/// into the subnormal range, where arithmetic is an order of magnitude slower
/// on common hardware. Below `f64::MIN_POSITIVE` they are worth nothing to the
/// update anyway.
fn flush_subnormal(x: f64) -> f64 {
    if x.abs() < f64::MIN_POSITIVE {
        0.0
    } else {
        x
    }
}
