//! Small dense networks with exact reverse-mode gradients.
//!
//! Enough machinery for the actor and critic: Glorot-initialized layers, ReLU/tanh hidden
//! activations, a linear or simplex-softmax output head, Adam, and the supervised losses
//! used for distillation. Gradients flow to the input vector as well as the parameters so
//! the critic's action gradient can be chained through the actor.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CHECKPOINT_VERSION: &str = "kdnn-1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Tanh => x.tanh(),
        }
    }

    /// Derivative expressed through the pre-activation.
    fn derivative(self, pre: f64) -> f64 {
        match self {
            Activation::Relu => {
                if pre > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - pre.tanh().powi(2),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutputHead {
    Linear,
    SimplexSoftmax,
}

/// Fully connected layer `y = x W + b` with `W` stored row-major as `fan_in x fan_out`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub fan_in: usize,
    pub fan_out: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    fn forward(&self, x: &[f64]) -> Vec<f64> {
        let mut y = self.bias.clone();
        for (i, xi) in x.iter().enumerate() {
            if *xi == 0.0 {
                continue;
            }
            let row = &self.weights[i * self.fan_out..(i + 1) * self.fan_out];
            for (yj, wij) in y.iter_mut().zip(row) {
                *yj += xi * wij;
            }
        }
        y
    }

    /// `W delta`
    fn backward_input(&self, delta: &[f64]) -> Vec<f64> {
        (0..self.fan_in)
            .map(|i| {
                let row = &self.weights[i * self.fan_out..(i + 1) * self.fan_out];
                row.iter().zip(delta).map(|(w, d)| w * d).sum()
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layer_sizes: Vec<usize>,
    pub hidden_activation: Activation,
    pub output_head: OutputHead,
    pub layers: Vec<Dense>,
    pub seed: u64,
}

/// Activations recorded by [`Mlp::forward`] for the backward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardCache {
    /// Input to each layer.
    inputs: Vec<Vec<f64>>,
    /// Pre-activation output of each layer; the last one holds the logits.
    pre: Vec<Vec<f64>>,
    output: Vec<f64>,
}

impl ForwardCache {
    pub fn logits(&self) -> &[f64] {
        self.pre.last().expect("at least one layer")
    }

    pub fn output(&self) -> &[f64] {
        &self.output
    }
}

/// Parameter gradients, shape-matched to an [`Mlp`].
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSet {
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<Vec<f64>>,
}

impl GradientSet {
    pub fn zeros_like(net: &Mlp) -> Self {
        Self {
            weights: net.layers.iter().map(|l| vec![0.0; l.weights.len()]).collect(),
            bias: net.layers.iter().map(|l| vec![0.0; l.bias.len()]).collect(),
        }
    }

    pub fn add_assign(&mut self, other: &GradientSet) {
        for (a, b) in self.values_mut().zip(other.values()) {
            *a += b;
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for g in self.values_mut() {
            *g *= factor;
        }
    }

    /// Flat view in the same order as [`Mlp::parameters`].
    pub fn values(&self) -> impl Iterator<Item = &f64> {
        self.weights.iter().zip(&self.bias).flat_map(|(w, b)| w.iter().chain(b.iter()))
    }

    fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.weights
            .iter_mut()
            .zip(self.bias.iter_mut())
            .flat_map(|(w, b)| w.iter_mut().chain(b.iter_mut()))
    }

    pub fn is_finite(&self) -> bool {
        self.values().all(|g| g.is_finite())
    }

    pub fn len(&self) -> usize {
        self.values().count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl Mlp {
    /// Glorot-uniform weights from a seeded generator, zero biases.
    pub fn new(layer_sizes: &[usize], hidden_activation: Activation, output_head: OutputHead, seed: u64) -> Result<Self> {
        if layer_sizes.len() < 2 {
            return Err(Error::Shape(format!("need at least 2 layer sizes, got {layer_sizes:?}")));
        }
        if layer_sizes.contains(&0) {
            return Err(Error::Shape(format!("layer sizes must be positive: {layer_sizes:?}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = layer_sizes
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                Dense {
                    fan_in,
                    fan_out,
                    weights: (0..fan_in * fan_out).map(|_| rng.gen_range(-limit..=limit)).collect(),
                    bias: vec![0.0; fan_out],
                }
            })
            .collect();
        Ok(Self {
            layer_sizes: layer_sizes.to_vec(),
            hidden_activation,
            output_head,
            layers,
            seed,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().expect("validated sizes")
    }

    pub fn forward(&self, input: &[f64]) -> Result<(Vec<f64>, ForwardCache)> {
        if input.len() != self.input_dim() {
            return Err(Error::Shape(format!(
                "input has {} values, network expects {}",
                input.len(),
                self.input_dim()
            )));
        }
        let last = self.layers.len() - 1;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut x = input.to_vec();
        for (l, layer) in self.layers.iter().enumerate() {
            let z = layer.forward(&x);
            inputs.push(std::mem::take(&mut x));
            x = if l < last {
                z.iter().map(|v| self.hidden_activation.apply(*v)).collect()
            } else {
                match self.output_head {
                    OutputHead::Linear => z.clone(),
                    OutputHead::SimplexSoftmax => softmax(&z),
                }
            };
            pre.push(z);
        }
        let cache = ForwardCache {
            inputs,
            pre,
            output: x.clone(),
        };
        Ok((x, cache))
    }

    pub fn predict(&self, input: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward(input)?.0)
    }

    /// Gradients given `d loss / d output`. Returns parameter gradients and `d loss / d input`.
    pub fn backward(&self, cache: &ForwardCache, output_gradient: &[f64]) -> Result<(GradientSet, Vec<f64>)> {
        self.check_output_len(output_gradient.len())?;
        let grad_logits = match self.output_head {
            OutputHead::Linear => output_gradient.to_vec(),
            OutputHead::SimplexSoftmax => {
                let p = cache.output();
                let pg: f64 = p.iter().zip(output_gradient).map(|(p, g)| p * g).sum();
                p.iter().zip(output_gradient).map(|(p, g)| p * (g - pg)).collect()
            }
        };
        self.backward_logits(cache, &grad_logits)
    }

    /// Gradients given `d loss / d logits` (the last layer's pre-activation).
    pub fn backward_logits(&self, cache: &ForwardCache, logits_gradient: &[f64]) -> Result<(GradientSet, Vec<f64>)> {
        self.check_output_len(logits_gradient.len())?;
        if cache.inputs.len() != self.layers.len() || cache.inputs[0].len() != self.input_dim() {
            return Err(Error::Shape("forward cache does not match network".into()));
        }
        let mut grads = GradientSet::zeros_like(self);
        let mut delta = logits_gradient.to_vec();
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            let x = &cache.inputs[l];
            let gw = &mut grads.weights[l];
            for (i, xi) in x.iter().enumerate() {
                if *xi == 0.0 {
                    continue;
                }
                for (g, d) in gw[i * layer.fan_out..(i + 1) * layer.fan_out].iter_mut().zip(&delta) {
                    *g = xi * d;
                }
            }
            grads.bias[l].copy_from_slice(&delta);
            let mut upstream = layer.backward_input(&delta);
            if l > 0 {
                for (u, z) in upstream.iter_mut().zip(&cache.pre[l - 1]) {
                    *u *= self.hidden_activation.derivative(*z);
                }
            }
            delta = upstream;
        }
        Ok((grads, delta))
    }

    fn check_output_len(&self, len: usize) -> Result<()> {
        if len != self.output_dim() {
            return Err(Error::Shape(format!(
                "output gradient has {len} values, network outputs {}",
                self.output_dim()
            )));
        }
        Ok(())
    }

    /// All parameters, layer by layer, weights before biases.
    pub fn parameters(&self) -> impl Iterator<Item = &f64> {
        self.layers.iter().flat_map(|l| l.weights.iter().chain(l.bias.iter()))
    }

    pub fn parameters_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.weights.iter_mut().chain(l.bias.iter_mut()))
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    pub fn same_shape(&self, other: &Mlp) -> bool {
        self.layer_sizes == other.layer_sizes
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&MlpDoc::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str::<MlpDoc>(text)?.try_into()
    }
}

/// On-disk form of a network ("kdnn-1").
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MlpDoc {
    pub version: String,
    pub layer_sizes: Vec<usize>,
    pub hidden_activation: Activation,
    pub output_head: OutputHead,
    pub seed: u64,
    /// Per layer, `fan_in` rows of `fan_out` weights.
    pub weights: Vec<Vec<Vec<f64>>>,
    pub biases: Vec<Vec<f64>>,
}

impl From<&Mlp> for MlpDoc {
    fn from(net: &Mlp) -> Self {
        Self {
            version: CHECKPOINT_VERSION.to_string(),
            layer_sizes: net.layer_sizes.clone(),
            hidden_activation: net.hidden_activation,
            output_head: net.output_head,
            seed: net.seed,
            weights: net
                .layers
                .iter()
                .map(|l| l.weights.chunks(l.fan_out).map(<[f64]>::to_vec).collect())
                .collect(),
            biases: net.layers.iter().map(|l| l.bias.clone()).collect(),
        }
    }
}

impl TryFrom<MlpDoc> for Mlp {
    type Error = Error;

    fn try_from(doc: MlpDoc) -> Result<Self> {
        if doc.version != CHECKPOINT_VERSION {
            return Err(Error::Config(format!(
                "network version `{}`, expected `{CHECKPOINT_VERSION}`",
                doc.version
            )));
        }
        let mut net = Mlp::new(&doc.layer_sizes, doc.hidden_activation, doc.output_head, doc.seed)?;
        if doc.weights.len() != net.layers.len() || doc.biases.len() != net.layers.len() {
            return Err(Error::Shape("layer count does not match layer_sizes".into()));
        }
        for ((layer, rows), bias) in net.layers.iter_mut().zip(doc.weights).zip(doc.biases) {
            if rows.len() != layer.fan_in || rows.iter().any(|r| r.len() != layer.fan_out) || bias.len() != layer.fan_out {
                return Err(Error::Shape(format!(
                    "layer {}x{} has mismatched parameter arrays",
                    layer.fan_in, layer.fan_out
                )));
            }
            layer.weights = rows.concat();
            layer.bias = bias;
        }
        if !net.parameters().all(|p| p.is_finite()) {
            return Err(Error::Numeric("checkpoint holds non-finite parameters".into()));
        }
        Ok(net)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub step: u64,
    first: Vec<f64>,
    second: Vec<f64>,
}

impl AdamState {
    pub fn new(net: &Mlp, config: AdamConfig) -> Self {
        let n = net.parameter_count();
        Self {
            config,
            step: 0,
            first: vec![0.0; n],
            second: vec![0.0; n],
        }
    }
}

/// One bias-corrected Adam descent step.
pub fn adam_step(net: &mut Mlp, grads: &GradientSet, state: &mut AdamState) -> Result<()> {
    if grads.len() != net.parameter_count() || state.first.len() != net.parameter_count() {
        return Err(Error::Shape("gradient, optimizer and network sizes differ".into()));
    }
    if !grads.is_finite() {
        return Err(Error::Numeric("non-finite gradient".into()));
    }
    state.step += 1;
    let AdamConfig { lr, beta1, beta2, eps } = state.config;
    let c1 = 1.0 - beta1.powi(state.step as i32);
    let c2 = 1.0 - beta2.powi(state.step as i32);
    for (((p, g), m), v) in net
        .parameters_mut()
        .zip(grads.values())
        .zip(state.first.iter_mut())
        .zip(state.second.iter_mut())
    {
        *m = beta1 * *m + (1.0 - beta1) * g;
        *v = beta2 * *v + (1.0 - beta2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *p -= lr * m_hat / (v_hat.sqrt() + eps);
    }
    Ok(())
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exp.iter().sum();
    exp.into_iter().map(|e| e / sum).collect()
}

fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let log_sum = logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln() + max;
    logits.iter().map(|z| z - log_sum).collect()
}

/// `q_i = exp(z_i / T) / sum_j exp(z_j / T)`.
pub fn softmax_temperature(logits: &[f64], temperature: f64) -> Result<Vec<f64>> {
    if !(temperature > 0.0) || !temperature.is_finite() {
        return Err(Error::Domain(format!("temperature must be positive, got {temperature}")));
    }
    if logits.is_empty() || logits.iter().any(|z| !z.is_finite()) {
        return Err(Error::Domain("logits must be finite and non-empty".into()));
    }
    let scaled: Vec<f64> = logits.iter().map(|z| z / temperature).collect();
    Ok(softmax(&scaled))
}

fn check_same_len(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::Length(format!("lengths differ: {a} vs {b}")));
    }
    Ok(())
}

/// Mean squared error over the components and its gradient `2 (pred - target) / N`.
pub fn mse_loss(pred: &[f64], target: &[f64]) -> Result<(f64, Vec<f64>)> {
    check_same_len(pred.len(), target.len())?;
    if pred.is_empty() {
        return Err(Error::Length("empty prediction".into()));
    }
    let n = pred.len() as f64;
    let loss = pred.iter().zip(target).map(|(p, t)| (p - t).powi(2)).sum::<f64>() / n;
    let grad = pred.iter().zip(target).map(|(p, t)| 2.0 * (p - t) / n).collect();
    Ok((loss, grad))
}

/// Cross-entropy `H(p, softmax(z)) = -sum p_i log softmax(z)_i` and its gradient in `z`.
pub fn cross_entropy_with_logits(p: &[f64], logits: &[f64]) -> Result<(f64, Vec<f64>)> {
    check_same_len(p.len(), logits.len())?;
    let log_q = log_softmax(logits);
    let q = softmax(logits);
    let mass: f64 = p.iter().sum();
    let loss = -p.iter().zip(&log_q).map(|(p, lq)| if *p == 0.0 { 0.0 } else { p * lq }).sum::<f64>();
    let grad = q.iter().zip(p).map(|(q, p)| mass * q - p).collect();
    Ok((loss, grad))
}

/// Distillation objective
/// `H(y, softmax(z_s)) + lambda T^2 H(softmax(z_t / T), softmax(z_s / T))`
/// and its gradient with respect to the student logits `z_s`.
pub fn kd_loss(
    student_logits: &[f64],
    teacher_logits: &[f64],
    hard_target: &[f64],
    temperature: f64,
    lambda: f64,
) -> Result<(f64, Vec<f64>)> {
    check_same_len(student_logits.len(), teacher_logits.len())?;
    check_same_len(student_logits.len(), hard_target.len())?;
    if !(lambda >= 0.0) {
        return Err(Error::Domain(format!("lambda must be non-negative, got {lambda}")));
    }
    let soft_teacher = softmax_temperature(teacher_logits, temperature)?;
    let scaled_student: Vec<f64> = student_logits.iter().map(|z| z / temperature).collect();
    let (hard, hard_grad) = cross_entropy_with_logits(hard_target, student_logits)?;
    let (soft, soft_grad) = cross_entropy_with_logits(&soft_teacher, &scaled_student)?;
    let w = lambda * temperature * temperature;
    let loss = hard + w * soft;
    // d/dz_s of the soft term picks up 1/T from the scaling.
    let grad = hard_grad
        .iter()
        .zip(&soft_grad)
        .map(|(h, s)| h + w * s / temperature)
        .collect();
    Ok((loss, grad))
}
