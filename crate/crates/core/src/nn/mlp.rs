//! Dense multi-head networks.
//!
//! A network is a stack of hidden dense layers followed by one dense output
//! layer per head. Heads share the last hidden representation, which is how
//! the generator emits one categorical block per schema variable and how the
//! encoder emits its mean and log-variance.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::graph::{softmax_rows, Gradients, Graph, Var};
use crate::nn::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "slope")]
pub enum Activation {
    Relu,
    LeakyRelu(f64),
    Tanh,
    Identity,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "tau")]
pub enum HeadKind {
    Linear,
    Softmax,
    GumbelSoftmax(f64),
    Tanh,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeadSpec {
    pub dim: usize,
    pub kind: HeadKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HiddenSpec {
    pub dim: usize,
    pub activation: Activation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub input_dim: usize,
    pub hidden: Vec<HiddenSpec>,
    pub heads: Vec<HeadSpec>,
}

impl MlpSpec {
    pub fn new(input_dim: usize, hidden: &[(usize, Activation)], heads: Vec<HeadSpec>) -> Result<Self> {
        let spec = MlpSpec {
            input_dim,
            hidden: hidden
                .iter()
                .map(|&(dim, activation)| HiddenSpec { dim, activation })
                .collect(),
            heads,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(Error::Config("input_dim must be >= 1".into()));
        }
        if self.heads.is_empty() {
            return Err(Error::Config("network needs at least one output head".into()));
        }
        if self.hidden.iter().any(|h| h.dim == 0) || self.heads.iter().any(|h| h.dim == 0) {
            return Err(Error::Config("layer widths must be >= 1".into()));
        }
        for h in &self.heads {
            if let HeadKind::GumbelSoftmax(tau) = h.kind {
                if !(tau > 0.0 && tau.is_finite()) {
                    return Err(Error::Config(format!("gumbel temperature must be > 0, got {tau}")));
                }
            }
        }
        Ok(())
    }

    fn last_hidden_dim(&self) -> usize {
        self.hidden.last().map_or(self.input_dim, |h| h.dim)
    }

    pub fn output_dim(&self) -> usize {
        self.heads.iter().map(|h| h.dim).sum()
    }

    /// `(fan_in, fan_out)` of every dense layer in storage order.
    fn layer_dims(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::new();
        let mut prev = self.input_dim;
        for h in &self.hidden {
            dims.push((prev, h.dim));
            prev = h.dim;
        }
        for head in &self.heads {
            dims.push((self.last_hidden_dim(), head.dim));
        }
        dims
    }

    fn gumbel_heads(&self) -> usize {
        self.heads
            .iter()
            .filter(|h| matches!(h.kind, HeadKind::GumbelSoftmax(_)))
            .count()
    }
}

/// Weight `fan_in x fan_out` and bias `1 x fan_out`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    pub weight: Tensor,
    pub bias: Tensor,
}

/// Hidden layers first, then one layer per head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterSet {
    pub layers: Vec<DenseLayer>,
}

impl ParameterSet {
    /// Uniform(-a, a) weights with `a = 1/sqrt(fan_in)`, zero biases.
    pub fn init<R: Rng + ?Sized>(spec: &MlpSpec, rng: &mut R) -> Self {
        let layers = spec
            .layer_dims()
            .into_iter()
            .map(|(fan_in, fan_out)| {
                let a = 1.0 / (fan_in as f64).sqrt();
                let w = (0..fan_in * fan_out).map(|_| rng.random_range(-a..a)).collect();
                DenseLayer {
                    weight: Tensor::from_parts(fan_in, fan_out, w),
                    bias: Tensor::zeros(1, fan_out),
                }
            })
            .collect();
        ParameterSet { layers }
    }

    pub fn zeros_like(&self) -> Self {
        ParameterSet {
            layers: self
                .layers
                .iter()
                .map(|l| DenseLayer {
                    weight: Tensor::zeros(l.weight.rows(), l.weight.cols()),
                    bias: Tensor::zeros(1, l.bias.cols()),
                })
                .collect(),
        }
    }

    pub fn check(&self, spec: &MlpSpec) -> Result<()> {
        let dims = spec.layer_dims();
        if dims.len() != self.layers.len() {
            return Err(Error::Shape(format!(
                "spec has {} layers, parameters have {}",
                dims.len(),
                self.layers.len()
            )));
        }
        for (i, ((fi, fo), l)) in dims.iter().zip(&self.layers).enumerate() {
            if l.weight.shape() != [*fi, *fo] || l.bias.shape() != [1, *fo] {
                return Err(Error::Shape(format!(
                    "layer {i}: expected {fi}x{fo}, got weight {:?} bias {:?}",
                    l.weight.shape(),
                    l.bias.shape()
                )));
            }
        }
        Ok(())
    }

    pub fn tensors(&self) -> impl Iterator<Item = &Tensor> {
        self.layers.iter().flat_map(|l| [&l.weight, &l.bias])
    }

    pub fn tensors_mut(&mut self) -> impl Iterator<Item = &mut Tensor> {
        self.layers.iter_mut().flat_map(|l| [&mut l.weight, &mut l.bias])
    }

    pub fn num_params(&self) -> usize {
        self.tensors().map(Tensor::len).sum()
    }
}

/// Parameters placed on a [`Graph`].
#[derive(Debug, Clone)]
pub struct BoundParams {
    layers: Vec<(Var, Var)>,
}

impl BoundParams {
    /// Places every tensor as a differentiable leaf.
    pub fn trainable(g: &mut Graph, params: &ParameterSet) -> Self {
        Self::bind(g, params, true)
    }

    /// Places every tensor as a constant, e.g. a critic evaluated during the
    /// generator update.
    pub fn frozen(g: &mut Graph, params: &ParameterSet) -> Self {
        Self::bind(g, params, false)
    }

    fn bind(g: &mut Graph, params: &ParameterSet, trainable: bool) -> Self {
        let mut leaf = |t: &Tensor| {
            if trainable {
                g.param(t.clone())
            } else {
                g.constant(t.clone())
            }
        };
        let layers = params.layers.iter().map(|l| (leaf(&l.weight), leaf(&l.bias))).collect();
        BoundParams { layers }
    }

    pub fn gradients(&self, g: &Graph, grads: &Gradients) -> ParameterSet {
        ParameterSet {
            layers: self
                .layers
                .iter()
                .map(|&(w, b)| DenseLayer {
                    weight: grads.get(g, w),
                    bias: grads.get(g, b),
                })
                .collect(),
        }
    }
}

/// Per-head graph nodes: `logits` before the head activation, `outputs` after.
#[derive(Debug, Clone)]
pub struct HeadVars {
    pub logits: Vec<Var>,
    pub outputs: Vec<Var>,
}

fn activate(g: &mut Graph, x: Var, act: Activation) -> Var {
    match act {
        Activation::Relu => g.relu(x),
        Activation::LeakyRelu(s) => g.leaky_relu(x, s),
        Activation::Tanh => g.tanh(x),
        Activation::Identity => x,
    }
}

fn dense(g: &mut Graph, x: Var, (w, b): (Var, Var)) -> Result<Var> {
    let h = g.matmul(x, w)?;
    g.add_row(h, b)
}

fn hidden_forward(g: &mut Graph, spec: &MlpSpec, params: &BoundParams, input: Var) -> Result<Var> {
    let mut h = input;
    for (i, layer) in spec.hidden.iter().enumerate() {
        let z = dense(g, h, params.layers[i])?;
        h = activate(g, z, layer.activation);
    }
    Ok(h)
}

/// Records the network on `g`.
///
/// `gumbel_noise` supplies one uniform(0,1) tensor per gumbel-softmax head, in
/// head order. Without it a gumbel head evaluates `softmax(logits / tau)`.
pub fn forward_graph(
    g: &mut Graph,
    spec: &MlpSpec,
    params: &BoundParams,
    input: Var,
    gumbel_noise: Option<&[Tensor]>,
) -> Result<HeadVars> {
    if g.value(input).cols() != spec.input_dim {
        return Err(Error::Shape(format!(
            "network expects {} inputs, got {}",
            spec.input_dim,
            g.value(input).cols()
        )));
    }
    if let Some(noise) = gumbel_noise {
        if noise.len() != spec.gumbel_heads() {
            return Err(Error::Shape(format!(
                "{} gumbel heads but {} noise tensors",
                spec.gumbel_heads(),
                noise.len()
            )));
        }
    }
    let h = hidden_forward(g, spec, params, input)?;
    let n_hidden = spec.hidden.len();
    let mut logits = Vec::with_capacity(spec.heads.len());
    let mut outputs = Vec::with_capacity(spec.heads.len());
    let mut gumbel_idx = 0;
    for (k, head) in spec.heads.iter().enumerate() {
        let z = dense(g, h, params.layers[n_hidden + k])?;
        let out = match head.kind {
            HeadKind::Linear => z,
            HeadKind::Softmax => g.softmax(z),
            HeadKind::Tanh => g.tanh(z),
            HeadKind::GumbelSoftmax(tau) => {
                let perturbed = match gumbel_noise {
                    Some(noise) => {
                        let gn = gumbel_offsets(&noise[gumbel_idx], g.value(z))?;
                        let gv = g.constant(gn);
                        g.add(z, gv)?
                    }
                    None => z,
                };
                gumbel_idx += 1;
                let scaled = g.scale(perturbed, 1.0 / tau);
                g.softmax(scaled)
            }
        };
        logits.push(z);
        outputs.push(out);
    }
    Ok(HeadVars { logits, outputs })
}

/// Evaluates the network, one output tensor per head.
pub fn forward(
    spec: &MlpSpec,
    params: &ParameterSet,
    input: &Tensor,
    gumbel_noise: Option<&[Tensor]>,
) -> Result<Vec<Tensor>> {
    params.check(spec)?;
    let mut g = Graph::new();
    let bound = BoundParams::frozen(&mut g, params);
    let x = g.constant(input.clone());
    let heads = forward_graph(&mut g, spec, &bound, x, gumbel_noise)?;
    heads
        .outputs
        .iter()
        .map(|&v| {
            let t = g.value(v).clone();
            if t.is_finite() {
                Ok(t)
            } else {
                Err(Error::NonFinite("forward".into()))
            }
        })
        .collect()
}

fn gumbel_offsets(noise: &Tensor, logits: &Tensor) -> Result<Tensor> {
    if noise.rows() != logits.rows() || noise.cols() != logits.cols() {
        return Err(Error::Shape(format!(
            "gumbel noise {:?} vs logits {:?}",
            noise.shape(),
            logits.shape()
        )));
    }
    if noise.data().iter().any(|&u| !(u > 0.0 && u < 1.0)) {
        return Err(Error::Config("gumbel noise must lie strictly inside (0, 1)".into()));
    }
    Ok(noise.map(|u| -(-u.ln()).ln()))
}

/// `softmax((logits + g) / tau)` with `g = -ln(-ln(noise))`.
pub fn gumbel_softmax(logits: &Tensor, tau: f64, noise: &Tensor) -> Result<Tensor> {
    if !(tau > 0.0) {
        return Err(Error::Config(format!("gumbel temperature must be > 0, got {tau}")));
    }
    let offsets = gumbel_offsets(noise, logits)?;
    let data = logits
        .data()
        .iter()
        .zip(offsets.data())
        .map(|(l, o)| (l + o) / tau)
        .collect();
    Ok(softmax_rows(&Tensor::from_parts(logits.rows(), logits.cols(), data)))
}

fn check_critic(spec: &MlpSpec) -> Result<()> {
    match spec.heads.as_slice() {
        [HeadSpec {
            dim: 1,
            kind: HeadKind::Linear,
        }] => Ok(()),
        _ => Err(Error::Config(
            "a critic must have exactly one linear head of width 1".into(),
        )),
    }
}

/// Scalar critic score per row plus the gradient of that score with respect
/// to the input rows, both as graph nodes.
///
/// The input gradient is assembled from ordinary graph ops (the critic's
/// backward pass written out explicitly), so differentiating any function of
/// it with respect to the critic parameters is plain first-order reverse mode.
/// Piecewise-linear activations contribute constant masks.
pub fn input_gradient_graph(g: &mut Graph, spec: &MlpSpec, params: &BoundParams, input: Var) -> Result<(Var, Var)> {
    check_critic(spec)?;
    if g.value(input).cols() != spec.input_dim {
        return Err(Error::Shape(format!(
            "critic expects {} inputs, got {}",
            spec.input_dim,
            g.value(input).cols()
        )));
    }
    let n = g.value(input).rows();
    let mut pre = Vec::with_capacity(spec.hidden.len());
    let mut post = Vec::with_capacity(spec.hidden.len());
    let mut h = input;
    for (i, layer) in spec.hidden.iter().enumerate() {
        let z = dense(g, h, params.layers[i])?;
        h = activate(g, z, layer.activation);
        pre.push(z);
        post.push(h);
    }
    let head = params.layers[spec.hidden.len()];
    let score = dense(g, h, head)?;

    // d score / d h_L = w_out^T for every row.
    let ones = g.constant(Tensor::filled(n, 1, 1.0));
    let mut delta = g.matmul_bt(ones, head.0)?;
    for (i, layer) in spec.hidden.iter().enumerate().rev() {
        delta = match layer.activation {
            Activation::Identity => delta,
            Activation::Tanh => {
                let sq = g.square(post[i]);
                let neg = g.scale(sq, -1.0);
                let deriv = g.add_scalar(neg, 1.0);
                g.mul(delta, deriv)?
            }
            Activation::Relu | Activation::LeakyRelu(_) => {
                let slope = match layer.activation {
                    Activation::LeakyRelu(s) => s,
                    _ => 0.0,
                };
                let mask = g.value(pre[i]).map(|z| if z > 0.0 { 1.0 } else { slope });
                let mask = g.constant(mask);
                g.mul(delta, mask)?
            }
        };
        delta = g.matmul_bt(delta, params.layers[i].0)?;
    }
    Ok((score, delta))
}

/// Euclidean norm of the input gradient per row, as an `n x 1` graph node.
pub fn input_gradient_norm_graph(g: &mut Graph, spec: &MlpSpec, params: &BoundParams, input: Var) -> Result<Var> {
    let (_, grad) = input_gradient_graph(g, spec, params, input)?;
    let sq = g.square(grad);
    let ss = g.sum_rows(sq);
    Ok(g.sqrt(ss))
}

/// `||d critic(x) / dx||_2` for every row of `x`.
pub fn input_gradient_norm(spec: &MlpSpec, params: &ParameterSet, x: &Tensor) -> Result<Vec<f64>> {
    params.check(spec)?;
    let mut g = Graph::new();
    let bound = BoundParams::frozen(&mut g, params);
    let xv = g.constant(x.clone());
    let norm = input_gradient_norm_graph(&mut g, spec, &bound, xv)?;
    Ok(g.value(norm).data().to_vec())
}
