//! Parameterized building blocks: LSTM cell, dense layer and dropout.
//!
//! Layers do not own their tensors. Every trainable tensor lives in a
//! [`ParamStore`] and a layer keeps [`ParamId`]s into it, so a model's
//! parameters can be bound to a fresh [`Graph`] in one call, updated by the
//! optimizer as a flat list, and written to disk in a stable order.

use std::ops::Index;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::autodiff::{Graph, Shape, Tensor, Var};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Named, ordered collection of trainable tensors.
#[derive(Debug, Clone, Default)]
pub struct ParamStore {
    names: Vec<String>,
    tensors: Vec<Tensor>,
}

/// Leaves of one graph, one per store entry, in store order.
#[derive(Debug, Clone)]
pub struct Bindings(Vec<Var>);

impl Bindings {
    pub fn vars(&self) -> &[Var] {
        &self.0
    }

    pub fn from_vars(vars: Vec<Var>) -> Self {
        Bindings(vars)
    }
}

impl Index<ParamId> for Bindings {
    type Output = Var;

    fn index(&self, id: ParamId) -> &Var {
        &self.0[id.0]
    }
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, tensor: Tensor) -> ParamId {
        self.names.push(name.into());
        self.tensors.push(tensor.with_grad());
        ParamId(self.tensors.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.tensors[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.tensors[id.0]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor] {
        &mut self.tensors
    }

    /// Total number of scalar parameters.
    pub fn total_count(&self) -> usize {
        self.tensors.iter().map(Tensor::numel).sum()
    }

    /// Records every parameter as a leaf of `g`.
    pub fn bind(&self, g: &mut Graph) -> Bindings {
        Bindings(self.tensors.iter().map(|t| g.leaf(t)).collect())
    }

    /// Adds `scale ×` the gradients held by `g` into each tensor's buffer.
    pub fn accumulate_grads(&mut self, g: &Graph, b: &Bindings, scale: f64) -> Result<()> {
        for (t, v) in self.tensors.iter_mut().zip(b.vars()) {
            if let Some(grad) = g.grad(*v) {
                if scale == 1.0 {
                    t.accumulate_grad(grad)?;
                } else {
                    let scaled: Vec<f64> = grad.iter().map(|x| x * scale).collect();
                    t.accumulate_grad(&scaled)?;
                }
            }
        }
        Ok(())
    }

    pub fn zero_grad(&mut self) {
        self.tensors.iter_mut().for_each(Tensor::zero_grad);
    }

    pub fn all_finite(&self) -> bool {
        self.tensors.iter().all(Tensor::is_finite)
    }
}

/// Forward-pass mode. Training carries the generator that draws dropout masks.
pub enum Mode<'a> {
    Eval,
    Train(&'a mut dyn RngCore),
}

impl Mode<'_> {
    pub fn is_train(&self) -> bool {
        matches!(self, Mode::Train(_))
    }
}

/// Uniform(−1/√fan_in, 1/√fan_in) initialization.
fn init_uniform(rng: &mut dyn RngCore, rows: usize, cols: usize) -> Result<Tensor> {
    let bound = 1.0 / (cols as f64).sqrt();
    let v = (0..rows * cols).map(|_| rng.gen_range(-bound..=bound)).collect();
    Tensor::new(Shape::new(vec![rows, cols])?, v)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Tanh,
    Identity,
}

/// `activation(W·x + b)` with `W: out × in`.
#[derive(Debug, Clone)]
pub struct DenseLayer {
    pub weight: ParamId,
    pub bias: ParamId,
    pub in_dim: usize,
    pub out_dim: usize,
    pub activation: Activation,
}

impl DenseLayer {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        in_dim: usize,
        out_dim: usize,
        activation: Activation,
        rng: &mut dyn RngCore,
    ) -> Result<Self> {
        let w = init_uniform(rng, out_dim, in_dim)?;
        let weight = store.add(format!("{name}.weight"), w);
        let bias = store.add(format!("{name}.bias"), Tensor::zeros(Shape::new(vec![out_dim])?));
        Ok(DenseLayer {
            weight,
            bias,
            in_dim,
            out_dim,
            activation,
        })
    }

    pub fn param_count(in_dim: usize, out_dim: usize) -> usize {
        out_dim * in_dim + out_dim
    }

    pub fn forward(&self, g: &mut Graph, b: &Bindings, x: Var) -> Result<Var> {
        let n = g.shape(x).numel();
        if g.shape(x).rank() != 1 || n != self.in_dim {
            return Err(Error::shape(
                "dense_forward",
                g.shape(b[self.weight]),
                g.shape(x),
            ));
        }
        let z = g.matmul(b[self.weight], x)?;
        let z = g.add(z, b[self.bias])?;
        Ok(match self.activation {
            Activation::Relu => g.relu(z),
            Activation::Tanh => g.tanh(z),
            Activation::Identity => z,
        })
    }
}

/// LSTM cell. Gate weights are stored as one `4s × (in + s)` matrix whose
/// row blocks are, in order, forget, input, output and candidate gates, and
/// whose columns are `[x; h_prev]`. The bias is the matching `4s` vector.
#[derive(Debug, Clone)]
pub struct LstmCell {
    pub weights: ParamId,
    pub bias: ParamId,
    pub input_dim: usize,
    pub state_dim: usize,
}

impl LstmCell {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        input_dim: usize,
        state_dim: usize,
        rng: &mut dyn RngCore,
    ) -> Result<Self> {
        let w = init_uniform(rng, 4 * state_dim, input_dim + state_dim)?;
        let weights = store.add(format!("{name}.weights"), w);
        // forget-gate bias starts at 1, the rest at 0
        let mut bias = vec![0.0; 4 * state_dim];
        bias[..state_dim].iter_mut().for_each(|b| *b = 1.0);
        let bias = store.add(format!("{name}.bias"), Tensor::from_vec(bias)?);
        Ok(LstmCell {
            weights,
            bias,
            input_dim,
            state_dim,
        })
    }

    pub fn param_count(input_dim: usize, state_dim: usize) -> usize {
        4 * (input_dim * state_dim + state_dim * state_dim + state_dim)
    }

    /// One step of the standard LSTM update; returns `(h, c)`.
    pub fn step(&self, g: &mut Graph, b: &Bindings, h_prev: Var, c_prev: Var, x: Var) -> Result<(Var, Var)> {
        let s = self.state_dim;
        for (v, want) in [(x, self.input_dim), (h_prev, s), (c_prev, s)] {
            let sh = g.shape(v);
            if sh.rank() != 1 || sh.numel() != want {
                return Err(Error::shape("lstm_step", g.shape(b[self.weights]), sh));
            }
        }
        let xh = g.concat(x, h_prev)?;
        let z = g.matmul(b[self.weights], xh)?;
        let z = g.add(z, b[self.bias])?;
        let gates = g.slice(z, 0, 3 * s)?;
        let gates = g.sigmoid(gates);
        let f = g.slice(gates, 0, s)?;
        let i = g.slice(gates, s, s)?;
        let o = g.slice(gates, 2 * s, s)?;
        let cand = g.slice(z, 3 * s, s)?;
        let cand = g.tanh(cand);
        let keep = g.mul(f, c_prev)?;
        let write = g.mul(i, cand)?;
        let c = g.add(keep, write)?;
        let tc = g.tanh(c);
        let h = g.mul(o, tc)?;
        Ok((h, c))
    }
}

/// Inverted dropout: in training, entries are zeroed with probability `rate`
/// and survivors scaled by `1/(1 − rate)`; evaluation is the identity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DropoutSpec {
    pub rate: f64,
}

impl DropoutSpec {
    pub fn new(rate: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::Precondition(format!("dropout rate {rate} not in [0, 1)")));
        }
        Ok(DropoutSpec { rate })
    }

    pub fn apply(&self, g: &mut Graph, x: Var, mode: &mut Mode<'_>) -> Result<Var> {
        match mode {
            Mode::Eval => Ok(x),
            Mode::Train(_) if self.rate == 0.0 => Ok(x),
            Mode::Train(rng) => {
                let n = g.shape(x).numel();
                let keep = 1.0 - self.rate;
                let mask = (0..n)
                    .map(|_| if rng.gen::<f64>() < self.rate { 0.0 } else { 1.0 / keep })
                    .collect();
                g.mask_mul(x, mask)
            }
        }
    }
}
