use rand::RngCore;

use crate::autodiff::{Graph, Shape, Var};
use crate::error::Result;
use crate::layers::{Activation, Bindings, DenseLayer, ParamStore};

/// ReLU alignment model scoring `[query; key]` pairs:
/// `e_k = relu(wᵀ[query; key_k] + b)`, weights `softmax(e)`, and the context
/// vector `Σ_k weight_k · key_k`.
///
/// The weight row is split into its query and key halves so the key half is
/// applied to all keys with one product per window instead of per step.
#[derive(Debug, Clone)]
pub struct Alignment {
    pub layer: DenseLayer,
    pub query_dim: usize,
    pub key_dim: usize,
}

/// Per-window quantities that do not depend on the decoder step.
pub(crate) struct PreparedKeys {
    keys_t: Var,
    key_scores: Var,
    w_query: Var,
    bias: Var,
}

impl Alignment {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        query_dim: usize,
        key_dim: usize,
        rng: &mut dyn RngCore,
    ) -> Result<Self> {
        let layer = DenseLayer::new(store, name, query_dim + key_dim, 1, Activation::Relu, rng)?;
        Ok(Alignment {
            layer,
            query_dim,
            key_dim,
        })
    }

    /// `keys` is the n×key_dim matrix whose rows are attended over.
    pub(crate) fn prepare(&self, g: &mut Graph, b: &Bindings, keys: Var) -> Result<PreparedKeys> {
        let (p, m) = (self.query_dim, self.key_dim);
        let w = b[self.layer.weight];
        let w_query = g.slice(w, 0, p)?;
        let w_query = g.reshape(w_query, Shape::new(vec![1, p])?)?;
        let w_key = g.slice(w, p, m)?;
        let key_scores = g.matmul(keys, w_key)?;
        let keys_t = g.transpose(keys)?;
        Ok(PreparedKeys {
            keys_t,
            key_scores,
            w_query,
            bias: b[self.layer.bias],
        })
    }

    /// Returns `(weights, context)` for one decoder query.
    pub(crate) fn attend(&self, g: &mut Graph, keys: &PreparedKeys, query: Var) -> Result<(Var, Var)> {
        let q = g.matmul(keys.w_query, query)?;
        let q = g.add(q, keys.bias)?;
        let e = g.add(keys.key_scores, q)?;
        let e = g.relu(e);
        let weights = g.softmax(e)?;
        let context = g.matmul(keys.keys_t, weights)?;
        Ok((weights, context))
    }
}
