use rand::RngCore;

use super::attention::{Alignment, PreparedKeys};
use super::encoder::Encoder;
use super::{check_step, time_steps, variable_series, AttentionRecord, ModelConfig, Network, Trace};
use crate::autodiff::{Graph, Tensor, Var};
use crate::error::{Error, Result};
use crate::layers::{Activation, Bindings, DenseLayer, DropoutSpec, LstmCell, Mode, ParamStore};

/// Spatiotemporal attention model with two decoder LSTMs.
///
/// At output step `j` the spatial branch attends over variable embeddings
/// `d^i` with the query `h'_{G,j−1}` and the temporal branch attends over
/// encoder states `h_t` with `h'_{S,j−1}`. Each context is reduced to `q`
/// dimensions, joined with `ŷ_{j−1}` and fed to its own LSTM; the head reads
/// `[h'_{G,j}; h'_{S,j}]`.
#[derive(Debug, Clone)]
pub struct Stam {
    pub(crate) config: ModelConfig,
    pub(crate) store: ParamStore,
    pub embedders: Vec<DenseLayer>,
    pub encoder: Encoder,
    pub spatial_align: Alignment,
    pub temporal_align: Alignment,
    pub reduce_g: DenseLayer,
    pub reduce_s: DenseLayer,
    pub decoder_g: LstmCell,
    pub decoder_s: LstmCell,
    pub head: DenseLayer,
    pub dropout: DropoutSpec,
}

/// `(h, c)` of both decoders.
#[derive(Debug, Clone, PartialEq)]
pub struct StamState {
    pub h_g: Vec<f64>,
    pub c_g: Vec<f64>,
    pub h_s: Vec<f64>,
    pub c_s: Vec<f64>,
}

impl StamState {
    pub fn zeros(p: usize) -> Self {
        StamState {
            h_g: vec![0.0; p],
            c_g: vec![0.0; p],
            h_s: vec![0.0; p],
            c_s: vec![0.0; p],
        }
    }
}

/// Output of a single decode step in eval mode.
#[derive(Debug, Clone, PartialEq)]
pub struct StamStep {
    pub y_hat: f64,
    pub state: StamState,
    pub beta: Vec<f64>,
    pub alpha: Vec<f64>,
}

struct StepVars {
    h_g: Var,
    c_g: Var,
    h_s: Var,
    c_s: Var,
}

impl Stam {
    pub fn new(config: ModelConfig, rng: &mut dyn RngCore) -> Result<Self> {
        let (n, tx, m, p, q) = (
            config.n_vars,
            config.input_len,
            config.enc_dim,
            config.dec_dim,
            config.context_dim,
        );
        let dropout = DropoutSpec::new(config.dropout_rate)?;
        let mut store = ParamStore::new();
        let embedders = build_embedders(&mut store, &config, rng)?;
        let encoder = Encoder::new(&mut store, n, m, dropout, rng)?;
        let spatial_align = Alignment::new(&mut store, "spatial_align", p, m, rng)?;
        let temporal_align = Alignment::new(&mut store, "temporal_align", p, m, rng)?;
        let reduce_g = DenseLayer::new(&mut store, "reduce_g", m, q, Activation::Relu, rng)?;
        let reduce_s = DenseLayer::new(&mut store, "reduce_s", m, q, Activation::Relu, rng)?;
        let decoder_g = LstmCell::new(&mut store, "decoder_g", q + 1, p, rng)?;
        let decoder_s = LstmCell::new(&mut store, "decoder_s", q + 1, p, rng)?;
        let head = DenseLayer::new(&mut store, "head", 2 * p, 1, Activation::Identity, rng)?;
        debug_assert!(tx > 0);
        Ok(Stam {
            config,
            store,
            embedders,
            encoder,
            spatial_align,
            temporal_align,
            reduce_g,
            reduce_s,
            decoder_g,
            decoder_s,
            head,
            dropout,
        })
    }

    fn decode_step(
        &self,
        g: &mut Graph,
        b: &Bindings,
        st: &StepVars,
        spatial_keys: &PreparedKeys,
        temporal_keys: &PreparedKeys,
        y_prev: Var,
        mode: &mut Mode<'_>,
    ) -> Result<(Var, StepVars, Var, Var)> {
        let (beta, g_ctx) = self.spatial_align.attend(g, spatial_keys, st.h_g)?;
        let (alpha, s_ctx) = self.temporal_align.attend(g, temporal_keys, st.h_s)?;
        let r_g = self.reduce_g.forward(g, b, g_ctx)?;
        let r_g = g.concat(r_g, y_prev)?;
        let r_s = self.reduce_s.forward(g, b, s_ctx)?;
        let r_s = g.concat(r_s, y_prev)?;
        let (h_g, c_g) = self.decoder_g.step(g, b, st.h_g, st.c_g, r_g)?;
        let (h_s, c_s) = self.decoder_s.step(g, b, st.h_s, st.c_s, r_s)?;
        let out_g = self.dropout.apply(g, h_g, mode)?;
        let out_s = self.dropout.apply(g, h_s, mode)?;
        let joined = g.concat(out_g, out_s)?;
        let y = self.head.forward(g, b, joined)?;
        Ok((y, StepVars { h_g, c_g, h_s, c_s }, beta, alpha))
    }

    /// Evaluates one decode step outside a full forward pass. `d` is the
    /// N×m embedding matrix and `h` the Tx×m encoder state matrix.
    pub fn decode_step_values(&self, state: &StamState, d: &Tensor, h: &Tensor, y_prev: f64) -> Result<StamStep> {
        let mut g = Graph::new();
        let b = self.store.bind(&mut g);
        let dv = g.constant(d.clone());
        let hv = g.constant(h.clone());
        let sk = self.spatial_align.prepare(&mut g, &b, dv)?;
        let tk = self.temporal_align.prepare(&mut g, &b, hv)?;
        let st = StepVars {
            h_g: g.constant_vec(state.h_g.clone())?,
            c_g: g.constant_vec(state.c_g.clone())?,
            h_s: g.constant_vec(state.h_s.clone())?,
            c_s: g.constant_vec(state.c_s.clone())?,
        };
        let y_prev = g.constant_vec(vec![y_prev])?;
        let (y, next, beta, alpha) = self.decode_step(&mut g, &b, &st, &sk, &tk, y_prev, &mut Mode::Eval)?;
        Ok(StamStep {
            y_hat: g.value(y)[0],
            state: StamState {
                h_g: g.value(next.h_g).to_vec(),
                c_g: g.value(next.c_g).to_vec(),
                h_s: g.value(next.h_s).to_vec(),
                c_s: g.value(next.c_s).to_vec(),
            },
            beta: g.value(beta).to_vec(),
            alpha: g.value(alpha).to_vec(),
        })
    }

    /// Spatial attention weights and context for one query, in eval mode.
    pub fn spatial_attention(&self, h_prev: &[f64], d: &Tensor) -> Result<(Vec<f64>, Vec<f64>)> {
        attend_values(&self.store, &self.spatial_align, h_prev, d)
    }

    /// Temporal attention weights and context for one query, in eval mode.
    pub fn temporal_attention(&self, h_prev: &[f64], h: &Tensor) -> Result<(Vec<f64>, Vec<f64>)> {
        attend_values(&self.store, &self.temporal_align, h_prev, h)
    }
}

pub(crate) fn attend_values(
    store: &ParamStore,
    align: &Alignment,
    query: &[f64],
    keys: &Tensor,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if query.len() != align.query_dim || keys.shape().rank() != 2 || keys.shape().dims()[1] != align.key_dim {
        return Err(Error::Precondition(format!(
            "attention expects a {}-vector query and n×{} keys, got {} and {}",
            align.query_dim,
            align.key_dim,
            query.len(),
            keys.shape()
        )));
    }
    let mut g = Graph::new();
    let b = store.bind(&mut g);
    let kv = g.constant(keys.clone());
    let prepared = align.prepare(&mut g, &b, kv)?;
    let qv = g.constant_vec(query.to_vec())?;
    let (w, ctx) = align.attend(&mut g, &prepared, qv)?;
    Ok((g.value(w).to_vec(), g.value(ctx).to_vec()))
}

pub(crate) fn build_embedders(
    store: &mut ParamStore,
    config: &ModelConfig,
    rng: &mut dyn RngCore,
) -> Result<Vec<DenseLayer>> {
    let (tx, m) = (config.input_len, config.enc_dim);
    if config.per_variable_embedding {
        (0..config.n_vars)
            .map(|i| DenseLayer::new(store, &format!("spatial_embedder.{i}"), tx, m, Activation::Relu, rng))
            .collect()
    } else {
        Ok(vec![DenseLayer::new(store, "spatial_embedder", tx, m, Activation::Relu, rng)?])
    }
}

/// `D`: row `i` is the embedder applied to the series of variable `i`.
pub(crate) fn embed(embedders: &[DenseLayer], g: &mut Graph, b: &Bindings, x: &Tensor) -> Result<Var> {
    let rows = variable_series(g, x)?;
    let d = rows
        .into_iter()
        .enumerate()
        .map(|(i, r)| embedders[if embedders.len() == 1 { 0 } else { i }].forward(g, b, r))
        .collect::<Result<Vec<_>>>()?;
    g.stack_rows(&d)
}

impl Network for Stam {
    fn config(&self) -> &ModelConfig {
        &self.config
    }

    fn store(&self) -> &ParamStore {
        &self.store
    }

    fn store_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    fn trace(&self, g: &mut Graph, b: &Bindings, x: &Tensor, mode: &mut Mode<'_>) -> Result<Trace> {
        let p = self.config.dec_dim;
        let d = embed(&self.embedders, g, b, x)?;
        let steps = time_steps(g, x)?;
        let h_rows = self.encoder.encode(g, b, &steps, mode)?;
        let h = g.stack_rows(&h_rows)?;
        let sk = self.spatial_align.prepare(g, b, d)?;
        let tk = self.temporal_align.prepare(g, b, h)?;

        let mut st = StepVars {
            h_g: g.zeros(p)?,
            c_g: g.zeros(p)?,
            h_s: g.zeros(p)?,
            c_s: g.zeros(p)?,
        };
        let mut y_prev = g.zeros(1)?;
        let mut ys = Vec::with_capacity(self.config.output_len);
        let mut attention = AttentionRecord::default();
        for j in 0..self.config.output_len {
            let (y, next, beta, alpha) = self.decode_step(g, b, &st, &sk, &tk, y_prev, mode)?;
            check_step(g, y, j + 1)?;
            attention.spatial.push(g.value(beta).to_vec());
            attention.temporal.push(g.value(alpha).to_vec());
            st = next;
            y_prev = y;
            ys.push(y);
        }
        Ok(Trace {
            y_hat: g.concat_all(&ys)?,
            attention,
        })
    }
}
