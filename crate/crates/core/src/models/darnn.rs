use rand::{Rng, RngCore};

use super::{check_step, time_steps, variable_series, AttentionRecord, ModelConfig, Network, Trace};
use crate::autodiff::{Graph, Shape, Tensor, Var};
use crate::error::Result;
use crate::layers::{Activation, Bindings, DenseLayer, DropoutSpec, LstmCell, Mode, ParamId, ParamStore};

/// Dual-stage attention RNN baseline.
///
/// Input attention scores every variable's *whole* window series against the
/// previous encoder state, `e^i_t = v_eᵀ tanh(W_e[h_{t−1}; c_{t−1}] + U_e x^i)`,
/// and feeds `x̂_t = β_t ⊙ x_t` to a single encoder LSTM. Because `x^i` spans
/// the full window, `x̂_t` depends on inputs after `t`. The decoder uses tanh
/// temporal attention over the encoder states.
#[derive(Debug, Clone)]
pub struct DaRnn {
    pub(crate) config: ModelConfig,
    pub(crate) store: ParamStore,
    /// `W_e`: Tx × 2m
    pub input_state: ParamId,
    /// `U_e`: Tx × Tx
    pub input_series: ParamId,
    /// `v_e`: 1 × Tx
    pub input_score: ParamId,
    pub encoder: LstmCell,
    /// `W_d`: m × 2p
    pub temporal_state: ParamId,
    /// `U_d`: m × m
    pub temporal_keys: ParamId,
    /// `v_d`: 1 × m
    pub temporal_score: ParamId,
    /// `ỹ = w̃ᵀ[ŷ_{j−1}; s_j] + b̃`
    pub decoder_input: DenseLayer,
    pub decoder: LstmCell,
    /// `W_y[h'_j; s_j] + b_w`
    pub out_hidden: DenseLayer,
    /// `v_yᵀ(·) + b_v`
    pub out_head: DenseLayer,
    pub dropout: DropoutSpec,
}

fn uniform(store: &mut ParamStore, name: &str, rows: usize, cols: usize, rng: &mut dyn RngCore) -> Result<ParamId> {
    let bound = 1.0 / (cols as f64).sqrt();
    let v = (0..rows * cols).map(|_| rng.gen_range(-bound..=bound)).collect();
    Ok(store.add(name, Tensor::new(Shape::new(vec![rows, cols])?, v)?))
}

impl DaRnn {
    pub fn new(config: ModelConfig, rng: &mut dyn RngCore) -> Result<Self> {
        let (n, tx, m, p) = (config.n_vars, config.input_len, config.enc_dim, config.dec_dim);
        let dropout = DropoutSpec::new(config.dropout_rate)?;
        let mut store = ParamStore::new();
        let input_state = uniform(&mut store, "input_attention.w_e", tx, 2 * m, rng)?;
        let input_series = uniform(&mut store, "input_attention.u_e", tx, tx, rng)?;
        let input_score = uniform(&mut store, "input_attention.v_e", 1, tx, rng)?;
        let encoder = LstmCell::new(&mut store, "encoder", n, m, rng)?;
        let temporal_state = uniform(&mut store, "temporal_attention.w_d", m, 2 * p, rng)?;
        let temporal_keys = uniform(&mut store, "temporal_attention.u_d", m, m, rng)?;
        let temporal_score = uniform(&mut store, "temporal_attention.v_d", 1, m, rng)?;
        let decoder_input = DenseLayer::new(&mut store, "decoder_input", m + 1, 1, Activation::Identity, rng)?;
        let decoder = LstmCell::new(&mut store, "decoder", 1, p, rng)?;
        let out_hidden = DenseLayer::new(&mut store, "out_hidden", p + m, p, Activation::Identity, rng)?;
        let out_head = DenseLayer::new(&mut store, "out_head", p, 1, Activation::Identity, rng)?;
        Ok(DaRnn {
            config,
            store,
            input_state,
            input_series,
            input_score,
            encoder,
            temporal_state,
            temporal_keys,
            temporal_score,
            decoder_input,
            decoder,
            out_hidden,
            out_head,
            dropout,
        })
    }

    /// Runs the input-attention encoder. Returns the hidden states, the
    /// weighted inputs `x̂_t` and the weights `β_t`, one entry per step.
    fn encode(
        &self,
        g: &mut Graph,
        b: &Bindings,
        x: &Tensor,
        mode: &mut Mode<'_>,
    ) -> Result<(Vec<Var>, Vec<Var>, Vec<Var>)> {
        let m = self.config.enc_dim;
        let series = variable_series(g, x)?;
        let steps = time_steps(g, x)?;
        let x_mat = g.stack_rows(&series)?;
        // row i: U_e x^i, fixed over t
        let u_t = g.transpose(b[self.input_series])?;
        let series_proj = g.matmul(x_mat, u_t)?;
        let v_e = g.reshape(b[self.input_score], Shape::new(vec![self.config.input_len])?)?;

        let mut h = g.zeros(m)?;
        let mut c = g.zeros(m)?;
        let (mut hidden, mut weighted, mut betas) = (Vec::new(), Vec::new(), Vec::new());
        for &x_t in &steps {
            let hc = g.concat(h, c)?;
            let state_proj = g.matmul(b[self.input_state], hc)?;
            let pre = g.add_row(series_proj, state_proj)?;
            let act = g.tanh(pre);
            let e = g.matmul(act, v_e)?;
            let beta = g.softmax(e)?;
            let x_hat = g.mul(beta, x_t)?;
            (h, c) = self.encoder.step(g, b, h, c, x_hat)?;
            hidden.push(self.dropout.apply(g, h, mode)?);
            weighted.push(x_hat);
            betas.push(beta);
        }
        Ok((hidden, weighted, betas))
    }

    pub(crate) fn hidden_states(&self, g: &mut Graph, b: &Bindings, x: &Tensor) -> Result<Vec<Var>> {
        Ok(self.encode(g, b, x, &mut Mode::Eval)?.0)
    }

    /// The weighted inputs as an N×Tx matrix (column t is `x̂_t`) and the
    /// input-attention weights as Tx rows of N, evaluated in eval mode.
    pub fn weighted_input(&self, x: &Tensor) -> Result<(Tensor, Vec<Vec<f64>>)> {
        let (n, tx) = (self.config.n_vars, self.config.input_len);
        let mut g = Graph::new();
        let b = self.store.bind(&mut g);
        let (_, weighted, betas) = self.encode(&mut g, &b, x, &mut Mode::Eval)?;
        let mut out = vec![0.0; n * tx];
        for (t, w) in weighted.iter().enumerate() {
            for (i, v) in g.value(*w).iter().enumerate() {
                out[i * tx + t] = *v;
            }
        }
        let betas = betas.iter().map(|v| g.value(*v).to_vec()).collect();
        Ok((Tensor::matrix(n, tx, out)?, betas))
    }
}

impl Network for DaRnn {
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
        let (hidden, _, betas) = self.encode(g, b, x, mode)?;
        let mut attention = AttentionRecord {
            spatial: betas.iter().map(|v| g.value(*v).to_vec()).collect(),
            temporal: Vec::new(),
        };
        let h = g.stack_rows(&hidden)?;
        let h_t = g.transpose(h)?;
        let u_d = g.transpose(b[self.temporal_keys])?;
        let key_proj = g.matmul(h, u_d)?;
        let v_d = g.reshape(b[self.temporal_score], Shape::new(vec![self.config.enc_dim])?)?;

        let mut hd = g.zeros(p)?;
        let mut cd = g.zeros(p)?;
        let mut y_prev = g.zeros(1)?;
        let mut ys = Vec::with_capacity(self.config.output_len);
        for j in 0..self.config.output_len {
            let hc = g.concat(hd, cd)?;
            let q = g.matmul(b[self.temporal_state], hc)?;
            let pre = g.add_row(key_proj, q)?;
            let act = g.tanh(pre);
            let l = g.matmul(act, v_d)?;
            let alpha = g.softmax(l)?;
            let s = g.matmul(h_t, alpha)?;
            let inp = g.concat(y_prev, s)?;
            let y_tilde = self.decoder_input.forward(g, b, inp)?;
            (hd, cd) = self.decoder.step(g, b, hd, cd, y_tilde)?;
            let out = self.dropout.apply(g, hd, mode)?;
            let hs = g.concat(out, s)?;
            let z = self.out_hidden.forward(g, b, hs)?;
            let y = self.out_head.forward(g, b, z)?;
            check_step(g, y, j + 1)?;
            attention.temporal.push(g.value(alpha).to_vec());
            y_prev = y;
            ys.push(y);
        }
        Ok(Trace {
            y_hat: g.concat_all(&ys)?,
            attention,
        })
    }
}
