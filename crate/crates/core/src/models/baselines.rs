use rand::RngCore;

use super::attention::Alignment;
use super::encoder::Encoder;
use super::{check_step, time_steps, AttentionRecord, ModelConfig, Network, Trace};
use crate::autodiff::{Graph, Tensor};
use crate::error::Result;
use crate::layers::{Activation, Bindings, DenseLayer, DropoutSpec, LstmCell, Mode, ParamStore};

/// Encoder-decoder without attention. The last encoder state is fed to the
/// decoder at every step alongside the previous prediction.
#[derive(Debug, Clone)]
pub struct EncDec {
    pub(crate) config: ModelConfig,
    pub(crate) store: ParamStore,
    pub encoder: Encoder,
    pub decoder: LstmCell,
    pub head: DenseLayer,
    pub dropout: DropoutSpec,
}

impl EncDec {
    pub fn new(config: ModelConfig, rng: &mut dyn RngCore) -> Result<Self> {
        let (n, m, p) = (config.n_vars, config.enc_dim, config.dec_dim);
        let dropout = DropoutSpec::new(config.dropout_rate)?;
        let mut store = ParamStore::new();
        let encoder = Encoder::new(&mut store, n, m, dropout, rng)?;
        let decoder = LstmCell::new(&mut store, "decoder", m + 1, p, rng)?;
        let head = DenseLayer::new(&mut store, "head", p, 1, Activation::Identity, rng)?;
        Ok(EncDec {
            config,
            store,
            encoder,
            decoder,
            head,
            dropout,
        })
    }
}

impl Network for EncDec {
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
        let steps = time_steps(g, x)?;
        let h_rows = self.encoder.encode(g, b, &steps, mode)?;
        let context = *h_rows.last().expect("input_len >= 1");

        let mut hd = g.zeros(p)?;
        let mut cd = g.zeros(p)?;
        let mut y_prev = g.zeros(1)?;
        let mut ys = Vec::with_capacity(self.config.output_len);
        for j in 0..self.config.output_len {
            let input = g.concat(context, y_prev)?;
            (hd, cd) = self.decoder.step(g, b, hd, cd, input)?;
            let out = self.dropout.apply(g, hd, mode)?;
            let y = self.head.forward(g, b, out)?;
            check_step(g, y, j + 1)?;
            y_prev = y;
            ys.push(y);
        }
        Ok(Trace {
            y_hat: g.concat_all(&ys)?,
            attention: AttentionRecord::default(),
        })
    }
}

/// Encoder-decoder with temporal attention only, using the same ReLU
/// alignment and context reduction as the STAM temporal branch.
#[derive(Debug, Clone)]
pub struct LstmAtt {
    pub(crate) config: ModelConfig,
    pub(crate) store: ParamStore,
    pub encoder: Encoder,
    pub temporal_align: Alignment,
    pub reduce: DenseLayer,
    pub decoder: LstmCell,
    pub head: DenseLayer,
    pub dropout: DropoutSpec,
}

impl LstmAtt {
    pub fn new(config: ModelConfig, rng: &mut dyn RngCore) -> Result<Self> {
        let (n, m, p, q) = (config.n_vars, config.enc_dim, config.dec_dim, config.context_dim);
        let dropout = DropoutSpec::new(config.dropout_rate)?;
        let mut store = ParamStore::new();
        let encoder = Encoder::new(&mut store, n, m, dropout, rng)?;
        let temporal_align = Alignment::new(&mut store, "temporal_align", p, m, rng)?;
        let reduce = DenseLayer::new(&mut store, "reduce_s", m, q, Activation::Relu, rng)?;
        let decoder = LstmCell::new(&mut store, "decoder", q + 1, p, rng)?;
        let head = DenseLayer::new(&mut store, "head", p, 1, Activation::Identity, rng)?;
        Ok(LstmAtt {
            config,
            store,
            encoder,
            temporal_align,
            reduce,
            decoder,
            head,
            dropout,
        })
    }
}

impl Network for LstmAtt {
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
        let steps = time_steps(g, x)?;
        let h_rows = self.encoder.encode(g, b, &steps, mode)?;
        let h = g.stack_rows(&h_rows)?;
        let tk = self.temporal_align.prepare(g, b, h)?;

        let mut hd = g.zeros(p)?;
        let mut cd = g.zeros(p)?;
        let mut y_prev = g.zeros(1)?;
        let mut ys = Vec::with_capacity(self.config.output_len);
        let mut attention = AttentionRecord::default();
        for j in 0..self.config.output_len {
            let (alpha, s_ctx) = self.temporal_align.attend(g, &tk, hd)?;
            let r = self.reduce.forward(g, b, s_ctx)?;
            let r = g.concat(r, y_prev)?;
            (hd, cd) = self.decoder.step(g, b, hd, cd, r)?;
            let out = self.dropout.apply(g, hd, mode)?;
            let y = self.head.forward(g, b, out)?;
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
