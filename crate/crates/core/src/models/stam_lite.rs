use rand::RngCore;

use super::attention::Alignment;
use super::encoder::Encoder;
use super::stam::{build_embedders, embed};
use super::{check_step, time_steps, AttentionRecord, ModelConfig, Network, Trace};
use crate::autodiff::{Graph, Tensor};
use crate::error::Result;
use crate::layers::{Activation, Bindings, DenseLayer, DropoutSpec, LstmCell, Mode, ParamStore};

/// Single-decoder variant: both attentions are queried with the same
/// `h'_{j−1}`, the contexts are concatenated and reduced together, and one
/// LSTM drives the head.
#[derive(Debug, Clone)]
pub struct StamLite {
    pub(crate) config: ModelConfig,
    pub(crate) store: ParamStore,
    pub embedders: Vec<DenseLayer>,
    pub encoder: Encoder,
    pub spatial_align: Alignment,
    pub temporal_align: Alignment,
    pub reduce: DenseLayer,
    pub decoder: LstmCell,
    pub head: DenseLayer,
    pub dropout: DropoutSpec,
}

impl StamLite {
    pub fn new(config: ModelConfig, rng: &mut dyn RngCore) -> Result<Self> {
        let (n, m, p, q) = (config.n_vars, config.enc_dim, config.dec_dim, config.context_dim);
        let dropout = DropoutSpec::new(config.dropout_rate)?;
        let mut store = ParamStore::new();
        let embedders = build_embedders(&mut store, &config, rng)?;
        let encoder = Encoder::new(&mut store, n, m, dropout, rng)?;
        let spatial_align = Alignment::new(&mut store, "spatial_align", p, m, rng)?;
        let temporal_align = Alignment::new(&mut store, "temporal_align", p, m, rng)?;
        let reduce = DenseLayer::new(&mut store, "reduce_gs", 2 * m, q, Activation::Relu, rng)?;
        let decoder = LstmCell::new(&mut store, "decoder", q + 1, p, rng)?;
        let head = DenseLayer::new(&mut store, "head", p, 1, Activation::Identity, rng)?;
        Ok(StamLite {
            config,
            store,
            embedders,
            encoder,
            spatial_align,
            temporal_align,
            reduce,
            decoder,
            head,
            dropout,
        })
    }
}

impl Network for StamLite {
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

        let mut hd = g.zeros(p)?;
        let mut cd = g.zeros(p)?;
        let mut y_prev = g.zeros(1)?;
        let mut ys = Vec::with_capacity(self.config.output_len);
        let mut attention = AttentionRecord::default();
        for j in 0..self.config.output_len {
            let (beta, g_ctx) = self.spatial_align.attend(g, &sk, hd)?;
            let (alpha, s_ctx) = self.temporal_align.attend(g, &tk, hd)?;
            let both = g.concat(g_ctx, s_ctx)?;
            let r = self.reduce.forward(g, b, both)?;
            let r = g.concat(r, y_prev)?;
            (hd, cd) = self.decoder.step(g, b, hd, cd, r)?;
            let out = self.dropout.apply(g, hd, mode)?;
            let y = self.head.forward(g, b, out)?;
            check_step(g, y, j + 1)?;
            attention.spatial.push(g.value(beta).to_vec());
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
