//! Forecasting architectures and their cost models.
//!
//! Every model maps an input window `X ∈ ℝ^{N×Tx}` to `Ty` predictions,
//! decoding autoregressively: step `j` consumes the model's own prediction
//! from step `j − 1` (0 for the first step), in training and evaluation
//! alike. Ground-truth targets are never an input to [`Model::forward`].

mod attention;
mod baselines;
mod cost;
mod darnn;
mod encoder;
mod stam;
mod stam_lite;
mod weights;

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use attention::Alignment;
pub use baselines::{EncDec, LstmAtt};
pub use cost::{flop_estimate, param_count};
pub use darnn::DaRnn;
pub use encoder::Encoder;
pub use stam::{Stam, StamState, StamStep};
pub use stam_lite::StamLite;
pub use weights::{load_weights, load_weights_as, save_weights, WEIGHT_FILE_VERSION};

use crate::autodiff::{Graph, Tensor, Var};
use crate::error::{Error, Result};
use crate::layers::{Bindings, Mode, ParamStore};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arch {
    Stam,
    StamLite,
    EncDec,
    LstmAtt,
    DaRnn,
}

impl Arch {
    pub const ALL: [Arch; 5] = [Arch::Stam, Arch::StamLite, Arch::EncDec, Arch::LstmAtt, Arch::DaRnn];

    pub fn name(self) -> &'static str {
        match self {
            Arch::Stam => "stam",
            Arch::StamLite => "stam_lite",
            Arch::EncDec => "enc_dec",
            Arch::LstmAtt => "lstm_att",
            Arch::DaRnn => "da_rnn",
        }
    }

    /// Whether the model produces attention weights worth reporting.
    pub fn has_attention(self) -> bool {
        self != Arch::EncDec
    }

    pub fn has_spatial_attention(self) -> bool {
        matches!(self, Arch::Stam | Arch::StamLite | Arch::DaRnn)
    }
}

impl fmt::Display for Arch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Arch {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Arch::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::UnsupportedArch {
                op: "parse",
                arch: s.to_string(),
            })
    }
}

fn default_dropout() -> f64 {
    0.2
}

/// Dimensions and architecture choice. `n_vars` is N, `input_len` Tx,
/// `output_len` Ty, `enc_dim` m, `dec_dim` p and `context_dim` q.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub arch: Arch,
    pub n_vars: usize,
    pub input_len: usize,
    pub output_len: usize,
    pub enc_dim: usize,
    pub dec_dim: usize,
    pub context_dim: usize,
    #[serde(default = "default_dropout")]
    pub dropout_rate: f64,
    #[serde(default)]
    pub seed: u64,
    /// One spatial embedder per variable instead of a shared one.
    #[serde(default)]
    pub per_variable_embedding: bool,
}

impl ModelConfig {
    /// Pollution-parity dimensions: m = p = 32, q = 4, dropout 0.2.
    pub fn new(arch: Arch, n_vars: usize, input_len: usize, output_len: usize) -> Self {
        ModelConfig {
            arch,
            n_vars,
            input_len,
            output_len,
            enc_dim: 32,
            dec_dim: 32,
            context_dim: 4,
            dropout_rate: default_dropout(),
            seed: 0,
            per_variable_embedding: false,
        }
    }

    pub fn with_dims(mut self, enc_dim: usize, dec_dim: usize, context_dim: usize) -> Self {
        self.enc_dim = enc_dim;
        self.dec_dim = dec_dim;
        self.context_dim = context_dim;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_dropout(mut self, rate: f64) -> Self {
        self.dropout_rate = rate;
        self
    }

    /// Field-level problems, prefixed with `prefix` (e.g. `"model."`).
    pub fn problems(&self, prefix: &str) -> Vec<String> {
        let mut out = Vec::new();
        for (name, v) in [
            ("n_vars", self.n_vars),
            ("input_len", self.input_len),
            ("output_len", self.output_len),
            ("enc_dim", self.enc_dim),
            ("dec_dim", self.dec_dim),
            ("context_dim", self.context_dim),
        ] {
            if v == 0 {
                out.push(format!("{prefix}{name} must be at least 1"));
            }
        }
        if self.context_dim > self.enc_dim {
            out.push(format!(
                "{prefix}context_dim ({}) must not exceed enc_dim ({})",
                self.context_dim, self.enc_dim
            ));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            out.push(format!("{prefix}dropout_rate must be in [0, 1), got {}", self.dropout_rate));
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.problems("");
        if p.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(p))
        }
    }
}

/// Attention weights captured while decoding one window.
///
/// `spatial` has one row of N weights per output step (per encoder step
/// for DA-RNN); `temporal` has one row of Tx weights per output step.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AttentionRecord {
    pub spatial: Vec<Vec<f64>>,
    pub temporal: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Forecast {
    pub y_hat: Vec<f64>,
    pub attention: AttentionRecord,
}

/// Graph-level result of one forward pass.
#[derive(Debug, Clone)]
pub struct Trace {
    pub y_hat: Var,
    pub attention: AttentionRecord,
}

/// Common surface of every architecture.
pub trait Network: Send + Sync {
    fn config(&self) -> &ModelConfig;
    fn store(&self) -> &ParamStore;
    fn store_mut(&mut self) -> &mut ParamStore;
    /// Builds the forward computation for one window on `g`.
    fn trace(&self, g: &mut Graph, b: &Bindings, x: &Tensor, mode: &mut Mode<'_>) -> Result<Trace>;
}

#[derive(Debug, Clone)]
pub enum Model {
    Stam(Stam),
    StamLite(StamLite),
    EncDec(EncDec),
    LstmAtt(LstmAtt),
    DaRnn(DaRnn),
}

impl Model {
    /// Builds and initializes a model from `config.seed`.
    pub fn new(config: ModelConfig) -> Result<Model> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        Ok(match config.arch {
            Arch::Stam => Model::Stam(Stam::new(config, &mut rng)?),
            Arch::StamLite => Model::StamLite(StamLite::new(config, &mut rng)?),
            Arch::EncDec => Model::EncDec(EncDec::new(config, &mut rng)?),
            Arch::LstmAtt => Model::LstmAtt(LstmAtt::new(config, &mut rng)?),
            Arch::DaRnn => Model::DaRnn(DaRnn::new(config, &mut rng)?),
        })
    }

    pub fn net(&self) -> &dyn Network {
        match self {
            Model::Stam(m) => m,
            Model::StamLite(m) => m,
            Model::EncDec(m) => m,
            Model::LstmAtt(m) => m,
            Model::DaRnn(m) => m,
        }
    }

    pub fn net_mut(&mut self) -> &mut dyn Network {
        match self {
            Model::Stam(m) => m,
            Model::StamLite(m) => m,
            Model::EncDec(m) => m,
            Model::LstmAtt(m) => m,
            Model::DaRnn(m) => m,
        }
    }

    pub fn arch(&self) -> Arch {
        self.config().arch
    }

    pub fn config(&self) -> &ModelConfig {
        self.net().config()
    }

    pub fn store(&self) -> &ParamStore {
        self.net().store()
    }

    pub fn store_mut(&mut self) -> &mut ParamStore {
        self.net_mut().store_mut()
    }

    pub fn param_total(&self) -> usize {
        self.store().total_count()
    }

    pub fn check_input(&self, x: &Tensor) -> Result<()> {
        let c = self.config();
        if x.shape().dims() != [c.n_vars, c.input_len] {
            return Err(Error::SchemaMismatch(format!(
                "model expects a {}×{} input window, got {}",
                c.n_vars,
                c.input_len,
                x.shape()
            )));
        }
        if !x.is_finite() {
            return Err(Error::Precondition("input window has non-finite entries".into()));
        }
        Ok(())
    }

    pub fn trace(&self, g: &mut Graph, b: &Bindings, x: &Tensor, mode: &mut Mode<'_>) -> Result<Trace> {
        self.check_input(x)?;
        self.net().trace(g, b, x, mode)
    }

    /// Runs one window; returns predictions and the attention record.
    pub fn forward(&self, x: &Tensor, mode: &mut Mode<'_>) -> Result<Forecast> {
        let mut g = Graph::new();
        let b = self.store().bind(&mut g);
        let trace = self.trace(&mut g, &b, x, mode)?;
        Ok(Forecast {
            y_hat: g.value(trace.y_hat).to_vec(),
            attention: trace.attention,
        })
    }

    pub fn predict(&self, x: &Tensor) -> Result<Forecast> {
        self.forward(x, &mut Mode::Eval)
    }

    /// Encoder hidden states `h_1 … h_Tx` as a Tx×m matrix, in eval mode.
    pub fn encode(&self, x: &Tensor) -> Result<Tensor> {
        self.check_input(x)?;
        let mut g = Graph::new();
        let b = self.store().bind(&mut g);
        let rows = match self {
            Model::Stam(m) => encode_with(&m.encoder, &mut g, &b, x)?,
            Model::StamLite(m) => encode_with(&m.encoder, &mut g, &b, x)?,
            Model::EncDec(m) => encode_with(&m.encoder, &mut g, &b, x)?,
            Model::LstmAtt(m) => encode_with(&m.encoder, &mut g, &b, x)?,
            Model::DaRnn(m) => m.hidden_states(&mut g, &b, x)?,
        };
        let h = g.stack_rows(&rows)?;
        Ok(g.tensor(h))
    }

    /// Spatial embeddings `D` (N×m). Only STAM and STAM-Lite embed variables.
    pub fn spatial_embed(&self, x: &Tensor) -> Result<Tensor> {
        self.check_input(x)?;
        let embedders = match self {
            Model::Stam(m) => &m.embedders,
            Model::StamLite(m) => &m.embedders,
            other => {
                return Err(Error::UnsupportedArch {
                    op: "spatial_embed",
                    arch: other.arch().to_string(),
                })
            }
        };
        let mut g = Graph::new();
        let b = self.store().bind(&mut g);
        let d = stam::embed(embedders, &mut g, &b, x)?;
        Ok(g.tensor(d))
    }
}

fn encode_with(enc: &Encoder, g: &mut Graph, b: &Bindings, x: &Tensor) -> Result<Vec<Var>> {
    let steps = time_steps(g, x)?;
    enc.encode(g, b, &steps, &mut Mode::Eval)
}

/// Constant leaves for the columns `x_t` (length N) of an N×Tx window.
pub(crate) fn time_steps(g: &mut Graph, x: &Tensor) -> Result<Vec<Var>> {
    let (n, tx) = (x.shape().dims()[0], x.shape().dims()[1]);
    let v = x.values();
    (0..tx)
        .map(|t| g.constant_vec((0..n).map(|i| v[i * tx + t]).collect()))
        .collect()
}

/// Constant leaves for the rows `x^i` (length Tx) of an N×Tx window.
pub(crate) fn variable_series(g: &mut Graph, x: &Tensor) -> Result<Vec<Var>> {
    let tx = x.shape().dims()[1];
    x.values()
        .chunks(tx)
        .map(|row| g.constant_vec(row.to_vec()))
        .collect()
}

pub(crate) fn check_step(g: &Graph, y: Var, step: usize) -> Result<()> {
    if g.value(y).iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::DivergedModel { step })
    }
}

#[cfg(test)]
mod tests;
