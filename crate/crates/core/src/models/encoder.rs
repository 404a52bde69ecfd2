use rand::RngCore;

use crate::autodiff::{Graph, Var};
use crate::error::Result;
use crate::layers::{Bindings, DropoutSpec, LstmCell, Mode, ParamStore};

/// Two stacked LSTM layers read in time order. Dropout is applied to each
/// layer's output sequence; the recurrent state itself is never dropped.
#[derive(Debug, Clone)]
pub struct Encoder {
    pub layer1: LstmCell,
    pub layer2: LstmCell,
    pub dropout: DropoutSpec,
}

impl Encoder {
    pub fn new(
        store: &mut ParamStore,
        n_vars: usize,
        dim: usize,
        dropout: DropoutSpec,
        rng: &mut dyn RngCore,
    ) -> Result<Self> {
        Ok(Encoder {
            layer1: LstmCell::new(store, "encoder.layer1", n_vars, dim, rng)?,
            layer2: LstmCell::new(store, "encoder.layer2", dim, dim, rng)?,
            dropout,
        })
    }

    /// Hidden states `h_1 … h_Tx` of the second layer. `h_t` depends only on
    /// `steps[..=t]`.
    pub fn encode(&self, g: &mut Graph, b: &Bindings, steps: &[Var], mode: &mut Mode<'_>) -> Result<Vec<Var>> {
        let first = run_layer(&self.layer1, g, b, steps)?;
        let first = first
            .into_iter()
            .map(|h| self.dropout.apply(g, h, mode))
            .collect::<Result<Vec<_>>>()?;
        let second = run_layer(&self.layer2, g, b, &first)?;
        second
            .into_iter()
            .map(|h| self.dropout.apply(g, h, mode))
            .collect()
    }
}

/// Runs one LSTM over `inputs` from zero state; returns the hidden sequence.
pub(crate) fn run_layer(cell: &LstmCell, g: &mut Graph, b: &Bindings, inputs: &[Var]) -> Result<Vec<Var>> {
    let mut h = g.zeros(cell.state_dim)?;
    let mut c = g.zeros(cell.state_dim)?;
    let mut out = Vec::with_capacity(inputs.len());
    for &x in inputs {
        (h, c) = cell.step(g, b, h, c, x)?;
        out.push(h);
    }
    Ok(out)
}
