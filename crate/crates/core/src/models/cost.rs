use super::{Arch, ModelConfig};
use crate::error::{Error, Result};
use crate::layers::{DenseLayer, LstmCell};

fn lstm(i: usize, s: usize) -> usize {
    LstmCell::param_count(i, s)
}

fn dense(i: usize, o: usize) -> usize {
    DenseLayer::param_count(i, o)
}

/// Exact trainable-parameter count of the architecture `config` describes,
/// computed from layer formulas alone. Independent of `output_len`.
pub fn param_count(config: &ModelConfig) -> usize {
    let (n, tx, m, p, q) = (
        config.n_vars,
        config.input_len,
        config.enc_dim,
        config.dec_dim,
        config.context_dim,
    );
    let embed = if config.per_variable_embedding {
        n * dense(tx, m)
    } else {
        dense(tx, m)
    };
    let encoder = lstm(n, m) + lstm(m, m);
    let align = dense(p + m, 1);
    match config.arch {
        Arch::Stam => embed + encoder + 2 * align + 2 * dense(m, q) + 2 * lstm(q + 1, p) + dense(2 * p, 1),
        Arch::StamLite => embed + encoder + 2 * align + dense(2 * m, q) + lstm(q + 1, p) + dense(p, 1),
        Arch::EncDec => encoder + lstm(m + 1, p) + dense(p, 1),
        Arch::LstmAtt => encoder + align + dense(m, q) + lstm(q + 1, p) + dense(p, 1),
        Arch::DaRnn => {
            let input_attention = tx * 2 * m + tx * tx + tx;
            let temporal_attention = m * 2 * p + m * m + m;
            input_attention
                + lstm(n, m)
                + temporal_attention
                + dense(m + 1, 1)
                + lstm(1, p)
                + dense(p + m, p)
                + dense(p, 1)
        }
    }
}

/// Inference cost model:
/// `8(Nm + m² + 2m)Tx + (p + 2 + 2m)(N + Tx)Ty + k·Ty(p² + pq + 3p)`
/// with `k = 8` for STAM (two decoder LSTMs) and `k = 4` for STAM-Lite.
pub fn flop_estimate(config: &ModelConfig) -> Result<u64> {
    let k: u64 = match config.arch {
        Arch::Stam => 8,
        Arch::StamLite => 4,
        other => {
            return Err(Error::UnsupportedArch {
                op: "flop_estimate",
                arch: other.to_string(),
            })
        }
    };
    let [n, tx, ty, m, p, q] = [
        config.n_vars,
        config.input_len,
        config.output_len,
        config.enc_dim,
        config.dec_dim,
        config.context_dim,
    ]
    .map(|v| v as u64);
    let encoder = 8 * (n * m + m * m + 2 * m) * tx;
    let attention = (p + 2 + 2 * m) * (n + tx) * ty;
    let decoder = k * ty * (p * p + p * q + 3 * p);
    Ok(encoder + attention + decoder)
}
