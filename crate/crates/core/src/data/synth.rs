use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::RawSeries;
use crate::error::{Error, Result};

/// Samples discarded before the first emitted row.
const BURN_IN: usize = 200;

/// Planted-relevance generator settings.
///
/// Every `x^i` is an AR(1) process with unit-variance Gaussian innovations
/// and coefficient `φ_i = 0.2 + 0.7·frac(i·0.6180339887)`, so variables are
/// distinguishable by their dynamics. The target is
/// `y_t = Σ_{i∈S} w_i·x^i_{t−lag} + ε_t`, `ε_t ~ N(0, noise_std²)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    pub n_vars: usize,
    pub length: usize,
    pub relevant: Vec<usize>,
    pub lag: usize,
    pub noise_std: f64,
    pub seed: u64,
    /// One weight per relevant variable; all 1 when absent.
    #[serde(default)]
    pub weights: Option<Vec<f64>>,
}

impl SynthSpec {
    pub fn new(n_vars: usize, length: usize, relevant: Vec<usize>, lag: usize, noise_std: f64, seed: u64) -> Self {
        SynthSpec {
            n_vars,
            length,
            relevant,
            lag,
            noise_std,
            seed,
            weights: None,
        }
    }

    pub fn problems(&self, prefix: &str) -> Vec<String> {
        let mut out = Vec::new();
        if self.n_vars == 0 {
            out.push(format!("{prefix}n_vars must be at least 1"));
        }
        if self.length == 0 {
            out.push(format!("{prefix}length must be at least 1"));
        }
        if self.relevant.is_empty() {
            out.push(format!("{prefix}relevant must name at least one variable"));
        }
        if let Some(i) = self.relevant.iter().find(|&&i| i >= self.n_vars) {
            out.push(format!("{prefix}relevant index {i} is out of range for {} variables", self.n_vars));
        }
        if self.lag == 0 {
            out.push(format!("{prefix}lag must be at least 1"));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            out.push(format!("{prefix}noise_std must be finite and non-negative"));
        }
        if let Some(w) = &self.weights {
            if w.len() != self.relevant.len() {
                out.push(format!(
                    "{prefix}weights has {} entries for {} relevant variables",
                    w.len(),
                    self.relevant.len()
                ));
            }
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

    pub fn ar_coefficient(i: usize) -> f64 {
        let golden = 0.618_033_988_7;
        0.2 + 0.7 * (i as f64 * golden).fract()
    }

    pub fn planted_weights(&self) -> Vec<f64> {
        self.weights.clone().unwrap_or_else(|| vec![1.0; self.relevant.len()])
    }
}

/// Columns `x0 … x{N−1}` and `y`; the inputs are the `x` columns only.
pub fn synth_generate(spec: &SynthSpec) -> Result<RawSeries> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let total = BURN_IN + spec.lag + spec.length;
    let n = spec.n_vars;
    let mut x = vec![vec![0.0; n]; total];
    for t in 0..total {
        for i in 0..n {
            let e: f64 = StandardNormal.sample(&mut rng);
            let prev = if t == 0 { 0.0 } else { x[t - 1][i] };
            x[t][i] = SynthSpec::ar_coefficient(i) * prev + e;
        }
    }
    let w = spec.planted_weights();
    let start = BURN_IN + spec.lag;
    let mut rows = Vec::with_capacity(spec.length);
    for t in start..total {
        let mut y = 0.0;
        for (wi, &i) in w.iter().zip(&spec.relevant) {
            y += wi * x[t - spec.lag][i];
        }
        if spec.noise_std > 0.0 {
            let e: f64 = StandardNormal.sample(&mut rng);
            y += spec.noise_std * e;
        }
        let mut row = x[t].clone();
        row.push(y);
        rows.push(row);
    }
    let inputs: Vec<String> = (0..n).map(|i| format!("x{i}")).collect();
    let mut columns = inputs.clone();
    columns.push("y".into());
    let mut series = RawSeries::new(columns, rows, "y", inputs)?;
    series.source = format!("synth(seed={})", spec.seed);
    Ok(series)
}
