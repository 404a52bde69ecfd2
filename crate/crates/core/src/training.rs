//! MSE training with Adam, mini-batching and evaluation metrics.

use std::io::Write;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Graph, Shape, Tensor, Var};
use crate::data::{Window, WindowedDataset};
use crate::error::{Error, Result};
use crate::layers::Mode;
use crate::models::Model;

fn default_lr() -> f64 {
    0.001
}
fn default_batch() -> usize {
    256
}
fn default_epochs() -> usize {
    50
}
fn default_beta1() -> f64 {
    0.9
}
fn default_beta2() -> f64 {
    0.999
}
fn default_eps() -> f64 {
    1e-8
}
fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    #[serde(default = "default_lr")]
    pub learning_rate: f64,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_beta1")]
    pub beta1: f64,
    #[serde(default = "default_beta2")]
    pub beta2: f64,
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_true")]
    pub shuffle: bool,
    /// Max global gradient norm. Off unless set.
    #[serde(default)]
    pub clip_norm: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: default_lr(),
            batch_size: default_batch(),
            epochs: default_epochs(),
            beta1: default_beta1(),
            beta2: default_beta2(),
            eps: default_eps(),
            seed: 0,
            shuffle: true,
            clip_norm: None,
        }
    }
}

impl TrainConfig {
    pub fn problems(&self, prefix: &str) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            out.push(format!("{prefix}learning_rate must be positive, got {}", self.learning_rate));
        }
        if self.batch_size == 0 {
            out.push(format!("{prefix}batch_size must be at least 1"));
        }
        if self.epochs == 0 {
            out.push(format!("{prefix}epochs must be at least 1"));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                out.push(format!("{prefix}{name} must be in [0, 1), got {b}"));
            }
        }
        if !(self.eps > 0.0) {
            out.push(format!("{prefix}eps must be positive, got {}", self.eps));
        }
        if let Some(c) = self.clip_norm {
            if !(c > 0.0 && c.is_finite()) {
                out.push(format!("{prefix}clip_norm must be positive, got {c}"));
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
}

/// Adam moments, one buffer per parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub t: u64,
}

impl AdamState {
    pub fn new(params: &[Tensor]) -> Self {
        AdamState {
            m: params.iter().map(|p| vec![0.0; p.numel()]).collect(),
            v: params.iter().map(|p| vec![0.0; p.numel()]).collect(),
            t: 0,
        }
    }
}

/// One bias-corrected Adam update from each tensor's gradient buffer.
/// A tensor without a gradient buffer is treated as having zero gradient.
pub fn adam_step(state: &mut AdamState, params: &mut [Tensor], cfg: &TrainConfig) -> Result<()> {
    if state.m.len() != params.len() {
        return Err(Error::Precondition(format!(
            "optimizer holds {} moment buffers for {} parameters",
            state.m.len(),
            params.len()
        )));
    }
    for (k, p) in params.iter().enumerate() {
        let n = p.numel();
        if state.m[k].len() != n || p.grad().is_some_and(|g| g.len() != n) {
            let g = p.grad().map_or(n, <[f64]>::len);
            return Err(Error::shape(
                "adam_step",
                &Shape::new(vec![state.m[k].len()])?,
                &Shape::new(vec![g])?,
            ));
        }
    }
    let scale = match cfg.clip_norm {
        Some(max) => {
            let norm = params
                .iter()
                .filter_map(Tensor::grad)
                .flat_map(|g| g.iter())
                .map(|x| x * x)
                .sum::<f64>()
                .sqrt();
            if norm > max {
                max / norm
            } else {
                1.0
            }
        }
        None => 1.0,
    };
    state.t += 1;
    let c1 = 1.0 - cfg.beta1.powi(state.t as i32);
    let c2 = 1.0 - cfg.beta2.powi(state.t as i32);
    for (k, p) in params.iter_mut().enumerate() {
        let Some(grad) = p.grad().map(<[f64]>::to_vec) else {
            // zero gradient: moments decay, update is m̂/(√v̂+ε) on the decayed moments
            let (m, v) = (&mut state.m[k], &mut state.v[k]);
            for ((w, mi), vi) in p.values_mut().iter_mut().zip(m.iter_mut()).zip(v.iter_mut()) {
                *mi *= cfg.beta1;
                *vi *= cfg.beta2;
                *w -= cfg.learning_rate * (*mi / c1) / ((*vi / c2).sqrt() + cfg.eps);
            }
            continue;
        };
        let (m, v) = (&mut state.m[k], &mut state.v[k]);
        for (((w, mi), vi), g) in p.values_mut().iter_mut().zip(m.iter_mut()).zip(v.iter_mut()).zip(&grad) {
            let g = g * scale;
            *mi = cfg.beta1 * *mi + (1.0 - cfg.beta1) * g;
            *vi = cfg.beta2 * *vi + (1.0 - cfg.beta2) * g * g;
            *w -= cfg.learning_rate * (*mi / c1) / ((*vi / c2).sqrt() + cfg.eps);
        }
    }
    Ok(())
}

/// Mean squared difference between two vectors of equal length.
pub fn mse_loss(g: &mut Graph, pred: Var, target: Var) -> Result<Var> {
    if g.shape(pred) != g.shape(target) {
        return Err(Error::shape("mse_loss", g.shape(pred), g.shape(target)));
    }
    let d = g.sub(pred, target)?;
    let sq = g.mul(d, d)?;
    Ok(g.mean(sq))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub rmse: f64,
    pub mae: f64,
    pub r2: f64,
}

impl Metrics {
    /// Pooled over every entry of `pred` and `target`.
    pub fn compute(pred: &[f64], target: &[f64]) -> Result<Metrics> {
        let (rmse, mae, r2) = pooled(pred, target)?;
        Ok(Metrics {
            rmse,
            mae,
            r2: r2.ok_or(Error::UndefinedR2)?,
        })
    }
}

fn pooled(pred: &[f64], target: &[f64]) -> Result<(f64, f64, Option<f64>)> {
    if pred.len() != target.len() {
        return Err(Error::shape(
            "metrics",
            &Shape::new(vec![pred.len().max(1)])?,
            &Shape::new(vec![target.len().max(1)])?,
        ));
    }
    if pred.is_empty() {
        return Err(Error::Empty("no predictions to score".into()));
    }
    let n = pred.len() as f64;
    let ss_res: f64 = pred.iter().zip(target).map(|(p, t)| (p - t) * (p - t)).sum();
    let mae = pred.iter().zip(target).map(|(p, t)| (p - t).abs()).sum::<f64>() / n;
    let mean = target.iter().sum::<f64>() / n;
    let ss_tot: f64 = target.iter().map(|t| (t - mean) * (t - mean)).sum();
    let r2 = (ss_tot > 0.0).then(|| 1.0 - ss_res / ss_tot);
    Ok(((ss_res / n).sqrt(), mae, r2))
}

/// Eval-mode predictions for every window, in standardized units.
pub fn predict_dataset(model: &Model, data: &WindowedDataset) -> Result<Vec<Vec<f64>>> {
    data.windows.iter().map(|w| Ok(model.predict(&w.x)?.y_hat)).collect()
}

/// Predictions and targets in original units, flattened window by window.
fn original_units(model: &Model, data: &WindowedDataset) -> Result<(Vec<f64>, Vec<f64>)> {
    if data.is_empty() {
        return Err(Error::Empty("evaluation set has no windows".into()));
    }
    let mut pred = Vec::new();
    let mut target = Vec::new();
    for w in &data.windows {
        let y_hat = model.predict(&w.x)?.y_hat;
        if y_hat.len() != w.y.len() {
            return Err(Error::SchemaMismatch(format!(
                "model predicts {} steps, dataset has {}",
                y_hat.len(),
                w.y.len()
            )));
        }
        pred.extend(y_hat.iter().map(|v| data.target_to_original(*v)));
        target.extend(w.y.iter().map(|v| data.target_to_original(*v)));
    }
    Ok((pred, target))
}

/// RMSE, MAE and R² in original target units, pooled over all windows and
/// output steps.
pub fn evaluate(model: &Model, data: &WindowedDataset) -> Result<Metrics> {
    let (pred, target) = original_units(model, data)?;
    Metrics::compute(&pred, &target)
}

/// Mean over `windows` of each window's MSE, on a single graph.
/// Returns the graph, the loss node and the parameter bindings.
pub fn batch_loss(
    model: &Model,
    windows: &[&Window],
    mode: &mut Mode<'_>,
) -> Result<(Graph, Var, crate::layers::Bindings)> {
    if windows.is_empty() {
        return Err(Error::Empty("empty batch".into()));
    }
    let mut g = Graph::new();
    let b = model.store().bind(&mut g);
    let mut losses = Vec::with_capacity(windows.len());
    for w in windows {
        let trace = model.trace(&mut g, &b, &w.x, mode)?;
        let target = g.constant_vec(w.y.clone())?;
        losses.push(mse_loss(&mut g, trace.y_hat, target)?);
    }
    let all = g.concat_all(&losses)?;
    let loss = g.mean(all);
    Ok((g, loss, b))
}

/// One line of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Window-weighted mean of the batch losses seen during the epoch, in
    /// standardized units.
    pub train_loss: f64,
    pub val_rmse: f64,
    pub val_mae: f64,
    /// Absent when the validation targets have zero variance.
    pub val_r2: Option<f64>,
    pub seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingLog {
    pub records: Vec<EpochRecord>,
}

impl TrainingLog {
    /// Line-delimited JSON, one record per epoch.
    pub fn to_jsonl(&self) -> Result<String> {
        let mut out = Vec::new();
        for r in &self.records {
            serde_json::to_writer(&mut out, r)?;
            out.write_all(b"\n").expect("vec write");
        }
        Ok(String::from_utf8(out).expect("json is utf-8"))
    }

    pub fn from_jsonl(text: &str) -> Result<Self> {
        let records = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(serde_json::from_str)
            .collect::<std::result::Result<_, _>>()?;
        Ok(TrainingLog { records })
    }
}

/// Generator streams derived from the training seed. Initialization uses the
/// model's own seed; shuffling and dropout each get a dedicated stream.
fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

pub fn fit(model: &mut Model, train: &WindowedDataset, val: &WindowedDataset, cfg: &TrainConfig) -> Result<TrainingLog> {
    fit_with_progress(model, train, val, cfg, |_| {})
}

/// Trains for exactly `cfg.epochs` epochs and keeps the final weights.
/// `on_epoch` sees each log record as soon as it is produced.
pub fn fit_with_progress(
    model: &mut Model,
    train: &WindowedDataset,
    val: &WindowedDataset,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainingLog> {
    cfg.validate()?;
    if train.is_empty() || val.is_empty() {
        return Err(Error::Empty("training and validation sets must hold windows".into()));
    }
    let mut shuffle_rng = stream(cfg.seed, 1);
    let mut dropout_rng = stream(cfg.seed, 2);
    let mut adam = AdamState::new(model.store().tensors());
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut log = TrainingLog::default();
    model.store_mut().zero_grad();
    for epoch in 1..=cfg.epochs {
        let started = Instant::now();
        if cfg.shuffle {
            order.shuffle(&mut shuffle_rng);
        }
        let mut loss_sum = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<&Window> = chunk.iter().map(|&i| &train.windows[i]).collect();
            let (mut g, loss, b) = match batch_loss(model, &batch, &mut Mode::Train(&mut dropout_rng)) {
                Err(Error::DivergedModel { .. }) => return Err(Error::DivergedTraining { epoch }),
                other => other?,
            };
            let value = g.value(loss)[0];
            if !value.is_finite() {
                return Err(Error::DivergedTraining { epoch });
            }
            loss_sum += value * batch.len() as f64;
            g.backward(loss)?;
            let store = model.store_mut();
            store.accumulate_grads(&g, &b, 1.0)?;
            adam_step(&mut adam, store.tensors_mut(), cfg)?;
            store.zero_grad();
            if !store.all_finite() {
                return Err(Error::DivergedTraining { epoch });
            }
        }
        let (pred, target) = match original_units(model, val) {
            Err(Error::DivergedModel { .. }) => return Err(Error::DivergedTraining { epoch }),
            other => other?,
        };
        let (val_rmse, val_mae, val_r2) = pooled(&pred, &target)?;
        let record = EpochRecord {
            epoch,
            train_loss: loss_sum / train.len() as f64,
            val_rmse,
            val_mae,
            val_r2,
            seconds: started.elapsed().as_secs_f64(),
        };
        on_epoch(&record);
        log.records.push(record);
    }
    Ok(log)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::grad_check;
    use crate::data::{prepare, DataSource, SynthSpec};
    use crate::models::{Arch, ModelConfig};

    fn scalar_param(w: f64) -> Tensor {
        Tensor::from_vec(vec![w]).unwrap().with_grad()
    }

    #[test]
    fn mse_examples() {
        let mut g = Graph::new();
        let p = g.constant_vec(vec![1.0, 2.0]).unwrap();
        let t = g.constant_vec(vec![0.0, 0.0]).unwrap();
        let l = mse_loss(&mut g, p, t).unwrap();
        assert_eq!(g.value(l), &[2.5]);
        let l0 = mse_loss(&mut g, p, p).unwrap();
        assert_eq!(g.value(l0), &[0.0]);
        let short = g.constant_vec(vec![0.0]).unwrap();
        assert!(matches!(mse_loss(&mut g, p, short), Err(Error::Shape { .. })));
    }

    #[test]
    fn mse_gradient_is_two_residual_over_len() {
        let mut g = Graph::new();
        let pred = g.leaf(&Tensor::from_vec(vec![1.0, -2.0, 0.5]).unwrap().with_grad());
        let t = g.constant_vec(vec![0.0, 1.0, 0.5]).unwrap();
        let l = mse_loss(&mut g, pred, t).unwrap();
        g.backward(l).unwrap();
        let expect = [2.0 / 3.0, -2.0, 0.0];
        for (a, b) in g.grad(pred).unwrap().iter().zip(expect) {
            assert!((a - b).abs() < 1e-15);
        }
        let mut params = vec![Tensor::from_vec(vec![1.0, -2.0, 0.5]).unwrap().with_grad()];
        let report = grad_check(
            |g, v| {
                let t = g.constant_vec(vec![0.0, 1.0, 0.5])?;
                mse_loss(g, v[0], t)
            },
            &mut params,
            1e-5,
            1e-6,
        )
        .unwrap();
        assert!(report.passed);
    }

    #[test]
    fn adam_zero_gradient_is_identity() {
        let cfg = TrainConfig::default();
        let mut params = vec![scalar_param(0.7), Tensor::from_vec(vec![1.0, -3.0]).unwrap().with_grad()];
        params[0].accumulate_grad(&[0.0]).unwrap();
        params[1].accumulate_grad(&[0.0, 0.0]).unwrap();
        let mut st = AdamState::new(&params);
        for _ in 0..5 {
            adam_step(&mut st, &mut params, &cfg).unwrap();
        }
        assert_eq!(params[0].values(), &[0.7]);
        assert_eq!(params[1].values(), &[1.0, -3.0]);
        assert_eq!(st.t, 5);
    }

    #[test]
    fn adam_first_step_moves_by_lr() {
        let cfg = TrainConfig::default();
        for g in [3.0, -0.02] {
            let mut p = vec![scalar_param(1.0)];
            p[0].accumulate_grad(&[g]).unwrap();
            let mut st = AdamState::new(&p);
            adam_step(&mut st, &mut p, &cfg).unwrap();
            let step = p[0].values()[0] - 1.0;
            assert!((step + cfg.learning_rate * g.signum()).abs() < 1e-9, "{step}");
        }
    }

    /// Straight reimplementation of the Adam recurrence on f(w) = w².
    fn reference_adam(w0: f64, lr: f64, steps: usize) -> f64 {
        let (b1, b2, eps) = (0.9f64, 0.999f64, 1e-8);
        let (mut w, mut m, mut v) = (w0, 0.0, 0.0);
        for t in 1..=steps {
            let g = 2.0 * w;
            m = b1 * m + (1.0 - b1) * g;
            v = b2 * v + (1.0 - b2) * g * g;
            let mh = m / (1.0 - b1.powi(t as i32));
            let vh = v / (1.0 - b2.powi(t as i32));
            w -= lr * mh / (vh.sqrt() + eps);
        }
        w
    }

    #[test]
    fn adam_on_quadratic_matches_reference_trace() {
        let cfg = TrainConfig {
            learning_rate: 0.1,
            ..TrainConfig::default()
        };
        let mut p = vec![scalar_param(1.0)];
        let mut st = AdamState::new(&p);
        for _ in 0..100 {
            let mut g = Graph::new();
            let w = g.leaf(&p[0]);
            let sq = g.mul(w, w).unwrap();
            let l = g.sum(sq);
            g.backward(l).unwrap();
            let grad = g.grad(w).unwrap().to_vec();
            p[0].zero_grad();
            p[0].accumulate_grad(&grad).unwrap();
            adam_step(&mut st, &mut p, &cfg).unwrap();
        }
        let w = p[0].values()[0];
        assert!(w.abs() < 0.1, "{w}");
        assert!((w - reference_adam(1.0, 0.1, 100)).abs() < 1e-12);
    }

    #[test]
    fn adam_rejects_mismatched_moments() {
        let cfg = TrainConfig::default();
        let mut p = vec![Tensor::from_vec(vec![1.0, 2.0]).unwrap().with_grad()];
        let mut st = AdamState::new(&[scalar_param(0.0)]);
        p[0].accumulate_grad(&[1.0, 1.0]).unwrap();
        assert!(matches!(adam_step(&mut st, &mut p, &cfg), Err(Error::Shape { .. })));
    }

    #[test]
    fn clipping_bounds_the_update_direction() {
        let cfg = TrainConfig {
            clip_norm: Some(1.0),
            ..TrainConfig::default()
        };
        let mut p = vec![Tensor::from_vec(vec![0.0, 0.0]).unwrap().with_grad()];
        p[0].accumulate_grad(&[300.0, 400.0]).unwrap();
        let mut st = AdamState::new(&p);
        adam_step(&mut st, &mut p, &cfg).unwrap();
        assert!((st.m[0][0] - 0.1 * 0.6).abs() < 1e-15);
        assert!((st.m[0][1] - 0.1 * 0.8).abs() < 1e-15);
    }

    #[test]
    fn metric_examples() {
        let m = Metrics::compute(&[1.0, 2.0, 3.0], &[1.0, 2.0, 5.0]).unwrap();
        assert!((m.mae - 2.0 / 3.0).abs() < 1e-15);
        assert!((m.rmse - (4.0f64 / 3.0).sqrt()).abs() < 1e-15);
        let perfect = Metrics::compute(&[1.0, 4.0], &[1.0, 4.0]).unwrap();
        assert_eq!(perfect, Metrics { rmse: 0.0, mae: 0.0, r2: 1.0 });
        let t = [1.0, 2.0, 6.0];
        let mean = Metrics::compute(&[3.0; 3], &t).unwrap();
        assert!(mean.r2.abs() < 1e-15);
        assert!(matches!(Metrics::compute(&[1.0, 2.0], &[3.0, 3.0]), Err(Error::UndefinedR2)));
        let mse: f64 = [0.0, 0.0, 4.0].iter().sum::<f64>() / 3.0;
        assert!((m.rmse * m.rmse - mse).abs() < 1e-12);
    }

    fn synth_data(windows: usize) -> crate::data::PreparedData {
        // rows chosen so the training split holds `windows` windows at Tx=4, Ty=2
        let rows = (((windows + 5) as f64 / 0.6).ceil() as usize + 1).max(40);
        let spec = SynthSpec::new(3, rows, vec![0], 1, 0.1, 21);
        let data = prepare(&DataSource::Synth { spec }, [0.6, 0.2, 0.2], 4, 2, 1).unwrap();
        assert!(data.train.len() >= windows);
        data
    }

    fn small_model(seed: u64) -> Model {
        Model::new(ModelConfig::new(Arch::Stam, 3, 4, 2).with_dims(8, 8, 2).with_seed(seed)).unwrap()
    }

    #[test]
    fn batch_loss_is_mean_of_window_losses() {
        let data = synth_data(20);
        let model = small_model(1);
        let batch: Vec<&Window> = data.train.windows.iter().take(7).collect();
        let (g, loss, _) = batch_loss(&model, &batch, &mut Mode::Eval).unwrap();
        let mut each = 0.0;
        for w in &batch {
            let y = model.predict(&w.x).unwrap().y_hat;
            each += y.iter().zip(&w.y).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / y.len() as f64;
        }
        assert!((g.value(loss)[0] - each / 7.0).abs() < 1e-12);
    }

    #[test]
    fn loss_falls_between_first_two_epochs() {
        let mut data = synth_data(64);
        data.train.windows.truncate(64);
        let cfg = TrainConfig {
            epochs: 2,
            batch_size: 8,
            learning_rate: 0.005,
            ..TrainConfig::default()
        };
        let mut falls = 0;
        for seed in 0..5 {
            let mut model = small_model(seed);
            let log = fit(&mut model, &data.train, &data.val, &TrainConfig { seed, ..cfg.clone() }).unwrap();
            if log.records[1].train_loss < log.records[0].train_loss {
                falls += 1;
            }
            assert!(model.store().all_finite());
        }
        assert!(falls >= 4, "{falls}/5");
    }

    #[test]
    fn identical_seeds_give_identical_logs() {
        let data = synth_data(30);
        let cfg = TrainConfig {
            epochs: 2,
            batch_size: 8,
            seed: 4,
            ..TrainConfig::default()
        };
        let run = || {
            let mut m = small_model(2);
            let log = fit(&mut m, &data.train, &data.val, &cfg).unwrap();
            (log, m.store().tensors().to_vec())
        };
        let (a, wa) = run();
        let (b, wb) = run();
        let strip = |l: &TrainingLog| {
            l.records.iter().map(|r| EpochRecord { seconds: 0.0, ..r.clone() }).collect::<Vec<_>>()
        };
        assert_eq!(strip(&a), strip(&b));
        assert_eq!(wa, wb);
    }

    #[test]
    fn oversized_batch_is_one_batch() {
        let data = synth_data(10);
        let mut m = small_model(3);
        let cfg = TrainConfig {
            epochs: 1,
            batch_size: 10_000,
            ..TrainConfig::default()
        };
        let log = fit(&mut m, &data.train, &data.val, &cfg).unwrap();
        assert_eq!(log.records.len(), 1);
        assert!(log.records[0].train_loss.is_finite());
    }

    #[test]
    fn evaluate_is_pure() {
        let data = synth_data(10);
        let m = small_model(5);
        let before = m.store().tensors().to_vec();
        let a = evaluate(&m, &data.test).unwrap();
        let b = evaluate(&m, &data.test).unwrap();
        assert_eq!(a, b);
        assert_eq!(m.store().tensors(), before.as_slice());
    }

    #[test]
    fn diverging_training_reports_epoch() {
        let data = synth_data(10);
        let mut m = small_model(6);
        let cfg = TrainConfig {
            epochs: 3,
            learning_rate: 1e300,
            batch_size: 4,
            ..TrainConfig::default()
        };
        assert!(matches!(
            fit(&mut m, &data.train, &data.val, &cfg),
            Err(Error::DivergedTraining { epoch: 1 })
        ));
    }

    #[test]
    fn log_round_trips_through_jsonl() {
        let log = TrainingLog {
            records: vec![EpochRecord {
                epoch: 1,
                train_loss: 0.5,
                val_rmse: 1.0,
                val_mae: 0.8,
                val_r2: None,
                seconds: 0.1,
            }],
        };
        let text = log.to_jsonl().unwrap();
        assert_eq!(text.lines().count(), 1);
        assert_eq!(TrainingLog::from_jsonl(&text).unwrap(), log);
    }

    #[test]
    fn config_problems_are_all_reported() {
        let cfg = TrainConfig {
            learning_rate: 0.0,
            batch_size: 0,
            epochs: 0,
            ..TrainConfig::default()
        };
        assert_eq!(cfg.problems("train.").len(), 3);
    }
}
