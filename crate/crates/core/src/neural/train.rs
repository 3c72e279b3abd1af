use std::cmp::Ordering;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{gemm, MlpModel, MlpSpec, Scalar};
use crate::{Error, Result};

/// Probabilities are clamped to this before taking the log.
pub const CE_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Loss {
    /// Categorical cross entropy against one-hot targets.
    CrossEntropy,
    Mse,
}

/// `-ln(max(probs[label], 1e-12))` where `label` is the hot entry.
pub fn loss_cross_entropy(probs: &[f64], one_hot: &[f64]) -> Result<f64> {
    if probs.len() != one_hot.len() {
        return Err(Error::Usage(format!("{} probabilities, {} labels", probs.len(), one_hot.len())));
    }
    let label = hot_index(one_hot).ok_or_else(|| Error::Usage("label is not one-hot".into()))?;
    Ok(-probs[label].max(CE_CLAMP).ln())
}

pub fn loss_mse(pred: &[f64], target: &[f64]) -> Result<f64> {
    if pred.len() != target.len() || pred.is_empty() {
        return Err(Error::Usage(format!("mse of lengths {} and {}", pred.len(), target.len())));
    }
    Ok(pred.iter().zip(target).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / pred.len() as f64)
}

fn hot_index<T: Scalar>(one_hot: &[T]) -> Option<usize> {
    let mut hot = None;
    for (i, &v) in one_hot.iter().enumerate() {
        if v == T::one() {
            if hot.is_some() {
                return None;
            }
            hot = Some(i);
        } else if v != T::zero() {
            return None;
        }
    }
    hot
}

/// Gradients shaped like the model's layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T> {
    pub weights: Vec<Vec<T>>,
    pub biases: Vec<Vec<T>>,
}

impl<T: Scalar> MlpModel<T> {
    /// Batch-mean loss and its exact gradient.
    pub fn loss_and_gradients(&self, inputs: &[T], targets: &[T], batch: usize, loss: Loss) -> Result<(f64, Gradients<T>)> {
        self.check_inputs(inputs, batch)?;
        let out_dim = self.output_dim();
        if targets.len() != batch * out_dim {
            return Err(Error::Usage(format!("expected {batch} x {out_dim} targets, got {}", targets.len())));
        }
        let trace = self.forward_trace(inputs, batch);
        let out = trace.last().unwrap();

        let mut total = 0.0f64;
        let mut grad = vec![T::zero(); out.len()];
        match loss {
            Loss::Mse => {
                let scale = T::from_f64_lossy(2.0 / (batch * out_dim) as f64);
                for ((g, &p), &t) in grad.iter_mut().zip(out).zip(targets) {
                    let d = p - t;
                    total += d.as_f64() * d.as_f64();
                    *g = d * scale;
                }
                total /= (batch * out_dim) as f64;
            }
            Loss::CrossEntropy => {
                let inv_batch = 1.0 / batch as f64;
                for ((g, p), t) in grad.chunks_exact_mut(out_dim).zip(out.chunks_exact(out_dim)).zip(targets.chunks_exact(out_dim)) {
                    let label = hot_index(t).ok_or_else(|| Error::Usage("cross-entropy target is not one-hot".into()))?;
                    let p = p[label].as_f64();
                    total -= p.max(CE_CLAMP).ln();
                    if p > CE_CLAMP {
                        g[label] = T::from_f64_lossy(-inv_batch / p);
                    }
                }
                total *= inv_batch;
            }
        }

        let n_layers = self.layers.len();
        let mut weights = vec![Vec::new(); n_layers];
        let mut biases = vec![Vec::new(); n_layers];
        for (li, layer) in self.layers.iter().enumerate().rev() {
            layer.activation.backward(&trace[li + 1], &mut grad, layer.fan_out);
            let mut gw = vec![T::zero(); layer.fan_out * layer.fan_in];
            gemm(true, false, layer.fan_out, batch, layer.fan_in, &grad, &trace[li], T::zero(), &mut gw);
            let mut gb = vec![T::zero(); layer.fan_out];
            for row in grad.chunks_exact(layer.fan_out) {
                gb.iter_mut().zip(row).for_each(|(b, &g)| *b = *b + g);
            }
            if li > 0 {
                let mut gx = vec![T::zero(); batch * layer.fan_in];
                gemm(false, false, batch, layer.fan_out, layer.fan_in, &grad, &layer.weights, T::zero(), &mut gx);
                grad = gx;
            }
            weights[li] = gw;
            biases[li] = gb;
        }
        Ok((total, Gradients { weights, biases }))
    }

    /// Batch-mean loss without gradients.
    pub fn batch_loss(&self, inputs: &[T], targets: &[T], batch: usize, loss: Loss) -> Result<f64> {
        let out = self.forward_batch(inputs, batch)?;
        let d = self.output_dim();
        if targets.len() != out.len() {
            return Err(Error::Usage("target shape mismatch".into()));
        }
        let mut total = 0.0;
        for (p, t) in out.chunks_exact(d).zip(targets.chunks_exact(d)) {
            let p: Vec<f64> = p.iter().map(|v| v.as_f64()).collect();
            let t: Vec<f64> = t.iter().map(|v| v.as_f64()).collect();
            total += match loss {
                Loss::Mse => loss_mse(&p, &t)?,
                Loss::CrossEntropy => loss_cross_entropy(&p, &t)?,
            };
        }
        Ok(total / batch as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Optimizer {
    Sgd,
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl Optimizer {
    pub fn adam() -> Self {
        Optimizer::Adam { beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// Adam moments, one buffer per weight/bias tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState<T> {
    pub step: u64,
    m: Vec<Vec<T>>,
    v: Vec<Vec<T>>,
}

impl<T: Scalar> OptimizerState<T> {
    pub fn new(model: &MlpModel<T>) -> Self {
        let zeros: Vec<Vec<T>> =
            model.layers.iter().flat_map(|l| [vec![T::zero(); l.weights.len()], vec![T::zero(); l.biases.len()]]).collect();
        OptimizerState { step: 0, m: zeros.clone(), v: zeros }
    }
}

/// One optimizer update on a batch. Returns the batch-mean loss measured
/// before the update.
#[allow(clippy::too_many_arguments)]
pub fn train_step<T: Scalar>(
    model: &mut MlpModel<T>,
    inputs: &[T],
    targets: &[T],
    batch: usize,
    loss: Loss,
    learning_rate: f64,
    optimizer: Optimizer,
    state: &mut OptimizerState<T>,
) -> Result<f64> {
    let (value, grads) = model.loss_and_gradients(inputs, targets, batch, loss)?;
    if !value.is_finite() {
        return Err(Error::Training { reason: format!("non-finite batch loss {value}"), log: Vec::new() });
    }
    state.step += 1;
    let params = model.layers.iter_mut().flat_map(|l| [&mut l.weights, &mut l.biases]);
    let grads = grads.weights.iter().zip(&grads.biases).flat_map(|(w, b)| [w, b]);
    match optimizer {
        Optimizer::Sgd => {
            let lr = T::from_f64_lossy(learning_rate);
            for (p, g) in params.zip(grads) {
                p.iter_mut().zip(g).for_each(|(p, &g)| *p = *p - lr * g);
            }
        }
        Optimizer::Adam { beta1, beta2, eps } => {
            let t = state.step as i32;
            let step = learning_rate * (1.0 - beta2.powi(t)).sqrt() / (1.0 - beta1.powi(t));
            let (b1, b2) = (T::from_f64_lossy(beta1), T::from_f64_lossy(beta2));
            let (step, eps) = (T::from_f64_lossy(step), T::from_f64_lossy(eps));
            for (((p, g), m), v) in params.zip(grads).zip(&mut state.m).zip(&mut state.v) {
                for (((p, &g), m), v) in p.iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut()) {
                    *m = b1 * *m + (T::one() - b1) * g;
                    *v = b2 * *v + (T::one() - b2) * g * g;
                    *p = *p - step * *m / (v.sqrt() + eps);
                }
            }
        }
    }
    Ok(value)
}

/// Row-major input/target pairs.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Samples {
    pub input_dim: usize,
    pub target_dim: usize,
    pub inputs: Vec<f32>,
    pub targets: Vec<f32>,
}

impl Samples {
    pub fn new(input_dim: usize, target_dim: usize) -> Self {
        Samples { input_dim, target_dim, inputs: Vec::new(), targets: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.inputs.len().checked_div(self.input_dim).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn push(&mut self, input: &[f32], target: &[f32]) {
        assert_eq!(input.len(), self.input_dim);
        assert_eq!(target.len(), self.target_dim);
        self.inputs.extend_from_slice(input);
        self.targets.extend_from_slice(target);
    }

    pub fn input(&self, i: usize) -> &[f32] {
        &self.inputs[i * self.input_dim..(i + 1) * self.input_dim]
    }

    pub fn target(&self, i: usize) -> &[f32] {
        &self.targets[i * self.target_dim..(i + 1) * self.target_dim]
    }

    pub fn append(&mut self, other: &Samples) {
        assert_eq!((self.input_dim, self.target_dim), (other.input_dim, other.target_dim));
        self.inputs.extend_from_slice(&other.inputs);
        self.targets.extend_from_slice(&other.targets);
    }

    fn gather(&self, idx: &[usize]) -> (Vec<f32>, Vec<f32>) {
        let mut x = Vec::with_capacity(idx.len() * self.input_dim);
        let mut y = Vec::with_capacity(idx.len() * self.target_dim);
        for &i in idx {
            x.extend_from_slice(self.input(i));
            y.extend_from_slice(self.target(i));
        }
        (x, y)
    }

    /// Indices sorted by sample content, so that shuffling starts from an
    /// order that does not depend on how the samples were stored.
    fn canonical_order(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.len()).collect();
        let cmp = |a: &[f32], b: &[f32]| a.iter().map(|v| v.to_bits()).cmp(b.iter().map(|v| v.to_bits()));
        idx.sort_by(|&a, &b| match cmp(self.input(a), self.input(b)) {
            Ordering::Equal => cmp(self.target(a), self.target(b)),
            o => o,
        });
        idx
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub optimizer: Optimizer,
    pub early_stop_patience: usize,
    pub validation_fraction: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            batch_size: 64,
            max_epochs: 200,
            optimizer: Optimizer::adam(),
            early_stop_patience: 10,
            validation_fraction: 0.1,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config(format!("learning rate must be > 0, got {}", self.learning_rate)));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be >= 1".into()));
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return Err(Error::Config(format!("validation fraction must be in (0,1), got {}", self.validation_fraction)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainLog {
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose parameters were returned.
    pub best_epoch: usize,
    pub stopped_early: bool,
}

impl TrainLog {
    pub fn lines(&self) -> Vec<String> {
        self.epochs.iter().map(|e| format!("epoch {:4}  train {:.6e}  val {:.6e}", e.epoch, e.train_loss, e.val_loss)).collect()
    }

    pub fn best_val_loss(&self) -> Option<f64> {
        self.epochs.iter().find(|e| e.epoch == self.best_epoch).map(|e| e.val_loss)
    }
}

/// Train on `data`, holding out `validation_fraction` of it for model selection.
pub fn train(spec: MlpSpec, data: &Samples, loss: Loss, cfg: &TrainConfig) -> Result<(MlpModel<f32>, TrainLog)> {
    cfg.validate()?;
    if data.len() < 2 {
        return Err(Error::Usage("need at least two samples to split off validation".into()));
    }
    let mut order = data.canonical_order();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5EED_5A17));
    let n_val = ((data.len() as f64 * cfg.validation_fraction).round() as usize).clamp(1, data.len() - 1);
    let (val_idx, train_idx) = order.split_at(n_val);
    let subset = |idx: &[usize]| {
        let (inputs, targets) = data.gather(idx);
        Samples { input_dim: data.input_dim, target_dim: data.target_dim, inputs, targets }
    };
    train_with_validation(spec, &subset(train_idx), &subset(val_idx), loss, cfg)
}

/// Train with an explicit validation set. Returns the parameters of the
/// epoch with the lowest validation loss.
pub fn train_with_validation(
    spec: MlpSpec,
    train_set: &Samples,
    val_set: &Samples,
    loss: Loss,
    cfg: &TrainConfig,
) -> Result<(MlpModel<f32>, TrainLog)> {
    cfg.validate()?;
    spec.validate()?;
    if train_set.is_empty() || val_set.is_empty() {
        return Err(Error::Usage("training and validation sets must be nonempty".into()));
    }
    for s in [train_set, val_set] {
        if s.input_dim != spec.input_dim() || s.target_dim != spec.output_dim() {
            return Err(Error::Usage(format!(
                "samples are {} -> {}, network is {} -> {}",
                s.input_dim,
                s.target_dim,
                spec.input_dim(),
                spec.output_dim()
            )));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut model = MlpModel::<f32>::init(spec, &mut rng)?;
    let mut state = OptimizerState::new(&model);
    let mut order = train_set.canonical_order();
    let mut log = TrainLog::default();
    let mut best = (f64::INFINITY, model.clone());
    let mut since_best = 0;

    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut rng);
        let mut sum = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let (x, y) = train_set.gather(chunk);
            let l = train_step(&mut model, &x, &y, chunk.len(), loss, cfg.learning_rate, cfg.optimizer, &mut state)
                .map_err(|e| with_log(e, &log))?;
            sum += l * chunk.len() as f64;
        }
        let train_loss = sum / train_set.len() as f64;
        let val_loss = evaluate_loss(&model, val_set, loss)?;
        log.epochs.push(EpochRecord { epoch, train_loss, val_loss });
        if !val_loss.is_finite() {
            return Err(Error::Training { reason: format!("validation loss {val_loss} at epoch {epoch}"), log: log.lines() });
        }
        if val_loss < best.0 {
            best = (val_loss, model.clone());
            log.best_epoch = epoch;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.early_stop_patience {
                log.stopped_early = true;
                break;
            }
        }
    }
    Ok((best.1, log))
}

fn with_log(e: Error, log: &TrainLog) -> Error {
    match e {
        Error::Training { reason, .. } => Error::Training { reason, log: log.lines() },
        other => other,
    }
}

/// Mean per-sample loss over a whole set, in chunks.
pub(crate) fn evaluate_loss(model: &MlpModel<f32>, set: &Samples, loss: Loss) -> Result<f64> {
    const CHUNK: usize = 512;
    let mut total = 0.0;
    for start in (0..set.len()).step_by(CHUNK) {
        let n = CHUNK.min(set.len() - start);
        let x = &set.inputs[start * set.input_dim..(start + n) * set.input_dim];
        let y = &set.targets[start * set.target_dim..(start + n) * set.target_dim];
        total += model.batch_loss(x, y, n, loss)? * n as f64;
    }
    Ok(total / set.len() as f64)
}
