//! Losses, the Adam optimizer and the minibatch loop with early stopping.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::data::{split_indices, DataError, Dataset, Task};
use crate::nn::{backward, forward, predict, GradAt, Mode, NetworkGraph, NnError, ParamStore, Tensor};
use crate::resample::{smote_resample, ResampleError, SmoteConfig};
use crate::rng;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TrainError {
    #[error("loss inputs differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("loss of an empty batch")]
    Empty,
    #[error("row {0} is not a probability vector")]
    BadProbabilityRow(usize),
    #[error("class code {code} at row {row} is out of range")]
    CodeOutOfRange { row: usize, code: u8 },
    #[error("optimizer state does not match the parameters")]
    ShapeMismatch,
    #[error("training set is empty")]
    EmptyDataset,
    #[error("invalid configuration: {0}")]
    InvalidConfig(&'static str),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Resample(#[from] ResampleError),
}

/// Mean squared error and its gradient `2(p − a)/n`.
pub fn mse_loss(predicted: &[f64], actual: &[f64]) -> Result<(f64, Vec<f64>), TrainError> {
    if predicted.len() != actual.len() {
        return Err(TrainError::LengthMismatch(predicted.len(), actual.len()));
    }
    if predicted.is_empty() {
        return Err(TrainError::Empty);
    }
    let n = predicted.len() as f64;
    let mut loss = 0.0;
    let grad = predicted
        .iter()
        .zip(actual)
        .map(|(p, a)| {
            let d = p - a;
            loss += d * d;
            2.0 * d / n
        })
        .collect();
    Ok((loss / n, grad))
}

/// Mean negative log-likelihood of `codes` under the row-major `n × k`
/// probabilities. The gradient is taken at the logits of a softmax head:
/// `(p − onehot)/n`.
pub fn cross_entropy_loss(probabilities: &[f64], k: usize, codes: &[u8]) -> Result<(f64, Vec<f64>), TrainError> {
    if codes.is_empty() {
        return Err(TrainError::Empty);
    }
    if k == 0 || probabilities.len() != codes.len() * k {
        return Err(TrainError::LengthMismatch(probabilities.len(), codes.len() * k));
    }
    let n = codes.len() as f64;
    let mut loss = 0.0;
    let mut grad = probabilities.to_vec();
    for (row, (&code, g)) in codes.iter().zip(grad.chunks_exact_mut(k)).enumerate() {
        let sum: f64 = g.iter().sum();
        if g.iter().any(|&p| !(0.0..=1.0).contains(&p)) || (sum - 1.0).abs() > 1e-9 {
            return Err(TrainError::BadProbabilityRow(row));
        }
        let c = usize::from(code);
        if c >= k {
            return Err(TrainError::CodeOutOfRange { row, code });
        }
        loss -= libm::log(g[c].max(f64::MIN_POSITIVE));
        g[c] -= 1.0;
        g.iter_mut().for_each(|v| *v /= n);
    }
    Ok((loss / n, grad))
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AdamConfig {
    /// A rate of 0 freezes the parameters.
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { learning_rate: 0.001, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(TrainError::InvalidConfig("learning_rate must be finite and non-negative"));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(TrainError::InvalidConfig("betas must lie in [0, 1)"));
        }
        if !(self.epsilon > 0.0) {
            return Err(TrainError::InvalidConfig("epsilon must be positive"));
        }
        Ok(())
    }
}

/// First and second moment estimates, one buffer per parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub t: u64,
}

impl AdamState {
    pub fn new(params: &ParamStore) -> Self {
        let m: Vec<Vec<f64>> = params.iter().map(|p| vec![0.0; p.len()]).collect();
        AdamState { v: m.clone(), m, t: 0 }
    }
}

/// One bias-corrected Adam update from the gradients stored in `params`.
pub fn adam_step(params: &mut ParamStore, state: &mut AdamState, config: &AdamConfig) -> Result<(), TrainError> {
    let lens: Vec<usize> = params.iter().map(|p| p.len()).collect();
    if state.m.len() != lens.len()
        || state.v.len() != lens.len()
        || state.m.iter().zip(&state.v).zip(&lens).any(|((m, v), &n)| m.len() != n || v.len() != n)
    {
        return Err(TrainError::ShapeMismatch);
    }
    state.t += 1;
    let t = state.t as f64;
    let c1 = 1.0 - libm::pow(config.beta1, t);
    let c2 = 1.0 - libm::pow(config.beta2, t);
    for ((p, m), v) in params.iter_mut().zip(&mut state.m).zip(&mut state.v) {
        for (((w, g), mi), vi) in p.value.iter_mut().zip(&p.grad).zip(m.iter_mut()).zip(v.iter_mut()) {
            *mi = config.beta1 * *mi + (1.0 - config.beta1) * g;
            *vi = config.beta2 * *vi + (1.0 - config.beta2) * g * g;
            let m_hat = *mi / c1;
            let v_hat = *vi / c2;
            *w -= config.learning_rate * m_hat / (libm::sqrt(v_hat) + config.epsilon);
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Loss {
    Mse,
    CrossEntropy,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub patience: usize,
    pub validation_fraction: f64,
    pub shuffle_seed: u64,
    /// Oversample the fitting portion (never the validation rows).
    pub smote: Option<SmoteConfig>,
    pub loss: Loss,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 50,
            batch_size: 32,
            patience: 15,
            validation_fraction: 0.2,
            shuffle_seed: 42,
            smote: None,
            loss: Loss::Mse,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if self.batch_size == 0 {
            return Err(TrainError::InvalidConfig("batch_size must be at least 1"));
        }
        if self.patience == 0 {
            return Err(TrainError::InvalidConfig("patience must be at least 1"));
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return Err(TrainError::InvalidConfig("validation_fraction must lie in (0, 1)"));
        }
        Ok(())
    }
}

/// Per-epoch losses. Epochs are numbered from 1; `best_epoch` is 0 only when
/// no epoch ran.
#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrainHistory {
    pub train_loss: Vec<f64>,
    pub validation_loss: Vec<f64>,
    pub best_epoch: usize,
    pub stopped_early: bool,
}

impl TrainHistory {
    pub fn epochs_run(&self) -> usize {
        self.train_loss.len()
    }

    pub fn best_validation_loss(&self) -> Option<f64> {
        self.best_epoch.checked_sub(1).map(|i| self.validation_loss[i])
    }
}

/// Patience-based stopping rule. An epoch improves only when its validation
/// loss is strictly below the best seen so far.
#[derive(Debug, Clone, PartialEq)]
pub struct EarlyStopping {
    patience: usize,
    best: f64,
    best_epoch: usize,
    since_best: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Improved,
    Continue,
    Stop,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        EarlyStopping { patience, best: f64::INFINITY, best_epoch: 0, since_best: 0 }
    }

    pub fn observe(&mut self, epoch: usize, validation_loss: f64) -> Verdict {
        if validation_loss < self.best {
            self.best = validation_loss;
            self.best_epoch = epoch;
            self.since_best = 0;
            Verdict::Improved
        } else {
            self.since_best += 1;
            if self.since_best >= self.patience {
                Verdict::Stop
            } else {
                Verdict::Continue
            }
        }
    }

    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }
}

/// `(fit, validation)` row indices used by [`train`].
pub fn validation_split(train_set: &Dataset, config: &TrainConfig) -> Result<(Vec<usize>, Vec<usize>), TrainError> {
    let (fit, val) = split_indices(train_set, config.validation_fraction, config.shuffle_seed)?;
    if fit.is_empty() || val.is_empty() {
        return Err(TrainError::InvalidConfig("too few rows to hold out a validation set"));
    }
    Ok((fit, val))
}

fn batch_tensor(ds: &Dataset, rows: &[usize]) -> Tensor {
    let d = ds.dim();
    let mut data = Vec::with_capacity(rows.len() * d);
    for &i in rows {
        data.extend_from_slice(ds.features.row(i));
    }
    Tensor::matrix(rows.len(), d, data)
}

fn loss_and_grad(loss: Loss, output: &Tensor, targets: &[f64]) -> Result<(f64, Vec<f64>), TrainError> {
    match loss {
        Loss::Mse => mse_loss(output.data(), targets),
        Loss::CrossEntropy => {
            let k = output.sample_shape().iter().product();
            let codes: Vec<u8> = targets.iter().map(|&t| t as u8).collect();
            cross_entropy_loss(output.data(), k, &codes)
        }
    }
}

/// Inference-mode loss of `params` on the given rows.
pub fn evaluate_loss(
    graph: &NetworkGraph,
    params: &ParamStore,
    dataset: &Dataset,
    rows: &[usize],
    loss: Loss,
) -> Result<f64, TrainError> {
    let out = predict(graph, params, &batch_tensor(dataset, rows))?;
    let targets: Vec<f64> = rows.iter().map(|&i| dataset.targets[i]).collect();
    Ok(loss_and_grad(loss, &out, &targets)?.0)
}

/// Minibatch Adam with validation-based early stopping.
///
/// A validation share is held out first (stratified for classification).
/// Each epoch reshuffles the fitting rows from `shuffle_seed + epoch`, takes
/// one Adam step per batch (the last may be short) and then scores the
/// validation rows in inference mode. Training stops after `patience` epochs
/// without strict improvement, and the parameters of the best epoch are
/// returned.
pub fn train(
    graph: &NetworkGraph,
    params: ParamStore,
    train_set: &Dataset,
    config: &TrainConfig,
    adam: &AdamConfig,
) -> Result<(ParamStore, TrainHistory), TrainError> {
    if train_set.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    config.validate()?;
    adam.validate()?;
    if train_set.dim() != graph.input_dim {
        return Err(NnError::ShapeMismatch(0).into());
    }
    let mut history = TrainHistory::default();
    if config.epochs == 0 {
        return Ok((params, history));
    }

    let (fit_idx, val_idx) = validation_split(train_set, config)?;
    let fit = match config.smote {
        Some(smote) if train_set.task == Task::Classification => smote_resample(&train_set.subset(&fit_idx), &smote)?,
        _ => train_set.subset(&fit_idx),
    };

    let mut params = params;
    let mut best = params.clone();
    let mut state = AdamState::new(&params);
    let mut stopper = EarlyStopping::new(config.patience);
    let mut order: Vec<usize> = (0..fit.len()).collect();
    let at = match config.loss {
        Loss::Mse => GradAt::Output,
        Loss::CrossEntropy => GradAt::PreActivation,
    };

    for epoch in 1..=config.epochs {
        order.sort_unstable();
        order.shuffle(&mut rng::seeded(config.shuffle_seed.wrapping_add(epoch as u64)));
        let mut total = 0.0;
        for (b, rows) in order.chunks(config.batch_size).enumerate() {
            let x = batch_tensor(&fit, rows);
            let targets: Vec<f64> = rows.iter().map(|&i| fit.targets[i]).collect();
            let seed = rng::mix(config.shuffle_seed, ((epoch as u64) << 32) | b as u64);
            let (out, cache) = forward(graph, &params, &x, Mode::Train, seed)?;
            let (loss, grad) = loss_and_grad(config.loss, &out, &targets)?;
            total += loss * rows.len() as f64;
            backward(graph, &mut params, cache, &Tensor::new(out.shape().to_vec(), grad).expect("loss grad shape"), at)?;
            adam_step(&mut params, &mut state, adam)?;
        }
        let val_loss = evaluate_loss(graph, &params, train_set, &val_idx, config.loss)?;
        history.train_loss.push(total / fit.len() as f64);
        history.validation_loss.push(val_loss);
        match stopper.observe(epoch, val_loss) {
            Verdict::Improved => best = params.clone(),
            Verdict::Continue => {}
            Verdict::Stop => {
                history.stopped_early = epoch < config.epochs;
                break;
            }
        }
    }
    history.best_epoch = stopper.best_epoch();
    if history.best_epoch == 0 {
        // validation loss never finite-improved (e.g. NaN); keep the last parameters
        return Ok((params, history));
    }
    Ok((best, history))
}
