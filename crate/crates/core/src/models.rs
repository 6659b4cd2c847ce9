//! The two WQI architectures, the train/evaluate pipeline and the in-memory
//! model artifact used for inference.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::data::{classify_wqi, fit_scaler, split_indices, DataError, Dataset, Direction, Matrix, Sample, Scaler, Task, WqiClass};
use crate::evaluation::{self, ClassificationReport, ConfusionMatrix, EvalError, HyperParams, Recipe, RegressionMetrics};
use crate::nn::{init_network, predict, Activation, LayerSpec, NetworkGraph, NnError, ParamStore, Tensor, INPUT_ID};
use crate::resample::SmoteConfig;
use crate::training::{train, AdamConfig, Loss, TrainConfig, TrainError, TrainHistory};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("bad arity: need at least 1 input and 2 classes (got {input_dim} and {n_classes})")]
    BadArity { input_dim: usize, n_classes: usize },
    #[error("input of {0} features is too short for a width-3 convolution")]
    InputTooShort(usize),
    #[error("WrongTask: model is {found:?}, operation needs {expected:?}")]
    WrongTask { expected: Task, found: Task },
    #[error("NonFiniteInput: sample contains a non-finite value")]
    NonFiniteInput,
    #[error("model expects {expected} features, got {found}")]
    FeatureCount { expected: usize, found: usize },
    #[error("model produced a non-finite output")]
    NonFiniteOutput,
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

const MLP_DROPOUT: f64 = 0.2;
const CONV_FILTERS: usize = 32;
const CONV_KERNEL: usize = 3;
const LSTM_UNITS: usize = 64;

fn relu(units: usize) -> LayerSpec {
    LayerSpec::Dense { units, activation: Activation::Relu }
}

/// Dense64(ReLU) → Dropout 0.2 → Dense32(ReLU) → Dropout 0.2 → Dense n (Softmax).
pub fn build_mlp_classifier(input_dim: usize, n_classes: usize) -> Result<NetworkGraph, ModelError> {
    build_mlp_classifier_with(input_dim, n_classes, MLP_DROPOUT)
}

/// [`build_mlp_classifier`] with another dropout rate; 0 omits the dropout layers.
pub fn build_mlp_classifier_with(input_dim: usize, n_classes: usize, dropout: f64) -> Result<NetworkGraph, ModelError> {
    if input_dim == 0 || n_classes < 2 {
        return Err(ModelError::BadArity { input_dim, n_classes });
    }
    let mut g = NetworkGraph::new(input_dim);
    for units in [64, 32] {
        g = g.then(relu(units));
        if dropout > 0.0 {
            g = g.then(LayerSpec::Dropout { rate: dropout });
        }
    }
    g = g.then(LayerSpec::Dense { units: n_classes, activation: Activation::Softmax });
    g.validate()?;
    Ok(g)
}

/// Conv1D and LSTM branches over the features read as a length-`input_dim`
/// sequence of scalars, concatenated and followed by Dense64 → Dense32 →
/// Dense1 (Linear).
pub fn build_hybrid_regressor(input_dim: usize) -> Result<NetworkGraph, ModelError> {
    build_hybrid_regressor_with(input_dim, 0.0)
}

/// [`build_hybrid_regressor`] with dropout after each hidden dense layer.
pub fn build_hybrid_regressor_with(input_dim: usize, dropout: f64) -> Result<NetworkGraph, ModelError> {
    if input_dim < CONV_KERNEL {
        return Err(ModelError::InputTooShort(input_dim));
    }
    let mut g = NetworkGraph::new(input_dim);
    let seq = g.push(LayerSpec::Reshape { target_shape: vec![input_dim, 1] }, &[INPUT_ID]);
    let conv = g.push(LayerSpec::TemporalConv { filters: CONV_FILTERS, kernel_size: CONV_KERNEL }, &[seq]);
    let conv = g.push(LayerSpec::Flatten, &[conv]);
    let lstm = g.push(LayerSpec::Lstm { units: LSTM_UNITS }, &[seq]);
    g.push(LayerSpec::Concat, &[conv, lstm]);
    for units in [64, 32] {
        g = g.then(relu(units));
        if dropout > 0.0 {
            g = g.then(LayerSpec::Dropout { rate: dropout });
        }
    }
    g = g.then(LayerSpec::Dense { units: 1, activation: Activation::Linear });
    g.validate()?;
    Ok(g)
}

/// Class labels in code order.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LabelCodec {
    pub labels: Vec<String>,
}

impl LabelCodec {
    pub fn wqi() -> Self {
        LabelCodec { labels: WqiClass::ALL.iter().map(|c| c.label().to_string()).collect() }
    }

    pub fn decode(&self, code: u8) -> Option<WqiClass> {
        self.labels.get(usize::from(code)).and_then(|l| WqiClass::from_label(l))
    }
}

/// Affine map between WQI units and the network's standardized output.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TargetScaler {
    pub mean: f64,
    pub std: f64,
}

impl TargetScaler {
    pub fn fit(targets: &[f64]) -> Result<Self, DataError> {
        if targets.len() < 2 {
            return Err(DataError::TooFewRows);
        }
        let n = targets.len() as f64;
        let mean = targets.iter().sum::<f64>() / n;
        let std = libm::sqrt(targets.iter().map(|t| (t - mean) * (t - mean)).sum::<f64>() / n);
        if !(std > 0.0) {
            return Err(DataError::ZeroVariance(0));
        }
        Ok(TargetScaler { mean, std })
    }

    pub fn forward(&self, y: f64) -> f64 {
        (y - self.mean) / self.std
    }

    pub fn inverse(&self, z: f64) -> f64 {
        z * self.std + self.mean
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrainingSummary {
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub best_validation_loss: Option<f64>,
    pub stopped_early: bool,
}

impl From<&TrainHistory> for TrainingSummary {
    fn from(h: &TrainHistory) -> Self {
        TrainingSummary {
            epochs_run: h.epochs_run(),
            best_epoch: h.best_epoch,
            best_validation_loss: h.best_validation_loss(),
            stopped_early: h.stopped_early,
        }
    }
}

/// Scores on the rows held out from training.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "task", rename_all = "lowercase"))]
pub enum HeldOutReport {
    Classification { confusion: ConfusionMatrix, report: ClassificationReport },
    Regression { metrics: RegressionMetrics },
}

/// Everything inference needs: graph, weights, input scaler, and the target
/// scaler or label codec. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelArtifact {
    pub task: Task,
    pub feature_names: Vec<String>,
    pub graph: NetworkGraph,
    pub params: ParamStore,
    pub scaler: Scaler,
    /// Regression only; `None` means the network predicts WQI directly.
    pub target_scaler: Option<TargetScaler>,
    /// Classification only.
    pub label_codec: Option<LabelCodec>,
    pub training: TrainingSummary,
    pub held_out: Option<HeldOutReport>,
}

impl ModelArtifact {
    pub fn input_dim(&self) -> usize {
        self.graph.input_dim
    }

    fn require(&self, task: Task) -> Result<(), ModelError> {
        if self.task != task {
            return Err(ModelError::WrongTask { expected: task, found: self.task });
        }
        Ok(())
    }

    /// Raw network outputs for unscaled feature rows: class probabilities,
    /// or WQI values after undoing the target scaling.
    pub fn predict_rows(&self, features: &Matrix) -> Result<Vec<Vec<f64>>, ModelError> {
        if features.cols() != self.input_dim() {
            return Err(ModelError::FeatureCount { expected: self.input_dim(), found: features.cols() });
        }
        if features.as_slice().iter().any(|v| !v.is_finite()) {
            return Err(ModelError::NonFiniteInput);
        }
        let x = self.scaler.apply(features, Direction::Forward)?;
        let out = predict(&self.graph, &self.params, &Tensor::matrix(x.rows(), x.cols(), x.into_vec()))?;
        let mut rows: Vec<Vec<f64>> = (0..out.batch()).map(|i| out.row(i).to_vec()).collect();
        if let Some(ts) = self.target_scaler {
            rows.iter_mut().flatten().for_each(|v| *v = ts.inverse(*v));
        }
        if rows.iter().flatten().any(|v| !v.is_finite()) {
            return Err(ModelError::NonFiniteOutput);
        }
        Ok(rows)
    }

    fn sample_row(&self, sample: &Sample) -> Result<Matrix, ModelError> {
        let f = sample.features();
        if f.iter().any(|v| !v.is_finite()) {
            return Err(ModelError::NonFiniteInput);
        }
        if self.input_dim() != f.len() {
            return Err(ModelError::FeatureCount { expected: self.input_dim(), found: f.len() });
        }
        Ok(Matrix::from_vec(1, f.len(), f.to_vec())?)
    }

    /// Predicted target per row: WQI for regression, class code for
    /// classification.
    pub fn predict_targets(&self, features: &Matrix) -> Result<Vec<f64>, ModelError> {
        let rows = self.predict_rows(features)?;
        Ok(match self.task {
            Task::Regression => rows.iter().map(|r| r[0]).collect(),
            Task::Classification => rows.iter().map(|r| f64::from(argmax(r))).collect(),
        })
    }
}

/// Index of the largest value; the lowest index wins ties.
pub fn argmax(values: &[f64]) -> u8 {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best as u8
}

/// WQI predicted for `sample` and its threshold class.
pub fn predict_wqi(artifact: &ModelArtifact, sample: &Sample) -> Result<(f64, WqiClass), ModelError> {
    artifact.require(Task::Regression)?;
    let wqi = artifact.predict_rows(&artifact.sample_row(sample)?)?[0][0];
    Ok((wqi, classify_wqi(wqi)?))
}

/// Most probable class and the probabilities in code order.
pub fn classify_sample(artifact: &ModelArtifact, sample: &Sample) -> Result<(WqiClass, Vec<f64>), ModelError> {
    artifact.require(Task::Classification)?;
    let probs = artifact.predict_rows(&artifact.sample_row(sample)?)?.swap_remove(0);
    let code = argmax(&probs);
    let class = match &artifact.label_codec {
        Some(codec) => codec.decode(code),
        None => WqiClass::from_code(code),
    };
    Ok((class.ok_or(ModelError::Data(DataError::BadClassCode(f64::from(code))))?, probs))
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PipelineConfig {
    pub test_fraction: f64,
    pub split_seed: u64,
    pub init_seed: u64,
    /// Applied to the classifier's fitting rows only.
    pub smote: Option<SmoteConfig>,
    /// `None` uses each architecture's default (0.2 for the classifier, none
    /// for the regressor).
    pub dropout: Option<f64>,
    /// The loss is overridden to match the task.
    pub train: TrainConfig,
    pub adam: AdamConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            test_fraction: 0.2,
            split_seed: 42,
            init_seed: 42,
            smote: None,
            dropout: None,
            train: TrainConfig::default(),
            adam: AdamConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn with_hyper(mut self, h: &HyperParams) -> Self {
        self.train.batch_size = h.batch_size;
        self.adam.learning_rate = h.learning_rate;
        self.dropout = Some(h.dropout_rate);
        self
    }

    /// One seed for splitting, initialization and shuffling.
    pub fn seeded(mut self, seed: u64) -> Self {
        self.split_seed = seed;
        self.init_seed = seed;
        self.train.shuffle_seed = seed;
        self
    }
}

fn task_dataset(raw: &Dataset, task: Task) -> Result<Dataset, ModelError> {
    match (raw.task, task) {
        (a, b) if a == b => Ok(raw.clone()),
        (Task::Regression, Task::Classification) => Ok(raw.to_classification()?),
        (found, expected) => Err(ModelError::WrongTask { expected, found }),
    }
}

pub fn build_for_task(task: Task, input_dim: usize, n_classes: usize, dropout: Option<f64>) -> Result<NetworkGraph, ModelError> {
    match task {
        Task::Classification => build_mlp_classifier_with(input_dim, n_classes, dropout.unwrap_or(MLP_DROPOUT)),
        Task::Regression => build_hybrid_regressor_with(input_dim, dropout.unwrap_or(0.0)),
    }
}

/// Standardizes, trains on every row of `train_set` (less the internal
/// validation share) and returns an artifact without a held-out report.
pub fn fit(train_set: &Dataset, config: &PipelineConfig) -> Result<(ModelArtifact, TrainHistory), ModelError> {
    let scaler = fit_scaler(&train_set.features)?;
    let mut ds = train_set.clone();
    ds.features = scaler.apply(&ds.features, Direction::Forward)?;
    let mut train_cfg = config.train;
    let target_scaler = match ds.task {
        Task::Regression => {
            let ts = TargetScaler::fit(&ds.targets)?;
            ds.targets.iter_mut().for_each(|t| *t = ts.forward(*t));
            train_cfg.loss = Loss::Mse;
            train_cfg.smote = None;
            Some(ts)
        }
        Task::Classification => {
            train_cfg.loss = Loss::CrossEntropy;
            train_cfg.smote = config.smote;
            None
        }
    };
    let graph = build_for_task(ds.task, ds.dim(), WqiClass::COUNT, config.dropout)?;
    let params = init_network(&graph, config.init_seed)?;
    let (params, history) = train(&graph, params, &ds, &train_cfg, &config.adam)?;
    let artifact = ModelArtifact {
        task: ds.task,
        feature_names: ds.feature_names.clone(),
        graph,
        params,
        scaler,
        target_scaler,
        label_codec: (ds.task == Task::Classification).then(LabelCodec::wqi),
        training: TrainingSummary::from(&history),
        held_out: None,
    };
    Ok((artifact, history))
}

/// Held-out report of `artifact` on `test`.
pub fn evaluate(artifact: &ModelArtifact, test: &Dataset) -> Result<HeldOutReport, ModelError> {
    artifact.require(test.task)?;
    let pred = artifact.predict_targets(&test.features)?;
    Ok(match test.task {
        Task::Regression => HeldOutReport::Regression { metrics: RegressionMetrics::compute(&test.targets, &pred)? },
        Task::Classification => {
            let predicted: Vec<u8> = pred.iter().map(|&p| p as u8).collect();
            let confusion = evaluation::confusion_matrix(&test.class_codes(), &predicted, WqiClass::COUNT)?;
            let report = evaluation::classification_report(&confusion)?;
            HeldOutReport::Classification { confusion, report }
        }
    })
}

/// Split, standardize, optionally oversample, train and evaluate on the
/// held-out rows. A regression dataset may be used for classification; its
/// WQI values are thresholded into classes first.
pub fn train_pipeline(raw: &Dataset, task: Task, config: &PipelineConfig) -> Result<(ModelArtifact, TrainHistory), ModelError> {
    let ds = task_dataset(raw, task)?;
    let (train_idx, test_idx) = split_indices(&ds, config.test_fraction, config.split_seed)?;
    let (mut artifact, history) = fit(&ds.subset(&train_idx), config)?;
    artifact.held_out = Some(evaluate(&artifact, &ds.subset(&test_idx))?);
    Ok((artifact, history))
}

/// The pipeline as a cross-validation recipe; hyperparameters override
/// batch size, learning rate and dropout.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineRecipe {
    pub config: PipelineConfig,
}

impl Recipe for PipelineRecipe {
    fn fit_predict(&self, hyper: &HyperParams, train_set: &Dataset, test: &Dataset) -> Result<Vec<f64>, EvalError> {
        let cfg = self.config.with_hyper(hyper);
        let run = || -> Result<Vec<f64>, ModelError> { fit(train_set, &cfg)?.0.predict_targets(&test.features) };
        run().map_err(|e| match e {
            ModelError::Eval(e) => e,
            ModelError::Train(e) => EvalError::Train(e),
            ModelError::Nn(e) => EvalError::Train(e.into()),
            ModelError::Data(e) => EvalError::Train(e.into()),
            _ => EvalError::InvalidConfig("model rejected the fold"),
        })
    }
}

/// Default hyperparameters of a task's model.
pub fn default_hyper(task: Task) -> HyperParams {
    HyperParams {
        batch_size: 32,
        learning_rate: 0.001,
        dropout_rate: if task == Task::Classification { MLP_DROPOUT } else { 0.0 },
    }
}
