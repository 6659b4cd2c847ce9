//! Classification and regression metrics, stratified k-fold cross-validation
//! and nested cross-validation with a hyperparameter grid.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::data::{Dataset, Task};
use crate::rng;
use crate::training::TrainError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("inputs differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("no values to score")]
    Empty,
    #[error("class code {0} is out of range")]
    CodeOutOfRange(u8),
    #[error("confusion matrix is empty")]
    EmptyMatrix,
    #[error("observed values are constant")]
    ConstantObserved,
    #[error("class {code} has {count} rows, fewer than the {k} folds")]
    ClassSmallerThanK { code: u8, count: usize, k: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(&'static str),
    #[error(transparent)]
    Train(#[from] TrainError),
}

/// `counts[actual][predicted]`.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ConfusionMatrix {
    pub k: usize,
    pub counts: Vec<Vec<u64>>,
}

pub fn confusion_matrix(actual: &[u8], predicted: &[u8], k: usize) -> Result<ConfusionMatrix, EvalError> {
    if actual.len() != predicted.len() {
        return Err(EvalError::LengthMismatch(actual.len(), predicted.len()));
    }
    let mut counts = vec![vec![0u64; k]; k];
    for (&a, &p) in actual.iter().zip(predicted) {
        if usize::from(a) >= k {
            return Err(EvalError::CodeOutOfRange(a));
        }
        if usize::from(p) >= k {
            return Err(EvalError::CodeOutOfRange(p));
        }
        counts[usize::from(a)][usize::from(p)] += 1;
    }
    Ok(ConfusionMatrix { k, counts })
}

impl ConfusionMatrix {
    pub fn from_counts(counts: Vec<Vec<u64>>) -> Result<Self, EvalError> {
        let k = counts.len();
        if counts.iter().any(|r| r.len() != k) {
            return Err(EvalError::InvalidConfig("confusion matrix must be square"));
        }
        Ok(ConfusionMatrix { k, counts })
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.k).map(|c| self.counts[c][c]).sum()
    }

    pub fn tp(&self, c: usize) -> u64 {
        self.counts[c][c]
    }

    /// Row `c` minus the diagonal.
    pub fn false_negatives(&self, c: usize) -> u64 {
        self.counts[c].iter().sum::<u64>() - self.tp(c)
    }

    /// Column `c` minus the diagonal.
    pub fn false_positives(&self, c: usize) -> u64 {
        self.counts.iter().map(|r| r[c]).sum::<u64>() - self.tp(c)
    }

    pub fn true_negatives(&self, c: usize) -> u64 {
        self.total() - self.tp(c) - self.false_negatives(c) - self.false_positives(c)
    }

    pub fn support(&self, c: usize) -> u64 {
        self.counts[c].iter().sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ClassificationReport {
    pub classes: Vec<ClassMetrics>,
    pub accuracy: f64,
    pub macro_avg: ClassMetrics,
    pub weighted_avg: ClassMetrics,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Precision `TP/(TP+FP)`, recall `TP/(TP+FN)` and F1 per class, with every
/// 0/0 cell reported as 0.
pub fn classification_report(cm: &ConfusionMatrix) -> Result<ClassificationReport, EvalError> {
    let total = cm.total();
    if total == 0 {
        return Err(EvalError::EmptyMatrix);
    }
    let classes: Vec<ClassMetrics> = (0..cm.k)
        .map(|c| {
            let tp = cm.tp(c);
            let precision = ratio(tp, tp + cm.false_positives(c));
            let recall = ratio(tp, tp + cm.false_negatives(c));
            let f1 = if precision + recall > 0.0 { 2.0 * precision * recall / (precision + recall) } else { 0.0 };
            ClassMetrics { precision, recall, f1, support: cm.support(c) }
        })
        .collect();
    let k = cm.k as f64;
    let mean = |f: fn(&ClassMetrics) -> f64| classes.iter().map(f).sum::<f64>() / k;
    let weighted = |f: fn(&ClassMetrics) -> f64| classes.iter().map(|m| f(m) * m.support as f64).sum::<f64>() / total as f64;
    Ok(ClassificationReport {
        accuracy: ratio(cm.trace(), total),
        macro_avg: ClassMetrics { precision: mean(|m| m.precision), recall: mean(|m| m.recall), f1: mean(|m| m.f1), support: total },
        weighted_avg: ClassMetrics {
            precision: weighted(|m| m.precision),
            recall: weighted(|m| m.recall),
            f1: weighted(|m| m.f1),
            support: total,
        },
        classes,
    })
}

fn check_pair(observed: &[f64], predicted: &[f64]) -> Result<(), EvalError> {
    if observed.len() != predicted.len() {
        return Err(EvalError::LengthMismatch(observed.len(), predicted.len()));
    }
    if observed.is_empty() {
        return Err(EvalError::Empty);
    }
    Ok(())
}

/// Root mean squared error.
pub fn rmse(observed: &[f64], predicted: &[f64]) -> Result<f64, EvalError> {
    check_pair(observed, predicted)?;
    let ss: f64 = observed.iter().zip(predicted).map(|(a, p)| (a - p) * (a - p)).sum();
    Ok(libm::sqrt(ss / observed.len() as f64))
}

/// Coefficient of determination `(SS_tot − SS_res)/SS_tot`.
pub fn r2(observed: &[f64], predicted: &[f64]) -> Result<f64, EvalError> {
    check_pair(observed, predicted)?;
    if observed.len() < 2 {
        return Err(EvalError::ConstantObserved);
    }
    let mean = observed.iter().sum::<f64>() / observed.len() as f64;
    let ss_tot: f64 = observed.iter().map(|a| (a - mean) * (a - mean)).sum();
    if ss_tot == 0.0 {
        return Err(EvalError::ConstantObserved);
    }
    let ss_res: f64 = observed.iter().zip(predicted).map(|(a, p)| (a - p) * (a - p)).sum();
    Ok((ss_tot - ss_res) / ss_tot)
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RegressionMetrics {
    pub observed: Vec<f64>,
    pub predicted: Vec<f64>,
    pub observed_mean: f64,
    pub n: usize,
    pub rmse: f64,
    pub r2: f64,
}

impl RegressionMetrics {
    pub fn compute(observed: &[f64], predicted: &[f64]) -> Result<Self, EvalError> {
        Ok(RegressionMetrics {
            rmse: rmse(observed, predicted)?,
            r2: r2(observed, predicted)?,
            observed_mean: observed.iter().sum::<f64>() / observed.len() as f64,
            n: observed.len(),
            observed: observed.to_vec(),
            predicted: predicted.to_vec(),
        })
    }
}

pub fn accuracy(actual: &[f64], predicted: &[f64]) -> Result<f64, EvalError> {
    check_pair(actual, predicted)?;
    let hits = actual.iter().zip(predicted).filter(|(a, p)| a == p).count();
    Ok(hits as f64 / actual.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum ScoreKind {
    Accuracy,
    R2,
    Rmse,
}

impl ScoreKind {
    pub fn score(self, actual: &[f64], predicted: &[f64]) -> Result<f64, EvalError> {
        match self {
            ScoreKind::Accuracy => accuracy(actual, predicted),
            ScoreKind::R2 => r2(actual, predicted),
            ScoreKind::Rmse => rmse(actual, predicted),
        }
    }

    pub fn higher_is_better(self) -> bool {
        !matches!(self, ScoreKind::Rmse)
    }

    pub fn name(self) -> &'static str {
        match self {
            ScoreKind::Accuracy => "accuracy",
            ScoreKind::R2 => "r2",
            ScoreKind::Rmse => "rmse",
        }
    }
}

/// Fold scores with their mean and sample (n − 1) standard deviation.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CvSummary {
    pub fold_scores: Vec<f64>,
    pub mean: f64,
    pub sample_sd: f64,
}

impl CvSummary {
    pub fn from_scores(fold_scores: Vec<f64>) -> Result<Self, EvalError> {
        if fold_scores.is_empty() {
            return Err(EvalError::Empty);
        }
        let n = fold_scores.len() as f64;
        let mean = fold_scores.iter().sum::<f64>() / n;
        let sample_sd = if fold_scores.len() < 2 {
            0.0
        } else {
            libm::sqrt(fold_scores.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / (n - 1.0))
        };
        Ok(CvSummary { fold_scores, mean, sample_sd })
    }
}

/// Test-row indices of each of `k` folds.
///
/// Classification rows are shuffled within each class, the classes are laid
/// end to end and dealt round-robin, so every class's per-fold counts differ
/// by at most one. Regression rows are shuffled and dealt the same way.
pub fn kfold_indices(dataset: &Dataset, k: usize, seed: u64) -> Result<Vec<Vec<usize>>, EvalError> {
    if k < 2 {
        return Err(EvalError::InvalidConfig("k must be at least 2"));
    }
    if dataset.len() < k {
        return Err(EvalError::InvalidConfig("fewer rows than folds"));
    }
    let mut rng = rng::seeded(seed);
    let mut order = Vec::with_capacity(dataset.len());
    match dataset.task {
        Task::Classification => {
            for (code, mut members) in dataset.class_indices().into_iter().enumerate() {
                if !members.is_empty() && members.len() < k {
                    return Err(EvalError::ClassSmallerThanK { code: code as u8, count: members.len(), k });
                }
                members.shuffle(&mut rng);
                order.extend(members);
            }
        }
        Task::Regression => {
            order.extend(0..dataset.len());
            order.shuffle(&mut rng);
        }
    }
    let mut folds = vec![Vec::new(); k];
    for (pos, i) in order.into_iter().enumerate() {
        folds[pos % k].push(i);
    }
    folds.iter_mut().for_each(|f| f.sort_unstable());
    Ok(folds)
}

/// Rows of `0..n` outside `fold`; `fold` must be sorted.
pub fn complement(n: usize, fold: &[usize]) -> Vec<usize> {
    (0..n).filter(|i| fold.binary_search(i).is_err()).collect()
}

/// Hyperparameters searched by nested cross-validation.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct HyperParams {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub dropout_rate: f64,
}

impl Default for HyperParams {
    fn default() -> Self {
        HyperParams { batch_size: 32, learning_rate: 0.001, dropout_rate: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GridSpec {
    pub batch_sizes: Vec<usize>,
    pub learning_rates: Vec<f64>,
    pub dropout_rates: Vec<f64>,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { batch_sizes: vec![16, 32], learning_rates: vec![0.01, 0.001], dropout_rates: vec![0.0, 0.2] }
    }
}

impl GridSpec {
    pub fn single(h: HyperParams) -> Self {
        GridSpec { batch_sizes: vec![h.batch_size], learning_rates: vec![h.learning_rate], dropout_rates: vec![h.dropout_rate] }
    }

    /// Every combination; batch size varies slowest, dropout fastest.
    pub fn candidates(&self) -> Vec<HyperParams> {
        let mut out = Vec::new();
        for &batch_size in &self.batch_sizes {
            for &learning_rate in &self.learning_rates {
                for &dropout_rate in &self.dropout_rates {
                    out.push(HyperParams { batch_size, learning_rate, dropout_rate });
                }
            }
        }
        out
    }

    pub fn validate(&self) -> Result<(), EvalError> {
        if self.batch_sizes.is_empty() || self.learning_rates.is_empty() || self.dropout_rates.is_empty() {
            return Err(EvalError::InvalidConfig("every grid axis needs at least one value"));
        }
        Ok(())
    }
}

/// Trains on one dataset and predicts the targets of another: class codes for
/// classification, WQI values for regression. All preprocessing belongs
/// inside, so it only ever sees the training rows.
pub trait Recipe {
    fn fit_predict(&self, hyper: &HyperParams, train: &Dataset, test: &Dataset) -> Result<Vec<f64>, EvalError>;
}

impl<F> Recipe for F
where
    F: Fn(&HyperParams, &Dataset, &Dataset) -> Result<Vec<f64>, EvalError>,
{
    fn fit_predict(&self, hyper: &HyperParams, train: &Dataset, test: &Dataset) -> Result<Vec<f64>, EvalError> {
        self(hyper, train, test)
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CvReport {
    pub score: ScoreKind,
    pub summary: CvSummary,
    /// Test-row indices per fold.
    pub folds: Vec<Vec<usize>>,
}

/// k-fold cross-validation with [`kfold_indices`] folds.
pub fn stratified_kfold_cv(
    dataset: &Dataset,
    k: usize,
    seed: u64,
    hyper: &HyperParams,
    recipe: &dyn Recipe,
    score: ScoreKind,
) -> Result<CvReport, EvalError> {
    let folds = kfold_indices(dataset, k, seed)?;
    let scores = folds
        .iter()
        .map(|fold| {
            let train = dataset.subset(&complement(dataset.len(), fold));
            let test = dataset.subset(fold);
            let pred = recipe.fit_predict(hyper, &train, &test)?;
            score.score(&test.targets, &pred)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(CvReport { score, summary: CvSummary::from_scores(scores)?, folds })
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OuterFold {
    pub chosen: HyperParams,
    /// Mean inner score of every grid candidate, in enumeration order.
    pub inner_scores: Vec<f64>,
    pub r2: f64,
    pub rmse: f64,
    pub test_indices: Vec<usize>,
    /// Inner test folds, as indices into the full dataset.
    pub inner_folds: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NestedCvReport {
    pub folds: Vec<OuterFold>,
    pub r2: CvSummary,
    pub rmse: CvSummary,
}

/// Nested cross-validation of a regression recipe.
///
/// For each outer fold an inner `inner_k`-fold search over `grid`, run on the
/// outer-training rows only, picks the candidate with the best mean inner
/// `selection` score (first in enumeration order on ties). That candidate is
/// refit on all outer-training rows and scored on the outer test fold.
/// The outer folds are the same as [`stratified_kfold_cv`] with `seed`.
pub fn nested_cv(
    dataset: &Dataset,
    outer_k: usize,
    inner_k: usize,
    grid: &GridSpec,
    seed: u64,
    recipe: &dyn Recipe,
    selection: ScoreKind,
) -> Result<NestedCvReport, EvalError> {
    grid.validate()?;
    if dataset.task != Task::Regression {
        return Err(EvalError::InvalidConfig("nested cross-validation scores regression recipes"));
    }
    if inner_k < 2 {
        return Err(EvalError::InvalidConfig("inner k must be at least 2"));
    }
    let candidates = grid.candidates();
    let outer = kfold_indices(dataset, outer_k, seed)?;
    let mut folds = Vec::with_capacity(outer_k);
    for (f, test_idx) in outer.iter().enumerate() {
        let train_idx = complement(dataset.len(), test_idx);
        let outer_train = dataset.subset(&train_idx);
        let inner = kfold_indices(&outer_train, inner_k, rng::mix(seed, f as u64 + 1))?;
        let mut inner_scores = Vec::with_capacity(candidates.len());
        for hyper in &candidates {
            let mut total = 0.0;
            for fold in &inner {
                let fit = outer_train.subset(&complement(outer_train.len(), fold));
                let held = outer_train.subset(fold);
                let pred = recipe.fit_predict(hyper, &fit, &held)?;
                total += selection.score(&held.targets, &pred)?;
            }
            inner_scores.push(total / inner.len() as f64);
        }
        let mut best = 0;
        for (i, &s) in inner_scores.iter().enumerate().skip(1) {
            let better = if selection.higher_is_better() { s > inner_scores[best] } else { s < inner_scores[best] };
            // NaN never wins
            if better {
                best = i;
            }
        }
        let chosen = candidates[best];
        let test = dataset.subset(test_idx);
        let pred = recipe.fit_predict(&chosen, &outer_train, &test)?;
        folds.push(OuterFold {
            chosen,
            inner_scores,
            r2: r2(&test.targets, &pred)?,
            rmse: rmse(&test.targets, &pred)?,
            test_indices: test_idx.clone(),
            inner_folds: inner.iter().map(|fold| fold.iter().map(|&i| train_idx[i]).collect()).collect(),
        });
    }
    let r2s = CvSummary::from_scores(folds.iter().map(|f| f.r2).collect())?;
    let rmses = CvSummary::from_scores(folds.iter().map(|f| f.rmse).collect())?;
    Ok(NestedCvReport { folds, r2: r2s, rmse: rmses })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Matrix;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn confusion_hand_tally() {
        let cm = confusion_matrix(&[0, 0, 1, 1, 2, 2], &[0, 0, 1, 0, 2, 2], 3).unwrap();
        assert_eq!(cm.counts[1][0], 1);
        assert_eq!((cm.tp(0), cm.tp(1), cm.tp(2)), (2, 1, 2));
        assert_eq!(cm.false_positives(0), 1);
        assert_eq!(cm.false_negatives(1), 1);
        assert_eq!(cm.true_negatives(2), 4);
        let r = classification_report(&cm).unwrap();
        assert!(close(r.accuracy, 5.0 / 6.0, 1e-15));
        assert_eq!(r.classes[1].recall, 0.5);
        assert!(close(r.classes[0].precision, 2.0 / 3.0, 1e-15));
    }

    #[test]
    fn perfect_predictions() {
        let cm = confusion_matrix(&[0, 1, 2], &[0, 1, 2], 3).unwrap();
        assert_eq!(cm.counts, vec![vec![1, 0, 0], vec![0, 1, 0], vec![0, 0, 1]]);
        let r = classification_report(&cm).unwrap();
        for m in r.classes.iter().chain([&r.macro_avg, &r.weighted_avg]) {
            assert_eq!((m.precision, m.recall, m.f1), (1.0, 1.0, 1.0));
        }
        assert_eq!(r.accuracy, 1.0);
    }

    #[test]
    fn empty_predicted_class_is_zero() {
        let cm = confusion_matrix(&[0, 1, 1], &[0, 0, 0], 3).unwrap();
        let r = classification_report(&cm).unwrap();
        assert_eq!(r.classes[1].precision, 0.0);
        assert_eq!(r.classes[2], ClassMetrics { precision: 0.0, recall: 0.0, f1: 0.0, support: 0 });
    }

    #[test]
    fn confusion_errors() {
        assert_eq!(confusion_matrix(&[0, 3], &[0, 0], 3), Err(EvalError::CodeOutOfRange(3)));
        assert_eq!(confusion_matrix(&[0], &[0, 0], 3), Err(EvalError::LengthMismatch(1, 2)));
        let empty = ConfusionMatrix::from_counts(vec![vec![0; 3]; 3]).unwrap();
        assert_eq!(classification_report(&empty), Err(EvalError::EmptyMatrix));
    }

    #[test]
    fn regression_examples() {
        assert_eq!(rmse(&[1.0, 2.0], &[1.0, 2.0]), Ok(0.0));
        assert!(close(rmse(&[1.0, 2.0, 3.0], &[1.0, 2.0, 4.0]).unwrap(), libm::sqrt(1.0 / 3.0), 1e-15));
        assert!(close(rmse(&[1.0, -2.0, 3.0], &[3.5, 0.5, 5.5]).unwrap(), 2.5, 1e-15));
        assert_eq!(r2(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]), Ok(1.0));
        assert_eq!(r2(&[1.0, 2.0, 3.0], &[2.0, 2.0, 2.0]), Ok(0.0));
        assert_eq!(r2(&[1.0, 2.0, 3.0], &[1.0, 2.0, 4.0]), Ok(0.5));
        assert_eq!(r2(&[2.0, 2.0], &[1.0, 2.0]), Err(EvalError::ConstantObserved));
        assert_eq!(rmse(&[], &[]), Err(EvalError::Empty));
    }

    #[test]
    fn summary_of_printed_folds() {
        let s = CvSummary::from_scores(vec![0.92, 0.94, 0.89, 0.88, 0.95, 0.91, 0.95, 0.87, 0.96, 0.92]).unwrap();
        assert!(close(s.mean, 0.919, 1e-12));
        assert!(close(s.sample_sd, 0.0314, 5e-5));
    }

    fn classes(counts: &[usize]) -> Dataset {
        let mut rows = Vec::new();
        let mut codes = Vec::new();
        for (c, &n) in counts.iter().enumerate() {
            for i in 0..n {
                rows.push([i as f64, c as f64]);
                codes.push(c as u8);
            }
        }
        Dataset::classification(Matrix::from_rows(&rows).unwrap(), &codes).unwrap()
    }

    #[test]
    fn balanced_folds_hold_one_per_class() {
        let ds = classes(&[10, 10, 10]);
        let folds = kfold_indices(&ds, 10, 3).unwrap();
        for f in &folds {
            let mut codes: Vec<u8> = f.iter().map(|&i| ds.class_codes()[i]).collect();
            codes.sort_unstable();
            assert_eq!(codes, vec![0, 1, 2]);
        }
        assert_eq!(folds, kfold_indices(&ds, 10, 3).unwrap());
    }

    #[test]
    fn small_class_rejected() {
        let ds = classes(&[10, 4, 10]);
        assert_eq!(kfold_indices(&ds, 5, 1), Err(EvalError::ClassSmallerThanK { code: 1, count: 4, k: 5 }));
    }

    #[test]
    fn grid_order() {
        let c = GridSpec::default().candidates();
        assert_eq!(c.len(), 8);
        assert_eq!(c[0], HyperParams { batch_size: 16, learning_rate: 0.01, dropout_rate: 0.0 });
        assert_eq!(c[1], HyperParams { batch_size: 16, learning_rate: 0.01, dropout_rate: 0.2 });
        assert_eq!(c[7], HyperParams { batch_size: 32, learning_rate: 0.001, dropout_rate: 0.2 });
        let empty = GridSpec { batch_sizes: vec![], ..GridSpec::default() };
        assert!(empty.validate().is_err());
    }

    fn linear_regression_set(n: usize) -> Dataset {
        let rows: Vec<[f64; 1]> = (0..n).map(|i| [i as f64]).collect();
        let y = (0..n).map(|i| 3.0 * i as f64 + if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        Dataset::regression(Matrix::from_rows(&rows).unwrap(), y).unwrap()
    }

    /// Predicts `learning_rate · 3x`: rate 1 is the right slope.
    fn slope_recipe(h: &HyperParams, _train: &Dataset, test: &Dataset) -> Result<Vec<f64>, EvalError> {
        Ok(test.features.iter_rows().map(|r| h.learning_rate * 3.0 * r[0]).collect())
    }

    #[test]
    fn nested_cv_picks_the_right_candidate() {
        let ds = linear_regression_set(40);
        let grid = GridSpec { batch_sizes: vec![32], learning_rates: vec![0.5, 1.0, 1.0], dropout_rates: vec![0.0] };
        let rep = nested_cv(&ds, 4, 3, &grid, 11, &slope_recipe, ScoreKind::R2).unwrap();
        assert_eq!(rep.folds.len(), 4);
        for f in &rep.folds {
            assert_eq!(f.chosen.learning_rate, 1.0);
            assert_eq!(f.inner_scores[1], f.inner_scores[2]);
            for inner in &f.inner_folds {
                assert!(inner.iter().all(|i| !f.test_indices.contains(i)));
            }
        }
    }

    #[test]
    fn single_candidate_matches_plain_cv() {
        let ds = linear_regression_set(30);
        let h = HyperParams { learning_rate: 0.9, ..Default::default() };
        let nested = nested_cv(&ds, 5, 2, &GridSpec::single(h), 4, &slope_recipe, ScoreKind::R2).unwrap();
        let plain = stratified_kfold_cv(&ds, 5, 4, &h, &slope_recipe, ScoreKind::R2).unwrap();
        assert_eq!(nested.r2.fold_scores, plain.summary.fold_scores);
    }
}
