//! Datasets, WQI thresholds, the label codec, standardization, stratified
//! splitting and the seeded synthetic generator.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, Normal};

use crate::rng;

/// Column order of every feature matrix and of the canonical CSV.
pub const FEATURE_NAMES: [&str; 4] = ["temperature", "ph", "ec", "do"];

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DataError {
    #[error("value is not finite")]
    NonFiniteInput,
    #[error("pH {0} outside [0, 14]")]
    PhOutOfRange(f64),
    #[error("column {0} has zero variance")]
    ZeroVariance(usize),
    #[error("at least two rows are required")]
    TooFewRows,
    #[error("expected {expected} columns, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("class {0} has too few members")]
    ClassTooSmall(u8),
    #[error("target {0} is not a class code")]
    BadClassCode(f64),
    #[error("{0} rows of features but {1} targets")]
    LengthMismatch(usize, usize),
    #[error("invalid configuration: {0}")]
    InvalidConfig(&'static str),
}

/// WQI class with its fixed integer encoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum WqiClass {
    Average = 0,
    Good = 1,
    Poor = 2,
}

impl WqiClass {
    pub const ALL: [WqiClass; 3] = [WqiClass::Average, WqiClass::Good, WqiClass::Poor];
    pub const COUNT: usize = 3;

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(WqiClass::Average),
            1 => Some(WqiClass::Good),
            2 => Some(WqiClass::Poor),
            _ => None,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            WqiClass::Average => "Average",
            WqiClass::Good => "Good",
            WqiClass::Poor => "Poor",
        }
    }

    pub fn from_label(label: &str) -> Option<Self> {
        WqiClass::ALL.into_iter().find(|c| c.label().eq_ignore_ascii_case(label))
    }
}

impl fmt::Display for WqiClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Threshold a WQI value: `< 75` Good, `[75, 100]` Average, `> 100` Poor.
pub fn classify_wqi(wqi: f64) -> Result<WqiClass, DataError> {
    if !wqi.is_finite() {
        return Err(DataError::NonFiniteInput);
    }
    Ok(if wqi > 100.0 {
        WqiClass::Poor
    } else if wqi >= 75.0 {
        WqiClass::Average
    } else {
        WqiClass::Good
    })
}

/// One water measurement.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Sample {
    /// °C
    pub temperature: f64,
    pub ph: f64,
    /// µS/cm
    pub ec: f64,
    /// Dissolved oxygen, mg/L.
    #[cfg_attr(feature = "serde", serde(rename = "do"))]
    pub dissolved_oxygen: f64,
    #[cfg_attr(feature = "serde", serde(default, skip_serializing_if = "Option::is_none"))]
    pub wqi: Option<f64>,
}

impl Sample {
    pub fn new(temperature: f64, ph: f64, ec: f64, dissolved_oxygen: f64) -> Self {
        Sample { temperature, ph, ec, dissolved_oxygen, wqi: None }
    }

    pub fn features(&self) -> [f64; 4] {
        [self.temperature, self.ph, self.ec, self.dissolved_oxygen]
    }

    pub fn validate(&self) -> Result<(), DataError> {
        if self.features().iter().any(|v| !v.is_finite()) {
            return Err(DataError::NonFiniteInput);
        }
        if !(0.0..=14.0).contains(&self.ph) {
            return Err(DataError::PhOutOfRange(self.ph));
        }
        Ok(())
    }
}

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, DataError> {
        if data.len() != rows * cols {
            return Err(DataError::DimensionMismatch { expected: rows * cols, found: data.len() });
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self, DataError> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(DataError::DimensionMismatch { expected: cols, found: r.len() });
            }
            data.extend_from_slice(r);
        }
        Ok(Matrix { rows: rows.len(), cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.cols.max(1)).take(self.rows)
    }

    pub fn select_rows(&self, indices: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Matrix { rows: indices.len(), cols: self.cols, data }
    }

    pub fn push_row(&mut self, row: &[f64]) {
        assert_eq!(row.len(), self.cols, "row width");
        self.data.extend_from_slice(row);
        self.rows += 1;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Task {
    Regression,
    Classification,
}

/// Feature matrix plus one target per row: a WQI value for regression, a
/// class code (0, 1, 2) for classification.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Matrix,
    pub targets: Vec<f64>,
    pub feature_names: Vec<String>,
    pub task: Task,
}

impl Dataset {
    pub fn new(features: Matrix, targets: Vec<f64>, feature_names: Vec<String>, task: Task) -> Result<Self, DataError> {
        if features.rows() != targets.len() {
            return Err(DataError::LengthMismatch(features.rows(), targets.len()));
        }
        if feature_names.len() != features.cols() {
            return Err(DataError::DimensionMismatch { expected: features.cols(), found: feature_names.len() });
        }
        if features.as_slice().iter().chain(&targets).any(|v| !v.is_finite()) {
            return Err(DataError::NonFiniteInput);
        }
        if task == Task::Classification {
            if let Some(&bad) = targets.iter().find(|&&t| code_of(t).is_none()) {
                return Err(DataError::BadClassCode(bad));
            }
        }
        Ok(Dataset { features, targets, feature_names, task })
    }

    /// Regression dataset; four columns get the canonical feature names,
    /// other widths are named `x0, x1, ...`.
    pub fn regression(features: Matrix, wqi: Vec<f64>) -> Result<Self, DataError> {
        let names = default_names(features.cols());
        Dataset::new(features, wqi, names, Task::Regression)
    }

    pub fn classification(features: Matrix, codes: &[u8]) -> Result<Self, DataError> {
        let names = default_names(features.cols());
        Dataset::new(features, codes.iter().map(|&c| f64::from(c)).collect(), names, Task::Classification)
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            features: self.features.select_rows(indices),
            targets: indices.iter().map(|&i| self.targets[i]).collect(),
            feature_names: self.feature_names.clone(),
            task: self.task,
        }
    }

    /// Class codes of a classification dataset.
    pub fn class_codes(&self) -> Vec<u8> {
        self.targets.iter().map(|&t| code_of(t).unwrap_or(u8::MAX)).collect()
    }

    /// Converts a regression dataset to classification by thresholding the
    /// WQI targets.
    pub fn to_classification(&self) -> Result<Dataset, DataError> {
        match self.task {
            Task::Classification => Ok(self.clone()),
            Task::Regression => {
                let targets = self
                    .targets
                    .iter()
                    .map(|&w| classify_wqi(w).map(|c| f64::from(c.code())))
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(Dataset { targets, task: Task::Classification, ..self.clone() })
            }
        }
    }

    /// Row indices per class code (index = code).
    pub fn class_indices(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); WqiClass::COUNT];
        for (i, c) in self.class_codes().into_iter().enumerate() {
            out[usize::from(c)].push(i);
        }
        out
    }
}

fn default_names(d: usize) -> Vec<String> {
    if d == FEATURE_NAMES.len() {
        FEATURE_NAMES.iter().map(|s| s.to_string()).collect()
    } else {
        (0..d).map(|i| alloc::format!("x{i}")).collect()
    }
}

pub(crate) fn code_of(t: f64) -> Option<u8> {
    if t == 0.0 || t == 1.0 || t == 2.0 {
        Some(t as u8)
    } else {
        None
    }
}

/// Per-column standardization, population (1/n) standard deviation.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Scaler {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Inverse,
}

pub fn fit_scaler(features: &Matrix) -> Result<Scaler, DataError> {
    let n = features.rows();
    if n < 2 {
        return Err(DataError::TooFewRows);
    }
    let d = features.cols();
    let mut means = vec![0.0; d];
    for row in features.iter_rows() {
        for (m, v) in means.iter_mut().zip(row) {
            *m += v;
        }
    }
    for m in &mut means {
        *m /= n as f64;
    }
    let mut stds = vec![0.0; d];
    for row in features.iter_rows() {
        for ((s, v), m) in stds.iter_mut().zip(row).zip(&means) {
            *s += (v - m) * (v - m);
        }
    }
    for (j, s) in stds.iter_mut().enumerate() {
        *s = libm::sqrt(*s / n as f64);
        if !(*s > 0.0) {
            return Err(DataError::ZeroVariance(j));
        }
    }
    Ok(Scaler { means, stds })
}

impl Scaler {
    pub fn dim(&self) -> usize {
        self.means.len()
    }

    pub fn apply(&self, features: &Matrix, direction: Direction) -> Result<Matrix, DataError> {
        apply_scaler(self, features, direction)
    }

    pub fn forward_row(&self, row: &mut [f64]) {
        for ((v, m), s) in row.iter_mut().zip(&self.means).zip(&self.stds) {
            *v = (*v - m) / s;
        }
    }

    pub fn inverse_row(&self, row: &mut [f64]) {
        for ((v, m), s) in row.iter_mut().zip(&self.means).zip(&self.stds) {
            *v = *v * s + m;
        }
    }
}

pub fn apply_scaler(scaler: &Scaler, features: &Matrix, direction: Direction) -> Result<Matrix, DataError> {
    if features.cols() != scaler.dim() {
        return Err(DataError::DimensionMismatch { expected: scaler.dim(), found: features.cols() });
    }
    let mut out = features.clone();
    for i in 0..out.rows() {
        let row = out.row_mut(i);
        match direction {
            Direction::Forward => scaler.forward_row(row),
            Direction::Inverse => scaler.inverse_row(row),
        }
    }
    Ok(out)
}

/// Index form of [`stratified_split`]: `(train, test)`, each sorted ascending.
///
/// Classification splits each class separately, sending
/// `round(count * test_fraction)` members to the test side. Regression
/// shuffles all rows and splits once.
pub fn split_indices(dataset: &Dataset, test_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>), DataError> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(DataError::InvalidConfig("test fraction must lie in (0, 1)"));
    }
    let mut rng = rng::seeded(seed);
    let groups = match dataset.task {
        Task::Classification => {
            let groups = dataset.class_indices();
            for (code, g) in groups.iter().enumerate() {
                if g.len() == 1 {
                    return Err(DataError::ClassTooSmall(code as u8));
                }
            }
            groups
        }
        Task::Regression => vec![(0..dataset.len()).collect()],
    };
    let mut train = Vec::new();
    let mut test = Vec::new();
    for mut g in groups {
        g.shuffle(&mut rng);
        let n_test = libm::round(g.len() as f64 * test_fraction) as usize;
        test.extend_from_slice(&g[..n_test]);
        train.extend_from_slice(&g[n_test..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

pub fn stratified_split(dataset: &Dataset, test_fraction: f64, seed: u64) -> Result<(Dataset, Dataset), DataError> {
    let (train, test) = split_indices(dataset, test_fraction, seed)?;
    Ok((dataset.subset(&train), dataset.subset(&test)))
}

/// Coefficients of the synthetic WQI formula
/// `base + ph_weight·|ph − ph_neutral| + ec_weight·ec
///  + do_weight·max(0, do_floor − do) + temp_weight·|t − temp_ref|`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct WqiFormula {
    pub base: f64,
    pub ph_weight: f64,
    pub ph_neutral: f64,
    pub ec_weight: f64,
    pub do_weight: f64,
    pub do_floor: f64,
    pub temp_weight: f64,
    pub temp_ref: f64,
}

impl Default for WqiFormula {
    fn default() -> Self {
        WqiFormula {
            base: 30.0,
            ph_weight: 18.0,
            ph_neutral: 7.0,
            ec_weight: 0.04,
            do_weight: 6.0,
            do_floor: 6.0,
            temp_weight: 0.8,
            temp_ref: 22.0,
        }
    }
}

impl WqiFormula {
    pub fn evaluate(&self, temperature: f64, ph: f64, ec: f64, dissolved_oxygen: f64) -> f64 {
        self.base
            + self.ph_weight * libm::fabs(ph - self.ph_neutral)
            + self.ec_weight * ec
            + self.do_weight * (self.do_floor - dissolved_oxygen).max(0.0)
            + self.temp_weight * libm::fabs(temperature - self.temp_ref)
    }
}

/// Sampling ranges, inclusive of the lower bound.
pub const TEMPERATURE_RANGE: (f64, f64) = (10.0, 35.0);
pub const PH_RANGE: (f64, f64) = (5.5, 9.0);
pub const EC_RANGE: (f64, f64) = (100.0, 1500.0);
pub const DO_RANGE: (f64, f64) = (2.0, 10.0);

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SyntheticConfig {
    pub n: usize,
    pub seed: u64,
    pub noise_sd: f64,
    #[cfg_attr(feature = "serde", serde(default))]
    pub coefficients: WqiFormula,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig { n: 1000, seed: 7, noise_sd: 2.0, coefficients: WqiFormula::default() }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<(), DataError> {
        if self.n == 0 {
            return Err(DataError::InvalidConfig("n must be at least 1"));
        }
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            return Err(DataError::InvalidConfig("noise_sd must be finite and non-negative"));
        }
        Ok(())
    }
}

/// Regression dataset drawn from the seeded generator. Each row consumes five
/// draws in a fixed order (temperature, ph, ec, do, noise), so features do not
/// depend on `noise_sd`.
pub fn generate_synthetic(config: &SyntheticConfig) -> Result<Dataset, DataError> {
    config.validate()?;
    let mut rng = rng::seeded(config.seed);
    let noise = Normal::new(0.0, 1.0).expect("unit normal");
    let uniform = |rng: &mut rng::Rng, (lo, hi): (f64, f64)| lo + (hi - lo) * rng.random::<f64>();
    let mut features = Matrix::zeros(0, FEATURE_NAMES.len());
    let mut targets = Vec::with_capacity(config.n);
    for _ in 0..config.n {
        let t = uniform(&mut rng, TEMPERATURE_RANGE);
        let ph = uniform(&mut rng, PH_RANGE);
        let ec = uniform(&mut rng, EC_RANGE);
        let dox = uniform(&mut rng, DO_RANGE);
        let eps: f64 = noise.sample(&mut rng);
        features.push_row(&[t, ph, ec, dox]);
        targets.push(config.coefficients.evaluate(t, ph, ec, dox) + config.noise_sd * eps);
    }
    Dataset::regression(features, targets)
}
