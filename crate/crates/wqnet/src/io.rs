//! The canonical CSV format: header `temperature,ph,ec,do,wqi`, one sample
//! per row, `.` decimals, UTF-8.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use wqnet_core::data::{DataError, Dataset, Matrix, Task, FEATURE_NAMES};

pub const TARGET_COLUMN: &str = "wqi";

#[derive(Debug, thiserror::Error)]
pub enum CsvError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("empty file: no header row")]
    EmptyFile,
    #[error("missing column `{0}`")]
    MissingColumn(String),
    /// Data rows are numbered from 1, the header not counted.
    #[error("non-numeric cell at row {0}, column `{1}`")]
    NonNumericCell(usize, String),
    #[error("row {0}: {1}")]
    Malformed(usize, String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("only regression datasets (with WQI targets) can be written")]
    NotRegression,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CsvError + '_ {
    move |source| CsvError::Io { path: path.display().to_string(), source }
}

pub fn load_csv(path: &Path, task: Task) -> Result<Dataset, CsvError> {
    let mut text = String::new();
    File::open(path).and_then(|mut f| f.read_to_string(&mut text)).map_err(io_err(path))?;
    parse_csv(&text, task)
}

/// Reads the canonical format from memory. Column order is free and extra
/// columns are ignored. For classification the WQI targets are thresholded
/// into class codes.
pub fn parse_csv(text: &str, task: Task) -> Result<Dataset, CsvError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_reader(text.as_bytes());
    let mut records = reader.records();
    let header = match records.next() {
        None => return Err(CsvError::EmptyFile),
        Some(r) => r.map_err(|e| CsvError::Malformed(0, e.to_string()))?,
    };
    let wanted: Vec<&str> = FEATURE_NAMES.iter().copied().chain([TARGET_COLUMN]).collect();
    let positions = wanted
        .iter()
        .map(|name| header.iter().position(|h| h == *name).ok_or_else(|| CsvError::MissingColumn(name.to_string())))
        .collect::<Result<Vec<_>, _>>()?;

    let mut features = Vec::new();
    let mut targets = Vec::new();
    for (i, rec) in records.enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| CsvError::Malformed(row, e.to_string()))?;
        if rec.iter().all(|c| c.is_empty()) {
            continue;
        }
        for (name, &pos) in wanted.iter().zip(&positions) {
            let cell = rec.get(pos).unwrap_or("");
            let v: f64 = cell.parse().map_err(|_| CsvError::NonNumericCell(row, name.to_string()))?;
            if !v.is_finite() {
                return Err(CsvError::NonNumericCell(row, name.to_string()));
            }
            if *name == TARGET_COLUMN {
                targets.push(v);
            } else {
                features.push(v);
            }
        }
    }
    let n = targets.len();
    let ds = Dataset::regression(Matrix::from_vec(n, FEATURE_NAMES.len(), features)?, targets)?;
    Ok(match task {
        Task::Regression => ds,
        Task::Classification => ds.to_classification()?,
    })
}

/// Writes a regression dataset in the canonical format. Values use the
/// shortest representation that parses back to the same `f64`.
pub fn write_csv(path: &Path, dataset: &Dataset) -> Result<(), CsvError> {
    let mut file = File::create(path).map_err(io_err(path))?;
    file.write_all(to_csv(dataset)?.as_bytes()).map_err(io_err(path))
}

pub fn to_csv(dataset: &Dataset) -> Result<String, CsvError> {
    if dataset.task != Task::Regression || dataset.dim() != FEATURE_NAMES.len() {
        return Err(CsvError::NotRegression);
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    let header: Vec<&str> = FEATURE_NAMES.iter().copied().chain([TARGET_COLUMN]).collect();
    let row_err = |e: csv::Error| CsvError::Malformed(0, e.to_string());
    w.write_record(&header).map_err(row_err)?;
    for (row, y) in dataset.features.iter_rows().zip(&dataset.targets) {
        w.write_record(row.iter().chain([y]).map(|v| v.to_string())).map_err(row_err)?;
    }
    let bytes = w.into_inner().map_err(|e| CsvError::Malformed(0, e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_rows() {
        let ds = parse_csv("temperature,ph,ec,do,wqi\n22,7,400,6.5,60\n25,8,900,4,95.5\n", Task::Regression).unwrap();
        assert_eq!((ds.len(), ds.dim()), (2, 4));
        assert_eq!(ds.targets, vec![60.0, 95.5]);
    }

    #[test]
    fn bad_cell_names_row_and_column() {
        let text = "temperature,ph,ec,do,wqi\n1,7,1,1,1\n2,7,2,2,2\n3,7,abc,3,3\n";
        assert!(matches!(parse_csv(text, Task::Regression), Err(CsvError::NonNumericCell(3, c)) if c == "ec"));
    }

    #[test]
    fn missing_and_empty() {
        assert!(matches!(parse_csv("temperature,ph,ec,wqi\n1,2,3,4\n", Task::Regression), Err(CsvError::MissingColumn(c)) if c == "do"));
        assert!(matches!(parse_csv("", Task::Regression), Err(CsvError::EmptyFile)));
    }

    #[test]
    fn classification_thresholds() {
        let ds = parse_csv("wqi,do,ec,ph,temperature\n110,1,1,7,1\n88,2,2,7,2\n60,3,3,7,3\n", Task::Classification).unwrap();
        assert_eq!(ds.class_codes(), vec![2, 0, 1]);
        assert_eq!(ds.features.row(0), &[1.0, 7.0, 1.0, 1.0]);
    }
}
