//! Feature ingestion and report persistence.
//!
//! Features arrive as NPY (v1.0, little-endian, C order) or CSV files.
//! Every report the crate produces is written as a JSON envelope
//! `{schema_version, kind, params, payload}`; see [`Report`].

mod delimited;
mod manifest;
pub mod npy;
mod report;

use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use thiserror::Error;

pub use manifest::{DatasetManifest, ManifestEntry};
pub use report::{load_report, save_report, KernelMeta, Params, Report, SCHEMA_VERSION};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed NPY header: {0}")]
    MalformedHeader(String),
    #[error("expected a 2-D array, found {ndim} dimension(s)")]
    DimensionError { ndim: usize },
    #[error("unsupported NPY dtype {0:?}")]
    UnsupportedDtype(String),
    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("integer {value} at flat index {index} is not exactly representable as f64")]
    LossyInteger { index: usize, value: String },
    #[error("feature matrix must have at least 2 rows and 1 column, got {rows}x{cols}")]
    InvalidShape { rows: usize, cols: usize },
    #[error("malformed CSV at line {line}: {message}")]
    MalformedCsv { line: usize, message: String },
    #[error("duplicate sample id {0:?}")]
    DuplicateSampleId(String),
    #[error("{expected} sample ids for {rows} rows")]
    SampleIdCount { expected: usize, rows: usize },
    #[error("manifest entries disagree: {0}")]
    ManifestMismatch(String),
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("report schema violation: {0}")]
    Schema(String),
}

impl DataError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        DataError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

/// On-disk encoding of a feature matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureFormat {
    Npy,
    Csv,
}

impl FeatureFormat {
    /// Guesses the format from a file extension.
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "npy" => Some(FeatureFormat::Npy),
            "csv" => Some(FeatureFormat::Csv),
            _ => None,
        }
    }
}

impl std::str::FromStr for FeatureFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "npy" => Ok(FeatureFormat::Npy),
            "csv" => Ok(FeatureFormat::Csv),
            other => Err(format!("unknown feature format {other:?} (expected npy or csv)")),
        }
    }
}

/// `N x D` embeddings of a dataset, one row per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    data: DMatrix<f64>,
    sample_ids: Vec<String>,
    model_id: String,
}

impl FeatureMatrix {
    /// Validates shape, finiteness and id uniqueness.
    pub fn new(
        data: DMatrix<f64>,
        sample_ids: Vec<String>,
        model_id: impl Into<String>,
    ) -> Result<Self, DataError> {
        let (rows, cols) = data.shape();
        if rows < 2 || cols < 1 {
            return Err(DataError::InvalidShape { rows, cols });
        }
        if sample_ids.len() != rows {
            return Err(DataError::SampleIdCount {
                expected: sample_ids.len(),
                rows,
            });
        }
        for row in 0..rows {
            for col in 0..cols {
                if !data[(row, col)].is_finite() {
                    return Err(DataError::NonFinite { row, col });
                }
            }
        }
        let mut seen = std::collections::HashSet::with_capacity(rows);
        for id in &sample_ids {
            if !seen.insert(id.as_str()) {
                return Err(DataError::DuplicateSampleId(id.clone()));
            }
        }
        Ok(Self {
            data,
            sample_ids,
            model_id: model_id.into(),
        })
    }

    /// Features with row indices `"0".."N-1"` as sample ids.
    pub fn from_matrix(data: DMatrix<f64>, model_id: impl Into<String>) -> Result<Self, DataError> {
        let ids = (0..data.nrows()).map(|i| i.to_string()).collect();
        Self::new(data, ids, model_id)
    }

    pub fn n_samples(&self) -> usize {
        self.data.nrows()
    }

    pub fn dim(&self) -> usize {
        self.data.ncols()
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn sample_ids(&self) -> &[String] {
        &self.sample_ids
    }

    pub fn model_id(&self) -> &str {
        &self.model_id
    }

    pub fn with_model_id(mut self, model_id: impl Into<String>) -> Self {
        self.model_id = model_id.into();
        self
    }

    pub fn into_data(self) -> DMatrix<f64> {
        self.data
    }
}

/// Loads a feature file; the model id defaults to the file stem.
pub fn load_features(path: &Path, format: FeatureFormat) -> Result<FeatureMatrix, DataError> {
    let model_id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    match format {
        FeatureFormat::Npy => {
            let bytes = std::fs::read(path).map_err(|e| DataError::io(path, e))?;
            let data = npy::decode_matrix(&bytes)?;
            FeatureMatrix::from_matrix(data, model_id)
        }
        FeatureFormat::Csv => {
            let text = std::fs::read_to_string(path).map_err(|e| DataError::io(path, e))?;
            let (data, ids) = delimited::parse_features(&text)?;
            FeatureMatrix::new(data, ids, model_id)
        }
    }
}

/// Writes a real matrix as a little-endian `<f8` NPY v1.0 file.
pub fn save_npy(matrix: &DMatrix<f64>, path: &Path) -> Result<(), DataError> {
    std::fs::write(path, npy::encode_matrix(matrix)).map_err(|e| DataError::io(path, e))
}

/// Writes features as CSV with an `id` column.
pub fn save_features_csv(features: &FeatureMatrix, path: &Path) -> Result<(), DataError> {
    std::fs::write(path, delimited::format_features(features)).map_err(|e| DataError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_nan_with_position() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, f64::NAN, 4.0]);
        match FeatureMatrix::from_matrix(m, "m") {
            Err(DataError::NonFinite { row: 1, col: 0 }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_single_row_and_duplicates() {
        let m = DMatrix::from_row_slice(1, 2, &[1.0, 2.0]);
        assert!(matches!(
            FeatureMatrix::from_matrix(m, "m"),
            Err(DataError::InvalidShape { rows: 1, cols: 2 })
        ));
        let m = DMatrix::from_row_slice(2, 1, &[1.0, 2.0]);
        let ids = vec!["a".to_string(), "a".to_string()];
        assert!(matches!(
            FeatureMatrix::new(m, ids, "m"),
            Err(DataError::DuplicateSampleId(_))
        ));
    }

    #[test]
    fn format_from_extension() {
        assert_eq!(FeatureFormat::from_path(Path::new("a/b.NPY")), Some(FeatureFormat::Npy));
        assert_eq!(FeatureFormat::from_path(Path::new("b.csv")), Some(FeatureFormat::Csv));
        assert_eq!(FeatureFormat::from_path(Path::new("b.txt")), None);
    }
}
