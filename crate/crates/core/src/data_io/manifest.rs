use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{load_features, DataError, FeatureFormat, FeatureMatrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub model_id: String,
    pub path: PathBuf,
    /// Inferred from the extension when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<FeatureFormat>,
}

/// A set of feature files computed by different models on the same samples.
///
/// On disk this is a JSON object:
///
/// ```json
/// {
///   "sample_ids": ["img0", "img1"],
///   "models": [{"model_id": "resnet", "path": "resnet.npy", "format": "npy"}]
/// }
/// ```
///
/// `sample_ids` is optional; relative paths resolve against the manifest's
/// directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_ids: Option<Vec<String>>,
    pub models: Vec<ManifestEntry>,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl DatasetManifest {
    pub fn load(path: &Path) -> Result<Self, DataError> {
        let text = std::fs::read_to_string(path).map_err(|e| DataError::io(path, e))?;
        let mut manifest: DatasetManifest = serde_json::from_str(&text)?;
        manifest.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(manifest)
    }

    pub fn save(&self, path: &Path) -> Result<(), DataError> {
        let text = serde_json::to_string_pretty(self)? + "\n";
        std::fs::write(path, text).map_err(|e| DataError::io(path, e))
    }

    fn resolve(&self, entry: &ManifestEntry) -> PathBuf {
        if entry.path.is_absolute() {
            entry.path.clone()
        } else {
            self.base_dir.join(&entry.path)
        }
    }

    /// Loads every entry in manifest order and checks that all files share the
    /// same rows and sample order.
    pub fn load_all(&self) -> Result<Vec<FeatureMatrix>, DataError> {
        let mut out: Vec<FeatureMatrix> = Vec::with_capacity(self.models.len());
        for entry in &self.models {
            let path = self.resolve(entry);
            let format = match entry.format {
                Some(f) => f,
                None => FeatureFormat::from_path(&path).ok_or_else(|| {
                    DataError::ManifestMismatch(format!(
                        "cannot infer format of {}",
                        path.display()
                    ))
                })?,
            };
            let features = load_features(&path, format)?.with_model_id(entry.model_id.clone());
            let features = match (&self.sample_ids, format) {
                (Some(ids), FeatureFormat::Npy) => {
                    let (data, id) = (features.data().clone(), entry.model_id.clone());
                    FeatureMatrix::new(data, ids.clone(), id)?
                }
                (Some(ids), FeatureFormat::Csv) if features.sample_ids() != ids.as_slice() => {
                    return Err(DataError::ManifestMismatch(format!(
                        "{} sample ids differ from the manifest's sample_ids",
                        path.display()
                    )))
                }
                _ => features,
            };
            if let Some(first) = out.first() {
                if first.n_samples() != features.n_samples() {
                    return Err(DataError::ManifestMismatch(format!(
                        "{} has {} rows but {} has {}",
                        entry.model_id,
                        features.n_samples(),
                        first.model_id(),
                        first.n_samples()
                    )));
                }
                if first.sample_ids() != features.sample_ids() {
                    return Err(DataError::ManifestMismatch(format!(
                        "{} and {} list samples in a different order",
                        entry.model_id,
                        first.model_id()
                    )));
                }
            }
            out.push(features);
        }
        Ok(out)
    }
}
