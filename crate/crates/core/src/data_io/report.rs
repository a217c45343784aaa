use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::DataError;
use crate::eval::ComparisonReport;
use crate::kernel::KernelKind;
use crate::prior::TaskStats;
use crate::probe::ProbeReport;
use crate::sampler::Labeling;

pub const SCHEMA_VERSION: u32 = 1;

/// Run parameters echoed into every report so that outputs are self-describing.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Params {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub temperature: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kernel: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_tasks: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub split: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub include_diagonal: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shuffle: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prior_model_id: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model_id: Option<String>,
}

/// Sidecar describing a kernel persisted as NPY.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelMeta {
    pub kernel_kind: KernelKind,
    pub centered: bool,
    pub source_model_id: Option<String>,
    pub n: usize,
    pub symmetrized: bool,
}

/// Every document kind the crate writes.
#[derive(Debug, Clone, PartialEq)]
pub enum Report {
    TaskStats(TaskStats),
    ProbeReport(ProbeReport),
    Labeling(Labeling),
    KernelMeta(KernelMeta),
    ComparisonReport(ComparisonReport),
}

impl Report {
    pub fn kind(&self) -> &'static str {
        match self {
            Report::TaskStats(_) => "task_stats",
            Report::ProbeReport(_) => "probe_report",
            Report::Labeling(_) => "labeling",
            Report::KernelMeta(_) => "kernel_meta",
            Report::ComparisonReport(_) => "comparison_report",
        }
    }

    pub fn params(&self) -> Params {
        match self {
            Report::TaskStats(s) => Params {
                temperature: Some(s.temperature),
                kernel: Some(KernelKind::CenteredCosine.as_str().into()),
                include_diagonal: Some(s.include_diagonal),
                ..Params::default()
            },
            Report::ProbeReport(p) => Params {
                temperature: Some(p.temperature),
                kernel: Some(KernelKind::CenteredCosine.as_str().into()),
                seed: Some(p.seed),
                q: Some(p.q),
                n_tasks: Some(p.n_tasks),
                split: Some(p.split),
                prior_model_id: p.prior_model_id.clone(),
                model_id: p.model_id.clone(),
                ..Params::default()
            },
            Report::Labeling(l) => Params {
                temperature: Some(l.temperature),
                seed: Some(l.seed),
                q: Some(l.q),
                shuffle: Some(l.shuffle),
                ..Params::default()
            },
            Report::KernelMeta(k) => Params {
                kernel: Some(k.kernel_kind.as_str().into()),
                model_id: k.source_model_id.clone(),
                ..Params::default()
            },
            Report::ComparisonReport(c) => Params {
                temperature: Some(c.temperature),
                kernel: Some(KernelKind::CenteredCosine.as_str().into()),
                seed: Some(c.seed),
                q: Some(c.q),
                n_tasks: Some(c.n_tasks),
                split: Some(c.split),
                prior_model_id: Some(c.prior_model_id.clone()),
                ..Params::default()
            },
        }
    }

    fn payload(&self) -> Result<Value, DataError> {
        Ok(match self {
            Report::TaskStats(s) => serde_json::to_value(s)?,
            Report::ProbeReport(p) => serde_json::to_value(p)?,
            Report::Labeling(l) => serde_json::to_value(&l.labels)?,
            Report::KernelMeta(k) => serde_json::to_value(k)?,
            Report::ComparisonReport(c) => serde_json::to_value(c)?,
        })
    }

    pub fn to_json_value(&self) -> Result<Value, DataError> {
        Ok(json!({
            "schema_version": SCHEMA_VERSION,
            "kind": self.kind(),
            "params": serde_json::to_value(self.params())?,
            "payload": self.payload()?,
        }))
    }

    /// Pretty-printed document with a trailing newline.
    pub fn to_json_string(&self) -> Result<String, DataError> {
        let mut s = serde_json::to_string_pretty(&self.to_json_value()?)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json_value(doc: Value) -> Result<Self, DataError> {
        let obj = doc
            .as_object()
            .ok_or_else(|| DataError::Schema("top level must be an object".into()))?;
        match obj.get("schema_version").and_then(Value::as_u64) {
            Some(v) if v == SCHEMA_VERSION as u64 => {}
            other => {
                return Err(DataError::Schema(format!(
                    "unsupported schema_version {other:?}"
                )))
            }
        }
        let kind = obj
            .get("kind")
            .and_then(Value::as_str)
            .ok_or_else(|| DataError::Schema("missing kind".into()))?;
        let params: Params = serde_json::from_value(
            obj.get("params")
                .cloned()
                .ok_or_else(|| DataError::Schema("missing params".into()))?,
        )?;
        let payload = obj
            .get("payload")
            .cloned()
            .ok_or_else(|| DataError::Schema("missing payload".into()))?;

        Ok(match kind {
            "task_stats" => Report::TaskStats(serde_json::from_value(payload)?),
            "probe_report" => Report::ProbeReport(serde_json::from_value(payload)?),
            "kernel_meta" => Report::KernelMeta(serde_json::from_value(payload)?),
            "comparison_report" => Report::ComparisonReport(serde_json::from_value(payload)?),
            "labeling" => {
                let missing = |f: &str| DataError::Schema(format!("labeling params lack {f}"));
                let labels: Vec<usize> = serde_json::from_value(payload)?;
                let q = params.q.ok_or_else(|| missing("q"))?;
                if let Some(bad) = labels.iter().find(|&&l| l >= q) {
                    return Err(DataError::Schema(format!("label {bad} is not below q = {q}")));
                }
                Report::Labeling(Labeling {
                    labels,
                    q,
                    seed: params.seed.ok_or_else(|| missing("seed"))?,
                    temperature: params.temperature.ok_or_else(|| missing("temperature"))?,
                    shuffle: params.shuffle.unwrap_or(false),
                })
            }
            other => return Err(DataError::Schema(format!("unknown kind {other:?}"))),
        })
    }
}

impl From<TaskStats> for Report {
    fn from(v: TaskStats) -> Self {
        Report::TaskStats(v)
    }
}

impl From<ProbeReport> for Report {
    fn from(v: ProbeReport) -> Self {
        Report::ProbeReport(v)
    }
}

impl From<Labeling> for Report {
    fn from(v: Labeling) -> Self {
        Report::Labeling(v)
    }
}

impl From<KernelMeta> for Report {
    fn from(v: KernelMeta) -> Self {
        Report::KernelMeta(v)
    }
}

impl From<ComparisonReport> for Report {
    fn from(v: ComparisonReport) -> Self {
        Report::ComparisonReport(v)
    }
}

/// Writes `report` as JSON. The parent directory must already exist.
pub fn save_report(report: &Report, path: &Path) -> Result<(), DataError> {
    let text = report.to_json_string()?;
    std::fs::write(path, text).map_err(|e| DataError::io(path, e))
}

pub fn load_report(path: &Path) -> Result<Report, DataError> {
    let text = std::fs::read_to_string(path).map_err(|e| DataError::io(path, e))?;
    Report::from_json_value(serde_json::from_str(&text)?)
}
