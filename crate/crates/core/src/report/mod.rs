//! Machine-readable tables and a static HTML report for one audit run.
//!
//! Display fields (CSV, HTML) round to three decimals; the JSON files keep
//! full precision. Output bytes depend only on the bundle.

mod html;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use html::{emit_html, render_html, CHART_CONTAINER_CLASS};

use crate::dataset::Corpus;
use crate::metrics::{AuditResult, InconsistencyRow, LabelFinding, ModelFairnessSummary, PooledResults};

pub const SUMMARY_CSV: &str = "summary.csv";
pub const SUMMARY_JSON: &str = "summary.json";
pub const FINDINGS_CSV: &str = "findings.csv";
pub const FINDINGS_JSONL: &str = "findings.jsonl";
pub const COEFFICIENTS_CSV: &str = "coefficients.csv";
pub const INCONSISTENCY_CSV: &str = "inconsistency.csv";
pub const POOLED_JSON: &str = "pooled.json";
pub const BUNDLE_JSON: &str = "bundle.json";
pub const REPORT_HTML: &str = "report.html";

pub const SUMMARY_COLUMNS: [&str; 7] = [
    "model",
    "inconsistency",
    "bias_count",
    "bias_bernoulli_p",
    "imbalance_count",
    "imbalance_bernoulli_p",
    "n_labels_tested",
];

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("inconsistent bundle: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunMetadata {
    /// SHA-256 of the canonical analysis configuration.
    pub config_hash: String,
    /// SHA-256 of the canonical corpus serialization.
    pub corpus_hash: String,
    /// Caller-supplied timestamp; never read from the clock.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generated_at: Option<String>,
    pub tool_version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportBundle {
    /// Sorted by model name.
    pub summaries: Vec<ModelFairnessSummary>,
    pub findings: Vec<LabelFinding>,
    pub inconsistency_rows: BTreeMap<String, Vec<InconsistencyRow>>,
    pub pooled: PooledResults,
    pub run_metadata: RunMetadata,
}

impl ReportBundle {
    pub fn from_audit(result: &AuditResult, run_metadata: RunMetadata) -> Self {
        let mut summaries: Vec<ModelFairnessSummary> =
            result.models.iter().map(|m| m.summary.clone()).collect();
        summaries.sort_by(|a, b| a.model_name.cmp(&b.model_name));
        let mut findings = Vec::new();
        let mut inconsistency_rows = BTreeMap::new();
        for m in &result.models {
            findings.extend(m.bias.findings.iter().cloned());
            findings.extend(m.imbalance.findings.iter().cloned());
            inconsistency_rows.insert(m.summary.model_name.clone(), m.inconsistency.rows.clone());
        }
        findings.sort_by(|a, b| {
            (&a.model_name, a.metric, &a.label_id).cmp(&(&b.model_name, b.metric, &b.label_id))
        });
        Self {
            summaries,
            findings,
            inconsistency_rows,
            pooled: result.pooled.clone(),
            run_metadata,
        }
    }

    pub fn validate(&self) -> Result<(), ReportError> {
        let models: BTreeSet<&str> = self.summaries.iter().map(|s| s.model_name.as_str()).collect();
        if models.len() != self.summaries.len() {
            return Err(ReportError::Invalid("duplicate model summaries".into()));
        }
        for f in &self.findings {
            if !models.contains(f.model_name.as_str()) {
                return Err(ReportError::Invalid(format!(
                    "finding for model '{}' has no summary",
                    f.model_name
                )));
            }
        }
        for model in self.inconsistency_rows.keys() {
            if !models.contains(model.as_str()) {
                return Err(ReportError::Invalid(format!(
                    "inconsistency rows for model '{model}' have no summary"
                )));
            }
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ReportError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| ReportError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let bundle: Self = serde_json::from_str(&text).map_err(|source| ReportError::Json {
            path: path.to_path_buf(),
            source,
        })?;
        bundle.validate()?;
        Ok(bundle)
    }
}

/// Hex SHA-256 of arbitrary bytes.
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Hash of labels, documents and variants as compact JSON lines, in corpus order.
pub fn corpus_hash(corpus: &Corpus) -> String {
    let mut hasher = Sha256::new();
    let mut feed = |tag: &str, json: String| {
        hasher.update(tag.as_bytes());
        hasher.update(json.as_bytes());
        hasher.update(b"\n");
    };
    for l in corpus.labels() {
        feed("L", serde_json::to_string(l).expect("serializable"));
    }
    for d in corpus.documents() {
        feed("D", serde_json::to_string(d).expect("serializable"));
    }
    for v in corpus.variants() {
        feed("V", serde_json::to_string(v).expect("serializable"));
    }
    hex::encode(hasher.finalize())
}

/// Three-decimal display value; empty for an undefined metric.
pub fn display(value: Option<f64>) -> String {
    value.map_or_else(String::new, |v| format!("{v:.3}"))
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), ReportError> {
    fs::write(path, bytes).map_err(|source| ReportError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn csv_bytes(header: &[&str], rows: Vec<Vec<String>>) -> Result<Vec<u8>, ReportError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.into_inner()
        .map_err(|e| ReportError::Invalid(format!("csv buffer: {e}")))
}

pub fn summary_csv(bundle: &ReportBundle) -> Result<Vec<u8>, ReportError> {
    let mut summaries: Vec<&ModelFairnessSummary> = bundle.summaries.iter().collect();
    summaries.sort_by(|a, b| a.model_name.cmp(&b.model_name));
    let rows = summaries
        .into_iter()
        .map(|s| {
            vec![
                s.model_name.clone(),
                display(s.inconsistency),
                s.bias_count.to_string(),
                display(Some(s.bias_bernoulli.p_value)),
                s.imbalance_count.to_string(),
                display(Some(s.imbalance_bernoulli.p_value)),
                s.n_labels_tested.to_string(),
            ]
        })
        .collect();
    csv_bytes(&SUMMARY_COLUMNS, rows)
}

fn findings_csv(bundle: &ReportBundle) -> Result<Vec<u8>, ReportError> {
    let header = [
        "model",
        "metric",
        "label_id",
        "joint_p",
        "min_coef_p",
        "significant",
        "significant_any",
        "n_obs",
        "n_groups",
        "n_dropped_singletons",
    ];
    let rows = bundle
        .findings
        .iter()
        .map(|f| {
            vec![
                f.model_name.clone(),
                f.metric.as_str().to_string(),
                f.label_id.clone(),
                display(Some(f.joint_p)),
                display(Some(f.min_coef_p)),
                f.significant.to_string(),
                f.significant_any.to_string(),
                f.n_obs.to_string(),
                f.n_groups.to_string(),
                f.n_dropped_singletons.to_string(),
            ]
        })
        .collect();
    csv_bytes(&header, rows)
}

fn coefficients_csv(bundle: &ReportBundle) -> Result<Vec<u8>, ReportError> {
    let header = [
        "model",
        "metric",
        "label_id",
        "value",
        "coefficient",
        "std_error",
        "p_value",
    ];
    let mut rows = Vec::new();
    for f in &bundle.findings {
        for c in &f.direction_summary {
            rows.push(vec![
                f.model_name.clone(),
                f.metric.as_str().to_string(),
                f.label_id.clone(),
                c.value.clone(),
                display(c.coefficient),
                display(c.std_error),
                display(c.p_value),
            ]);
        }
    }
    csv_bytes(&header, rows)
}

fn inconsistency_csv(bundle: &ReportBundle) -> Result<Vec<u8>, ReportError> {
    let header = [
        "model",
        "label_id",
        "p_l",
        "w_l",
        "n_comparisons",
        "n_changed",
        "n_missing",
    ];
    let mut rows = Vec::new();
    for (model, model_rows) in &bundle.inconsistency_rows {
        for r in model_rows {
            rows.push(vec![
                model.clone(),
                r.label_id.clone(),
                display(r.p_l),
                r.w_l.to_string(),
                r.n_comparisons.to_string(),
                r.n_changed.to_string(),
                r.n_missing.to_string(),
            ]);
        }
    }
    csv_bytes(&header, rows)
}

fn pretty<T: Serialize>(value: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(value).expect("serializable");
    out.push(b'\n');
    out
}

/// `summary.json` contents: the summaries in model-name order.
pub fn summary_json(bundle: &ReportBundle) -> Vec<u8> {
    let mut summaries: Vec<&ModelFairnessSummary> = bundle.summaries.iter().collect();
    summaries.sort_by(|a, b| a.model_name.cmp(&b.model_name));
    pretty(&summaries)
}

/// Write the CSV and JSON tables; returns the written paths.
pub fn emit_tables(bundle: &ReportBundle, out_dir: &Path) -> Result<Vec<PathBuf>, ReportError> {
    bundle.validate()?;
    fs::create_dir_all(out_dir).map_err(|source| ReportError::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;
    let mut findings_jsonl = Vec::new();
    for f in &bundle.findings {
        findings_jsonl.extend(serde_json::to_vec(f).expect("serializable"));
        findings_jsonl.push(b'\n');
    }
    let files: Vec<(&str, Vec<u8>)> = vec![
        (SUMMARY_CSV, summary_csv(bundle)?),
        (FINDINGS_CSV, findings_csv(bundle)?),
        (COEFFICIENTS_CSV, coefficients_csv(bundle)?),
        (INCONSISTENCY_CSV, inconsistency_csv(bundle)?),
        (SUMMARY_JSON, summary_json(bundle)),
        (FINDINGS_JSONL, findings_jsonl),
        (POOLED_JSON, pretty(&bundle.pooled)),
        (BUNDLE_JSON, pretty(bundle)),
    ];
    let mut written = Vec::with_capacity(files.len());
    for (name, bytes) in files {
        let path = out_dir.join(name);
        write(&path, &bytes)?;
        written.push(path);
    }
    Ok(written)
}
