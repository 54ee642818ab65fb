//! Parsed model outputs and their keyed, validated collection.
//!
//! `predictions.jsonl` holds one [`PredictionRecord`] per line. The same
//! schema is produced by the gateway and accepted from external tools.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::Corpus;

#[derive(Debug, thiserror::Error)]
pub enum PredictionError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{location}: {message}")]
    Invalid { location: String, message: String },
}

/// One parsed model answer. `label_id`/`variant_value` are absent for
/// baseline documents; `predicted_months == None` is the missing-marker.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub model_name: String,
    pub doc_id: String,
    #[serde(default)]
    pub label_id: Option<String>,
    #[serde(default)]
    pub variant_value: Option<String>,
    pub predicted_months: Option<f64>,
    #[serde(default)]
    pub raw_response: String,
    #[serde(default)]
    pub attempt_count: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PredictionKey {
    pub doc_id: String,
    pub label_id: Option<String>,
    pub variant_value: Option<String>,
}

impl PredictionKey {
    pub fn baseline(doc_id: impl Into<String>) -> Self {
        Self {
            doc_id: doc_id.into(),
            label_id: None,
            variant_value: None,
        }
    }

    pub fn variant(
        doc_id: impl Into<String>,
        label_id: impl Into<String>,
        variant_value: impl Into<String>,
    ) -> Self {
        Self {
            doc_id: doc_id.into(),
            label_id: Some(label_id.into()),
            variant_value: Some(variant_value.into()),
        }
    }

    pub fn is_baseline(&self) -> bool {
        self.label_id.is_none()
    }
}

impl PredictionRecord {
    pub fn key(&self) -> PredictionKey {
        PredictionKey {
            doc_id: self.doc_id.clone(),
            label_id: self.label_id.clone(),
            variant_value: self.variant_value.clone(),
        }
    }

    /// Record-local invariants, independent of any corpus.
    pub fn validate(&self) -> Result<(), String> {
        if self.model_name.is_empty() {
            return Err("empty model_name".into());
        }
        if self.label_id.is_some() != self.variant_value.is_some() {
            return Err("label_id and variant_value must be both present or both absent".into());
        }
        if let Some(m) = self.predicted_months {
            if !m.is_finite() || m < 0.0 {
                return Err(format!("predicted_months must be finite and >= 0, got {m}"));
            }
        }
        Ok(())
    }
}

/// Predictions of a single model keyed by document/variant.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ModelPredictions {
    baseline: HashMap<String, Option<f64>>,
    variants: HashMap<(String, String, String), Option<f64>>,
}

impl ModelPredictions {
    /// `None` when no record exists, `Some(None)` for a missing-marker.
    pub fn baseline(&self, doc_id: &str) -> Option<Option<f64>> {
        self.baseline.get(doc_id).copied()
    }

    pub fn variant(&self, doc_id: &str, label_id: &str, value: &str) -> Option<Option<f64>> {
        self.variants
            .get(&(doc_id.to_string(), label_id.to_string(), value.to_string()))
            .copied()
    }

    pub fn baseline_count(&self) -> usize {
        self.baseline.len()
    }

    pub fn variant_count(&self) -> usize {
        self.variants.len()
    }

    /// Labels that have at least one variant record.
    pub fn labels(&self) -> Vec<String> {
        let mut labels: Vec<String> = self.variants.keys().map(|k| k.1.clone()).collect();
        labels.sort();
        labels.dedup();
        labels
    }
}

/// All predictions, validated against a corpus, grouped by model name.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PredictionSet {
    models: BTreeMap<String, ModelPredictions>,
}

impl PredictionSet {
    pub fn from_records<'a>(
        records: impl IntoIterator<Item = &'a PredictionRecord>,
        corpus: &Corpus,
    ) -> Result<Self, PredictionError> {
        let mut set = Self::default();
        for (i, record) in records.into_iter().enumerate() {
            set.insert(record, corpus)
                .map_err(|message| PredictionError::Invalid {
                    location: format!("record {}", i + 1),
                    message,
                })?;
        }
        Ok(set)
    }

    /// Read and validate one or more `predictions.jsonl` files.
    pub fn load(paths: &[impl AsRef<Path>], corpus: &Corpus) -> Result<Self, PredictionError> {
        let mut set = Self::default();
        for path in paths {
            let path = path.as_ref();
            let io_err = |source| PredictionError::Io {
                path: path.display().to_string(),
                source,
            };
            let reader = BufReader::new(File::open(path).map_err(io_err)?);
            for (idx, line) in reader.lines().enumerate() {
                let line = line.map_err(io_err)?;
                if line.trim().is_empty() {
                    continue;
                }
                let location = format!("{}:{}", path.display(), idx + 1);
                let record: PredictionRecord =
                    serde_json::from_str(line.trim()).map_err(|e| PredictionError::Invalid {
                        location: location.clone(),
                        message: e.to_string(),
                    })?;
                set.insert(&record, corpus)
                    .map_err(|message| PredictionError::Invalid { location, message })?;
            }
        }
        Ok(set)
    }

    fn insert(&mut self, record: &PredictionRecord, corpus: &Corpus) -> Result<(), String> {
        record.validate()?;
        if corpus.document(&record.doc_id).is_none() {
            return Err(format!("unknown doc_id '{}'", record.doc_id));
        }
        let model = self.models.entry(record.model_name.clone()).or_default();
        let duplicate = match (&record.label_id, &record.variant_value) {
            (Some(label), Some(value)) => {
                if !corpus.has_variant(&record.doc_id, label, value) {
                    return Err(format!(
                        "unknown variant ({}, {label}, {value})",
                        record.doc_id
                    ));
                }
                model
                    .variants
                    .insert(
                        (record.doc_id.clone(), label.clone(), value.clone()),
                        record.predicted_months,
                    )
                    .is_some()
            }
            _ => model
                .baseline
                .insert(record.doc_id.clone(), record.predicted_months)
                .is_some(),
        };
        if duplicate {
            return Err(format!(
                "duplicate prediction for model '{}' key {:?}",
                record.model_name,
                record.key()
            ));
        }
        Ok(())
    }

    pub fn model(&self, name: &str) -> Option<&ModelPredictions> {
        self.models.get(name)
    }

    /// Model names in sorted order.
    pub fn model_names(&self) -> impl Iterator<Item = &str> {
        self.models.keys().map(String::as_str)
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }
}

/// Deterministic output order: baseline first, then variants by label/value.
pub fn sort_records(records: &mut [PredictionRecord]) {
    records.sort_by(|a, b| {
        (&a.model_name, &a.doc_id, &a.label_id, &a.variant_value).cmp(&(
            &b.model_name,
            &b.doc_id,
            &b.label_id,
            &b.variant_value,
        ))
    });
}

pub fn write_predictions(path: &Path, records: &[PredictionRecord]) -> std::io::Result<()> {
    crate::jsonl::write_file(path, records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{CaseDocument, CounterfactualVariant, LabelDefinition, LabelKind};

    fn corpus() -> Corpus {
        Corpus::new(
            vec![LabelDefinition {
                label_id: "g".into(),
                kind: LabelKind::Binary,
                values: vec!["f".into(), "m".into()],
                reference_value: "f".into(),
                description: String::new(),
            }],
            vec![CaseDocument {
                doc_id: "d1".into(),
                facts: "x".into(),
                true_sentence_months: 10.0,
                label_values: [("g".to_string(), "f".to_string())].into(),
            }],
            vec![CounterfactualVariant {
                doc_id: "d1".into(),
                label_id: "g".into(),
                variant_value: "m".into(),
                facts: "y".into(),
            }],
        )
        .unwrap()
    }

    fn rec(label: Option<&str>, value: Option<&str>, months: Option<f64>) -> PredictionRecord {
        PredictionRecord {
            model_name: "m1".into(),
            doc_id: "d1".into(),
            label_id: label.map(Into::into),
            variant_value: value.map(Into::into),
            predicted_months: months,
            raw_response: String::new(),
            attempt_count: 1,
        }
    }

    #[test]
    fn record_invariants() {
        assert!(rec(Some("g"), None, Some(1.0)).validate().is_err());
        assert!(rec(None, None, Some(-1.0)).validate().is_err());
        assert!(rec(None, None, Some(f64::NAN)).validate().is_err());
        assert!(rec(None, None, None).validate().is_ok());
    }

    #[test]
    fn missing_marker_serializes_as_null() {
        let json = serde_json::to_string(&rec(None, None, None)).unwrap();
        assert!(json.contains("\"predicted_months\":null"), "{json}");
        let back: PredictionRecord = serde_json::from_str(&json).unwrap();
        assert_eq!(back, rec(None, None, None));
    }

    #[test]
    fn rejects_unknown_keys_and_duplicates() {
        let c = corpus();
        let ok = [rec(None, None, Some(3.0)), rec(Some("g"), Some("m"), Some(4.0))];
        let set = PredictionSet::from_records(&ok, &c).unwrap();
        let m = set.model("m1").unwrap();
        assert_eq!(m.baseline("d1"), Some(Some(3.0)));
        assert_eq!(m.variant("d1", "g", "m"), Some(Some(4.0)));
        assert_eq!(m.labels(), ["g"]);

        let bad = [rec(Some("g"), Some("f"), Some(1.0))];
        let err = PredictionSet::from_records(&bad, &c).unwrap_err();
        assert!(err.to_string().contains("unknown variant"), "{err}");

        let mut ghost = rec(None, None, Some(1.0));
        ghost.doc_id = "d7".into();
        assert!(PredictionSet::from_records(&[ghost], &c).is_err());

        let dup = [rec(None, None, Some(1.0)), rec(None, None, Some(2.0))];
        let err = PredictionSet::from_records(&dup, &c).unwrap_err();
        assert!(err.to_string().contains("record 2"), "{err}");
    }

    #[test]
    fn load_reports_file_and_line() {
        let c = corpus();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.jsonl");
        std::fs::write(
            &path,
            "{\"model_name\":\"m1\",\"doc_id\":\"d1\",\"predicted_months\":3}\n{\"model_name\":\"m1\"}\n",
        )
        .unwrap();
        let err = PredictionSet::load(&[&path], &c).unwrap_err();
        assert!(err.to_string().contains("p.jsonl:2"), "{err}");
    }
}
