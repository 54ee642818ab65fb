//! Corpus data model: label definitions, case documents and their
//! counterfactual variants, with line-delimited JSON persistence.
//!
//! A corpus bundle is a directory holding `labels.jsonl`, `documents.jsonl`
//! and `variants.jsonl`. Every record is validated on load and the corpus is
//! immutable afterwards.

mod fixture;
mod io;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

pub use fixture::{
    generate_fixture, EffectKind, Fixture, FixtureMeta, FixtureOptions, PlantedEffect,
    StubPredictor, StubPredictorConfig,
};
pub use io::{load_corpus, write_corpus, DOCUMENTS_FILE, LABELS_FILE, VARIANTS_FILE};

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{file}:{line}: malformed record: {message}")]
    Malformed {
        file: String,
        line: usize,
        message: String,
    },
    #[error("corpus contains no documents")]
    NoDocuments,
    #[error("invalid label definition '{label_id}': {message}")]
    InvalidLabel { label_id: String, message: String },
    #[error("referential integrity violation: {0}")]
    Integrity(String),
    #[error("unknown label '{0}'")]
    UnknownLabel(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelKind {
    Categorical,
    Binary,
}

/// One extra-legal factor and its admissible value codes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelDefinition {
    pub label_id: String,
    pub kind: LabelKind,
    pub values: Vec<String>,
    pub reference_value: String,
    #[serde(default)]
    pub description: String,
}

impl LabelDefinition {
    pub fn validate(&self) -> Result<(), DatasetError> {
        let invalid = |message: String| DatasetError::InvalidLabel {
            label_id: self.label_id.clone(),
            message,
        };
        if self.label_id.is_empty() {
            return Err(invalid("empty label_id".into()));
        }
        let distinct: BTreeSet<&str> = self.values.iter().map(String::as_str).collect();
        if distinct.len() != self.values.len() {
            return Err(invalid("duplicate value codes".into()));
        }
        if distinct.len() < 2 {
            return Err(invalid("needs at least 2 distinct values".into()));
        }
        if self.kind == LabelKind::Binary && distinct.len() != 2 {
            return Err(invalid(format!(
                "binary label declares {} values",
                distinct.len()
            )));
        }
        if !distinct.contains(self.reference_value.as_str()) {
            return Err(invalid(format!(
                "reference value '{}' is not among the declared values",
                self.reference_value
            )));
        }
        Ok(())
    }

    pub fn admits(&self, value: &str) -> bool {
        self.values.iter().any(|v| v == value)
    }

    /// Values other than the reference, in declaration order. These are the
    /// treated-indicator columns of the label's regression.
    pub fn treated_values(&self) -> impl Iterator<Item = &str> {
        self.values
            .iter()
            .map(String::as_str)
            .filter(move |v| *v != self.reference_value)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseDocument {
    pub doc_id: String,
    pub facts: String,
    pub true_sentence_months: f64,
    #[serde(default)]
    pub label_values: BTreeMap<String, String>,
}

/// A copy of a document with exactly one label's value altered.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CounterfactualVariant {
    pub doc_id: String,
    pub label_id: String,
    pub variant_value: String,
    pub facts: String,
}

/// Validated, indexed corpus. Construct with [`Corpus::new`] or
/// [`load_corpus`]; fields are read-only afterwards.
#[derive(Debug, Clone)]
pub struct Corpus {
    labels: Vec<LabelDefinition>,
    documents: Vec<CaseDocument>,
    variants: Vec<CounterfactualVariant>,
    label_index: HashMap<String, usize>,
    doc_index: HashMap<String, usize>,
    // label position -> variant positions sorted by (doc_id, variant_value)
    variants_by_label: Vec<Vec<usize>>,
}

impl PartialEq for Corpus {
    fn eq(&self, other: &Self) -> bool {
        self.labels == other.labels
            && self.documents == other.documents
            && self.variants == other.variants
    }
}

impl Corpus {
    pub fn new(
        labels: Vec<LabelDefinition>,
        documents: Vec<CaseDocument>,
        variants: Vec<CounterfactualVariant>,
    ) -> Result<Self, DatasetError> {
        if documents.is_empty() {
            return Err(DatasetError::NoDocuments);
        }

        let mut label_index = HashMap::with_capacity(labels.len());
        for (i, label) in labels.iter().enumerate() {
            label.validate()?;
            if label_index.insert(label.label_id.clone(), i).is_some() {
                return Err(DatasetError::InvalidLabel {
                    label_id: label.label_id.clone(),
                    message: "label_id declared twice".into(),
                });
            }
        }

        let mut doc_index = HashMap::with_capacity(documents.len());
        for (i, doc) in documents.iter().enumerate() {
            if doc_index.insert(doc.doc_id.clone(), i).is_some() {
                return Err(DatasetError::Integrity(format!(
                    "duplicate doc_id '{}'",
                    doc.doc_id
                )));
            }
            if !(doc.true_sentence_months.is_finite() && doc.true_sentence_months > 0.0) {
                return Err(DatasetError::Integrity(format!(
                    "document '{}' has non-positive true_sentence_months {}",
                    doc.doc_id, doc.true_sentence_months
                )));
            }
            for (label_id, value) in &doc.label_values {
                let label = label_index
                    .get(label_id)
                    .map(|&l| &labels[l])
                    .ok_or_else(|| {
                        DatasetError::Integrity(format!(
                            "document '{}' references unknown label '{label_id}'",
                            doc.doc_id
                        ))
                    })?;
                if !label.admits(value) {
                    return Err(DatasetError::Integrity(format!(
                        "document '{}' has inadmissible value '{value}' for label '{label_id}'",
                        doc.doc_id
                    )));
                }
            }
        }

        let mut seen = BTreeSet::new();
        let mut variants_by_label = vec![Vec::new(); labels.len()];
        for (i, variant) in variants.iter().enumerate() {
            let doc = doc_index
                .get(&variant.doc_id)
                .map(|&d| &documents[d])
                .ok_or_else(|| {
                    DatasetError::Integrity(format!(
                        "variant references unknown doc_id '{}'",
                        variant.doc_id
                    ))
                })?;
            let label_pos = *label_index.get(&variant.label_id).ok_or_else(|| {
                DatasetError::Integrity(format!(
                    "variant of '{}' references unknown label '{}'",
                    variant.doc_id, variant.label_id
                ))
            })?;
            if !labels[label_pos].admits(&variant.variant_value) {
                return Err(DatasetError::Integrity(format!(
                    "variant of '{}' has inadmissible value '{}' for label '{}'",
                    variant.doc_id, variant.variant_value, variant.label_id
                )));
            }
            match doc.label_values.get(&variant.label_id) {
                None => {
                    return Err(DatasetError::Integrity(format!(
                        "variant of '{}' perturbs label '{}' but the document has no baseline value for it",
                        variant.doc_id, variant.label_id
                    )))
                }
                Some(base) if *base == variant.variant_value => {
                    return Err(DatasetError::Integrity(format!(
                        "variant of '{}' for label '{}' repeats the baseline value '{}'",
                        variant.doc_id, variant.label_id, base
                    )))
                }
                Some(_) => {}
            }
            let key = (
                variant.doc_id.as_str(),
                variant.label_id.as_str(),
                variant.variant_value.as_str(),
            );
            if !seen.insert(key) {
                return Err(DatasetError::Integrity(format!(
                    "duplicate variant ({}, {}, {})",
                    key.0, key.1, key.2
                )));
            }
            variants_by_label[label_pos].push(i);
        }
        for positions in &mut variants_by_label {
            positions.sort_by(|&a, &b| {
                let (va, vb) = (&variants[a], &variants[b]);
                (&va.doc_id, &va.variant_value).cmp(&(&vb.doc_id, &vb.variant_value))
            });
        }

        Ok(Self {
            labels,
            documents,
            variants,
            label_index,
            doc_index,
            variants_by_label,
        })
    }

    pub fn labels(&self) -> &[LabelDefinition] {
        &self.labels
    }

    pub fn documents(&self) -> &[CaseDocument] {
        &self.documents
    }

    pub fn variants(&self) -> &[CounterfactualVariant] {
        &self.variants
    }

    pub fn label(&self, label_id: &str) -> Option<&LabelDefinition> {
        self.label_index.get(label_id).map(|&i| &self.labels[i])
    }

    pub fn document(&self, doc_id: &str) -> Option<&CaseDocument> {
        self.doc_index.get(doc_id).map(|&i| &self.documents[i])
    }

    pub fn document_position(&self, doc_id: &str) -> Option<usize> {
        self.doc_index.get(doc_id).copied()
    }

    pub fn label_position(&self, label_id: &str) -> Option<usize> {
        self.label_index.get(label_id).copied()
    }

    pub fn has_variant(&self, doc_id: &str, label_id: &str, variant_value: &str) -> bool {
        self.label_index.get(label_id).is_some_and(|&l| {
            self.variants_by_label[l]
                .binary_search_by(|&i| {
                    let v = &self.variants[i];
                    (v.doc_id.as_str(), v.variant_value.as_str()).cmp(&(doc_id, variant_value))
                })
                .is_ok()
        })
    }

    /// Every baseline/variant pairing for `label_id`, ordered by
    /// `(doc_id, variant_value)`.
    pub fn enumerate_variants(
        &self,
        label_id: &str,
    ) -> Result<Vec<(&CaseDocument, &CounterfactualVariant)>, DatasetError> {
        let &label_pos = self
            .label_index
            .get(label_id)
            .ok_or_else(|| DatasetError::UnknownLabel(label_id.to_string()))?;
        Ok(self.variants_by_label[label_pos]
            .iter()
            .map(|&i| {
                let variant = &self.variants[i];
                (&self.documents[self.doc_index[&variant.doc_id]], variant)
            })
            .collect())
    }

    /// Number of variants for the label, without materialising pairs.
    pub fn variant_count(&self, label_id: &str) -> usize {
        self.label_index
            .get(label_id)
            .map_or(0, |&l| self.variants_by_label[l].len())
    }
}

impl fmt::Display for Corpus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} documents, {} labels, {} variants",
            self.documents.len(),
            self.labels.len(),
            self.variants.len()
        )
    }
}
