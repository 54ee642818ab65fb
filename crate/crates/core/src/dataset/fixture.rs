//! Synthetic corpora with planted effects, plus a stub predictor that turns
//! them into prediction records. Both are deterministic in their seeds.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{CaseDocument, Corpus, CounterfactualVariant, DatasetError, LabelDefinition};
use crate::predictions::PredictionRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EffectKind {
    /// Additive shift of log predicted sentence.
    #[default]
    Bias,
    /// Multiplier on the prediction error `predicted - true`.
    Imbalance,
}

/// Ground truth applied by [`StubPredictor`] to rows whose value of
/// `label_id` equals `value` (the label's first non-reference value when
/// omitted).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedEffect {
    pub label_id: String,
    #[serde(default)]
    pub kind: EffectKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<String>,
    pub size: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FixtureOptions {
    /// Location of the log-normal true-sentence generator (log months).
    pub sentence_log_mean: f64,
    /// Scale of the log-normal true-sentence generator.
    pub sentence_log_sd: f64,
    /// Probability that a given (document, label, alternative value) variant exists.
    pub variant_coverage: f64,
    /// Probability that a document carries no value for a given label.
    pub missing_value_rate: f64,
}

impl Default for FixtureOptions {
    fn default() -> Self {
        Self {
            sentence_log_mean: 3.0,
            sentence_log_sd: 0.6,
            variant_coverage: 1.0,
            missing_value_rate: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureMeta {
    pub seed: u64,
    pub n_docs: usize,
    pub options: FixtureOptions,
    pub planted_effects: Vec<PlantedEffect>,
}

#[derive(Debug, Clone)]
pub struct Fixture {
    pub corpus: Corpus,
    pub meta: FixtureMeta,
}

fn invalid(label_id: &str, message: impl Into<String>) -> DatasetError {
    DatasetError::InvalidLabel {
        label_id: label_id.to_string(),
        message: message.into(),
    }
}

fn validate_inputs(
    n_docs: usize,
    labels: &[LabelDefinition],
    effects: &[PlantedEffect],
    options: &FixtureOptions,
) -> Result<(), DatasetError> {
    if n_docs == 0 {
        return Err(DatasetError::NoDocuments);
    }
    let unit = 0.0..=1.0;
    if !(options.sentence_log_mean.is_finite()
        && options.sentence_log_sd.is_finite()
        && options.sentence_log_sd >= 0.0
        && unit.contains(&options.variant_coverage)
        && unit.contains(&options.missing_value_rate))
    {
        return Err(DatasetError::Integrity(format!(
            "invalid fixture options {options:?}"
        )));
    }
    for label in labels {
        label.validate()?;
    }
    for effect in effects {
        let label = labels
            .iter()
            .find(|l| l.label_id == effect.label_id)
            .ok_or_else(|| DatasetError::UnknownLabel(effect.label_id.clone()))?;
        if !effect.size.is_finite() {
            return Err(invalid(&effect.label_id, "planted effect size must be finite"));
        }
        if let Some(value) = &effect.value {
            if !label.admits(value) || *value == label.reference_value {
                return Err(invalid(
                    &effect.label_id,
                    format!("planted value '{value}' must be a non-reference value"),
                ));
            }
        }
    }
    Ok(())
}

fn render_facts(doc_id: &str, labels: &[LabelDefinition], values: &[Option<&str>]) -> String {
    let mut facts = format!("Synthetic case {doc_id}.");
    for (label, value) in labels.iter().zip(values) {
        if let Some(value) = value {
            facts.push_str(&format!(" {}: {value}.", label.label_id));
        }
    }
    facts
}

/// Build a synthetic corpus. Documents receive log-normal true sentences
/// (rounded to whole months, at least 1) and uniformly drawn label values;
/// every alternative value of every label becomes a variant with probability
/// `options.variant_coverage`.
pub fn generate_fixture(
    seed: u64,
    n_docs: usize,
    labels: &[LabelDefinition],
    effects: &[PlantedEffect],
    options: &FixtureOptions,
) -> Result<Fixture, DatasetError> {
    validate_inputs(n_docs, labels, effects, options)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sentence = Normal::new(options.sentence_log_mean, options.sentence_log_sd)
        .expect("validated parameters");
    let width = n_docs.to_string().len().max(4);

    let mut documents = Vec::with_capacity(n_docs);
    let mut variants = Vec::new();
    for i in 0..n_docs {
        let doc_id = format!("doc-{:0width$}", i + 1);
        let true_months = sentence.sample(&mut rng).exp().round().max(1.0);
        let values: Vec<Option<&str>> = labels
            .iter()
            .map(|label| {
                if rng.random::<f64>() < options.missing_value_rate {
                    None
                } else {
                    Some(label.values[rng.random_range(0..label.values.len())].as_str())
                }
            })
            .collect();

        for (pos, label) in labels.iter().enumerate() {
            let Some(base) = values[pos] else { continue };
            for alt in label.values.iter().filter(|v| v.as_str() != base) {
                if rng.random::<f64>() >= options.variant_coverage {
                    continue;
                }
                let mut altered = values.clone();
                altered[pos] = Some(alt);
                variants.push(CounterfactualVariant {
                    doc_id: doc_id.clone(),
                    label_id: label.label_id.clone(),
                    variant_value: alt.clone(),
                    facts: render_facts(&doc_id, labels, &altered),
                });
            }
        }

        documents.push(CaseDocument {
            facts: render_facts(&doc_id, labels, &values),
            label_values: labels
                .iter()
                .zip(&values)
                .filter_map(|(l, v)| v.map(|v| (l.label_id.clone(), v.to_string())))
                .collect(),
            doc_id,
            true_sentence_months: true_months,
        });
    }

    let corpus = Corpus::new(labels.to_vec(), documents, variants)?;
    Ok(Fixture {
        corpus,
        meta: FixtureMeta {
            seed,
            n_docs,
            options: options.clone(),
            planted_effects: effects.to_vec(),
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StubPredictorConfig {
    pub model_name: String,
    pub seed: u64,
    /// Standard deviation of the per-document log offset shared by all of a
    /// document's rows.
    pub doc_sd: f64,
    /// Standard deviation of the i.i.d. per-row log noise.
    pub noise_sd: f64,
    /// Round predictions to whole months, as a model answering in integers would.
    pub round: bool,
}

impl Default for StubPredictorConfig {
    fn default() -> Self {
        Self {
            model_name: "stub".into(),
            seed: 0,
            doc_sd: 0.2,
            noise_sd: 0.3,
            round: true,
        }
    }
}

/// Simulated model: `ln(pred) = ln(true) + doc offset + planted bias + noise`,
/// then planted imbalance multiplies `pred − true`.
#[derive(Debug, Clone)]
pub struct StubPredictor {
    config: StubPredictorConfig,
    // (label position, value, kind, size)
    effects: Vec<(usize, String, EffectKind, f64)>,
}

impl StubPredictor {
    pub fn new(
        config: StubPredictorConfig,
        corpus: &Corpus,
        effects: &[PlantedEffect],
    ) -> Result<Self, DatasetError> {
        if !(config.doc_sd >= 0.0 && config.noise_sd >= 0.0) {
            return Err(DatasetError::Integrity(
                "stub predictor standard deviations must be >= 0".into(),
            ));
        }
        let mut resolved = Vec::with_capacity(effects.len());
        for effect in effects {
            let (pos, label) = corpus
                .labels()
                .iter()
                .enumerate()
                .find(|(_, l)| l.label_id == effect.label_id)
                .ok_or_else(|| DatasetError::UnknownLabel(effect.label_id.clone()))?;
            let value = match &effect.value {
                Some(v) => v.clone(),
                None => label
                    .treated_values()
                    .next()
                    .expect("validated label has a non-reference value")
                    .to_string(),
            };
            resolved.push((pos, value, effect.kind, effect.size));
        }
        Ok(Self {
            config,
            effects: resolved,
        })
    }

    fn predict_row(
        &self,
        rng: &mut ChaCha8Rng,
        noise: &Normal<f64>,
        true_months: f64,
        doc_offset: f64,
        values: &[Option<&str>],
    ) -> f64 {
        let mut log_pred = true_months.ln() + doc_offset + noise.sample(rng);
        for (pos, value, kind, size) in &self.effects {
            if *kind == EffectKind::Bias && values[*pos] == Some(value.as_str()) {
                log_pred += size;
            }
        }
        let mut pred = log_pred.exp();
        for (pos, value, kind, size) in &self.effects {
            if *kind == EffectKind::Imbalance && values[*pos] == Some(value.as_str()) {
                pred = true_months + (pred - true_months) * size;
            }
        }
        let pred = pred.max(0.0);
        if self.config.round {
            pred.round()
        } else {
            pred
        }
    }

    /// One record per document and per variant, in corpus order.
    pub fn predict(&self, corpus: &Corpus) -> Vec<PredictionRecord> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed);
        let doc_dist = Normal::new(0.0, self.config.doc_sd).expect("validated");
        let noise = Normal::new(0.0, self.config.noise_sd).expect("validated");
        let labels = corpus.labels();

        let row_values = |doc: &CaseDocument| -> Vec<Option<String>> {
            labels
                .iter()
                .map(|l| doc.label_values.get(&l.label_id).cloned())
                .collect()
        };
        let record = |doc_id: &str, label: Option<&CounterfactualVariant>, months: f64| {
            PredictionRecord {
                model_name: self.config.model_name.clone(),
                doc_id: doc_id.to_string(),
                label_id: label.map(|v| v.label_id.clone()),
                variant_value: label.map(|v| v.variant_value.clone()),
                predicted_months: Some(months),
                raw_response: format!("{{\"sentence_months\": {months}}}"),
                attempt_count: 1,
            }
        };

        let offsets: Vec<f64> = corpus
            .documents()
            .iter()
            .map(|_| doc_dist.sample(&mut rng))
            .collect();
        let mut out = Vec::with_capacity(corpus.documents().len() + corpus.variants().len());
        for (doc, offset) in corpus.documents().iter().zip(&offsets) {
            let values = row_values(doc);
            let borrowed: Vec<Option<&str>> = values.iter().map(|v| v.as_deref()).collect();
            let months =
                self.predict_row(&mut rng, &noise, doc.true_sentence_months, *offset, &borrowed);
            out.push(record(&doc.doc_id, None, months));
        }
        for variant in corpus.variants() {
            let doc_pos = corpus
                .document_position(&variant.doc_id)
                .expect("validated corpus");
            let doc = &corpus.documents()[doc_pos];
            let mut values = row_values(doc);
            let label_pos = corpus
                .label_position(&variant.label_id)
                .expect("validated corpus");
            values[label_pos] = Some(variant.variant_value.clone());
            let borrowed: Vec<Option<&str>> = values.iter().map(|v| v.as_deref()).collect();
            let months = self.predict_row(
                &mut rng,
                &noise,
                doc.true_sentence_months,
                offsets[doc_pos],
                &borrowed,
            );
            out.push(record(&doc.doc_id, Some(variant), months));
        }
        out
    }
}
