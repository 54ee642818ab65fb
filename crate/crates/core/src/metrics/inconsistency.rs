use serde::{Deserialize, Serialize};

use super::{selected_labels, AnalysisOptions, MetricsError, WeightMode};
use crate::dataset::Corpus;
use crate::predictions::{ModelPredictions, PredictionSet};

/// Change proportion of one label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InconsistencyRow {
    pub label_id: String,
    /// `None` when the label has no usable comparison.
    pub p_l: Option<f64>,
    pub w_l: u64,
    pub n_comparisons: u64,
    pub n_changed: u64,
    pub n_missing: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InconsistencyReport {
    pub rows: Vec<InconsistencyRow>,
    /// `Σ w_l p_l / Σ w_l` over rows with `w_l > 0`.
    pub aggregate: Option<f64>,
}

pub(crate) fn model_predictions<'a>(
    predictions: &'a PredictionSet,
    model: &str,
) -> Result<&'a ModelPredictions, MetricsError> {
    predictions
        .model(model)
        .filter(|m| m.baseline_count() > 0)
        .ok_or_else(|| MetricsError::NoBaseline(model.to_string()))
}

/// Weighted average of the per-label change proportions.
pub fn weighted_aggregate(rows: &[InconsistencyRow]) -> Option<f64> {
    let (num, den) = rows
        .iter()
        .filter_map(|r| r.p_l.map(|p| (p, r.w_l as f64)))
        .filter(|(_, w)| *w > 0.0)
        .fold((0.0, 0.0), |(num, den), (p, w)| (num + w * p, den + w));
    (den > 0.0).then(|| num / den)
}

pub fn inconsistency(
    predictions: &PredictionSet,
    corpus: &Corpus,
    model: &str,
    options: &AnalysisOptions,
) -> Result<InconsistencyReport, MetricsError> {
    let preds = model_predictions(predictions, model)?;
    let mut rows = Vec::new();
    for label_id in selected_labels(corpus, options)? {
        let mut n_comparisons = 0u64;
        let mut n_changed = 0u64;
        let mut n_missing = 0u64;
        let mut documents = 0u64;
        let mut last_doc: Option<&str> = None;
        for (doc, variant) in corpus.enumerate_variants(&label_id)? {
            let base = preds.baseline(&doc.doc_id).flatten();
            let alt = preds
                .variant(&doc.doc_id, &label_id, &variant.variant_value)
                .flatten();
            let (Some(base), Some(alt)) = (base, alt) else {
                n_missing += 1;
                continue;
            };
            n_comparisons += 1;
            if (alt - base).abs() > options.change_tolerance {
                n_changed += 1;
            }
            if last_doc != Some(doc.doc_id.as_str()) {
                documents += 1;
                last_doc = Some(doc.doc_id.as_str());
            }
        }
        let w_l = match options.weight_mode {
            WeightMode::Comparisons => n_comparisons,
            WeightMode::Documents => documents,
        };
        rows.push(InconsistencyRow {
            label_id,
            p_l: (n_comparisons > 0).then(|| n_changed as f64 / n_comparisons as f64),
            w_l,
            n_comparisons,
            n_changed,
            n_missing,
        });
    }
    let aggregate = weighted_aggregate(&rows);
    Ok(InconsistencyReport { rows, aggregate })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(p: f64, w: u64) -> InconsistencyRow {
        InconsistencyRow {
            label_id: String::new(),
            p_l: Some(p),
            w_l: w,
            n_comparisons: w,
            n_changed: 0,
            n_missing: 0,
        }
    }

    #[test]
    fn weighted_average_of_proportions() {
        let agg = weighted_aggregate(&[row(0.1, 10), row(0.3, 30)]).unwrap();
        assert!((agg - 0.25).abs() < 1e-15);
    }

    #[test]
    fn empty_weights_are_excluded() {
        let mut undefined = row(0.0, 0);
        undefined.p_l = None;
        assert_eq!(weighted_aggregate(&[undefined.clone()]), None);
        assert_eq!(weighted_aggregate(&[undefined, row(0.5, 2)]), Some(0.5));
    }
}
