//! Per-label fixed-effects regressions for the bias and imbalanced
//! inaccuracy metrics, and their Bernoulli aggregation.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::inconsistency::model_predictions;
use super::{selected_labels, AnalysisOptions, MetricsError};
use crate::dataset::{Corpus, LabelDefinition};
use crate::predictions::{ModelPredictions, PredictionSet};
use crate::stats::{fe_regress, BernoulliTestResult, RegressionFrame, RegressionResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// Outcome `ln(predicted months)`.
    Bias,
    /// Outcome `|predicted − true|` in months.
    Imbalance,
}

impl Metric {
    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Bias => "bias",
            Metric::Imbalance => "imbalance",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientSummary {
    pub value: String,
    pub coefficient: Option<f64>,
    pub std_error: Option<f64>,
    pub p_value: Option<f64>,
}

/// Test result of one label for one model and metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelFinding {
    pub model_name: String,
    pub label_id: String,
    pub metric: Metric,
    pub joint_p: f64,
    pub min_coef_p: f64,
    /// Joint Wald test below τ (per-coefficient test when one column is identified).
    pub significant: bool,
    /// Any single identified coefficient below τ.
    pub significant_any: bool,
    pub direction_summary: Vec<CoefficientSummary>,
    pub n_obs: usize,
    pub n_groups: usize,
    pub n_dropped_singletons: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcludedLabel {
    pub label_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct LabelRegressions {
    pub model_name: String,
    pub metric: Metric,
    pub findings: Vec<LabelFinding>,
    pub bernoulli: BernoulliTestResult,
    /// Labels that could not be tested; not counted in the Bernoulli trials.
    pub excluded: Vec<ExcludedLabel>,
    /// Rows dropped because `ln(0)` is undefined (bias metric without log1p).
    pub n_zero_dropped: usize,
    #[serde(skip)]
    pub regressions: Vec<(String, RegressionResult)>,
}

impl LabelRegressions {
    pub fn significant_count(&self) -> u64 {
        self.findings.iter().filter(|f| f.significant).count() as u64
    }

    pub fn significant_any_count(&self) -> u64 {
        self.findings.iter().filter(|f| f.significant_any).count() as u64
    }
}

/// Outcome of one row, or `None` when the row is unusable.
fn outcome(metric: Metric, log1p: bool, predicted: f64, truth: f64) -> Option<f64> {
    match metric {
        Metric::Bias if log1p => Some(predicted.ln_1p()),
        Metric::Bias if predicted > 0.0 => Some(predicted.ln()),
        Metric::Bias => None,
        Metric::Imbalance => Some((predicted - truth).abs()),
    }
}

struct FrameBuild {
    frame: RegressionFrame,
    n_zero_dropped: usize,
}

fn build_frame(
    corpus: &Corpus,
    preds: &ModelPredictions,
    label: &LabelDefinition,
    metric: Metric,
    log1p: bool,
) -> Result<FrameBuild, MetricsError> {
    let treated: Vec<&str> = label.treated_values().collect();
    let mut y = Vec::new();
    let mut rows: Vec<&str> = Vec::new();
    let mut groups = Vec::new();
    let mut n_zero_dropped = 0;

    let pairs = corpus.enumerate_variants(&label.label_id)?;
    let mut i = 0;
    while i < pairs.len() {
        let doc = pairs[i].0;
        let group = corpus
            .document_position(&doc.doc_id)
            .expect("validated corpus");
        let base_value = doc.label_values[&label.label_id].as_str();
        let mut candidates = vec![(base_value, preds.baseline(&doc.doc_id).flatten())];
        while i < pairs.len() && pairs[i].0.doc_id == doc.doc_id {
            let v = pairs[i].1;
            candidates.push((
                v.variant_value.as_str(),
                preds
                    .variant(&doc.doc_id, &label.label_id, &v.variant_value)
                    .flatten(),
            ));
            i += 1;
        }
        for (value, pred) in candidates {
            let Some(pred) = pred else { continue };
            match outcome(metric, log1p, pred, doc.true_sentence_months) {
                Some(out) => {
                    y.push(out);
                    rows.push(value);
                    groups.push(group);
                }
                None => n_zero_dropped += 1,
            }
        }
    }

    let x = DMatrix::from_fn(rows.len(), treated.len(), |r, c| {
        if rows[r] == treated[c] {
            1.0
        } else {
            0.0
        }
    });
    let frame = RegressionFrame::new(
        DVector::from_vec(y),
        x,
        groups,
        treated.iter().map(|s| s.to_string()).collect(),
    )?;
    Ok(FrameBuild {
        frame,
        n_zero_dropped,
    })
}

fn finding(
    model: &str,
    label: &str,
    metric: Metric,
    result: &RegressionResult,
    tau: f64,
) -> LabelFinding {
    let min_coef_p = result.min_coef_p();
    let test_p = if result.identified_columns.len() > 1 {
        result.joint_p
    } else {
        min_coef_p
    };
    LabelFinding {
        model_name: model.to_string(),
        label_id: label.to_string(),
        metric,
        joint_p: result.joint_p,
        min_coef_p,
        significant: test_p < tau,
        significant_any: min_coef_p < tau,
        direction_summary: result
            .column_names
            .iter()
            .enumerate()
            .map(|(c, value)| CoefficientSummary {
                value: value.clone(),
                coefficient: result.coefficients[c],
                std_error: result.std_errors[c],
                p_value: result.per_coef_p[c],
            })
            .collect(),
        n_obs: result.n_obs,
        n_groups: result.n_groups,
        n_dropped_singletons: result.n_dropped_singletons,
    }
}

fn analyze(
    predictions: &PredictionSet,
    corpus: &Corpus,
    model: &str,
    metric: Metric,
    options: &AnalysisOptions,
) -> Result<LabelRegressions, MetricsError> {
    options.validate()?;
    let preds = model_predictions(predictions, model)?;
    let mut findings = Vec::new();
    let mut excluded = Vec::new();
    let mut regressions = Vec::new();
    let mut n_zero_dropped = 0;

    for label_id in selected_labels(corpus, options)? {
        let label = corpus.label(&label_id).expect("selected from corpus");
        let built = build_frame(corpus, preds, label, metric, options.log1p)?;
        n_zero_dropped += built.n_zero_dropped;
        if built.frame.n_rows() == 0 {
            excluded.push(ExcludedLabel {
                label_id,
                reason: "no usable predictions".into(),
            });
            continue;
        }
        match fe_regress(&built.frame) {
            Ok(result) => {
                findings.push(finding(model, &label_id, metric, &result, options.tau));
                regressions.push((label_id, result));
            }
            Err(e) => excluded.push(ExcludedLabel {
                label_id,
                reason: e.to_string(),
            }),
        }
    }

    let significant = findings.iter().filter(|f| f.significant).count() as u64;
    let bernoulli = BernoulliTestResult::new(findings.len() as u64, significant, options.tau)?;
    Ok(LabelRegressions {
        model_name: model.to_string(),
        metric,
        findings,
        bernoulli,
        excluded,
        n_zero_dropped,
        regressions,
    })
}

/// Log-sentence regressions of every selected label.
pub fn bias_analysis(
    predictions: &PredictionSet,
    corpus: &Corpus,
    model: &str,
    options: &AnalysisOptions,
) -> Result<LabelRegressions, MetricsError> {
    analyze(predictions, corpus, model, Metric::Bias, options)
}

/// Absolute-error regressions of every selected label.
pub fn imbalance_analysis(
    predictions: &PredictionSet,
    corpus: &Corpus,
    model: &str,
    options: &AnalysisOptions,
) -> Result<LabelRegressions, MetricsError> {
    analyze(predictions, corpus, model, Metric::Imbalance, options)
}
