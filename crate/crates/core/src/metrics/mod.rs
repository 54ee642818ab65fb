//! Fairness metrics over prediction records: inconsistency (weighted change
//! proportion), bias (log-sentence fixed-effects regression) and imbalanced
//! inaccuracy (absolute-error regression), each aggregated per model with a
//! binomial tail test and pooled across models.

mod inconsistency;
mod regression;

use serde::{Deserialize, Serialize};

pub use inconsistency::{inconsistency, weighted_aggregate, InconsistencyReport, InconsistencyRow};
pub use regression::{
    bias_analysis, imbalance_analysis, CoefficientSummary, ExcludedLabel, LabelFinding,
    LabelRegressions, Metric,
};

use crate::dataset::{Corpus, DatasetError};
use crate::predictions::PredictionSet;
use crate::stats::{BernoulliTestResult, StatError};

#[derive(Debug, thiserror::Error)]
pub enum MetricsError {
    #[error("no baseline predictions for model '{0}'")]
    NoBaseline(String),
    #[error("nothing to analyze: no variant predictions for the selected labels")]
    NothingToAnalyze,
    #[error("no model summaries to pool")]
    EmptyPool,
    #[error("invalid analysis options: {0}")]
    Options(String),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Stat(#[from] StatError),
}

/// What `w_l` counts in the inconsistency aggregate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightMode {
    /// Valid baseline/variant comparisons.
    #[default]
    Comparisons,
    /// Documents contributing at least one valid comparison.
    Documents,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisOptions {
    pub tau: f64,
    /// Use `ln(1 + months)` for the bias outcome instead of dropping zero predictions.
    pub log1p: bool,
    /// Predictions differing by at most this many months count as unchanged.
    pub change_tolerance: f64,
    pub weight_mode: WeightMode,
    /// Restrict every metric to these labels.
    pub labels: Option<Vec<String>>,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self {
            tau: 0.05,
            log1p: false,
            change_tolerance: 0.0,
            weight_mode: WeightMode::Comparisons,
            labels: None,
        }
    }
}

impl AnalysisOptions {
    pub fn validate(&self) -> Result<(), MetricsError> {
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return Err(MetricsError::Options(format!(
                "tau = {} outside (0, 1)",
                self.tau
            )));
        }
        if !(self.change_tolerance >= 0.0 && self.change_tolerance.is_finite()) {
            return Err(MetricsError::Options(
                "change tolerance must be finite and >= 0".into(),
            ));
        }
        Ok(())
    }
}

/// Selected label ids in sorted order; unknown filter entries are errors.
pub(crate) fn selected_labels(
    corpus: &Corpus,
    options: &AnalysisOptions,
) -> Result<Vec<String>, MetricsError> {
    let mut labels: Vec<String> = match &options.labels {
        Some(filter) => {
            for id in filter {
                if corpus.label(id).is_none() {
                    return Err(DatasetError::UnknownLabel(id.clone()).into());
                }
            }
            filter.clone()
        }
        None => corpus.labels().iter().map(|l| l.label_id.clone()).collect(),
    };
    labels.sort();
    labels.dedup();
    Ok(labels)
}

/// One row of the per-model results table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFairnessSummary {
    pub model_name: String,
    pub inconsistency: Option<f64>,
    pub bias_count: u64,
    /// Labels with any significant coefficient (alternative count for multi-valued labels).
    pub bias_count_any: u64,
    pub imbalance_count: u64,
    pub imbalance_count_any: u64,
    pub bias_bernoulli: BernoulliTestResult,
    pub imbalance_bernoulli: BernoulliTestResult,
    /// Labels entering the bias Bernoulli test.
    pub n_labels_tested: u64,
}

impl ModelFairnessSummary {
    pub fn bernoulli(&self, metric: Metric) -> &BernoulliTestResult {
        match metric {
            Metric::Bias => &self.bias_bernoulli,
            Metric::Imbalance => &self.imbalance_bernoulli,
        }
    }
}

/// Sum trials and significant counts over models and take the binomial tail.
pub fn pooled_bernoulli(
    summaries: &[ModelFairnessSummary],
    metric: Metric,
    tau: f64,
) -> Result<BernoulliTestResult, MetricsError> {
    if summaries.is_empty() {
        return Err(MetricsError::EmptyPool);
    }
    let (n, k) = summaries.iter().fold((0, 0), |(n, k), s| {
        let b = s.bernoulli(metric);
        (n + b.n_trials, k + b.n_significant)
    });
    Ok(BernoulliTestResult::new(n, k, tau)?)
}

#[derive(Debug, Clone, Serialize)]
pub struct ModelAnalysis {
    pub summary: ModelFairnessSummary,
    pub inconsistency: InconsistencyReport,
    pub bias: LabelRegressions,
    pub imbalance: LabelRegressions,
}

pub fn analyze_model(
    predictions: &PredictionSet,
    corpus: &Corpus,
    model: &str,
    options: &AnalysisOptions,
) -> Result<ModelAnalysis, MetricsError> {
    options.validate()?;
    let incons = inconsistency(predictions, corpus, model, options)?;
    let bias = bias_analysis(predictions, corpus, model, options)?;
    let imbalance = imbalance_analysis(predictions, corpus, model, options)?;
    let summary = ModelFairnessSummary {
        model_name: model.to_string(),
        inconsistency: incons.aggregate,
        bias_count: bias.significant_count(),
        bias_count_any: bias.significant_any_count(),
        imbalance_count: imbalance.significant_count(),
        imbalance_count_any: imbalance.significant_any_count(),
        bias_bernoulli: bias.bernoulli,
        imbalance_bernoulli: imbalance.bernoulli,
        n_labels_tested: bias.bernoulli.n_trials,
    };
    Ok(ModelAnalysis {
        summary,
        inconsistency: incons,
        bias,
        imbalance,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PooledResults {
    pub bias: BernoulliTestResult,
    pub imbalance: BernoulliTestResult,
    /// Unweighted mean of the per-model inconsistency aggregates.
    pub mean_inconsistency: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct AuditResult {
    pub models: Vec<ModelAnalysis>,
    pub pooled: PooledResults,
}

/// Analyze every model in `predictions` (sorted by name) and pool the counts.
pub fn analyze_all(
    predictions: &PredictionSet,
    corpus: &Corpus,
    options: &AnalysisOptions,
) -> Result<AuditResult, MetricsError> {
    options.validate()?;
    let labels = selected_labels(corpus, options)?;
    let has_variant_predictions = predictions.model_names().any(|m| {
        let preds = predictions.model(m).expect("listed model");
        preds.labels().iter().any(|l| labels.contains(l))
    });
    if !has_variant_predictions {
        return Err(MetricsError::NothingToAnalyze);
    }

    let models = predictions
        .model_names()
        .map(|m| analyze_model(predictions, corpus, m, options))
        .collect::<Result<Vec<_>, _>>()?;
    let summaries: Vec<ModelFairnessSummary> = models.iter().map(|m| m.summary.clone()).collect();
    let per_model: Vec<f64> = summaries.iter().filter_map(|s| s.inconsistency).collect();
    let pooled = PooledResults {
        bias: pooled_bernoulli(&summaries, Metric::Bias, options.tau)?,
        imbalance: pooled_bernoulli(&summaries, Metric::Imbalance, options.tau)?,
        mean_inconsistency: (!per_model.is_empty())
            .then(|| per_model.iter().sum::<f64>() / per_model.len() as f64),
    };
    Ok(AuditResult { models, pooled })
}
