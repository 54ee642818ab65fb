//! Fairness auditing of sentencing predictions over counterfactual legal
//! cases: corpus handling, fixed-effects inference, the three fairness
//! metrics and report rendering.

pub mod dataset;
pub mod jsonl;
pub mod predictions;
pub mod metrics;
pub mod report;
pub mod stats;
