//! Native statistics engine: within-transformation fixed-effects OLS,
//! document-clustered covariance, t/Wald inference and exact binomial tails.

mod binomial;
mod frame;
mod ols;
mod regress;
mod robust;

pub use binomial::{binomial_tail, BernoulliTestResult};
pub use frame::{drop_singletons, within_demean, RegressionFrame};
pub use ols::{ols, OlsFit, RankReport, RANK_TOLERANCE};
pub use regress::{fe_regress, RegressionResult};
pub use robust::{cluster_robust_cov, small_sample_factor};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StatError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("regression frame is empty")]
    EmptyFrame,
    #[error("no usable columns after rank filtering")]
    NoUsableColumns,
    #[error("unidentified label: {0}")]
    Unidentified(String),
    #[error("need at least 2 clusters, found {0}")]
    TooFewClusters(usize),
    #[error("X'X is singular")]
    Singular,
    #[error("domain error: {0}")]
    Domain(String),
}
