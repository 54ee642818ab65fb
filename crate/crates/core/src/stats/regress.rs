//! One-way fixed-effects regression with document-clustered inference.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, FisherSnedecor, StudentsT};

use super::frame::{drop_singletons_with_rows, within_demean, RegressionFrame};
use super::ols::ols;
use super::robust::{cluster_robust_cov, small_sample_factor};
use super::StatError;

#[derive(Debug, Clone, Serialize)]
pub struct RegressionResult {
    pub column_names: Vec<String>,
    /// Per input column; `None` when the column was unidentified.
    pub coefficients: Vec<Option<f64>>,
    pub std_errors: Vec<Option<f64>>,
    /// Two-sided p-values against t(G−1).
    pub per_coef_p: Vec<Option<f64>>,
    /// Cluster-robust covariance over identified columns, in column order.
    pub covariance: Vec<Vec<f64>>,
    pub identified_columns: Vec<usize>,
    pub wald_stat: f64,
    /// Numerator degrees of freedom of the joint F test.
    pub wald_df: usize,
    pub joint_p: f64,
    pub residual_dof: i64,
    pub small_sample_factor: f64,
    pub n_obs: usize,
    pub n_groups: usize,
    pub n_dropped_singletons: usize,
    /// Rows of the input frame that entered the estimation.
    #[serde(skip)]
    pub used_rows: Vec<usize>,
    /// Within residuals aligned with `used_rows`.
    #[serde(skip)]
    pub residuals: Vec<f64>,
}

impl RegressionResult {
    /// Smallest identified per-coefficient p-value.
    pub fn min_coef_p(&self) -> f64 {
        self.per_coef_p
            .iter()
            .flatten()
            .copied()
            .fold(1.0, f64::min)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("finite result serialises")
    }
}

fn two_sided_t(coef: f64, se: f64, dof: f64) -> f64 {
    if se == 0.0 || !se.is_finite() {
        return if coef == 0.0 { 1.0 } else { 0.0 };
    }
    let t = StudentsT::new(0.0, 1.0, dof).expect("dof >= 1");
    (2.0 * t.sf((coef / se).abs())).clamp(0.0, 1.0)
}

/// Wald statistic `a' V⁺ a` with the rank of `V` as degrees of freedom.
fn wald(coef: &DVector<f64>, cov: &DMatrix<f64>) -> (f64, usize) {
    let svd = cov.clone().svd(true, true);
    let top = svd.singular_values.max();
    if top <= 0.0 {
        return (if coef.iter().all(|&c| c == 0.0) { 0.0 } else { f64::INFINITY }, 0);
    }
    let rank = svd
        .singular_values
        .iter()
        .filter(|&&s| s > 1e-12 * top)
        .count();
    let pinv = svd.pseudo_inverse(1e-12 * top).expect("u and v computed");
    let w = (coef.transpose() * pinv * coef)[(0, 0)];
    (w.max(0.0), rank)
}

/// Demean by group, fit OLS, and attach clustered inference.
pub fn fe_regress(frame: &RegressionFrame) -> Result<RegressionResult, StatError> {
    if frame.n_rows() == 0 {
        return Err(StatError::EmptyFrame);
    }
    let (kept_frame, used_rows, n_dropped) = drop_singletons_with_rows(frame);
    if kept_frame.n_rows() == 0 {
        return Err(StatError::Unidentified(
            "every document contributes a single observation".into(),
        ));
    }
    let n_groups = kept_frame.n_groups();
    if n_groups < 2 {
        return Err(StatError::TooFewClusters(n_groups));
    }
    let demeaned = within_demean(&kept_frame);
    let fit = match ols(&demeaned.x, &demeaned.y) {
        Ok(fit) => fit,
        Err(StatError::NoUsableColumns) => {
            return Err(StatError::Unidentified(
                "no within-document variation in any treated indicator".into(),
            ))
        }
        Err(e) => return Err(e),
    };

    let kept = &fit.rank.kept;
    let k = kept.len();
    let n = demeaned.n_rows();
    let x_kept = demeaned.x.select_columns(kept);
    let cov = cluster_robust_cov(&x_kept, &fit.residuals, &demeaned.group_ids)?;

    let dof = (n_groups - 1) as f64;
    let p = frame.x.ncols();
    let mut std_errors = vec![None; p];
    let mut per_coef_p = vec![None; p];
    for (m, &c) in kept.iter().enumerate() {
        let se = cov[(m, m)].max(0.0).sqrt();
        std_errors[c] = Some(se);
        per_coef_p[c] = Some(two_sided_t(fit.coefficients[c].unwrap(), se, dof));
    }

    let alpha = fit.identified_coefficients();
    let (wald_stat, wald_df) = wald(&alpha, &cov);
    let joint_p = if wald_df == 0 {
        if wald_stat == 0.0 {
            1.0
        } else {
            0.0
        }
    } else {
        let f = FisherSnedecor::new(wald_df as f64, dof).expect("positive dof");
        f.sf(wald_stat / wald_df as f64).clamp(0.0, 1.0)
    };

    Ok(RegressionResult {
        column_names: frame.column_names.clone(),
        coefficients: fit.coefficients.clone(),
        std_errors,
        per_coef_p,
        covariance: (0..k)
            .map(|i| (0..k).map(|j| cov[(i, j)]).collect())
            .collect(),
        identified_columns: kept.clone(),
        wald_stat,
        wald_df,
        joint_p,
        residual_dof: n as i64 - n_groups as i64 - k as i64,
        small_sample_factor: small_sample_factor(n_groups, n, k),
        n_obs: n,
        n_groups,
        n_dropped_singletons: n_dropped,
        used_rows,
        residuals: fit.residuals.iter().copied().collect(),
    })
}
