use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};

use super::StatError;

/// Finite-sample factor `G/(G−1) · (n−1)/(n−K)` applied to the cluster sandwich.
pub fn small_sample_factor(n_clusters: usize, n_obs: usize, n_coef: usize) -> f64 {
    let g = n_clusters as f64;
    let n = n_obs as f64;
    let k = n_coef as f64;
    (g / (g - 1.0)) * ((n - 1.0) / (n - k))
}

/// Cluster-robust sandwich `c · (X'X)⁻¹ (Σ_g X_g' u_g u_g' X_g) (X'X)⁻¹`.
///
/// `x` holds only identified columns; `clusters` assigns each row to a
/// cluster key. The result is symmetrised.
pub fn cluster_robust_cov(
    x: &DMatrix<f64>,
    residuals: &DVector<f64>,
    clusters: &[usize],
) -> Result<DMatrix<f64>, StatError> {
    let (n, k) = x.shape();
    if residuals.len() != n || clusters.len() != n {
        return Err(StatError::Shape(format!(
            "X has {n} rows, residuals {}, clusters {}",
            residuals.len(),
            clusters.len()
        )));
    }

    let mut scores: HashMap<usize, DVector<f64>> = HashMap::new();
    for r in 0..n {
        let score = scores.entry(clusters[r]).or_insert_with(|| DVector::zeros(k));
        score.axpy(residuals[r], &x.row(r).transpose(), 1.0);
    }
    let g = scores.len();
    if g < 2 {
        return Err(StatError::TooFewClusters(g));
    }
    if n <= k {
        return Err(StatError::Singular);
    }

    // Sum outer products in cluster-key order so the result is reproducible.
    let mut keys: Vec<usize> = scores.keys().copied().collect();
    keys.sort_unstable();
    let mut meat = DMatrix::<f64>::zeros(k, k);
    for key in keys {
        let s = &scores[&key];
        meat.ger(1.0, s, s, 1.0);
    }

    let xtx = x.transpose() * x;
    let scale = xtx.diagonal().max();
    let chol = xtx.cholesky().ok_or(StatError::Singular)?;
    let min_pivot = chol.l_dirty().diagonal().min();
    if min_pivot * min_pivot <= 1e-12 * scale {
        return Err(StatError::Singular);
    }
    let bread = chol.inverse();
    let mut v = &bread * meat * &bread * small_sample_factor(g, n, k);
    let vt = v.transpose();
    v = (v + vt) * 0.5;
    Ok(v)
}
