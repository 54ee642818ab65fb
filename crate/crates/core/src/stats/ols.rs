//! Least squares by Householder QR with in-order column acceptance.
//!
//! Columns are processed left to right. A column whose component orthogonal
//! to the already accepted columns has norm at most `RANK_TOLERANCE` times the
//! largest column norm of `X` is flagged unidentified and skipped, so for a
//! given column order the set of dropped columns is reproducible.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::StatError;

/// Relative pivot threshold for declaring a column collinear.
pub const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RankReport {
    /// Accepted column positions, ascending.
    pub kept: Vec<usize>,
    /// Columns flagged unidentified, ascending.
    pub dropped: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct OlsFit {
    /// One entry per input column; `None` for unidentified columns.
    pub coefficients: Vec<Option<f64>>,
    pub residuals: DVector<f64>,
    pub rank: RankReport,
}

impl OlsFit {
    pub fn identified_coefficients(&self) -> DVector<f64> {
        DVector::from_iterator(
            self.rank.kept.len(),
            self.rank.kept.iter().map(|&c| self.coefficients[c].unwrap()),
        )
    }
}

pub fn ols(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<OlsFit, StatError> {
    let (n, p) = x.shape();
    if y.len() != n {
        return Err(StatError::Shape(format!(
            "X has {n} rows but y has {}",
            y.len()
        )));
    }

    let scale = (0..p).map(|c| x.column(c).norm()).fold(0.0, f64::max);
    let tol = RANK_TOLERANCE * scale;

    let mut a = x.clone();
    let mut qty = y.clone();
    let mut kept = Vec::new();
    let mut dropped = Vec::new();

    for j in 0..p {
        let r = kept.len();
        if r == n {
            dropped.push(j);
            continue;
        }
        let norm = a.column(j).rows(r, n - r).norm();
        if scale == 0.0 || norm <= tol {
            dropped.push(j);
            continue;
        }
        // Reflector mapping a[r.., j] onto -sign(a[r, j]) * norm * e_1.
        let alpha = if a[(r, j)] >= 0.0 { -norm } else { norm };
        let mut v = a.column(j).rows(r, n - r).clone_owned();
        v[0] -= alpha;
        let v_norm_sq = v.norm_squared();
        if v_norm_sq > 0.0 {
            for c in j..p {
                let mut col = a.column_mut(c);
                let mut col = col.rows_mut(r, n - r);
                let dot = v.dot(&col);
                col.axpy(-2.0 * dot / v_norm_sq, &v, 1.0);
            }
            let mut tail = qty.rows_mut(r, n - r);
            let dot = v.dot(&tail);
            tail.axpy(-2.0 * dot / v_norm_sq, &v, 1.0);
        }
        kept.push(j);
    }

    if kept.is_empty() {
        return Err(StatError::NoUsableColumns);
    }

    // Back substitution on the upper-triangular kept block.
    let k = kept.len();
    let mut beta = vec![0.0; k];
    for i in (0..k).rev() {
        let mut acc = qty[i];
        for m in (i + 1)..k {
            acc -= a[(i, kept[m])] * beta[m];
        }
        beta[i] = acc / a[(i, kept[i])];
    }

    let mut coefficients = vec![None; p];
    let mut fitted = DVector::zeros(n);
    for (m, &c) in kept.iter().enumerate() {
        coefficients[c] = Some(beta[m]);
        fitted.axpy(beta[m], &x.column(c), 1.0);
    }
    Ok(OlsFit {
        coefficients,
        residuals: y - fitted,
        rank: RankReport { kept, dropped },
    })
}
