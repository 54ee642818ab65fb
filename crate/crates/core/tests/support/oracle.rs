//! Brute-force reference computations used to check the estimator.
//! Nothing here calls into the crate's numerical routines.

#![allow(dead_code)]

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use num::bigint::BigInt;
use num::{BigRational, One, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random indicator frame: documents with a baseline row and 1..=max_cols
/// variant rows, each row carrying one of `max_cols + 1` label values.
pub struct RandomFrame {
    pub y: Vec<f64>,
    pub x: Vec<Vec<f64>>,
    pub groups: Vec<usize>,
    pub n_cols: usize,
}

pub fn random_frame(seed: u64, max_docs: usize, max_cols: usize) -> RandomFrame {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_docs = rng.random_range(3..=max_docs);
    let n_cols = rng.random_range(1..=max_cols);
    let effects: Vec<f64> = (0..n_cols).map(|_| rng.random_range(-0.5..0.5)).collect();
    let mut y = Vec::new();
    let mut x = Vec::new();
    let mut groups = Vec::new();
    for doc in 0..n_docs {
        let doc_effect = rng.random_range(1.0..4.0);
        // occasional singleton documents exercise the drop path
        let rows = if rng.random::<f64>() < 0.1 {
            1
        } else {
            rng.random_range(2..=n_cols + 2)
        };
        for _ in 0..rows {
            let value = rng.random_range(0..=n_cols); // 0 = reference
            let mut row = vec![0.0; n_cols];
            let mut mean = doc_effect;
            if value > 0 {
                row[value - 1] = 1.0;
                mean += effects[value - 1];
            }
            y.push(mean + rng.random_range(-0.3..0.3));
            x.push(row);
            groups.push(doc * 7 + 3);
        }
    }
    RandomFrame {
        y,
        x,
        groups,
        n_cols,
    }
}

pub struct DummyFit {
    /// Rows kept after removing singleton documents.
    pub rows: Vec<usize>,
    pub coefficients: Vec<f64>,
    pub residuals: Vec<f64>,
    pub std_errors: Vec<f64>,
    /// Whether the explicit-dummy design had full column rank.
    pub full_rank: bool,
}

/// OLS on `[X | document dummies]` via the normal equations, with the
/// clustered sandwich built from explicit per-document outer products.
pub fn dummy_ols(y: &[f64], x: &[Vec<f64>], groups: &[usize], n_cols: usize) -> DummyFit {
    let mut sizes: BTreeMap<usize, usize> = BTreeMap::new();
    for g in groups {
        *sizes.entry(*g).or_default() += 1;
    }
    let rows: Vec<usize> = (0..y.len()).filter(|&r| sizes[&groups[r]] > 1).collect();
    let docs: Vec<usize> = sizes
        .iter()
        .filter(|(_, &s)| s > 1)
        .map(|(&g, _)| g)
        .collect();
    let n = rows.len();
    let p = n_cols + docs.len();

    let z = DMatrix::from_fn(n, p, |i, c| {
        let r = rows[i];
        if c < n_cols {
            x[r][c]
        } else if groups[r] == docs[c - n_cols] {
            1.0
        } else {
            0.0
        }
    });
    let yv = DVector::from_iterator(n, rows.iter().map(|&r| y[r]));
    let ztz = z.transpose() * &z;
    let rank = ztz.clone().svd(false, false).rank(1e-9 * ztz.norm());
    let Some(inv) = ztz.try_inverse() else {
        return DummyFit {
            rows,
            coefficients: vec![],
            residuals: vec![],
            std_errors: vec![],
            full_rank: false,
        };
    };
    let beta = &inv * z.transpose() * &yv;
    let resid = &yv - &z * &beta;

    let mut meat = DMatrix::<f64>::zeros(p, p);
    for &doc in &docs {
        let mut score = DVector::<f64>::zeros(p);
        for (i, &r) in rows.iter().enumerate() {
            if groups[r] == doc {
                for c in 0..p {
                    score[c] += z[(i, c)] * resid[i];
                }
            }
        }
        meat += &score * score.transpose();
    }
    let g = docs.len() as f64;
    let nf = n as f64;
    let k = n_cols as f64;
    let c = g / (g - 1.0) * (nf - 1.0) / (nf - k);
    let v = &inv * meat * &inv * c;

    DummyFit {
        rows,
        coefficients: (0..n_cols).map(|j| beta[j]).collect(),
        residuals: resid.iter().copied().collect(),
        std_errors: (0..n_cols).map(|j| v[(j, j)].max(0.0).sqrt()).collect(),
        full_rank: rank == p,
    }
}

/// `tau` as the exact fraction `a / b` of its shortest decimal form.
fn decimal_fraction(x: f64) -> (BigInt, BigInt) {
    let text = format!("{x}");
    let (int, frac) = text.split_once('.').unwrap_or((&text, ""));
    let digits: BigInt = format!("{int}{frac}").parse().expect("plain decimal");
    (digits, num::pow(BigInt::from(10), frac.len()))
}

/// `P(X >= k)` for `X ~ Binomial(n, tau)` in exact integer arithmetic, with
/// `tau` read as the decimal it prints as:
/// `sum_{l >= k} C(n, l) a^l (b - a)^(n - l) / b^n`.
pub fn exact_binomial_tail(n: u64, k: u64, tau: f64) -> f64 {
    let (a, b) = decimal_fraction(tau);
    let q = &b - &a;
    let mut numerator = BigInt::zero();
    let mut binom = BigInt::one();
    let mut a_pow = BigInt::one();
    for l in 0..=n {
        if l >= k {
            numerator += &binom * &a_pow * num::pow(q.clone(), (n - l) as usize);
        }
        binom = binom * BigInt::from(n - l) / BigInt::from(l + 1);
        a_pow *= &a;
    }
    BigRational::new(numerator, num::pow(b, n as usize))
        .to_f64()
        .expect("representable")
}
