use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};

use super::StatError;

/// Outcome vector, treated-indicator design and document (group) assignment
/// for one label's regression.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionFrame {
    pub y: DVector<f64>,
    pub x: DMatrix<f64>,
    pub group_ids: Vec<usize>,
    pub column_names: Vec<String>,
}

impl RegressionFrame {
    /// Validate an indicator frame: aligned rows and 0/1 design entries.
    pub fn new(
        y: DVector<f64>,
        x: DMatrix<f64>,
        group_ids: Vec<usize>,
        column_names: Vec<String>,
    ) -> Result<Self, StatError> {
        let n = y.len();
        if x.nrows() != n || group_ids.len() != n {
            return Err(StatError::Shape(format!(
                "y has {n} rows, X has {}, group_ids has {}",
                x.nrows(),
                group_ids.len()
            )));
        }
        if column_names.len() != x.ncols() {
            return Err(StatError::Shape(format!(
                "{} column names for {} columns",
                column_names.len(),
                x.ncols()
            )));
        }
        if x.iter().any(|&v| v != 0.0 && v != 1.0) {
            return Err(StatError::Shape("treated indicators must be 0 or 1".into()));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(StatError::Shape("outcomes must be finite".into()));
        }
        Ok(Self {
            y,
            x,
            group_ids,
            column_names,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.y.len()
    }

    pub fn n_groups(&self) -> usize {
        let mut ids = self.group_ids.clone();
        ids.sort_unstable();
        ids.dedup();
        ids.len()
    }

    fn select_rows(&self, rows: &[usize]) -> Self {
        Self {
            y: DVector::from_iterator(rows.len(), rows.iter().map(|&r| self.y[r])),
            x: self.x.select_rows(rows),
            group_ids: rows.iter().map(|&r| self.group_ids[r]).collect(),
            column_names: self.column_names.clone(),
        }
    }
}

fn group_sizes(ids: &[usize]) -> HashMap<usize, usize> {
    let mut sizes = HashMap::new();
    for &g in ids {
        *sizes.entry(g).or_insert(0) += 1;
    }
    sizes
}

/// Remove rows whose group has a single observation.
pub fn drop_singletons(frame: &RegressionFrame) -> (RegressionFrame, usize) {
    let (frame, _, dropped) = drop_singletons_with_rows(frame);
    (frame, dropped)
}

/// As [`drop_singletons`], also returning the retained row positions.
pub(crate) fn drop_singletons_with_rows(
    frame: &RegressionFrame,
) -> (RegressionFrame, Vec<usize>, usize) {
    let sizes = group_sizes(&frame.group_ids);
    let keep: Vec<usize> = (0..frame.n_rows())
        .filter(|&r| sizes[&frame.group_ids[r]] > 1)
        .collect();
    let dropped = frame.n_rows() - keep.len();
    (frame.select_rows(&keep), keep, dropped)
}

/// Subtract group means from `y` and every column of `X`.
pub fn within_demean(frame: &RegressionFrame) -> RegressionFrame {
    let n = frame.n_rows();
    let p = frame.x.ncols();
    let mut slot_of: HashMap<usize, usize> = HashMap::new();
    let slots: Vec<usize> = frame
        .group_ids
        .iter()
        .map(|g| {
            let next = slot_of.len();
            *slot_of.entry(*g).or_insert(next)
        })
        .collect();
    let n_groups = slot_of.len();

    // Means are accumulated as offsets from each group's first row, so a
    // group of identical values demeans to exact zeros.
    let value = |r: usize, c: usize| if c == 0 { frame.y[r] } else { frame.x[(r, c - 1)] };
    let mut first: Vec<Option<usize>> = vec![None; n_groups];
    let mut counts = vec![0.0_f64; n_groups];
    let mut sums = DMatrix::<f64>::zeros(n_groups, p + 1);
    for r in 0..n {
        let s = slots[r];
        let origin = *first[s].get_or_insert(r);
        counts[s] += 1.0;
        for c in 0..=p {
            sums[(s, c)] += value(r, c) - value(origin, c);
        }
    }
    for s in 0..n_groups {
        let origin = first[s].expect("every slot has a row");
        for c in 0..=p {
            sums[(s, c)] = value(origin, c) + sums[(s, c)] / counts[s];
        }
    }

    let y = DVector::from_iterator(n, (0..n).map(|r| frame.y[r] - sums[(slots[r], 0)]));
    let x = DMatrix::from_fn(n, p, |r, c| frame.x[(r, c)] - sums[(slots[r], c + 1)]);
    RegressionFrame {
        y,
        x,
        group_ids: frame.group_ids.clone(),
        column_names: frame.column_names.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn frame(y: &[f64], x: &[&[f64]], groups: &[usize]) -> RegressionFrame {
        let p = x.first().map_or(0, |r| r.len());
        let names = (0..p).map(|c| format!("v{c}")).collect();
        RegressionFrame::new(
            DVector::from_column_slice(y),
            DMatrix::from_fn(y.len(), p, |r, c| x[r][c]),
            groups.to_vec(),
            names,
        )
        .unwrap()
    }

    #[test]
    fn rejects_misaligned_or_non_indicator_input() {
        let y = DVector::from_vec(vec![1.0, 2.0]);
        assert!(RegressionFrame::new(y.clone(), DMatrix::zeros(3, 1), vec![0, 0], vec!["a".into()])
            .is_err());
        assert!(RegressionFrame::new(
            y.clone(),
            DMatrix::from_element(2, 1, 0.5),
            vec![0, 0],
            vec!["a".into()]
        )
        .is_err());
        assert!(RegressionFrame::new(y, DMatrix::zeros(2, 1), vec![0], vec!["a".into()]).is_err());
    }

    #[test]
    fn singleton_rows_are_dropped() {
        let f = frame(&[1.0, 2.0, 3.0], &[&[0.0], &[1.0], &[1.0]], &[7, 7, 9]);
        let (out, dropped) = drop_singletons(&f);
        assert_eq!(dropped, 1);
        assert_eq!(out.group_ids, [7, 7]);
        assert_eq!(out.y.as_slice(), [1.0, 2.0]);
    }

    #[test]
    fn no_singletons_is_identity() {
        let f = frame(&[1.0, 2.0, 3.0, 4.0], &[&[0.0], &[1.0], &[0.0], &[1.0]], &[1, 1, 2, 2]);
        let (out, dropped) = drop_singletons(&f);
        assert_eq!(dropped, 0);
        assert_eq!(out, f);
    }

    #[test]
    fn all_singletons_empties_frame() {
        let f = frame(&[1.0, 2.0, 3.0], &[&[0.0], &[1.0], &[1.0]], &[1, 2, 3]);
        let (out, dropped) = drop_singletons(&f);
        assert_eq!(dropped, 3);
        assert_eq!(out.n_rows(), 0);
    }

    #[test]
    fn demeans_single_group() {
        let f = frame(&[1.0, 3.0], &[&[0.0], &[1.0]], &[5, 5]);
        let d = within_demean(&f);
        assert_eq!(d.y.as_slice(), [-1.0, 1.0]);
        assert_eq!(d.x.as_slice(), [-0.5, 0.5]);
    }

    #[test]
    fn constant_within_group_column_vanishes() {
        let f = frame(
            &[1.0, 2.0, 3.0, 4.0],
            &[&[1.0, 0.0], &[1.0, 1.0], &[0.0, 1.0], &[0.0, 0.0]],
            &[1, 1, 2, 2],
        );
        let d = within_demean(&f);
        assert!(d.x.column(0).iter().all(|&v| v == 0.0));
    }

    fn random_frame() -> impl Strategy<Value = RegressionFrame> {
        (2usize..12).prop_flat_map(|n_groups| {
            (
                proptest::collection::vec(0..n_groups, 50),
                proptest::collection::vec(-100.0f64..100.0, 50),
                proptest::collection::vec(proptest::bool::ANY, 100),
            )
                .prop_map(|(groups, y, bits)| {
                    RegressionFrame::new(
                        DVector::from_vec(y),
                        DMatrix::from_fn(50, 2, |r, c| f64::from(u8::from(bits[r * 2 + c]))),
                        groups,
                        vec!["a".into(), "b".into()],
                    )
                    .unwrap()
                })
        })
    }

    fn group_sums(f: &RegressionFrame, col: impl Fn(usize) -> f64) -> HashMap<usize, f64> {
        let mut sums = HashMap::new();
        for r in 0..f.n_rows() {
            *sums.entry(f.group_ids[r]).or_insert(0.0) += col(r);
        }
        sums
    }

    proptest! {
        #[test]
        fn demeaned_group_sums_vanish(f in random_frame()) {
            let d = within_demean(&f);
            for s in group_sums(&d, |r| d.y[r]).values() {
                prop_assert!(s.abs() < 1e-12, "y group sum {s}");
            }
            for c in 0..2 {
                for s in group_sums(&d, |r| d.x[(r, c)]).values() {
                    prop_assert!(s.abs() < 1e-12, "x group sum {s}");
                }
            }
        }

        #[test]
        fn demeaning_is_idempotent(f in random_frame()) {
            let once = within_demean(&f);
            let twice = within_demean(&once);
            prop_assert!((&once.y - &twice.y).amax() < 1e-12);
            prop_assert!((&once.x - &twice.x).amax() < 1e-12);
        }
    }
}
