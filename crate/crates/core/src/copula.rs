//! Empirical cdf and empirical copula transforms.
//!
//! Each column is mapped through its own empirical cdf,
//! `x -> (1/n) * #{j : x_j <= x}`, so tied values share the largest rank of
//! their tie group and the maximum of every column maps to exactly 1. The
//! transform costs one sort per column.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{RdcError, Result};
use crate::sample::Sample;

/// Output of [`copula_transform`]: an `n x d` matrix with entries in `(0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CopulaSample {
    data: DMatrix<f64>,
}

impl CopulaSample {
    pub fn n(&self) -> usize {
        self.data.nrows()
    }

    pub fn d(&self) -> usize {
        self.data.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn column(&self, j: usize) -> &[f64] {
        let n = self.n();
        &self.data.as_slice()[j * n..(j + 1) * n]
    }

    /// Reinterprets the ranks as an ordinary sample.
    pub fn to_sample(&self) -> Sample {
        Sample::new(self.data.clone()).expect("copula entries are finite and n >= 2")
    }
}

/// Empirical cdf of `column` evaluated at each of its own entries.
pub fn empirical_cdf(column: &[f64]) -> Result<Vec<f64>> {
    if column.is_empty() {
        return Err(RdcError::InvalidInput("empirical cdf of an empty column".into()));
    }
    if let Some(row) = column.iter().position(|v| !v.is_finite()) {
        return Err(RdcError::NonFinite { row, col: 0 });
    }
    Ok(ecdf_ranks(column))
}

fn ecdf_ranks(column: &[f64]) -> Vec<f64> {
    let n = column.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_unstable_by(|&a, &b| column[a].total_cmp(&column[b]));

    let nf = n as f64;
    let mut out = vec![0.0; n];
    let mut start = 0;
    while start < n {
        let value = column[order[start]];
        let mut end = start + 1;
        // -0.0 and 0.0 compare equal under `<=`, so group them together.
        while end < n && column[order[end]] == value {
            end += 1;
        }
        let rank = end as f64 / nf;
        for &idx in &order[start..end] {
            out[idx] = rank;
        }
        start = end;
    }
    out
}

/// Applies [`empirical_cdf`] to every column of `s`.
pub fn copula_transform(s: &Sample) -> CopulaSample {
    let n = s.n();
    let columns: Vec<Vec<f64>> = (0..s.d())
        .into_par_iter()
        .map(|j| ecdf_ranks(s.column(j)))
        .collect();
    let mut data = DMatrix::zeros(n, s.d());
    for (j, col) in columns.iter().enumerate() {
        data.column_mut(j).copy_from_slice(col);
    }
    CopulaSample { data }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Literal O(n^2) indicator count.
    fn brute_force(column: &[f64]) -> Vec<f64> {
        let n = column.len() as f64;
        column
            .iter()
            .map(|&x| column.iter().filter(|&&v| v <= x).count() as f64 / n)
            .collect()
    }

    #[test]
    fn sorted_distinct_values() {
        assert_eq!(
            empirical_cdf(&[1.0, 2.0, 3.0, 4.0]).unwrap(),
            vec![0.25, 0.5, 0.75, 1.0]
        );
    }

    #[test]
    fn ties_share_max_rank() {
        assert_eq!(
            empirical_cdf(&[5.0, 5.0, 1.0]).unwrap(),
            vec![1.0, 1.0, 1.0 / 3.0]
        );
    }

    #[test]
    fn five_point_example_matches_brute_force() {
        let col = [0.3, -1.2, 7.0, 0.0, 2.5];
        let expected = brute_force(&col);
        assert_eq!(expected, vec![0.6, 0.2, 1.0, 0.4, 0.8]);
        assert_eq!(empirical_cdf(&col).unwrap(), expected);

        let s = Sample::from_column(&col).unwrap();
        assert_eq!(copula_transform(&s).column(0), expected.as_slice());
    }

    #[test]
    fn rejects_non_finite() {
        assert!(matches!(
            empirical_cdf(&[1.0, f64::INFINITY]),
            Err(RdcError::NonFinite { row: 1, .. })
        ));
        assert!(empirical_cdf(&[]).is_err());
    }

    #[test]
    fn affine_column_gives_identical_copula() {
        let a = [0.7, -2.0, 3.3, 0.1, 9.0, -0.4];
        let b: Vec<f64> = a.iter().map(|v| 3.0 * v + 7.0).collect();
        let s = Sample::from_columns(&[a.to_vec(), b]).unwrap();
        let u = copula_transform(&s);
        assert_eq!(u.column(0), u.column(1));
    }

    #[test]
    fn negative_zero_ties_with_zero() {
        assert_eq!(empirical_cdf(&[0.0, -0.0, 1.0]).unwrap(), vec![2.0 / 3.0, 2.0 / 3.0, 1.0]);
    }

    proptest! {
        #[test]
        fn matches_indicator_count(col in proptest::collection::vec(-5i32..5, 1..60)) {
            // Small integer range forces plenty of ties.
            let col: Vec<f64> = col.into_iter().map(f64::from).collect();
            prop_assert_eq!(empirical_cdf(&col).unwrap(), brute_force(&col));
        }

        #[test]
        fn idempotent_and_uniform(col in proptest::collection::hash_set(-100_000i64..100_000, 2..80)) {
            let col: Vec<f64> = col.into_iter().map(|v| v as f64 * 0.37).collect();
            let s = Sample::from_column(&col).unwrap();
            let u = copula_transform(&s);
            let uu = copula_transform(&u.to_sample());
            prop_assert_eq!(&u, &uu);

            let n = col.len();
            let mut sorted = u.column(0).to_vec();
            sorted.sort_by(f64::total_cmp);
            let grid: Vec<f64> = (1..=n).map(|i| i as f64 / n as f64).collect();
            prop_assert_eq!(sorted, grid);
        }

        #[test]
        fn increasing_maps_are_invisible(col in proptest::collection::vec(-3.0f64..3.0, 2..50)) {
            let s = Sample::from_column(&col).unwrap();
            let t = s.map_column(0, |v| v.exp() * 5.0 - 1.0).unwrap();
            prop_assert_eq!(copula_transform(&s), copula_transform(&t));
        }
    }
}
