//! Observation matrices.
//!
//! Rows are observations and columns are variables throughout the crate,
//! so an `n x d` sample holds `n` draws of a `d`-dimensional vector.

use nalgebra::DMatrix;

use crate::error::{RdcError, Result};

/// A validated `n x d` matrix of finite observations with `n >= 2`, `d >= 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    data: DMatrix<f64>,
}

impl Sample {
    pub fn new(data: DMatrix<f64>) -> Result<Self> {
        if data.nrows() < 2 {
            return Err(RdcError::InvalidInput(format!(
                "a sample needs at least 2 rows, got {}",
                data.nrows()
            )));
        }
        if data.ncols() < 1 {
            return Err(RdcError::InvalidInput("a sample needs at least 1 column".into()));
        }
        for col in 0..data.ncols() {
            for row in 0..data.nrows() {
                if !data[(row, col)].is_finite() {
                    return Err(RdcError::NonFinite { row, col });
                }
            }
        }
        Ok(Self { data })
    }

    /// Single-variable sample from a slice.
    pub fn from_column(values: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_column_slice(values.len(), 1, values))
    }

    /// Builds a sample from row-major storage.
    pub fn from_rows(n: usize, d: usize, values: &[f64]) -> Result<Self> {
        if values.len() != n * d {
            return Err(RdcError::InvalidInput(format!(
                "expected {} values for a {n}x{d} sample, got {}",
                n * d,
                values.len()
            )));
        }
        Self::new(DMatrix::from_row_slice(n, d, values))
    }

    /// Builds a sample from a list of equally long columns.
    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self> {
        let d = columns.len();
        if d == 0 {
            return Err(RdcError::InvalidInput("a sample needs at least 1 column".into()));
        }
        let n = columns[0].len();
        if let Some(bad) = columns.iter().find(|c| c.len() != n) {
            return Err(RdcError::SizeMismatch { x: n, y: bad.len() });
        }
        Self::new(DMatrix::from_fn(n, d, |r, c| columns[c][r]))
    }

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

    /// Applies `f` to every entry of column `j`, keeping the result validated.
    pub fn map_column(&self, j: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        let mut data = self.data.clone();
        data.column_mut(j).apply(|v| *v = f(*v));
        Self::new(data)
    }

    /// Keeps the listed columns, in order.
    pub fn select_columns(&self, cols: &[usize]) -> Result<Self> {
        if let Some(&bad) = cols.iter().find(|&&c| c >= self.d()) {
            return Err(RdcError::InvalidInput(format!(
                "column {bad} out of range for a sample with {} columns",
                self.d()
            )));
        }
        Self::new(self.data.select_columns(cols.iter()))
    }

    /// Keeps the listed rows, in order.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        if let Some(&bad) = rows.iter().find(|&&r| r >= self.n()) {
            return Err(RdcError::InvalidInput(format!(
                "row {bad} out of range for a sample with {} rows",
                self.n()
            )));
        }
        Self::new(self.data.select_rows(rows.iter()))
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.data
    }
}
