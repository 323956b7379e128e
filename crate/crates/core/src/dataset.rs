use nalgebra::DMatrix;

use crate::error::{CsadError, Result};

/// n×p block of observations; each row is one datapoint.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    rows: DMatrix<f64>,
}

impl Dataset {
    pub fn new(rows: DMatrix<f64>) -> Result<Self> {
        for (idx, v) in rows.iter().enumerate() {
            if !v.is_finite() {
                // column-major storage
                let n = rows.nrows();
                return Err(CsadError::NonFinite {
                    row: idx % n,
                    col: idx / n,
                });
            }
        }
        Ok(Dataset { rows })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let p = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != p) {
            return Err(CsadError::DimensionMismatch {
                expected: p,
                found: bad.len(),
            });
        }
        Self::new(DMatrix::from_fn(n, p, |i, j| rows[i][j]))
    }

    pub fn n_rows(&self) -> usize {
        self.rows.nrows()
    }

    pub fn n_cols(&self) -> usize {
        self.rows.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.nrows() == 0 || self.rows.ncols() == 0
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.rows
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.rows.row(i).iter().copied().collect()
    }

    /// Rows `start..end` as a new dataset.
    pub fn slice_rows(&self, start: usize, end: usize) -> Result<Dataset> {
        if start > end || end > self.n_rows() {
            return Err(CsadError::InvalidConfig(format!(
                "row range {start}..{end} out of bounds for {} rows",
                self.n_rows()
            )));
        }
        Ok(Dataset {
            rows: self.rows.rows(start, end - start).into_owned(),
        })
    }

    /// Stacks `self` on top of `other`.
    pub fn concat(&self, other: &Dataset) -> Result<Dataset> {
        if self.n_cols() != other.n_cols() {
            return Err(CsadError::DimensionMismatch {
                expected: self.n_cols(),
                found: other.n_cols(),
            });
        }
        let n1 = self.n_rows();
        let rows = DMatrix::from_fn(n1 + other.n_rows(), self.n_cols(), |i, j| {
            if i < n1 {
                self.rows[(i, j)]
            } else {
                other.rows[(i - n1, j)]
            }
        });
        Ok(Dataset { rows })
    }
}
