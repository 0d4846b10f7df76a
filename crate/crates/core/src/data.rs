//! The realisation matrix every operation consumes.

use nalgebra::{DMatrix, DVector};

use crate::error::{data, Error, Result};

/// A `t × n` matrix of `t` realisations (rows) over `n` marginals (columns).
///
/// Row and column accessors are 1-based, matching the usual statistical
/// indexing `i ∈ {1..n}`, `j ∈ {1..t}`. Internal storage is a dense matrix.
///
/// Invariants enforced at construction: `t ≥ 2`, `n ≥ 1`, all entries finite.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    inner: DMatrix<f64>,
}

impl DataMatrix {
    /// Build from a dense matrix (rows are realisations).
    pub fn new(inner: DMatrix<f64>) -> Result<Self> {
        if inner.nrows() < 2 {
            return Err(Error::InsufficientData {
                need: 2,
                got: inner.nrows(),
            });
        }
        if inner.ncols() < 1 {
            return Err(data("data matrix needs at least one column"));
        }
        if let Some((r, c)) = first_non_finite(&inner) {
            return Err(data(format!(
                "non-finite entry at row {}, column {}",
                r + 1,
                c + 1
            )));
        }
        Ok(Self { inner })
    }

    /// Build from row slices.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InsufficientData { need: 2, got: 0 });
        }
        let n = rows[0].len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(data("rows have inconsistent lengths"));
        }
        let flat: Vec<f64> = rows.iter().flat_map(|r| r.iter().copied()).collect();
        Self::new(DMatrix::from_row_slice(rows.len(), n, &flat))
    }

    /// Number of realisations `t`.
    pub fn t(&self) -> usize {
        self.inner.nrows()
    }

    /// Number of marginals `n`.
    pub fn n(&self) -> usize {
        self.inner.ncols()
    }

    /// Entry at 1-based (row `j`, column `i`).
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.inner[(row - 1, col - 1)]
    }

    /// Underlying dense matrix (0-based).
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.inner
    }

    /// Column means.
    pub fn column_means(&self) -> DVector<f64> {
        let t = self.t() as f64;
        DVector::from_iterator(self.n(), self.inner.column_iter().map(|c| c.sum() / t))
    }

    /// Mean-centered copy of the data.
    pub fn centered(&self) -> DMatrix<f64> {
        let means = self.column_means();
        let mut out = self.inner.clone();
        for (j, mut col) in out.column_iter_mut().enumerate() {
            col.add_scalar_mut(-means[j]);
        }
        out
    }

    /// Sample covariance, normalized by `t`.
    pub fn sample_covariance(&self) -> DMatrix<f64> {
        let xc = self.centered();
        xc.tr_mul(&xc) / self.t() as f64
    }

    /// New matrix keeping only the given 0-based rows, in the given order.
    pub(crate) fn select_rows(&self, rows: &[usize]) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(rows.len(), self.n());
        for (dst, &src) in rows.iter().enumerate() {
            out.set_row(dst, &self.inner.row(src));
        }
        out
    }
}

fn first_non_finite(m: &DMatrix<f64>) -> Option<(usize, usize)> {
    for c in 0..m.ncols() {
        for r in 0..m.nrows() {
            if !m[(r, c)].is_finite() {
                return Some((r, c));
            }
        }
    }
    None
}
