use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Compressed sparse row matrix, used for TF-IDF and affect-count rows so
/// wide vocabularies never need a dense N×V buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Build from per-row `(column, value)` lists; columns must be < `ncols`.
    pub fn from_rows(rows: &[Vec<(usize, f64)>], ncols: usize) -> Result<Self> {
        let mut indptr = Vec::with_capacity(rows.len() + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for row in rows {
            for &(c, v) in row {
                if c >= ncols {
                    return Err(Error::DimensionMismatch { expected: ncols, got: c + 1 });
                }
                if !v.is_finite() {
                    return Err(Error::NonFinite("sparse row".into()));
                }
                if v != 0.0 {
                    indices.push(c);
                    values.push(v);
                }
            }
            indptr.push(indices.len());
        }
        Ok(CsrMatrix {
            nrows: rows.len(),
            ncols,
            indptr,
            indices,
            values,
        })
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.indptr[i]..self.indptr[i + 1];
        self.indices[span.clone()].iter().copied().zip(self.values[span].iter().copied())
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.nrows, self.ncols);
        for i in 0..self.nrows {
            for (c, v) in self.row(i) {
                out[(i, c)] += v;
            }
        }
        out
    }

    pub fn column_means(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.ncols];
        for (&c, &v) in self.indices.iter().zip(&self.values) {
            sums[c] += v;
        }
        let n = self.nrows.max(1) as f64;
        sums.iter().map(|s| s / n).collect()
    }

    /// `self · m` for a dense `ncols × l` matrix.
    pub fn mul_dense(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        assert_eq!(m.nrows(), self.ncols);
        let l = m.ncols();
        let mut out = DMatrix::zeros(self.nrows, l);
        for i in 0..self.nrows {
            for (c, v) in self.row(i) {
                for j in 0..l {
                    out[(i, j)] += v * m[(c, j)];
                }
            }
        }
        out
    }

    /// `selfᵀ · m` for a dense `nrows × l` matrix.
    pub fn tr_mul_dense(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        assert_eq!(m.nrows(), self.nrows);
        let l = m.ncols();
        let mut out = DMatrix::zeros(self.ncols, l);
        for i in 0..self.nrows {
            for (c, v) in self.row(i) {
                for j in 0..l {
                    out[(c, j)] += v * m[(i, j)];
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn products_match_dense() {
        let rows = vec![vec![(0, 1.0), (2, 2.0)], vec![], vec![(1, -3.0), (2, 0.5)]];
        let s = CsrMatrix::from_rows(&rows, 3).unwrap();
        let d = s.to_dense();
        let m = DMatrix::from_fn(3, 2, |i, j| (i * 2 + j) as f64 - 1.5);
        assert_eq!(s.mul_dense(&m), &d * &m);
        let n = DMatrix::from_fn(3, 4, |i, j| (i + j) as f64 * 0.25);
        assert_eq!(s.tr_mul_dense(&n), d.transpose() * &n);
        assert_eq!(s.column_means(), vec![1.0 / 3.0, -1.0, 2.5 / 3.0]);
        assert_eq!(s.nnz(), 4);
    }

    #[test]
    fn out_of_range_column_is_rejected() {
        assert!(CsrMatrix::from_rows(&[vec![(3, 1.0)]], 3).is_err());
        assert!(CsrMatrix::from_rows(&[vec![(0, f64::NAN)]], 3).is_err());
    }
}
