use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const FORMAT_VERSION: u32 = 1;

/// Per-column z-scoring fitted on training data. Constant columns are
/// flagged and passed through unchanged (stored as mean 0, SD 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "StandardizerFile", into = "StandardizerFile")]
pub struct Standardizer {
    mean: Vec<f64>,
    sd: Vec<f64>,
    constant: Vec<bool>,
}

#[derive(Serialize, Deserialize)]
struct StandardizerFile {
    version: u32,
    mean: Vec<f64>,
    sd: Vec<f64>,
    constant: Vec<bool>,
}

impl From<Standardizer> for StandardizerFile {
    fn from(s: Standardizer) -> Self {
        StandardizerFile {
            version: FORMAT_VERSION,
            mean: s.mean,
            sd: s.sd,
            constant: s.constant,
        }
    }
}

impl TryFrom<StandardizerFile> for Standardizer {
    type Error = Error;

    fn try_from(f: StandardizerFile) -> Result<Self> {
        if f.version != FORMAT_VERSION {
            return Err(Error::Format(format!("standardizer version {}", f.version)));
        }
        let d = f.mean.len();
        for len in [f.sd.len(), f.constant.len()] {
            if len != d {
                return Err(Error::DimensionMismatch { expected: d, got: len });
            }
        }
        if f.sd.iter().any(|s| !(s.is_finite() && *s > 0.0)) || f.mean.iter().any(|m| !m.is_finite()) {
            return Err(Error::Format("standardizer SDs must be finite and > 0".into()));
        }
        Ok(Standardizer {
            mean: f.mean,
            sd: f.sd,
            constant: f.constant,
        })
    }
}

/// Sample mean and sample (N-1) standard deviation of a column.
pub(crate) fn mean_sd(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count();
    let mean = values.clone().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = values.map(|v| (v - mean) * (v - mean)).sum();
    (mean, (ss / (n - 1) as f64).sqrt())
}

impl Standardizer {
    pub fn fit(x: &DMatrix<f64>) -> Result<Self> {
        if x.nrows() == 0 {
            return Err(Error::Empty("cannot standardize zero rows".into()));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("standardizer input".into()));
        }
        let d = x.ncols();
        let mut s = Standardizer {
            mean: vec![0.0; d],
            sd: vec![1.0; d],
            constant: vec![false; d],
        };
        for j in 0..d {
            let col = x.column(j);
            let first = col[0];
            if col.iter().all(|&v| v == first) {
                s.constant[j] = true;
                continue;
            }
            let (m, sd) = mean_sd(col.iter().copied());
            s.mean[j] = m;
            s.sd[j] = sd;
        }
        Ok(s)
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn sd(&self) -> &[f64] {
        &self.sd
    }

    /// Columns that had zero variance on the fitted data.
    pub fn constant(&self) -> &[bool] {
        &self.constant
    }

    pub fn apply(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if x.ncols() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.ncols(),
            });
        }
        let mut out = x.clone();
        for j in 0..self.dim() {
            if self.constant[j] {
                continue;
            }
            let (m, s) = (self.mean[j], self.sd[j]);
            out.column_mut(j).apply(|v| *v = (*v - m) / s);
        }
        Ok(out)
    }

    pub fn apply_row(&self, row: &mut [f64]) -> Result<()> {
        if row.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: row.len(),
            });
        }
        for (j, v) in row.iter_mut().enumerate() {
            if !self.constant[j] {
                *v = (*v - self.mean[j]) / self.sd[j];
            }
        }
        Ok(())
    }
}
