//! Recursive feature elimination on a linear model.
//!
//! Columns are standardized once up front so coefficient magnitudes are
//! comparable. Each round refits OLS on the survivors and drops the one
//! with the smallest `|coefficient|`; ties go to the earliest column.

use serde::{Deserialize, Serialize};

use super::{FeatureMatrix, FeatureSubset};
use crate::error::{Error, Result};
use crate::numerics::{ols_fit, Standardizer};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Elimination {
    pub feature: String,
    /// Standardized coefficient magnitude at the round it was removed.
    pub abs_coefficient: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RfeResult {
    /// Survivors in their original column order.
    pub subset: FeatureSubset,
    /// Standardized coefficients of the final fit, aligned with `subset`.
    pub final_coefficients: Vec<f64>,
    pub eliminated: Vec<Elimination>,
    /// Rounds whose design was rank deficient and solved by pseudo-inverse.
    pub rank_deficient_rounds: usize,
}

pub fn rfe(x: &FeatureMatrix, y: &[f64], n_keep: usize) -> Result<RfeResult> {
    let d = x.ncols();
    if n_keep == 0 || n_keep > d {
        return Err(Error::InvalidArgument(format!("n_keep must be in [1, {d}], got {n_keep}")));
    }
    let scaler = Standardizer::fit(x.values())?;
    let mut z = scaler.apply(x.values())?;
    // Constant columns carry no information; zeroing them makes their
    // coefficient exactly 0 so they go first.
    for (j, &c) in scaler.constant().iter().enumerate() {
        if c {
            z.column_mut(j).fill(0.0);
        }
    }
    let mut alive: Vec<usize> = (0..d).collect();
    let mut eliminated = Vec::with_capacity(d - n_keep);
    let mut rank_deficient_rounds = 0;
    loop {
        let fit = ols_fit(&z.select_columns(&alive), y)?;
        if fit.rank < alive.len() + 1 {
            rank_deficient_rounds += 1;
            // Dummy-coded keys alias the intercept, so this repeats every
            // round on the standard design; say it once.
            if rank_deficient_rounds == 1 {
                log::warn!("rfe: rank-deficient design with {} columns, using pseudo-inverse", alive.len());
            } else {
                log::debug!("rfe: rank-deficient design with {} columns", alive.len());
            }
        }
        if alive.len() == n_keep {
            return Ok(RfeResult {
                subset: FeatureSubset {
                    columns: alive.iter().map(|&j| x.column_names()[j].clone()).collect(),
                    procedure: "rfe".into(),
                    criterion: format!("n_keep={n_keep}"),
                },
                final_coefficients: fit.slopes().to_vec(),
                eliminated,
                rank_deficient_rounds,
            });
        }
        let mut worst = 0;
        for (k, b) in fit.slopes().iter().enumerate() {
            if b.abs() < fit.slopes()[worst].abs() {
                worst = k;
            }
        }
        let j = alive.remove(worst);
        eliminated.push(Elimination {
            feature: x.column_names()[j].clone(),
            abs_coefficient: fit.slopes()[worst].abs(),
        });
    }
}
