//! Ordinary least squares with classical t-test inference.
//!
//! Coefficients come from the pseudo-inverse of the intercept-augmented
//! design `[1 X]` computed by SVD, so exactly collinear designs (such as a
//! full set of dummy indicators next to the intercept) still fit. The
//! residual degrees of freedom are `N - rank`, which is `N - d - 1` for a
//! full-rank design.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::special::{f_sf, student_t_two_sided_p};
use crate::error::{Error, Result};

/// Weight a coefficient may carry in the design's null space before it is
/// flagged as not identifiable.
const NULL_SPACE_WEIGHT: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OlsInference {
    pub std_errors: Vec<f64>,
    pub t_stats: Vec<f64>,
    pub p_values: Vec<f64>,
    pub df_resid: usize,
    pub sigma2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OlsSummary {
    /// Intercept first, then one per column of X.
    pub coefficients: Vec<f64>,
    pub r_squared_train: f64,
    pub rank: usize,
    pub n_obs: usize,
    /// `None` when N ≤ d + 1.
    pub inference: Option<OlsInference>,
    /// Coefficients not identified by the data (non-zero weight in the
    /// design's null space); their standard errors are unreliable.
    pub unreliable: Vec<bool>,
    /// Unscaled covariance `(AᵀA)⁺`, row-major, kept for joint tests.
    #[serde(skip)]
    xtx_pinv: Option<DMatrix<f64>>,
}

impl OlsSummary {
    pub fn intercept(&self) -> f64 {
        self.coefficients[0]
    }

    pub fn slopes(&self) -> &[f64] {
        &self.coefficients[1..]
    }

    pub fn p_values(&self) -> Option<&[f64]> {
        self.inference.as_ref().map(|i| i.p_values.as_slice())
    }

    pub fn predict(&self, x: &DMatrix<f64>) -> Result<DVector<f64>> {
        let d = self.coefficients.len() - 1;
        if x.ncols() != d {
            return Err(Error::DimensionMismatch { expected: d, got: x.ncols() });
        }
        let beta = DVector::from_column_slice(&self.coefficients[1..]);
        Ok((x * beta).add_scalar(self.coefficients[0]))
    }

    /// Joint Wald F-test that the coefficients at `indices` (positions in
    /// `coefficients`, 0 = intercept) are all zero. Returns the p-value.
    ///
    /// Uses `F = β_Sᵀ (C_S)⁺ β_S / (q σ̂²)` with `q = rank(C_S)`, so
    /// collinear groups are tested on their estimable part only.
    pub fn joint_f_test(&self, indices: &[usize]) -> Result<f64> {
        let inf = self
            .inference
            .as_ref()
            .ok_or_else(|| Error::InferenceUnavailable("joint test without residual dof".into()))?;
        let cov = self
            .xtx_pinv
            .as_ref()
            .ok_or_else(|| Error::InferenceUnavailable("summary was deserialized".into()))?;
        let q_all = indices.len();
        if q_all == 0 || indices.iter().any(|&i| i >= self.coefficients.len()) {
            return Err(Error::InvalidArgument("joint test indices out of range".into()));
        }
        let sub = DMatrix::from_fn(q_all, q_all, |a, b| cov[(indices[a], indices[b])]);
        let beta = DVector::from_iterator(q_all, indices.iter().map(|&i| self.coefficients[i]));
        let svd = sub.svd(true, true);
        let smax = svd.singular_values.max();
        let tol = q_all as f64 * smax * f64::EPSILON * 16.0;
        let q = svd.singular_values.iter().filter(|&&s| s > tol).count();
        if q == 0 || inf.sigma2 <= 0.0 {
            let any = beta.iter().any(|b| *b != 0.0);
            return Ok(if any { 0.0 } else { 1.0 });
        }
        let pinv = svd
            .pseudo_inverse(tol)
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
        let wald = (beta.transpose() * pinv * &beta)[(0, 0)];
        let f = wald / (q as f64 * inf.sigma2);
        Ok(f_sf(f, q as f64, inf.df_resid as f64))
    }
}

/// Fit `y ≈ b0 + X b`.
pub fn ols_fit(x: &DMatrix<f64>, y: &[f64]) -> Result<OlsSummary> {
    let (n, d) = (x.nrows(), x.ncols());
    if y.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: y.len() });
    }
    if n == 0 {
        return Err(Error::Empty("ols needs at least one row".into()));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("ols input".into()));
    }
    let p = d + 1;
    let a = DMatrix::from_fn(n, p, |i, j| if j == 0 { 1.0 } else { x[(i, j - 1)] });
    let yv = DVector::from_column_slice(y);

    let svd = a.clone().svd(true, true);
    let u = svd.u.as_ref().expect("requested u");
    let vt = svd.v_t.as_ref().expect("requested v_t");
    let sigma = &svd.singular_values;
    let smax = sigma.max();
    let tol = n.max(p) as f64 * smax * f64::EPSILON;
    let kept: Vec<usize> = (0..sigma.len()).filter(|&i| sigma[i] > tol).collect();
    let rank = kept.len();

    // β = V Σ⁺ Uᵀ y
    let uty = u.tr_mul(&yv);
    let mut beta = DVector::zeros(p);
    for &i in &kept {
        beta.axpy(uty[i] / sigma[i], &vt.row(i).transpose(), 1.0);
    }

    let fitted = &a * &beta;
    let resid = &yv - &fitted;
    let rss = resid.norm_squared();
    let mean_y = yv.mean();
    let tss: f64 = y.iter().map(|v| (v - mean_y) * (v - mean_y)).sum();
    let r_squared_train = if tss > 0.0 {
        1.0 - rss / tss
    } else if rss <= f64::EPSILON * n as f64 * mean_y.abs().max(1.0) {
        1.0
    } else {
        0.0
    };

    let unreliable: Vec<bool> = (0..p)
        .map(|j| {
            let in_row_space: f64 = kept.iter().map(|&i| vt[(i, j)] * vt[(i, j)]).sum();
            1.0 - in_row_space > NULL_SPACE_WEIGHT
        })
        .collect();

    // (AᵀA)⁺ = V Σ⁻² Vᵀ over the kept singular values
    let mut xtx_pinv = DMatrix::zeros(p, p);
    for &i in &kept {
        let v = vt.row(i).transpose();
        xtx_pinv.ger(1.0 / (sigma[i] * sigma[i]), &v, &v, 1.0);
    }

    let inference = if n > p && n > rank {
        let df_resid = n - rank;
        let sigma2 = rss / df_resid as f64;
        let mut std_errors = Vec::with_capacity(p);
        let mut t_stats = Vec::with_capacity(p);
        let mut p_values = Vec::with_capacity(p);
        for j in 0..p {
            let se = (sigma2 * xtx_pinv[(j, j)]).max(0.0).sqrt();
            let b = beta[j];
            let (t, pv) = if se > 0.0 {
                let t = b / se;
                (t, student_t_two_sided_p(t, df_resid as f64))
            } else if b == 0.0 {
                (0.0, 1.0)
            } else {
                (f64::INFINITY.copysign(b), 0.0)
            };
            std_errors.push(se);
            t_stats.push(t);
            p_values.push(pv);
        }
        Some(OlsInference {
            std_errors,
            t_stats,
            p_values,
            df_resid,
            sigma2,
        })
    } else {
        log::debug!("ols: {n} rows for {p} parameters, inference unavailable");
        None
    };

    Ok(OlsSummary {
        coefficients: beta.iter().copied().collect(),
        r_squared_train,
        rank,
        n_obs: n,
        inference,
        unreliable,
        xtx_pinv: Some(xtx_pinv),
    })
}
