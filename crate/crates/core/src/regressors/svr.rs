//! Epsilon-insensitive support vector regression with an RBF kernel.
//!
//! The dual is solved by sequential minimal optimization over the `2l`
//! variables `(α, α*)`: minimize `½ αᵀQα + pᵀα` subject to `yᵀα = 0` and
//! `0 ≤ α ≤ C`, where the first `l` variables carry `y = +1, p = ε - z` and
//! the second `l` carry `y = -1, p = ε + z`. Working pairs are chosen by
//! second-order (maximal gain) selection and optimization stops once the
//! maximal KKT violation drops below `tol`.

use std::collections::VecDeque;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::params::{ParamValue, Params, Reader};
use crate::error::{Error, Result};
use crate::numerics::Standardizer;

pub const HYPERPARAMETERS: &[&str] = &["C", "epsilon", "gamma", "tol", "max_iter"];

/// Floor for the curvature of a working pair, as used by libsvm.
const TAU: f64 = 1e-12;

/// Kernel cache budget in f64 entries (256 MiB).
const CACHE_ENTRIES: usize = 32 * 1024 * 1024;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gamma {
    /// `1 / (d · var(X))` over all entries of the standardized matrix.
    Scale,
    Value(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvrParams {
    pub c: f64,
    pub epsilon: f64,
    pub gamma: Gamma,
    pub tol: f64,
    /// `None` means `max(10^7, 100·l)`.
    pub max_iter: Option<usize>,
}

impl Default for SvrParams {
    fn default() -> Self {
        SvrParams {
            c: 1.0,
            epsilon: 0.1,
            gamma: Gamma::Scale,
            tol: 1e-3,
            max_iter: None,
        }
    }
}

impl SvrParams {
    pub fn from_params(params: &Params) -> Result<Self> {
        let r = Reader::new("svr", params, HYPERPARAMETERS)?;
        let d = SvrParams::default();
        let gamma = match r.raw("gamma") {
            None => d.gamma,
            Some(ParamValue::Str(s)) if s == "scale" => Gamma::Scale,
            Some(_) => Gamma::Value(r.positive_f64("gamma", 1.0)?),
        };
        let epsilon = r.f64("epsilon", d.epsilon)?;
        if epsilon < 0.0 {
            return Err(Error::InvalidArgument("svr epsilon must be >= 0".into()));
        }
        Ok(SvrParams {
            c: r.positive_f64("C", d.c)?,
            epsilon,
            gamma,
            tol: r.positive_f64("tol", d.tol)?,
            max_iter: match r.raw("max_iter") {
                None => None,
                Some(_) => Some(r.usize("max_iter", 0)?.max(1)),
            },
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Svr {
    pub params: SvrParams,
    pub scaler: Standardizer,
    pub gamma: f64,
    /// Standardized support vectors, one per row.
    pub support: Vec<Vec<f64>>,
    /// `α_i - α*_i` for each support vector, in `[-C, C]`.
    pub dual_coef: Vec<f64>,
    /// Indices of the support vectors in the training data.
    pub support_index: Vec<usize>,
    pub rho: f64,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Rows of the RBF kernel over the training points, cached least recently used.
struct KernelCache<'a> {
    rows: &'a [Vec<f64>],
    gamma: f64,
    cache: Vec<Option<Arc<[f64]>>>,
    order: VecDeque<usize>,
    capacity: usize,
}

impl<'a> KernelCache<'a> {
    fn new(rows: &'a [Vec<f64>], gamma: f64) -> Self {
        let l = rows.len();
        KernelCache {
            rows,
            gamma,
            cache: vec![None; l],
            order: VecDeque::new(),
            capacity: (CACHE_ENTRIES / l.max(1)).clamp(2, l.max(2)),
        }
    }

    fn row(&mut self, i: usize) -> Arc<[f64]> {
        if let Some(r) = &self.cache[i] {
            let r = Arc::clone(r);
            if self.capacity < self.rows.len() {
                if let Some(pos) = self.order.iter().position(|&k| k == i) {
                    self.order.remove(pos);
                }
                self.order.push_back(i);
            }
            return r;
        }
        let xi = &self.rows[i];
        let r: Arc<[f64]> = self.rows.iter().map(|xj| (-self.gamma * sq_dist(xi, xj)).exp()).collect();
        if self.order.len() == self.capacity {
            if let Some(old) = self.order.pop_front() {
                self.cache[old] = None;
            }
        }
        self.cache[i] = Some(Arc::clone(&r));
        self.order.push_back(i);
        r
    }
}

struct Solution {
    beta: Vec<f64>,
    rho: f64,
    objective: f64,
    iterations: usize,
    converged: bool,
}

/// SMO over the `2l` dual variables. `k` supplies kernel rows of the `l`
/// training points.
fn solve(kernel: &mut KernelCache<'_>, z: &[f64], c: f64, epsilon: f64, tol: f64, max_iter: usize) -> Solution {
    let l = z.len();
    let n = 2 * l;
    let sign = |t: usize| if t < l { 1.0 } else { -1.0 };
    let p: Vec<f64> = (0..n).map(|t| if t < l { epsilon - z[t] } else { epsilon + z[t - l] }).collect();
    let mut alpha = vec![0.0; n];
    let mut grad = p.clone();
    // RBF kernel has unit diagonal
    let qd = 1.0;
    let upper = |a: f64| a >= c;
    let lower = |a: f64| a <= 0.0;
    let mut iterations = 0;
    let mut converged = false;

    while iterations < max_iter {
        // first index: maximal violating gradient
        let mut gmax = f64::NEG_INFINITY;
        let mut gmax_idx = None;
        for t in 0..n {
            if sign(t) > 0.0 {
                if !upper(alpha[t]) && -grad[t] >= gmax {
                    gmax = -grad[t];
                    gmax_idx = Some(t);
                }
            } else if !lower(alpha[t]) && grad[t] >= gmax {
                gmax = grad[t];
                gmax_idx = Some(t);
            }
        }
        let Some(i) = gmax_idx else {
            converged = true;
            break;
        };
        let ki = kernel.row(i % l);
        let yi = sign(i);
        // second index: largest objective decrease given i
        let mut gmax2 = f64::NEG_INFINITY;
        let mut gmin_idx = None;
        let mut obj_diff_min = f64::INFINITY;
        for t in 0..n {
            let yt = sign(t);
            let q_it = yi * yt * ki[t % l];
            if yt > 0.0 {
                if !lower(alpha[t]) {
                    let grad_diff = gmax + grad[t];
                    if grad[t] >= gmax2 {
                        gmax2 = grad[t];
                    }
                    if grad_diff > 0.0 {
                        let quad = qd + qd - 2.0 * yi * q_it;
                        let obj_diff = -(grad_diff * grad_diff) / if quad > 0.0 { quad } else { TAU };
                        if obj_diff <= obj_diff_min {
                            gmin_idx = Some(t);
                            obj_diff_min = obj_diff;
                        }
                    }
                }
            } else if !upper(alpha[t]) {
                let grad_diff = gmax - grad[t];
                if -grad[t] >= gmax2 {
                    gmax2 = -grad[t];
                }
                if grad_diff > 0.0 {
                    let quad = qd + qd + 2.0 * yi * q_it;
                    let obj_diff = -(grad_diff * grad_diff) / if quad > 0.0 { quad } else { TAU };
                    if obj_diff <= obj_diff_min {
                        gmin_idx = Some(t);
                        obj_diff_min = obj_diff;
                    }
                }
            }
        }
        if gmax + gmax2 < tol {
            converged = true;
            break;
        }
        let Some(j) = gmin_idx else {
            converged = true;
            break;
        };
        iterations += 1;

        let kj = kernel.row(j % l);
        let yj = sign(j);
        let q_ij = yi * yj * ki[j % l];
        let (old_i, old_j) = (alpha[i], alpha[j]);
        if yi != yj {
            let quad = {
                let q = qd + qd + 2.0 * q_ij;
                if q > 0.0 { q } else { TAU }
            };
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            // both bounds equal C, so the `diff > C_i - C_j` branch is `diff > 0`
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let quad = {
                let q = qd + qd - 2.0 * q_ij;
                if q > 0.0 { q } else { TAU }
            };
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for t in 0..n {
            let yt = sign(t);
            grad[t] += yi * yt * ki[t % l] * di + yj * yt * kj[t % l] * dj;
        }
    }

    // rho: average over free variables, else midpoint of the feasible interval
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut n_free, mut sum_free) = (0usize, 0.0);
    for t in 0..n {
        let yt = sign(t);
        let yg = yt * grad[t];
        if upper(alpha[t]) {
            if yt < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if lower(alpha[t]) {
            if yt > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            n_free += 1;
            sum_free += yg;
        }
    }
    let rho = if n_free > 0 { sum_free / n_free as f64 } else { (ub + lb) / 2.0 };
    let objective = 0.5 * (0..n).map(|t| alpha[t] * (grad[t] + p[t])).sum::<f64>();
    Solution {
        beta: (0..l).map(|t| alpha[t] - alpha[t + l]).collect(),
        rho,
        objective,
        iterations,
        converged,
    }
}

/// Population variance of all entries, as used by the `scale` heuristic.
fn entry_variance(x: &DMatrix<f64>) -> f64 {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n
}

impl Svr {
    pub fn fit(x: &DMatrix<f64>, y: &[f64], params: &SvrParams) -> Result<Svr> {
        let l = x.nrows();
        if y.len() != l {
            return Err(Error::DimensionMismatch { expected: l, got: y.len() });
        }
        let scaler = Standardizer::fit(x)?;
        let xs = scaler.apply(x)?;
        let gamma = match params.gamma {
            Gamma::Value(g) => g,
            Gamma::Scale => {
                let var = entry_variance(&xs);
                if var > 0.0 && x.ncols() > 0 {
                    1.0 / (x.ncols() as f64 * var)
                } else {
                    1.0
                }
            }
        };
        let rows: Vec<Vec<f64>> = (0..l).map(|i| xs.row(i).iter().copied().collect()).collect();
        let max_iter = params.max_iter.unwrap_or_else(|| 10_000_000usize.max(100 * l));
        let mut kernel = KernelCache::new(&rows, gamma);
        let sol = solve(&mut kernel, y, params.c, params.epsilon, params.tol, max_iter);
        if !sol.converged {
            log::warn!(
                "svr: stopped after {} iterations without reaching tolerance {}; using the current solution",
                sol.iterations,
                params.tol
            );
        }
        let support_index: Vec<usize> = (0..l).filter(|&i| sol.beta[i] != 0.0).collect();
        Ok(Svr {
            params: params.clone(),
            scaler,
            gamma,
            support: support_index.iter().map(|&i| rows[i].clone()).collect(),
            dual_coef: support_index.iter().map(|&i| sol.beta[i]).collect(),
            support_index,
            rho: sol.rho,
            objective: sol.objective,
            iterations: sol.iterations,
            converged: sol.converged,
        })
    }

    pub fn predict_row(&self, row: &[f64]) -> Result<f64> {
        let mut z = row.to_vec();
        self.scaler.apply_row(&mut z)?;
        Ok(self.decision(&z))
    }

    /// Decision value for an already standardized row.
    fn decision(&self, z: &[f64]) -> f64 {
        let s: f64 = self
            .support
            .iter()
            .zip(&self.dual_coef)
            .map(|(sv, b)| b * (-self.gamma * sq_dist(sv, z)).exp())
            .sum();
        s - self.rho
    }

    pub(crate) fn validate(&self) -> Result<()> {
        let d = self.scaler.dim();
        if self.support.len() != self.dual_coef.len() || self.support.iter().any(|s| s.len() != d) {
            return Err(Error::Format("svr support vectors are inconsistent".into()));
        }
        Ok(())
    }
}
