//! Principal component analysis via the singular value decomposition of the
//! mean-centered data.
//!
//! Small problems use an exact dense SVD. Problems whose dense SVD would
//! cost more than [`EXACT_FLOP_BUDGET`] use seeded randomized subspace
//! iteration on the implicitly centered matrix, which also accepts sparse
//! input without densifying it.

use nalgebra::DMatrix;
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::sparse::CsrMatrix;
use crate::error::{Error, Result};
use crate::rng;

const FORMAT_VERSION: u32 = 1;

/// Largest `N·d·min(N, d)` handled by the exact SVD.
pub const EXACT_FLOP_BUDGET: f64 = 4e9;
const OVERSAMPLE: usize = 10;
const POWER_ITERS: usize = 7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PcaMethod {
    /// Exact below [`EXACT_FLOP_BUDGET`], randomized above.
    #[default]
    Auto,
    Exact,
    Randomized { seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PcaFile", into = "PcaFile")]
pub struct PcaModel {
    mean: Vec<f64>,
    /// k × d, rows orthonormal.
    components: DMatrix<f64>,
    explained_variance: Vec<f64>,
    total_variance: f64,
    n_samples: usize,
}

#[derive(Serialize, Deserialize)]
struct PcaFile {
    version: u32,
    n_samples: usize,
    total_variance: f64,
    mean: Vec<f64>,
    explained_variance: Vec<f64>,
    /// Row-major, one row per component.
    components: Vec<Vec<f64>>,
}

impl From<PcaModel> for PcaFile {
    fn from(m: PcaModel) -> Self {
        PcaFile {
            version: FORMAT_VERSION,
            n_samples: m.n_samples,
            total_variance: m.total_variance,
            components: m
                .components
                .row_iter()
                .map(|r| r.iter().copied().collect())
                .collect(),
            mean: m.mean,
            explained_variance: m.explained_variance,
        }
    }
}

impl TryFrom<PcaFile> for PcaModel {
    type Error = Error;

    fn try_from(f: PcaFile) -> Result<Self> {
        if f.version != FORMAT_VERSION {
            return Err(Error::Format(format!("pca model version {}", f.version)));
        }
        let d = f.mean.len();
        let k = f.components.len();
        if k == 0 || k != f.explained_variance.len() {
            return Err(Error::DimensionMismatch {
                expected: f.explained_variance.len(),
                got: k,
            });
        }
        if let Some(row) = f.components.iter().find(|r| r.len() != d) {
            return Err(Error::DimensionMismatch { expected: d, got: row.len() });
        }
        let flat: Vec<f64> = f.components.into_iter().flatten().collect();
        if flat.iter().chain(&f.mean).chain(&f.explained_variance).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("pca model".into()));
        }
        Ok(PcaModel {
            mean: f.mean,
            components: DMatrix::from_row_slice(k, d, &flat),
            explained_variance: f.explained_variance,
            total_variance: f.total_variance,
            n_samples: f.n_samples,
        })
    }
}

/// Data matrix as seen by the PCA solvers.
trait Operator {
    fn nrows(&self) -> usize;
    fn ncols(&self) -> usize;
    fn column_means(&self) -> Vec<f64>;
    /// Sum over columns of the centered sum of squares.
    fn centered_sum_of_squares(&self, mean: &[f64]) -> f64;
    /// `X · m`
    fn mul(&self, m: &DMatrix<f64>) -> DMatrix<f64>;
    /// `Xᵀ · m`
    fn tr_mul(&self, m: &DMatrix<f64>) -> DMatrix<f64>;
}

impl Operator for DMatrix<f64> {
    fn nrows(&self) -> usize {
        self.nrows()
    }
    fn ncols(&self) -> usize {
        self.ncols()
    }
    fn column_means(&self) -> Vec<f64> {
        self.column_iter().map(|c| c.mean()).collect()
    }
    fn centered_sum_of_squares(&self, mean: &[f64]) -> f64 {
        self.column_iter()
            .zip(mean)
            .map(|(c, m)| c.iter().map(|v| (v - m) * (v - m)).sum::<f64>())
            .sum()
    }
    fn mul(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        self * m
    }
    fn tr_mul(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        self.tr_mul(m)
    }
}

impl Operator for CsrMatrix {
    fn nrows(&self) -> usize {
        self.nrows()
    }
    fn ncols(&self) -> usize {
        self.ncols()
    }
    fn column_means(&self) -> Vec<f64> {
        self.column_means()
    }
    fn centered_sum_of_squares(&self, mean: &[f64]) -> f64 {
        // zeros contribute mean^2 each; stored entries are corrected below
        let mut ss: f64 = mean.iter().map(|m| m * m).sum::<f64>() * self.nrows() as f64;
        for i in 0..self.nrows() {
            for (c, v) in self.row(i) {
                let m = mean[c];
                ss += (v - m) * (v - m) - m * m;
            }
        }
        ss.max(0.0)
    }
    fn mul(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        self.mul_dense(m)
    }
    fn tr_mul(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        self.tr_mul_dense(m)
    }
}

fn check_k(n: usize, d: usize, k: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("pca needs at least 2 rows, got {n}")));
    }
    let max_k = (n - 1).min(d);
    if k == 0 || k > max_k {
        return Err(Error::InvalidArgument(format!(
            "pca k = {k} outside 1..={max_k} for {n}×{d} data"
        )));
    }
    Ok(())
}

fn exact_is_affordable(n: usize, d: usize) -> bool {
    n as f64 * d as f64 * n.min(d) as f64 <= EXACT_FLOP_BUDGET
}

pub fn fit_pca(x: &DMatrix<f64>, k: usize) -> Result<PcaModel> {
    fit_pca_with(x, k, PcaMethod::Auto)
}

pub fn fit_pca_with(x: &DMatrix<f64>, k: usize, method: PcaMethod) -> Result<PcaModel> {
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("pca input".into()));
    }
    fit_operator(x, k, method, |mean| {
        let mut c = x.clone();
        for mut row in c.row_iter_mut() {
            for (v, m) in row.iter_mut().zip(mean) {
                *v -= m;
            }
        }
        c
    })
}

/// PCA of sparse rows; the exact path densifies only when affordable.
pub fn fit_pca_sparse(x: &CsrMatrix, k: usize, method: PcaMethod) -> Result<PcaModel> {
    fit_operator(x, k, method, |mean| {
        let mut c = x.to_dense();
        for mut row in c.row_iter_mut() {
            for (v, m) in row.iter_mut().zip(mean) {
                *v -= m;
            }
        }
        c
    })
}

fn fit_operator<O: Operator>(
    x: &O,
    k: usize,
    method: PcaMethod,
    centered_dense: impl FnOnce(&[f64]) -> DMatrix<f64>,
) -> Result<PcaModel> {
    let (n, d) = (x.nrows(), x.ncols());
    check_k(n, d, k)?;
    let mean = x.column_means();
    let total_ss = x.centered_sum_of_squares(&mean);
    if total_ss <= 0.0 {
        return Err(Error::ZeroVariance("all rows are identical".into()));
    }
    let exact = match method {
        PcaMethod::Exact => true,
        PcaMethod::Randomized { .. } => false,
        PcaMethod::Auto => exact_is_affordable(n, d),
    };
    let (sigma, vt) = if exact {
        exact_svd(centered_dense(&mean))
    } else {
        let seed = match method {
            PcaMethod::Randomized { seed } => seed,
            _ => rng::derive(n as u64, d as u64),
        };
        randomized_svd(x, &mean, k, seed)
    };
    let mut components = vt.rows(0, k).into_owned();
    fix_signs(&mut components);
    let denom = (n - 1) as f64;
    Ok(PcaModel {
        mean,
        components,
        explained_variance: sigma[..k].iter().map(|s| s * s / denom).collect(),
        total_variance: total_ss / denom,
        n_samples: n,
    })
}

/// Singular values (descending) and matching right singular vectors as rows.
fn exact_svd(c: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let svd = c.svd(false, true);
    let vt = svd.v_t.expect("requested v_t");
    sorted(svd.singular_values.as_slice(), |i| vt.row(i).into_owned())
}

fn sorted(sigma: &[f64], row: impl Fn(usize) -> nalgebra::RowDVector<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let mut order: Vec<usize> = (0..sigma.len()).collect();
    order.sort_by(|&a, &b| sigma[b].total_cmp(&sigma[a]).then(a.cmp(&b)));
    let rows: Vec<_> = order.iter().map(|&i| row(i)).collect();
    (order.iter().map(|&i| sigma[i]).collect(), DMatrix::from_rows(&rows))
}

/// Randomized range finder with power iterations on `X - 1·meanᵀ`.
fn randomized_svd<O: Operator>(x: &O, mean: &[f64], k: usize, seed: u64) -> (Vec<f64>, DMatrix<f64>) {
    let (n, d) = (x.nrows(), x.ncols());
    let l = (k + OVERSAMPLE).min(n.min(d));
    let mu = DMatrix::from_column_slice(d, 1, mean);
    let centered_mul = |m: &DMatrix<f64>| {
        // X·m - 1·(μᵀ m)
        let mut y = x.mul(m);
        let shift = mu.tr_mul(m);
        for mut row in y.row_iter_mut() {
            row -= &shift;
        }
        y
    };
    let centered_tr_mul = |q: &DMatrix<f64>| {
        // Xᵀq - μ·(1ᵀ q)
        let mut z = x.tr_mul(q);
        let col_sums = DMatrix::from_fn(1, q.ncols(), |_, j| q.column(j).sum());
        z -= &mu * col_sums;
        z
    };
    let mut r = rng::rng(seed);
    let omega = DMatrix::from_fn(d, l, |_, _| r.sample::<f64, _>(StandardNormal));
    let mut q = centered_mul(&omega).qr().q();
    for _ in 0..POWER_ITERS {
        let z = centered_tr_mul(&q).qr().q();
        q = centered_mul(&z).qr().q();
    }
    // B = Qᵀ A = Zᵀ with Z = Aᵀ Q; right singular vectors of B are left ones of Z
    let z = centered_tr_mul(&q);
    let svd = z.svd(true, false);
    let u = svd.u.expect("requested u");
    sorted(svd.singular_values.as_slice(), |i| u.column(i).transpose())
}

/// Make the largest-magnitude entry of each component positive (first one on ties).
fn fix_signs(components: &mut DMatrix<f64>) {
    for mut row in components.row_iter_mut() {
        let mut best = 0;
        for (j, v) in row.iter().enumerate() {
            if v.abs() > row[best].abs() {
                best = j;
            }
        }
        if row[best] < 0.0 {
            row.neg_mut();
        }
    }
}

impl PcaModel {
    pub fn n_components(&self) -> usize {
        self.components.nrows()
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn components(&self) -> &DMatrix<f64> {
        &self.components
    }

    pub fn explained_variance(&self) -> &[f64] {
        &self.explained_variance
    }

    /// Sum of the per-column sample variances of the fitted data.
    pub fn total_variance(&self) -> f64 {
        self.total_variance
    }

    pub fn explained_variance_ratio(&self) -> Vec<f64> {
        self.explained_variance.iter().map(|v| v / self.total_variance).collect()
    }

    fn check_dim(&self, got: usize) -> Result<()> {
        if got != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got,
            });
        }
        Ok(())
    }

    /// `(X - mean) · componentsᵀ`
    pub fn transform(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check_dim(x.ncols())?;
        let mut c = x.clone();
        for mut row in c.row_iter_mut() {
            for (v, m) in row.iter_mut().zip(&self.mean) {
                *v -= m;
            }
        }
        Ok(c * self.components.transpose())
    }

    pub fn transform_sparse(&self, x: &CsrMatrix) -> Result<DMatrix<f64>> {
        self.check_dim(x.ncols())?;
        let vt = self.components.transpose();
        let mut out = x.mul_dense(&vt);
        let shift = DMatrix::from_row_slice(1, self.dim(), &self.mean) * &vt;
        for mut row in out.row_iter_mut() {
            row -= &shift;
        }
        Ok(out)
    }

    pub fn inverse_transform(&self, z: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if z.ncols() != self.n_components() {
            return Err(Error::DimensionMismatch {
                expected: self.n_components(),
                got: z.ncols(),
            });
        }
        let mut x = z * &self.components;
        for mut row in x.row_iter_mut() {
            for (v, m) in row.iter_mut().zip(&self.mean) {
                *v += m;
            }
        }
        Ok(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::Distribution;

    fn random_matrix(n: usize, d: usize, seed: u64) -> DMatrix<f64> {
        let mut r = rng::rng(seed);
        DMatrix::from_fn(n, d, |_, _| StandardNormal.sample(&mut r))
    }

    /// Cyclic Jacobi eigenvalues of a symmetric matrix, descending.
    fn jacobi_eigenvalues(mut a: DMatrix<f64>) -> Vec<f64> {
        let n = a.nrows();
        for _sweep in 0..100 {
            let off: f64 = (0..n)
                .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
                .map(|(i, j)| a[(i, j)] * a[(i, j)])
                .sum();
            if off < 1e-30 {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    if a[(p, q)].abs() < 1e-300 {
                        continue;
                    }
                    let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * a[(p, q)]);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let t = if theta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let (akp, akq) = (a[(k, p)], a[(k, q)]);
                        a[(k, p)] = c * akp - s * akq;
                        a[(k, q)] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let (apk, aqk) = (a[(p, k)], a[(q, k)]);
                        a[(p, k)] = c * apk - s * aqk;
                        a[(q, k)] = s * apk + c * aqk;
                    }
                }
            }
        }
        let mut ev: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
        ev.sort_by(|a, b| b.total_cmp(a));
        ev
    }

    fn sample_covariance(x: &DMatrix<f64>) -> DMatrix<f64> {
        let n = x.nrows();
        let mut c = x.clone();
        for j in 0..x.ncols() {
            let m = x.column(j).mean();
            c.column_mut(j).add_scalar_mut(-m);
        }
        c.tr_mul(&c) / (n - 1) as f64
    }

    #[test]
    fn collinear_points() {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 1.0, 2.0, 2.0, 3.0, 3.0]);
        let m = fit_pca(&x, 1).unwrap();
        let h = 1.0 / 2f64.sqrt();
        assert!((m.components()[(0, 0)] - h).abs() < 1e-12);
        assert!((m.components()[(0, 1)] - h).abs() < 1e-12);
        assert!((m.explained_variance_ratio()[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn explained_variance_matches_covariance_eigenvalues() {
        let x = random_matrix(20, 5, 11);
        let m = fit_pca(&x, 3).unwrap();
        let ev = jacobi_eigenvalues(sample_covariance(&x));
        for i in 0..3 {
            assert!((m.explained_variance()[i] - ev[i]).abs() < 1e-8, "{i}");
        }
    }

    #[test]
    fn full_basis_reconstructs_and_preserves_norms() {
        let x = random_matrix(12, 4, 5);
        let m = fit_pca(&x, 4).unwrap();
        let z = m.transform(&x).unwrap();
        let back = m.inverse_transform(&z).unwrap();
        assert!((back - &x).amax() < 1e-8);
        for i in 0..x.nrows() {
            let centered: f64 = (0..4).map(|j| (x[(i, j)] - m.mean()[j]).powi(2)).sum::<f64>().sqrt();
            assert!((z.row(i).norm() - centered).abs() < 1e-8);
        }
    }

    #[test]
    fn transform_properties() {
        let x = random_matrix(30, 6, 9);
        let m = fit_pca(&x, 4).unwrap();
        let mean_row = DMatrix::from_row_slice(1, 6, m.mean());
        assert!(m.transform(&mean_row).unwrap().amax() < 1e-12);
        let z = m.transform(&x).unwrap();
        for c in 0..4 {
            let col = z.column(c);
            let var = col.iter().map(|v| (v - col.mean()).powi(2)).sum::<f64>() / 29.0;
            assert!((var - m.explained_variance()[c]).abs() < 1e-8);
        }
        let gram = m.components() * m.components().transpose();
        assert!((gram - DMatrix::identity(4, 4)).amax() < 1e-8);
        assert!(m.explained_variance().windows(2).all(|w| w[0] >= w[1]));
        assert!(m.explained_variance().iter().sum::<f64>() <= m.total_variance() + 1e-8);
        assert!(m.transform(&DMatrix::zeros(1, 5)).is_err());
    }

    #[test]
    fn sign_convention() {
        let x = random_matrix(25, 7, 2);
        let m = fit_pca(&x, 5).unwrap();
        for row in m.components().row_iter() {
            let max = row.iter().copied().fold(0.0f64, |a, v| if v.abs() > a.abs() { v } else { a });
            assert!(max > 0.0);
        }
        let neg = fit_pca(&(-&x), 5).unwrap();
        assert!((neg.components() - m.components()).amax() < 1e-10);
    }

    #[test]
    fn errors() {
        let x = random_matrix(5, 3, 1);
        assert!(fit_pca(&x, 0).is_err());
        assert!(fit_pca(&x, 4).is_err());
        let wide = random_matrix(3, 8, 1);
        assert!(fit_pca(&wide, 3).is_err());
        assert!(fit_pca(&wide, 2).is_ok());
        let flat = DMatrix::from_element(4, 3, 2.5);
        assert!(matches!(fit_pca(&flat, 1), Err(Error::ZeroVariance(_))));
    }

    #[test]
    fn randomized_matches_exact_on_low_rank_data() {
        let n = 80;
        let mut r = rng::rng(3);
        let basis = random_matrix(6, 40, 4);
        let scores = DMatrix::from_fn(n, 6, |_, j| { let e: f64 = StandardNormal.sample(&mut r); e * (6 - j) as f64 * 3.0 });
        let noise = random_matrix(n, 40, 8) * 1e-3;
        let x = scores * basis + noise;
        let exact = fit_pca_with(&x, 5, PcaMethod::Exact).unwrap();
        let approx = fit_pca_with(&x, 5, PcaMethod::Randomized { seed: 1 }).unwrap();
        for i in 0..5 {
            let (a, b) = (exact.explained_variance()[i], approx.explained_variance()[i]);
            assert!((a - b).abs() / a < 1e-6, "{i}: {a} vs {b}");
        }
        let gram = approx.components() * approx.components().transpose();
        assert!((gram - DMatrix::identity(5, 5)).amax() < 1e-8);
        assert!((approx.components() - exact.components()).amax() < 1e-4);
    }

    #[test]
    fn sparse_input_matches_dense() {
        let rows: Vec<Vec<(usize, f64)>> = (0..15)
            .map(|i| (0..10).filter(|j| (i * 3 + j * 7) % 4 == 0).map(|j| (j, (i + j) as f64 * 0.1)).collect())
            .collect();
        let s = CsrMatrix::from_rows(&rows, 10).unwrap();
        let dense = s.to_dense();
        let a = fit_pca(&dense, 4).unwrap();
        let b = fit_pca_sparse(&s, 4, PcaMethod::Auto).unwrap();
        assert!((a.components() - b.components()).amax() < 1e-10);
        let c = fit_pca_sparse(&s, 4, PcaMethod::Randomized { seed: 9 }).unwrap();
        for i in 0..4 {
            assert!((a.explained_variance()[i] - c.explained_variance()[i]).abs() < 1e-6 * a.explained_variance()[0]);
        }
        let za = a.transform(&dense).unwrap();
        let zb = b.transform_sparse(&s).unwrap();
        assert!((za - zb).amax() < 1e-10);
    }

    #[test]
    fn json_round_trip() {
        let m = fit_pca(&random_matrix(10, 4, 6), 2).unwrap();
        let back: PcaModel = serde_json::from_str(&serde_json::to_string(&m).unwrap()).unwrap();
        assert_eq!(back, m);
    }
}
