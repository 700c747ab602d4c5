//! Shared numerical kernels.

pub mod ols;
pub mod pca;
pub mod sparse;
pub mod special;
pub mod standardize;

pub use ols::{ols_fit, OlsInference, OlsSummary};
pub use pca::{fit_pca, fit_pca_sparse, fit_pca_with, PcaMethod, PcaModel};
pub use sparse::CsrMatrix;
pub use standardize::Standardizer;

/// Sample variance (N-1 denominator); 0 for fewer than two values.
pub fn sample_variance(values: &[f64]) -> f64 {
    standardize::mean_sd(values.iter().copied()).1.powi(2)
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}
