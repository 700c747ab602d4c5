//! Significance-filtered audio subset.
//!
//! One MLR per target on the audio columns; a base feature is kept when its
//! coefficient is significant for either target. The key indicators are
//! collinear with the intercept, so their individual t-tests are not
//! identified; the group is tested jointly with a Wald F-test and kept or
//! dropped as a whole.

use serde::{Deserialize, Serialize};

use super::{FeatureMatrix, FeatureSubset};
use crate::dataset::{base_feature_of, Target};
use crate::error::{Error, Result};
use crate::numerics::ols_fit;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignificanceRow {
    /// Base feature name; `key` stands for the whole indicator group.
    pub feature: String,
    pub target: Target,
    /// `None` for the key group, which has no single coefficient.
    pub coefficient: Option<f64>,
    pub p_value: f64,
    pub significant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignificanceResult {
    pub subset: FeatureSubset,
    pub alpha: f64,
    pub rows: Vec<SignificanceRow>,
}

/// Base features in column order, each with the column positions it owns.
fn groups(audio: &FeatureMatrix) -> Vec<(String, Vec<usize>)> {
    let mut out: Vec<(String, Vec<usize>)> = Vec::new();
    for (j, name) in audio.column_names().iter().enumerate() {
        let base = base_feature_of(name);
        match out.iter_mut().find(|(b, _)| b == base) {
            Some((_, cols)) => cols.push(j),
            None => out.push((base.to_string(), vec![j])),
        }
    }
    out
}

pub fn select_significant_audio(
    audio: &FeatureMatrix,
    valence: &[f64],
    arousal: &[f64],
    alpha: f64,
) -> Result<SignificanceResult> {
    if !(alpha > 0.0) || alpha.is_nan() {
        return Err(Error::InvalidArgument(format!("alpha must be positive, got {alpha}")));
    }
    let (n, d) = (audio.nrows(), audio.ncols());
    if n <= d + 1 {
        return Err(Error::InferenceUnavailable(format!(
            "significance test needs N > d + 1 (N = {n}, d = {d})"
        )));
    }
    let groups = groups(audio);
    let mut keep = vec![false; groups.len()];
    let mut rows = Vec::new();
    for (target, y) in [(Target::Valence, valence), (Target::Arousal, arousal)] {
        let fit = ols_fit(audio.values(), y)?;
        let p = fit
            .p_values()
            .ok_or_else(|| Error::InferenceUnavailable("ols returned no inference".into()))?
            .to_vec();
        for (g, (base, cols)) in groups.iter().enumerate() {
            let (coefficient, p_value) = if cols.len() == 1 {
                (Some(fit.coefficients[cols[0] + 1]), p[cols[0] + 1])
            } else {
                let idx: Vec<usize> = cols.iter().map(|j| j + 1).collect();
                (None, fit.joint_f_test(&idx)?)
            };
            // A saturated threshold keeps everything, including features
            // whose p-value is undefined.
            let significant = alpha >= 1.0 || p_value < alpha;
            keep[g] |= significant;
            rows.push(SignificanceRow {
                feature: base.clone(),
                target,
                coefficient,
                p_value,
                significant,
            });
        }
    }
    let columns = groups
        .iter()
        .zip(&keep)
        .filter(|(_, k)| **k)
        .flat_map(|((_, cols), _)| cols.iter().map(|&j| audio.column_names()[j].clone()))
        .collect();
    Ok(SignificanceResult {
        subset: FeatureSubset {
            columns,
            procedure: "significance".into(),
            criterion: format!("p < {alpha} for valence or arousal"),
        },
        alpha,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::AUDIO_COLUMNS;
    use crate::rng::rng;
    use crate::selection::Modality;
    use nalgebra::DMatrix;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn audio_like(n: usize, seed: u64) -> FeatureMatrix {
        let mut r = rng(seed);
        let mut x = DMatrix::<f64>::from_fn(n, 23, |_, _| r.sample(StandardNormal));
        for i in 0..n {
            let k = r.random_range(0..13);
            for j in 10..23 {
                x[(i, j)] = if j - 10 == k { 1.0 } else { 0.0 };
            }
            x[(i, 9)] = if r.random::<bool>() { 1.0 } else { 0.0 };
        }
        let names = AUDIO_COLUMNS.iter().map(|s| s.to_string()).collect();
        let ids = (0..n).map(|i| format!("s{i}")).collect();
        FeatureMatrix::uniform(x, names, Modality::Audio, ids).unwrap()
    }

    fn noise(n: usize, seed: u64) -> Vec<f64> {
        let mut r = rng(seed);
        (0..n).map(|_| r.sample(StandardNormal)).collect()
    }

    #[test]
    fn strong_signal_is_retained() {
        let a = audio_like(400, 1);
        let dance = a.column("danceability").unwrap();
        let v: Vec<f64> = dance.iter().zip(noise(400, 2)).map(|(d, e)| 3.0 * d + e).collect();
        let res = select_significant_audio(&a, &v, &noise(400, 3), 0.05).unwrap();
        assert!(res.subset.columns.contains(&"danceability".to_string()));
        assert_eq!(res.rows.len(), 2 * 11);
    }

    #[test]
    fn saturated_alpha_keeps_all() {
        let a = audio_like(100, 4);
        let res = select_significant_audio(&a, &noise(100, 5), &noise(100, 6), 1.0).unwrap();
        assert_eq!(res.subset.columns, a.column_names());
    }

    #[test]
    fn key_group_moves_as_one() {
        let a = audio_like(600, 7);
        let kd = a.column("key_D").unwrap();
        let v: Vec<f64> = kd.iter().zip(noise(600, 8)).map(|(k, e)| 2.0 * k + e).collect();
        let res = select_significant_audio(&a, &v, &noise(600, 9), 0.01).unwrap();
        let keys = res.subset.columns.iter().filter(|c| c.starts_with("key_")).count();
        assert_eq!(keys, 13);
    }

    #[test]
    fn tiny_alpha_on_noise_is_nearly_empty() {
        let total: usize = (0..20)
            .map(|rep| {
                let a = audio_like(200, 100 + rep);
                let res =
                    select_significant_audio(&a, &noise(200, 200 + rep), &noise(200, 300 + rep), 1e-4).unwrap();
                res.subset.columns.iter().filter(|c| !c.starts_with("key_")).count()
                    + usize::from(res.subset.columns.iter().any(|c| c.starts_with("key_")))
            })
            .sum();
        assert!(total <= 1, "false positives: {total}");
    }

    #[test]
    fn needs_residual_dof() {
        let a = audio_like(24, 10);
        assert!(matches!(
            select_significant_audio(&a, &noise(24, 1), &noise(24, 2), 0.05),
            Err(Error::InferenceUnavailable(_))
        ));
    }
}
