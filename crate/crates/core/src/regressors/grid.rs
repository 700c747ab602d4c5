//! Hyperparameter grids and k-fold cross-validated grid search.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::params::{ParamValue, Params};
use super::{fit, Family, RegressorSpec, TrainedRegressor};
use crate::error::{Error, Result};
use crate::evaluation::r2_lenient;
use crate::rng;

/// Candidate values per hyperparameter. Enumeration order is insertion
/// order with the first parameter varying slowest.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct HyperparameterGrid {
    axes: Vec<(String, Vec<ParamValue>)>,
}

impl HyperparameterGrid {
    pub fn new() -> Self {
        Self::default()
    }

    /// Add (or replace) an axis.
    pub fn with(mut self, name: &str, values: Vec<ParamValue>) -> Self {
        match self.axes.iter_mut().find(|(n, _)| n == name) {
            Some((_, v)) => *v = values,
            None => self.axes.push((name.to_string(), values)),
        }
        self
    }

    /// Small documented defaults; MLR has nothing to tune.
    pub fn default_for(family: Family) -> Self {
        let g = HyperparameterGrid::new();
        match family {
            Family::Mlr => g,
            Family::Rfr => g
                .with("n_trees", vec![100i64.into(), 300i64.into()])
                .with("min_samples_leaf", vec![1i64.into(), 5i64.into()]),
            Family::Svr => g
                .with("C", vec![0.1.into(), 1.0.into(), 10.0.into()])
                .with("epsilon", vec![0.05.into(), 0.1.into()])
                .with("gamma", vec!["scale".into()]),
            Family::Mlp => g
                .with("hidden", vec![50i64.into(), 100i64.into()])
                .with("alpha", vec![1e-4.into(), 1e-3.into()])
                .with("learning_rate", vec![1e-3.into(), 1e-2.into()]),
        }
    }

    /// Parse `name=v1|v2;name2=v3`. Values use [`ParamValue::parse`], so
    /// `hidden=50|64,32` yields one integer and one layer list.
    pub fn parse(text: &str) -> Result<Self> {
        let mut g = HyperparameterGrid::new();
        for part in text.split(';').map(str::trim).filter(|p| !p.is_empty()) {
            let (name, values) = part
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("grid axis `{part}` is not name=v1|v2")))?;
            let values: Vec<ParamValue> = values.split('|').map(ParamValue::parse).collect();
            g = g.with(name.trim(), values);
        }
        Ok(g)
    }

    pub fn axes(&self) -> &[(String, Vec<ParamValue>)] {
        &self.axes
    }

    /// Number of grid points (1 for a grid without axes).
    pub fn len(&self) -> usize {
        self.axes.iter().map(|(_, v)| v.len()).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn points(&self) -> Vec<Params> {
        let mut out = vec![Params::new()];
        for (name, values) in &self.axes {
            out = out
                .into_iter()
                .flat_map(|p| {
                    values.iter().map(move |v| {
                        let mut q = p.clone();
                        q.insert(name.clone(), v.clone());
                        q
                    })
                })
                .collect();
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridScore {
    pub hyperparameters: Params,
    pub fold_r2: Vec<f64>,
    pub mean_r2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSearchResult {
    pub best: RegressorSpec,
    pub best_index: usize,
    pub scores: Vec<GridScore>,
    /// The winner refit on all training rows.
    pub model: TrainedRegressor,
}

/// Seeded k-fold partition of `0..n`; the first `n % k` folds hold one
/// extra row. Each fold is returned sorted.
pub fn kfold(n: usize, k: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng::rng(rng::derive_labeled(seed, "kfold")));
    let (base, extra) = (n / k, n % k);
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let len = base + usize::from(f < extra);
        let mut fold = idx[start..start + len].to_vec();
        fold.sort_unstable();
        folds.push(fold);
        start += len;
    }
    folds
}

pub fn grid_search(
    family: Family,
    grid: &HyperparameterGrid,
    x: &DMatrix<f64>,
    y: &[f64],
    folds: usize,
    seed: u64,
) -> Result<GridSearchResult> {
    let n = x.nrows();
    if grid.is_empty() {
        return Err(Error::InvalidArgument("hyperparameter grid is empty".into()));
    }
    if folds < 2 || n < folds {
        return Err(Error::InvalidArgument(format!("grid search needs 2 <= folds <= N, got {folds} folds for {n} rows")));
    }
    if y.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: y.len() });
    }
    let points = grid.points();
    let specs: Vec<RegressorSpec> = points
        .iter()
        .map(|p| RegressorSpec {
            family,
            hyperparameters: p.clone(),
            seed,
        })
        .collect();
    for s in &specs {
        s.validate()?;
    }
    let parts = kfold(n, folds, seed);
    let splits: Vec<(Vec<usize>, Vec<usize>)> = parts
        .iter()
        .enumerate()
        .map(|(f, test)| {
            let train = parts
                .iter()
                .enumerate()
                .filter(|&(g, _)| g != f)
                .flat_map(|(_, p)| p.iter().copied())
                .collect::<Vec<_>>();
            let mut train = train;
            train.sort_unstable();
            (train, test.clone())
        })
        .collect();

    let jobs: Vec<(usize, usize)> = (0..specs.len()).flat_map(|c| (0..folds).map(move |f| (c, f))).collect();
    let fold_scores: Vec<f64> = jobs
        .par_iter()
        .map(|&(c, f)| -> Result<f64> {
            let (train, test) = &splits[f];
            let ytr: Vec<f64> = train.iter().map(|&i| y[i]).collect();
            let yte: Vec<f64> = test.iter().map(|&i| y[i]).collect();
            let m = fit(&specs[c], &x.select_rows(train), &ytr)?;
            Ok(r2_lenient(&yte, &m.predict(&x.select_rows(test))?))
        })
        .collect::<Result<Vec<_>>>()?;

    let scores: Vec<GridScore> = points
        .into_iter()
        .enumerate()
        .map(|(c, hyperparameters)| {
            let fold_r2 = fold_scores[c * folds..(c + 1) * folds].to_vec();
            let mean_r2 = fold_r2.iter().sum::<f64>() / folds as f64;
            GridScore {
                hyperparameters,
                fold_r2,
                mean_r2,
            }
        })
        .collect();
    // first maximum wins; NaN scores never win
    let mut best_index = 0;
    for (c, s) in scores.iter().enumerate() {
        if s.mean_r2 > scores[best_index].mean_r2 || scores[best_index].mean_r2.is_nan() {
            best_index = c;
        }
    }
    let best = specs[best_index].clone();
    log::debug!(
        "grid search {family}: best {:?} with mean CV R² {:.4}",
        best.hyperparameters,
        scores[best_index].mean_r2
    );
    let model = fit(&best, x, y)?;
    Ok(GridSearchResult {
        best,
        best_index,
        scores,
        model,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng as _;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn points_enumerate_first_axis_slowest() {
        let g = HyperparameterGrid::parse("a=1|2;b=x|y|z").unwrap();
        let pts = g.points();
        assert_eq!(pts.len(), 6);
        assert_eq!(g.len(), 6);
        let flat: Vec<String> = pts.iter().map(|p| format!("{}{}", p["a"], p["b"])).collect();
        assert_eq!(flat, ["1x", "1y", "1z", "2x", "2y", "2z"]);
        assert_eq!(HyperparameterGrid::new().points(), vec![Params::new()]);
        assert!(HyperparameterGrid::new().with("a", vec![]).is_empty());
    }

    #[test]
    fn parse_layer_lists() {
        let g = HyperparameterGrid::parse("hidden=50|64,32").unwrap();
        assert_eq!(g.axes()[0].1, vec![ParamValue::Int(50), ParamValue::Str("64,32".into())]);
        assert!(HyperparameterGrid::parse("oops").is_err());
    }

    #[test]
    fn kfold_partitions() {
        let f = kfold(23, 5, 3);
        assert_eq!(f.iter().map(Vec::len).collect::<Vec<_>>(), [5, 5, 5, 4, 4]);
        let mut all: Vec<usize> = f.concat();
        all.sort_unstable();
        assert_eq!(all, (0..23).collect::<Vec<_>>());
        assert_eq!(f, kfold(23, 5, 3));
        assert_ne!(f, kfold(23, 5, 4));
    }

    fn step_data(seed: u64) -> (DMatrix<f64>, Vec<f64>) {
        let mut r = rng::rng(seed);
        let n = 150;
        let x = DMatrix::from_fn(n, 2, |_, _| r.random_range(-1.0..1.0));
        let y = (0..n)
            .map(|i| {
                let e: f64 = StandardNormal.sample(&mut r);
                let step = if x[(i, 0)] > 0.0 { 1.0 } else { 0.0 };
                step + 0.5 * e
            })
            .collect();
        (x, y)
    }

    #[test]
    fn generating_config_wins() {
        // one split on x0 is the true model; full-depth trees chase the noise
        let (x, y) = step_data(11);
        let grid = HyperparameterGrid::new()
            .with("max_depth", vec![1i64.into(), "none".into()])
            .with("n_trees", vec![1i64.into()])
            .with("bootstrap", vec![false.into()]);
        let res = grid_search(Family::Rfr, &grid, &x, &y, 5, 1).unwrap();
        // exhaustive re-evaluation of both configs
        let folds = kfold(150, 5, 1);
        let manual: Vec<f64> = grid
            .points()
            .iter()
            .map(|p| {
                let spec = RegressorSpec {
                    family: Family::Rfr,
                    hyperparameters: p.clone(),
                    seed: 1,
                };
                folds
                    .iter()
                    .map(|test| {
                        let train: Vec<usize> = (0..150).filter(|i| !test.contains(i)).collect();
                        let ytr: Vec<f64> = train.iter().map(|&i| y[i]).collect();
                        let yte: Vec<f64> = test.iter().map(|&i| y[i]).collect();
                        let m = fit(&spec, &x.select_rows(&train), &ytr).unwrap();
                        r2_lenient(&yte, &m.predict(&x.select_rows(test)).unwrap())
                    })
                    .sum::<f64>()
                    / 5.0
            })
            .collect();
        assert_eq!(manual, res.scores.iter().map(|s| s.mean_r2).collect::<Vec<_>>());
        assert!(manual[0] > manual[1]);
        assert_eq!(res.best_index, 0);
        assert_eq!(res.best.hyperparameters["max_depth"], ParamValue::Int(1));
    }

    #[test]
    fn singleton_grid_and_determinism() {
        let (x, y) = step_data(12);
        let grid = HyperparameterGrid::new().with("C", vec![1.0.into()]);
        let a = grid_search(Family::Svr, &grid, &x, &y, 3, 5).unwrap();
        assert_eq!(a.best_index, 0);
        assert_eq!(a.best.hyperparameters["C"], ParamValue::Float(1.0));
        let b = grid_search(Family::Svr, &grid, &x, &y, 3, 5).unwrap();
        assert_eq!(a.scores, b.scores);
    }

    #[test]
    fn rejects_bad_setup() {
        let (x, y) = step_data(13);
        let empty = HyperparameterGrid::new().with("C", vec![]);
        assert!(grid_search(Family::Svr, &empty, &x, &y, 5, 0).is_err());
        assert!(grid_search(Family::Mlr, &HyperparameterGrid::new(), &x, &y, 1, 0).is_err());
        let mlr = grid_search(Family::Mlr, &HyperparameterGrid::default_for(Family::Mlr), &x, &y, 5, 0).unwrap();
        assert_eq!(mlr.scores.len(), 1);
    }
}
