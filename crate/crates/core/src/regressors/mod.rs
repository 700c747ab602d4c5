//! The four regression families behind one fit/predict contract.
//!
//! | family | model | input scaling |
//! |--------|-------|---------------|
//! | `mlr`  | OLS with t-test inference | raw |
//! | `rfr`  | bootstrap-aggregated CART | raw |
//! | `svr`  | epsilon-SVR, RBF kernel, SMO | standardized |
//! | `mlp`  | ReLU perceptron, Adam | standardized |
//!
//! Fitted models serialize to versioned JSON tagged by family, and a
//! deserialized model predicts bit-identically to the original.

pub mod forest;
pub mod grid;
pub mod mlp;
pub mod params;
pub mod svr;

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::r2_lenient;
use crate::numerics::{ols_fit, OlsSummary};

pub use forest::{Forest, ForestParams};
pub use grid::{grid_search, GridScore, GridSearchResult, HyperparameterGrid};
pub use mlp::{Mlp, MlpParams};
pub use params::{ParamValue, Params};
pub use svr::{Svr, SvrParams};

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Mlr,
    Rfr,
    Svr,
    Mlp,
}

impl Family {
    pub const ALL: [Family; 4] = [Family::Mlr, Family::Rfr, Family::Svr, Family::Mlp];

    pub fn name(self) -> &'static str {
        match self {
            Family::Mlr => "mlr",
            Family::Rfr => "rfr",
            Family::Svr => "svr",
            Family::Mlp => "mlp",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Family::Mlr => "MLR",
            Family::Rfr => "RFR",
            Family::Svr => "SVR",
            Family::Mlp => "MLP",
        }
    }

    pub fn hyperparameters(self) -> &'static [&'static str] {
        match self {
            Family::Mlr => &[],
            Family::Rfr => forest::HYPERPARAMETERS,
            Family::Svr => svr::HYPERPARAMETERS,
            Family::Mlp => mlp::HYPERPARAMETERS,
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown model family `{s}` (expected mlr, rfr, svr or mlp)")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressorSpec {
    pub family: Family,
    pub hyperparameters: Params,
    pub seed: u64,
}

impl RegressorSpec {
    pub fn new(family: Family, seed: u64) -> Self {
        RegressorSpec {
            family,
            hyperparameters: Params::new(),
            seed,
        }
    }

    pub fn with(mut self, name: &str, value: impl Into<ParamValue>) -> Self {
        self.hyperparameters.insert(name.to_string(), value.into());
        self
    }

    /// Check names and values without fitting.
    pub fn validate(&self) -> Result<()> {
        match self.family {
            Family::Mlr => {
                if let Some(k) = self.hyperparameters.keys().next() {
                    return Err(Error::InvalidArgument(format!("mlr takes no hyperparameters, got `{k}`")));
                }
            }
            Family::Rfr => {
                ForestParams::from_params(&self.hyperparameters)?;
            }
            Family::Svr => {
                SvrParams::from_params(&self.hyperparameters)?;
            }
            Family::Mlp => {
                MlpParams::from_params(&self.hyperparameters)?;
            }
        }
        Ok(())
    }
}

/// Fitted parameters, tagged by family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "parameters", rename_all = "lowercase")]
pub enum Model {
    Mlr(OlsSummary),
    Rfr(Forest),
    Svr(Svr),
    Mlp(Mlp),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMetadata {
    pub seed: u64,
    pub hyperparameters: Params,
    pub n_train: usize,
    pub train_r2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedRegressor {
    pub version: u32,
    pub feature_names: Vec<String>,
    pub metadata: TrainingMetadata,
    pub model: Model,
}

fn check_finite(x: &DMatrix<f64>, what: &str) -> Result<()> {
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(what.to_string()));
    }
    Ok(())
}

/// Fit with generated feature names `x0, x1, ...`.
pub fn fit(spec: &RegressorSpec, x: &DMatrix<f64>, y: &[f64]) -> Result<TrainedRegressor> {
    let names: Vec<String> = (0..x.ncols()).map(|j| format!("x{j}")).collect();
    fit_named(spec, x, y, &names)
}

pub fn fit_named(spec: &RegressorSpec, x: &DMatrix<f64>, y: &[f64], feature_names: &[String]) -> Result<TrainedRegressor> {
    let n = x.nrows();
    if y.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: y.len() });
    }
    if feature_names.len() != x.ncols() {
        return Err(Error::DimensionMismatch {
            expected: x.ncols(),
            got: feature_names.len(),
        });
    }
    if n < 2 {
        return Err(Error::InvalidArgument(format!("fitting needs at least 2 rows, got {n}")));
    }
    check_finite(x, "regressor input X")?;
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("regressor target y".into()));
    }
    let hp = &spec.hyperparameters;
    let model = match spec.family {
        Family::Mlr => {
            spec.validate()?;
            Model::Mlr(ols_fit(x, y)?)
        }
        Family::Rfr => Model::Rfr(Forest::fit(x, y, &ForestParams::from_params(hp)?, spec.seed)?),
        Family::Svr => Model::Svr(Svr::fit(x, y, &SvrParams::from_params(hp)?)?),
        Family::Mlp => Model::Mlp(Mlp::fit(x, y, &MlpParams::from_params(hp)?, spec.seed)?),
    };
    let mut trained = TrainedRegressor {
        version: MODEL_FORMAT_VERSION,
        feature_names: feature_names.to_vec(),
        metadata: TrainingMetadata {
            seed: spec.seed,
            hyperparameters: hp.clone(),
            n_train: n,
            train_r2: 0.0,
        },
        model,
    };
    trained.metadata.train_r2 = r2_lenient(y, &trained.predict(x)?);
    Ok(trained)
}

impl TrainedRegressor {
    pub fn family(&self) -> Family {
        match self.model {
            Model::Mlr(_) => Family::Mlr,
            Model::Rfr(_) => Family::Rfr,
            Model::Svr(_) => Family::Svr,
            Model::Mlp(_) => Family::Mlp,
        }
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    /// Coefficient inference, for MLR only.
    pub fn ols(&self) -> Option<&OlsSummary> {
        match &self.model {
            Model::Mlr(s) => Some(s),
            _ => None,
        }
    }

    pub fn spec(&self) -> RegressorSpec {
        RegressorSpec {
            family: self.family(),
            hyperparameters: self.metadata.hyperparameters.clone(),
            seed: self.metadata.seed,
        }
    }

    pub fn predict(&self, x: &DMatrix<f64>) -> Result<Vec<f64>> {
        let d = self.n_features();
        if x.ncols() != d {
            return Err(Error::DimensionMismatch { expected: d, got: x.ncols() });
        }
        check_finite(x, "prediction input X")?;
        let rows = || (0..x.nrows()).map(|i| x.row(i).iter().copied().collect::<Vec<f64>>());
        let out = match &self.model {
            Model::Mlr(s) => s.predict(x)?.iter().copied().collect(),
            Model::Rfr(f) => rows().map(|r| f.predict_row(&r)).collect(),
            Model::Svr(s) => rows().map(|r| s.predict_row(&r)).collect::<Result<Vec<_>>>()?,
            Model::Mlp(m) => m.predict(x)?,
        };
        Ok(out)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<TrainedRegressor> {
        let t: TrainedRegressor = serde_json::from_str(text)?;
        if t.version != MODEL_FORMAT_VERSION {
            return Err(Error::Format(format!(
                "model format version {} is not supported (expected {MODEL_FORMAT_VERSION})",
                t.version
            )));
        }
        let d = t.n_features();
        let model_dim = match &t.model {
            Model::Mlr(s) => s.coefficients.len().saturating_sub(1),
            Model::Rfr(f) => {
                f.validate()?;
                f.n_features
            }
            Model::Svr(s) => {
                s.validate()?;
                s.scaler.dim()
            }
            Model::Mlp(m) => {
                m.validate()?;
                m.scaler.dim()
            }
        };
        if model_dim != d {
            return Err(Error::Format(format!("model expects {model_dim} features but names {d}")));
        }
        Ok(t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand_distr::{Distribution, StandardNormal};

    fn data(n: usize, seed: u64) -> (DMatrix<f64>, Vec<f64>) {
        let mut r = rng::rng(seed);
        let x = DMatrix::<f64>::from_fn(n, 3, |_, _| StandardNormal.sample(&mut r));
        let y = (0..n).map(|i| x[(i, 0)] - 0.5 * x[(i, 2)] + 0.2 * x[(i, 1)].powi(2)).collect();
        (x, y)
    }

    fn specs() -> Vec<RegressorSpec> {
        vec![
            RegressorSpec::new(Family::Mlr, 0),
            RegressorSpec::new(Family::Rfr, 1).with("n_trees", 10i64),
            RegressorSpec::new(Family::Svr, 2),
            RegressorSpec::new(Family::Mlp, 3).with("hidden", 8i64).with("max_epochs", 30i64),
        ]
    }

    #[test]
    fn mlr_recovers_a_line() {
        let x = DMatrix::from_fn(20, 1, |i, _| i as f64);
        let y: Vec<f64> = (0..20).map(|i| 2.0 * i as f64 + 1.0).collect();
        let m = fit(&RegressorSpec::new(Family::Mlr, 0), &x, &y).unwrap();
        let p = m.predict(&DMatrix::from_element(1, 1, 10.0)).unwrap();
        assert!((p[0] - 21.0).abs() < 1e-8);
    }

    #[test]
    fn rfr_single_tree_predicts_training_targets() {
        let (x, y) = data(40, 1);
        let spec = RegressorSpec::new(Family::Rfr, 0)
            .with("n_trees", 1i64)
            .with("bootstrap", false);
        let m = fit(&spec, &x, &y).unwrap();
        assert_eq!(m.predict(&x).unwrap(), y);
        assert_eq!(m.metadata.train_r2, 1.0);
    }

    #[test]
    fn json_round_trip_predicts_bit_identically() {
        let (x, y) = data(60, 2);
        let (xt, _) = data(25, 3);
        for spec in specs() {
            let m = fit(&spec, &x, &y).unwrap();
            let back = TrainedRegressor::from_json(&m.to_json().unwrap()).unwrap();
            let (a, b) = (m.predict(&xt).unwrap(), back.predict(&xt).unwrap());
            assert_eq!(a, b, "{}", spec.family);
            assert_eq!(m.predict(&xt).unwrap(), a, "repeat predict {}", spec.family);
            assert!(a.iter().all(|v| v.is_finite()));
            assert_eq!(back.family(), spec.family);
        }
    }

    #[test]
    fn errors_on_bad_input() {
        let (x, y) = data(10, 4);
        let spec = RegressorSpec::new(Family::Mlr, 0);
        let mut bad = x.clone();
        bad[(3, 1)] = f64::NAN;
        assert!(matches!(fit(&spec, &bad, &y), Err(Error::NonFinite(_))));
        assert!(fit(&spec, &x.rows(0, 1).into_owned(), &y[..1]).is_err());
        let m = fit(&spec, &x, &y).unwrap();
        assert!(matches!(
            m.predict(&DMatrix::zeros(2, 2)),
            Err(Error::DimensionMismatch { expected: 3, got: 2 })
        ));
        assert!(fit(&RegressorSpec::new(Family::Mlr, 0).with("C", 1.0), &x, &y).is_err());
        assert!(fit(&RegressorSpec::new(Family::Svr, 0).with("gama", 1.0), &x, &y).is_err());
    }

    #[test]
    fn model_json_is_tagged_by_family() {
        let (x, y) = data(20, 5);
        let m = fit(&RegressorSpec::new(Family::Svr, 0), &x, &y).unwrap();
        let v: serde_json::Value = serde_json::from_str(&m.to_json().unwrap()).unwrap();
        assert_eq!(v["model"]["family"], "svr");
        assert_eq!(v["version"], 1);
        let mut tampered = v.clone();
        tampered["version"] = 99.into();
        assert!(TrainedRegressor::from_json(&tampered.to_string()).is_err());
    }

    #[test]
    fn family_parsing() {
        assert_eq!("RFR".parse::<Family>().unwrap(), Family::Rfr);
        assert!("knn".parse::<Family>().is_err());
    }
}
