//! Classifiers: CART trees, random forests, gradient-boosted trees and a
//! one-hidden-layer perceptron, plus grid-search tuning.

pub mod boost;
pub mod forest;
pub mod matrix;
pub mod metrics;
pub mod mlp;
pub mod tree;
pub mod tune;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use boost::{BoostParams, BoostedModel};
pub use forest::{ForestModel, ForestParams};
pub use matrix::Matrix;
pub use metrics::{metrics, Confusion, Metrics};
pub use mlp::{MlpModel, MlpParams};
pub use tune::{default_grid, tune, TuneResult};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Gbt,
    Rf,
    Mlp,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Gbt, ModelKind::Rf, ModelKind::Mlp];

    pub fn label(self) -> &'static str {
        match self {
            ModelKind::Gbt => "GBT",
            ModelKind::Rf => "RF",
            ModelKind::Mlp => "MLP",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gbt" | "xgboost" | "boost" => Ok(ModelKind::Gbt),
            "rf" | "random_forest" | "forest" => Ok(ModelKind::Rf),
            "mlp" => Ok(ModelKind::Mlp),
            _ => Err(Error::InvalidArgument(format!(
                "unknown classifier `{s}` (expected gbt, rf or mlp)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum HyperParams {
    Gbt(BoostParams),
    Rf(ForestParams),
    Mlp(MlpParams),
}

impl HyperParams {
    pub fn kind(&self) -> ModelKind {
        match self {
            HyperParams::Gbt(_) => ModelKind::Gbt,
            HyperParams::Rf(_) => ModelKind::Rf,
            HyperParams::Mlp(_) => ModelKind::Mlp,
        }
    }
}

impl fmt::Display for HyperParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HyperParams::Gbt(p) => write!(
                f,
                "eta={} rounds={} depth={} lambda={} gamma={}",
                p.learning_rate, p.rounds, p.max_depth, p.lambda, p.gamma
            ),
            HyperParams::Rf(p) => match p.max_depth {
                Some(d) => write!(f, "trees={} depth={d}", p.n_trees),
                None => write!(f, "trees={} depth=none", p.n_trees),
            },
            HyperParams::Mlp(p) => write!(f, "hidden={} lr={}", p.hidden, p.learning_rate),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Model {
    Gbt(BoostedModel),
    Rf(ForestModel),
    Mlp(MlpModel),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub labels: Vec<u8>,
    /// Positive-class (AI) probability.
    pub proba: Vec<f64>,
}

impl Model {
    pub fn kind(&self) -> ModelKind {
        match self {
            Model::Gbt(_) => ModelKind::Gbt,
            Model::Rf(_) => ModelKind::Rf,
            Model::Mlp(_) => ModelKind::Mlp,
        }
    }

    pub fn n_features(&self) -> usize {
        match self {
            Model::Gbt(m) => m.n_features,
            Model::Rf(m) => m.n_features,
            Model::Mlp(m) => m.layers[0],
        }
    }

    pub fn proba_row(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.n_features() {
            return Err(Error::DimensionMismatch {
                expected: self.n_features(),
                actual: x.len(),
            });
        }
        if let Some(i) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("non-finite value in column {i}")));
        }
        Ok(match self {
            Model::Gbt(m) => m.proba_row(x),
            Model::Rf(m) => m.proba_row(x),
            Model::Mlp(m) => m.proba_row(x),
        })
    }

    /// Label 1 when the probability exceeds 0.5.
    pub fn predict(&self, x: &Matrix) -> Result<Prediction> {
        let proba = (0..x.rows())
            .map(|r| self.proba_row(x.row(r)))
            .collect::<Result<Vec<_>>>()?;
        let labels = proba.iter().map(|&p| u8::from(p > 0.5)).collect();
        Ok(Prediction { labels, proba })
    }
}

/// Train one configuration. MLP early stopping watches `val` when given.
pub fn train(
    params: &HyperParams,
    x: &Matrix,
    y: &[u8],
    val: Option<(&Matrix, &[u8])>,
    seed: u64,
) -> Result<Model> {
    if x.rows() < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 training samples, got {}",
            x.rows()
        )));
    }
    if y.len() != x.rows() {
        return Err(Error::DimensionMismatch {
            expected: x.rows(),
            actual: y.len(),
        });
    }
    if let Some(&bad) = y.iter().find(|&&v| v > 1) {
        return Err(Error::InvalidArgument(format!("label {bad} is not 0 or 1")));
    }
    x.check_finite()?;
    Ok(match params {
        HyperParams::Gbt(p) => Model::Gbt(boost::train_boosted(x, y, p)),
        HyperParams::Rf(p) => Model::Rf(forest::train_forest(x, y, p, seed)),
        HyperParams::Mlp(p) => Model::Mlp(mlp::train_mlp(x, y, val, p, seed)?),
    })
}

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// On-disk model: format version, the chosen configuration and the model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SavedModel {
    pub version: u32,
    pub params: HyperParams,
    pub model: Model,
}

impl SavedModel {
    pub fn new(params: HyperParams, model: Model) -> SavedModel {
        SavedModel {
            version: MODEL_FORMAT_VERSION,
            params,
            model,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<SavedModel> {
        let m: SavedModel = serde_json::from_str(s)?;
        if m.version != MODEL_FORMAT_VERSION {
            return Err(Error::InvalidArgument(format!(
                "model format version {} is not supported (expected {MODEL_FORMAT_VERSION})",
                m.version
            )));
        }
        Ok(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> (Matrix, Vec<u8>) {
        let rows: Vec<Vec<f64>> = (0..24)
            .map(|i| vec![(i as f64 * 0.37).sin(), i as f64 / 7.0, ((i * 5) % 3) as f64])
            .collect();
        let y = (0..24).map(|i| u8::from((i as f64 * 0.37).sin() + i as f64 / 20.0 > 0.5)).collect();
        (Matrix::from_rows(&rows).unwrap(), y)
    }

    #[test]
    fn zero_raw_score_is_half() {
        let m = BoostedModel {
            trees: vec![],
            learning_rate: 0.3,
            lambda: 1.0,
            gamma: 0.0,
            max_depth: 3,
            base_score: 0.0,
            n_features: 1,
            train_loss: vec![],
        };
        let p = Model::Gbt(m).predict(&Matrix::from_rows(&[vec![4.0]]).unwrap()).unwrap();
        assert_eq!(p.proba, [0.5]);
        assert_eq!(p.labels, [0]);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let (x, y) = toy();
        let m = train(&HyperParams::Rf(ForestParams { n_trees: 3, ..Default::default() }), &x, &y, None, 1).unwrap();
        let err = m.predict(&Matrix::zeros(2, 5)).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { expected: 3, actual: 5 }));
    }

    #[test]
    fn training_rejects_bad_input() {
        let (x, y) = toy();
        let p = HyperParams::Gbt(BoostParams::default());
        assert!(train(&p, &x.select_rows(&[0]), &y[..1], None, 0).is_err());
        assert!(train(&p, &x, &y[1..], None, 0).is_err());
        let mut bad = x.clone();
        bad.set(3, 1, f64::NAN);
        assert!(train(&p, &bad, &y, None, 0).is_err());
    }

    #[test]
    fn saved_models_round_trip_exactly() {
        let (x, y) = toy();
        let grid = [
            HyperParams::Gbt(BoostParams { rounds: 8, learning_rate: 0.1, max_depth: 3, ..Default::default() }),
            HyperParams::Rf(ForestParams { n_trees: 6, ..Default::default() }),
            HyperParams::Mlp(MlpParams { max_epochs: 10, ..Default::default() }),
        ];
        for p in grid {
            let m = train(&p, &x, &y, None, 11).unwrap();
            let saved = SavedModel::new(p, m.clone());
            let back = SavedModel::from_json(&saved.to_json().unwrap()).unwrap();
            assert_eq!(back, saved);
            assert_eq!(back.model.predict(&x).unwrap(), m.predict(&x).unwrap());
        }
        let mut v: serde_json::Value =
            serde_json::from_str(&SavedModel::new(grid[1], train(&grid[1], &x, &y, None, 1).unwrap()).to_json().unwrap())
                .unwrap();
        v["version"] = 99.into();
        assert!(SavedModel::from_json(&v.to_string()).is_err());
    }

    #[test]
    fn kinds_parse() {
        assert_eq!("xgboost".parse::<ModelKind>().unwrap(), ModelKind::Gbt);
        assert_eq!("RF".parse::<ModelKind>().unwrap(), ModelKind::Rf);
        assert!("svm".parse::<ModelKind>().is_err());
    }
}
