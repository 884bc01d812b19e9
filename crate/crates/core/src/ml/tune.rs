//! Exhaustive grid search scored on a validation split.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::boost::{train_boosted, BoostParams};
use super::forest::{train_forest, ForestParams};
use super::metrics::{metrics, Metrics};
use super::mlp::{train_mlp, MlpParams};
use super::{HyperParams, Matrix, Model, ModelKind};
use crate::error::{Error, Result};

pub fn default_grid(kind: ModelKind) -> Vec<HyperParams> {
    match kind {
        ModelKind::Rf => [100, 300]
            .into_iter()
            .flat_map(|n_trees| {
                [None, Some(10)].into_iter().map(move |max_depth| {
                    HyperParams::Rf(ForestParams {
                        n_trees,
                        max_depth,
                        ..Default::default()
                    })
                })
            })
            .collect(),
        ModelKind::Gbt => {
            let mut grid = Vec::new();
            for learning_rate in [0.1, 0.3] {
                for rounds in [100, 200] {
                    for max_depth in [3, 6] {
                        grid.push(HyperParams::Gbt(BoostParams {
                            rounds,
                            learning_rate,
                            max_depth,
                            lambda: 1.0,
                            gamma: 0.0,
                            ..Default::default()
                        }));
                    }
                }
            }
            grid
        }
        ModelKind::Mlp => [32, 64]
            .into_iter()
            .flat_map(|hidden| {
                [1e-3, 1e-2].into_iter().map(move |learning_rate| {
                    HyperParams::Mlp(MlpParams {
                        hidden,
                        learning_rate,
                        ..Default::default()
                    })
                })
            })
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub params: HyperParams,
    pub val: Metrics,
}

#[derive(Debug, Clone)]
pub struct TuneResult {
    pub params: HyperParams,
    pub model: Model,
    pub val: Metrics,
    pub trials: Vec<Trial>,
}

/// Grid points that differ only in tree or round count share one training
/// run at the largest count; smaller ones are its prefixes.
fn group_key(p: &HyperParams) -> (String, usize) {
    let (stripped, count) = match *p {
        HyperParams::Rf(f) => (HyperParams::Rf(ForestParams { n_trees: 0, ..f }), f.n_trees),
        HyperParams::Gbt(b) => (HyperParams::Gbt(BoostParams { rounds: 0, ..b }), b.rounds),
        HyperParams::Mlp(_) => (*p, 0),
    };
    (serde_json::to_string(&stripped).expect("params serialize"), count)
}

/// One trained model per grid point, in grid order.
pub fn train_grid(
    train: (&Matrix, &[u8]),
    val: (&Matrix, &[u8]),
    grid: &[HyperParams],
    seed: u64,
) -> Result<Vec<Model>> {
    train.0.check_finite()?;
    let mut largest: BTreeMap<String, usize> = BTreeMap::new();
    for p in grid {
        let (key, count) = group_key(p);
        let e = largest.entry(key).or_insert(0);
        *e = (*e).max(count);
    }
    let mut full: BTreeMap<String, Model> = BTreeMap::new();
    let mut models = Vec::with_capacity(grid.len());
    for p in grid {
        let (key, count) = group_key(p);
        let model = match p {
            HyperParams::Mlp(mp) => Model::Mlp(train_mlp(train.0, train.1, Some(val), mp, seed)?),
            HyperParams::Rf(fp) => {
                let big = full.entry(key.clone()).or_insert_with(|| {
                    let params = ForestParams { n_trees: largest[&key], ..*fp };
                    Model::Rf(train_forest(train.0, train.1, &params, seed))
                });
                let Model::Rf(f) = big else { unreachable!() };
                Model::Rf(f.truncated(count))
            }
            HyperParams::Gbt(bp) => {
                let big = full.entry(key.clone()).or_insert_with(|| {
                    let params = BoostParams { rounds: largest[&key], ..*bp };
                    Model::Gbt(train_boosted(train.0, train.1, &params))
                });
                let Model::Gbt(b) = big else { unreachable!() };
                Model::Gbt(b.truncated(count))
            }
        };
        models.push(model);
    }
    Ok(models)
}

/// Train every grid point on `train`, score on `val`, keep the best by F1,
/// then accuracy, then grid order.
pub fn tune(
    train: (&Matrix, &[u8]),
    val: (&Matrix, &[u8]),
    grid: &[HyperParams],
    seed: u64,
) -> Result<TuneResult> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("empty hyperparameter grid".into()));
    }
    let models = train_grid(train, val, grid, seed)?;
    let mut trials = Vec::with_capacity(grid.len());
    let mut best: Option<(usize, Metrics)> = None;
    for (i, (p, model)) in grid.iter().zip(&models).enumerate() {
        let pred = model.predict(val.0)?;
        let m = metrics(&pred.labels, val.1)?;
        trials.push(Trial { params: *p, val: m });
        let better = best
            .as_ref()
            .is_none_or(|(_, b)| m.f1 > b.f1 || (m.f1 == b.f1 && m.acc > b.acc));
        if better {
            best = Some((i, m));
        }
    }
    let (i, val) = best.expect("non-empty grid");
    Ok(TuneResult {
        params: grid[i],
        model: models.into_iter().nth(i).expect("model per grid point"),
        val,
        trials,
    })
}
