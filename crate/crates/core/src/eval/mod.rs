//! Experiment harness: stratified splits, per-fold tuning and testing, the
//! selection × classifier ablation matrix, reports and histograms.

pub mod histogram;
pub mod report;
pub mod split;
pub mod synthetic;
pub mod text;

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use histogram::{histogram, HistRow};
pub use report::{format_table, write_report_csv, write_summary_csv};
pub use split::{make_splits, task_seed, Fold, SplitPlan};
pub use synthetic::{oracle_task, text_corpus, two_gaussians, SyntheticSet};
pub use text::{FittedText, TextProviders, TextTask};

use crate::error::{Error, Result};
use crate::features::Selection;
use crate::ml::{metrics, tune, HyperParams, Matrix, ModelKind};

/// Every document's feature values for one fold.
#[derive(Debug, Clone)]
pub struct FoldTable {
    /// One row per task sample, in `Featurizer::ids` order.
    pub x: Matrix,
    pub fitted: FittedText,
    pub provenance: BTreeMap<String, String>,
}

/// A labeled task whose features may depend on the fold's training part.
pub trait Featurizer: Sync {
    fn task(&self) -> &str;
    fn ids(&self) -> &[String];
    fn labels(&self) -> &[u8];
    fn fold_table(&self, fold: &Fold) -> Result<FoldTable>;
    /// Column indices of `selection` within a fold table.
    fn columns(&self, selection: &Selection) -> Result<Vec<usize>>;
    fn column_names(&self, selection: &Selection) -> Vec<String>;
    fn provenance(&self) -> BTreeMap<String, String>;

    fn labeled_ids(&self) -> Vec<(String, u8)> {
        self.ids().iter().cloned().zip(self.labels().iter().copied()).collect()
    }
}

impl Featurizer for SyntheticSet {
    fn task(&self) -> &str {
        "synthetic"
    }

    fn ids(&self) -> &[String] {
        &self.ids
    }

    fn labels(&self) -> &[u8] {
        &self.labels
    }

    fn fold_table(&self, _fold: &Fold) -> Result<FoldTable> {
        Ok(FoldTable {
            x: self.x.clone(),
            fitted: FittedText::default(),
            provenance: BTreeMap::new(),
        })
    }

    /// Every selection sees all columns.
    fn columns(&self, _selection: &Selection) -> Result<Vec<usize>> {
        Ok((0..self.x.cols()).collect())
    }

    fn column_names(&self, _selection: &Selection) -> Vec<String> {
        (0..self.x.cols()).map(|i| format!("x{i}")).collect()
    }

    fn provenance(&self) -> BTreeMap<String, String> {
        BTreeMap::new()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub seed: u64,
    pub acc: f64,
    pub f1: f64,
    pub val_acc: f64,
    pub val_f1: f64,
    pub params: HyperParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub task: String,
    pub selection: String,
    pub classifier: ModelKind,
    pub folds: Vec<FoldResult>,
    pub mean_acc: f64,
    pub mean_f1: f64,
    pub provenance: BTreeMap<String, String>,
}

/// Feature tables for every fold of `plan`.
pub fn fold_tables(feat: &dyn Featurizer, plan: &SplitPlan) -> Result<Vec<FoldTable>> {
    plan.folds.iter().map(|f| feat.fold_table(f)).collect()
}

fn rows_of(index: &HashMap<&str, usize>, ids: &[String]) -> Result<Vec<usize>> {
    ids.iter()
        .map(|id| {
            index
                .get(id.as_str())
                .copied()
                .ok_or_else(|| Error::InvalidArgument(format!("split id `{id}` is not in the task")))
        })
        .collect()
}

/// Per fold: tune `grid` on train/val, then score the chosen model once on
/// test.
pub fn run_cell(
    feat: &dyn Featurizer,
    plan: &SplitPlan,
    tables: &[FoldTable],
    selection: &Selection,
    kind: ModelKind,
    grid: &[HyperParams],
) -> Result<EvalReport> {
    if tables.len() != plan.folds.len() {
        return Err(Error::DimensionMismatch {
            expected: plan.folds.len(),
            actual: tables.len(),
        });
    }
    if let Some(p) = grid.iter().find(|p| p.kind() != kind) {
        return Err(Error::InvalidArgument(format!(
            "grid entry {p} is not a {kind} configuration"
        )));
    }
    let cols = feat.columns(selection)?;
    let labels = feat.labels();
    let index: HashMap<&str, usize> = feat
        .ids()
        .iter()
        .enumerate()
        .map(|(i, id)| (id.as_str(), i))
        .collect();
    let mut folds = Vec::with_capacity(plan.folds.len());
    let mut provenance = feat.provenance();
    for (k, (fold, table)) in plan.folds.iter().zip(tables).enumerate() {
        let x = table.x.select_cols(&cols);
        let part = |ids: &[String]| -> Result<(Matrix, Vec<u8>)> {
            let rows = rows_of(&index, ids)?;
            Ok((x.select_rows(&rows), rows.iter().map(|&r| labels[r]).collect()))
        };
        let (tx, ty) = part(&fold.train)?;
        let (vx, vy) = part(&fold.val)?;
        let (sx, sy) = part(&fold.test)?;
        let tuned = tune((&tx, &ty), (&vx, &vy), grid, fold.seed)?;
        let pred = tuned.model.predict(&sx)?;
        let m = metrics(&pred.labels, &sy)?;
        folds.push(FoldResult {
            fold: k,
            seed: fold.seed,
            acc: m.acc,
            f1: m.f1,
            val_acc: tuned.val.acc,
            val_f1: tuned.val.f1,
            params: tuned.params,
        });
        for (key, v) in &table.provenance {
            provenance.insert(format!("fold{k}:{key}"), v.clone());
        }
    }
    provenance.insert("seed".into(), plan.seed.to_string());
    let n = folds.len() as f64;
    Ok(EvalReport {
        task: feat.task().to_string(),
        selection: selection.name.clone(),
        classifier: kind,
        mean_acc: folds.iter().map(|f| f.acc).sum::<f64>() / n,
        mean_f1: folds.iter().map(|f| f.f1).sum::<f64>() / n,
        folds,
        provenance,
    })
}

/// Every (selection, classifier) cell over shared fold tables, in row-major
/// order of `selections` × `kinds`.
pub fn ablation_matrix(
    feat: &dyn Featurizer,
    plan: &SplitPlan,
    tables: &[FoldTable],
    selections: &[Selection],
    kinds: &[ModelKind],
    grid: &(dyn Fn(ModelKind) -> Vec<HyperParams> + Sync),
) -> Result<Vec<EvalReport>> {
    let cells: Vec<(&Selection, ModelKind)> = selections
        .iter()
        .flat_map(|s| kinds.iter().map(move |&k| (s, k)))
        .collect();
    cells
        .into_par_iter()
        .map(|(s, k)| run_cell(feat, plan, tables, s, k, &grid(k)))
        .collect()
}
