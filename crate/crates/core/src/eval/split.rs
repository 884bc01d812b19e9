//! Repeated stratified 80/10/10 splits.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::TaskName;
use crate::error::{Error, Result};

pub const N_FOLDS: usize = 5;
/// Smallest class size for which every part gets at least one sample.
pub const MIN_PER_CLASS: usize = 10;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub seed: u64,
    pub train: Vec<String>,
    pub val: Vec<String>,
    pub test: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub seed: u64,
    pub folds: Vec<Fold>,
}

/// Split seed of `task` derived from a run seed, so that tasks draw
/// independent splits. With `shared` every task uses `base` itself.
pub fn task_seed(base: u64, task: TaskName, shared: bool) -> u64 {
    if shared {
        return base;
    }
    let index = TaskName::ALL.iter().position(|t| *t == task).unwrap_or(0) as u64;
    base ^ 0x9E37_79B9_7F4A_7C15u64.wrapping_mul(index + 1)
}

/// Five stratified random splits of `(id, label)` pairs; fold `k` is drawn
/// with seed `seed + k`. Each class is shuffled independently and cut into
/// `round(n/10)` test, `round(n/10)` validation and the rest training.
pub fn make_splits(items: &[(String, u8)], seed: u64) -> Result<SplitPlan> {
    let mut classes: [Vec<&str>; 2] = [Vec::new(), Vec::new()];
    for (id, label) in items {
        match label {
            0 | 1 => classes[*label as usize].push(id),
            _ => return Err(Error::InvalidArgument(format!("label {label} is not 0 or 1"))),
        }
    }
    for (label, ids) in classes.iter_mut().enumerate() {
        if ids.len() < MIN_PER_CLASS {
            return Err(Error::InvalidArgument(format!(
                "class {label} has {} samples; splitting needs at least {MIN_PER_CLASS}",
                ids.len()
            )));
        }
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidArgument("duplicate sample id in task".into()));
        }
    }
    let folds = (0..N_FOLDS as u64)
        .map(|k| {
            let fold_seed = seed.wrapping_add(k);
            let mut rng = ChaCha8Rng::seed_from_u64(fold_seed);
            let mut fold = Fold {
                seed: fold_seed,
                train: Vec::new(),
                val: Vec::new(),
                test: Vec::new(),
            };
            for ids in &classes {
                let mut ids = ids.clone();
                ids.shuffle(&mut rng);
                let n_test = (ids.len() as f64 / 10.0).round() as usize;
                let n_val = n_test;
                fold.test.extend(ids[..n_test].iter().map(|s| s.to_string()));
                fold.val.extend(ids[n_test..n_test + n_val].iter().map(|s| s.to_string()));
                fold.train.extend(ids[n_test + n_val..].iter().map(|s| s.to_string()));
            }
            fold.train.sort_unstable();
            fold.val.sort_unstable();
            fold.test.sort_unstable();
            fold
        })
        .collect();
    Ok(SplitPlan { seed, folds })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::{BTreeSet, HashMap};

    #[test]
    fn task_seeds_differ_unless_shared() {
        let seeds: BTreeSet<u64> = TaskName::ALL.iter().map(|&t| task_seed(7, t, false)).collect();
        assert_eq!(seeds.len(), 4);
        assert!(TaskName::ALL.iter().all(|&t| task_seed(7, t, true) == 7));
    }

    fn items(pos: usize, neg: usize) -> Vec<(String, u8)> {
        (0..pos)
            .map(|i| (format!("p{i:03}"), 1))
            .chain((0..neg).map(|i| (format!("n{i:03}"), 0)))
            .collect()
    }

    #[test]
    fn balanced_task_sizes() {
        let it = items(100, 100);
        let labels: HashMap<&str, u8> = it.iter().map(|(i, l)| (i.as_str(), *l)).collect();
        let plan = make_splits(&it, 7).unwrap();
        assert_eq!(plan.folds.len(), 5);
        for f in &plan.folds {
            assert_eq!((f.train.len(), f.val.len(), f.test.len()), (160, 20, 20));
            let pos = f.test.iter().filter(|i| labels[i.as_str()] == 1).count();
            assert_eq!(pos, 10);
            let all: BTreeSet<&String> = f.train.iter().chain(&f.val).chain(&f.test).collect();
            assert_eq!(all.len(), 200);
        }
        assert_ne!(plan.folds[0].test, plan.folds[1].test);
        assert_eq!(plan, make_splits(&it, 7).unwrap());
    }

    #[test]
    fn small_class_is_rejected() {
        assert!(make_splits(&items(9, 50), 1).is_err());
        assert!(make_splits(&items(10, 10), 1).is_ok());
    }

    #[test]
    fn input_order_does_not_matter() {
        let mut it = items(30, 40);
        let a = make_splits(&it, 3).unwrap();
        it.reverse();
        assert_eq!(a, make_splits(&it, 3).unwrap());
    }
}
