//! Random forest: bootstrapped Gini trees with per-split feature sampling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{grow_gini_tree, DecisionTree, TreeParams};
use super::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: Option<usize>,
    /// Defaults to `ceil(sqrt(d))`.
    pub max_features: Option<usize>,
    pub bootstrap: bool,
    pub min_samples_leaf: usize,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 100,
            max_depth: None,
            max_features: None,
            bootstrap: true,
            min_samples_leaf: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub trees: Vec<DecisionTree>,
    pub n_trees: usize,
    pub max_depth: Option<usize>,
    pub max_features: usize,
    pub seed: u64,
    pub n_features: usize,
}

pub fn sqrt_features(d: usize) -> usize {
    ((d as f64).sqrt().ceil() as usize).clamp(1, d.max(1))
}

/// Tree `t` draws from its own ChaCha stream, so a forest of `n` trees is
/// the prefix of any larger forest with the same seed.
pub fn train_forest(x: &Matrix, y: &[u8], params: &ForestParams, seed: u64) -> ForestModel {
    let d = x.cols();
    let k = params.max_features.unwrap_or_else(|| sqrt_features(d));
    let tree_params = TreeParams {
        max_depth: params.max_depth,
        min_samples_leaf: params.min_samples_leaf,
        max_features: Some(k),
    };
    let n = x.rows();
    let trees = (0..params.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(t as u64);
            let idx: Vec<usize> = if params.bootstrap {
                (0..n).map(|_| rng.gen_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            grow_gini_tree(x, y, idx, &tree_params, &mut rng)
        })
        .collect();
    ForestModel {
        trees,
        n_trees: params.n_trees,
        max_depth: params.max_depth,
        max_features: k,
        seed,
        n_features: d,
    }
}

impl ForestModel {
    /// Fraction of trees voting positive.
    pub fn proba_row(&self, x: &[f64]) -> f64 {
        let votes = self.trees.iter().filter(|t| t.value(x) > 0.5).count();
        votes as f64 / self.trees.len().max(1) as f64
    }

    /// The first `n` trees.
    pub fn truncated(&self, n: usize) -> ForestModel {
        ForestModel {
            trees: self.trees[..n.min(self.trees.len())].to_vec(),
            n_trees: n.min(self.trees.len()),
            ..self.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ml::tree::train_tree;

    fn data() -> (Matrix, Vec<u8>) {
        let rows: Vec<Vec<f64>> = (0..30)
            .map(|i| vec![(i % 7) as f64, (i * 3 % 11) as f64, i as f64 / 3.0])
            .collect();
        let y = (0..30).map(|i| u8::from((i % 7) + (i * 3 % 11) > 8)).collect();
        (Matrix::from_rows(&rows).unwrap(), y)
    }

    #[test]
    fn degenerate_forest_is_a_tree() {
        let (x, y) = data();
        let f = train_forest(
            &x,
            &y,
            &ForestParams {
                n_trees: 1,
                bootstrap: false,
                max_features: Some(3),
                ..Default::default()
            },
            5,
        );
        let t = train_tree(&x, &y, &TreeParams::default());
        assert_eq!(f.trees[0], t);
    }

    #[test]
    fn deterministic_and_prefix_stable() {
        let (x, y) = data();
        let p = ForestParams {
            n_trees: 12,
            ..Default::default()
        };
        let a = train_forest(&x, &y, &p, 9);
        let b = train_forest(&x, &y, &p, 9);
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        let small = train_forest(&x, &y, &ForestParams { n_trees: 5, ..p }, 9);
        assert_eq!(small, a.truncated(5));
        let other = train_forest(&x, &y, &p, 10);
        assert_ne!(other.trees, a.trees);
    }

    #[test]
    fn unanimous_votes_give_hard_probabilities() {
        let x = Matrix::from_rows(&[vec![0.0], vec![1.0], vec![0.1], vec![0.9]]).unwrap();
        let f = train_forest(
            &x,
            &[0, 1, 0, 1],
            &ForestParams {
                n_trees: 3,
                bootstrap: false,
                ..Default::default()
            },
            1,
        );
        assert_eq!(f.proba_row(&[0.0]), 0.0);
        assert_eq!(f.proba_row(&[1.0]), 1.0);
    }

    #[test]
    fn sqrt_rounding() {
        assert_eq!(sqrt_features(791), 29);
        assert_eq!(sqrt_features(2), 2);
        assert_eq!(sqrt_features(16), 4);
        assert_eq!(sqrt_features(1), 1);
    }
}
