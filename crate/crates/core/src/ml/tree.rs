//! CART decision trees.
//!
//! Samples go left when `x[feature] <= threshold`. Candidate thresholds are
//! midpoints between consecutive distinct values. Among equal gains the
//! first feature (in candidate order) and then the lowest threshold win.

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "t", rename_all = "snake_case")]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    /// Positive-class fraction for classification trees, a score for
    /// boosting trees.
    Leaf { value: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    /// Root at index 0.
    pub nodes: Vec<Node>,
}

impl DecisionTree {
    pub fn leaf(value: f64) -> DecisionTree {
        DecisionTree {
            nodes: vec![Node::Leaf { value }],
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { value } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(t: &DecisionTree, i: usize) -> usize {
            match &t.nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(t, *left).max(go(t, *right)),
            }
        }
        go(self, 0)
    }

    pub fn leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count()
    }

    /// Scale every leaf value.
    pub fn scale(&mut self, factor: f64) {
        for n in &mut self.nodes {
            if let Node::Leaf { value } = n {
                *value *= factor;
            }
        }
    }
}

/// Midpoint of two consecutive distinct values, guarded against rounding
/// up to the larger one.
pub fn midpoint(lo: f64, hi: f64) -> f64 {
    let m = lo + (hi - lo) / 2.0;
    if m >= hi {
        lo
    } else {
        m
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    /// `None` grows until leaves are pure.
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    /// Features examined per split; `None` means all.
    pub max_features: Option<usize>,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_depth: None,
            min_samples_leaf: 1,
            max_features: None,
        }
    }
}

/// `n · gini` for counts `(n0, n1)`, i.e. `n - (n0² + n1²) / n`.
fn weighted_gini(n0: f64, n1: f64) -> f64 {
    let n = n0 + n1;
    if n == 0.0 {
        0.0
    } else {
        n - (n0 * n0 + n1 * n1) / n
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitChoice {
    pub feature: usize,
    pub threshold: f64,
    pub gain: f64,
}

/// Best Gini split of the samples `idx` (duplicates allowed) over `features`.
pub fn best_gini_split(
    x: &Matrix,
    y: &[u8],
    idx: &[usize],
    features: &[usize],
    min_leaf: usize,
) -> Option<SplitChoice> {
    let n = idx.len() as f64;
    let n1: f64 = idx.iter().map(|&i| f64::from(y[i])).sum();
    let parent = weighted_gini(n - n1, n1);
    let mut best: Option<SplitChoice> = None;
    let mut order: Vec<(f64, u8)> = Vec::with_capacity(idx.len());
    for &f in features {
        order.clear();
        order.extend(idx.iter().map(|&i| (x.get(i, f), y[i])));
        order.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (mut l0, mut l1) = (0.0, 0.0);
        for k in 0..order.len() - 1 {
            if order[k].1 == 1 {
                l1 += 1.0;
            } else {
                l0 += 1.0;
            }
            let (v, next) = (order[k].0, order[k + 1].0);
            if v == next {
                continue;
            }
            let left = k + 1;
            if left < min_leaf || order.len() - left < min_leaf {
                continue;
            }
            let gain = parent - weighted_gini(l0, l1) - weighted_gini(n - left as f64 - (n1 - l1), n1 - l1);
            if gain > 1e-12 && best.is_none_or(|b| gain > b.gain) {
                best = Some(SplitChoice {
                    feature: f,
                    threshold: midpoint(v, next),
                    gain,
                });
            }
        }
    }
    best
}

/// Grow a Gini tree on the samples `idx` (duplicates act as weights).
/// With `max_features` set, each split draws its candidate features from
/// `rng`.
pub fn grow_gini_tree<R: Rng>(
    x: &Matrix,
    y: &[u8],
    idx: Vec<usize>,
    params: &TreeParams,
    rng: &mut R,
) -> DecisionTree {
    let mut tree = DecisionTree { nodes: Vec::new() };
    let all: Vec<usize> = (0..x.cols()).collect();
    // (node slot, samples, depth)
    let mut stack = vec![(0usize, idx, 0usize)];
    tree.nodes.push(Node::Leaf { value: 0.0 });
    while let Some((slot, idx, depth)) = stack.pop() {
        let n1 = idx.iter().filter(|&&i| y[i] == 1).count();
        let value = if idx.is_empty() {
            0.0
        } else {
            n1 as f64 / idx.len() as f64
        };
        let pure = n1 == 0 || n1 == idx.len();
        let depth_left = params.max_depth.is_none_or(|d| depth < d);
        let split = if pure || !depth_left || idx.len() < 2 * params.min_samples_leaf.max(1) {
            None
        } else {
            let features = match params.max_features {
                Some(k) if k < x.cols() => {
                    let mut f = sample(rng, x.cols(), k).into_vec();
                    f.sort_unstable();
                    f
                }
                _ => all.clone(),
            };
            best_gini_split(x, y, &idx, &features, params.min_samples_leaf.max(1))
        };
        match split {
            None => tree.nodes[slot] = Node::Leaf { value },
            Some(s) => {
                let (l, r): (Vec<usize>, Vec<usize>) =
                    idx.iter().partition(|&&i| x.get(i, s.feature) <= s.threshold);
                let (li, ri) = (tree.nodes.len(), tree.nodes.len() + 1);
                tree.nodes.push(Node::Leaf { value: 0.0 });
                tree.nodes.push(Node::Leaf { value: 0.0 });
                tree.nodes[slot] = Node::Split {
                    feature: s.feature,
                    threshold: s.threshold,
                    left: li,
                    right: ri,
                };
                stack.push((ri, r, depth + 1));
                stack.push((li, l, depth + 1));
            }
        }
    }
    tree
}

/// A single classification tree on all samples and features.
pub fn train_tree(x: &Matrix, y: &[u8], params: &TreeParams) -> DecisionTree {
    let mut rng = rand::rngs::mock::StepRng::new(0, 1);
    let params = TreeParams {
        max_features: None,
        ..*params
    };
    grow_gini_tree(x, y, (0..x.rows()).collect(), &params, &mut rng)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[f64]]) -> Matrix {
        Matrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn separable_pair() {
        let t = train_tree(&m(&[&[0.0], &[1.0]]), &[0, 1], &TreeParams::default());
        assert_eq!(
            t.nodes[0],
            Node::Split {
                feature: 0,
                threshold: 0.5,
                left: 1,
                right: 2
            }
        );
        assert_eq!(t.value(&[0.0]), 0.0);
        assert_eq!(t.value(&[1.0]), 1.0);
    }

    #[test]
    fn pure_node_is_a_leaf() {
        let t = train_tree(&m(&[&[0.0], &[1.0], &[2.0]]), &[1, 1, 1], &TreeParams::default());
        assert_eq!(t, DecisionTree::leaf(1.0));
        assert_eq!(t.depth(), 0);
    }

    #[test]
    fn root_split_matches_exhaustive_search() {
        let x = m(&[
            &[2.0, 7.0],
            &[3.5, 1.0],
            &[1.0, 4.0],
            &[6.0, 2.5],
            &[4.5, 8.0],
            &[5.0, 3.0],
            &[0.5, 6.5],
            &[7.0, 5.5],
            &[3.0, 9.0],
            &[8.0, 0.5],
        ]);
        let y = [0, 1, 0, 1, 0, 1, 0, 1, 1, 0];
        // brute force: every feature, every threshold between sorted distinct values,
        // Gini impurity weighted by child size
        let gini = |ys: &[u8]| {
            if ys.is_empty() {
                return 0.0;
            }
            let p = ys.iter().filter(|&&v| v == 1).count() as f64 / ys.len() as f64;
            1.0 - p * p - (1.0 - p) * (1.0 - p)
        };
        let mut best = (f64::INFINITY, 0usize, 0.0f64);
        for f in 0..2 {
            let mut vals: Vec<f64> = (0..10).map(|i| x.get(i, f)).collect();
            vals.sort_by(f64::total_cmp);
            vals.dedup();
            for w in vals.windows(2) {
                let thr = (w[0] + w[1]) / 2.0;
                let l: Vec<u8> = (0..10).filter(|&i| x.get(i, f) <= thr).map(|i| y[i]).collect();
                let r: Vec<u8> = (0..10).filter(|&i| x.get(i, f) > thr).map(|i| y[i]).collect();
                let imp = (l.len() as f64 * gini(&l) + r.len() as f64 * gini(&r)) / 10.0;
                if imp < best.0 - 1e-12 {
                    best = (imp, f, thr);
                }
            }
        }
        let t = train_tree(&x, &y, &TreeParams::default());
        let Node::Split { feature, threshold, .. } = t.nodes[0] else {
            panic!("root is a leaf")
        };
        assert_eq!((feature, threshold), (best.1, best.2));
        // fully grown trees fit their training data
        for i in 0..10 {
            assert_eq!(t.value(x.row(i)), f64::from(y[i]));
        }
    }

    #[test]
    fn depth_limit() {
        let x = m(&[&[0.0], &[1.0], &[2.0], &[3.0]]);
        let t = train_tree(&x, &[0, 1, 0, 1], &TreeParams { max_depth: Some(1), ..Default::default() });
        assert!(t.depth() <= 1);
        assert!(t.leaves() <= 2);
    }

    #[test]
    fn midpoint_never_reaches_upper_value() {
        let lo: f64 = 1.0;
        let hi = f64::from_bits(lo.to_bits() + 1);
        assert_eq!(midpoint(lo, hi), lo);
        assert_eq!(midpoint(1.0, 2.0), 1.5);
    }
}
