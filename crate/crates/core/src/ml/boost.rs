//! Second-order gradient boosting with logistic loss.
//!
//! Trees are grown level by level over presorted feature columns. A round
//! whose tree would raise the training log-loss has its leaf weights halved
//! (up to ten times) and is otherwise replaced by a zero tree, so the
//! per-round training loss never increases.

use serde::{Deserialize, Serialize};

use super::tree::{midpoint, DecisionTree, Node};
use super::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoostParams {
    pub rounds: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub lambda: f64,
    pub gamma: f64,
    pub min_child_weight: f64,
}

impl Default for BoostParams {
    fn default() -> Self {
        BoostParams {
            rounds: 100,
            learning_rate: 0.3,
            max_depth: 6,
            lambda: 1.0,
            gamma: 0.0,
            min_child_weight: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostedModel {
    pub trees: Vec<DecisionTree>,
    pub learning_rate: f64,
    pub lambda: f64,
    pub gamma: f64,
    pub max_depth: usize,
    pub base_score: f64,
    pub n_features: usize,
    /// Training log-loss after each round.
    pub train_loss: Vec<f64>,
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Mean logistic loss of raw scores.
pub fn log_loss(raw: &[f64], y: &[u8]) -> f64 {
    let s: f64 = raw
        .iter()
        .zip(y)
        .map(|(&z, &t)| z.max(0.0) - z * f64::from(t) + (-z.abs()).exp().ln_1p())
        .sum();
    s / raw.len().max(1) as f64
}

pub fn leaf_weight(g: f64, h: f64, lambda: f64) -> f64 {
    -g / (h + lambda)
}

pub fn split_gain(gl: f64, hl: f64, gr: f64, hr: f64, lambda: f64, gamma: f64) -> f64 {
    let score = |g: f64, h: f64| g * g / (h + lambda);
    0.5 * (score(gl, hl) + score(gr, hr) - score(gl + gr, hl + hr)) - gamma
}

/// Sample indices of every column, sorted by value.
pub fn presort(x: &Matrix) -> Vec<Vec<u32>> {
    (0..x.cols())
        .map(|f| {
            let mut idx: Vec<u32> = (0..x.rows() as u32).collect();
            idx.sort_by(|&a, &b| x.get(a as usize, f).total_cmp(&x.get(b as usize, f)));
            idx
        })
        .collect()
}

#[derive(Clone, Copy)]
struct Best {
    gain: f64,
    feature: usize,
    threshold: f64,
}

/// One boosting tree fitted to gradients `g` and hessians `h`.
pub fn grow_boost_tree(
    x: &Matrix,
    sorted: &[Vec<u32>],
    g: &[f64],
    h: &[f64],
    params: &BoostParams,
) -> DecisionTree {
    const DONE: usize = usize::MAX;
    let n = x.rows();
    let mut nodes = vec![Node::Leaf { value: 0.0 }];
    // tree node of each sample while it is still in the frontier
    let mut node_of = vec![0usize; n];
    let mut frontier: Vec<usize> = vec![0];
    let mut sums: Vec<(f64, f64)> = vec![(g.iter().sum(), h.iter().sum())];
    let mut slot_of = vec![0usize; 1];
    for _depth in 0..params.max_depth {
        if frontier.is_empty() {
            break;
        }
        let m = frontier.len();
        let mut best: Vec<Option<Best>> = vec![None; m];
        let mut acc = vec![(0.0f64, 0.0f64); m];
        let mut last: Vec<f64> = vec![f64::NAN; m];
        for (f, order) in sorted.iter().enumerate() {
            acc.iter_mut().for_each(|a| *a = (0.0, 0.0));
            last.iter_mut().for_each(|v| *v = f64::NAN);
            for &i in order {
                let i = i as usize;
                let node = node_of[i];
                if node == DONE {
                    continue;
                }
                let s = slot_of[node];
                let v = x.get(i, f);
                let prev = last[s];
                if !prev.is_nan() && v > prev {
                    let (gl, hl) = acc[s];
                    let (gt, ht) = sums[s];
                    let (gr, hr) = (gt - gl, ht - hl);
                    if hl >= params.min_child_weight && hr >= params.min_child_weight {
                        let gain = split_gain(gl, hl, gr, hr, params.lambda, params.gamma);
                        if gain > 1e-12 && best[s].is_none_or(|b| gain > b.gain) {
                            best[s] = Some(Best {
                                gain,
                                feature: f,
                                threshold: midpoint(prev, v),
                            });
                        }
                    }
                }
                acc[s].0 += g[i];
                acc[s].1 += h[i];
                last[s] = v;
            }
        }
        let mut next_frontier = Vec::new();
        let mut next_sums = Vec::new();
        let mut child_of: Vec<Option<(usize, usize, Best)>> = vec![None; m];
        for s in 0..m {
            let node = frontier[s];
            match best[s] {
                None => {
                    let (gt, ht) = sums[s];
                    nodes[node] = Node::Leaf {
                        value: leaf_weight(gt, ht, params.lambda),
                    };
                }
                Some(b) => {
                    let (l, r) = (nodes.len(), nodes.len() + 1);
                    nodes.push(Node::Leaf { value: 0.0 });
                    nodes.push(Node::Leaf { value: 0.0 });
                    nodes[node] = Node::Split {
                        feature: b.feature,
                        threshold: b.threshold,
                        left: l,
                        right: r,
                    };
                    child_of[s] = Some((l, r, b));
                    next_frontier.push(l);
                    next_frontier.push(r);
                    next_sums.push((0.0, 0.0));
                    next_sums.push((0.0, 0.0));
                }
            }
        }
        slot_of.resize(nodes.len(), 0);
        for (k, &node) in next_frontier.iter().enumerate() {
            slot_of[node] = k;
        }
        for i in 0..n {
            let node = node_of[i];
            if node == DONE {
                continue;
            }
            node_of[i] = match child_of[slot_of_frontier(&frontier, node)] {
                None => DONE,
                Some((l, r, b)) => {
                    let c = if x.get(i, b.feature) <= b.threshold { l } else { r };
                    let k = slot_of[c];
                    next_sums[k].0 += g[i];
                    next_sums[k].1 += h[i];
                    c
                }
            };
        }
        frontier = next_frontier;
        sums = next_sums;
    }
    for (s, &node) in frontier.iter().enumerate() {
        let (gt, ht) = sums[s];
        nodes[node] = Node::Leaf {
            value: leaf_weight(gt, ht, params.lambda),
        };
    }
    DecisionTree { nodes }
}

fn slot_of_frontier(frontier: &[usize], node: usize) -> usize {
    // frontier is in increasing node order
    frontier.binary_search(&node).expect("node in frontier")
}

pub fn train_boosted(x: &Matrix, y: &[u8], params: &BoostParams) -> BoostedModel {
    let n = x.rows();
    let prior = (y.iter().map(|&v| f64::from(v)).sum::<f64>() / n.max(1) as f64).clamp(1e-6, 1.0 - 1e-6);
    let base = (prior / (1.0 - prior)).ln();
    let sorted = presort(x);
    let mut raw = vec![base; n];
    let mut loss = log_loss(&raw, y);
    let mut trees = Vec::with_capacity(params.rounds);
    let mut train_loss = Vec::with_capacity(params.rounds);
    let mut g = vec![0.0; n];
    let mut h = vec![0.0; n];
    for _ in 0..params.rounds {
        for i in 0..n {
            let p = sigmoid(raw[i]);
            g[i] = p - f64::from(y[i]);
            h[i] = p * (1.0 - p);
        }
        let mut tree = grow_boost_tree(x, &sorted, &g, &h, params);
        let step: Vec<f64> = (0..n).map(|i| tree.value(x.row(i))).collect();
        let mut factor = 1.0;
        let mut accepted = None;
        for _ in 0..=10 {
            let cand: Vec<f64> = raw
                .iter()
                .zip(&step)
                .map(|(r, s)| r + params.learning_rate * factor * s)
                .collect();
            let l = log_loss(&cand, y);
            if l <= loss {
                accepted = Some((cand, l));
                break;
            }
            factor *= 0.5;
        }
        match accepted {
            Some((cand, l)) => {
                if factor != 1.0 {
                    tree.scale(factor);
                }
                raw = cand;
                loss = l;
            }
            None => tree = DecisionTree::leaf(0.0),
        }
        trees.push(tree);
        train_loss.push(loss);
    }
    BoostedModel {
        trees,
        learning_rate: params.learning_rate,
        lambda: params.lambda,
        gamma: params.gamma,
        max_depth: params.max_depth,
        base_score: base,
        n_features: x.cols(),
        train_loss,
    }
}

impl BoostedModel {
    pub fn raw_row(&self, x: &[f64]) -> f64 {
        self.base_score + self.learning_rate * self.trees.iter().map(|t| t.value(x)).sum::<f64>()
    }

    pub fn proba_row(&self, x: &[f64]) -> f64 {
        sigmoid(self.raw_row(x))
    }

    /// The first `rounds` trees.
    pub fn truncated(&self, rounds: usize) -> BoostedModel {
        let r = rounds.min(self.trees.len());
        BoostedModel {
            trees: self.trees[..r].to_vec(),
            train_loss: self.train_loss[..r].to_vec(),
            ..self.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> (Matrix, Vec<u8>) {
        let rows: Vec<Vec<f64>> = (0..40)
            .map(|i| vec![(i as f64 * 0.37).sin(), (i % 5) as f64, (i * 7 % 13) as f64])
            .collect();
        let y = rows
            .iter()
            .map(|r| u8::from(r[0] + 0.2 * r[1] - 0.05 * r[2] > 0.1))
            .collect();
        (Matrix::from_rows(&rows).unwrap(), y)
    }

    #[test]
    fn leaf_weight_by_hand() {
        assert_eq!(leaf_weight(2.0, 3.0, 1.0), -0.5);
        // G_L=1, H_L=1, G_R=-1, H_R=1, λ=1: ½(½ + ½ - 0) = 0.5
        assert_eq!(split_gain(1.0, 1.0, -1.0, 1.0, 1.0, 0.0), 0.5);
    }

    #[test]
    fn zero_learning_rate_predicts_prior() {
        let (x, y) = toy();
        let m = train_boosted(&x, &y, &BoostParams { learning_rate: 0.0, rounds: 5, ..Default::default() });
        let prior = y.iter().filter(|&&v| v == 1).count() as f64 / y.len() as f64;
        for i in 0..x.rows() {
            assert!((m.proba_row(x.row(i)) - prior).abs() < 1e-12);
        }
        assert_eq!(sigmoid(0.0), 0.5);
    }

    #[test]
    fn training_loss_never_increases() {
        let (x, y) = toy();
        for eta in [0.1, 0.3] {
            for depth in [1, 3, 6] {
                let m = train_boosted(
                    &x,
                    &y,
                    &BoostParams { learning_rate: eta, max_depth: depth, rounds: 30, ..Default::default() },
                );
                let mut prev = log_loss(&vec![m.base_score; y.len()], &y);
                for &l in &m.train_loss {
                    assert!(l <= prev, "eta {eta} depth {depth}: {l} > {prev}");
                    prev = l;
                }
                let raw: Vec<f64> = (0..x.rows()).map(|i| m.raw_row(x.row(i))).collect();
                assert!((log_loss(&raw, &y) - m.train_loss.last().unwrap()).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn stump_matches_brute_force() {
        let (x, y) = toy();
        let p = BoostParams { max_depth: 1, rounds: 1, learning_rate: 1.0, ..Default::default() };
        let prior = y.iter().filter(|&&v| v == 1).count() as f64 / y.len() as f64;
        let g: Vec<f64> = y.iter().map(|&t| prior - f64::from(t)).collect();
        let h = vec![prior * (1.0 - prior); y.len()];
        let tree = grow_boost_tree(&x, &presort(&x), &g, &h, &p);
        let mut best = (1e-12, usize::MAX, 0.0);
        for f in 0..x.cols() {
            let mut vals: Vec<f64> = (0..x.rows()).map(|i| x.get(i, f)).collect();
            vals.sort_by(f64::total_cmp);
            vals.dedup();
            for w in vals.windows(2) {
                let thr = midpoint(w[0], w[1]);
                let (mut gl, mut hl, mut gr, mut hr) = (0.0, 0.0, 0.0, 0.0);
                for i in 0..x.rows() {
                    if x.get(i, f) <= thr {
                        gl += g[i];
                        hl += h[i];
                    } else {
                        gr += g[i];
                        hr += h[i];
                    }
                }
                if hl < 1.0 || hr < 1.0 {
                    continue;
                }
                let gain = split_gain(gl, hl, gr, hr, 1.0, 0.0);
                if gain > best.0 + 1e-12 {
                    best = (gain, f, thr);
                }
            }
        }
        match tree.nodes[0] {
            Node::Split { feature, threshold, .. } => assert_eq!((feature, threshold), (best.1, best.2)),
            Node::Leaf { .. } => assert_eq!(best.1, usize::MAX),
        }
    }

    #[test]
    fn prefix_equals_shorter_training() {
        let (x, y) = toy();
        let p = BoostParams { rounds: 20, ..Default::default() };
        let long = train_boosted(&x, &y, &p);
        let short = train_boosted(&x, &y, &BoostParams { rounds: 8, ..p });
        assert_eq!(long.truncated(8), short);
    }
}
