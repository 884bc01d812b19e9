//! One-hidden-layer perceptron `[d, h, 1]`: ReLU hidden units, logistic
//! output, binary cross-entropy, Adam, early stopping on validation loss.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::boost::sigmoid;
use super::Matrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    pub hidden: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
}

impl Default for MlpParams {
    fn default() -> Self {
        MlpParams {
            hidden: 32,
            learning_rate: 1e-3,
            batch_size: 16,
            max_epochs: 200,
            patience: 10,
        }
    }
}

/// Per-feature z-scoring; zero-variance features are left as they are.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Scaler {
    pub fn fit(x: &Matrix) -> Scaler {
        let n = x.rows().max(1) as f64;
        let mut mean = vec![0.0; x.cols()];
        let mut scale = vec![1.0; x.cols()];
        for c in 0..x.cols() {
            let m = (0..x.rows()).map(|r| x.get(r, c)).sum::<f64>() / n;
            let var = (0..x.rows()).map(|r| (x.get(r, c) - m).powi(2)).sum::<f64>() / n;
            if var > 0.0 {
                mean[c] = m;
                scale[c] = var.sqrt();
            }
        }
        Scaler { mean, scale }
    }

    pub fn transform(&self, x: &Matrix) -> Matrix {
        let mut out = x.clone();
        for c in 0..x.cols() {
            let (m, s) = (self.mean[c], self.scale[c]);
            out.map_col(c, |v| (v - m) / s);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    /// `hidden × d`, row-major.
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: f64,
    pub d: usize,
    pub h: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub layers: [usize; 3],
    pub net: Network,
    pub scaler: Scaler,
    pub epochs_run: usize,
    pub best_epoch: usize,
}

impl Network {
    pub fn init(d: usize, h: usize, rng: &mut impl Rng) -> Network {
        let a1 = (6.0 / d.max(1) as f64).sqrt();
        let a2 = (6.0 / (h + 1) as f64).sqrt();
        Network {
            w1: (0..h * d).map(|_| rng.gen_range(-a1..a1)).collect(),
            b1: vec![0.0; h],
            w2: (0..h).map(|_| rng.gen_range(-a2..a2)).collect(),
            b2: 0.0,
            d,
            h,
        }
    }

    pub fn n_params(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + 1
    }

    /// Flat parameter view: w1, b1, w2, b2.
    pub fn params(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.n_params());
        p.extend(&self.w1);
        p.extend(&self.b1);
        p.extend(&self.w2);
        p.push(self.b2);
        p
    }

    pub fn set_params(&mut self, p: &[f64]) {
        let (a, rest) = p.split_at(self.w1.len());
        let (b, rest) = rest.split_at(self.b1.len());
        let (c, rest) = rest.split_at(self.w2.len());
        self.w1.copy_from_slice(a);
        self.b1.copy_from_slice(b);
        self.w2.copy_from_slice(c);
        self.b2 = rest[0];
    }

    /// Output logit for one (scaled) input row; fills `hidden` activations.
    fn forward_into(&self, x: &[f64], hidden: &mut [f64]) -> f64 {
        let mut z = self.b2;
        for j in 0..self.h {
            let w = &self.w1[j * self.d..(j + 1) * self.d];
            let a = (self.b1[j] + w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()).max(0.0);
            hidden[j] = a;
            z += self.w2[j] * a;
        }
        z
    }

    pub fn logit(&self, x: &[f64]) -> f64 {
        let mut hidden = vec![0.0; self.h];
        self.forward_into(x, &mut hidden)
    }

    /// Mean cross-entropy over `rows` and its gradient in flat layout.
    pub fn loss_and_grad(&self, x: &Matrix, y: &[u8], rows: &[usize]) -> (f64, Vec<f64>) {
        let (d, h) = (self.d, self.h);
        let mut grad = vec![0.0; self.n_params()];
        let (gw1, rest) = grad.split_at_mut(h * d);
        let (gb1, rest) = rest.split_at_mut(h);
        let (gw2, gb2) = rest.split_at_mut(h);
        let mut hidden = vec![0.0; h];
        let mut loss = 0.0;
        let inv = 1.0 / rows.len().max(1) as f64;
        for &r in rows {
            let xr = x.row(r);
            let z = self.forward_into(xr, &mut hidden);
            let t = f64::from(y[r]);
            loss += z.max(0.0) - z * t + (-z.abs()).exp().ln_1p();
            let dz = (sigmoid(z) - t) * inv;
            gb2[0] += dz;
            for j in 0..h {
                gw2[j] += dz * hidden[j];
                if hidden[j] > 0.0 {
                    let dh = dz * self.w2[j];
                    gb1[j] += dh;
                    let row = &mut gw1[j * d..(j + 1) * d];
                    for (g, &v) in row.iter_mut().zip(xr) {
                        *g += dh * v;
                    }
                }
            }
        }
        (loss * inv, grad)
    }

    pub fn mean_loss(&self, x: &Matrix, y: &[u8]) -> f64 {
        let rows: Vec<usize> = (0..x.rows()).collect();
        let mut hidden = vec![0.0; self.h];
        rows.iter()
            .map(|&r| {
                let z = self.forward_into(x.row(r), &mut hidden);
                z.max(0.0) - z * f64::from(y[r]) + (-z.abs()).exp().ln_1p()
            })
            .sum::<f64>()
            / rows.len().max(1) as f64
    }
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
    lr: f64,
}

impl Adam {
    const B1: f64 = 0.9;
    const B2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(n: usize, lr: f64) -> Adam {
        Adam {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
            lr,
        }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - Self::B1.powi(self.t);
        let c2 = 1.0 - Self::B2.powi(self.t);
        for i in 0..params.len() {
            self.m[i] = Self::B1 * self.m[i] + (1.0 - Self::B1) * grad[i];
            self.v[i] = Self::B2 * self.v[i] + (1.0 - Self::B2) * grad[i] * grad[i];
            let mh = self.m[i] / c1;
            let vh = self.v[i] / c2;
            params[i] -= self.lr * mh / (vh.sqrt() + Self::EPS);
        }
    }
}

/// Train with early stopping on `val` (or on the training loss when no
/// validation set is given); the best epoch's weights are kept.
pub fn train_mlp(
    x: &Matrix,
    y: &[u8],
    val: Option<(&Matrix, &[u8])>,
    params: &MlpParams,
    seed: u64,
) -> Result<MlpModel> {
    if x.rows() == 0 {
        return Err(Error::EmptyInput("MLP training set"));
    }
    x.check_finite()?;
    let scaler = Scaler::fit(x);
    let xs = scaler.transform(x);
    let val_scaled = val.map(|(vx, vy)| (scaler.transform(vx), vy));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut net = Network::init(x.cols(), params.hidden, &mut rng);
    let mut flat = net.params();
    let mut adam = Adam::new(flat.len(), params.learning_rate);
    let mut order: Vec<usize> = (0..x.rows()).collect();
    let monitor = |net: &Network| match &val_scaled {
        Some((vx, vy)) => net.mean_loss(vx, vy),
        None => net.mean_loss(&xs, y),
    };
    let mut best_loss = monitor(&net);
    let mut best = flat.clone();
    let mut best_epoch = 0;
    let mut since = 0;
    let mut epochs_run = 0;
    for epoch in 1..=params.max_epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(params.batch_size.max(1)) {
            let (loss, grad) = net.loss_and_grad(&xs, y, batch);
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss { epoch });
            }
            adam.step(&mut flat, &grad);
            net.set_params(&flat);
        }
        epochs_run = epoch;
        let l = monitor(&net);
        if !l.is_finite() {
            return Err(Error::NonFiniteLoss { epoch });
        }
        if l < best_loss {
            best_loss = l;
            best.clone_from(&flat);
            best_epoch = epoch;
            since = 0;
        } else {
            since += 1;
            if since >= params.patience {
                break;
            }
        }
    }
    net.set_params(&best);
    Ok(MlpModel {
        layers: [x.cols(), params.hidden, 1],
        net,
        scaler,
        epochs_run,
        best_epoch,
    })
}

impl MlpModel {
    pub fn proba_row(&self, x: &[f64]) -> f64 {
        let scaled: Vec<f64> = x
            .iter()
            .zip(self.scaler.mean.iter().zip(&self.scaler.scale))
            .map(|(v, (m, s))| (v - m) / s)
            .collect();
        sigmoid(self.net.logit(&scaled))
    }
}
