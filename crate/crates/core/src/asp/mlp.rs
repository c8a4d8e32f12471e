//! A small fully connected network with ReLU hidden layers and a sigmoid
//! output, trained with binary cross-entropy and Adam.
//!
//! The input is a dense vector followed by a one-hot block. The first layer
//! always evaluates `dot(w_dense, x) + w_hot[k] + b` in that order, so
//! scoring several one-hot values against the same dense part gives exactly
//! the numbers a single evaluation would.

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::{par, rng, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub inputs: usize,
    pub outputs: usize,
    /// Row-major, `outputs x inputs`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Layer {
    fn xavier(inputs: usize, outputs: usize, r: &mut rng::Rng) -> Self {
        let limit = (6.0 / (inputs + outputs) as f64).sqrt();
        let weights = (0..inputs * outputs).map(|_| r.gen_range(-limit..limit)).collect();
        Self { inputs, outputs, weights, bias: vec![0.0; outputs] }
    }

    fn row(&self, j: usize) -> &[f64] {
        &self.weights[j * self.inputs..(j + 1) * self.inputs]
    }
}

/// Eight-lane dot product; lanes are summed in a fixed order.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 8];
    let (ca, cb) = (a.chunks_exact(8), b.chunks_exact(8));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for k in 0..8 {
            acc[k] += x[k] * y[k];
        }
    }
    let mut s = ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]));
    for (x, y) in ra.iter().zip(rb) {
        s += x * y;
    }
    s
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Binary cross-entropy of `sigmoid(z)` against `y`, computed from the logit.
pub fn bce_logit(z: f64, y: f64) -> f64 {
    z.max(0.0) - z * y + (-z.abs()).exp().ln_1p()
}

/// One training example.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub dense: Vec<f64>,
    pub hot: usize,
    pub label: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub dense_inputs: usize,
    pub hot_inputs: usize,
    pub layers: Vec<Layer>,
}

struct Trace {
    /// Post-activation outputs of each hidden layer.
    hidden: Vec<Vec<f64>>,
    logit: f64,
}

impl Mlp {
    pub fn new(dense_inputs: usize, hot_inputs: usize, hidden: &[usize], seed: u64) -> Self {
        let mut r = rng::rng(seed);
        let mut sizes = vec![dense_inputs + hot_inputs];
        sizes.extend_from_slice(hidden);
        sizes.push(1);
        let layers = sizes.windows(2).map(|w| Layer::xavier(w[0], w[1], &mut r)).collect();
        Self { dense_inputs, hot_inputs, layers }
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut s = vec![self.layers[0].inputs];
        s.extend(self.layers.iter().map(|l| l.outputs));
        s
    }

    /// First-layer dense contribution, shared by every one-hot value.
    pub fn first_dense(&self, dense: &[f64]) -> Vec<f64> {
        let l = &self.layers[0];
        (0..l.outputs).map(|j| dot(&l.row(j)[..self.dense_inputs], dense)).collect()
    }

    fn trace_from(&self, first: &[f64], hot: usize) -> Trace {
        let l0 = &self.layers[0];
        let mut a: Vec<f64> = (0..l0.outputs)
            .map(|j| (first[j] + l0.weights[j * l0.inputs + self.dense_inputs + hot] + l0.bias[j]).max(0.0))
            .collect();
        let mut hidden = Vec::with_capacity(self.layers.len() - 1);
        let last = self.layers.len() - 1;
        for (i, l) in self.layers.iter().enumerate().skip(1) {
            let z: Vec<f64> = (0..l.outputs).map(|j| dot(l.row(j), &a) + l.bias[j]).collect();
            hidden.push(std::mem::replace(&mut a, z));
            if i < last {
                for x in a.iter_mut() {
                    *x = x.max(0.0);
                }
            }
        }
        Trace { hidden, logit: a[0] }
    }

    /// Logit from a precomputed first-layer dense part.
    pub fn logit_from(&self, first: &[f64], hot: usize) -> f64 {
        self.trace_from(first, hot).logit
    }

    pub fn logit(&self, dense: &[f64], hot: usize) -> f64 {
        self.logit_from(&self.first_dense(dense), hot)
    }

    pub fn predict(&self, dense: &[f64], hot: usize) -> f64 {
        sigmoid(self.logit(dense, hot))
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// Parameter `i` in flat order: each layer's weights, then its bias.
    pub fn param(&self, mut i: usize) -> f64 {
        for l in &self.layers {
            if i < l.weights.len() {
                return l.weights[i];
            }
            i -= l.weights.len();
            if i < l.bias.len() {
                return l.bias[i];
            }
            i -= l.bias.len();
        }
        panic!("parameter index out of range")
    }

    pub fn set_param(&mut self, mut i: usize, value: f64) {
        for l in &mut self.layers {
            if i < l.weights.len() {
                l.weights[i] = value;
                return;
            }
            i -= l.weights.len();
            if i < l.bias.len() {
                l.bias[i] = value;
                return;
            }
            i -= l.bias.len();
        }
        panic!("parameter index out of range")
    }

    /// Mean BCE over `batch`.
    pub fn loss(&self, batch: &[&Example]) -> f64 {
        batch.iter().map(|e| bce_logit(self.logit(&e.dense, e.hot), e.label)).sum::<f64>() / batch.len() as f64
    }

    /// Mean BCE over `batch` and its gradient, in flat parameter order.
    pub fn loss_and_gradient(&self, batch: &[&Example]) -> (f64, Vec<f64>) {
        let n = batch.len() as f64;
        let traces: Vec<Trace> = par::map(batch, |e| self.trace_from(&self.first_dense(&e.dense), e.hot));
        let loss = batch.iter().zip(&traces).map(|(e, t)| bce_logit(t.logit, e.label)).sum::<f64>() / n;

        let nl = self.layers.len();
        // deltas[s][k]: gradient at the pre-activation of layer k for sample s
        let mut deltas: Vec<Vec<Vec<f64>>> = Vec::with_capacity(batch.len());
        for (e, t) in batch.iter().zip(&traces) {
            let mut ds = vec![Vec::new(); nl];
            ds[nl - 1] = vec![(sigmoid(t.logit) - e.label) / n];
            for k in (0..nl - 1).rev() {
                let next = &self.layers[k + 1];
                let act = &t.hidden[k];
                let d: Vec<f64> = (0..next.inputs)
                    .map(|i| {
                        if act[i] <= 0.0 {
                            return 0.0;
                        }
                        let mut s = 0.0;
                        for (j, dj) in ds[k + 1].iter().enumerate() {
                            s += next.weights[j * next.inputs + i] * dj;
                        }
                        s
                    })
                    .collect();
                ds[k] = d;
            }
            deltas.push(ds);
        }

        let mut grad = Vec::with_capacity(self.param_count());
        for (k, l) in self.layers.iter().enumerate() {
            let mut gw = vec![0.0; l.weights.len()];
            let dense = self.dense_inputs;
            par::for_each_chunk_mut(&mut gw, l.inputs, |j, row| {
                for (s, (e, t)) in batch.iter().zip(&traces).enumerate() {
                    let d = deltas[s][k][j];
                    if d == 0.0 {
                        continue;
                    }
                    if k == 0 {
                        axpy(d, &e.dense, &mut row[..dense]);
                        row[dense + e.hot] += d;
                    } else {
                        axpy(d, &t.hidden[k - 1], row);
                    }
                }
            });
            let mut gb = vec![0.0; l.outputs];
            for ds in &deltas {
                for (g, d) in gb.iter_mut().zip(&ds[k]) {
                    *g += d;
                }
            }
            grad.extend(gw);
            grad.extend(gb);
        }
        (loss, grad)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub hidden: Vec<usize>,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without a new best validation loss before stopping.
    pub patience: usize,
    /// Share of the data held back for early stopping; none is held back
    /// from sets smaller than 20.
    pub validation_fraction: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            hidden: vec![256, 64],
            learning_rate: 1e-3,
            batch_size: 32,
            max_epochs: 300,
            patience: 20,
            validation_fraction: 0.1,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return Err(Error::Config(format!("hidden widths must be non-empty and > 0: {:?}", self.hidden)));
        }
        if !(self.learning_rate > 0.0) || self.batch_size == 0 || self.max_epochs == 0 {
            return Err(Error::Config("learning_rate, batch_size and max_epochs must be > 0".into()));
        }
        if !(0.0..0.5).contains(&self.validation_fraction) {
            return Err(Error::Config(format!(
                "validation_fraction must lie in [0, 0.5), got {}",
                self.validation_fraction
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub val_loss: Option<f64>,
}

/// Adam state for a flat parameter vector.
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

    fn new(n: usize, lr: f64) -> Self {
        Self { m: vec![0.0; n], v: vec![0.0; n], t: 0, lr }
    }

    fn step(&mut self, net: &mut Mlp, grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - Self::B1.powi(self.t);
        let c2 = 1.0 - Self::B2.powi(self.t);
        let mut i = 0;
        for l in &mut net.layers {
            for p in l.weights.iter_mut().chain(l.bias.iter_mut()) {
                let g = grad[i];
                self.m[i] = Self::B1 * self.m[i] + (1.0 - Self::B1) * g;
                self.v[i] = Self::B2 * self.v[i] + (1.0 - Self::B2) * g * g;
                *p -= self.lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + Self::EPS);
                i += 1;
            }
        }
    }
}

fn accuracy(net: &Mlp, data: &[&Example]) -> f64 {
    let ok = data.iter().filter(|e| (net.logit(&e.dense, e.hot) >= 0.0) == (e.label >= 0.5)).count();
    ok as f64 / data.len().max(1) as f64
}

/// Trains `net` in place at learning rate `lr`; returns per-epoch stats.
/// With a validation split the best-validation parameters are kept.
pub fn fit(net: &mut Mlp, data: &[Example], cfg: &TrainConfig, lr: f64) -> Result<Vec<EpochStats>> {
    if data.is_empty() {
        return Err(Error::EmptyInput("no training examples".into()));
    }
    let mut r = rng::rng(cfg.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.shuffle(&mut r);
    let n_val = if data.len() >= 20 {
        (cfg.validation_fraction * data.len() as f64).round() as usize
    } else {
        0
    };
    let val: Vec<&Example> = order[..n_val].iter().map(|&i| &data[i]).collect();
    let mut train: Vec<&Example> = order[n_val..].iter().map(|&i| &data[i]).collect();

    let mut adam = Adam::new(net.param_count(), lr);
    let mut history = Vec::new();
    let mut best = (f64::INFINITY, net.clone());
    let mut since_best = 0usize;
    for epoch in 1..=cfg.max_epochs {
        train.shuffle(&mut r);
        let mut total = 0.0;
        for batch in train.chunks(cfg.batch_size) {
            let (loss, grad) = net.loss_and_gradient(batch);
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::Divergence { epoch });
            }
            total += loss * batch.len() as f64;
            adam.step(net, &grad);
        }
        let train_loss = total / train.len() as f64;
        let val_loss = (!val.is_empty()).then(|| net.loss(&val));
        if val_loss.is_some_and(|v| !v.is_finite()) {
            return Err(Error::Divergence { epoch });
        }
        history.push(EpochStats { epoch, train_loss, train_accuracy: accuracy(net, &train), val_loss });
        if let Some(v) = val_loss {
            if v < best.0 {
                best = (v, net.clone());
                since_best = 0;
            } else {
                since_best += 1;
                if since_best >= cfg.patience {
                    break;
                }
            }
        }
    }
    if !val.is_empty() {
        *net = best.1;
    }
    Ok(history)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dot_handles_remainders() {
        let a: Vec<f64> = (0..13).map(|i| i as f64).collect();
        let b = vec![2.0; 13];
        assert_eq!(dot(&a, &b), 156.0);
    }

    #[test]
    fn bce_is_stable_at_extremes() {
        assert!((bce_logit(0.0, 1.0) - std::f64::consts::LN_2).abs() < 1e-15);
        assert!(bce_logit(800.0, 1.0) < 1e-300);
        assert!((bce_logit(-800.0, 1.0) - 800.0).abs() < 1e-9);
        assert_eq!(sigmoid(-800.0), 0.0);
    }

    #[test]
    fn flat_parameter_view_round_trips() {
        let mut net = Mlp::new(3, 2, &[4], 1);
        let n = net.param_count();
        assert_eq!(n, 5 * 4 + 4 + 4 + 1);
        net.set_param(n - 1, 0.25);
        assert_eq!(net.layers[1].bias[0], 0.25);
        assert_eq!(net.param(n - 1), 0.25);
    }
}
