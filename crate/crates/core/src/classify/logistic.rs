use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::matrix::{dot, Matrix};
use crate::rng::rng_from_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LogisticConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub l2: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for LogisticConfig {
    fn default() -> Self {
        LogisticConfig {
            learning_rate: 0.1,
            epochs: 200,
            l2: 1e-4,
            batch_size: 32,
            seed: 3,
        }
    }
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LogisticModel {
    pub fn zeros(p: usize) -> Self {
        LogisticModel {
            weights: vec![0.0; p],
            bias: 0.0,
        }
    }

    pub fn score(&self, x: &[f64]) -> f64 {
        sigmoid(dot(&self.weights, x) + self.bias)
    }
}

/// Mini-batch SGD on mean log-loss plus `l2/2 * |w|^2` (bias unpenalized).
pub fn fit_logistic(x: &Matrix, y: &[f64], cfg: &LogisticConfig) -> LogisticModel {
    let (n, p) = (x.rows(), x.cols());
    let mut m = LogisticModel::zeros(p);
    let mut rng = rng_from_seed(cfg.seed);
    let mut order: Vec<usize> = (0..n).collect();
    let bs = cfg.batch_size.max(1);
    let mut gw = vec![0.0; p];
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(bs) {
            gw.iter_mut().for_each(|g| *g = 0.0);
            let mut gb = 0.0;
            for &i in batch {
                let err = m.score(x.row(i)) - y[i];
                for (g, v) in gw.iter_mut().zip(x.row(i)) {
                    *g += err * v;
                }
                gb += err;
            }
            let inv = 1.0 / batch.len() as f64;
            for (w, g) in m.weights.iter_mut().zip(&gw) {
                *w -= cfg.learning_rate * (g * inv + cfg.l2 * *w);
            }
            m.bias -= cfg.learning_rate * gb * inv;
        }
    }
    m
}
