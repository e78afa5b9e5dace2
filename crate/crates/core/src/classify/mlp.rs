use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::logistic::sigmoid;
use crate::matrix::{dot, Matrix};
use crate::rng::rng_from_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MlpConfig {
    pub hidden: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub l2: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for MlpConfig {
    fn default() -> Self {
        MlpConfig {
            hidden: 64,
            epochs: 100,
            learning_rate: 0.05,
            l2: 1e-4,
            batch_size: 32,
            seed: 4,
        }
    }
}

/// One tanh hidden layer, sigmoid output, trained on cross-entropy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    /// hidden × input
    pub w1: Matrix,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: f64,
}

impl MlpModel {
    fn hidden(&self, x: &[f64], h: &mut [f64]) {
        for (j, hj) in h.iter_mut().enumerate() {
            *hj = (dot(self.w1.row(j), x) + self.b1[j]).tanh();
        }
    }

    pub fn score(&self, x: &[f64]) -> f64 {
        let mut h = vec![0.0; self.b1.len()];
        self.hidden(x, &mut h);
        sigmoid(dot(&self.w2, &h) + self.b2)
    }
}

pub fn fit_mlp(x: &Matrix, y: &[f64], cfg: &MlpConfig) -> MlpModel {
    let (n, p, hdim) = (x.rows(), x.cols(), cfg.hidden.max(1));
    let mut rng = rng_from_seed(cfg.seed);
    let a1 = (6.0 / (p + hdim) as f64).sqrt();
    let a2 = (6.0 / (hdim + 1) as f64).sqrt();
    let mut w1 = Matrix::zeros(hdim, p);
    for j in 0..hdim {
        for w in w1.row_mut(j) {
            *w = rng.gen_range(-a1..a1);
        }
    }
    let mut m = MlpModel {
        w1,
        b1: vec![0.0; hdim],
        w2: (0..hdim).map(|_| rng.gen_range(-a2..a2)).collect(),
        b2: 0.0,
    };
    let mut order: Vec<usize> = (0..n).collect();
    let bs = cfg.batch_size.max(1);
    let mut h = vec![0.0; hdim];
    let mut g1 = Matrix::zeros(hdim, p);
    let mut gb1 = vec![0.0; hdim];
    let mut g2 = vec![0.0; hdim];
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(bs) {
            for j in 0..hdim {
                g1.row_mut(j).fill(0.0);
            }
            gb1.iter_mut().for_each(|v| *v = 0.0);
            g2.iter_mut().for_each(|v| *v = 0.0);
            let mut gb2 = 0.0;
            for &i in batch {
                let xi = x.row(i);
                m.hidden(xi, &mut h);
                let err = sigmoid(dot(&m.w2, &h) + m.b2) - y[i];
                gb2 += err;
                for j in 0..hdim {
                    g2[j] += err * h[j];
                    let d = err * m.w2[j] * (1.0 - h[j] * h[j]);
                    gb1[j] += d;
                    for (g, v) in g1.row_mut(j).iter_mut().zip(xi) {
                        *g += d * v;
                    }
                }
            }
            let s = cfg.learning_rate / batch.len() as f64;
            let decay = cfg.learning_rate * cfg.l2;
            for j in 0..hdim {
                for (w, g) in m.w1.row_mut(j).iter_mut().zip(g1.row(j)) {
                    *w -= s * g + decay * *w;
                }
                m.b1[j] -= s * gb1[j];
                m.w2[j] -= s * g2[j] + decay * m.w2[j];
            }
            m.b2 -= s * gb2;
        }
    }
    m
}
