use serde::{Deserialize, Serialize};

use super::logistic::sigmoid;
use super::tree::{build_tree, BinnedMatrix, Node, Tree, TreeParams};
use crate::matrix::Matrix;
use crate::rng::rng_from_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GbdtConfig {
    pub rounds: usize,
    pub max_depth: usize,
    pub shrinkage: f64,
    pub min_samples_leaf: usize,
    pub seed: u64,
}

impl Default for GbdtConfig {
    fn default() -> Self {
        GbdtConfig {
            rounds: 200,
            max_depth: 3,
            shrinkage: 0.1,
            min_samples_leaf: 1,
            seed: 6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbdtModel {
    pub base: f64,
    /// Leaf values already include the step size.
    pub trees: Vec<Tree>,
    /// Mean training log-loss after the base score and after each round.
    pub train_loss: Vec<f64>,
}

impl GbdtModel {
    pub fn margin(&self, x: &[f64]) -> f64 {
        self.base + self.trees.iter().map(|t| t.predict(x)).sum::<f64>()
    }

    pub fn score(&self, x: &[f64]) -> f64 {
        sigmoid(self.margin(x))
    }
}

fn log_loss(f: &[f64], y: &[f64]) -> f64 {
    // log(1 + e^f) - y f, computed stably
    let s: f64 = f
        .iter()
        .zip(y)
        .map(|(&f, &y)| f.max(0.0) + (-f.abs()).exp().ln_1p() - y * f)
        .sum();
    s / f.len() as f64
}

/// Newton leaves on the logistic loss; each round's step is halved until
/// the training loss does not rise, so the loss sequence is monotone.
pub fn fit_gbdt(x: &Matrix, y: &[f64], cfg: &GbdtConfig) -> GbdtModel {
    let n = x.rows();
    let data = BinnedMatrix::new(x);
    let pos = y.iter().sum::<f64>().clamp(0.5, n as f64 - 0.5) / n as f64;
    let base = (pos / (1.0 - pos)).ln();
    let mut f = vec![base; n];
    let mut loss = log_loss(&f, y);
    let mut model = GbdtModel {
        base,
        trees: Vec::with_capacity(cfg.rounds),
        train_loss: vec![loss],
    };
    let params = TreeParams {
        max_depth: cfg.max_depth,
        min_samples_leaf: cfg.min_samples_leaf,
        max_features: None,
    };
    let mut rng = rng_from_seed(cfg.seed);
    let mut resid = vec![0.0; n];
    let mut cand = vec![0.0; n];
    for _ in 0..cfg.rounds {
        let p: Vec<f64> = f.iter().map(|&v| sigmoid(v)).collect();
        for i in 0..n {
            resid[i] = y[i] - p[i];
        }
        let (mut tree, leaf_of) = build_tree(&data, &resid, (0..n).collect(), &params, &mut rng);
        let mut num = vec![0.0; tree.nodes.len()];
        let mut den = vec![0.0; tree.nodes.len()];
        let mut sample_leaf = vec![0usize; n];
        for &(i, leaf) in &leaf_of {
            num[leaf] += resid[i];
            den[leaf] += p[i] * (1.0 - p[i]);
            sample_leaf[i] = leaf;
        }
        let newton: Vec<f64> = num
            .iter()
            .zip(&den)
            .map(|(a, b)| if *b > 1e-12 { (a / b).clamp(-8.0, 8.0) } else { 0.0 })
            .collect();
        let mut step = cfg.shrinkage;
        let mut accepted = false;
        for _ in 0..30 {
            for i in 0..n {
                cand[i] = f[i] + step * newton[sample_leaf[i]];
            }
            let l = log_loss(&cand, y);
            if l <= loss {
                loss = l;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if accepted {
            std::mem::swap(&mut f, &mut cand);
            for (k, node) in tree.nodes.iter_mut().enumerate() {
                if let Node::Leaf { value } = node {
                    *value = step * newton[k];
                }
            }
            model.trees.push(tree);
        }
        model.train_loss.push(loss);
    }
    model
}
