use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{build_tree, BinnedMatrix, Tree, TreeParams};
use crate::matrix::Matrix;
use crate::rng::{rng_from_seed, stage_seed};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestConfig {
    pub trees: usize,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    /// Features tried per split; `None` means the square root of the width.
    pub max_features: Option<usize>,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            trees: 100,
            max_depth: 12,
            min_samples_leaf: 1,
            max_features: None,
            bootstrap: true,
            seed: 5,
        }
    }
}

/// Leaves store the fraction of fake samples they received.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub trees: Vec<Tree>,
}

impl ForestModel {
    pub fn votes_fake(tree: &Tree, x: &[f64]) -> bool {
        tree.predict(x) >= 0.5
    }

    /// Fraction of trees voting fake.
    pub fn score(&self, x: &[f64]) -> f64 {
        if self.trees.is_empty() {
            return 0.5;
        }
        let votes = self.trees.iter().filter(|t| Self::votes_fake(t, x)).count();
        votes as f64 / self.trees.len() as f64
    }
}

pub fn fit_forest(x: &Matrix, y: &[f64], cfg: &ForestConfig) -> ForestModel {
    let data = BinnedMatrix::new(x);
    let (n, p) = (x.rows(), x.cols());
    let params = TreeParams {
        max_depth: cfg.max_depth,
        min_samples_leaf: cfg.min_samples_leaf,
        max_features: Some(
            cfg.max_features
                .unwrap_or_else(|| (p as f64).sqrt().round() as usize)
                .clamp(1, p.max(1)),
        ),
    };
    let trees = (0..cfg.trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = rng_from_seed(stage_seed(cfg.seed, &format!("tree-{t}")));
            let idx: Vec<usize> = if cfg.bootstrap {
                (0..n).map(|_| rng.gen_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            build_tree(&data, y, idx, &params, &mut rng).0
        })
        .collect();
    ForestModel { trees }
}
