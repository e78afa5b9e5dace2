//! Histogram CART shared by the random forest and gradient boosting.
//!
//! Features are pre-binned (at most 256 bins per column, exact when a column
//! has that few distinct values). Every sample carries a target `a`; a split
//! maximizes `A_L^2/n_L + A_R^2/n_R - A^2/n`, which is variance reduction for
//! regression targets and Gini reduction for 0/1 targets.

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::matrix::Matrix;

pub const MAX_BINS: usize = 256;

/// Per-column cut points: bin `b` holds values `x <= cuts[b]`, and the last
/// bin holds everything above the last cut.
#[derive(Debug, Clone)]
pub struct BinnedMatrix {
    n: usize,
    cuts: Vec<Vec<f64>>,
    /// column-major bin codes
    codes: Vec<Vec<u8>>,
}

impl BinnedMatrix {
    pub fn new(x: &Matrix) -> Self {
        let (n, p) = (x.rows(), x.cols());
        let mut cuts = Vec::with_capacity(p);
        let mut codes = Vec::with_capacity(p);
        for j in 0..p {
            let mut col: Vec<f64> = (0..n).map(|i| x[(i, j)]).collect();
            col.sort_by(f64::total_cmp);
            let mut uniq = col.clone();
            uniq.dedup();
            let c: Vec<f64> = if uniq.len() <= MAX_BINS {
                uniq.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
            } else {
                let mut c: Vec<f64> = (1..MAX_BINS).map(|q| col[q * n / MAX_BINS]).collect();
                c.dedup();
                // the top value never acts as a cut
                if c.last() == col.last() {
                    c.pop();
                }
                c
            };
            codes.push(
                (0..n)
                    .map(|i| c.partition_point(|&t| t < x[(i, j)]) as u8)
                    .collect(),
            );
            cuts.push(c);
        }
        BinnedMatrix { n, cuts, codes }
    }

    pub fn rows(&self) -> usize {
        self.n
    }

    pub fn cols(&self) -> usize {
        self.cuts.len()
    }

    fn bins(&self, j: usize) -> usize {
        self.cuts[j].len() + 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf { value: f64 },
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn leaf_index(&self, x: &[f64]) -> usize {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { .. } => return i,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[feature] <= threshold { left } else { right },
            }
        }
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        match self.nodes[self.leaf_index(x)] {
            Node::Leaf { value } => value,
            Node::Split { .. } => unreachable!(),
        }
    }

    pub fn depth(&self) -> usize {
        fn go(t: &Tree, i: usize) -> usize {
            match t.nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(t, left).max(go(t, right)),
            }
        }
        go(self, 0)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    /// Candidate features per split; `None` for all.
    pub max_features: Option<usize>,
}

/// Fit a tree to targets `a` over the sample list `idx` (repeats allowed, as
/// in a bootstrap). Leaves hold the mean target. Also returns the leaf each
/// listed sample ended in, parallel to `idx`.
pub fn build_tree(
    data: &BinnedMatrix,
    a: &[f64],
    idx: Vec<usize>,
    params: &TreeParams,
    rng: &mut impl Rng,
) -> (Tree, Vec<(usize, usize)>) {
    let mut b = Builder {
        data,
        a,
        params,
        nodes: Vec::new(),
        leaf_of: Vec::with_capacity(idx.len()),
    };
    b.grow(idx, 0, rng);
    (Tree { nodes: b.nodes }, b.leaf_of)
}

struct Builder<'a, 'p> {
    data: &'a BinnedMatrix,
    a: &'a [f64],
    params: &'p TreeParams,
    nodes: Vec<Node>,
    leaf_of: Vec<(usize, usize)>,
}

struct BestSplit {
    feature: usize,
    bin: usize,
    gain: f64,
}

impl Builder<'_, '_> {
    fn leaf(&mut self, idx: &[usize], sum: f64) -> usize {
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf {
            value: sum / idx.len().max(1) as f64,
        });
        self.leaf_of.extend(idx.iter().map(|&s| (s, id)));
        id
    }

    fn grow(&mut self, idx: Vec<usize>, depth: usize, rng: &mut impl Rng) -> usize {
        let n = idx.len();
        let sum: f64 = idx.iter().map(|&i| self.a[i]).sum();
        let first = self.a[idx[0]];
        let pure = idx.iter().all(|&i| self.a[i] == first);
        if depth >= self.params.max_depth || n < 2 * self.params.min_samples_leaf.max(1) || pure {
            return self.leaf(&idx, sum);
        }
        let Some(best) = self.best_split(&idx, sum, rng) else {
            return self.leaf(&idx, sum);
        };
        let codes = &self.data.codes[best.feature];
        let (l, r): (Vec<usize>, Vec<usize>) =
            idx.into_iter().partition(|&i| codes[i] as usize <= best.bin);
        let id = self.nodes.len();
        // placeholder until the children exist
        self.nodes.push(Node::Leaf { value: 0.0 });
        let left = self.grow(l, depth + 1, rng);
        let right = self.grow(r, depth + 1, rng);
        self.nodes[id] = Node::Split {
            feature: best.feature,
            threshold: self.data.cuts[best.feature][best.bin],
            left,
            right,
        };
        id
    }

    fn best_split(&self, idx: &[usize], sum: f64, rng: &mut impl Rng) -> Option<BestSplit> {
        let p = self.data.cols();
        let features: Vec<usize> = match self.params.max_features {
            Some(m) if m < p => {
                let mut f = sample(rng, p, m.max(1)).into_vec();
                f.sort_unstable();
                f
            }
            _ => (0..p).collect(),
        };
        let n = idx.len() as f64;
        let parent = sum * sum / n;
        let min_leaf = self.params.min_samples_leaf.max(1);
        let mut best: Option<BestSplit> = None;
        let mut hist_sum = vec![0.0; MAX_BINS];
        let mut hist_cnt = vec![0usize; MAX_BINS];
        for f in features {
            let bins = self.data.bins(f);
            if bins < 2 {
                continue;
            }
            hist_sum[..bins].iter_mut().for_each(|v| *v = 0.0);
            hist_cnt[..bins].iter_mut().for_each(|v| *v = 0);
            let codes = &self.data.codes[f];
            for &i in idx {
                let b = codes[i] as usize;
                hist_sum[b] += self.a[i];
                hist_cnt[b] += 1;
            }
            let (mut sl, mut cl) = (0.0, 0usize);
            for b in 0..bins - 1 {
                sl += hist_sum[b];
                cl += hist_cnt[b];
                let cr = idx.len() - cl;
                if cl < min_leaf {
                    continue;
                }
                if cr < min_leaf {
                    break;
                }
                let sr = sum - sl;
                let gain = sl * sl / cl as f64 + sr * sr / cr as f64 - parent;
                if best.as_ref().is_none_or(|bs| gain > bs.gain + 1e-12) {
                    best = Some(BestSplit {
                        feature: f,
                        bin: b,
                        gain,
                    });
                }
            }
        }
        // zero-gain splits are allowed so that XOR-like interactions can be
        // found one level down
        best.filter(|b| b.gain > -1e-9)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;

    #[test]
    fn bins_are_exact_for_few_values() {
        let x = Matrix::from_rows(&[[1.0], [3.0], [2.0], [3.0]]).unwrap();
        let b = BinnedMatrix::new(&x);
        assert_eq!(b.cuts[0], vec![1.5, 2.5]);
        assert_eq!(b.codes[0], vec![0, 2, 1, 2]);
    }

    #[test]
    fn quantile_bins_for_many_values() {
        let rows: Vec<[f64; 1]> = (0..2000).map(|i| [i as f64]).collect();
        let b = BinnedMatrix::new(&Matrix::from_rows(&rows).unwrap());
        assert!(b.bins(0) <= MAX_BINS);
        assert!(b.codes[0].windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn fits_a_step_function() {
        let rows: Vec<[f64; 2]> = (0..40).map(|i| [i as f64, (i % 3) as f64]).collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let a: Vec<f64> = (0..40).map(|i| if i < 17 { 0.0 } else { 1.0 }).collect();
        let params = TreeParams { max_depth: 3, min_samples_leaf: 1, max_features: None };
        let (t, leaf_of) = build_tree(&BinnedMatrix::new(&x), &a, (0..40).collect(), &params, &mut rng_from_seed(1));
        assert_eq!(t.depth(), 1);
        for (i, &ai) in a.iter().enumerate() {
            assert_eq!(t.predict(x.row(i)), ai);
        }
        assert_eq!(leaf_of.len(), 40);
        for (s, leaf) in leaf_of {
            assert_eq!(t.leaf_index(x.row(s)), leaf);
        }
    }

    #[test]
    fn depth_limit_is_respected() {
        let rows: Vec<[f64; 1]> = (0..64).map(|i| [i as f64]).collect();
        let a: Vec<f64> = (0..64).map(|i| (i % 2) as f64).collect();
        let params = TreeParams { max_depth: 2, min_samples_leaf: 1, max_features: None };
        let (t, _) = build_tree(
            &BinnedMatrix::new(&Matrix::from_rows(&rows).unwrap()),
            &a,
            (0..64).collect(),
            &params,
            &mut rng_from_seed(2),
        );
        assert!(t.depth() <= 2);
    }
}
