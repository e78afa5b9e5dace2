//! Metric embedding: a small tanh perceptron trained as a Siamese network
//! with the contrastive loss `Y*D^2 + (1-Y)*max(margin-D, 0)^2`.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::Label;
use crate::error::{Error, Result};
use crate::matrix::{euclidean, Matrix};
use crate::rng::rng_from_seed;

/// Contrastive loss of one pair of embeddings. `same` is `Y`.
pub fn contrastive_loss(e1: &[f64], e2: &[f64], same: bool, margin: f64) -> Result<f64> {
    if e1.len() != e2.len() {
        return Err(Error::DimensionMismatch {
            expected: e1.len(),
            got: e2.len(),
        });
    }
    if !margin.is_finite() || margin <= 0.0 {
        return Err(Error::InvalidArgument(format!("margin must be positive, got {margin}")));
    }
    if !e1.iter().chain(e2).all(|x| x.is_finite()) {
        return Err(Error::NonFinite("contrastive_loss input"));
    }
    Ok(loss_of_distance(euclidean(e1, e2), same, margin))
}

#[inline]
fn loss_of_distance(d: f64, same: bool, margin: f64) -> f64 {
    if same {
        d * d
    } else {
        let h = (margin - d).max(0.0);
        h * h
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pair {
    pub i: usize,
    pub j: usize,
    /// True when both articles share a label.
    pub same: bool,
}

/// Draw `n_pairs` pairs: half positive in expectation, positives split
/// evenly between the two classes, negatives one from each class.
pub fn sample_pairs(labels: &[Label], n_pairs: usize, seed: u64) -> Result<Vec<Pair>> {
    let fake: Vec<usize> = (0..labels.len()).filter(|&i| labels[i].is_fake()).collect();
    let real: Vec<usize> = (0..labels.len()).filter(|&i| !labels[i].is_fake()).collect();
    if fake.len() < 2 || real.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "pair sampling needs >=2 articles per class (fake={}, real={})",
            fake.len(),
            real.len()
        )));
    }
    let mut rng = rng_from_seed(seed);
    let mut pairs = Vec::with_capacity(n_pairs);
    for _ in 0..n_pairs {
        if rng.gen_bool(0.5) {
            let class = if rng.gen_bool(0.5) { &fake } else { &real };
            let a = rng.gen_range(0..class.len());
            let mut b = rng.gen_range(0..class.len() - 1);
            if b >= a {
                b += 1;
            }
            pairs.push(Pair {
                i: class[a],
                j: class[b],
                same: true,
            });
        } else {
            let f = *fake.choose(&mut rng).unwrap();
            let r = *real.choose(&mut rng).unwrap();
            let (i, j) = if rng.gen_bool(0.5) { (f, r) } else { (r, f) };
            pairs.push(Pair { i, j, same: false });
        }
    }
    Ok(pairs)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    /// out×in
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

impl DenseLayer {
    fn forward_into(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(
            self.weights
                .iter_rows()
                .zip(&self.bias)
                .map(|(w, b)| b + w.iter().zip(x).map(|(a, c)| a * c).sum::<f64>()),
        );
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetricConfig {
    /// Sizes after the input layer; tanh on all but the last.
    pub layers: Vec<usize>,
    pub margin: f64,
    pub epochs: usize,
    /// Pairs per epoch as a multiple of the training-set size.
    pub pairs_per_sample: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub lr_decay: f64,
    pub seed: u64,
}

impl Default for MetricConfig {
    fn default() -> Self {
        MetricConfig {
            layers: vec![64, 32],
            margin: 1.0,
            epochs: 20,
            pairs_per_sample: 4,
            batch_size: 32,
            learning_rate: 0.05,
            lr_decay: 0.9,
            seed: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricNet {
    pub layers: Vec<DenseLayer>,
    pub margin: f64,
    pub config: MetricConfig,
    /// Mean pair loss of each epoch, measured while training.
    pub epoch_loss: Vec<f64>,
    /// Mean loss over the first epoch's pairs before and after training.
    pub initial_loss: f64,
    pub final_loss: f64,
}

/// Parameter gradients with the same shapes as the network.
#[derive(Debug, Clone, PartialEq)]
pub struct NetGradient {
    pub layers: Vec<DenseLayer>,
}

impl NetGradient {
    fn zeros_like(net: &MetricNet) -> Self {
        NetGradient {
            layers: net
                .layers
                .iter()
                .map(|l| DenseLayer {
                    weights: Matrix::zeros(l.weights.rows(), l.weights.cols()),
                    bias: vec![0.0; l.bias.len()],
                })
                .collect(),
        }
    }

    fn clear(&mut self) {
        for l in &mut self.layers {
            l.weights = Matrix::zeros(l.weights.rows(), l.weights.cols());
            l.bias.iter_mut().for_each(|b| *b = 0.0);
        }
    }

    pub fn flatten(&self) -> Vec<f64> {
        flatten_layers(&self.layers)
    }
}

fn flatten_layers(layers: &[DenseLayer]) -> Vec<f64> {
    let mut out = Vec::new();
    for l in layers {
        out.extend_from_slice(l.weights.as_slice());
        out.extend_from_slice(&l.bias);
    }
    out
}

/// Per-layer activations of one forward pass; `acts[0]` is the input.
struct Trace {
    acts: Vec<Vec<f64>>,
}

impl MetricNet {
    /// All-zero parameters.
    pub fn zeros(input_dim: usize, config: &MetricConfig) -> Self {
        let mut layers = Vec::with_capacity(config.layers.len());
        let mut fan_in = input_dim;
        for &out in &config.layers {
            layers.push(DenseLayer {
                weights: Matrix::zeros(out, fan_in),
                bias: vec![0.0; out],
            });
            fan_in = out;
        }
        MetricNet {
            layers,
            margin: config.margin,
            config: config.clone(),
            epoch_loss: Vec::new(),
            initial_loss: 0.0,
            final_loss: 0.0,
        }
    }

    /// Xavier-uniform weights, zero biases.
    pub fn xavier(input_dim: usize, config: &MetricConfig, rng: &mut impl Rng) -> Self {
        let mut net = MetricNet::zeros(input_dim, config);
        for l in &mut net.layers {
            let (fan_out, fan_in) = (l.weights.rows(), l.weights.cols());
            let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for i in 0..fan_out {
                for w in l.weights.row_mut(i) {
                    *w = rng.gen_range(-a..a);
                }
            }
        }
        net
    }

    pub fn input_dim(&self) -> usize {
        self.layers.first().map_or(0, |l| l.weights.cols())
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.weights.rows())
    }

    fn trace(&self, x: &[f64]) -> Trace {
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.to_vec());
        let last = self.layers.len().saturating_sub(1);
        for (k, l) in self.layers.iter().enumerate() {
            let mut out = Vec::new();
            l.forward_into(&acts[k], &mut out);
            if k < last {
                out.iter_mut().for_each(|v| *v = v.tanh());
            }
            acts.push(out);
        }
        Trace { acts }
    }

    /// Forward pass.
    pub fn embed(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: v.len(),
            });
        }
        Ok(self.trace(v).acts.pop().unwrap_or_default())
    }

    pub fn embed_batch(&self, x: &Matrix) -> Result<Matrix> {
        let mut out = Matrix::zeros(x.rows(), self.output_dim());
        for (i, r) in x.iter_rows().enumerate() {
            out.row_mut(i).copy_from_slice(&self.embed(r)?);
        }
        Ok(out)
    }

    fn backprop(&self, t: &Trace, grad_out: &[f64], acc: &mut NetGradient) {
        let mut delta = grad_out.to_vec();
        for k in (0..self.layers.len()).rev() {
            let input = &t.acts[k];
            let g = &mut acc.layers[k];
            for (o, d) in delta.iter().enumerate() {
                g.bias[o] += d;
                for (w, x) in g.weights.row_mut(o).iter_mut().zip(input) {
                    *w += d * x;
                }
            }
            if k == 0 {
                break;
            }
            let w = &self.layers[k].weights;
            let mut prev = vec![0.0; input.len()];
            for (o, d) in delta.iter().enumerate() {
                for (p, wv) in prev.iter_mut().zip(w.row(o)) {
                    *p += d * wv;
                }
            }
            // input is tanh output of the previous layer
            for (p, h) in prev.iter_mut().zip(input) {
                *p *= 1.0 - h * h;
            }
            delta = prev;
        }
    }

    /// Contrastive loss of one pair and its parameter gradient, accumulated
    /// into `acc`. Both members pass through the same parameters.
    pub fn pair_loss_grad(&self, a: &[f64], b: &[f64], same: bool, acc: &mut NetGradient) -> f64 {
        let ta = self.trace(a);
        let tb = self.trace(b);
        let (ea, eb) = (ta.acts.last().unwrap(), tb.acts.last().unwrap());
        let d = euclidean(ea, eb);
        let loss = loss_of_distance(d, same, self.margin);
        // dL/dD divided by D, so that dL/de_a = scale * (e_a - e_b)
        let scale = if same {
            2.0
        } else if d < self.margin && d > 0.0 {
            -2.0 * (self.margin - d) / d
        } else {
            0.0
        };
        if scale != 0.0 {
            let ga: Vec<f64> = ea.iter().zip(eb).map(|(x, y)| scale * (x - y)).collect();
            let gb: Vec<f64> = ga.iter().map(|g| -g).collect();
            self.backprop(&ta, &ga, acc);
            self.backprop(&tb, &gb, acc);
        }
        loss
    }

    pub fn gradient_zeros(&self) -> NetGradient {
        NetGradient::zeros_like(self)
    }

    pub fn params_flat(&self) -> Vec<f64> {
        flatten_layers(&self.layers)
    }

    pub fn set_params_flat(&mut self, p: &[f64]) -> Result<()> {
        let total: usize = self
            .layers
            .iter()
            .map(|l| l.weights.as_slice().len() + l.bias.len())
            .sum();
        if p.len() != total {
            return Err(Error::DimensionMismatch {
                expected: total,
                got: p.len(),
            });
        }
        let mut off = 0;
        for l in &mut self.layers {
            let (r, c) = (l.weights.rows(), l.weights.cols());
            l.weights = Matrix::from_vec(r, c, p[off..off + r * c].to_vec())?;
            off += r * c;
            let nb = l.bias.len();
            l.bias.copy_from_slice(&p[off..off + nb]);
            off += nb;
        }
        Ok(())
    }

    fn mean_loss(&self, x: &Matrix, pairs: &[Pair]) -> f64 {
        if pairs.is_empty() {
            return 0.0;
        }
        let sum: f64 = pairs
            .iter()
            .map(|p| {
                let ea = self.trace(x.row(p.i)).acts.pop().unwrap();
                let eb = self.trace(x.row(p.j)).acts.pop().unwrap();
                loss_of_distance(euclidean(&ea, &eb), p.same, self.margin)
            })
            .sum();
        sum / pairs.len() as f64
    }

    fn apply(&mut self, g: &NetGradient, step: f64) {
        for (l, gl) in self.layers.iter_mut().zip(&g.layers) {
            let (r, c) = (l.weights.rows(), l.weights.cols());
            let w: Vec<f64> = l
                .weights
                .as_slice()
                .iter()
                .zip(gl.weights.as_slice())
                .map(|(w, d)| w - step * d)
                .collect();
            l.weights = Matrix::from_vec(r, c, w).expect("shape preserved");
            for (b, d) in l.bias.iter_mut().zip(&gl.bias) {
                *b -= step * d;
            }
        }
    }
}

/// Mini-batch SGD on freshly sampled pairs each epoch.
pub fn train_metric_net(x: &Matrix, labels: &[Label], config: &MetricConfig) -> Result<MetricNet> {
    let n = x.rows();
    if labels.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: labels.len(),
        });
    }
    if n < 4 {
        return Err(Error::InvalidArgument(format!("metric training needs n>=4, got {n}")));
    }
    if config.layers.is_empty() || config.batch_size == 0 {
        return Err(Error::InvalidArgument("metric net needs layers and batch_size>0".into()));
    }
    if !x.is_finite() {
        return Err(Error::NonFinite("metric training input"));
    }
    let mut rng = rng_from_seed(config.seed);
    let mut net = MetricNet::xavier(x.cols(), config, &mut rng);
    let n_pairs = (config.pairs_per_sample * n).max(1);
    let mut grad = net.gradient_zeros();
    let mut lr = config.learning_rate;
    let mut first_pairs: Option<Vec<Pair>> = None;

    for epoch in 0..config.epochs {
        let pairs = sample_pairs(labels, n_pairs, rng.gen())?;
        if first_pairs.is_none() {
            net.initial_loss = net.mean_loss(x, &pairs);
            first_pairs = Some(pairs.clone());
        }
        let mut total = 0.0;
        for batch in pairs.chunks(config.batch_size) {
            grad.clear();
            let mut bl = 0.0;
            for p in batch {
                bl += net.pair_loss_grad(x.row(p.i), x.row(p.j), p.same, &mut grad);
            }
            if !bl.is_finite() {
                return Err(Error::Diverged(format!(
                    "contrastive loss became {bl} in epoch {epoch}; lower the learning rate"
                )));
            }
            total += bl;
            net.apply(&grad, lr / batch.len() as f64);
        }
        net.epoch_loss.push(total / pairs.len() as f64);
        lr *= config.lr_decay;
    }
    if !net.params_flat().iter().all(|p| p.is_finite()) {
        return Err(Error::Diverged("metric net parameters became non-finite".into()));
    }
    match &first_pairs {
        Some(p) => net.final_loss = net.mean_loss(x, p),
        None => {
            let p = sample_pairs(labels, n_pairs, rng.gen())?;
            net.initial_loss = net.mean_loss(x, &p);
            net.final_loss = net.initial_loss;
        }
    }
    Ok(net)
}

/// Mean same-label and cross-label distances over all pairs of rows.
pub fn class_distance_stats(emb: &Matrix, labels: &[Label]) -> (f64, f64) {
    let (mut intra, mut ni, mut inter, mut nx) = (0.0, 0usize, 0.0, 0usize);
    for i in 0..emb.rows() {
        for j in (i + 1)..emb.rows() {
            let d = euclidean(emb.row(i), emb.row(j));
            if labels[i] == labels[j] {
                intra += d;
                ni += 1;
            } else {
                inter += d;
                nx += 1;
            }
        }
    }
    (intra / ni.max(1) as f64, inter / nx.max(1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr_free::gaussian;

    /// Box-Muller normal deviates, enough for test fixtures.
    mod rand_distr_free {
        use rand::Rng;
        pub fn gaussian(rng: &mut impl Rng) -> f64 {
            let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
            let u2: f64 = rng.gen();
            (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
        }
    }

    /// Relative error within 1e-4; components that are zero up to finite
    /// difference round-off (|a - n| <= 1e-8) also pass.
    fn grad_close(a: f64, n: f64) -> bool {
        let diff = (a - n).abs();
        diff <= 1e-4 * a.abs().max(n.abs()) || diff <= 1e-8
    }

    #[test]
    fn loss_examples() {
        assert_eq!(contrastive_loss(&[1.0, 2.0], &[1.0, 2.0], true, 1.0).unwrap(), 0.0);
        assert_eq!(contrastive_loss(&[0.0, 0.0], &[2.0, 0.0], false, 1.0).unwrap(), 0.0);
        let l = contrastive_loss(&[0.0, 0.0], &[0.6, 0.8], false, 2.0).unwrap();
        assert!((l - 1.0).abs() < 1e-15);
        assert!(contrastive_loss(&[0.0], &[1.0, 2.0], true, 1.0).is_err());
        assert!(contrastive_loss(&[f64::NAN], &[1.0], true, 1.0).is_err());
        assert!(contrastive_loss(&[0.0], &[1.0], true, 0.0).is_err());
    }

    fn labels4() -> Vec<Label> {
        vec![Label::Fake, Label::Fake, Label::Real, Label::Real]
    }

    #[test]
    fn pairs_respect_label_definition() {
        let labels = labels4();
        let pairs = sample_pairs(&labels, 100, 3).unwrap();
        assert_eq!(pairs.len(), 100);
        for p in &pairs {
            assert_ne!(p.i, p.j);
            assert_eq!(p.same, labels[p.i] == labels[p.j]);
        }
        assert_eq!(pairs, sample_pairs(&labels, 100, 3).unwrap());
        assert!(sample_pairs(&[Label::Fake; 5], 10, 1).is_err());
    }

    #[test]
    fn pair_balance() {
        let labels: Vec<Label> = (0..40).map(|i| if i < 10 { Label::Fake } else { Label::Real }).collect();
        let pairs = sample_pairs(&labels, 4000, 9).unwrap();
        let pos: Vec<_> = pairs.iter().filter(|p| p.same).collect();
        let frac = pos.len() as f64 / 4000.0;
        assert!((frac - 0.5).abs() < 0.05);
        let fake_pos = pos.iter().filter(|p| labels[p.i].is_fake()).count() as f64;
        assert!((fake_pos / pos.len() as f64 - 0.5).abs() < 0.05);
    }

    #[test]
    fn zero_net_outputs_zero() {
        let net = MetricNet::zeros(3, &MetricConfig::default());
        assert_eq!(net.embed(&[1.0, -5.0, 2.0]).unwrap(), vec![0.0; 32]);
        assert!(net.embed(&[1.0]).is_err());
    }

    #[test]
    fn batch_matches_rows() {
        let mut rng = rng_from_seed(4);
        let net = MetricNet::xavier(3, &MetricConfig { layers: vec![5, 2], ..Default::default() }, &mut rng);
        let x = Matrix::from_rows(&[[0.1, 0.2, 0.3], [-1.0, 0.0, 2.0]]).unwrap();
        let b = net.embed_batch(&x).unwrap();
        for i in 0..2 {
            assert_eq!(b.row(i), net.embed(x.row(i)).unwrap().as_slice());
        }
        assert_eq!(net.embed(x.row(0)).unwrap(), net.embed(x.row(0)).unwrap());
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = rng_from_seed(21);
        let cfg = MetricConfig { layers: vec![4, 3], margin: 3.0, ..Default::default() };
        for trial in 0..10 {
            let net = MetricNet::xavier(5, &cfg, &mut rng);
            let a: Vec<f64> = (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let b: Vec<f64> = (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let same = trial % 2 == 0;
            let mut g = net.gradient_zeros();
            net.pair_loss_grad(&a, &b, same, &mut g);
            let analytic = g.flatten();
            let p0 = net.params_flat();
            let h = 1e-5;
            for k in 0..p0.len() {
                let eval = |delta: f64| {
                    let mut n2 = net.clone();
                    let mut p = p0.clone();
                    p[k] += delta;
                    n2.set_params_flat(&p).unwrap();
                    contrastive_loss(&n2.embed(&a).unwrap(), &n2.embed(&b).unwrap(), same, net.margin).unwrap()
                };
                let num = (eval(h) - eval(-h)) / (2.0 * h);
                assert!(grad_close(analytic[k], num), "param {k}: {} vs {num}", analytic[k]);
            }
        }
    }

    fn blobs(seed: u64, n: usize) -> (Matrix, Vec<Label>) {
        let mut rng = rng_from_seed(seed);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..n {
            let fake = i % 2 == 0;
            let c = if fake { 1.0 } else { -1.0 };
            rows.push((0..4).map(|_| c + 0.8 * gaussian(&mut rng)).collect::<Vec<f64>>());
            labels.push(if fake { Label::Fake } else { Label::Real });
        }
        (Matrix::from_rows(&rows).unwrap(), labels)
    }

    #[test]
    fn training_separates_blobs() {
        let (x, labels) = blobs(8, 60);
        let cfg = MetricConfig { layers: vec![8, 4], epochs: 10, ..Default::default() };
        let net = train_metric_net(&x, &labels, &cfg).unwrap();
        let (bi, bx) = class_distance_stats(&x, &labels);
        let e = net.embed_batch(&x).unwrap();
        let (ai, ax) = class_distance_stats(&e, &labels);
        assert!(ai < ax);
        assert!(ai / ax < bi / bx);
        assert!(net.final_loss <= net.initial_loss);
        assert_eq!(net.epoch_loss.len(), 10);
        // strict mode reproducibility
        assert_eq!(net, train_metric_net(&x, &labels, &cfg).unwrap());
    }

    #[test]
    fn zero_learning_rate_leaves_parameters() {
        let (x, labels) = blobs(9, 20);
        let cfg = MetricConfig { layers: vec![6, 3], epochs: 3, learning_rate: 0.0, ..Default::default() };
        let net = train_metric_net(&x, &labels, &cfg).unwrap();
        let init = MetricNet::xavier(4, &cfg, &mut rng_from_seed(cfg.seed));
        assert_eq!(net.params_flat(), init.params_flat());
    }

    #[test]
    fn divergence_is_reported() {
        let (x, labels) = blobs(10, 20);
        let cfg = MetricConfig { layers: vec![3], epochs: 5, learning_rate: 1e200, lr_decay: 1.0, ..Default::default() };
        assert!(matches!(train_metric_net(&x, &labels, &cfg), Err(Error::Diverged(_))));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn loss_nonnegative_and_zero_iff(
                a in proptest::collection::vec(-5.0f64..5.0, 3),
                b in proptest::collection::vec(-5.0f64..5.0, 3),
                same: bool,
                margin in 0.01f64..5.0,
            ) {
                let l = contrastive_loss(&a, &b, same, margin).unwrap();
                prop_assert!(l >= 0.0);
                let d = euclidean(&a, &b);
                let zero = (same && d == 0.0) || (!same && d >= margin);
                prop_assert_eq!(l == 0.0, zero);
            }
        }
    }
}
