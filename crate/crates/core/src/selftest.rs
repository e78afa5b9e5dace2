//! Dataset-free oracle suites: each check compares a kernel against an
//! independent reference on random instances.

use std::collections::HashMap;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::classify::{ClassifierKind, FeatureSelector};
use crate::config::RunConfig;
use crate::corpus::Label;
use crate::harness::{evaluate, run_ablation, run_stream};
use crate::matrix::{euclidean, Matrix};
use crate::metric::{class_distance_stats, train_metric_net, MetricConfig, MetricNet};
use crate::position::dbscan;
use crate::principal::fit_pca;
use crate::rng::{rng_from_seed, stage_seed};
use crate::synth::{synthetic_corpus, SynthSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub id: u8,
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(id: u8, name: &str, passed: bool, detail: String) -> Self {
        Check {
            id,
            name: name.into(),
            passed,
            detail,
        }
    }

    pub fn line(&self) -> String {
        format!(
            "[{:>2}] {:<44} {}  {}",
            self.id,
            self.name,
            if self.passed { "PASS" } else { "FAIL" },
            self.detail
        )
    }
}

fn gaussian(rng: &mut impl Rng) -> f64 {
    let u: f64 = rng.gen_range(f64::EPSILON..1.0);
    let v: f64 = rng.gen();
    (-2.0 * u.ln()).sqrt() * (std::f64::consts::TAU * v).cos()
}

fn random_matrix(rng: &mut impl Rng, n: usize, d: usize, scale: f64) -> Matrix {
    let mut m = Matrix::zeros(n, d);
    for i in 0..n {
        for v in m.row_mut(i) {
            *v = scale * gaussian(rng);
        }
    }
    m
}

/// Contrastive pair-loss gradients against central differences.
pub fn check_contrastive_gradients(seed: u64) -> Check {
    const H: f64 = 1e-5;
    let mut rng = rng_from_seed(stage_seed(seed, "gradcheck"));
    let mut worst = 0.0f64;
    let mut failures = 0usize;
    let mut checked = 0usize;
    for case in 0..10 {
        let d = rng.gen_range(2..7);
        let cfg = MetricConfig {
            layers: vec![rng.gen_range(2..6), rng.gen_range(2..5)],
            margin: rng.gen_range(0.5..3.0),
            ..MetricConfig::default()
        };
        let mut net = MetricNet::xavier(d, &cfg, &mut rng);
        // nonzero biases so that no gradient entry is structurally zero
        let mut p = net.params_flat();
        p.iter_mut().for_each(|w| *w += 0.1 * gaussian(&mut rng));
        net.set_params_flat(&p).expect("same length");
        let a: Vec<f64> = (0..d).map(|_| gaussian(&mut rng)).collect();
        let b: Vec<f64> = (0..d).map(|_| gaussian(&mut rng)).collect();
        let same = case % 2 == 0;
        let mut g = net.gradient_zeros();
        net.pair_loss_grad(&a, &b, same, &mut g);
        let analytic = g.flatten();
        let mut probe = net.clone();
        for k in 0..p.len() {
            let mut loss_at = |delta: f64| {
                let mut q = p.clone();
                q[k] += delta;
                probe.set_params_flat(&q).expect("same length");
                let mut scratch = probe.gradient_zeros();
                probe.pair_loss_grad(&a, &b, same, &mut scratch)
            };
            let numeric = (loss_at(H) - loss_at(-H)) / (2.0 * H);
            let diff = (analytic[k] - numeric).abs();
            let scale = analytic[k].abs().max(numeric.abs());
            checked += 1;
            // entries that are zero up to rounding are compared absolutely
            if scale > 1e-6 {
                worst = worst.max(diff / scale);
                if diff > 1e-4 * scale {
                    failures += 1;
                }
            } else if diff > 1e-8 {
                failures += 1;
            }
        }
    }
    Check::new(
        7,
        "contrastive gradient vs finite differences",
        failures == 0,
        format!("10 nets, {checked} parameters, worst relative error {worst:.2e}"),
    )
}

/// PCA against a full-spectrum symmetric eigensolver.
pub fn check_pca_oracle(seed: u64) -> Check {
    let mut rng = rng_from_seed(stage_seed(seed, "pca-oracle"));
    let (mut worst_val, mut worst_vec) = (0.0f64, 0.0f64);
    for _ in 0..50 {
        let x = random_matrix(&mut rng, 20, 5, 1.0);
        let model = match fit_pca(&x, 5) {
            Ok(m) => m,
            Err(e) => return Check::new(8, "PCA vs dense eigensolver", false, e.to_string()),
        };
        let xm = DMatrix::from_row_slice(20, 5, x.as_slice());
        let mean = xm.row_mean();
        let mut centered = xm.clone();
        for mut r in centered.row_iter_mut() {
            r -= &mean;
        }
        let cov = centered.transpose() * &centered / 19.0;
        let eig = SymmetricEigen::new(cov);
        let mut order: Vec<usize> = (0..5).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
        for (c, &j) in order.iter().enumerate() {
            worst_val = worst_val.max((eig.eigenvalues[j].max(0.0) - model.eigenvalues[c]).abs());
            let reference = eig.eigenvectors.column(j);
            let ours = model.components.row(c);
            let plus = (0..5).map(|i| (ours[i] - reference[i]).abs()).fold(0.0, f64::max);
            let minus = (0..5).map(|i| (ours[i] + reference[i]).abs()).fold(0.0, f64::max);
            worst_vec = worst_vec.max(plus.min(minus));
        }
    }
    Check::new(
        8,
        "PCA vs dense eigensolver",
        worst_val <= 1e-6 && worst_vec <= 1e-6,
        format!("50 matrices 20x5, eigenvalue err {worst_val:.2e}, component err {worst_vec:.2e}"),
    )
}

/// Quadratic DBSCAN reference: connected components of core points, each
/// border point joined to the adjacent component with the smallest core
/// index. Labels are component roots.
pub fn reference_dbscan(points: &Matrix, eps: f64, min_pts: usize) -> Vec<Option<usize>> {
    let n = points.rows();
    let adj = |i: usize, j: usize| euclidean(points.row(i), points.row(j)) <= eps;
    let core: Vec<bool> = (0..n).map(|i| (0..n).filter(|&j| adj(i, j)).count() >= min_pts).collect();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while p[r] != r {
            r = p[r];
        }
        p[x] = r;
        r
    }
    for i in 0..n {
        for j in 0..n {
            if core[i] && core[j] && adj(i, j) {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    let root: Vec<usize> = (0..n).map(|i| find(&mut parent, i)).collect();
    (0..n)
        .map(|i| {
            if core[i] {
                Some(root[i])
            } else {
                (0..n).filter(|&j| core[j] && adj(i, j)).map(|j| root[j]).min()
            }
        })
        .collect()
}

/// Relabel clusters in order of first appearance.
pub fn canonical_labels(labels: &[Option<usize>]) -> Vec<Option<usize>> {
    let mut map = HashMap::new();
    labels
        .iter()
        .map(|l| {
            l.map(|c| {
                let next = map.len();
                *map.entry(c).or_insert(next)
            })
        })
        .collect()
}

pub fn check_dbscan_oracle(seed: u64) -> Check {
    let mut rng = rng_from_seed(stage_seed(seed, "dbscan-oracle"));
    let mut mismatches = 0;
    let mut clusters = 0;
    for _ in 0..100 {
        let n = rng.gen_range(1..=60);
        let d = rng.gen_range(1..=4);
        let x = random_matrix(&mut rng, n, d, 1.0);
        let eps = rng.gen_range(0.2..1.5);
        let min_pts = rng.gen_range(1..=6);
        match dbscan(&x, eps, min_pts) {
            Ok(a) => {
                clusters += a.k;
                if canonical_labels(&a.labels) != canonical_labels(&reference_dbscan(&x, eps, min_pts)) {
                    mismatches += 1;
                }
            }
            Err(_) => mismatches += 1,
        }
    }
    Check::new(
        9,
        "DBSCAN vs brute-force reference",
        mismatches == 0,
        format!("100 instances, {clusters} clusters total, {mismatches} mismatches"),
    )
}

pub fn check_metric_separation(seed: u64) -> Check {
    let mut rng = rng_from_seed(stage_seed(seed, "metric-blobs"));
    let n = 80;
    let mut x = Matrix::zeros(n, 4);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let fake = i % 2 == 0;
        for (j, v) in x.row_mut(i).iter_mut().enumerate() {
            let c = if fake == (j % 2 == 0) { 1.0 } else { -1.0 };
            *v = c + 0.8 * gaussian(&mut rng);
        }
        labels.push(if fake { Label::Fake } else { Label::Real });
    }
    let cfg = MetricConfig {
        layers: vec![16, 8],
        seed: stage_seed(seed, "metric-net"),
        ..MetricConfig::default()
    };
    let initial = MetricNet::xavier(4, &cfg, &mut rng_from_seed(cfg.seed));
    let ratio = |net: &MetricNet| {
        let (intra, inter) = class_distance_stats(&net.embed_batch(&x).expect("dims"), &labels);
        intra / inter
    };
    match train_metric_net(&x, &labels, &cfg) {
        Ok(net) => {
            let (before, after) = (ratio(&initial), ratio(&net));
            Check::new(
                10,
                "metric training tightens classes",
                after < before,
                format!("intra/inter ratio {before:.4} -> {after:.4}"),
            )
        }
        Err(e) => Check::new(10, "metric training tightens classes", false, e.to_string()),
    }
}

pub fn check_evaluate_oracle(seed: u64) -> Check {
    let mut rng = rng_from_seed(stage_seed(seed, "evaluate-oracle"));
    let lab = |b: bool| if b { Label::Fake } else { Label::Real };
    let mut bad = 0;
    for _ in 0..1000 {
        let n = rng.gen_range(1..100);
        let p: Vec<Label> = (0..n).map(|_| lab(rng.gen())).collect();
        let t: Vec<Label> = (0..n).map(|_| lab(rng.gen())).collect();
        let mut counts = [0usize; 4];
        for i in 0..n {
            let k = match (p[i], t[i]) {
                (Label::Fake, Label::Fake) => 0,
                (Label::Fake, Label::Real) => 1,
                (Label::Real, Label::Real) => 2,
                (Label::Real, Label::Fake) => 3,
            };
            counts[k] += 1;
        }
        let ok = evaluate(&p, &t).is_ok_and(|r| {
            [r.tp, r.fp, r.tn, r.fn_] == counts
                && r.accuracy == (counts[0] + counts[2]) as f64 / n as f64
                && r.is_consistent(1e-12)
        });
        if !ok {
            bad += 1;
        }
    }
    Check::new(
        11,
        "evaluate vs brute-force confusion counter",
        bad == 0,
        format!("1000 cases, {bad} mismatches"),
    )
}

/// Two strict runs on a synthetic corpus must produce the same bytes.
pub fn check_rerun_determinism(seed: u64) -> Check {
    let corpus = synthetic_corpus(&SynthSpec {
        months: 4,
        per_month: 50,
        seed: stage_seed(seed, "synthetic-corpus"),
        ..SynthSpec::default()
    });
    let mut cfg = RunConfig {
        seed,
        strict: true,
        features: vec![FeatureSelector::all(), "text".parse().expect("valid selector")],
        classifiers: ClassifierKind::ALL.to_vec(),
        ..RunConfig::smoke()
    };
    cfg.split.months = 2;
    let once = || -> crate::error::Result<(String, String)> {
        Ok((run_ablation(&corpus, &cfg)?.to_json()?, run_stream(&corpus, &cfg)?.to_csv()))
    };
    match (once(), once()) {
        (Ok(a), Ok(b)) => Check::new(
            12,
            "strict rerun is byte-identical",
            a == b,
            format!("ablation {} bytes, stream {} bytes", a.0.len(), a.1.len()),
        ),
        (Err(e), _) | (_, Err(e)) => Check::new(12, "strict rerun is byte-identical", false, e.to_string()),
    }
}

/// Every dataset-free check, in criterion order.
pub fn run_selftest(seed: u64) -> Vec<Check> {
    vec![
        check_contrastive_gradients(seed),
        check_pca_oracle(seed),
        check_dbscan_oracle(seed),
        check_metric_separation(seed),
        check_evaluate_oracle(seed),
        check_rerun_determinism(seed),
    ]
}
