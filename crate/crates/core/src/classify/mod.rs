//! Feature concatenation and the four classifier kinds.

mod features;
mod forest;
mod gbdt;
mod logistic;
mod mlp;
pub mod tree;

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use features::{
    concat_features, FeatureBundle, FeaturePart, FeatureSelector, FeatureSet, Standardizer,
};
pub use forest::{fit_forest, ForestConfig, ForestModel};
pub use gbdt::{fit_gbdt, GbdtConfig, GbdtModel};
pub use logistic::{fit_logistic, LogisticConfig, LogisticModel};
pub use mlp::{fit_mlp, MlpConfig, MlpModel};

use crate::corpus::Label;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub const MIN_TRAIN_ROWS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassifierKind {
    Lr,
    Mlp,
    Rf,
    Gbdt,
}

impl ClassifierKind {
    pub const ALL: [ClassifierKind; 4] = [
        ClassifierKind::Lr,
        ClassifierKind::Mlp,
        ClassifierKind::Rf,
        ClassifierKind::Gbdt,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ClassifierKind::Lr => "lr",
            ClassifierKind::Mlp => "mlp",
            ClassifierKind::Rf => "rf",
            ClassifierKind::Gbdt => "gbdt",
        }
    }
}

impl fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ClassifierKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_lowercase().as_str() {
            "lr" | "logistic" => Ok(ClassifierKind::Lr),
            "mlp" => Ok(ClassifierKind::Mlp),
            "rf" | "forest" => Ok(ClassifierKind::Rf),
            "gbdt" | "gbm" => Ok(ClassifierKind::Gbdt),
            other => Err(Error::InvalidArgument(format!("unknown classifier '{other}'"))),
        }
    }
}

/// Hyperparameters for every kind; only the block matching the trained kind
/// is used.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifierConfig {
    pub lr: LogisticConfig,
    pub mlp: MlpConfig,
    pub rf: ForestConfig,
    pub gbdt: GbdtConfig,
}

impl ClassifierConfig {
    /// Reseed every kind from one value.
    pub fn with_seed(mut self, seed: u64) -> Self {
        use crate::rng::stage_seed;
        self.lr.seed = stage_seed(seed, "lr");
        self.mlp.seed = stage_seed(seed, "mlp");
        self.rf.seed = stage_seed(seed, "rf");
        self.gbdt.seed = stage_seed(seed, "gbdt");
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ClassifierModel {
    Lr(LogisticModel),
    Mlp(MlpModel),
    Rf(ForestModel),
    Gbdt(GbdtModel),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedClassifier {
    pub kind: ClassifierKind,
    pub feature_len: usize,
    pub config: ClassifierConfig,
    pub model: ClassifierModel,
}

pub fn train_classifier(
    kind: ClassifierKind,
    x: &Matrix,
    y: &[Label],
    config: &ClassifierConfig,
) -> Result<TrainedClassifier> {
    if x.rows() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.rows(),
            got: y.len(),
        });
    }
    let fake = y.iter().filter(|l| l.is_fake()).count();
    if fake == 0 || fake == y.len() {
        return Err(Error::SingleClass {
            fake,
            real: y.len() - fake,
        });
    }
    if y.len() < MIN_TRAIN_ROWS {
        return Err(Error::InvalidArgument(format!(
            "need at least {MIN_TRAIN_ROWS} training rows, got {}",
            y.len()
        )));
    }
    if !x.is_finite() {
        return Err(Error::NonFinite("classifier training features"));
    }
    let t: Vec<f64> = y.iter().map(|l| l.target()).collect();
    let model = match kind {
        ClassifierKind::Lr => ClassifierModel::Lr(fit_logistic(x, &t, &config.lr)),
        ClassifierKind::Mlp => ClassifierModel::Mlp(fit_mlp(x, &t, &config.mlp)),
        ClassifierKind::Rf => ClassifierModel::Rf(fit_forest(x, &t, &config.rf)),
        ClassifierKind::Gbdt => ClassifierModel::Gbdt(fit_gbdt(x, &t, &config.gbdt)),
    };
    Ok(TrainedClassifier {
        kind,
        feature_len: x.cols(),
        config: config.clone(),
        model,
    })
}

impl TrainedClassifier {
    pub fn score(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.feature_len {
            return Err(Error::DimensionMismatch {
                expected: self.feature_len,
                got: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("classifier input"));
        }
        Ok(match &self.model {
            ClassifierModel::Lr(m) => m.score(x),
            ClassifierModel::Mlp(m) => m.score(x),
            ClassifierModel::Rf(m) => m.score(x),
            ClassifierModel::Gbdt(m) => m.score(x),
        })
    }
}

fn label_of(score: f64) -> Label {
    if score >= 0.5 {
        Label::Fake
    } else {
        Label::Real
    }
}

pub fn predict(model: &TrainedClassifier, x: &[f64]) -> Result<(Label, f64)> {
    let s = model.score(x)?;
    Ok((label_of(s), s))
}

pub fn predict_batch(model: &TrainedClassifier, x: &Matrix) -> Result<Vec<(Label, f64)>> {
    (0..x.rows())
        .into_par_iter()
        .map(|i| predict(model, x.row(i)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use rand::Rng;

    /// Box-Muller draw.
    fn normal(rng: &mut impl Rng) -> f64 {
        let u: f64 = rng.gen_range(f64::EPSILON..1.0);
        let v: f64 = rng.gen();
        (-2.0 * u.ln()).sqrt() * (std::f64::consts::TAU * v).cos()
    }

    fn blobs(n: usize, seed: u64) -> (Matrix, Vec<Label>) {
        let mut rng = rng_from_seed(seed);
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for i in 0..n {
            let fake = i % 2 == 0;
            let c = if fake { 2.0 } else { -2.0 };
            rows.push([c + 0.5 * normal(&mut rng), c + 0.5 * normal(&mut rng)]);
            y.push(if fake { Label::Fake } else { Label::Real });
        }
        (Matrix::from_rows(&rows).unwrap(), y)
    }

    fn xor(n: usize, seed: u64) -> (Matrix, Vec<Label>) {
        let mut rng = rng_from_seed(seed);
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for _ in 0..n {
            let a: f64 = rng.gen_range(-1.0..1.0);
            let b: f64 = rng.gen_range(-1.0..1.0);
            rows.push([a, b]);
            y.push(if (a > 0.0) != (b > 0.0) { Label::Fake } else { Label::Real });
        }
        (Matrix::from_rows(&rows).unwrap(), y)
    }

    fn accuracy(m: &TrainedClassifier, x: &Matrix, y: &[Label]) -> f64 {
        let p = predict_batch(m, x).unwrap();
        p.iter().zip(y).filter(|((l, _), t)| l == *t).count() as f64 / y.len() as f64
    }

    fn fast() -> ClassifierConfig {
        let mut c = ClassifierConfig::default();
        c.rf.trees = 30;
        c.gbdt.rounds = 50;
        c.mlp.epochs = 40;
        c
    }

    #[test]
    fn lr_separates_blobs() {
        let (x, y) = blobs(300, 1);
        let m = train_classifier(ClassifierKind::Lr, &x, &y, &ClassifierConfig::default()).unwrap();
        assert!(accuracy(&m, &x, &y) >= 0.99);
    }

    #[test]
    fn every_kind_fits_blobs() {
        let (x, y) = blobs(300, 2);
        for kind in ClassifierKind::ALL {
            let m = train_classifier(kind, &x, &y, &fast()).unwrap();
            let acc = accuracy(&m, &x, &y);
            assert!(acc >= 0.95, "{kind}: {acc}");
        }
    }

    #[test]
    fn forest_handles_xor_where_lr_cannot() {
        let (x, y) = xor(400, 3);
        let rf = train_classifier(ClassifierKind::Rf, &x, &y, &fast()).unwrap();
        let lr = train_classifier(ClassifierKind::Lr, &x, &y, &fast()).unwrap();
        assert!(accuracy(&rf, &x, &y) >= 0.95);
        assert!(accuracy(&lr, &x, &y) <= 0.6);
    }

    #[test]
    fn precondition_errors() {
        let (x, _) = blobs(20, 4);
        let same = vec![Label::Fake; 20];
        assert!(matches!(
            train_classifier(ClassifierKind::Lr, &x, &same, &fast()),
            Err(Error::SingleClass { .. })
        ));
        let (small, ys) = blobs(6, 4);
        assert!(train_classifier(ClassifierKind::Lr, &small, &ys, &fast()).is_err());
        let (mut bad, yb) = blobs(20, 5);
        bad[(3, 1)] = f64::NAN;
        assert!(matches!(
            train_classifier(ClassifierKind::Rf, &bad, &yb, &fast()),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn predict_checks_length_and_is_pure() {
        let (x, y) = blobs(40, 6);
        let m = train_classifier(ClassifierKind::Mlp, &x, &y, &fast()).unwrap();
        assert!(matches!(predict(&m, &[1.0]), Err(Error::DimensionMismatch { .. })));
        assert_eq!(predict(&m, &[0.3, -0.1]).unwrap(), predict(&m, &[0.3, -0.1]).unwrap());
    }

    #[test]
    fn zero_weight_lr_scores_half() {
        let m = TrainedClassifier {
            kind: ClassifierKind::Lr,
            feature_len: 3,
            config: ClassifierConfig::default(),
            model: ClassifierModel::Lr(LogisticModel::zeros(3)),
        };
        let mut rng = rng_from_seed(7);
        for _ in 0..20 {
            let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-100.0..100.0)).collect();
            assert_eq!(predict(&m, &x).unwrap(), (Label::Fake, 0.5));
        }
    }

    #[test]
    fn lr_ignores_shifts_on_zero_weight_feature() {
        let (x, y) = blobs(100, 8);
        let mut m = train_classifier(ClassifierKind::Lr, &x, &y, &fast()).unwrap();
        if let ClassifierModel::Lr(lr) = &mut m.model {
            lr.weights[1] = 0.0;
        }
        for i in 0..x.rows() {
            let mut v = x.row(i).to_vec();
            let before = predict(&m, &v).unwrap();
            v[1] += 123.456;
            assert_eq!(predict(&m, &v).unwrap(), before);
        }
    }

    #[test]
    fn forest_score_is_vote_fraction_and_order_free() {
        let (x, y) = xor(200, 9);
        let m = train_classifier(ClassifierKind::Rf, &x, &y, &fast()).unwrap();
        let ClassifierModel::Rf(forest) = &m.model else { unreachable!() };
        let mut reversed = forest.clone();
        reversed.trees.reverse();
        for i in 0..x.rows() {
            let xi = x.row(i);
            let mut votes = 0usize;
            for t in &forest.trees {
                // walk the tree by hand
                let mut k = 0;
                let leaf = loop {
                    match t.nodes[k] {
                        tree::Node::Leaf { value } => break value,
                        tree::Node::Split { feature, threshold, left, right } => {
                            k = if xi[feature] <= threshold { left } else { right }
                        }
                    }
                };
                votes += usize::from(leaf >= 0.5);
            }
            let s = predict(&m, xi).unwrap().1;
            assert_eq!(s, votes as f64 / forest.trees.len() as f64);
            assert_eq!(reversed.score(xi), s);
        }
    }

    #[test]
    fn gbdt_loss_never_increases() {
        let (x, y) = xor(300, 10);
        let m = train_classifier(ClassifierKind::Gbdt, &x, &y, &ClassifierConfig::default()).unwrap();
        let ClassifierModel::Gbdt(g) = &m.model else { unreachable!() };
        assert_eq!(g.train_loss.len(), 201);
        assert!(g.train_loss.windows(2).all(|w| w[1] <= w[0]));
        assert!(g.train_loss.last().unwrap() < &(0.5 * g.train_loss[0]));
    }

    #[test]
    fn seeded_training_is_deterministic() {
        let (x, y) = blobs(80, 11);
        for kind in ClassifierKind::ALL {
            let a = train_classifier(kind, &x, &y, &fast()).unwrap();
            let b = train_classifier(kind, &x, &y, &fast()).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn model_json_round_trip() {
        let (x, y) = blobs(60, 12);
        for kind in ClassifierKind::ALL {
            let m = train_classifier(kind, &x, &y, &fast()).unwrap();
            let back: TrainedClassifier = serde_json::from_str(&serde_json::to_string(&m).unwrap()).unwrap();
            assert_eq!(back, m);
        }
    }
}
