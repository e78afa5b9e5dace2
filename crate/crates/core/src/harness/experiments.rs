use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::metrics::{evaluate, EvalReport};
use super::pipeline::FeaturePipeline;
use crate::classify::{
    predict_batch, train_classifier, ClassifierConfig, ClassifierKind, FeatureSelector, FeatureSet, Standardizer,
};
use crate::config::RunConfig;
use crate::corpus::{month_census, split_monthly, split_random, Corpus, Label, MonthCensus, SplitSpec};
use crate::error::{Error, Result};
use crate::rng::{rng_from_seed, stage_seed};

/// Toolkit version embedded in every report. A build can append a
/// `git describe` string through `SWARMFEAT_GIT_DESCRIBE`.
pub fn version() -> String {
    match option_env!("SWARMFEAT_GIT_DESCRIBE") {
        Some(d) if !d.is_empty() => format!("swarmfeat {} ({d})", env!("CARGO_PKG_VERSION")),
        _ => format!("swarmfeat {}", env!("CARGO_PKG_VERSION")),
    }
}

/// Published accuracies of earlier TF-IDF n-gram baselines on the same
/// corpus. Printed for comparison only.
pub const PRIOR_WORK: [(&str, f64); 5] = [
    ("TF-IDF n-gram + KNN", 0.83),
    ("TF-IDF n-gram + DT", 0.89),
    ("TF-IDF n-gram + LR", 0.89),
    ("TF-IDF n-gram + SGD", 0.89),
    ("TF-IDF n-gram + LSVM", 0.92),
];

pub fn prior_work_best() -> f64 {
    PRIOR_WORK.iter().map(|p| p.1).fold(0.0, f64::max)
}

/// Equal numbers of fake and real articles, chosen by seed, corpus order kept.
pub fn balanced_subsample(corpus: &Corpus, n: usize, seed: u64) -> Corpus {
    let mut rng = rng_from_seed(seed);
    let mut keep = vec![false; corpus.len()];
    for (label, quota) in [(Label::Fake, n / 2), (Label::Real, n - n / 2)] {
        let mut idx: Vec<usize> = (0..corpus.len()).filter(|&i| corpus.articles[i].label == label).collect();
        idx.shuffle(&mut rng);
        for &i in idx.iter().take(quota) {
            keep[i] = true;
        }
    }
    corpus.subset((0..corpus.len()).filter(|&i| keep[i]))
}

fn prepared(corpus: &Corpus, cfg: &RunConfig) -> Corpus {
    match cfg.subsample {
        Some(n) if n < corpus.len() => balanced_subsample(corpus, n, stage_seed(cfg.seed, "subsample")),
        _ => corpus.clone(),
    }
}

fn hyperparameters(kind: ClassifierKind, c: &ClassifierConfig) -> serde_json::Value {
    let v = match kind {
        ClassifierKind::Lr => serde_json::to_value(&c.lr),
        ClassifierKind::Mlp => serde_json::to_value(&c.mlp),
        ClassifierKind::Rf => serde_json::to_value(&c.rf),
        ClassifierKind::Gbdt => serde_json::to_value(&c.gbdt),
    };
    v.unwrap_or(serde_json::Value::Null)
}

/// Standardize on the training rows, fit, and score the test rows.
pub fn evaluate_cell(
    train: (&FeatureSet, &[Label]),
    test: (&FeatureSet, &[Label]),
    sel: &FeatureSelector,
    kind: ClassifierKind,
    ccfg: &ClassifierConfig,
    split: &str,
) -> Result<EvalReport> {
    let raw = train.0.raw(sel)?;
    let scaler = Standardizer::fit(&raw);
    let model = train_classifier(kind, &scaler.apply(&raw)?, train.1, ccfg)?;
    let preds: Vec<Label> = predict_batch(&model, &scaler.apply(&test.0.raw(sel)?)?)?
        .into_iter()
        .map(|p| p.0)
        .collect();
    Ok(evaluate(&preds, test.1)?.with_context(
        split,
        json!({
            "classifier": kind,
            "features": sel,
            "feature_len": raw.cols(),
            "hyperparameters": hyperparameters(kind, ccfg),
        }),
    ))
}

/// Shape of the fitted upstream stages, for the record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpstreamSummary {
    pub vocabulary: usize,
    pub text_dim: usize,
    pub pca_eigenvalues: Vec<f64>,
    pub metric_initial_loss: f64,
    pub metric_final_loss: f64,
    pub clusters: usize,
    pub cluster_sizes: Vec<usize>,
    pub cluster_noise: usize,
    pub eps: f64,
}

impl UpstreamSummary {
    fn of(p: &FeaturePipeline) -> Self {
        UpstreamSummary {
            vocabulary: p.word2vec.vocabulary.len(),
            text_dim: p.word2vec.dim(),
            pca_eigenvalues: p.pca.eigenvalues.clone(),
            metric_initial_loss: p.metric.initial_loss,
            metric_final_loss: p.metric.final_loss,
            clusters: p.position.k(),
            cluster_sizes: p.position.sizes.clone(),
            cluster_noise: p.position.noise,
            eps: p.position.eps,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub features: FeatureSelector,
    pub classifier: ClassifierKind,
    pub report: EvalReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorWork {
    pub approach: String,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationResult {
    pub version: String,
    pub config: serde_json::Value,
    pub split: String,
    pub train_size: usize,
    pub test_size: usize,
    pub upstream: UpstreamSummary,
    pub rows: Vec<AblationRow>,
    pub prior_work: Vec<PriorWork>,
}

impl AblationResult {
    pub fn get(&self, sel: &FeatureSelector, kind: ClassifierKind) -> Option<&EvalReport> {
        self.rows
            .iter()
            .find(|r| &r.features == sel && r.classifier == kind)
            .map(|r| &r.report)
    }

    /// Best accuracy over classifier kinds for one feature row.
    pub fn best(&self, sel: &FeatureSelector) -> Option<&AblationRow> {
        self.rows
            .iter()
            .filter(|r| &r.features == sel)
            .max_by(|a, b| a.report.accuracy.total_cmp(&b.report.accuracy))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{}", self.version);
        let _ = writeln!(s, "split: {} (train {}, test {})", self.split, self.train_size, self.test_size);
        let _ = writeln!(
            s,
            "upstream: vocab {}, dim {}, clusters {} (noise {}, eps {:.4})\n",
            self.upstream.vocabulary,
            self.upstream.text_dim,
            self.upstream.clusters,
            self.upstream.cluster_noise,
            self.upstream.eps
        );
        let _ = writeln!(
            s,
            "{:<28} {:<5} {:>9} {:>9} {:>9} {:>9} {:>7} {:>7} {:>7} {:>7}",
            "features", "clf", "accuracy", "precision", "recall", "f1", "tp", "fp", "tn", "fn"
        );
        for r in &self.rows {
            let e = &r.report;
            let _ = writeln!(
                s,
                "{:<28} {:<5} {:>8.2}% {:>8.2}% {:>8.2}% {:>8.2}% {:>7} {:>7} {:>7} {:>7}",
                r.features.to_string(),
                r.classifier.name(),
                100.0 * e.accuracy,
                100.0 * e.precision,
                100.0 * e.recall,
                100.0 * e.f1,
                e.tp,
                e.fp,
                e.tn,
                e.fn_
            );
        }
        let _ = writeln!(s, "\ncomparison with earlier baselines (accuracy):");
        for p in &self.prior_work {
            let _ = writeln!(s, "  {:<34} {:>7.2}%  (cited)", p.approach, 100.0 * p.accuracy);
        }
        for sel in [FeatureSelector::only(crate::classify::FeaturePart::Text), FeatureSelector::all()] {
            if let Some(r) = self.best(&sel) {
                let label = format!("this run, {} ({})", sel, r.classifier);
                let _ = writeln!(s, "  {:<34} {:>7.2}%", label, 100.0 * r.report.accuracy);
            }
        }
        s
    }
}

/// Random 70/30-style split, upstream stages fitted once on the training
/// half, then every (feature row, classifier) cell.
pub fn run_ablation(corpus: &Corpus, cfg: &RunConfig) -> Result<AblationResult> {
    let cfg = cfg.resolved()?;
    let corpus = prepared(corpus, &cfg);
    corpus.ensure_both_classes()?;
    let spec = SplitSpec::random(cfg.split.train_ratio, stage_seed(cfg.seed, "split"));
    let (train, test) = split_random(&corpus, &spec)?;
    let pipeline = FeaturePipeline::fit(&train, &cfg.pipeline)?;
    pipeline.audit(&test)?;
    let train_fs = pipeline.features(&train.articles)?;
    let test_fs = pipeline.features(&test.articles)?;
    let (train_y, test_y) = (train.labels(), test.labels());
    let split = format!(
        "random {:.0}/{:.0}, seed {}",
        100.0 * cfg.split.train_ratio,
        100.0 * (1.0 - cfg.split.train_ratio),
        spec.seed
    );
    let cells: Vec<(FeatureSelector, ClassifierKind)> = cfg
        .features
        .iter()
        .flat_map(|s| cfg.classifiers.iter().map(move |k| (s.clone(), *k)))
        .collect();
    let rows = cells
        .into_par_iter()
        .map(|(sel, kind)| {
            let report = evaluate_cell(
                (&train_fs, &train_y),
                (&test_fs, &test_y),
                &sel,
                kind,
                &cfg.pipeline.classifier,
                &split,
            )?;
            Ok(AblationRow {
                features: sel,
                classifier: kind,
                report,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(AblationResult {
        version: version(),
        config: serde_json::to_value(&cfg)?,
        split,
        train_size: train.len(),
        test_size: test.len(),
        upstream: UpstreamSummary::of(&pipeline),
        rows,
        prior_work: PRIOR_WORK
            .iter()
            .map(|(a, acc)| PriorWork {
                approach: a.to_string(),
                accuracy: *acc,
            })
            .collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamMonth {
    pub month_index: usize,
    pub train_from: String,
    pub train_to: String,
    pub test_month: String,
    pub train_size: usize,
    pub test_size: usize,
    pub baseline: EvalReport,
    pub full: EvalReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamResult {
    pub version: String,
    pub config: serde_json::Value,
    pub classifier: ClassifierKind,
    pub census: MonthCensus,
    pub months: Vec<StreamMonth>,
}

impl StreamResult {
    /// Months where the full feature set is at least as accurate as text.
    pub fn full_wins(&self) -> usize {
        self.months
            .iter()
            .filter(|m| m.full.accuracy >= m.baseline.accuracy)
            .count()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(
            "month_index,train_from,train_to,test_month,train_size,test_size,\
             baseline_accuracy,baseline_f1,full_accuracy,full_f1\n",
        );
        for m in &self.months {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{},{}",
                m.month_index,
                m.train_from,
                m.train_to,
                m.test_month,
                m.train_size,
                m.test_size,
                m.baseline.accuracy,
                m.baseline.f1,
                m.full.accuracy,
                m.full.f1
            );
        }
        s
    }

    pub fn render(&self) -> String {
        let mut s = format!("{}\nclassifier: {}\n{}\n", self.version, self.classifier, self.census.render());
        let _ = writeln!(
            s,
            "{:>3} {:>8} {:>8} {:>7} {:>7} {:>9} {:>9} {:>9} {:>9}",
            "m", "through", "test", "train", "test_n", "base_acc", "base_f1", "full_acc", "full_f1"
        );
        for m in &self.months {
            let _ = writeln!(
                s,
                "{:>3} {:>8} {:>8} {:>7} {:>7} {:>8.2}% {:>8.2}% {:>8.2}% {:>8.2}%",
                m.month_index,
                m.train_to,
                m.test_month,
                m.train_size,
                m.test_size,
                100.0 * m.baseline.accuracy,
                100.0 * m.baseline.f1,
                100.0 * m.full.accuracy,
                100.0 * m.full.f1
            );
        }
        let _ = writeln!(s, "full >= baseline in {} of {} months", self.full_wins(), self.months.len());
        s
    }
}

/// Cumulative monthly retraining: for each round every stage is refitted on
/// the months seen so far and scored on the next month.
pub fn run_stream(corpus: &Corpus, cfg: &RunConfig) -> Result<StreamResult> {
    let cfg = cfg.resolved()?;
    let corpus = prepared(corpus, &cfg);
    let census = month_census(&corpus, cfg.split.min_month_articles);
    let rounds = cfg.split.months;
    if census.usable.len() < rounds + 1 {
        return Err(Error::TooFewMonths {
            needed: rounds + 1,
            found: census.usable.len(),
            census: census.render(),
        });
    }
    let text = FeatureSelector::only(crate::classify::FeaturePart::Text);
    let all = FeatureSelector::all();
    let kind = cfg.stream_classifier;
    let mut months = Vec::with_capacity(rounds);
    for m in 1..=rounds {
        let spec = SplitSpec::monthly(m, cfg.split.min_month_articles);
        let (train, test) = split_monthly(&corpus, &spec)?;
        let pipeline = FeaturePipeline::fit(&train, &cfg.pipeline)?;
        pipeline.audit(&test)?;
        let train_fs = pipeline.features(&train.articles)?;
        let test_fs = pipeline.features(&test.articles)?;
        let (train_y, test_y) = (train.labels(), test.labels());
        let split = format!("months 1..={m} -> {}", census.usable[m]);
        let (baseline, full) = rayon::join(
            || evaluate_cell((&train_fs, &train_y), (&test_fs, &test_y), &text, kind, &cfg.pipeline.classifier, &split),
            || evaluate_cell((&train_fs, &train_y), (&test_fs, &test_y), &all, kind, &cfg.pipeline.classifier, &split),
        );
        months.push(StreamMonth {
            month_index: m,
            train_from: census.usable[0].to_string(),
            train_to: census.usable[m - 1].to_string(),
            test_month: census.usable[m].to_string(),
            train_size: train.len(),
            test_size: test.len(),
            baseline: baseline?,
            full: full?,
        });
    }
    Ok(StreamResult {
        version: version(),
        config: serde_json::to_value(&cfg)?,
        classifier: kind,
        census,
        months,
    })
}

fn write(path: PathBuf, contents: &str) -> Result<PathBuf> {
    fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Writes `ablation.json` and `ablation.txt`.
pub fn write_ablation(dir: &Path, r: &AblationResult) -> Result<Vec<PathBuf>> {
    ensure_dir(dir)?;
    Ok(vec![
        write(dir.join("ablation.json"), &r.to_json()?)?,
        write(dir.join("ablation.txt"), &r.render())?,
    ])
}

/// Writes `stream.json`, `stream.csv` and `stream.txt`.
pub fn write_stream(dir: &Path, r: &StreamResult) -> Result<Vec<PathBuf>> {
    ensure_dir(dir)?;
    Ok(vec![
        write(dir.join("stream.json"), &r.to_json()?)?,
        write(dir.join("stream.csv"), &r.to_csv())?,
        write(dir.join("stream.txt"), &r.render())?,
    ])
}
