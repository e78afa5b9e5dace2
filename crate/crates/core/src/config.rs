//! Run configuration: one serializable value that fully determines a run.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::classify::{ClassifierKind, FeatureSelector};
use crate::corpus::{DEFAULT_MIN_MONTH_ARTICLES, DEFAULT_TRAIN_RATIO};
use crate::error::{Error, Result};
use crate::harness::PipelineConfig;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DataConfig {
    /// CSV of fake articles (header title,text,subject,date).
    pub fake: Option<PathBuf>,
    /// CSV of real articles.
    pub real: Option<PathBuf>,
    /// Prepared corpus JSON; used instead of the CSVs when set.
    pub corpus: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitConfig {
    pub train_ratio: f64,
    pub min_month_articles: usize,
    /// Streaming rounds; needs one more usable month than this.
    pub months: usize,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            train_ratio: DEFAULT_TRAIN_RATIO,
            min_month_articles: DEFAULT_MIN_MONTH_ARTICLES,
            months: 14,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub data: DataConfig,
    pub seed: u64,
    /// Single worker thread and seeded everything; reports are byte-stable.
    pub strict: bool,
    /// Worker threads; 0 lets the runtime decide. Ignored in strict mode.
    pub jobs: usize,
    pub out_dir: PathBuf,
    pub run_id: Option<String>,
    /// Feature rows evaluated by the ablation.
    pub features: Vec<FeatureSelector>,
    pub classifiers: Vec<ClassifierKind>,
    /// Classifier used for both series of the streaming experiment.
    pub stream_classifier: ClassifierKind,
    /// Balanced subsample size applied after loading, for smoke runs.
    pub subsample: Option<usize>,
    pub split: SplitConfig,
    pub pipeline: PipelineConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            data: DataConfig::default(),
            seed: 42,
            strict: false,
            jobs: 0,
            out_dir: PathBuf::from("reports"),
            run_id: None,
            features: FeatureSelector::ablation_rows(),
            classifiers: ClassifierKind::ALL.to_vec(),
            stream_classifier: ClassifierKind::Rf,
            subsample: None,
            split: SplitConfig::default(),
            pipeline: PipelineConfig::default(),
        }
    }
}

impl RunConfig {
    /// Small, fast settings for synthetic corpora and smoke tests.
    pub fn smoke() -> Self {
        let mut c = RunConfig::default();
        let p = &mut c.pipeline;
        p.word2vec.dim = 16;
        p.word2vec.epochs = 3;
        p.word2vec.min_count = 2;
        p.word2vec.subsample = 0.0;
        p.metric.layers = vec![16, 8];
        p.metric.epochs = 5;
        p.classifier.lr.epochs = 50;
        p.classifier.mlp.epochs = 30;
        p.classifier.mlp.hidden = 16;
        p.classifier.rf.trees = 25;
        p.classifier.gbdt.rounds = 40;
        c.split.min_month_articles = 20;
        c
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        if self.features.is_empty() {
            return bad("at least one feature selector is required");
        }
        if self.classifiers.is_empty() {
            return bad("at least one classifier kind is required");
        }
        if !(self.split.train_ratio > 0.0 && self.split.train_ratio < 1.0) {
            return bad("split.train_ratio must lie in (0,1)");
        }
        if self.seed > i64::MAX as u64 {
            return bad("seed must fit in 63 bits");
        }
        if self.split.months == 0 {
            return bad("split.months must be positive");
        }
        if self.subsample.is_some_and(|n| n < 20) {
            return bad("subsample must keep at least 20 articles");
        }
        Ok(())
    }

    /// Stage seeds derived from the master seed, strict mode pinned to one
    /// worker. The result is what gets echoed and what a rerun consumes.
    pub fn resolved(&self) -> Result<RunConfig> {
        self.validate()?;
        let mut c = self.clone();
        c.pipeline = c.pipeline.reseeded(c.seed);
        if c.strict {
            c.jobs = 1;
        }
        if c.run_id.is_none() {
            c.run_id = Some(format!("seed-{}", c.seed));
        }
        Ok(c)
    }

    pub fn run_dir(&self) -> PathBuf {
        let id = self.run_id.clone().unwrap_or_else(|| format!("seed-{}", self.seed));
        self.out_dir.join(id)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn resolution_is_idempotent() {
        let c = RunConfig { strict: true, jobs: 8, ..RunConfig::default() };
        let r = c.resolved().unwrap();
        assert_eq!(r.jobs, 1);
        assert_eq!(r.resolved().unwrap(), r);
        assert_ne!(r.pipeline.word2vec.seed, r.pipeline.metric.seed);
    }

    #[test]
    fn json_round_trip_and_defaults() {
        let c = RunConfig::smoke().resolved().unwrap();
        let back: RunConfig = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
        let partial: RunConfig = serde_json::from_str(r#"{"seed": 7, "features": ["text+metric"]}"#).unwrap();
        assert_eq!(partial.seed, 7);
        assert_eq!(partial.features.len(), 1);
        assert_eq!(partial.pipeline, PipelineConfig::default());
    }

    #[test]
    fn validation() {
        let mut c = RunConfig::default();
        c.split.train_ratio = 1.0;
        assert!(c.resolved().is_err());
        let c = RunConfig { classifiers: vec![], ..RunConfig::default() };
        assert!(c.validate().is_err());
    }
}
