use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::classify::{ClassifierConfig, FeatureSet};
use crate::corpus::{Corpus, NewsArticle};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::metric::{train_metric_net, MetricConfig, MetricNet};
use crate::position::{fit_position_model, position_features, suggest_eps, PositionModel, SwarmEncoding};
use crate::principal::{fit_pca, PcaModel, DEFAULT_COMPONENTS};
use crate::rng::stage_seed;
use crate::text::{doc_embeddings, tokenize, train_word2vec, Word2VecConfig, WordEmbeddingModel};

/// Which embedding DBSCAN clusters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClusterBasis {
    Text,
    #[default]
    Metric,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PositionConfig {
    pub min_pts: usize,
    /// Fixed radius; `None` picks the k-distance knee with `k = min_pts`.
    pub eps: Option<f64>,
    pub basis: ClusterBasis,
    pub encoding: SwarmEncoding,
    /// Times the radius may be doubled when every point comes out as noise.
    pub eps_doublings: u32,
}

impl Default for PositionConfig {
    fn default() -> Self {
        PositionConfig {
            min_pts: crate::position::DEFAULT_MIN_PTS,
            eps: None,
            basis: ClusterBasis::Metric,
            encoding: SwarmEncoding::Numeric,
            eps_doublings: 6,
        }
    }
}

/// Hyperparameters for every fitted stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub word2vec: Word2VecConfig,
    pub pca_components: usize,
    pub metric: MetricConfig,
    pub position: PositionConfig,
    pub classifier: ClassifierConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            word2vec: Word2VecConfig::default(),
            pca_components: DEFAULT_COMPONENTS,
            metric: MetricConfig::default(),
            position: PositionConfig::default(),
            classifier: ClassifierConfig::default(),
        }
    }
}

impl PipelineConfig {
    /// Derive every stage seed from one master seed.
    pub fn reseeded(mut self, master: u64) -> Self {
        self.word2vec.seed = stage_seed(master, "word2vec");
        self.metric.seed = stage_seed(master, "metric");
        self.classifier = self.classifier.with_seed(stage_seed(master, "classifier"));
        self
    }
}

/// Frozen upstream models that turn articles into feature families.
#[derive(Debug, Clone, PartialEq)]
pub struct FeaturePipeline {
    pub word2vec: WordEmbeddingModel,
    pub pca: PcaModel,
    pub metric: MetricNet,
    pub position: PositionModel,
    pub position_config: PositionConfig,
    /// Every article id that any stage was fitted on.
    pub fitted_ids: BTreeSet<u64>,
}

impl FeaturePipeline {
    /// Fit every stage on `train` only.
    pub fn fit(train: &Corpus, cfg: &PipelineConfig) -> Result<Self> {
        train.ensure_both_classes()?;
        let sentences: Vec<Vec<String>> = train.articles.iter().flat_map(|a| tokenize(&a.body)).collect();
        let word2vec = train_word2vec(&sentences, &cfg.word2vec)?;
        let text = doc_embeddings(&train.articles, &word2vec);
        let labels = train.labels();
        let pca = fit_pca(&text, cfg.pca_components)?;
        let metric = train_metric_net(&text, &labels, &cfg.metric)?;
        let basis = match cfg.position.basis {
            ClusterBasis::Text => text,
            ClusterBasis::Metric => metric.embed_batch(&text)?,
        };
        let position = fit_clusters(&basis, &cfg.position)?;
        Ok(FeaturePipeline {
            word2vec,
            pca,
            metric,
            position,
            position_config: cfg.position.clone(),
            fitted_ids: train.ids(),
        })
    }

    pub fn features(&self, articles: &[NewsArticle]) -> Result<FeatureSet> {
        let text = doc_embeddings(articles, &self.word2vec);
        let principal = self.pca.project_batch(&text)?;
        let metric = self.metric.embed_batch(&text)?;
        let basis = match self.position_config.basis {
            ClusterBasis::Text => &text,
            ClusterBasis::Metric => &metric,
        };
        let position = position_features(&self.position, basis, self.position_config.encoding)?;
        Ok(FeatureSet {
            ids: articles.iter().map(|a| a.id).collect(),
            text,
            principal: Some(principal),
            metric: Some(metric),
            position: Some(position),
        })
    }

    /// Fails with the offending ids if any held-out article was seen by a fit.
    pub fn audit(&self, held_out: &Corpus) -> Result<()> {
        let leaked: Vec<u64> = held_out
            .articles
            .iter()
            .map(|a| a.id)
            .filter(|id| self.fitted_ids.contains(id))
            .collect();
        if leaked.is_empty() {
            Ok(())
        } else {
            Err(Error::Leakage(leaked))
        }
    }
}

fn fit_clusters(basis: &Matrix, cfg: &PositionConfig) -> Result<PositionModel> {
    let mut eps = match cfg.eps {
        Some(e) => e,
        None => suggest_eps(basis, cfg.min_pts)?,
    };
    let mut tries = 0;
    loop {
        match fit_position_model(basis, eps, cfg.min_pts) {
            Err(Error::NoClusters { .. }) if tries < cfg.eps_doublings => {
                eps *= 2.0;
                tries += 1;
            }
            other => return other,
        }
    }
}
