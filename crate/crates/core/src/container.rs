//! Trained end-to-end model: upstream stages, scaler and classifier.
//!
//! File layout (little-endian):
//!
//! ```text
//! 0    4  magic "SWPM"
//! 4    4  u32 format version (1)
//! 8    8  u64 length J of the JSON section
//! 16   J  JSON: config, selector, PCA, metric net, position model,
//!         scaler, classifier, fitted ids
//! ..   8  u64 length W of the word vector section
//! ..   W  word vector container ("SWWV", see `text::write_word2vec`)
//! ```

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::classify::{
    predict, predict_batch, train_classifier, ClassifierKind, FeatureSelector, Standardizer, TrainedClassifier,
};
use crate::config::RunConfig;
use crate::corpus::{split_random, Corpus, Label, NewsArticle, SplitSpec};
use crate::error::{Error, Result};
use crate::harness::{evaluate, version, EvalReport, FeaturePipeline, PositionConfig};
use crate::metric::MetricNet;
use crate::position::PositionModel;
use crate::principal::PcaModel;
use crate::rng::stage_seed;
use crate::text::{read_word2vec, write_word2vec};

pub const MODEL_MAGIC: [u8; 4] = *b"SWPM";
pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub version: String,
    pub config: RunConfig,
    pub features: FeatureSelector,
    pub pipeline: FeaturePipeline,
    pub scaler: Standardizer,
    pub classifier: TrainedClassifier,
}

#[derive(Serialize, Deserialize)]
struct Header {
    version: String,
    config: RunConfig,
    features: FeatureSelector,
    pca: PcaModel,
    metric: MetricNet,
    position: PositionModel,
    position_config: PositionConfig,
    fitted_ids: BTreeSet<u64>,
    scaler: Standardizer,
    classifier: TrainedClassifier,
}

impl TrainedModel {
    pub fn predict_article(&self, article: &NewsArticle) -> Result<(Label, f64)> {
        let fs = self.pipeline.features(std::slice::from_ref(article))?;
        let mut v = fs.bundle(0).raw_concat(&self.features)?;
        self.scaler.apply_row(&mut v)?;
        predict(&self.classifier, &v)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let p = &self.pipeline;
        let header = Header {
            version: self.version.clone(),
            config: self.config.clone(),
            features: self.features.clone(),
            pca: p.pca.clone(),
            metric: p.metric.clone(),
            position: p.position.clone(),
            position_config: p.position_config.clone(),
            fitted_ids: p.fitted_ids.clone(),
            scaler: self.scaler.clone(),
            classifier: self.classifier.clone(),
        };
        let json = serde_json::to_vec(&header)?;
        let mut w2v = Vec::new();
        write_word2vec(&p.word2vec, &mut w2v)?;
        let mut out = Vec::with_capacity(32 + json.len() + w2v.len());
        out.extend_from_slice(&MODEL_MAGIC);
        out.extend_from_slice(&MODEL_FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        out.extend_from_slice(&(w2v.len() as u64).to_le_bytes());
        out.extend_from_slice(&w2v);
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut pos = 0usize;
        let mut take = |n: usize| -> Result<&[u8]> {
            let end = pos.checked_add(n).filter(|&e| e <= bytes.len());
            let end = end.ok_or_else(|| Error::Format("model file truncated".into()))?;
            let s = &bytes[pos..end];
            pos = end;
            Ok(s)
        };
        if take(4)? != MODEL_MAGIC {
            return Err(Error::Format("bad magic, not a model container".into()));
        }
        let version = u32::from_le_bytes(take(4)?.try_into().unwrap());
        if version != MODEL_FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported model format version {version}")));
        }
        let jlen = u64::from_le_bytes(take(8)?.try_into().unwrap()) as usize;
        let header: Header = serde_json::from_slice(take(jlen)?)?;
        let wlen = u64::from_le_bytes(take(8)?.try_into().unwrap()) as usize;
        let word2vec = read_word2vec(take(wlen)?)?;
        if pos != bytes.len() {
            return Err(Error::Format(format!("{} trailing bytes after model", bytes.len() - pos)));
        }
        Ok(TrainedModel {
            version: header.version,
            config: header.config,
            features: header.features,
            pipeline: FeaturePipeline {
                word2vec,
                pca: header.pca,
                metric: header.metric,
                position: header.position,
                position_config: header.position_config,
                fitted_ids: header.fitted_ids,
            },
            scaler: header.scaler,
            classifier: header.classifier,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&fs::read(path).map_err(|e| Error::io(path, e))?)
    }

    /// Short human-readable description.
    pub fn describe(&self) -> String {
        let p = &self.pipeline;
        format!(
            "{}\nfeatures: {} ({} columns)\nclassifier: {}\nword vectors: {} words x {} dims\n\
             principal components: {} (eigenvalues {:?})\nmetric net: {} -> {:?}, final loss {:.6}\n\
             swarm centers: {} (eps {:.6}, min_pts {}, sizes {:?})\ntrained on {} articles\n",
            self.version,
            self.features,
            self.classifier.feature_len,
            self.classifier.kind,
            p.word2vec.vocabulary.len(),
            p.word2vec.dim(),
            p.pca.k(),
            p.pca.eigenvalues,
            p.metric.input_dim(),
            p.metric.config.layers,
            p.metric.final_loss,
            p.position.k(),
            p.position.eps,
            p.position.min_pts,
            p.position.sizes,
            p.fitted_ids.len()
        )
    }
}

/// Fit one (selector, classifier) model on the random training split and
/// score it on the held-out part.
pub fn train_model(
    corpus: &Corpus,
    cfg: &RunConfig,
    features: &FeatureSelector,
    kind: ClassifierKind,
) -> Result<(TrainedModel, EvalReport)> {
    let cfg = cfg.resolved()?;
    let spec = SplitSpec::random(cfg.split.train_ratio, stage_seed(cfg.seed, "split"));
    let (train, test) = split_random(corpus, &spec)?;
    let pipeline = FeaturePipeline::fit(&train, &cfg.pipeline)?;
    pipeline.audit(&test)?;
    let raw = pipeline.features(&train.articles)?.raw(features)?;
    let scaler = Standardizer::fit(&raw);
    let classifier = train_classifier(kind, &scaler.apply(&raw)?, &train.labels(), &cfg.pipeline.classifier)?;
    let test_x = scaler.apply(&pipeline.features(&test.articles)?.raw(features)?)?;
    let preds: Vec<Label> = predict_batch(&classifier, &test_x)?.into_iter().map(|p| p.0).collect();
    let report = evaluate(&preds, &test.labels())?.with_context(
        format!("random split, seed {}", spec.seed),
        serde_json::json!({ "classifier": kind, "features": features }),
    );
    Ok((
        TrainedModel {
            version: version(),
            config: cfg,
            features: features.clone(),
            pipeline,
            scaler,
            classifier,
        },
        report,
    ))
}
