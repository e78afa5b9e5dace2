use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tokenize::tokenize_flat;
use super::vocab::Vocabulary;
use crate::corpus::NewsArticle;
use crate::error::{Error, Result};
use crate::matrix::{dot, Matrix};
use crate::rng::rng_from_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Word2VecConfig {
    pub dim: usize,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub min_count: u64,
    /// Initial learning rate, decayed linearly to `1e-4` of itself.
    pub learning_rate: f64,
    /// Frequent-word downsampling threshold; 0 disables it.
    pub subsample: f64,
    pub seed: u64,
}

impl Default for Word2VecConfig {
    fn default() -> Self {
        Word2VecConfig {
            dim: 100,
            window: 5,
            negatives: 5,
            epochs: 5,
            min_count: 5,
            learning_rate: 0.025,
            subsample: 1e-3,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WordEmbeddingModel {
    pub vocabulary: Vocabulary,
    /// V×dim input vectors; row `i` belongs to `vocabulary.word(i)`.
    pub vectors: Matrix,
    pub config: Word2VecConfig,
    /// Mean pair loss for every epoch.
    pub epoch_loss: Vec<f64>,
}

impl WordEmbeddingModel {
    pub fn dim(&self) -> usize {
        self.vectors.cols()
    }

    pub fn vector(&self, word: &str) -> Option<&[f64]> {
        self.vocabulary.get(word).map(|i| self.vectors.row(i))
    }
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// ln(1 + e^x) without overflow.
#[inline]
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Negative-sampling loss for one center word against a set of output rows.
///
/// `labels[k]` is 1 for the true context and 0 for a negative. Returns
/// `sum_k -[y log s(u_k.v) + (1-y) log s(-u_k.v)]`, writes dL/dv into
/// `grad_center`, and writes `coeffs[k]` such that dL/du_k = coeffs[k] * v.
pub fn sgns_loss_grad(
    center: &[f64],
    outputs: &Matrix,
    targets: &[usize],
    labels: &[f64],
    grad_center: &mut [f64],
    coeffs: &mut [f64],
) -> f64 {
    grad_center.iter_mut().for_each(|g| *g = 0.0);
    let mut loss = 0.0;
    for (k, (&t, &y)) in targets.iter().zip(labels).enumerate() {
        let u = outputs.row(t);
        let s = dot(center, u);
        loss += y * softplus(-s) + (1.0 - y) * softplus(s);
        let c = sigmoid(s) - y;
        coeffs[k] = c;
        for (g, ui) in grad_center.iter_mut().zip(u) {
            *g += c * ui;
        }
    }
    loss
}

/// Train skip-gram word vectors with negative sampling.
///
/// Single worker: with a fixed seed the result is bit-identical across runs.
pub fn train_word2vec<S: AsRef<[String]>>(
    sentences: &[S],
    config: &Word2VecConfig,
) -> Result<WordEmbeddingModel> {
    if config.dim == 0 || config.window == 0 {
        return Err(Error::InvalidArgument("dim and window must be positive".into()));
    }
    let vocab = Vocabulary::build(sentences, config.min_count)?;
    let v = vocab.len();
    let d = config.dim;
    let mut rng = rng_from_seed(config.seed);

    let mut input = Matrix::zeros(v, d);
    for i in 0..v {
        for x in input.row_mut(i) {
            *x = (rng.gen::<f64>() - 0.5) / d as f64;
        }
    }
    let mut output = Matrix::zeros(v, d);

    let noise = WeightedIndex::new(vocab.counts().iter().map(|&c| (c as f64).powf(0.75)))
        .map_err(|e| Error::InvalidArgument(format!("negative distribution: {e}")))?;

    let encoded: Vec<Vec<usize>> = sentences
        .iter()
        .map(|s| s.as_ref().iter().filter_map(|w| vocab.get(w)).collect())
        .collect();
    let train_words: u64 = vocab.total_tokens;
    let total = (config.epochs as u64 * train_words).max(1) as f64;
    let threshold = config.subsample * train_words as f64;
    let keep_prob: Vec<f64> = vocab
        .counts()
        .iter()
        .map(|&c| {
            if config.subsample <= 0.0 {
                1.0
            } else {
                let c = c as f64;
                (((c / threshold).sqrt() + 1.0) * threshold / c).min(1.0)
            }
        })
        .collect();

    let mut targets = Vec::with_capacity(config.negatives + 1);
    let mut labels = Vec::with_capacity(config.negatives + 1);
    let mut coeffs = vec![0.0; config.negatives + 1];
    let mut grad = vec![0.0; d];
    let mut kept: Vec<usize> = Vec::new();
    let mut processed: u64 = 0;
    let mut epoch_loss = Vec::with_capacity(config.epochs);
    let lr_floor = config.learning_rate * 1e-4;

    for _ in 0..config.epochs {
        let (mut loss_sum, mut pairs) = (0.0, 0u64);
        for sent in &encoded {
            kept.clear();
            for &w in sent {
                processed += 1;
                if keep_prob[w] >= 1.0 || rng.gen::<f64>() < keep_prob[w] {
                    kept.push(w);
                }
            }
            let lr = (config.learning_rate * (1.0 - processed as f64 / total)).max(lr_floor);
            for (pos, &center) in kept.iter().enumerate() {
                let reach = config.window - rng.gen_range(0..config.window);
                let lo = pos.saturating_sub(reach);
                let hi = (pos + reach + 1).min(kept.len());
                for (cpos, &context) in kept.iter().enumerate().take(hi).skip(lo) {
                    if cpos == pos {
                        continue;
                    }
                    targets.clear();
                    labels.clear();
                    targets.push(context);
                    labels.push(1.0);
                    while targets.len() < config.negatives + 1 {
                        let n = noise.sample(&mut rng);
                        if n != context {
                            targets.push(n);
                            labels.push(0.0);
                        }
                        if v == 1 {
                            break;
                        }
                    }
                    loss_sum += sgns_loss_grad(
                        input.row(center),
                        &output,
                        &targets,
                        &labels,
                        &mut grad,
                        &mut coeffs,
                    );
                    pairs += 1;
                    for (k, &t) in targets.iter().enumerate() {
                        let step = lr * coeffs[k];
                        let src = input.row(center);
                        for (o, x) in output.row_mut(t).iter_mut().zip(src) {
                            *o -= step * x;
                        }
                    }
                    for (x, g) in input.row_mut(center).iter_mut().zip(&grad) {
                        *x -= lr * g;
                    }
                }
            }
        }
        let mean = if pairs == 0 { 0.0 } else { loss_sum / pairs as f64 };
        if !mean.is_finite() {
            return Err(Error::Diverged(format!("word2vec epoch loss {mean}")));
        }
        epoch_loss.push(mean);
    }
    if !input.is_finite() {
        return Err(Error::Diverged("word2vec produced non-finite vectors".into()));
    }

    Ok(WordEmbeddingModel {
        vocabulary: vocab,
        vectors: input,
        config: config.clone(),
        epoch_loss,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocEmbedding {
    pub article_id: u64,
    pub vector: Vec<f64>,
    /// In-vocabulary tokens that were averaged.
    pub token_count: usize,
}

impl DocEmbedding {
    /// True when no token of the body was in the vocabulary.
    pub fn is_empty(&self) -> bool {
        self.token_count == 0
    }
}

/// Average of the word vectors of in-vocabulary body tokens.
pub fn doc_embedding(article: &NewsArticle, model: &WordEmbeddingModel) -> DocEmbedding {
    let mut sum = vec![0.0; model.dim()];
    let mut n = 0usize;
    for tok in tokenize_flat(&article.body) {
        if let Some(v) = model.vector(&tok) {
            for (s, x) in sum.iter_mut().zip(v) {
                *s += x;
            }
            n += 1;
        }
    }
    if n > 0 {
        let inv = n as f64;
        sum.iter_mut().for_each(|s| *s /= inv);
    }
    DocEmbedding {
        article_id: article.id,
        vector: sum,
        token_count: n,
    }
}

/// Document embeddings for a batch of articles as an n×dim matrix.
pub fn doc_embeddings(articles: &[NewsArticle], model: &WordEmbeddingModel) -> Matrix {
    let mut m = Matrix::zeros(articles.len(), model.dim());
    for (i, a) in articles.iter().enumerate() {
        m.row_mut(i).copy_from_slice(&doc_embedding(a, model).vector);
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Label;
    use crate::text::tokenize;

    fn toy_model() -> WordEmbeddingModel {
        let vocab = Vocabulary::from_parts(
            vec!["alpha".into(), "beta".into(), "gamma".into()],
            vec![3, 2, 1],
            1,
        );
        let vectors = Matrix::from_rows(&[[1.0, 2.0, 3.0], [3.0, -2.0, 0.5], [0.0, 0.0, 9.0]]).unwrap();
        WordEmbeddingModel {
            vocabulary: vocab,
            vectors,
            config: Word2VecConfig { dim: 3, ..Default::default() },
            epoch_loss: vec![],
        }
    }

    fn article(body: &str) -> NewsArticle {
        NewsArticle {
            id: 9,
            title: String::new(),
            body: body.into(),
            subject: String::new(),
            published: None,
            label: Label::Fake,
        }
    }

    #[test]
    fn single_word_identity() {
        let m = toy_model();
        let e = doc_embedding(&article("Beta, unknown-word!"), &m);
        assert_eq!(e.vector, vec![3.0, -2.0, 0.5]);
        assert_eq!(e.token_count, 1);
    }

    #[test]
    fn two_word_mean() {
        let m = toy_model();
        let e = doc_embedding(&article("alpha beta"), &m);
        // (1+3)/2, (2-2)/2, (3+0.5)/2
        assert_eq!(e.vector, vec![2.0, 0.0, 1.75]);
    }

    #[test]
    fn order_and_duplication_invariant() {
        let m = toy_model();
        let a = doc_embedding(&article("alpha beta gamma alpha"), &m);
        let b = doc_embedding(&article("gamma alpha. alpha beta"), &m);
        let c = doc_embedding(&article("alpha beta gamma alpha alpha beta gamma alpha"), &m);
        for i in 0..3 {
            assert!((a.vector[i] - b.vector[i]).abs() < 1e-12);
            assert!((a.vector[i] - c.vector[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn no_known_tokens_gives_flagged_zero() {
        let e = doc_embedding(&article("nothing known here"), &toy_model());
        assert!(e.is_empty());
        assert_eq!(e.vector, vec![0.0; 3]);
    }

    #[test]
    fn minimal_corpus_trains() {
        let sents: Vec<Vec<String>> = (0..50).flat_map(|_| tokenize("a b.")).collect();
        let cfg = Word2VecConfig { dim: 4, window: 1, min_count: 1, ..Default::default() };
        let m = train_word2vec(&sents, &cfg).unwrap();
        assert_eq!(m.vocabulary.len(), 2);
        assert_eq!(m.epoch_loss.len(), cfg.epochs);
        assert!(m.vectors.is_finite());
    }

    #[test]
    fn empty_vocab_is_an_error() {
        let sents = vec![vec!["x".to_string()]];
        assert!(train_word2vec(&sents, &Word2VecConfig::default()).is_err());
    }

    fn cosine(a: &[f64], b: &[f64]) -> f64 {
        dot(a, b) / (dot(a, a).sqrt() * dot(b, b).sqrt())
    }

    fn semantic_corpus() -> Vec<Vec<String>> {
        let mut s = Vec::new();
        for _ in 0..1000 {
            s.extend(tokenize("king queen royal. car road engine."));
        }
        s
    }

    #[test]
    fn learns_cooccurrence_clusters_deterministically() {
        let cfg = Word2VecConfig { dim: 10, window: 2, min_count: 1, epochs: 3, subsample: 0.0, seed: 11, ..Default::default() };
        let sents = semantic_corpus();
        let m = train_word2vec(&sents, &cfg).unwrap();
        let v = |w| m.vector(w).unwrap();
        assert!(cosine(v("king"), v("queen")) > cosine(v("king"), v("car")));
        assert!(cosine(v("road"), v("engine")) > cosine(v("road"), v("royal")));
        let again = train_word2vec(&sents, &cfg).unwrap();
        assert_eq!(m, again);
    }

    #[test]
    fn sgns_gradient_matches_finite_differences() {
        use rand::Rng;
        let mut rng = rng_from_seed(5);
        let d = 5;
        for _ in 0..10 {
            let center: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mut out = Matrix::zeros(4, d);
            for i in 0..4 {
                for x in out.row_mut(i) {
                    *x = rng.gen_range(-1.0..1.0);
                }
            }
            let targets = [0usize, 1, 2, 3];
            let labels = [1.0, 0.0, 0.0, 0.0];
            let mut g = vec![0.0; d];
            let mut c = vec![0.0; 4];
            sgns_loss_grad(&center, &out, &targets, &labels, &mut g, &mut c);
            let f = |cv: &[f64], o: &Matrix| {
                let mut gg = vec![0.0; d];
                let mut cc = vec![0.0; 4];
                sgns_loss_grad(cv, o, &targets, &labels, &mut gg, &mut cc)
            };
            let h = 1e-5;
            let rel = |a: f64, n: f64| (a - n).abs() / a.abs().max(n.abs()).max(1e-8);
            for j in 0..d {
                let (mut p, mut m) = (center.clone(), center.clone());
                p[j] += h;
                m[j] -= h;
                let num = (f(&p, &out) - f(&m, &out)) / (2.0 * h);
                assert!(rel(g[j], num) < 1e-4, "center {j}: {} vs {num}", g[j]);
            }
            for k in 0..4 {
                for j in 0..d {
                    let (mut p, mut m) = (out.clone(), out.clone());
                    p[(k, j)] += h;
                    m[(k, j)] -= h;
                    let num = (f(&center, &p) - f(&center, &m)) / (2.0 * h);
                    assert!(rel(c[k] * center[j], num) < 1e-4);
                }
            }
        }
    }
}
