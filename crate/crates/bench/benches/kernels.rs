use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use swarmfeat::classify::{fit_forest, fit_gbdt, ForestConfig, GbdtConfig};
use swarmfeat::matrix::Matrix;
use swarmfeat::position::dbscan;
use swarmfeat::principal::{covariance, jacobi_eigen};
use swarmfeat::synth::{synthetic_corpus, SynthSpec};
use swarmfeat::text::{tokenize, train_word2vec, Word2VecConfig};

fn random(n: usize, d: usize, seed: u64) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..n * d).map(|_| rng.gen_range(-1.0..1.0)).collect();
    Matrix::from_vec(n, d, data).unwrap()
}

fn jacobi(c: &mut Criterion) {
    let mut g = c.benchmark_group("jacobi_eigen");
    for d in [16, 64, 100] {
        let (_, cov) = covariance(&random(4 * d, d, 1));
        g.bench_with_input(BenchmarkId::from_parameter(d), &cov, |b, cov| {
            b.iter(|| jacobi_eigen(black_box(cov)).unwrap())
        });
    }
    g.finish();
}

fn clustering(c: &mut Criterion) {
    let mut g = c.benchmark_group("dbscan");
    g.sample_size(10);
    for n in [500, 2000, 5000] {
        let x = random(n, 32, 2);
        g.bench_with_input(BenchmarkId::from_parameter(n), &x, |b, x| {
            b.iter(|| dbscan(black_box(x), 1.2, 5).unwrap())
        });
    }
    g.finish();
}

fn word_vectors(c: &mut Criterion) {
    let corpus = synthetic_corpus(&SynthSpec {
        months: 4,
        per_month: 100,
        words_per_article: 120,
        ..SynthSpec::default()
    });
    let sentences: Vec<Vec<String>> = corpus.articles.iter().flat_map(|a| tokenize(&a.body)).collect();
    let cfg = Word2VecConfig {
        dim: 50,
        epochs: 1,
        min_count: 1,
        ..Word2VecConfig::default()
    };
    let mut g = c.benchmark_group("word2vec");
    g.sample_size(10);
    g.bench_function("48k_tokens_dim50_epoch1", |b| {
        b.iter(|| train_word2vec(black_box(&sentences), &cfg).unwrap())
    });
    g.finish();
}

fn trees(c: &mut Criterion) {
    let x = random(5000, 40, 3);
    let y: Vec<f64> = (0..5000).map(|i| f64::from(x[(i, 0)] * x[(i, 1)] > 0.0)).collect();
    let mut g = c.benchmark_group("trees");
    g.sample_size(10);
    let rf = ForestConfig {
        trees: 20,
        ..ForestConfig::default()
    };
    g.bench_function("forest_20x5000x40", |b| b.iter(|| fit_forest(black_box(&x), &y, &rf)));
    let gb = GbdtConfig {
        rounds: 20,
        ..GbdtConfig::default()
    };
    g.bench_function("gbdt_20x5000x40", |b| b.iter(|| fit_gbdt(black_box(&x), &y, &gb)));
    g.finish();
}

criterion_group!(benches, jacobi, clustering, word_vectors, trees);
criterion_main!(benches);
