use std::collections::BTreeSet;

use rand::Rng;
use swarmfeat::classify::{ClassifierKind, FeaturePart, FeatureSelector};
use swarmfeat::config::RunConfig;
use swarmfeat::corpus::{split_monthly, split_random, Label, SplitSpec};
use swarmfeat::error::Error;
use swarmfeat::harness::{evaluate, run_ablation, run_stream, EvalReport, FeaturePipeline};
use swarmfeat::rng::rng_from_seed;
use swarmfeat::synth::{synthetic_corpus, SynthSpec};

fn brute_force(p: &[Label], t: &[Label]) -> (usize, usize, usize, usize) {
    let mut c = [[0usize; 2]; 2];
    for i in 0..p.len() {
        c[usize::from(p[i] == Label::Fake)][usize::from(t[i] == Label::Fake)] += 1;
    }
    (c[1][1], c[1][0], c[0][0], c[0][1])
}

#[test]
fn evaluate_matches_brute_force_counter() {
    let mut rng = rng_from_seed(99);
    let lab = |b: bool| if b { Label::Fake } else { Label::Real };
    for _ in 0..1000 {
        let n = rng.gen_range(1..50);
        let p: Vec<Label> = (0..n).map(|_| lab(rng.gen())).collect();
        let t: Vec<Label> = (0..n).map(|_| lab(rng.gen())).collect();
        let r = evaluate(&p, &t).unwrap();
        assert_eq!((r.tp, r.fp, r.tn, r.fn_), brute_force(&p, &t));
        assert!(r.is_consistent(1e-12));
    }
}

fn smoke(features: Vec<FeatureSelector>, kinds: Vec<ClassifierKind>) -> RunConfig {
    RunConfig {
        features,
        classifiers: kinds,
        strict: true,
        ..RunConfig::smoke()
    }
}

#[test]
fn ablation_smoke_on_balanced_subsample() {
    let corpus = synthetic_corpus(&SynthSpec::default());
    let cfg = RunConfig {
        subsample: Some(200),
        ..smoke(FeatureSelector::ablation_rows(), ClassifierKind::ALL.to_vec())
    };
    let r = run_ablation(&corpus, &cfg).unwrap();
    assert_eq!(r.rows.len(), 32);
    assert_eq!(r.train_size + r.test_size, 200);
    assert_eq!(r.train_size, 140);
    for row in &r.rows {
        assert_eq!(row.report.total(), r.test_size);
        assert!(row.report.is_consistent(1e-12));
        assert_eq!(row.report.config["classifier"], row.classifier.name());
    }
    let text = r.render();
    assert!(text.contains("text+principal+metric+position") || text.contains("all"));
    assert!(text.contains("83.00%"));
    // the synthetic classes are easy; the full row should be far above chance
    assert!(r.best(&FeatureSelector::all()).unwrap().report.accuracy > 0.8);
}

#[test]
fn strict_rerun_is_byte_identical() {
    let corpus = synthetic_corpus(&SynthSpec::default());
    let cfg = smoke(
        vec![FeatureSelector::all(), FeatureSelector::only(FeaturePart::Text)],
        vec![ClassifierKind::Rf, ClassifierKind::Gbdt],
    );
    let a = run_ablation(&corpus, &cfg).unwrap().to_json().unwrap();
    let b = run_ablation(&corpus, &cfg).unwrap().to_json().unwrap();
    assert_eq!(a, b);
}

#[test]
fn pipeline_audit_catches_leaks() {
    let corpus = synthetic_corpus(&SynthSpec::default());
    let cfg = RunConfig::smoke().resolved().unwrap();
    let (train, test) = split_random(&corpus, &SplitSpec::random(0.7, 3)).unwrap();
    let p = FeaturePipeline::fit(&train, &cfg.pipeline).unwrap();
    p.audit(&test).unwrap();
    match p.audit(&corpus) {
        Err(Error::Leakage(ids)) => assert_eq!(ids.len(), train.len()),
        other => panic!("expected leakage, got {other:?}"),
    }
    let fs = p.features(&test.articles).unwrap();
    let lens: BTreeSet<usize> = (0..fs.len())
        .map(|i| fs.bundle(i).raw_concat(&FeatureSelector::all()).unwrap().len())
        .collect();
    assert_eq!(lens.len(), 1);
}

#[test]
fn stream_on_synthetic_months() {
    let corpus = synthetic_corpus(&SynthSpec { months: 4, ..SynthSpec::default() });
    let mut cfg = smoke(vec![FeatureSelector::all()], vec![ClassifierKind::Rf]);
    cfg.split.months = 3;
    let r = run_stream(&corpus, &cfg).unwrap();
    assert_eq!(r.months.len(), 3);
    for m in &r.months {
        let (train, test) = split_monthly(&corpus, &SplitSpec::monthly(m.month_index, 20)).unwrap();
        assert_eq!((m.train_size, m.test_size), (train.len(), test.len()));
        assert!(m.baseline.is_consistent(1e-12) && m.full.is_consistent(1e-12));
    }
    assert_eq!(r.to_csv().lines().count(), 4);

    cfg.split.months = 4;
    match run_stream(&corpus, &cfg) {
        Err(Error::TooFewMonths { needed: 5, found: 4, census }) => assert!(census.contains("2016-01")),
        other => panic!("expected TooFewMonths, got {other:?}"),
    }
}

#[test]
fn report_json_round_trips() {
    let r = EvalReport::from_counts(3, 1, 4, 2).unwrap();
    let s = serde_json::to_string(&r).unwrap();
    assert_eq!(serde_json::from_str::<EvalReport>(&s).unwrap(), r);
}
