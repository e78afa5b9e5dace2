//! Synthetic news corpora for dataset-free tests, smoke runs and benches.
//!
//! Fake and real articles draw from overlapping word pools; each month the
//! fake side adds a burst of topic words so that swarms exist to be found.

use std::path::Path;

use chrono::NaiveDate;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Label, NewsArticle, Provenance, YearMonth};
use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub months: usize,
    /// Articles per month, split evenly between the labels.
    pub per_month: usize,
    pub start: YearMonth,
    pub words_per_article: usize,
    /// Probability that a class word is taken from the other class's pool.
    pub crossover: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            months: 4,
            per_month: 60,
            start: YearMonth { year: 2016, month: 1 },
            words_per_article: 48,
            crossover: 0.2,
            seed: 11,
        }
    }
}

const SHARED: usize = 60;
const CLASS: usize = 30;
const SWARM: usize = 6;

fn pick<'a>(rng: &mut impl Rng, pool: &'a [String]) -> &'a str {
    pool.choose(rng).map(String::as_str).unwrap_or("x")
}

pub fn synthetic_corpus(spec: &SynthSpec) -> Corpus {
    let mut rng = rng_from_seed(spec.seed);
    let pool = |p: &str, n: usize| (0..n).map(|i| format!("{p}{i}")).collect::<Vec<_>>();
    let shared = pool("common", SHARED);
    let fake_words = pool("claim", CLASS);
    let real_words = pool("report", CLASS);
    let mut articles = Vec::with_capacity(spec.months * spec.per_month);
    let mut ym = spec.start;
    for m in 0..spec.months {
        let swarm = pool(&format!("burst{m}x"), SWARM);
        let days = days_in(ym);
        for j in 0..spec.per_month {
            let label = if j % 2 == 0 { Label::Fake } else { Label::Real };
            let (own, other) = match label {
                Label::Fake => (&fake_words, &real_words),
                Label::Real => (&real_words, &fake_words),
            };
            let mut words = Vec::with_capacity(spec.words_per_article);
            for _ in 0..spec.words_per_article {
                let r: f64 = rng.gen();
                let w = if r < 0.45 {
                    pick(&mut rng, &shared)
                } else if label == Label::Fake && r < 0.55 {
                    pick(&mut rng, &swarm)
                } else if rng.gen::<f64>() < spec.crossover {
                    pick(&mut rng, other)
                } else {
                    pick(&mut rng, own)
                };
                words.push(w.to_string());
            }
            let mut body = String::new();
            if label == Label::Real && rng.gen_bool(0.5) {
                body.push_str("WASHINGTON (Reuters) - ");
            }
            for (k, chunk) in words.chunks(8).enumerate() {
                if k > 0 {
                    body.push(' ');
                }
                body.push_str(&chunk.join(" "));
                body.push('.');
            }
            let day = rng.gen_range(1..=days);
            articles.push(NewsArticle {
                id: articles.len() as u64,
                title: format!("{} story {m}-{j}", if label == Label::Fake { "Shocking" } else { "Official" }),
                body,
                subject: if label == Label::Fake { "politics" } else { "politicsNews" }.into(),
                published: NaiveDate::from_ymd_opt(ym.year, ym.month, day),
                label,
            });
        }
        ym = ym.next();
    }
    Corpus {
        articles,
        provenance: Provenance::default(),
    }
}

fn days_in(ym: YearMonth) -> u32 {
    let next = ym.next();
    let first = NaiveDate::from_ymd_opt(ym.year, ym.month, 1).expect("valid month");
    let following = NaiveDate::from_ymd_opt(next.year, next.month, 1).expect("valid month");
    (following - first).num_days() as u32
}

/// Write the corpus as two CSV files in the public dataset layout.
pub fn write_isot_csv(corpus: &Corpus, fake_path: &Path, real_path: &Path) -> Result<()> {
    for (label, path) in [(Label::Fake, fake_path), (Label::Real, real_path)] {
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::Csv {
            path: path.to_path_buf(),
            source: e,
        })?;
        let csv_err = |e: csv::Error| Error::Csv {
            path: path.to_path_buf(),
            source: e,
        };
        w.write_record(["title", "text", "subject", "date"]).map_err(csv_err)?;
        for a in corpus.articles.iter().filter(|a| a.label == label) {
            let date = a.published.map(|d| d.format("%B %d, %Y").to_string()).unwrap_or_default();
            w.write_record([a.title.as_str(), a.body.as_str(), a.subject.as_str(), date.as_str()])
                .map_err(csv_err)?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}
