//! News corpus loading, source scrubbing and train/test splitting.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use chrono::{Datelike, NaiveDate};
use rand::seq::SliceRandom;
use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

/// Binary truth label. `Fake` is the positive class everywhere.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Fake,
    Real,
}

impl Label {
    pub fn is_fake(self) -> bool {
        self == Label::Fake
    }

    /// 1.0 for fake, 0.0 for real.
    pub fn target(self) -> f64 {
        if self.is_fake() {
            1.0
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NewsArticle {
    pub id: u64,
    pub title: String,
    pub body: String,
    pub subject: String,
    pub published: Option<NaiveDate>,
    pub label: Label,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub sources: Vec<PathBuf>,
    /// Data rows seen in the input files (excluding headers).
    pub rows_read: usize,
    /// Rows skipped because they did not have exactly four fields or could not be decoded.
    pub malformed_rows: usize,
    /// Articles whose date text could not be parsed.
    pub undated: usize,
    /// Articles whose body had a leading source tag removed.
    pub scrubbed: usize,
    /// Articles dropped because scrubbing left an empty body.
    pub dropped_empty: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Corpus {
    pub articles: Vec<NewsArticle>,
    pub provenance: Provenance,
}

const HEADER: [&str; 4] = ["title", "text", "subject", "date"];

/// Load the fake and real CSV files. Fake rows get ids first, in file order,
/// followed by real rows, so repeated loads produce the same id→article map.
pub fn load_corpus(fake_path: &Path, real_path: &Path) -> Result<Corpus> {
    let mut prov = Provenance {
        sources: vec![fake_path.to_path_buf(), real_path.to_path_buf()],
        ..Default::default()
    };
    let mut articles = Vec::new();
    for (path, label) in [(fake_path, Label::Fake), (real_path, Label::Real)] {
        let before = articles.len();
        read_csv(path, label, &mut articles, &mut prov)?;
        if articles.len() == before {
            return Err(Error::EmptyFile {
                path: path.to_path_buf(),
            });
        }
    }
    prov.undated = articles.iter().filter(|a| a.published.is_none()).count();
    Ok(Corpus {
        articles,
        provenance: prov,
    })
}

fn read_csv(
    path: &Path,
    label: Label,
    out: &mut Vec<NewsArticle>,
    prov: &mut Provenance,
) -> Result<()> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(std::io::BufReader::new(file));
    let header = rdr.byte_headers().map_err(|e| Error::Csv {
        path: path.to_path_buf(),
        source: e,
    })?;
    let found: Vec<String> = header
        .iter()
        .map(|f| {
            String::from_utf8_lossy(f)
                .trim_start_matches('\u{feff}')
                .trim()
                .to_lowercase()
        })
        .collect();
    if found != HEADER {
        return Err(Error::HeaderMismatch {
            path: path.to_path_buf(),
            found: found.join(","),
        });
    }
    let mut record = csv::ByteRecord::new();
    loop {
        match rdr.read_byte_record(&mut record) {
            Ok(false) => break,
            Ok(true) => {
                prov.rows_read += 1;
                if record.len() != 4 {
                    prov.malformed_rows += 1;
                    continue;
                }
                let field = |i: usize| String::from_utf8_lossy(&record[i]).into_owned();
                out.push(NewsArticle {
                    id: out.len() as u64,
                    title: field(0).trim().to_string(),
                    body: field(1),
                    subject: field(2).trim().to_string(),
                    published: parse_date(&field(3)),
                    label,
                });
            }
            Err(e) if matches!(e.kind(), csv::ErrorKind::Io(_)) => {
                return Err(Error::Csv {
                    path: path.to_path_buf(),
                    source: e,
                })
            }
            Err(_) => {
                prov.rows_read += 1;
                prov.malformed_rows += 1;
            }
        }
    }
    Ok(())
}

/// Parse the date spellings found in the dataset: "December 31, 2017",
/// "Dec 31, 2017" and "31-Dec-17". Anything else yields `None`.
pub fn parse_date(text: &str) -> Option<NaiveDate> {
    let t = text.trim();
    if t.is_empty() {
        return None;
    }
    ["%B %d, %Y", "%b %d, %Y", "%d-%b-%y"]
        .iter()
        .find_map(|fmt| NaiveDate::parse_from_str(t, fmt).ok())
}

fn source_tag() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        // optional uppercase location, parenthesized agency, dash separator
        Regex::new(r"^\s*(?:[A-Z][A-Z0-9 .,'’/&-]*\s*)?\([^()\n]{1,64}\)\s*[-–—]+\s*")
            .expect("static regex")
    })
}

/// Strip a leading "CITY (Agency) - " or "(Agency) - " tag from the body.
/// Stacked tags are all removed, so the operation is idempotent.
pub fn scrub_sources(article: &NewsArticle) -> NewsArticle {
    let mut out = article.clone();
    out.body = scrub_body(&article.body).to_string();
    out
}

fn scrub_body(body: &str) -> &str {
    let re = source_tag();
    let mut rest = body;
    while let Some(m) = re.find(rest) {
        if m.end() == 0 {
            break;
        }
        rest = &rest[m.end()..];
    }
    rest
}

impl Corpus {
    pub fn len(&self) -> usize {
        self.articles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.articles.is_empty()
    }

    pub fn count(&self, label: Label) -> usize {
        self.articles.iter().filter(|a| a.label == label).count()
    }

    pub fn ids(&self) -> BTreeSet<u64> {
        self.articles.iter().map(|a| a.id).collect()
    }

    pub fn labels(&self) -> Vec<Label> {
        self.articles.iter().map(|a| a.label).collect()
    }

    /// Scrub every body and drop articles left empty.
    pub fn scrubbed(&self) -> Corpus {
        let mut prov = self.provenance.clone();
        let mut articles = Vec::with_capacity(self.articles.len());
        for a in &self.articles {
            let s = scrub_sources(a);
            if s.body.len() != a.body.len() {
                prov.scrubbed += 1;
            }
            if s.body.trim().is_empty() {
                prov.dropped_empty += 1;
                continue;
            }
            articles.push(s);
        }
        Corpus {
            articles,
            provenance: prov,
        }
    }

    pub fn ensure_both_classes(&self) -> Result<()> {
        let (fake, real) = (self.count(Label::Fake), self.count(Label::Real));
        if fake == 0 || real == 0 {
            return Err(Error::SingleClass { fake, real });
        }
        Ok(())
    }

    pub(crate) fn subset(&self, idx: impl IntoIterator<Item = usize>) -> Corpus {
        Corpus {
            articles: idx.into_iter().map(|i| self.articles[i].clone()).collect(),
            provenance: self.provenance.clone(),
        }
    }

    pub fn summary(&self) -> CorpusSummary {
        let mut per_month: BTreeMap<String, LabelCounts> = BTreeMap::new();
        for a in &self.articles {
            if let Some(d) = a.published {
                let e = per_month.entry(YearMonth::of(d).to_string()).or_default();
                e.add(a.label);
            }
        }
        CorpusSummary {
            total: self.len(),
            fake: self.count(Label::Fake),
            real: self.count(Label::Real),
            undated: self.articles.iter().filter(|a| a.published.is_none()).count(),
            per_month,
            provenance: self.provenance.clone(),
        }
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        let bytes = serde_json::to_vec(self)?;
        std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
    }

    pub fn read_json(path: &Path) -> Result<Corpus> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_slice(&bytes)?)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelCounts {
    pub fake: usize,
    pub real: usize,
}

impl LabelCounts {
    fn add(&mut self, l: Label) {
        match l {
            Label::Fake => self.fake += 1,
            Label::Real => self.real += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.fake + self.real
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSummary {
    pub total: usize,
    pub fake: usize,
    pub real: usize,
    pub undated: usize,
    pub per_month: BTreeMap<String, LabelCounts>,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct YearMonth {
    pub year: i32,
    pub month: u32,
}

impl YearMonth {
    pub fn of(d: NaiveDate) -> Self {
        YearMonth {
            year: d.year(),
            month: d.month(),
        }
    }

    pub fn next(self) -> Self {
        if self.month == 12 {
            YearMonth {
                year: self.year + 1,
                month: 1,
            }
        } else {
            YearMonth {
                year: self.year,
                month: self.month + 1,
            }
        }
    }
}

impl std::fmt::Display for YearMonth {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitMode {
    Random,
    Monthly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub mode: SplitMode,
    pub train_ratio: f64,
    pub seed: u64,
    /// 1-based index of the last training month (monthly mode).
    pub month_index: usize,
    /// Minimum articles for a month to count as usable (monthly mode).
    pub min_month_articles: usize,
}

pub const DEFAULT_TRAIN_RATIO: f64 = 0.70;
pub const DEFAULT_MIN_MONTH_ARTICLES: usize = 200;

impl SplitSpec {
    pub fn random(train_ratio: f64, seed: u64) -> Self {
        SplitSpec {
            mode: SplitMode::Random,
            train_ratio,
            seed,
            month_index: 0,
            min_month_articles: DEFAULT_MIN_MONTH_ARTICLES,
        }
    }

    pub fn monthly(month_index: usize, min_month_articles: usize) -> Self {
        SplitSpec {
            mode: SplitMode::Monthly,
            train_ratio: DEFAULT_TRAIN_RATIO,
            seed: 0,
            month_index,
            min_month_articles,
        }
    }
}

/// Seeded random partition with `round(train_ratio * N)` training articles.
/// Both halves keep the corpus order.
pub fn split_random(corpus: &Corpus, spec: &SplitSpec) -> Result<(Corpus, Corpus)> {
    if spec.mode != SplitMode::Random {
        return Err(Error::InvalidArgument("split_random needs mode=random".into()));
    }
    if !(spec.train_ratio > 0.0 && spec.train_ratio < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "train_ratio must lie in (0,1), got {}",
            spec.train_ratio
        )));
    }
    let n = corpus.len();
    let n_train = (spec.train_ratio * n as f64).round() as usize;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng_from_seed(spec.seed));
    let mut is_train = vec![false; n];
    for &i in &order[..n_train] {
        is_train[i] = true;
    }
    let train = corpus.subset((0..n).filter(|&i| is_train[i]));
    let test = corpus.subset((0..n).filter(|&i| !is_train[i]));
    Ok((train, test))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonthCensus {
    pub min_month_articles: usize,
    pub months: Vec<(YearMonth, usize)>,
    /// The longest contiguous run of months that meet the threshold.
    pub usable: Vec<YearMonth>,
}

impl MonthCensus {
    pub fn render(&self) -> String {
        let mut s = format!(
            "month census (threshold {} articles/month):\n",
            self.min_month_articles
        );
        for (ym, n) in &self.months {
            let mark = if self.usable.contains(ym) { "*" } else { " " };
            let _ = writeln!(s, "  {mark} {ym}  {n}");
        }
        s
    }
}

/// Count dated articles per calendar month and pick the longest contiguous
/// run of months with at least `min_articles` each (earliest run on ties).
pub fn month_census(corpus: &Corpus, min_articles: usize) -> MonthCensus {
    let mut counts: BTreeMap<YearMonth, usize> = BTreeMap::new();
    for a in &corpus.articles {
        if let Some(d) = a.published {
            *counts.entry(YearMonth::of(d)).or_default() += 1;
        }
    }
    let mut best: Vec<YearMonth> = Vec::new();
    let mut cur: Vec<YearMonth> = Vec::new();
    for (&ym, &n) in &counts {
        let contiguous = cur.last().is_some_and(|last| last.next() == ym);
        if n >= min_articles {
            if !contiguous {
                cur.clear();
            }
            cur.push(ym);
            if cur.len() > best.len() {
                best = cur.clone();
            }
        } else {
            cur.clear();
        }
    }
    MonthCensus {
        min_month_articles: min_articles,
        months: counts.into_iter().collect(),
        usable: best,
    }
}

/// Cumulative monthly split: train on usable months `1..=month_index`, test
/// on month `month_index + 1`. Undated articles are excluded.
pub fn split_monthly(corpus: &Corpus, spec: &SplitSpec) -> Result<(Corpus, Corpus)> {
    if spec.mode != SplitMode::Monthly {
        return Err(Error::InvalidArgument("split_monthly needs mode=monthly".into()));
    }
    if spec.month_index == 0 {
        return Err(Error::InvalidArgument("month_index is 1-based".into()));
    }
    let census = month_census(corpus, spec.min_month_articles);
    let m = census.usable.len();
    if m < 2 || spec.month_index > m - 1 {
        return Err(Error::TooFewMonths {
            needed: spec.month_index + 1,
            found: m,
            census: census.render(),
        });
    }
    let train_months: BTreeSet<YearMonth> =
        census.usable[..spec.month_index].iter().copied().collect();
    let test_month = census.usable[spec.month_index];
    let month_of = |i: usize| corpus.articles[i].published.map(YearMonth::of);
    let n = corpus.len();
    let train =
        corpus.subset((0..n).filter(|&i| month_of(i).is_some_and(|ym| train_months.contains(&ym))));
    let test = corpus.subset((0..n).filter(|&i| month_of(i) == Some(test_month)));
    Ok((train, test))
}
