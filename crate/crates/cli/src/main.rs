//! `swarmfeat` command-line front end.
//!
//! Exit codes: 0 success, 1 pipeline failure, 2 usage or configuration error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use swarmfeat::classify::{ClassifierKind, FeatureSelector};
use swarmfeat::config::RunConfig;
use swarmfeat::container::{train_model, TrainedModel};
use swarmfeat::corpus::{load_corpus, Corpus};
use swarmfeat::harness::{run_ablation, run_stream, write_ablation, write_stream};
use swarmfeat::selftest::run_selftest;

#[derive(Parser, Debug)]
#[command(name = "swarmfeat", version, about = "Fake news detection with swarm-aware embedding features")]
struct Cli {
    /// TOML or JSON run configuration; flags override its values.
    #[arg(long, global = true, env = "SWARMFEAT_CONFIG")]
    config: Option<PathBuf>,
    /// Master seed; every stage seed is derived from it.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (0 = all cores). Strict mode forces 1.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Single-threaded, byte-reproducible run.
    #[arg(long, global = true)]
    strict: bool,
    /// Root directory for run outputs.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Name of the run directory under --out.
    #[arg(long, global = true)]
    run_id: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct DataArgs {
    /// CSV with fake articles.
    #[arg(long)]
    fake: Option<PathBuf>,
    /// CSV with real articles.
    #[arg(long)]
    real: Option<PathBuf>,
    /// Prepared corpus JSON written by `prepare`.
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Balanced random subsample of this many articles.
    #[arg(long)]
    subsample: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Load, scrub and cache the corpus; write a summary.
    Prepare {
        #[command(flatten)]
        data: DataArgs,
    },
    /// Train one feature/classifier model and save it.
    Train {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value = "all")]
        features: FeatureSelector,
        #[arg(long, default_value = "rf")]
        classifier: ClassifierKind,
        /// Output model path (default: <run dir>/model.swpm).
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Feature-family ablation on a random split.
    Ablation {
        #[command(flatten)]
        data: DataArgs,
        /// Feature rows, e.g. `text`, `text+metric`, `all` (repeatable).
        #[arg(long)]
        features: Vec<FeatureSelector>,
        /// Classifier kinds: lr, mlp, rf, gbdt (repeatable).
        #[arg(long)]
        classifier: Vec<ClassifierKind>,
    },
    /// Monthly cumulative-train, next-month-test experiment.
    Stream {
        #[command(flatten)]
        data: DataArgs,
        /// Number of streaming rounds.
        #[arg(long)]
        months: Option<usize>,
        #[arg(long)]
        classifier: Option<ClassifierKind>,
        /// Minimum articles for a month to count as usable.
        #[arg(long)]
        min_month_articles: Option<usize>,
    },
    /// Dataset-free oracle checks.
    Selftest,
    /// Describe a saved model.
    InspectModel { path: PathBuf },
}

enum Failure {
    Usage(anyhow::Error),
    Pipeline(anyhow::Error),
}

type CmdResult = Result<(), Failure>;

fn usage<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure::Usage(e.into())
}

fn pipeline<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure::Pipeline(e.into())
}

fn read_config(path: &Path) -> anyhow::Result<RunConfig> {
    let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    let cfg = if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
    } else {
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
    };
    Ok(cfg)
}

fn base_config(cli: &Cli) -> anyhow::Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => read_config(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(j) = cli.jobs {
        cfg.jobs = j;
    }
    if cli.strict {
        cfg.strict = true;
    }
    if let Some(o) = &cli.out {
        cfg.out_dir = o.clone();
    }
    if let Some(r) = &cli.run_id {
        cfg.run_id = Some(r.clone());
    }
    Ok(cfg)
}

fn apply_data(cfg: &mut RunConfig, d: &DataArgs) {
    if d.fake.is_some() {
        cfg.data.fake = d.fake.clone();
    }
    if d.real.is_some() {
        cfg.data.real = d.real.clone();
    }
    if d.corpus.is_some() {
        cfg.data.corpus = d.corpus.clone();
    }
    if d.subsample.is_some() {
        cfg.subsample = d.subsample;
    }
}

/// Resolve, create the run directory and write the config echo.
fn start_run(cfg: RunConfig) -> Result<(RunConfig, PathBuf), Failure> {
    let cfg = cfg.resolved().map_err(usage)?;
    let threads = if cfg.strict { 1 } else { cfg.jobs };
    // a second initialization only happens in-process and is harmless
    let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    let dir = cfg.run_dir();
    fs::create_dir_all(&dir)
        .with_context(|| format!("creating {}", dir.display()))
        .map_err(pipeline)?;
    let toml_text = toml::to_string(&cfg).context("serializing config").map_err(pipeline)?;
    fs::write(dir.join("config.toml"), &toml_text).map_err(pipeline)?;
    fs::write(dir.join("config.json"), serde_json::to_string_pretty(&cfg).map_err(pipeline)?).map_err(pipeline)?;
    eprintln!("run directory: {}", dir.display());
    eprintln!("resolved config:\n{toml_text}");
    Ok((cfg, dir))
}

fn load_data(cfg: &RunConfig) -> Result<Corpus, Failure> {
    if let Some(p) = &cfg.data.corpus {
        return Corpus::read_json(p).map_err(pipeline);
    }
    match (&cfg.data.fake, &cfg.data.real) {
        (Some(f), Some(r)) => Ok(load_corpus(f, r).map_err(pipeline)?.scrubbed()),
        _ => Err(usage(anyhow::anyhow!(
            "no data: pass --fake and --real, or --corpus, or set [data] in the config"
        ))),
    }
}

fn cmd_prepare(cfg: RunConfig, data: &DataArgs) -> CmdResult {
    let mut cfg = cfg;
    apply_data(&mut cfg, data);
    let (Some(fake), Some(real)) = (cfg.data.fake.clone(), cfg.data.real.clone()) else {
        return Err(usage(anyhow::anyhow!("prepare needs --fake and --real")));
    };
    let (_, dir) = start_run(cfg)?;
    let raw = load_corpus(&fake, &real).map_err(pipeline)?;
    let clean = raw.scrubbed();
    let cache = dir.join("corpus.json");
    clean.write_json(&cache).map_err(pipeline)?;
    let summary = serde_json::json!({
        "loaded": raw.summary(),
        "prepared": clean.summary(),
    });
    let text = serde_json::to_string_pretty(&summary).map_err(pipeline)?;
    fs::write(dir.join("summary.json"), &text).map_err(pipeline)?;
    let s = clean.summary();
    println!(
        "loaded {} fake / {} real; kept {} articles ({} scrubbed, {} dropped empty, {} undated, {} malformed rows)",
        raw.count(swarmfeat::corpus::Label::Fake),
        raw.count(swarmfeat::corpus::Label::Real),
        s.total,
        s.provenance.scrubbed,
        s.provenance.dropped_empty,
        s.undated,
        s.provenance.malformed_rows
    );
    println!("cache: {}", cache.display());
    Ok(())
}

fn cmd_train(
    cfg: RunConfig,
    data: &DataArgs,
    features: &FeatureSelector,
    kind: ClassifierKind,
    model_path: Option<PathBuf>,
) -> CmdResult {
    let mut cfg = cfg;
    apply_data(&mut cfg, data);
    cfg.features = vec![features.clone()];
    cfg.classifiers = vec![kind];
    let (cfg, dir) = start_run(cfg)?;
    let corpus = load_data(&cfg)?;
    let corpus = match cfg.subsample {
        Some(n) if n < corpus.len() => {
            swarmfeat::harness::balanced_subsample(&corpus, n, swarmfeat::rng::stage_seed(cfg.seed, "subsample"))
        }
        _ => corpus,
    };
    let (model, report) = train_model(&corpus, &cfg, features, kind).map_err(pipeline)?;
    let path = model_path.unwrap_or_else(|| dir.join("model.swpm"));
    model.save(&path).map_err(pipeline)?;
    fs::write(
        dir.join("train_report.json"),
        serde_json::to_string_pretty(&report).map_err(pipeline)?,
    )
    .map_err(pipeline)?;
    println!(
        "{} / {}: accuracy {:.2}%, f1 {:.2}% on {} held-out articles",
        features,
        kind,
        100.0 * report.accuracy,
        100.0 * report.f1,
        report.total()
    );
    println!("model: {}", path.display());
    Ok(())
}

fn cmd_ablation(cfg: RunConfig, data: &DataArgs, features: &[FeatureSelector], kinds: &[ClassifierKind]) -> CmdResult {
    let mut cfg = cfg;
    apply_data(&mut cfg, data);
    if !features.is_empty() {
        cfg.features = features.to_vec();
    }
    if !kinds.is_empty() {
        cfg.classifiers = kinds.to_vec();
    }
    let (cfg, dir) = start_run(cfg)?;
    let corpus = load_data(&cfg)?;
    let result = run_ablation(&corpus, &cfg).map_err(pipeline)?;
    write_ablation(&dir, &result).map_err(pipeline)?;
    print!("{}", result.render());
    Ok(())
}

fn cmd_stream(
    cfg: RunConfig,
    data: &DataArgs,
    months: Option<usize>,
    kind: Option<ClassifierKind>,
    min_month: Option<usize>,
) -> CmdResult {
    let mut cfg = cfg;
    apply_data(&mut cfg, data);
    if let Some(m) = months {
        cfg.split.months = m;
    }
    if let Some(k) = kind {
        cfg.stream_classifier = k;
    }
    if let Some(m) = min_month {
        cfg.split.min_month_articles = m;
    }
    let (cfg, dir) = start_run(cfg)?;
    let corpus = load_data(&cfg)?;
    let result = run_stream(&corpus, &cfg).map_err(pipeline)?;
    write_stream(&dir, &result).map_err(pipeline)?;
    print!("{}", result.render());
    Ok(())
}

fn cmd_selftest(cfg: RunConfig) -> CmdResult {
    let seed = cfg.seed;
    let checks = run_selftest(seed);
    let mut failed = 0;
    for c in &checks {
        println!("{}", c.line());
        failed += usize::from(!c.passed);
    }
    if failed > 0 {
        return Err(pipeline(anyhow::anyhow!("{failed} selftest check(s) failed")));
    }
    println!("all {} checks passed", checks.len());
    Ok(())
}

fn cmd_inspect(path: &Path) -> CmdResult {
    let model = TrainedModel::load(path).map_err(pipeline)?;
    print!("{}", model.describe());
    Ok(())
}

fn run(cli: Cli) -> CmdResult {
    let cfg = base_config(&cli).map_err(usage)?;
    match &cli.command {
        Command::Prepare { data } => cmd_prepare(cfg, data),
        Command::Train {
            data,
            features,
            classifier,
            model,
        } => cmd_train(cfg, data, features, *classifier, model.clone()),
        Command::Ablation {
            data,
            features,
            classifier,
        } => cmd_ablation(cfg, data, features, classifier),
        Command::Stream {
            data,
            months,
            classifier,
            min_month_articles,
        } => cmd_stream(cfg, data, *months, *classifier, *min_month_articles),
        Command::Selftest => cmd_selftest(cfg),
        Command::InspectModel { path } => cmd_inspect(path),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Pipeline(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

