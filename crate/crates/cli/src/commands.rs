use std::fmt;
use std::fs::{self, File};
use std::io::BufReader;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use paraprobe::config::{ConfigError, RunConfig};
use paraprobe::corpus::{build_all_pairs, read_canonical, read_hc3, read_wiki_intro, write_canonical, PairLabel};
use paraprobe::io_util::write_atomic;
use paraprobe::pipeline::{fit, score_pairs, DetectOptions, Detector, FitOptions, ModelFile, PipelineError};
use paraprobe::providers::{
    embedder_with_cache, generator_with_cache, transport_for, ProviderConfig, ProviderError, ProviderKind,
};
use paraprobe::report::DetectionReport;
use paraprobe::scores::{read_score_table, write_score_table};
use paraprobe::vectorstore::VectorStore;

use crate::{Cli, Command, DetectArgs, FitArgs, IngestArgs, InputFormat, OutputFormat, ProviderArg, ReportArgs, ScorePairsArgs};

/// An error that already knows its exit code.
#[derive(Debug)]
pub struct Classified {
    code: u8,
    message: String,
}

impl fmt::Display for Classified {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for Classified {}

fn usage(message: impl Into<String>) -> anyhow::Error {
    Classified {
        code: 1,
        message: message.into(),
    }
    .into()
}

pub fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(c) = cause.downcast_ref::<Classified>() {
            return c.code;
        }
        if cause.is::<ConfigError>() {
            return 1;
        }
        let provider = match cause.downcast_ref::<PipelineError>() {
            Some(PipelineError::Provider(p)) => Some(p),
            _ => cause.downcast_ref::<ProviderError>(),
        };
        if provider.is_some_and(ProviderError::is_transport) {
            return 3;
        }
    }
    2
}

pub fn run(cli: &Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(dir) = &cli.cache_dir {
        cfg.paths.cache_dir = Some(dir.clone());
    }
    if let Some(p) = cli.provider {
        let kind = match p {
            ProviderArg::Mock => ProviderKind::Mock,
            ProviderArg::Openai => ProviderKind::OpenAi,
        };
        cfg.providers.paraphrase.kind = kind;
        cfg.providers.generation.kind = kind;
        cfg.providers.embedding.kind = kind;
    }
    match &cli.command {
        Command::Ingest(a) => ingest(&cfg, a),
        Command::ScorePairs(a) => score(&cfg, a),
        Command::Fit(a) => fit_cmd(cfg, a),
        Command::Detect(a) => detect(cfg, a),
        Command::Report(a) => report(a),
    }
}

fn pick(flag: &Option<PathBuf>, configured: &Option<PathBuf>, what: &str) -> Result<PathBuf> {
    flag.clone()
        .or_else(|| configured.clone())
        .ok_or_else(|| usage(format!("no {what} given (flag or config)")))
}

fn open(path: &Path) -> Result<File> {
    File::open(path).with_context(|| format!("cannot open {}", path.display()))
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| format!("cannot create {}", parent.display()))?;
    }
    write_atomic(path, bytes).with_context(|| format!("cannot write {}", path.display()))
}

fn ingest(cfg: &RunConfig, a: &IngestArgs) -> Result<()> {
    let output = pick(&a.output, &cfg.paths.corpus, "output corpus path")?;
    let file = open(&a.input)?;
    let outcome = match a.format {
        InputFormat::Hc3 => read_hc3(BufReader::new(file), a.limit)?,
        InputFormat::WikiIntro => read_wiki_intro(file, a.limit)?,
    };
    for r in &outcome.rejected {
        log::warn!("rejected: {r}");
    }
    let pairs = build_all_pairs(&outcome.records);
    let mut buf = Vec::new();
    write_canonical(&mut buf, &outcome.records)?;
    write_file(&output, &buf)?;
    println!(
        "{} records, {} HM pairs, {} MM pairs",
        outcome.records.len(),
        pairs.count(PairLabel::Hm),
        pairs.count(PairLabel::Mm)
    );
    if !outcome.rejected.is_empty() {
        println!("{} records rejected", outcome.rejected.len());
    }
    Ok(())
}

fn score(cfg: &RunConfig, a: &ScorePairsArgs) -> Result<()> {
    let corpus = pick(&a.corpus, &cfg.paths.corpus, "corpus")?;
    let records = read_canonical(BufReader::new(open(&corpus)?))
        .with_context(|| format!("reading {}", corpus.display()))?;
    let pairs = build_all_pairs(&records);
    if pairs.pairs.is_empty() {
        anyhow::bail!("{} contains no comparable pairs", corpus.display());
    }
    let emb_cfg = &cfg.providers.embedding;
    let embedder = embedder_with_cache(emb_cfg, transport_for(&[emb_cfg])?, cfg.paths.cache_dir.as_deref())?;
    let store_path = a.vector_store.clone().or_else(|| cfg.paths.vector_store.clone());
    let mut store = store_path.as_ref().map(|_| VectorStore::new());

    let outcome = score_pairs(&pairs.pairs, &*embedder, store.as_mut());
    let mut buf = Vec::new();
    write_score_table(&mut buf, &outcome.rows)?;
    write_file(&a.output, &buf)?;
    if let (Some(path), Some(store)) = (&store_path, &store) {
        store.save(path)?;
    }
    let scored = pairs.pairs.len() - outcome.failures.len();
    println!(
        "{scored} pairs scored, {} sentence rows, {} document rows",
        outcome.rows.len() - scored,
        scored
    );
    if outcome.failures.is_empty() {
        return Ok(());
    }
    println!("{} pairs failed:", outcome.failures.len());
    for f in &outcome.failures {
        println!("  {}: {}", f.pair_id, f.reason);
    }
    let code = if outcome.failures.iter().any(|f| f.transport) { 3 } else { 2 };
    Err(Classified {
        code,
        message: format!(
            "{} of {} pairs failed; partial score table written to {}",
            outcome.failures.len(),
            pairs.pairs.len(),
            a.output.display()
        ),
    }
    .into())
}

fn fit_cmd(mut cfg: RunConfig, a: &FitArgs) -> Result<()> {
    if let Some(f) = a.train_fraction {
        cfg.split.train_fraction = f;
    }
    if let Some(s) = a.seed {
        cfg.split.seed = s;
    }
    if let Some(s) = a.sweep_step {
        cfg.sweep_step = s;
    }
    if let Some(p) = a.positive_class {
        cfg.positive_class = p;
    }
    cfg.validate()?;
    let out_dir = pick(&a.output_dir, &cfg.paths.output_dir, "output directory")?;
    let rows = read_score_table(open(&a.scores)?).with_context(|| format!("reading {}", a.scores.display()))?;
    let opts = FitOptions {
        level: a.level,
        split: cfg.split,
        sweep_step: cfg.sweep_step,
        positive: cfg.positive_class,
    };
    let mut fitted = fit(&rows, &opts)?;
    if let Some(p) = fitted.file.provenance.as_mut() {
        p.score_table = a.scores.file_name().map(|n| n.to_string_lossy().into_owned());
    }
    let level = a.level.as_str();
    fs::create_dir_all(&out_dir).with_context(|| format!("cannot create {}", out_dir.display()))?;
    let outputs = [
        (format!("lda-{level}.json"), fitted.file.to_json()),
        (format!("stats-{level}.csv"), fitted.stats_csv()),
        (format!("kde-{level}.csv"), fitted.kde_csv()),
        (format!("confusion-{level}.csv"), fitted.confusion_csv()),
        (format!("metrics-{level}.csv"), fitted.metrics_csv()),
    ];
    for (name, body) in &outputs {
        write_file(&out_dir.join(name), body.as_bytes())?;
    }
    let m = &fitted.file.model;
    let prov = fitted.file.provenance.as_ref().expect("fit records provenance");
    println!(
        "{level}: threshold {}, train accuracy {:.4}, test accuracy {:.4} ({} train / {} test rows)",
        m.threshold, prov.train_accuracy, prov.test_accuracy, prov.n_train, prov.n_test
    );
    Ok(())
}

fn detect(mut cfg: RunConfig, a: &DetectArgs) -> Result<()> {
    if let Some(k) = a.k {
        cfg.k = k;
    }
    if a.paraphrase {
        cfg.use_paraphrasing = true;
    }
    if a.exclude_original {
        if !cfg.use_paraphrasing {
            return Err(usage("--exclude-original requires --paraphrase"));
        }
        cfg.include_original = false;
    }
    cfg.validate()?;

    let question = match (&a.question, &a.question_file) {
        (Some(q), _) => q.clone(),
        (None, Some(p)) => read_text(p)?.trim_end().to_string(),
        (None, None) => unreachable!("clap requires one of them"),
    };
    let response = match (&a.response, &a.response_file) {
        (Some(r), _) => r.clone(),
        (None, Some(p)) => read_text(p)?.trim_end().to_string(),
        (None, None) => unreachable!("clap requires one of them"),
    };
    let sentence_path = pick(&a.sentence_model, &cfg.paths.sentence_model, "sentence model")?;
    let document_path = pick(&a.document_model, &cfg.paths.document_model, "document model")?;
    let sentence_model = ModelFile::load(&sentence_path)?.model;
    let document_model = ModelFile::load(&document_path)?.model;

    let p = &cfg.providers;
    let mut roles: Vec<&ProviderConfig> = vec![&p.generation, &p.embedding];
    if cfg.use_paraphrasing {
        roles.push(&p.paraphrase);
    }
    let transport = transport_for(&roles)?;
    let cache = cfg.paths.cache_dir.as_deref();
    let paraphraser = generator_with_cache(&p.paraphrase, transport.clone(), cache)?;
    let generator = generator_with_cache(&p.generation, transport.clone(), cache)?;
    let embedder = embedder_with_cache(&p.embedding, transport, cache)?;
    let detector = Detector {
        paraphraser: &*paraphraser,
        generator: &*generator,
        embedder: &*embedder,
        sentence_model: &sentence_model,
        document_model: &document_model,
        options: DetectOptions {
            k: cfg.k,
            use_paraphrasing: cfg.use_paraphrasing,
            include_original: cfg.include_original,
            max_concurrency: p.generation.max_concurrency,
        },
        config: cfg.fingerprint(),
    };

    let store_path = a.vector_store.clone().or_else(|| cfg.paths.vector_store.clone());
    let mut store = store_path.as_ref().map(|_| VectorStore::new());
    let report = detector.detect(&question, &response, store.as_mut())?;
    if let (Some(path), Some(store)) = (&store_path, &store) {
        store.save(path)?;
    }

    let json = report.to_json();
    let table = report.render_table();
    if let Some(dir) = a.output_dir.clone().or_else(|| cfg.paths.output_dir.clone()) {
        write_file(&dir.join("report.json"), json.as_bytes())?;
        write_file(&dir.join("report.txt"), table.as_bytes())?;
    }
    match a.format {
        OutputFormat::Table => print!("{table}"),
        OutputFormat::Json => print!("{json}"),
    }
    Ok(())
}

fn report(a: &ReportArgs) -> Result<()> {
    let text = read_text(&a.input)?;
    let report = DetectionReport::from_json(&text).with_context(|| format!("reading {}", a.input.display()))?;
    match a.format {
        OutputFormat::Table => print!("{}", report.render_table()),
        OutputFormat::Json => print!("{}", report.to_json()),
    }
    Ok(())
}
