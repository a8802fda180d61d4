use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use log::info;
use serde_json::json;

use aste_core::corpus::{
    adjudicate_corpus, corpus_stats, parse_corpus_with, write_corpus, AnnotatedReview, CorpusManifest, CorpusStats,
    ParseOptions, Platform,
};
use aste_core::evalkit::{render_report, MetricsReport};
use aste_core::ingest::{filter_reviews, read_platform_export, BlockedPattern, ColumnMap, ExportFormat, FilterPolicy, IngestReport};
use aste_core::pipeline::{self, Extraction, PipelineConfig, PipelineModel, Resources};
use aste_core::synth::{self, SynthConfig};
use aste_core::{Error, Result};

use crate::{Cli, Command, ConfigCommand, GlobalArgs};

pub fn run(cli: Cli) -> Result<()> {
    let g = &cli.global;
    match cli.command {
        Command::Ingest(args) => ingest(g, args),
        Command::Validate(args) => validate(args),
        Command::Adjudicate(args) => adjudicate(g, &args.corpus),
        Command::Stats(args) => stats(g, &args.corpus, args.manifest.as_deref()),
        Command::Train(args) => train(g, args.corpus),
        Command::Extract(args) => extract(g, args),
        Command::Eval(args) => eval(g, args),
        Command::Crossval(args) => crossval(g, args.corpus),
        Command::Synth(args) => synth_corpus(g, args),
        Command::Config(ConfigCommand::Show) => {
            let config = load_config(g)?;
            print!("# digest {}\n{}", config.digest(), config.to_toml()?);
            Ok(())
        }
    }
}

fn load_config(g: &GlobalArgs) -> Result<PipelineConfig> {
    let config = PipelineConfig::load(g.config.as_deref(), &g.overrides)?;
    Ok(match g.seed {
        Some(seed) => config.with_seed(seed),
        None => config,
    })
}

fn user_configured(g: &GlobalArgs) -> bool {
    g.config.is_some() || !g.overrides.is_empty() || g.seed.is_some()
}

fn read_corpus(path: &Path, require_annotations: bool) -> Result<Vec<AnnotatedReview>> {
    let file = fs::File::open(path).map_err(|e| io_err(path, e))?;
    parse_corpus_with(BufReader::new(file), ParseOptions { require_annotations })
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_owned(),
        source,
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| io_err(path, e))
}

fn write_corpus_file(path: &Path, corpus: &[AnnotatedReview]) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| io_err(path, e))?;
    let mut sink = BufWriter::new(file);
    write_corpus(&mut sink, corpus)?;
    sink.flush().map_err(|e| io_err(path, e))
}

fn require<'a>(value: Option<&'a PathBuf>, what: &str) -> Result<&'a PathBuf> {
    value.ok_or_else(|| Error::Config(format!("no {what} given")))
}

fn ingest(g: &GlobalArgs, args: crate::IngestArgs) -> Result<()> {
    let out = require(g.out.as_ref(), "output directory (--out)")?;
    let mut policy = FilterPolicy::default();
    if let Some(r) = args.max_emoji_ratio {
        policy.max_emoji_ratio = r;
    }
    if let Some(n) = args.min_words {
        policy.min_word_count = n;
    }
    policy.dedupe = !args.keep_duplicates;
    policy.blocked_patterns.extend(args.blocked.into_iter().map(BlockedPattern::Literal));
    policy.validate()?;
    let columns = ColumnMap {
        text: args.text_column,
        collected_at: args.date_column,
        product_category: args.category_column,
    };
    let mut reviews = Vec::new();
    let mut empty_rows = 0;
    for path in &args.inputs {
        let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
        let format = args
            .format
            .or_else(|| ExportFormat::from_extension(path))
            .ok_or_else(|| Error::Config(format!("{}: cannot tell the export format; pass --format", path.display())))?;
        let read = read_platform_export(&bytes, format, args.platform, &columns).map_err(|e| match e {
            Error::Parse { line, field, message } => Error::Parse {
                line,
                field,
                message: format!("{}: {message}", path.display()),
            },
            other => Error::Invalid(format!("{}: {other}", path.display())),
        })?;
        info!("stage=ingest file={} rows={} empty={}", path.display(), read.rows, read.empty_rows);
        empty_rows += read.empty_rows;
        reviews.extend(read.reviews);
    }
    let outcome = filter_reviews(&reviews, &policy)?;
    let mut report: IngestReport = outcome.report;
    report.record_empty_rows(empty_rows);
    let corpus: Vec<AnnotatedReview> = outcome
        .kept
        .into_iter()
        .map(|review| AnnotatedReview {
            review,
            annotations: Vec::new(),
            gold: None,
        })
        .collect();
    create_dir(out)?;
    write_corpus_file(&out.join("corpus.jsonl"), &corpus)?;
    let report_json = serde_json::to_string_pretty(&json!({
        "report": report,
        "rejections": outcome.rejections,
    }))?;
    write_text(&out.join("ingest_report.json"), &report_json)?;
    info!(
        "stage=ingest input={} accepted={} duplicates_removed={}",
        report.input, report.accepted, report.duplicates_removed
    );
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

fn validate(args: crate::ValidateArgs) -> Result<()> {
    let corpus = read_corpus(&args.corpus, !args.allow_unannotated)?;
    let with_gold = corpus.iter().filter(|r| r.gold.is_some()).count();
    if let Some(path) = &args.manifest {
        check_manifest(path, &corpus)?;
    }
    println!("ok: {} records, {} with gold", corpus.len(), with_gold);
    Ok(())
}

fn check_manifest(path: &Path, corpus: &[AnnotatedReview]) -> Result<CorpusStats> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let manifest = CorpusManifest::from_json(&text)?;
    manifest
        .check_identities()
        .map_err(|p| Error::Invalid(format!("manifest {}: {}", path.display(), p.join("; "))))?;
    let stats = corpus_stats(corpus)?;
    manifest
        .verify(&stats)
        .map_err(|p| Error::Invalid(format!("corpus does not match {}: {}", path.display(), p.join("; "))))?;
    Ok(stats)
}

fn adjudicate(g: &GlobalArgs, path: &Path) -> Result<()> {
    let out = require(g.out.as_ref(), "output directory (--out)")?;
    let mut corpus = read_corpus(path, true)?;
    let conflicts = adjudicate_corpus(&mut corpus)?;
    create_dir(out)?;
    write_corpus_file(&out.join("corpus.jsonl"), &corpus)?;
    let conflict_json: serde_json::Map<String, serde_json::Value> = conflicts
        .iter()
        .map(|(id, ts)| {
            let keys: Vec<_> = ts.iter().map(|t| t.key()).collect();
            (id.clone(), json!(keys))
        })
        .collect();
    write_text(&out.join("conflicts.json"), &serde_json::to_string_pretty(&conflict_json)?)?;
    println!("adjudicated {} records, {} with conflicts", corpus.len(), conflicts.len());
    Ok(())
}

fn render_stats(stats: &CorpusStats) -> String {
    let mut out = String::new();
    out.push_str(&format!("{:<16}{:>10}\n", "Platform", "Reviews"));
    for p in Platform::ALL {
        let n = stats.per_platform.get(&p).copied().unwrap_or(0);
        out.push_str(&format!("{:<16}{:>10}\n", p.as_str(), n));
    }
    out.push_str(&format!("{:<16}{:>10}\n", "total", stats.total_reviews));
    if !stats.per_category.is_empty() {
        out.push_str(&format!(
            "\n{:<20}{:>8}{:>10}{:>10}{:>9}\n",
            "Aspect category", "Total", "Positive", "Negative", "Neutral"
        ));
        for (cat, c) in &stats.per_category {
            out.push_str(&format!(
                "{:<20}{:>8}{:>10}{:>10}{:>9}\n",
                cat, c.total, c.positive, c.negative, c.neutral
            ));
        }
    }
    out
}

fn stats(g: &GlobalArgs, path: &Path, manifest: Option<&Path>) -> Result<()> {
    let corpus = read_corpus(path, false)?;
    let stats = match manifest {
        Some(m) => check_manifest(m, &corpus)?,
        None => corpus_stats(&corpus)?,
    };
    print!("{}", render_stats(&stats));
    if let Some(out) = &g.out {
        create_dir(out)?;
        write_text(&out.join("stats.json"), &serde_json::to_string_pretty(&stats)?)?;
    }
    Ok(())
}

fn corpus_path(arg: Option<PathBuf>, config: &PipelineConfig) -> Result<PathBuf> {
    arg.or_else(|| config.paths.corpus.clone())
        .ok_or_else(|| Error::Config("no corpus given (argument or paths.corpus)".into()))
}

fn train(g: &GlobalArgs, corpus: Option<PathBuf>) -> Result<()> {
    let config = load_config(g)?;
    let corpus_path = corpus_path(corpus, &config)?;
    let out = g
        .out
        .clone()
        .or_else(|| config.paths.bundle.clone())
        .ok_or_else(|| Error::Config("no bundle directory given (--out or paths.bundle)".into()))?;
    let corpus = read_corpus(&corpus_path, false)?;
    let resources = Resources::load(&config)?;
    let (model, log) = PipelineModel::train(&config, &corpus, &resources)?;
    model.save(&out)?;
    info!("stage=bundle path={} digest={}", out.display(), model.digest());
    println!("{}", serde_json::to_string_pretty(&log)?);
    Ok(())
}

fn load_bundle(g: &GlobalArgs, bundle: Option<PathBuf>, allow_mismatch: bool) -> Result<PipelineModel> {
    let config = if user_configured(g) { Some(load_config(g)?) } else { None };
    let dir = bundle
        .or_else(|| config.as_ref().and_then(|c| c.paths.bundle.clone()))
        .ok_or_else(|| Error::Config("no bundle given (--bundle or paths.bundle)".into()))?;
    let model = PipelineModel::load(&dir, None)?;
    if let Some(config) = config {
        let (have, want) = (model.digest(), config.digest());
        if have != want {
            if !allow_mismatch {
                return Err(Error::DigestMismatch {
                    bundle: have,
                    config: want,
                });
            }
            log::warn!("stage=bundle digest_mismatch bundle={have} config={want}");
        }
    }
    Ok(model)
}

fn extraction_json(e: &Extraction) -> serde_json::Value {
    json!({
        "aspect": {"start": e.triplet.aspect.start, "end": e.triplet.aspect.end, "text": e.aspect_text},
        "opinion": {"start": e.triplet.opinion.start, "end": e.triplet.opinion.end, "text": e.opinion_text},
        "polarity": e.triplet.polarity,
        "confidence": e.confidence,
    })
}

fn extract(g: &GlobalArgs, args: crate::ExtractArgs) -> Result<()> {
    let model = load_bundle(g, args.bundle, args.allow_digest_mismatch)?;
    let mut lines = Vec::new();
    match (&args.text, &args.corpus) {
        (Some(text), _) => {
            let triplets = model.extract_text("text", text)?;
            lines.push(json!({"id": "text", "triplets": triplets.iter().map(extraction_json).collect::<Vec<_>>()}));
        }
        (None, Some(path)) => {
            for record in read_corpus(path, false)? {
                let triplets = model.extract_text(record.id(), &record.review.raw_text)?;
                lines.push(json!({
                    "id": record.id(),
                    "triplets": triplets.iter().map(extraction_json).collect::<Vec<_>>(),
                }));
            }
        }
        (None, None) => return Err(Error::Config("give --text or a corpus file".into())),
    }
    let mut body = String::new();
    for line in &lines {
        body.push_str(&serde_json::to_string(line)?);
        body.push('\n');
    }
    match &g.out {
        Some(out) => {
            create_dir(out)?;
            write_text(&out.join("extractions.jsonl"), &body)?;
        }
        None => print!("{body}"),
    }
    Ok(())
}

fn emit_report(g: &GlobalArgs, report: &MetricsReport) -> Result<()> {
    let table = render_report(report);
    print!("{table}");
    if let Some(out) = &g.out {
        create_dir(out)?;
        write_text(&out.join("report.json"), &report.to_json()?)?;
        write_text(&out.join("report.txt"), &table)?;
    }
    Ok(())
}

fn eval(g: &GlobalArgs, args: crate::EvalArgs) -> Result<()> {
    let model = load_bundle(g, args.bundle, args.allow_digest_mismatch)?;
    let corpus_path = corpus_path(args.corpus, &model.config)?;
    let corpus = read_corpus(&corpus_path, false)?;
    let report = pipeline::evaluate(&model, &corpus)?;
    emit_report(g, &report)
}

fn crossval(g: &GlobalArgs, corpus: Option<PathBuf>) -> Result<()> {
    let config = load_config(g)?;
    let corpus_path = corpus_path(corpus, &config)?;
    let corpus = read_corpus(&corpus_path, false)?;
    let resources = Resources::load(&config)?;
    let report = pipeline::cross_validate(&config, &corpus, &resources)?;
    emit_report(g, &report)
}

fn synth_corpus(g: &GlobalArgs, args: crate::SynthArgs) -> Result<()> {
    let out = require(g.out.as_ref(), "output directory (--out)")?;
    let corpus = synth::generate(&SynthConfig {
        reviews: args.reviews,
        seed: g.seed.unwrap_or(SynthConfig::default().seed),
        max_triplets: args.max_triplets,
        annotators: args.annotators,
        ..SynthConfig::default()
    })?;
    create_dir(out)?;
    write_corpus_file(&out.join("corpus.jsonl"), &corpus)?;
    write_text(&out.join("aspects.txt"), &(synth::aspect_terms().join("\n") + "\n"))?;
    write_text(&out.join("opinions.txt"), &(synth::all_opinion_terms().join("\n") + "\n"))?;
    let mut config = PipelineConfig::default();
    config.paths.corpus = Some("corpus.jsonl".into());
    config.paths.aspect_lexicon = Some("aspects.txt".into());
    config.paths.opinion_lexicon = Some("opinions.txt".into());
    config.paths.bundle = Some("bundle".into());
    write_text(&out.join("config.toml"), &config.to_toml()?)?;
    println!("wrote {} reviews to {}", corpus.len(), out.display());
    Ok(())
}
