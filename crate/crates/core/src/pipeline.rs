//! End-to-end pipeline: configuration, training, extraction and model
//! bundles.
//!
//! Training fits the span scorer on gold spans, then fits the polarity
//! classifier on gold pairs. Extraction runs scoring, pruning, graph
//! matching and polarity prediction, and maps every span back to raw-text
//! character offsets.

use std::collections::BTreeMap;
use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use log::info;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{AnnotatedReview, Polarity, Review, Role, Triplet};
use crate::doc::Document;
use crate::error::{Error, Result};
use crate::evalkit::{self, MatchCriterion, MetricsReport, TripletExtractor};
use crate::pairmatch::{build_pair_graph, match_pairs, MatchPolicy};
use crate::polarity::{
    featurize_pair, mean_pool, predict_polarity, train_polarity, EmbeddingBackend, EmbeddingStore, HashedEmbedding,
    PairFeatures, PolarityConfig, PolarityModel, PrecomputedEmbedding,
};
use crate::spanex::{
    candidate_intervals, prune, score_spans, CandidateSpan, Interval, LogisticConfig, LogisticSpanScorer, SeedLexicon,
    SpanExample, SpanFeaturizer,
};
use crate::textnorm::{SpellingLexicon, StopwordSet, TextProcessor, TokenizedText};

pub const BUNDLE_SCHEMA_VERSION: u32 = 1;

const MANIFEST_FILE: &str = "manifest.json";
const CONFIG_FILE: &str = "config.toml";
const TEXT_FILE: &str = "text.json";
const SCORER_FILE: &str = "scorer.json";
const POLARITY_FILE: &str = "polarity.json";

// ---------------------------------------------------------------------------
// Configuration

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathsConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub corpus: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub aspect_lexicon: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub opinion_lexicon: Option<PathBuf>,
    /// `variant<TAB>canonical` lines.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spelling_lexicon: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stopwords: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub embedding_store: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bundle: Option<PathBuf>,
}

/// Inline normalization resources, merged with the files under `paths`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TextnormConfig {
    pub stopwords: Vec<String>,
    pub spelling: BTreeMap<String, String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpanexConfig {
    pub max_span_len: usize,
    pub tau_s: f64,
    pub top_k: usize,
    pub hash_buckets: usize,
    /// Append pooled token embeddings to the span features.
    pub use_embeddings: bool,
    /// Inline seed terms, merged with the lexicon files.
    pub aspect_terms: Vec<String>,
    pub opinion_terms: Vec<String>,
    pub logistic: LogisticConfig,
}

impl Default for SpanexConfig {
    fn default() -> Self {
        SpanexConfig {
            max_span_len: 4,
            tau_s: 0.5,
            top_k: 10,
            hash_buckets: 1 << 14,
            use_embeddings: false,
            aspect_terms: Vec::new(),
            opinion_terms: Vec::new(),
            logistic: LogisticConfig::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    #[default]
    Hashed,
    Precomputed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EmbeddingConfig {
    pub backend: BackendKind,
    /// Dimension of the hashed backend; the precomputed store sets its own.
    pub dim: usize,
    pub seed: u64,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        EmbeddingConfig {
            backend: BackendKind::Hashed,
            dim: 64,
            seed: 42,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    pub k: usize,
    pub seed: u64,
    pub criterion: MatchCriterion,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            k: 5,
            seed: 42,
            criterion: MatchCriterion::Exact,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub paths: PathsConfig,
    pub textnorm: TextnormConfig,
    pub spanex: SpanexConfig,
    pub pairmatch: MatchPolicy<f64>,
    pub embedding: EmbeddingConfig,
    pub polarity: PolarityConfig,
    pub eval: EvalConfig,
}

#[derive(Serialize)]
struct DigestView<'a> {
    textnorm: &'a TextnormConfig,
    spanex: &'a SpanexConfig,
    pairmatch: &'a MatchPolicy<f64>,
    embedding: &'a EmbeddingConfig,
    polarity: &'a PolarityConfig,
    eval: &'a EvalConfig,
}

impl PipelineConfig {
    /// Parses TOML, applies `key.path=value` overrides, then validates.
    pub fn from_toml_with_overrides(source: &str, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table = toml::from_str(source).map_err(|e| Error::Config(e.to_string()))?;
        for item in overrides {
            apply_override(&mut table, item)?;
        }
        let config: PipelineConfig =
            toml::Value::Table(table).try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_toml(source: &str) -> Result<Self> {
        Self::from_toml_with_overrides(source, &[])
    }

    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let source = match path {
            Some(p) => fs::read_to_string(p).map_err(|e| Error::io(p, e))?,
            None => String::new(),
        };
        let mut config = Self::from_toml_with_overrides(&source, overrides)?;
        if let Some(dir) = path.and_then(Path::parent) {
            config.paths.resolve_against(dir);
        }
        Ok(config)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Sets every seed in the configuration.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.spanex.logistic.seed = seed;
        self.embedding.seed = seed;
        self.polarity.booster.seed = seed;
        self.polarity.linear.seed = seed;
        self.eval.seed = seed;
        self
    }

    /// SHA-256 over everything except `paths`, hex encoded.
    pub fn digest(&self) -> String {
        let view = DigestView {
            textnorm: &self.textnorm,
            spanex: &self.spanex,
            pairmatch: &self.pairmatch,
            embedding: &self.embedding,
            polarity: &self.polarity,
            eval: &self.eval,
        };
        let bytes = serde_json::to_vec(&view).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        let s = &self.spanex;
        if !(1..=16).contains(&s.max_span_len) {
            return fail(format!("spanex.max_span_len {} outside 1..=16", s.max_span_len));
        }
        if !(0.0..=1.0).contains(&s.tau_s) {
            return fail(format!("spanex.tau_s {} outside [0, 1]", s.tau_s));
        }
        if s.top_k == 0 {
            return fail("spanex.top_k must be positive".into());
        }
        if s.hash_buckets < 16 {
            return fail("spanex.hash_buckets must be at least 16".into());
        }
        let l = &s.logistic;
        if l.epochs == 0 || !(l.learning_rate > 0.0) || l.l2 < 0.0 || l.decay < 0.0 || !(l.max_pos_weight >= 1.0) {
            return fail("spanex.logistic needs epochs > 0, learning_rate > 0, l2 >= 0, decay >= 0, max_pos_weight >= 1".into());
        }
        self.pairmatch.validate()?;
        if self.embedding.backend == BackendKind::Hashed && self.embedding.dim < 8 {
            return fail(format!("embedding.dim {} is below 8", self.embedding.dim));
        }
        let b = &self.polarity.booster;
        if b.trees == 0 || b.max_depth == 0 || !(b.learning_rate > 0.0) || b.lambda < 0.0 || b.gamma < 0.0 {
            return fail("polarity.booster needs trees > 0, max_depth > 0, learning_rate > 0, lambda >= 0, gamma >= 0".into());
        }
        if !(b.subsample > 0.0 && b.subsample <= 1.0) {
            return fail(format!("polarity.booster.subsample {} outside (0, 1]", b.subsample));
        }
        if !(2..=256).contains(&b.max_bins) {
            return fail(format!("polarity.booster.max_bins {} outside 2..=256", b.max_bins));
        }
        if self.polarity.linear.epochs == 0 || !(self.polarity.linear.learning_rate > 0.0) {
            return fail("polarity.linear needs epochs > 0 and learning_rate > 0".into());
        }
        if self.eval.k < 2 {
            return fail(format!("eval.k {} is below 2", self.eval.k));
        }
        Ok(())
    }
}

impl PathsConfig {
    fn resolve_against(&mut self, dir: &Path) {
        for p in [
            &mut self.corpus,
            &mut self.aspect_lexicon,
            &mut self.opinion_lexicon,
            &mut self.spelling_lexicon,
            &mut self.stopwords,
            &mut self.embedding_store,
            &mut self.bundle,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        }
    }
}

fn apply_override(table: &mut toml::Table, item: &str) -> Result<()> {
    let (key, raw) = item
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{item}` is not KEY=VALUE")))?;
    let key = key.trim();
    let raw = raw.trim();
    // bare words that are not TOML literals are taken as strings
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_owned()));
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::Config(format!("override key `{key}` is malformed")));
    }
    let mut node = table;
    for part in &parts[..parts.len() - 1] {
        let entry = node
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        node = entry
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("override key `{key}`: `{part}` is not a table")))?;
    }
    node.insert(parts[parts.len() - 1].to_owned(), value);
    Ok(())
}

// ---------------------------------------------------------------------------
// Resources

/// Everything training needs besides the corpus, read once.
#[derive(Clone, Debug, Default)]
pub struct Resources {
    pub processor: TextProcessor,
    pub aspect_terms: Vec<String>,
    pub opinion_terms: Vec<String>,
    pub embedding_store: Option<EmbeddingStore>,
}

fn open(path: &Path) -> Result<BufReader<fs::File>> {
    fs::File::open(path).map(BufReader::new).map_err(|e| Error::io(path, e))
}

fn read_terms(path: &Path) -> Result<Vec<String>> {
    Ok(fs::read_to_string(path)
        .map_err(|e| Error::io(path, e))?
        .lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
        .map(str::to_owned)
        .collect())
}

impl Resources {
    pub fn load(config: &PipelineConfig) -> Result<Self> {
        let paths = &config.paths;
        let mut spelling: Vec<(String, String)> = config.textnorm.spelling.clone().into_iter().collect();
        if let Some(p) = &paths.spelling_lexicon {
            let from_file = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            for (i, line) in from_file.lines().enumerate() {
                if line.trim().is_empty() || line.starts_with('#') {
                    continue;
                }
                let (v, c) = line.split_once('\t').ok_or_else(|| Error::Parse {
                    line: i + 1,
                    field: "canonical".into(),
                    message: format!("{}: expected `variant<TAB>canonical`", p.display()),
                })?;
                spelling.push((v.to_owned(), c.to_owned()));
            }
        }
        let mut stopwords = config.textnorm.stopwords.clone();
        if let Some(p) = &paths.stopwords {
            stopwords.extend(read_terms(p)?);
        }
        let mut aspect_terms = config.spanex.aspect_terms.clone();
        if let Some(p) = &paths.aspect_lexicon {
            aspect_terms.extend(read_terms(p)?);
        }
        let mut opinion_terms = config.spanex.opinion_terms.clone();
        if let Some(p) = &paths.opinion_lexicon {
            opinion_terms.extend(read_terms(p)?);
        }
        let embedding_store = match config.embedding.backend {
            BackendKind::Hashed => None,
            BackendKind::Precomputed => {
                let p = paths
                    .embedding_store
                    .as_ref()
                    .ok_or_else(|| Error::Config("precomputed backend needs paths.embedding_store".into()))?;
                Some(EmbeddingStore::read(open(p)?)?)
            }
        };
        Ok(Resources {
            processor: TextProcessor::new(SpellingLexicon::new(spelling)?, StopwordSet::new(stopwords)),
            aspect_terms,
            opinion_terms,
            embedding_store,
        })
    }
}

fn make_backend(config: &EmbeddingConfig, store: Option<&EmbeddingStore>) -> Result<Box<dyn EmbeddingBackend>> {
    match config.backend {
        BackendKind::Hashed => Ok(Box::new(HashedEmbedding::new(config.dim, config.seed)?)),
        BackendKind::Precomputed => {
            let store = store.ok_or_else(|| Error::Config("precomputed backend has no embedding store".into()))?;
            Ok(Box::new(PrecomputedEmbedding::new(store.clone())))
        }
    }
}

// ---------------------------------------------------------------------------
// Model

/// Per-stage counts from a training run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub reviews: usize,
    pub gold_triplets: usize,
    /// Gold triplets whose spans cover no token.
    pub unaligned_triplets: usize,
    pub spans_enumerated: usize,
    pub aspect_candidates: usize,
    pub opinion_candidates: usize,
    pub pairs_matched: usize,
    pub polarity_examples: usize,
    pub class_counts: BTreeMap<String, usize>,
    pub training_accuracy: f64,
}

/// One extracted triplet with raw-text offsets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Extraction {
    pub triplet: Triplet,
    /// Token intervals in the normalized text.
    pub aspect_tokens: Interval,
    pub opinion_tokens: Interval,
    pub aspect_text: String,
    pub opinion_text: String,
    pub confidence: f64,
    pub distribution: Vec<f64>,
}

pub struct PipelineModel {
    pub config: PipelineConfig,
    pub processor: TextProcessor,
    pub scorer: LogisticSpanScorer,
    pub polarity: PolarityModel,
    backend: Box<dyn EmbeddingBackend>,
}

impl std::fmt::Debug for PipelineModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PipelineModel")
            .field("digest", &self.config.digest())
            .finish_non_exhaustive()
    }
}

/// Token interval covering every token that overlaps `[start, end)` in raw
/// character offsets.
pub fn align_span(text: &TokenizedText, start: usize, end: usize) -> Result<Option<Interval>> {
    let mut first = None;
    let mut last = None;
    for i in 0..text.len() {
        let (s, e) = text.raw_span(i, i)?;
        if s < end && start < e {
            first.get_or_insert(i);
            last = Some(i);
        }
    }
    Ok(first.zip(last).map(|(f, l)| Interval::new(f, l)))
}

fn prepared(id: &str, raw: &str, processor: &TextProcessor, backend: &dyn EmbeddingBackend) -> Result<Document> {
    let mut doc = Document::new(id, raw, processor);
    if !doc.is_empty() {
        doc.embeddings = Some(backend.embed(id, &doc.text)?);
    }
    Ok(doc)
}

struct AlignedTriplet {
    aspect: Interval,
    opinion: Interval,
    polarity: Polarity,
}

impl PipelineModel {
    pub fn train(config: &PipelineConfig, corpus: &[AnnotatedReview], resources: &Resources) -> Result<(Self, TrainLog)> {
        config.validate()?;
        let missing: Vec<String> = corpus
            .iter()
            .filter(|r| r.gold.is_none())
            .map(|r| r.id().to_owned())
            .collect();
        if !missing.is_empty() {
            return Err(Error::Unadjudicated(missing));
        }
        let processor = resources.processor.clone();
        let backend = make_backend(&config.embedding, resources.embedding_store.as_ref())?;
        let mut log = TrainLog {
            reviews: corpus.len(),
            ..TrainLog::default()
        };

        let stage = "textnorm";
        let mut docs = Vec::with_capacity(corpus.len());
        let mut aligned: Vec<Vec<AlignedTriplet>> = Vec::with_capacity(corpus.len());
        for review in corpus {
            let doc = prepared(review.id(), &review.review.raw_text, &processor, backend.as_ref())
                .map_err(|e| e.in_stage(stage))?;
            let mut triplets = Vec::new();
            for t in review.gold.as_deref().unwrap_or(&[]) {
                log.gold_triplets += 1;
                let a = align_span(&doc.text, t.aspect.start, t.aspect.end).map_err(|e| e.in_stage(stage))?;
                let o = align_span(&doc.text, t.opinion.start, t.opinion.end).map_err(|e| e.in_stage(stage))?;
                match (a, o) {
                    (Some(aspect), Some(opinion)) => triplets.push(AlignedTriplet {
                        aspect,
                        opinion,
                        polarity: t.polarity,
                    }),
                    _ => log.unaligned_triplets += 1,
                }
            }
            docs.push(doc);
            aligned.push(triplets);
        }
        info!(
            "stage=textnorm reviews={} gold_triplets={} unaligned={}",
            log.reviews, log.gold_triplets, log.unaligned_triplets
        );

        let stage = "spanex";
        let featurizer = SpanFeaturizer {
            buckets: config.spanex.hash_buckets,
            max_span_len: config.spanex.max_span_len,
            embedding_dim: config.spanex.use_embeddings.then(|| backend.dim()),
            seed: config.spanex.logistic.seed,
            aspects: SeedLexicon::new(&resources.aspect_terms, &processor),
            opinions: SeedLexicon::new(&resources.opinion_terms, &processor),
        };
        let examples: Vec<SpanExample<'_>> = docs
            .iter()
            .zip(&aligned)
            .map(|(doc, ts)| {
                let mut aspects: Vec<Interval> = ts.iter().map(|t| t.aspect).collect();
                let mut opinions: Vec<Interval> = ts.iter().map(|t| t.opinion).collect();
                aspects.dedup();
                opinions.dedup();
                SpanExample { doc, aspects, opinions }
            })
            .collect();
        let scorer = LogisticSpanScorer::train(featurizer, &examples, &config.spanex.logistic)
            .map_err(|e| e.in_stage(stage))?;

        let stage = "polarity";
        let mut features = Vec::new();
        let mut labels = Vec::new();
        for (doc, ts) in docs.iter().zip(&aligned) {
            let Some(vectors) = &doc.embeddings else { continue };
            for t in ts {
                let weight = pair_weight(vectors, t.aspect, t.opinion, &config.pairmatch).map_err(|e| e.in_stage(stage))?;
                features.push(featurize_pair(vectors, t.aspect, t.opinion, weight).map_err(|e| e.in_stage(stage))?);
                labels.push(t.polarity);
            }
        }
        let (polarity, report) = train_polarity(&features, &labels, &config.polarity).map_err(|e| e.in_stage(stage))?;
        log.polarity_examples = features.len();
        log.training_accuracy = report.training_accuracy;
        log.class_counts = Polarity::LABELS
            .iter()
            .map(|p| (p.as_str().to_owned(), report.class_counts[p.index()]))
            .collect();

        let model = PipelineModel {
            config: config.clone(),
            processor,
            scorer,
            polarity,
            backend,
        };

        for doc in &docs {
            let run = model.run(doc).map_err(|e| e.in_stage("extract"))?;
            log.spans_enumerated += run.spans_enumerated;
            log.aspect_candidates += run.aspects;
            log.opinion_candidates += run.opinions;
            log.pairs_matched += run.extractions.len();
        }
        info!(
            "stage=spanex spans_enumerated={} aspect_candidates={} opinion_candidates={}",
            log.spans_enumerated, log.aspect_candidates, log.opinion_candidates
        );
        info!("stage=pairmatch pairs_matched={}", log.pairs_matched);
        info!(
            "stage=polarity examples={} positive={} negative={} neutral={} training_accuracy={:.4}",
            log.polarity_examples,
            report.class_counts[0],
            report.class_counts[1],
            report.class_counts[2],
            log.training_accuracy
        );
        Ok((model, log))
    }

    pub fn digest(&self) -> String {
        self.config.digest()
    }

    /// Triplets for one raw text, sorted by aspect then opinion offsets.
    pub fn extract_text(&self, id: &str, raw: &str) -> Result<Vec<Extraction>> {
        let doc = prepared(id, raw, &self.processor, self.backend.as_ref())?;
        Ok(self.run(&doc)?.extractions)
    }

    fn run(&self, doc: &Document) -> Result<Run> {
        let mut run = Run::default();
        let Some(vectors) = &doc.embeddings else {
            return Ok(run);
        };
        let sx = &self.config.spanex;
        let intervals = candidate_intervals(&doc.text, sx.max_span_len);
        run.spans_enumerated = intervals.len();
        let scored = score_spans(doc, &intervals, &self.scorer)?;
        let (aspects, opinions) = resolve_roles(
            prune(&scored, Role::Aspect, sx.tau_s, sx.top_k),
            prune(&scored, Role::Opinion, sx.tau_s, sx.top_k),
        );
        run.aspects = aspects.len();
        run.opinions = opinions.len();
        if aspects.is_empty() || opinions.is_empty() {
            return Ok(run);
        }
        let pool = |c: &CandidateSpan| mean_pool(vectors, c.span.first, c.span.last);
        let av: Vec<Vec<f64>> = aspects.iter().map(pool).collect();
        let ov: Vec<Vec<f64>> = opinions.iter().map(pool).collect();
        let graph = build_pair_graph(&aspects, &opinions, &av, &ov, &self.config.pairmatch)?;
        for (a, o) in match_pairs(&graph, &self.config.pairmatch) {
            let (asp, op) = (&aspects[a], &opinions[o]);
            let features = featurize_pair(vectors, asp.span, op.span, graph.weight(a, o))?;
            let (label, distribution) = predict_polarity(&self.polarity, &features)?;
            let a_raw = doc.text.raw_span(asp.span.first, asp.span.last)?;
            let o_raw = doc.text.raw_span(op.span.first, op.span.last)?;
            let slice = |(s, e): (usize, usize)| crate::textnorm::char_slice(&doc.raw, s, e).unwrap_or_default().to_owned();
            let confidence = asp.aspect_score.min(op.opinion_score) * distribution[label.index()];
            run.extractions.push(Extraction {
                triplet: Triplet::new(a_raw, o_raw, label),
                aspect_tokens: asp.span,
                opinion_tokens: op.span,
                aspect_text: slice(a_raw),
                opinion_text: slice(o_raw),
                confidence,
                distribution,
            });
        }
        run.extractions.sort_by_key(|x| x.triplet.key());
        Ok(run)
    }

    // -- bundles ------------------------------------------------------------

    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let manifest = BundleManifest {
            schema_version: BUNDLE_SCHEMA_VERSION,
            config_digest: self.digest(),
            label_order: Polarity::LABELS.to_vec(),
            feature_layout: FeatureLayout {
                backend: self.config.embedding.backend,
                embedding_dim: self.backend.dim(),
                pair_features: PairFeatures::dim_for(self.backend.dim()),
                span_features: self.scorer.featurizer.dim(),
            },
            generator: format!("aste {}", env!("CARGO_PKG_VERSION")),
        };
        let text = TextResources {
            spelling: self.processor.lexicon.clone(),
            stopwords: self.processor.stopwords.clone(),
        };
        write_file(&dir.join(MANIFEST_FILE), serde_json::to_string_pretty(&manifest)?)?;
        write_file(&dir.join(CONFIG_FILE), self.config.to_toml()?)?;
        write_file(&dir.join(TEXT_FILE), serde_json::to_string(&text)?)?;
        write_file(&dir.join(SCORER_FILE), serde_json::to_string(&self.scorer)?)?;
        write_file(&dir.join(POLARITY_FILE), serde_json::to_string(&self.polarity)?)?;
        Ok(())
    }

    /// Loads a bundle, checking its schema version and that the stored
    /// configuration still hashes to the recorded digest. A precomputed
    /// backend reads its store from the stored `paths.embedding_store`
    /// unless `store` is given.
    pub fn load(dir: &Path, store: Option<EmbeddingStore>) -> Result<Self> {
        let read = |name: &str| {
            let p = dir.join(name);
            fs::read_to_string(&p).map_err(|e| Error::io(p, e))
        };
        let manifest: BundleManifest = serde_json::from_str(&read(MANIFEST_FILE)?)?;
        if manifest.schema_version != BUNDLE_SCHEMA_VERSION {
            return Err(Error::Bundle(format!(
                "schema version {} is not supported (expected {BUNDLE_SCHEMA_VERSION})",
                manifest.schema_version
            )));
        }
        if manifest.label_order != Polarity::LABELS {
            return Err(Error::Bundle("label order differs from positive, negative, neutral".into()));
        }
        let config = PipelineConfig::from_toml(&read(CONFIG_FILE)?)?;
        let digest = config.digest();
        if digest != manifest.config_digest {
            return Err(Error::DigestMismatch {
                bundle: manifest.config_digest,
                config: digest,
            });
        }
        let text: TextResources = serde_json::from_str(&read(TEXT_FILE)?)?;
        let scorer: LogisticSpanScorer = serde_json::from_str(&read(SCORER_FILE)?)?;
        let polarity: PolarityModel = serde_json::from_str(&read(POLARITY_FILE)?)?;
        let store = match (config.embedding.backend, store) {
            (BackendKind::Precomputed, None) => {
                let p = config
                    .paths
                    .embedding_store
                    .as_ref()
                    .ok_or_else(|| Error::Bundle("precomputed backend without an embedding store path".into()))?;
                Some(EmbeddingStore::read(open(p)?)?)
            }
            (_, s) => s,
        };
        let backend = make_backend(&config.embedding, store.as_ref())?;
        if backend.dim() != manifest.feature_layout.embedding_dim {
            return Err(Error::Bundle(format!(
                "embedding dimension {} differs from the bundle's {}",
                backend.dim(),
                manifest.feature_layout.embedding_dim
            )));
        }
        if polarity.n_features != PairFeatures::dim_for(backend.dim()) {
            return Err(Error::Bundle("polarity model feature count does not fit the embedding dimension".into()));
        }
        Ok(PipelineModel {
            config,
            processor: TextProcessor::new(text.spelling, text.stopwords),
            scorer,
            polarity,
            backend,
        })
    }
}

impl TripletExtractor for PipelineModel {
    fn extract(&self, review: &Review) -> Result<Vec<Triplet>> {
        Ok(self
            .extract_text(&review.id, &review.raw_text)?
            .into_iter()
            .map(|e| e.triplet)
            .collect())
    }
}

#[derive(Default)]
struct Run {
    spans_enumerated: usize,
    aspects: usize,
    opinions: usize,
    extractions: Vec<Extraction>,
}

fn pair_weight(vectors: &[Vec<f64>], aspect: Interval, opinion: Interval, policy: &MatchPolicy<f64>) -> Result<f64> {
    let a = CandidateSpan {
        span: aspect,
        aspect_score: 1.0,
        opinion_score: 0.0,
    };
    let o = CandidateSpan {
        span: opinion,
        aspect_score: 0.0,
        opinion_score: 1.0,
    };
    let graph = build_pair_graph(
        &[a],
        &[o],
        &[mean_pool(vectors, aspect.first, aspect.last)],
        &[mean_pool(vectors, opinion.first, opinion.last)],
        policy,
    )?;
    Ok(graph.weight(0, 0))
}

/// Drops cross-role overlaps: where an aspect and an opinion candidate
/// overlap, the one with the higher score for its own role stays (the
/// aspect on ties).
pub fn resolve_roles(aspects: Vec<CandidateSpan>, opinions: Vec<CandidateSpan>) -> (Vec<CandidateSpan>, Vec<CandidateSpan>) {
    let mut all: Vec<(Role, CandidateSpan)> = aspects
        .into_iter()
        .map(|c| (Role::Aspect, c))
        .chain(opinions.into_iter().map(|c| (Role::Opinion, c)))
        .collect();
    all.sort_by(|(ra, a), (rb, b)| {
        b.score(*rb)
            .total_cmp(&a.score(*ra))
            .then(ra.cmp(rb))
            .then(a.span.first.cmp(&b.span.first))
            .then(a.span.last.cmp(&b.span.last))
    });
    let mut kept_a: Vec<CandidateSpan> = Vec::new();
    let mut kept_o: Vec<CandidateSpan> = Vec::new();
    for (role, c) in all {
        let (mine, other) = match role {
            Role::Aspect => (&mut kept_a, &kept_o),
            Role::Opinion => (&mut kept_o, &kept_a),
        };
        if other.iter().all(|k| !k.span.overlaps(&c.span)) {
            mine.push(c);
        }
    }
    kept_a.sort_by_key(|c| (c.span.first, c.span.last));
    kept_o.sort_by_key(|c| (c.span.first, c.span.last));
    (kept_a, kept_o)
}

fn write_file(path: &Path, contents: String) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureLayout {
    pub backend: BackendKind,
    pub embedding_dim: usize,
    pub pair_features: usize,
    pub span_features: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BundleManifest {
    pub schema_version: u32,
    pub config_digest: String,
    pub label_order: Vec<Polarity>,
    pub feature_layout: FeatureLayout,
    pub generator: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TextResources {
    spelling: SpellingLexicon,
    stopwords: StopwordSet,
}

// ---------------------------------------------------------------------------
// Evaluation entry points

pub fn evaluate(model: &PipelineModel, corpus: &[AnnotatedReview]) -> Result<MetricsReport> {
    let criterion = model.config.eval.criterion;
    let tally = evalkit::evaluate(model, corpus, criterion)?;
    Ok(MetricsReport::new(tally.rows(), model.config.eval.seed, model.digest(), criterion))
}

pub fn cross_validate(config: &PipelineConfig, corpus: &[AnnotatedReview], resources: &Resources) -> Result<MetricsReport> {
    config.validate()?;
    evalkit::cross_validate(
        corpus,
        config.eval.k,
        config.eval.seed,
        &config.digest(),
        config.eval.criterion,
        |_, train| PipelineModel::train(config, train, resources).map(|(m, _)| m),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_round_trip() {
        let config = PipelineConfig::default();
        config.validate().unwrap();
        let text = config.to_toml().unwrap();
        assert_eq!(PipelineConfig::from_toml(&text).unwrap(), config);
        assert_eq!(PipelineConfig::from_toml("").unwrap(), config);
    }

    #[test]
    fn overrides_and_unknown_keys() {
        let c = PipelineConfig::from_toml_with_overrides(
            "",
            &["spanex.tau_s=0.25".into(), "pairmatch.cardinality=one_to_many".into(), "eval.k=3".into()],
        )
        .unwrap();
        assert_eq!(c.spanex.tau_s, 0.25);
        assert_eq!(c.pairmatch.cardinality, crate::pairmatch::Cardinality::OneToMany);
        assert_eq!(c.eval.k, 3);
        assert!(PipelineConfig::from_toml("[spanex]\nmystery = 1\n").is_err());
        assert!(PipelineConfig::from_toml_with_overrides("", &["spanex.tau_s=2".into()]).is_err());
        assert!(PipelineConfig::from_toml_with_overrides("", &["nonsense".into()]).is_err());
        assert!(PipelineConfig::from_toml_with_overrides("", &["pairmatch.alpha=0.5".into()]).is_err());
    }

    #[test]
    fn digest_ignores_paths_only() {
        let a = PipelineConfig::default();
        let mut b = a.clone();
        b.paths.corpus = Some("elsewhere.jsonl".into());
        assert_eq!(a.digest(), b.digest());
        assert_eq!(a.digest().len(), 64);
        let c = a.clone().with_seed(7);
        assert_ne!(a.digest(), c.digest());
    }

    #[test]
    fn role_conflicts_keep_the_stronger_claim() {
        let c = |first, last, a, o| CandidateSpan {
            span: Interval::new(first, last),
            aspect_score: a,
            opinion_score: o,
        };
        let (a, o) = resolve_roles(vec![c(0, 0, 0.9, 0.6), c(2, 3, 0.6, 0.1)], vec![c(0, 0, 0.9, 0.6), c(3, 3, 0.2, 0.8)]);
        assert_eq!(a, vec![c(0, 0, 0.9, 0.6)]);
        assert_eq!(o, vec![c(3, 3, 0.2, 0.8)]);
    }

    #[test]
    fn alignment_covers_overlapping_tokens() {
        let text = TextProcessor::default().process("  ফোনের ব্যাটারি, ভালো!");
        assert_eq!(align_span(&text, 8, 16).unwrap(), Some(Interval::new(1, 1)));
        assert_eq!(align_span(&text, 2, 16).unwrap(), Some(Interval::new(0, 1)));
        assert_eq!(align_span(&text, 0, 2).unwrap(), None);
    }
}
