//! Candidate span enumeration, scoring and pruning.

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::io::BufRead;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::Role;
use crate::doc::Document;
use crate::error::{Error, Result};
use crate::textnorm::{TextProcessor, TokenizedText};

/// Inclusive token-index interval `[first, last]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Interval {
    pub first: usize,
    pub last: usize,
}

impl Interval {
    pub fn new(first: usize, last: usize) -> Self {
        debug_assert!(first <= last);
        Interval { first, last }
    }

    pub fn len(&self) -> usize {
        self.last - self.first + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn overlaps(&self, other: &Interval) -> bool {
        self.first <= other.last && other.first <= self.last
    }

    /// Tokens strictly between the two intervals; zero when adjacent or
    /// overlapping.
    pub fn gap(&self, other: &Interval) -> usize {
        if other.first > self.last {
            other.first - self.last - 1
        } else if self.first > other.last {
            self.first - other.last - 1
        } else {
            0
        }
    }
}

/// All intervals of width `1..=max_len` over `n` tokens, in lexicographic
/// order.
pub fn enumerate_spans(n: usize, max_len: usize) -> Vec<Interval> {
    let mut out = Vec::new();
    for first in 0..n {
        for last in first..n.min(first + max_len) {
            out.push(Interval::new(first, last));
        }
    }
    out
}

/// Number of intervals [`enumerate_spans`] yields.
pub fn span_count(n: usize, max_len: usize) -> usize {
    (1..=max_len.min(n)).map(|w| n - w + 1).sum()
}

/// Enumerated intervals that neither start nor end on a stopword.
pub fn candidate_intervals(text: &TokenizedText, max_len: usize) -> Vec<Interval> {
    enumerate_spans(text.len(), max_len)
        .into_iter()
        .filter(|iv| !text.tokens[iv.first].is_stopword && !text.tokens[iv.last].is_stopword)
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateSpan {
    pub span: Interval,
    pub aspect_score: f64,
    pub opinion_score: f64,
}

impl CandidateSpan {
    pub fn score(&self, role: Role) -> f64 {
        match role {
            Role::Aspect => self.aspect_score,
            Role::Opinion => self.opinion_score,
        }
    }

    fn other_score(&self, role: Role) -> f64 {
        match role {
            Role::Aspect => self.opinion_score,
            Role::Opinion => self.aspect_score,
        }
    }
}

/// Scores a span for both roles. Implementations must be deterministic and
/// return scores in `[0, 1]`.
pub trait SpanScorer {
    fn score(&self, doc: &Document, span: Interval) -> Result<(f64, f64)>;

    fn score_batch(&self, doc: &Document, spans: &[Interval]) -> Result<Vec<(f64, f64)>> {
        spans.iter().map(|&s| self.score(doc, s)).collect()
    }
}

/// Same scores for every span.
#[derive(Clone, Copy, Debug)]
pub struct ConstantScorer {
    pub aspect: f64,
    pub opinion: f64,
}

impl SpanScorer for ConstantScorer {
    fn score(&self, _doc: &Document, _span: Interval) -> Result<(f64, f64)> {
        Ok((self.aspect, self.opinion))
    }
}

/// Scores every interval, checking bounds and score ranges.
pub fn score_spans(
    doc: &Document,
    candidates: &[Interval],
    scorer: &dyn SpanScorer,
) -> Result<Vec<CandidateSpan>> {
    if let Some(bad) = candidates.iter().find(|iv| iv.first > iv.last || iv.last >= doc.len()) {
        return Err(Error::Scorer {
            start: bad.first,
            end: bad.last,
            message: format!("interval outside a text of {} tokens", doc.len()),
        });
    }
    let scores = scorer.score_batch(doc, candidates)?;
    candidates
        .iter()
        .zip(scores)
        .map(|(&span, (a, o))| {
            if !(0.0..=1.0).contains(&a) || !(0.0..=1.0).contains(&o) {
                return Err(Error::Scorer {
                    start: span.first,
                    end: span.last,
                    message: format!("scores ({a}, {o}) outside [0, 1]"),
                });
            }
            Ok(CandidateSpan {
                span,
                aspect_score: a,
                opinion_score: o,
            })
        })
        .collect()
}

/// Ranking used by [`prune`]: higher role score first, then earlier start,
/// then shorter span, then higher score for the other role.
pub fn prune_order(role: Role) -> impl Fn(&CandidateSpan, &CandidateSpan) -> Ordering {
    move |a, b| {
        b.score(role)
            .total_cmp(&a.score(role))
            .then(a.span.first.cmp(&b.span.first))
            .then(a.span.len().cmp(&b.span.len()))
            .then(b.other_score(role).total_cmp(&a.other_score(role)))
    }
}

/// Threshold, then non-maximum suppression over overlapping survivors, then
/// the `top_k` best by score. Output is sorted by start.
pub fn prune(candidates: &[CandidateSpan], role: Role, threshold: f64, top_k: usize) -> Vec<CandidateSpan> {
    let mut ranked: Vec<CandidateSpan> = candidates
        .iter()
        .filter(|c| c.score(role) >= threshold)
        .copied()
        .collect();
    ranked.sort_by(prune_order(role));
    let mut kept: Vec<CandidateSpan> = Vec::new();
    for c in ranked {
        if kept.len() == top_k {
            break;
        }
        if kept.iter().all(|k| !k.span.overlaps(&c.span)) {
            kept.push(c);
        }
    }
    kept.sort_by_key(|c| (c.span.first, c.span.last));
    kept
}

/// Seed terms for one role, stored in normalized form.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedLexicon {
    phrases: BTreeSet<String>,
    tokens: BTreeSet<String>,
}

impl SeedLexicon {
    pub fn new<I, S>(terms: I, processor: &TextProcessor) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut lex = SeedLexicon::default();
        for term in terms {
            let text = processor.process(term.as_ref());
            if text.is_empty() {
                continue;
            }
            lex.tokens.extend(text.token_strs().map(str::to_owned));
            lex.phrases.insert(text.normalized);
        }
        lex
    }

    /// One term per line; blank lines and `#` comments skipped.
    pub fn from_lines<R: BufRead>(reader: R, processor: &TextProcessor) -> Result<Self> {
        let mut terms = Vec::new();
        for line in reader.lines() {
            let line = line.map_err(|e| Error::io("<seed lexicon>", e))?;
            if !line.starts_with('#') {
                terms.push(line);
            }
        }
        Ok(Self::new(terms, processor))
    }

    pub fn contains_phrase(&self, phrase: &str) -> bool {
        self.phrases.contains(phrase)
    }

    pub fn contains_token(&self, token: &str) -> bool {
        self.tokens.contains(token)
    }

    pub fn len(&self) -> usize {
        self.phrases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phrases.is_empty()
    }
}

/// Scores 1.0 for a role when the whole span or its head (last) token is a
/// seed term of that role, 0.0 otherwise.
#[derive(Clone, Debug, Default)]
pub struct LexiconScorer {
    pub aspects: SeedLexicon,
    pub opinions: SeedLexicon,
}

impl LexiconScorer {
    fn hit(lex: &SeedLexicon, text: &TokenizedText, span: Interval) -> f64 {
        let head = text.token_str(span.last);
        if lex.contains_phrase(&text.span_text(span.first, span.last)) || lex.contains_token(head) {
            1.0
        } else {
            0.0
        }
    }
}

impl SpanScorer for LexiconScorer {
    fn score(&self, doc: &Document, span: Interval) -> Result<(f64, f64)> {
        Ok((
            Self::hit(&self.aspects, &doc.text, span),
            Self::hit(&self.opinions, &doc.text, span),
        ))
    }
}

// ---------------------------------------------------------------------------
// Logistic baseline

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Sparse feature vector as `(index, value)` pairs.
pub type SparseFeatures = Vec<(usize, f64)>;

/// Binary logistic regression over sparse features.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LogisticModel {
    pub fn zeros(dim: usize) -> Self {
        LogisticModel {
            weights: vec![0.0; dim],
            bias: 0.0,
        }
    }

    pub fn margin(&self, x: &[(usize, f64)]) -> f64 {
        self.bias + x.iter().map(|&(i, v)| self.weights[i] * v).sum::<f64>()
    }

    pub fn predict(&self, x: &[(usize, f64)]) -> f64 {
        sigmoid(self.margin(x))
    }

    /// Plain SGD on weighted log loss with L2 decay. Positives are weighted
    /// by the negative/positive ratio when `balance` is set. Example order
    /// is shuffled per epoch from `seed`.
    pub fn fit(dim: usize, xs: &[SparseFeatures], ys: &[bool], config: &LogisticConfig) -> Self {
        let mut model = LogisticModel::zeros(dim);
        let positives = ys.iter().filter(|&&y| y).count();
        let negatives = ys.len() - positives;
        let pos_weight = if config.balance && positives > 0 {
            (negatives as f64 / positives as f64).clamp(1.0, config.max_pos_weight)
        } else {
            1.0
        };
        let mut order: Vec<usize> = (0..xs.len()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut step = 0usize;
        for _ in 0..config.epochs {
            order.shuffle(&mut rng);
            for &i in &order {
                let lr = config.learning_rate / (1.0 + config.decay * step as f64);
                step += 1;
                let x = &xs[i];
                let y = if ys[i] { 1.0 } else { 0.0 };
                let w = if ys[i] { pos_weight } else { 1.0 };
                let g = w * (model.predict(x) - y);
                for &(j, v) in x {
                    model.weights[j] -= lr * (g * v + config.l2 * model.weights[j]);
                }
                model.bias -= lr * g;
            }
        }
        model
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LogisticConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub decay: f64,
    pub l2: f64,
    pub balance: bool,
    pub max_pos_weight: f64,
    pub seed: u64,
}

impl Default for LogisticConfig {
    fn default() -> Self {
        LogisticConfig {
            epochs: 10,
            learning_rate: 0.2,
            decay: 1e-5,
            l2: 1e-6,
            balance: true,
            max_pos_weight: 20.0,
            seed: 42,
        }
    }
}

fn hash_feature(s: &str, seed: u64) -> u64 {
    twox_hash::XxHash64::oneshot(seed, s.as_bytes())
}

/// Builds span features: seed-lexicon indicators, a width one-hot, and
/// hashed token, boundary, context and char n-gram features. With
/// `use_embeddings`, the mean token embedding of the span is appended.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpanFeaturizer {
    pub buckets: usize,
    pub max_span_len: usize,
    pub embedding_dim: Option<usize>,
    pub seed: u64,
    pub aspects: SeedLexicon,
    pub opinions: SeedLexicon,
}

const LEXICON_FEATURES: usize = 8;

impl SpanFeaturizer {
    pub fn dim(&self) -> usize {
        LEXICON_FEATURES + self.max_span_len + self.buckets + self.embedding_dim.unwrap_or(0)
    }

    fn lexicon_flags(lex: &SeedLexicon, text: &TokenizedText, span: Interval) -> [bool; 4] {
        let phrase = text.span_text(span.first, span.last);
        [
            lex.contains_phrase(&phrase),
            lex.contains_token(text.token_str(span.last)),
            lex.contains_token(text.token_str(span.first)),
            (span.first..=span.last).any(|i| lex.contains_token(text.token_str(i))),
        ]
    }

    pub fn features(&self, doc: &Document, span: Interval) -> Result<SparseFeatures> {
        let text = &doc.text;
        let mut out: SparseFeatures = Vec::new();
        let flags = Self::lexicon_flags(&self.aspects, text, span)
            .into_iter()
            .chain(Self::lexicon_flags(&self.opinions, text, span));
        for (i, on) in flags.enumerate() {
            if on {
                out.push((i, 1.0));
            }
        }
        let width = span.len().min(self.max_span_len);
        out.push((LEXICON_FEATURES + width - 1, 1.0));

        let base = LEXICON_FEATURES + self.max_span_len;
        let mut hashed: Vec<usize> = Vec::new();
        let mut add = |key: String| hashed.push(base + (hash_feature(&key, self.seed) % self.buckets as u64) as usize);
        for i in span.first..=span.last {
            add(format!("t:{}", text.token_str(i)));
        }
        add(format!("f:{}", text.token_str(span.first)));
        add(format!("l:{}", text.token_str(span.last)));
        add(format!(
            "p:{}",
            if span.first == 0 { "<s>" } else { text.token_str(span.first - 1) }
        ));
        add(format!(
            "n:{}",
            if span.last + 1 >= text.len() { "</s>" } else { text.token_str(span.last + 1) }
        ));
        let chars: Vec<char> = format!("<{}>", text.span_text(span.first, span.last)).chars().collect();
        for n in 2..=4 {
            for w in chars.windows(n) {
                add(format!("g:{}", w.iter().collect::<String>()));
            }
        }
        let scale = 1.0 / (hashed.len() as f64).sqrt();
        hashed.sort_unstable();
        let mut i = 0;
        while i < hashed.len() {
            let j = hashed[i..].iter().take_while(|&&h| h == hashed[i]).count();
            out.push((hashed[i], j as f64 * scale));
            i += j;
        }

        if let Some(d) = self.embedding_dim {
            let vectors = doc.embeddings.as_ref().ok_or_else(|| Error::Scorer {
                start: span.first,
                end: span.last,
                message: "document has no embeddings".into(),
            })?;
            let offset = base + self.buckets;
            let pooled = crate::polarity::mean_pool(vectors, span.first, span.last);
            if pooled.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    actual: pooled.len(),
                });
            }
            out.extend(pooled.into_iter().enumerate().map(|(k, v)| (offset + k, v)));
        }
        Ok(out)
    }
}

/// Two logistic models, one per role, over [`SpanFeaturizer`] features.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogisticSpanScorer {
    pub featurizer: SpanFeaturizer,
    pub aspect: LogisticModel,
    pub opinion: LogisticModel,
}

/// A training document with its gold token intervals per role.
pub struct SpanExample<'a> {
    pub doc: &'a Document,
    pub aspects: Vec<Interval>,
    pub opinions: Vec<Interval>,
}

impl LogisticSpanScorer {
    pub fn train(
        featurizer: SpanFeaturizer,
        examples: &[SpanExample<'_>],
        config: &LogisticConfig,
    ) -> Result<Self> {
        let mut xs = Vec::new();
        let mut ya = Vec::new();
        let mut yo = Vec::new();
        for ex in examples {
            let mut spans = candidate_intervals(&ex.doc.text, featurizer.max_span_len);
            // gold spans are always training points, even if they break the
            // stopword-edge rule
            for gold in ex.aspects.iter().chain(&ex.opinions) {
                if gold.len() <= featurizer.max_span_len && !spans.contains(gold) {
                    spans.push(*gold);
                }
            }
            for span in spans {
                xs.push(featurizer.features(ex.doc, span)?);
                ya.push(ex.aspects.contains(&span));
                yo.push(ex.opinions.contains(&span));
            }
        }
        if !ya.contains(&true) || !yo.contains(&true) {
            return Err(Error::Degenerate(
                "span scorer needs at least one gold aspect and one gold opinion".into(),
            ));
        }
        let dim = featurizer.dim();
        let aspect = LogisticModel::fit(dim, &xs, &ya, config);
        let opinion = LogisticModel::fit(
            dim,
            &xs,
            &yo,
            &LogisticConfig {
                seed: config.seed.wrapping_add(1),
                ..config.clone()
            },
        );
        Ok(LogisticSpanScorer {
            featurizer,
            aspect,
            opinion,
        })
    }
}

impl SpanScorer for LogisticSpanScorer {
    fn score(&self, doc: &Document, span: Interval) -> Result<(f64, f64)> {
        let x = self.featurizer.features(doc, span)?;
        Ok((self.aspect.predict(&x), self.opinion.predict(&x)))
    }
}
