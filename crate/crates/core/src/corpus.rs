//! Annotated review corpus: data model, line-delimited file format,
//! majority-vote adjudication and dataset statistics.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

use crate::error::{Error, Result};
use crate::textnorm::{char_len, char_slice};

/// Source platform of a review.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Platform {
    Daraz,
    Facebook,
    Rokomari,
    Shajgoj,
    Other,
}

impl Platform {
    pub const ALL: [Platform; 5] = [
        Platform::Daraz,
        Platform::Facebook,
        Platform::Rokomari,
        Platform::Shajgoj,
        Platform::Other,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Platform::Daraz => "daraz",
            Platform::Facebook => "facebook",
            Platform::Rokomari => "rokomari",
            Platform::Shajgoj => "shajgoj",
            Platform::Other => "other",
        }
    }
}

impl fmt::Display for Platform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Platform {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Platform::ALL
            .into_iter()
            .find(|p| p.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Invalid(format!("unknown platform `{s}`")))
    }
}

/// Sentiment polarity. Declaration order is the model's label order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    Positive,
    Negative,
    Neutral,
}

impl Polarity {
    pub const LABELS: [Polarity; 3] = [Polarity::Positive, Polarity::Negative, Polarity::Neutral];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Polarity> {
        Self::LABELS.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Polarity::Positive => "positive",
            Polarity::Negative => "negative",
            Polarity::Neutral => "neutral",
        }
    }
}

impl fmt::Display for Polarity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Aspect,
    Opinion,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Review {
    pub id: String,
    pub platform: Platform,
    pub raw_text: String,
    pub collected_at: Option<String>,
    pub product_category: Option<String>,
}

impl Review {
    pub fn validate(&self) -> Result<()> {
        let invalid = |message: String| Error::InvalidReview {
            review_id: self.id.clone(),
            message,
        };
        if self.id.trim().is_empty() {
            return Err(Error::Invalid("review id is empty".into()));
        }
        if self.raw_text.nfc().all(char::is_whitespace) {
            return Err(invalid("text is empty".into()));
        }
        if let Some(ts) = &self.collected_at {
            let ok = chrono::DateTime::parse_from_rfc3339(ts).is_ok()
                || chrono::NaiveDateTime::parse_from_str(ts, "%Y-%m-%dT%H:%M:%S").is_ok()
                || chrono::NaiveDate::parse_from_str(ts, "%Y-%m-%d").is_ok();
            if !ok {
                return Err(invalid(format!("collected_at `{ts}` is not ISO-8601")));
            }
        }
        Ok(())
    }
}

/// Char-offset span `[start, end)` into a review's raw text.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
    pub role: Role,
}

impl Span {
    pub fn new(start: usize, end: usize, role: Role) -> Self {
        Span { start, end, role }
    }

    pub fn overlaps(&self, other: &Span) -> bool {
        self.start < other.end && other.start < self.end
    }

    pub fn check(&self, text: &str) -> std::result::Result<(), String> {
        let len = char_len(text);
        if self.start >= self.end || self.end > len {
            return Err(format!(
                "{:?} span [{}, {}) out of bounds for text of length {len}",
                self.role, self.start, self.end
            ));
        }
        let slice = char_slice(text, self.start, self.end).unwrap_or_default();
        if slice.chars().all(char::is_whitespace) {
            return Err(format!(
                "{:?} span [{}, {}) covers only whitespace",
                self.role, self.start, self.end
            ));
        }
        Ok(())
    }

    pub fn text<'a>(&self, raw: &'a str) -> Option<&'a str> {
        char_slice(raw, self.start, self.end)
    }
}

/// The identity of a triplet for voting and scoring: both spans plus polarity.
pub type TripletKey = ((usize, usize), (usize, usize), Polarity);

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Triplet {
    pub aspect: Span,
    pub opinion: Span,
    pub polarity: Polarity,
    pub aspect_category: Option<String>,
}

impl Triplet {
    pub fn new(aspect: (usize, usize), opinion: (usize, usize), polarity: Polarity) -> Self {
        Triplet {
            aspect: Span::new(aspect.0, aspect.1, Role::Aspect),
            opinion: Span::new(opinion.0, opinion.1, Role::Opinion),
            polarity,
            aspect_category: None,
        }
    }

    pub fn with_category(mut self, category: impl Into<String>) -> Self {
        self.aspect_category = Some(category.into());
        self
    }

    pub fn key(&self) -> TripletKey {
        (
            (self.aspect.start, self.aspect.end),
            (self.opinion.start, self.opinion.end),
            self.polarity,
        )
    }

    pub fn check(&self, text: &str) -> std::result::Result<(), String> {
        if self.aspect.role != Role::Aspect || self.opinion.role != Role::Opinion {
            return Err("triplet spans carry the wrong roles".into());
        }
        self.aspect.check(text)?;
        self.opinion.check(text)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub annotator_id: String,
    pub triplets: Vec<Triplet>,
}

impl AnnotationRecord {
    pub fn new(annotator_id: impl Into<String>, triplets: Vec<Triplet>) -> Self {
        AnnotationRecord {
            annotator_id: annotator_id.into(),
            triplets,
        }
    }

    fn keys(&self) -> HashSet<TripletKey> {
        self.triplets.iter().map(Triplet::key).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AnnotatedReview {
    pub review: Review,
    pub annotations: Vec<AnnotationRecord>,
    pub gold: Option<Vec<Triplet>>,
}

impl AnnotatedReview {
    pub fn id(&self) -> &str {
        &self.review.id
    }

    /// Checks every invariant of the record. With `require_annotations`
    /// false, freshly ingested records without annotations pass.
    pub fn validate(&self, require_annotations: bool) -> Result<()> {
        self.review.validate()?;
        let invalid = |message: String| Error::InvalidReview {
            review_id: self.review.id.clone(),
            message,
        };
        if require_annotations && self.annotations.is_empty() {
            return Err(invalid("no annotation records".into()));
        }
        let text = &self.review.raw_text;
        for record in &self.annotations {
            if record.annotator_id.trim().is_empty() {
                return Err(invalid("annotator id is empty".into()));
            }
            let mut seen = HashSet::new();
            for t in &record.triplets {
                t.check(text).map_err(invalid)?;
                if !seen.insert(t.key()) {
                    return Err(invalid(format!(
                        "annotator `{}` lists the same triplet twice",
                        record.annotator_id
                    )));
                }
            }
        }
        if let Some(gold) = &self.gold {
            for t in gold {
                t.check(text).map_err(invalid)?;
            }
            if let Some(expected) = self.adjudicated_gold()? {
                let have: BTreeSet<TripletKey> = gold.iter().map(Triplet::key).collect();
                let want: BTreeSet<TripletKey> = expected.iter().map(Triplet::key).collect();
                if have != want {
                    return Err(invalid("gold differs from majority-vote adjudication".into()));
                }
            }
        }
        Ok(())
    }

    /// Gold implied by the annotations: a single record is taken verbatim,
    /// two or more are adjudicated. `None` without annotations.
    pub fn adjudicated_gold(&self) -> Result<Option<Vec<Triplet>>> {
        match self.annotations.len() {
            0 => Ok(None),
            1 => {
                let mut gold = self.annotations[0].triplets.clone();
                gold.sort();
                Ok(Some(gold))
            }
            _ => Ok(Some(adjudicate(&self.annotations)?.gold)),
        }
    }
}

/// Result of majority voting.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Adjudication {
    pub gold: Vec<Triplet>,
    pub conflicts: Vec<Triplet>,
}

/// Majority vote over annotation records.
///
/// A triplet (exact offsets and polarity) is gold when a strict majority of
/// records contain it; every other triplet that appears at all is a conflict.
/// When annotators disagree only on the category label, the most frequent
/// label wins, ties going to the smallest.
pub fn adjudicate(annotations: &[AnnotationRecord]) -> Result<Adjudication> {
    if annotations.len() < 2 {
        return Err(Error::TooFewAnnotators(annotations.len()));
    }
    let mut votes: BTreeMap<TripletKey, (usize, BTreeMap<Option<String>, usize>)> =
        BTreeMap::new();
    for record in annotations {
        let mut seen = HashSet::new();
        for t in &record.triplets {
            let key = t.key();
            if !seen.insert(key) {
                continue;
            }
            let entry = votes.entry(key).or_default();
            entry.0 += 1;
            *entry.1.entry(t.aspect_category.clone()).or_default() += 1;
        }
    }
    let n = annotations.len();
    let mut out = Adjudication::default();
    for (key, (count, categories)) in votes {
        let category = categories
            .into_iter()
            .fold(None::<(Option<String>, usize)>, |best, (cat, c)| match best {
                Some((_, bc)) if bc >= c => best,
                _ => Some((cat, c)),
            })
            .and_then(|(cat, _)| cat);
        let mut triplet = Triplet::new(key.0, key.1, key.2);
        triplet.aspect_category = category;
        if 2 * count > n {
            out.gold.push(triplet);
        } else {
            out.conflicts.push(triplet);
        }
    }
    Ok(out)
}

fn set_f1(a: &HashSet<TripletKey>, b: &HashSet<TripletKey>) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    let tp = a.intersection(b).count() as f64;
    if tp == 0.0 {
        return 0.0;
    }
    let p = tp / b.len() as f64;
    let r = tp / a.len() as f64;
    2.0 * p * r / (p + r)
}

/// Mean pairwise exact-match F1 between annotators.
pub fn agreement(annotations: &[AnnotationRecord]) -> Result<f64> {
    if annotations.len() < 2 {
        return Err(Error::TooFewAnnotators(annotations.len()));
    }
    let sets: Vec<_> = annotations.iter().map(AnnotationRecord::keys).collect();
    let mut total = 0.0;
    let mut pairs = 0usize;
    for i in 0..sets.len() {
        for j in i + 1..sets.len() {
            total += set_f1(&sets[i], &sets[j]);
            pairs += 1;
        }
    }
    Ok(total / pairs as f64)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryCounts {
    pub total: usize,
    pub positive: usize,
    pub negative: usize,
    pub neutral: usize,
}

impl CategoryCounts {
    pub fn add(&mut self, polarity: Polarity) {
        self.total += 1;
        match polarity {
            Polarity::Positive => self.positive += 1,
            Polarity::Negative => self.negative += 1,
            Polarity::Neutral => self.neutral += 1,
        }
    }

    pub fn is_consistent(&self) -> bool {
        self.total == self.positive + self.negative + self.neutral
    }
}

/// Category label used for triplets that carry none.
pub const UNCATEGORIZED: &str = "uncategorized";

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub total_reviews: usize,
    pub per_platform: BTreeMap<Platform, usize>,
    pub per_category: BTreeMap<String, CategoryCounts>,
}

impl CorpusStats {
    pub fn is_consistent(&self) -> bool {
        self.total_reviews == self.per_platform.values().sum::<usize>()
            && self.per_category.values().all(CategoryCounts::is_consistent)
    }
}

/// Review and gold-triplet counts. Every record must carry gold.
pub fn corpus_stats(corpus: &[AnnotatedReview]) -> Result<CorpusStats> {
    let missing: Vec<String> = corpus
        .iter()
        .filter(|r| r.gold.is_none())
        .map(|r| r.review.id.clone())
        .collect();
    if !missing.is_empty() {
        return Err(Error::Unadjudicated(missing));
    }
    let mut stats = CorpusStats::default();
    for record in corpus {
        stats.total_reviews += 1;
        *stats.per_platform.entry(record.review.platform).or_default() += 1;
        for t in record.gold.iter().flatten() {
            let cat = t.aspect_category.as_deref().unwrap_or(UNCATEGORIZED);
            stats.per_category.entry(cat.to_owned()).or_default().add(t.polarity);
        }
    }
    Ok(stats)
}

/// Sidecar listing the counts a fixture corpus is expected to produce.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusManifest {
    pub total_reviews: usize,
    pub per_platform: BTreeMap<Platform, usize>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub per_category: BTreeMap<String, CategoryCounts>,
}

impl CorpusManifest {
    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    /// Internal sum identities: platforms add up to the total, and each
    /// category's polarity columns add up to its total.
    pub fn check_identities(&self) -> std::result::Result<(), Vec<String>> {
        let mut problems = Vec::new();
        let sum: usize = self.per_platform.values().sum();
        if sum != self.total_reviews {
            problems.push(format!(
                "platform counts sum to {sum}, total_reviews is {}",
                self.total_reviews
            ));
        }
        for (cat, counts) in &self.per_category {
            if !counts.is_consistent() {
                problems.push(format!(
                    "category `{cat}`: {}+{}+{} != {}",
                    counts.positive, counts.negative, counts.neutral, counts.total
                ));
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(problems)
        }
    }

    /// Compares computed stats against the manifest. Platforms missing from
    /// either side count as zero; categories are only compared when the
    /// manifest lists any.
    pub fn verify(&self, stats: &CorpusStats) -> std::result::Result<(), Vec<String>> {
        let mut problems = Vec::new();
        if stats.total_reviews != self.total_reviews {
            problems.push(format!(
                "total_reviews: expected {}, got {}",
                self.total_reviews, stats.total_reviews
            ));
        }
        for p in Platform::ALL {
            let want = self.per_platform.get(&p).copied().unwrap_or(0);
            let got = stats.per_platform.get(&p).copied().unwrap_or(0);
            if want != got {
                problems.push(format!("platform {p}: expected {want}, got {got}"));
            }
        }
        if !self.per_category.is_empty() {
            let cats: BTreeSet<&String> =
                self.per_category.keys().chain(stats.per_category.keys()).collect();
            for cat in cats {
                let want = self.per_category.get(cat).copied().unwrap_or_default();
                let got = stats.per_category.get(cat).copied().unwrap_or_default();
                if want != got {
                    problems.push(format!("category `{cat}`: expected {want:?}, got {got:?}"));
                }
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(problems)
        }
    }
}

impl From<&CorpusStats> for CorpusManifest {
    fn from(stats: &CorpusStats) -> Self {
        CorpusManifest {
            total_reviews: stats.total_reviews,
            per_platform: stats.per_platform.clone(),
            per_category: stats.per_category.clone(),
        }
    }
}

// ---------------------------------------------------------------------------
// Line-delimited file format

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct OffsetsWire {
    start: usize,
    end: usize,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TripletWire {
    aspect: OffsetsWire,
    opinion: OffsetsWire,
    polarity: Polarity,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    category: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AnnotationWire {
    annotator: String,
    triplets: Vec<TripletWire>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RecordWire {
    id: String,
    platform: Platform,
    text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    collected_at: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    product_category: Option<String>,
    #[serde(default)]
    annotations: Vec<AnnotationWire>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gold: Option<Vec<TripletWire>>,
}

impl From<&TripletWire> for Triplet {
    fn from(w: &TripletWire) -> Self {
        Triplet {
            aspect: Span::new(w.aspect.start, w.aspect.end, Role::Aspect),
            opinion: Span::new(w.opinion.start, w.opinion.end, Role::Opinion),
            polarity: w.polarity,
            aspect_category: w.category.clone(),
        }
    }
}

impl From<&Triplet> for TripletWire {
    fn from(t: &Triplet) -> Self {
        TripletWire {
            aspect: OffsetsWire {
                start: t.aspect.start,
                end: t.aspect.end,
            },
            opinion: OffsetsWire {
                start: t.opinion.start,
                end: t.opinion.end,
            },
            polarity: t.polarity,
            category: t.aspect_category.clone(),
        }
    }
}

impl From<RecordWire> for AnnotatedReview {
    fn from(w: RecordWire) -> Self {
        AnnotatedReview {
            review: Review {
                id: w.id,
                platform: w.platform,
                raw_text: w.text,
                collected_at: w.collected_at,
                product_category: w.product_category,
            },
            annotations: w
                .annotations
                .iter()
                .map(|a| AnnotationRecord {
                    annotator_id: a.annotator.clone(),
                    triplets: a.triplets.iter().map(Triplet::from).collect(),
                })
                .collect(),
            gold: w.gold.map(|g| g.iter().map(Triplet::from).collect()),
        }
    }
}

impl From<&AnnotatedReview> for RecordWire {
    fn from(r: &AnnotatedReview) -> Self {
        RecordWire {
            id: r.review.id.clone(),
            platform: r.review.platform,
            text: r.review.raw_text.clone(),
            collected_at: r.review.collected_at.clone(),
            product_category: r.review.product_category.clone(),
            annotations: r
                .annotations
                .iter()
                .map(|a| AnnotationWire {
                    annotator: a.annotator_id.clone(),
                    triplets: a.triplets.iter().map(TripletWire::from).collect(),
                })
                .collect(),
            gold: r
                .gold
                .as_ref()
                .map(|g| g.iter().map(TripletWire::from).collect()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ParseOptions {
    /// Reject records with an empty `annotations` list.
    pub require_annotations: bool,
}

impl Default for ParseOptions {
    fn default() -> Self {
        ParseOptions {
            require_annotations: true,
        }
    }
}

/// Parses a corpus file, one JSON record per line. Blank lines are skipped.
pub fn parse_corpus<R: BufRead>(source: R) -> Result<Vec<AnnotatedReview>> {
    parse_corpus_with(source, ParseOptions::default())
}

pub fn parse_corpus_with<R: BufRead>(source: R, options: ParseOptions) -> Result<Vec<AnnotatedReview>> {
    let mut out = Vec::new();
    let mut ids = HashSet::new();
    for (idx, line) in source.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| match e.kind() {
            std::io::ErrorKind::InvalidData => Error::Parse {
                line: line_no,
                field: "<line>".into(),
                message: "not valid UTF-8".into(),
            },
            _ => Error::io("<corpus>", e),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let record = parse_line(&line, line_no)?;
        record.validate(options.require_annotations)?;
        if !ids.insert(record.review.id.clone()) {
            return Err(Error::DuplicateId(record.review.id));
        }
        out.push(record);
    }
    Ok(out)
}

fn parse_line(line: &str, line_no: usize) -> Result<AnnotatedReview> {
    let de = &mut serde_json::Deserializer::from_str(line);
    let wire: RecordWire = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        Error::Parse {
            line: line_no,
            field: if path == "." { "<record>".into() } else { path },
            message: e.into_inner().to_string(),
        }
    })?;
    Ok(wire.into())
}

pub fn write_record<W: Write>(mut sink: W, record: &AnnotatedReview) -> Result<()> {
    serde_json::to_writer(&mut sink, &RecordWire::from(record))?;
    sink.write_all(b"\n").map_err(|e| Error::io("<corpus>", e))
}

pub fn write_corpus<W: Write>(mut sink: W, corpus: &[AnnotatedReview]) -> Result<()> {
    for record in corpus {
        write_record(&mut sink, record)?;
    }
    sink.flush().map_err(|e| Error::io("<corpus>", e))
}

/// Fills `gold` on every record from its annotations and returns the
/// conflicts per review id.
pub fn adjudicate_corpus(corpus: &mut [AnnotatedReview]) -> Result<BTreeMap<String, Vec<Triplet>>> {
    let mut conflicts = BTreeMap::new();
    for record in corpus.iter_mut() {
        if record.annotations.len() >= 2 {
            let adj = adjudicate(&record.annotations)?;
            if !adj.conflicts.is_empty() {
                conflicts.insert(record.review.id.clone(), adj.conflicts);
            }
            record.gold = Some(adj.gold);
        } else {
            record.gold = record.adjudicated_gold()?;
        }
    }
    Ok(conflicts)
}
