//! File-based ingestion of platform exports and relevance filtering.

use std::collections::{BTreeMap, HashSet};

use regex::Regex;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use unicode_normalization::UnicodeNormalization;

use crate::corpus::{Platform, Review};
use crate::error::{Error, Result};
use crate::textnorm::is_emoji;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BlockedPattern {
    Literal(String),
    Regex(String),
}

impl BlockedPattern {
    fn compile(&self) -> Result<Regex> {
        let source = match self {
            BlockedPattern::Literal(s) => regex::escape(s),
            BlockedPattern::Regex(s) => s.clone(),
        };
        Regex::new(&source).map_err(|e| Error::Config(format!("blocked pattern: {e}")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterPolicy {
    pub max_emoji_ratio: f64,
    pub min_word_count: usize,
    pub blocked_patterns: Vec<BlockedPattern>,
    pub dedupe: bool,
}

impl Default for FilterPolicy {
    fn default() -> Self {
        FilterPolicy {
            max_emoji_ratio: 0.5,
            min_word_count: 2,
            blocked_patterns: vec![
                BlockedPattern::Regex(r"(?i)\bhttps?://\S+".into()),
                BlockedPattern::Regex(r"(?i)\bwww\.\S+".into()),
                BlockedPattern::Regex(r"(?i)\b(click here|follow us|inbox us|order now)\b".into()),
            ],
            dedupe: true,
        }
    }
}

impl FilterPolicy {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.max_emoji_ratio) {
            return Err(Error::Config(format!(
                "max_emoji_ratio {} outside [0, 1]",
                self.max_emoji_ratio
            )));
        }
        if self.min_word_count < 1 {
            return Err(Error::Config("min_word_count must be at least 1".into()));
        }
        for p in &self.blocked_patterns {
            p.compile()?;
        }
        Ok(())
    }
}

/// Why a review was dropped. Rules are checked in declaration order and the
/// first failing one is reported.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    Empty,
    BlockedPattern,
    EmojiRatio,
    WordCount,
    Duplicate,
}

impl RejectReason {
    pub fn as_str(self) -> &'static str {
        match self {
            RejectReason::Empty => "empty",
            RejectReason::BlockedPattern => "blocked_pattern",
            RejectReason::EmojiRatio => "emoji_ratio",
            RejectReason::WordCount => "word_count",
            RejectReason::Duplicate => "duplicate",
        }
    }
}

/// Counts balance: `accepted + Σ rejected + duplicates_removed == input`.
/// Duplicates are counted only in `duplicates_removed`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub input: usize,
    pub accepted: usize,
    pub rejected: BTreeMap<String, usize>,
    pub duplicates_removed: usize,
}

impl IngestReport {
    pub fn is_balanced(&self) -> bool {
        self.accepted + self.rejected.values().sum::<usize>() + self.duplicates_removed == self.input
    }

    fn reject(&mut self, reason: RejectReason) {
        if reason == RejectReason::Duplicate {
            self.duplicates_removed += 1;
        } else {
            *self.rejected.entry(reason.as_str().to_owned()).or_default() += 1;
        }
    }

    /// Folds in rows an export adapter dropped for having no text.
    pub fn record_empty_rows(&mut self, count: usize) {
        if count > 0 {
            self.input += count;
            *self.rejected.entry(RejectReason::Empty.as_str().to_owned()).or_default() += count;
        }
    }

    pub fn merge(&mut self, other: &IngestReport) {
        self.input += other.input;
        self.accepted += other.accepted;
        self.duplicates_removed += other.duplicates_removed;
        for (k, v) in &other.rejected {
            *self.rejected.entry(k.clone()).or_default() += v;
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rejection {
    pub review_id: String,
    pub reason: RejectReason,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FilterOutcome {
    pub kept: Vec<Review>,
    pub report: IngestReport,
    pub rejections: Vec<Rejection>,
}

/// Emoji codepoints and word tokens of a raw text. Words are whitespace
/// separated pieces that still hold a letter or digit once emoji are removed.
pub fn emoji_and_word_counts(text: &str) -> (usize, usize) {
    let emoji = text.chars().filter(|&c| is_emoji(c)).count();
    let words = text
        .split_whitespace()
        .filter(|w| w.chars().any(|c| !is_emoji(c) && c.is_alphanumeric()))
        .count();
    (emoji, words)
}

/// Emoji share `emoji / (emoji + words)`, zero for texts with neither.
pub fn emoji_ratio(text: &str) -> f64 {
    let (e, w) = emoji_and_word_counts(text);
    if e + w == 0 {
        0.0
    } else {
        e as f64 / (e + w) as f64
    }
}

/// Key under which two reviews count as duplicates: NFC, lowercased,
/// whitespace collapsed.
pub fn dedupe_key(text: &str) -> String {
    let folded: String = text.nfc().collect::<String>().to_lowercase();
    folded.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Applies the relevance filters in fixed rule order.
pub fn filter_reviews(reviews: &[Review], policy: &FilterPolicy) -> Result<FilterOutcome> {
    policy.validate()?;
    let patterns: Vec<Regex> = policy
        .blocked_patterns
        .iter()
        .map(BlockedPattern::compile)
        .collect::<Result<_>>()?;

    let mut report = IngestReport {
        input: reviews.len(),
        ..Default::default()
    };
    let mut kept = Vec::new();
    let mut rejections = Vec::new();
    let mut seen = HashSet::new();

    for review in reviews {
        let text = &review.raw_text;
        let (emoji, words) = emoji_and_word_counts(text);
        let ratio = if emoji + words == 0 {
            0.0
        } else {
            emoji as f64 / (emoji + words) as f64
        };
        let reason = if patterns.iter().any(|p| p.is_match(text)) {
            Some(RejectReason::BlockedPattern)
        } else if ratio > policy.max_emoji_ratio {
            Some(RejectReason::EmojiRatio)
        } else if words < policy.min_word_count {
            Some(RejectReason::WordCount)
        } else if policy.dedupe && !seen.insert(dedupe_key(text)) {
            Some(RejectReason::Duplicate)
        } else {
            None
        };
        match reason {
            Some(reason) => {
                report.reject(reason);
                rejections.push(Rejection {
                    review_id: review.id.clone(),
                    reason,
                });
            }
            None => {
                report.accepted += 1;
                kept.push(review.clone());
            }
        }
    }
    Ok(FilterOutcome {
        kept,
        report,
        rejections,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExportFormat {
    /// Delimited text with a header row.
    Csv,
    Tsv,
    /// One JSON object per line.
    Jsonl,
}

impl ExportFormat {
    pub fn from_extension(path: &std::path::Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "csv" => Some(ExportFormat::Csv),
            "tsv" | "tab" => Some(ExportFormat::Tsv),
            "jsonl" | "ndjson" | "json" => Some(ExportFormat::Jsonl),
            _ => None,
        }
    }
}

/// Which export columns feed which review fields.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ColumnMap {
    pub text: String,
    #[serde(default)]
    pub collected_at: Option<String>,
    #[serde(default)]
    pub product_category: Option<String>,
}

impl Default for ColumnMap {
    fn default() -> Self {
        ColumnMap {
            text: "text".into(),
            collected_at: None,
            product_category: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExportRead {
    pub reviews: Vec<Review>,
    pub rows: usize,
    pub empty_rows: usize,
}

/// Identity fields, text, timestamp and category of one export row.
type ExportRow = (Vec<String>, String, Option<String>, Option<String>);

fn synth_id(platform: Platform, row: usize, fields: &[&str]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(platform.as_str().as_bytes());
    hasher.update(row.to_le_bytes());
    for f in fields {
        hasher.update([0x1f]);
        hasher.update(f.as_bytes());
    }
    let digest = hasher.finalize();
    format!("{}-{}", platform.as_str(), hex::encode(&digest[..8]))
}

fn non_empty(v: Option<String>) -> Option<String> {
    v.map(|s| s.trim().to_owned()).filter(|s| !s.is_empty())
}

/// Reads one export file into reviews tagged with `platform`.
///
/// Ids are derived from the platform, the row index and the row content, so
/// reading the same file twice yields the same ids. Rows with blank text are
/// dropped and counted in `empty_rows`.
pub fn read_platform_export(
    bytes: &[u8],
    format: ExportFormat,
    platform: Platform,
    columns: &ColumnMap,
) -> Result<ExportRead> {
    let text = std::str::from_utf8(bytes).map_err(|e| Error::Utf8(e.valid_up_to()))?;
    let rows: Vec<ExportRow> = match format {
        ExportFormat::Csv | ExportFormat::Tsv => {
            let delimiter = if format == ExportFormat::Tsv { b'\t' } else { b',' };
            let mut reader = csv::ReaderBuilder::new()
                .delimiter(delimiter)
                .flexible(true)
                .from_reader(text.as_bytes());
            let headers = reader.headers()?.clone();
            let find = |name: &str| headers.iter().position(|h| h.trim() == name);
            let text_idx = find(&columns.text)
                .ok_or_else(|| Error::Invalid(format!("missing text column `{}`", columns.text)))?;
            let ts_idx = columns.collected_at.as_deref().and_then(find);
            let cat_idx = columns.product_category.as_deref().and_then(find);
            let mut rows = Vec::new();
            for record in reader.records() {
                let record = record?;
                let get = |i: Option<usize>| i.and_then(|i| record.get(i)).map(str::to_owned);
                rows.push((
                    record.iter().map(str::to_owned).collect(),
                    get(Some(text_idx)).unwrap_or_default(),
                    get(ts_idx),
                    get(cat_idx),
                ));
            }
            rows
        }
        ExportFormat::Jsonl => {
            let mut rows = Vec::new();
            for (idx, line) in text.lines().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                let value: serde_json::Value =
                    serde_json::from_str(line).map_err(|e| Error::Parse {
                        line: idx + 1,
                        field: "<record>".into(),
                        message: e.to_string(),
                    })?;
                let obj = value.as_object().ok_or_else(|| Error::Parse {
                    line: idx + 1,
                    field: "<record>".into(),
                    message: "expected an object".into(),
                })?;
                let field = |name: &str| -> Option<String> {
                    obj.get(name).and_then(|v| match v {
                        serde_json::Value::String(s) => Some(s.clone()),
                        serde_json::Value::Null => None,
                        other => Some(other.to_string()),
                    })
                };
                if !obj.contains_key(&columns.text) {
                    return Err(Error::Parse {
                        line: idx + 1,
                        field: columns.text.clone(),
                        message: "missing text column".into(),
                    });
                }
                rows.push((
                    vec![line.to_owned()],
                    field(&columns.text).unwrap_or_default(),
                    columns.collected_at.as_deref().and_then(field),
                    columns.product_category.as_deref().and_then(field),
                ));
            }
            rows
        }
    };

    let total = rows.len();
    let mut reviews = Vec::with_capacity(total);
    let mut empty_rows = 0;
    for (row, (fields, raw_text, collected_at, category)) in rows.into_iter().enumerate() {
        if raw_text.trim().is_empty() {
            empty_rows += 1;
            continue;
        }
        let field_refs: Vec<&str> = fields.iter().map(String::as_str).collect();
        reviews.push(Review {
            id: synth_id(platform, row, &field_refs),
            platform,
            raw_text,
            collected_at: non_empty(collected_at),
            product_category: non_empty(category),
        });
    }
    Ok(ExportRead {
        reviews,
        rows: total,
        empty_rows,
    })
}
