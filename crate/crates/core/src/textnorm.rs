//! Offset-preserving normalization and tokenization for Bangla-script text.
//!
//! All offsets in this module are counted in Unicode scalar values (chars),
//! never bytes. Normalization works in three layers:
//!
//! 1. Canonical composition (NFC), applied per composition segment so every
//!    output char can be traced back to the raw chars that produced it.
//! 2. Classification: letters and digits are token chars; punctuation,
//!    symbols (emoji included), whitespace and control chars are separators.
//!    Combining marks only survive when attached to a token char, and the
//!    zero-width (non-)joiners only survive between two token chars.
//! 3. Separator runs collapse to one space, the ends are trimmed and whole
//!    tokens are rewritten through the spelling lexicon.
//!
//! The resulting [`OffsetMap`] is a monotone list of anchors. Any span that
//! starts and ends on token boundaries maps back to a raw substring that
//! normalizes to exactly the span text.

use std::collections::{BTreeMap, BTreeSet};
use std::io::BufRead;

use serde::{Deserialize, Serialize};
use unicode_normalization::char::canonical_combining_class;
use unicode_normalization::UnicodeNormalization;
use unicode_properties::{GeneralCategory, GeneralCategoryGroup, UnicodeGeneralCategory};

use crate::error::{Error, Result};

const ZWJ: char = '\u{200D}';
const ZWNJ: char = '\u{200C}';

pub fn char_len(s: &str) -> usize {
    s.chars().count()
}

/// Substring by char offsets, `None` when out of range.
pub fn char_slice(s: &str, start: usize, end: usize) -> Option<&str> {
    if start > end {
        return None;
    }
    let mut indices = s.char_indices().map(|(b, _)| b).chain(std::iter::once(s.len()));
    let b_start = indices.nth(start)?;
    let b_end = if end == start {
        b_start
    } else {
        indices.nth(end - start - 1)?
    };
    Some(&s[b_start..b_end])
}

/// Whole-token spelling rewrites, variant → canonical.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpellingLexicon {
    entries: BTreeMap<String, String>,
}

impl SpellingLexicon {
    pub fn new<I, K, V>(entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (K, V)>,
        K: AsRef<str>,
        V: AsRef<str>,
    {
        let empty = SpellingLexicon::default();
        let mut map = BTreeMap::new();
        for (variant, canonical) in entries {
            let variant = single_token(variant.as_ref(), &empty)?;
            let canonical = single_token(canonical.as_ref(), &empty)?;
            if variant != canonical {
                map.insert(variant, canonical);
            }
        }
        if let Some(chained) = map.values().find(|c| map.contains_key(*c)) {
            return Err(Error::Invalid(format!(
                "spelling lexicon: canonical form `{chained}` is also a variant"
            )));
        }
        Ok(SpellingLexicon { entries: map })
    }

    /// Reads tab-separated `variant<TAB>canonical` lines. Blank lines and
    /// lines starting with `#` are skipped.
    pub fn from_tsv<R: BufRead>(reader: R) -> Result<Self> {
        let mut pairs = Vec::new();
        for (idx, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::io("<spelling lexicon>", e))?;
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (variant, canonical) = line.split_once('\t').ok_or_else(|| Error::Parse {
                line: idx + 1,
                field: "canonical".into(),
                message: "expected `variant<TAB>canonical`".into(),
            })?;
            pairs.push((variant.to_owned(), canonical.to_owned()));
        }
        Self::new(pairs)
    }

    pub fn get(&self, token: &str) -> Option<&str> {
        self.entries.get(token).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

fn single_token(s: &str, lexicon: &SpellingLexicon) -> Result<String> {
    let n = normalize(s, lexicon);
    if n.text.is_empty() || n.text.contains(' ') {
        return Err(Error::Invalid(format!(
            "spelling lexicon entry `{s}` is not a single token"
        )));
    }
    Ok(n.text)
}

/// Tokens flagged (never removed) as stopwords.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StopwordSet(BTreeSet<String>);

impl StopwordSet {
    pub fn new<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        StopwordSet(
            words
                .into_iter()
                .map(|w| w.as_ref().trim().nfc().collect::<String>())
                .filter(|w| !w.is_empty())
                .collect(),
        )
    }

    /// One word per line; blank lines and `#` comments are skipped.
    pub fn from_lines<R: BufRead>(reader: R) -> Result<Self> {
        let mut words = Vec::new();
        for line in reader.lines() {
            let line = line.map_err(|e| Error::io("<stopwords>", e))?;
            if !line.starts_with('#') {
                words.push(line);
            }
        }
        Ok(Self::new(words))
    }

    pub fn contains(&self, token: &str) -> bool {
        self.0.contains(token)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Monotone anchors `(normalized_offset, raw_offset)` relating normalized
/// text back to the raw text.
///
/// Both coordinates are strictly increasing. The last anchor sits at the
/// normalized length and points just past the last raw char that produced
/// output. The first anchor maps offset 0 to the first retained raw char,
/// which is raw offset 0 unless the raw text starts with separators.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OffsetMap {
    pairs: Vec<(usize, usize)>,
}

impl OffsetMap {
    pub fn identity(len: usize) -> Self {
        OffsetMap {
            pairs: (0..=len).map(|i| (i, i)).collect(),
        }
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn normalized_len(&self) -> usize {
        self.pairs.last().map_or(0, |p| p.0)
    }

    fn from_ranges(ranges: &[(usize, usize)]) -> Self {
        let mut pairs: Vec<(usize, usize)> = Vec::with_capacity(ranges.len() + 1);
        for (i, &(lo, _)) in ranges.iter().enumerate() {
            if pairs.last().is_none_or(|&(_, raw)| lo > raw) {
                pairs.push((i, lo));
            }
        }
        match ranges.last() {
            Some(&(_, hi)) => pairs.push((ranges.len(), hi)),
            None => pairs.push((0, 0)),
        }
        OffsetMap { pairs }
    }

    fn raw_start(&self, norm: usize) -> usize {
        let idx = self.pairs.partition_point(|p| p.0 <= norm);
        self.pairs[idx.saturating_sub(1)].1
    }

    fn raw_end(&self, norm: usize) -> usize {
        let idx = self.pairs.partition_point(|p| p.0 < norm);
        self.pairs[idx.min(self.pairs.len() - 1)].1
    }
}

/// Output of [`normalize`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Normalized {
    pub text: String,
    pub offset_map: OffsetMap,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Class {
    Token,
    Separator,
    Mark,
    Joiner,
}

fn base_class(c: char) -> Class {
    if c.is_whitespace() {
        return Class::Separator;
    }
    if c == ZWJ || c == ZWNJ {
        return Class::Joiner;
    }
    // variation selectors, combining keycap
    if matches!(c, '\u{FE00}'..='\u{FE0F}' | '\u{20E3}' | '\u{E0100}'..='\u{E01EF}') {
        return Class::Separator;
    }
    match c.general_category_group() {
        GeneralCategoryGroup::Letter | GeneralCategoryGroup::Number => Class::Token,
        GeneralCategoryGroup::Mark => Class::Mark,
        _ => Class::Separator,
    }
}

/// Splits raw chars into runs whose NFC forms concatenate to the NFC of the
/// whole text, returning `(nfc_output, raw_start, raw_end)` per run.
fn composition_segments(chars: &[char]) -> Vec<(String, usize, usize)> {
    let mut segments = Vec::new();
    if chars.is_empty() {
        return segments;
    }
    let mut start = 0;
    let mut current = String::new();
    current.push(chars[0]);
    for (i, &c) in chars.iter().enumerate().skip(1) {
        let boundary = if c.is_ascii() {
            true
        } else if canonical_combining_class(c) != 0 {
            false
        } else {
            let mut joined = current.clone();
            joined.push(c);
            let joined: String = joined.nfc().collect();
            let mut split: String = current.nfc().collect();
            split.extend(std::iter::once(c).nfc());
            joined == split
        };
        if boundary {
            segments.push((current.nfc().collect(), start, i));
            current.clear();
            start = i;
        }
        current.push(c);
    }
    segments.push((current.nfc().collect(), start, chars.len()));
    segments
}

/// NFC-composes `raw`, turns punctuation, symbols and emoji into separators,
/// collapses separator runs to single spaces, trims, and rewrites whole
/// tokens through `lexicon`.
pub fn normalize(raw: &str, lexicon: &SpellingLexicon) -> Normalized {
    let chars: Vec<char> = raw.chars().collect();

    // NFC stream with the raw range each output char came from.
    let mut stream: Vec<(char, usize, usize)> = Vec::with_capacity(chars.len());
    for (out, lo, hi) in composition_segments(&chars) {
        if out.chars().eq(chars[lo..hi].iter().copied()) {
            stream.extend(out.chars().enumerate().map(|(k, c)| (c, lo + k, lo + k + 1)));
        } else {
            stream.extend(out.chars().map(|c| (c, lo, hi)));
        }
    }

    let base: Vec<Class> = stream.iter().map(|&(c, _, _)| base_class(c)).collect();
    let mut is_token = vec![false; stream.len()];
    for i in 0..stream.len() {
        let prev_token = i > 0 && is_token[i - 1];
        is_token[i] = match base[i] {
            Class::Token => true,
            Class::Separator => false,
            Class::Mark => prev_token,
            Class::Joiner => {
                prev_token && matches!(base.get(i + 1), Some(Class::Token | Class::Mark))
            }
        };
    }

    let mut text = String::with_capacity(raw.len());
    let mut ranges: Vec<(usize, usize)> = Vec::with_capacity(stream.len());
    let mut token: Vec<(char, usize, usize)> = Vec::new();
    let mut pending_sep: Option<(usize, usize)> = None;

    let flush_token = |token: &mut Vec<(char, usize, usize)>,
                           text: &mut String,
                           ranges: &mut Vec<(usize, usize)>| {
        if token.is_empty() {
            return;
        }
        let surface: String = token.iter().map(|t| t.0).collect();
        match lexicon.get(&surface) {
            Some(canonical) => {
                let lo = token[0].1;
                let hi = token[token.len() - 1].2;
                for c in canonical.chars() {
                    text.push(c);
                    ranges.push((lo, hi));
                }
            }
            None => {
                for &(c, lo, hi) in token.iter() {
                    text.push(c);
                    ranges.push((lo, hi));
                }
            }
        }
        token.clear();
    };

    for (i, &(c, lo, hi)) in stream.iter().enumerate() {
        if is_token[i] {
            if let Some(sep) = pending_sep.take() {
                if !text.is_empty() || !token.is_empty() {
                    flush_token(&mut token, &mut text, &mut ranges);
                    text.push(' ');
                    ranges.push(sep);
                }
            }
            token.push((c, lo, hi));
        } else {
            pending_sep = Some(match pending_sep {
                Some((s, _)) => (s, hi),
                None => (lo, hi),
            });
        }
    }
    flush_token(&mut token, &mut text, &mut ranges);

    Normalized {
        text,
        offset_map: OffsetMap::from_ranges(&ranges),
    }
}

/// Maps a `[start, end)` char span of normalized text to raw char offsets.
///
/// For spans on token boundaries the raw substring normalizes back to the
/// span text. Spans cutting through a token widen to the enclosing anchors.
pub fn map_span(offset_map: &OffsetMap, span: (usize, usize)) -> Result<(usize, usize)> {
    let (start, end) = span;
    let len = offset_map.normalized_len();
    if start >= end || end > len {
        return Err(Error::SpanOutOfBounds { start, end, len });
    }
    Ok((offset_map.raw_start(start), offset_map.raw_end(end)))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub start: usize,
    pub end: usize,
    pub is_stopword: bool,
}

/// Normalized text split into tokens, with the audit trail back to raw text.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TokenizedText {
    pub normalized: String,
    pub tokens: Vec<Token>,
    pub offset_map: OffsetMap,
    token_text: Vec<String>,
}

impl TokenizedText {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn token_str(&self, i: usize) -> &str {
        &self.token_text[i]
    }

    pub fn token_strs(&self) -> impl Iterator<Item = &str> {
        self.token_text.iter().map(String::as_str)
    }

    /// Text of tokens `first..=last` joined by single spaces.
    pub fn span_text(&self, first: usize, last: usize) -> String {
        self.token_text[first..=last].join(" ")
    }

    /// Normalized char offsets `[start, end)` of tokens `first..=last`.
    pub fn char_span(&self, first: usize, last: usize) -> (usize, usize) {
        (self.tokens[first].start, self.tokens[last].end)
    }

    /// Raw char offsets of tokens `first..=last`.
    pub fn raw_span(&self, first: usize, last: usize) -> Result<(usize, usize)> {
        if first > last || last >= self.tokens.len() {
            return Err(Error::SpanOutOfBounds {
                start: first,
                end: last + 1,
                len: self.tokens.len(),
            });
        }
        map_span(&self.offset_map, self.char_span(first, last))
    }
}

/// Splits normalized text on spaces and flags stopwords.
///
/// Normalization never leaves a combining mark after a space, so splitting
/// here never breaks a grapheme cluster.
pub fn tokenize(normalized: Normalized, stopwords: &StopwordSet) -> TokenizedText {
    let mut tokens = Vec::new();
    let mut token_text = Vec::new();
    let mut pos = 0;
    for piece in normalized.text.split(' ') {
        let len = char_len(piece);
        if len > 0 {
            tokens.push(Token {
                start: pos,
                end: pos + len,
                is_stopword: stopwords.contains(piece),
            });
            token_text.push(piece.to_owned());
        }
        pos += len + 1;
    }
    TokenizedText {
        normalized: normalized.text,
        tokens,
        offset_map: normalized.offset_map,
        token_text,
    }
}

/// Lexicon and stopwords bundled for repeated use.
#[derive(Clone, Debug, Default)]
pub struct TextProcessor {
    pub lexicon: SpellingLexicon,
    pub stopwords: StopwordSet,
}

impl TextProcessor {
    pub fn new(lexicon: SpellingLexicon, stopwords: StopwordSet) -> Self {
        TextProcessor { lexicon, stopwords }
    }

    pub fn process(&self, raw: &str) -> TokenizedText {
        tokenize(normalize(raw, &self.lexicon), &self.stopwords)
    }
}

/// True for chars treated as emoji when measuring how emoji-heavy a text is.
pub fn is_emoji(c: char) -> bool {
    use unicode_properties::UnicodeEmoji;
    !c.is_ascii()
        && c.is_emoji_char()
        && !matches!(c.general_category(), GeneralCategory::DecimalNumber)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn norm(s: &str) -> Normalized {
        normalize(s, &SpellingLexicon::default())
    }

    #[test]
    fn collapses_whitespace_and_punctuation() {
        let raw = "ভালো   ফোন!!";
        let n = norm(raw);
        assert_eq!(n.text, "ভালো ফোন");
        let text = tokenize(n, &StopwordSet::default());
        assert_eq!(text.len(), 2);
        assert_eq!(text.raw_span(0, 0).unwrap(), (0, 4));
        // second token follows a collapsed run of 3 spaces
        assert_eq!(text.raw_span(1, 1).unwrap(), (7, 10));
        assert_eq!(char_slice(raw, 7, 10), Some("ফোন"));
    }

    #[test]
    fn normalized_text_is_a_fixpoint() {
        let n = norm("ভালো ফোন");
        assert_eq!(n.text, "ভালো ফোন");
        assert_eq!(n.offset_map, OffsetMap::identity(char_len("ভালো ফোন")));
    }

    #[test]
    fn empty_and_separator_only_input() {
        assert_eq!(norm("").text, "");
        assert_eq!(norm("  !! 😀 ").text, "");
        assert_eq!(norm("").offset_map.pairs(), &[(0, 0)]);
        let text = tokenize(norm(""), &StopwordSet::default());
        assert!(text.is_empty());
    }

    #[test]
    fn leading_separators_shift_first_anchor() {
        let n = norm("  ফোন");
        assert_eq!(n.text, "ফোন");
        assert_eq!(n.offset_map.pairs()[0], (0, 2));
        assert_eq!(map_span(&n.offset_map, (0, 3)).unwrap(), (2, 5));
    }

    #[test]
    fn composes_split_vowel_sign() {
        // e-kar + aa-kar compose to o-kar
        let raw = "ক\u{09C7}\u{09BE}ন ভাল";
        let n = norm(raw);
        assert_eq!(n.text, "ক\u{09CB}ন ভাল");
        let text = tokenize(n, &StopwordSet::default());
        assert_eq!(text.raw_span(0, 0).unwrap(), (0, 4));
        assert_eq!(text.raw_span(1, 1).unwrap(), (5, 8));
    }

    #[test]
    fn decomposes_composition_exclusions() {
        // U+09DF is excluded from composition; NFC yields ya + nukta
        let n = norm("\u{09DF}");
        assert_eq!(n.text, "\u{09AF}\u{09BC}");
        assert_eq!(map_span(&n.offset_map, (0, 2)).unwrap(), (0, 1));
    }

    #[test]
    fn orphan_marks_and_joiners_are_dropped() {
        assert_eq!(norm("! \u{09BE}ক").text, "ক");
        assert_eq!(norm("\u{200D}ক\u{200D}").text, "ক");
        // joiner inside a conjunct survives
        assert_eq!(norm("র\u{200D}\u{09CD}য").text, "র\u{200D}\u{09CD}য");
    }

    #[test]
    fn emoji_become_separators() {
        assert_eq!(norm("ভালো👍🏽ফোন❤️").text, "ভালো ফোন");
    }

    #[test]
    fn lexicon_rewrites_whole_tokens() {
        let lex = SpellingLexicon::new([("ভাল", "ভালো")]).unwrap();
        let raw = "ভাল ফোন, ভালটা";
        let n = normalize(raw, &lex);
        assert_eq!(n.text, "ভালো ফোন ভালটা");
        let text = tokenize(n, &StopwordSet::default());
        assert_eq!(text.raw_span(0, 0).unwrap(), (0, 3));
        assert_eq!(text.raw_span(0, 1).unwrap(), (0, 7));
    }

    #[test]
    fn lexicon_rejects_chains_and_multi_token_entries() {
        assert!(SpellingLexicon::new([("a", "b"), ("b", "c")]).is_err());
        assert!(SpellingLexicon::new([("a b", "c")]).is_err());
        let lex = SpellingLexicon::from_tsv("# comment\nভাল\tভালো\n\n".as_bytes()).unwrap();
        assert_eq!(lex.get("ভাল"), Some("ভালো"));
        assert!(SpellingLexicon::from_tsv("novalue\n".as_bytes()).is_err());
    }

    #[test]
    fn stopwords_are_flagged_not_removed() {
        let stop = StopwordSet::new(["এবং"]);
        let plain = tokenize(norm("ফোন এবং ব্যাটারি"), &StopwordSet::default());
        let flagged = tokenize(norm("ফোন এবং ব্যাটারি"), &stop);
        assert_eq!(flagged.len(), 3);
        assert!(flagged.tokens[1].is_stopword);
        assert!(!flagged.tokens[0].is_stopword);
        let strip = |t: &TokenizedText| t.tokens.iter().map(|t| (t.start, t.end)).collect::<Vec<_>>();
        assert_eq!(strip(&plain), strip(&flagged));
    }

    #[test]
    fn map_span_rejects_out_of_bounds() {
        let n = norm("ফোন");
        assert!(matches!(
            map_span(&n.offset_map, (0, 4)),
            Err(Error::SpanOutOfBounds { .. })
        ));
        assert!(map_span(&n.offset_map, (2, 2)).is_err());
        let id = OffsetMap::identity(5);
        assert_eq!(map_span(&id, (1, 4)).unwrap(), (1, 4));
    }

    #[test]
    fn char_slice_bounds() {
        assert_eq!(char_slice("abc", 0, 3), Some("abc"));
        assert_eq!(char_slice("abc", 3, 3), Some(""));
        assert_eq!(char_slice("abc", 1, 4), None);
        assert_eq!(char_slice("ভালো", 1, 2), Some("\u{09BE}"));
    }

    #[test]
    fn emoji_detection_skips_ascii_and_digits() {
        assert!(is_emoji('😀'));
        assert!(is_emoji('❤'));
        assert!(!is_emoji('1'));
        assert!(!is_emoji('#'));
        assert!(!is_emoji('ক'));
        assert!(!is_emoji('১'));
    }
}
