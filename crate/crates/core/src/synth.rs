//! Synthetic annotated corpora with known triplets.
//!
//! Aspect terms come from a fixed per-category vocabulary, each followed
//! (directly or after one intensifier) by an opinion term whose wording
//! fixes the polarity. Fillers, punctuation, emoji and irregular spacing
//! surround the clauses so offsets are exercised.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{adjudicate, AnnotatedReview, AnnotationRecord, CorpusManifest, Platform, Polarity, Review, Triplet};
use crate::error::{Error, Result};

pub const CATEGORIES: [(&str, &[&str]); 5] = [
    ("Battery Life", &["ব্যাটারি", "ব্যাটারি ব্যাকআপ", "চার্জিং"]),
    ("Camera Quality", &["ক্যামেরা", "ছবির মান", "সেলফি ক্যামেরা"]),
    ("Service", &["সার্ভিস", "ডেলিভারি", "কাস্টমার সাপোর্ট"]),
    ("Pricing", &["দাম", "মূল্য"]),
    ("Packaging", &["প্যাকেজিং", "বক্স", "মোড়ক"]),
];

pub const POSITIVE: &[&str] = &["খুব ভালো", "অসাধারণ", "চমৎকার", "দারুণ", "সন্তোষজনক"];
pub const NEGATIVE: &[&str] = &["খুব খারাপ", "বাজে", "হতাশাজনক", "নিম্নমানের", "অসন্তোষজনক"];
pub const NEUTRAL: &[&str] = &["মোটামুটি", "চলনসই", "সাধারণ মানের"];

const OPENERS: &[&str] = &[
    "",
    "পণ্যটি হাতে পেয়েছি।",
    "গতকাল অর্ডার করেছিলাম।",
    "আমি এই ফোনটি কিনেছি।",
    "দুই সপ্তাহ ব্যবহার করলাম।",
];
const INTENSIFIERS: &[&str] = &["সত্যিই", "একেবারে"];
const CONNECTORS: &[&str] = &["কিন্তু", "এবং", "তবে"];
const CLOSERS: &[&str] = &["", "ধন্যবাদ।", "👍", "সবাইকে জানালাম।", "😊😊"];

pub fn opinion_terms(polarity: Polarity) -> &'static [&'static str] {
    match polarity {
        Polarity::Positive => POSITIVE,
        Polarity::Negative => NEGATIVE,
        Polarity::Neutral => NEUTRAL,
    }
}

pub fn aspect_terms() -> Vec<String> {
    CATEGORIES
        .iter()
        .flat_map(|(_, terms)| terms.iter().map(|t| t.to_string()))
        .collect()
}

pub fn all_opinion_terms() -> Vec<String> {
    Polarity::LABELS
        .iter()
        .flat_map(|&p| opinion_terms(p).iter().map(|t| t.to_string()))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    pub reviews: usize,
    pub seed: u64,
    /// Triplets per review are drawn uniformly from `1..=max_triplets`.
    pub max_triplets: usize,
    /// Sampling weights for positive, negative, neutral.
    pub polarity_mix: [f64; 3],
    pub annotators: usize,
    /// Chance that one annotator drops or flips a triplet; majority vote
    /// still recovers the planted set.
    pub annotator_noise: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            reviews: 500,
            seed: 42,
            max_triplets: 2,
            polarity_mix: [0.45, 0.45, 0.10],
            annotators: 3,
            annotator_noise: 0.2,
        }
    }
}

/// Builds raw text while tracking char offsets.
#[derive(Default)]
struct TextBuilder {
    text: String,
    chars: usize,
}

impl TextBuilder {
    fn push(&mut self, s: &str) -> (usize, usize) {
        let start = self.chars;
        self.text.push_str(s);
        self.chars += s.chars().count();
        (start, self.chars)
    }

    fn space(&mut self, rng: &mut ChaCha8Rng) {
        let s = match rng.gen_range(0..10) {
            0 => "  ",
            1 => " \u{00A0}",
            _ => " ",
        };
        self.push(s);
    }
}

struct Planted {
    category: &'static str,
    polarity: Polarity,
}

fn pick<'a>(rng: &mut ChaCha8Rng, items: &[&'a str]) -> &'a str {
    items[rng.gen_range(0..items.len())]
}

fn category_terms(name: &str) -> &'static [&'static str] {
    CATEGORIES
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, t)| *t)
        .unwrap_or(CATEGORIES[0].1)
}

/// Writes one review around the planted triplets; returns text and gold.
fn render(planted: &[Planted], rng: &mut ChaCha8Rng) -> (String, Vec<Triplet>) {
    let mut b = TextBuilder::default();
    if rng.gen_bool(0.2) {
        b.push(" ");
    }
    let opener = pick(rng, OPENERS);
    if !opener.is_empty() {
        b.push(opener);
        b.space(rng);
    }
    let mut used_aspects: Vec<&str> = Vec::new();
    let mut gold = Vec::new();
    for (i, p) in planted.iter().enumerate() {
        if i > 0 {
            if rng.gen_bool(0.5) {
                b.push(",");
            }
            b.space(rng);
            b.push(pick(rng, CONNECTORS));
            b.space(rng);
        }
        let terms = category_terms(p.category);
        let fresh: Vec<&str> = terms.iter().copied().filter(|t| !used_aspects.contains(t)).collect();
        let aspect = pick(rng, if fresh.is_empty() { terms } else { &fresh });
        used_aspects.push(aspect);
        let a = b.push(aspect);
        b.space(rng);
        if rng.gen_bool(0.3) {
            b.push(pick(rng, INTENSIFIERS));
            b.space(rng);
        }
        let o = b.push(pick(rng, opinion_terms(p.polarity)));
        b.push(match rng.gen_range(0..4) {
            0 => "!",
            1 => "!!",
            _ => "।",
        });
        gold.push(Triplet::new(a, o, p.polarity).with_category(p.category));
    }
    let closer = pick(rng, CLOSERS);
    if !closer.is_empty() {
        b.space(rng);
        b.push(closer);
    }
    (b.text, gold)
}

fn annotate(gold: &[Triplet], annotators: usize, noise: f64, rng: &mut ChaCha8Rng) -> Vec<AnnotationRecord> {
    (0..annotators)
        .map(|k| {
            let mut triplets = gold.to_vec();
            // only the last annotator errs, so a strict majority always agrees
            if k + 1 == annotators && annotators >= 3 && !triplets.is_empty() && rng.gen_bool(noise) {
                let i = rng.gen_range(0..triplets.len());
                if rng.gen_bool(0.5) {
                    triplets.remove(i);
                } else {
                    let flipped = Polarity::LABELS[(triplets[i].polarity.index() + 1) % 3];
                    triplets[i].polarity = flipped;
                }
            }
            AnnotationRecord::new(format!("ann{}", k + 1), triplets)
        })
        .collect()
}

fn record(id: String, platform: Platform, text: String, gold: Vec<Triplet>, annotations: Vec<AnnotationRecord>) -> Result<AnnotatedReview> {
    let gold = if annotations.len() >= 2 {
        adjudicate(&annotations)?.gold
    } else {
        let mut g = gold;
        g.sort();
        g
    };
    Ok(AnnotatedReview {
        review: Review {
            id,
            platform,
            raw_text: text,
            collected_at: None,
            product_category: Some("Electronics".into()),
        },
        annotations,
        gold: Some(gold),
    })
}

/// Annotated corpus of `config.reviews` reviews with planted triplets.
pub fn generate(config: &SynthConfig) -> Result<Vec<AnnotatedReview>> {
    if config.max_triplets == 0 || config.annotators == 0 {
        return Err(Error::Config("synth needs max_triplets >= 1 and annotators >= 1".into()));
    }
    if config.polarity_mix.iter().any(|w| !(*w >= 0.0)) || config.polarity_mix.iter().sum::<f64>() <= 0.0 {
        return Err(Error::Config("synth polarity_mix needs non-negative weights with a positive sum".into()));
    }
    let mix = rand::distributions::WeightedIndex::new(config.polarity_mix)
        .map_err(|e| Error::Config(format!("synth polarity_mix: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut out = Vec::with_capacity(config.reviews);
    for i in 0..config.reviews {
        let n = rng.gen_range(1..=config.max_triplets);
        let planted: Vec<Planted> = (0..n)
            .map(|_| Planted {
                category: CATEGORIES[rng.gen_range(0..CATEGORIES.len())].0,
                polarity: Polarity::LABELS[rng.sample(&mix)],
            })
            .collect();
        let (text, gold) = render(&planted, &mut rng);
        let annotations = annotate(&gold, config.annotators, config.annotator_noise, &mut rng);
        let platform = Platform::ALL[rng.gen_range(0..Platform::ALL.len())];
        out.push(record(format!("syn-{i:05}"), platform, text, gold, annotations)?);
    }
    Ok(out)
}

/// Corpus whose statistics reproduce `manifest` exactly: per-platform
/// review counts and per-category polarity counts of gold triplets.
pub fn mirror_manifest(manifest: &CorpusManifest, seed: u64) -> Result<Vec<AnnotatedReview>> {
    manifest
        .check_identities()
        .map_err(|problems| Error::Invalid(problems.join("; ")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut items: Vec<(String, Polarity)> = Vec::new();
    for (cat, counts) in &manifest.per_category {
        for (p, n) in [
            (Polarity::Positive, counts.positive),
            (Polarity::Negative, counts.negative),
            (Polarity::Neutral, counts.neutral),
        ] {
            items.extend(std::iter::repeat_n((cat.clone(), p), n));
        }
    }
    if !items.is_empty() && manifest.total_reviews == 0 {
        return Err(Error::Invalid("manifest lists triplets but no reviews".into()));
    }
    items.shuffle(&mut rng);
    let mut buckets: Vec<Vec<(String, Polarity)>> = vec![Vec::new(); manifest.total_reviews];
    for (j, item) in items.into_iter().enumerate() {
        buckets[j % manifest.total_reviews.max(1)].push(item);
    }
    let platforms: Vec<Platform> = manifest
        .per_platform
        .iter()
        .flat_map(|(&p, &n)| std::iter::repeat_n(p, n))
        .collect();
    let mut out = Vec::with_capacity(platforms.len());
    for (i, (platform, bucket)) in platforms.into_iter().zip(buckets).enumerate() {
        let mut text = String::new();
        let mut gold = Vec::new();
        let mut offset = 0;
        for (cat, polarity) in bucket {
            // category names outside the built-in vocabulary still get a
            // usable aspect term
            let aspect = CATEGORIES
                .iter()
                .find(|(n, _)| *n == cat)
                .map_or("পণ্য", |(_, t)| t[rng.gen_range(0..t.len())]);
            let opinion = opinion_terms(polarity)[rng.gen_range(0..opinion_terms(polarity).len())];
            if !text.is_empty() {
                text.push(' ');
                offset += 1;
            }
            let a = (offset, offset + aspect.chars().count());
            let o = (a.1 + 1, a.1 + 1 + opinion.chars().count());
            text.push_str(aspect);
            text.push(' ');
            text.push_str(opinion);
            text.push('।');
            offset = o.1 + 1;
            gold.push(Triplet::new(a, o, polarity).with_category(cat));
        }
        if text.is_empty() {
            text.push_str(OPENERS[1]);
        }
        let annotations = vec![AnnotationRecord::new("ann1", gold.clone())];
        out.push(record(format!("mirror-{i:05}"), platform, text, gold, annotations)?);
    }
    Ok(out)
}

/// Per-category polarity counts of the planted gold, for quick summaries.
pub fn polarity_mix(corpus: &[AnnotatedReview]) -> BTreeMap<Polarity, usize> {
    let mut counts = BTreeMap::new();
    for t in corpus.iter().flat_map(|r| r.gold.iter().flatten()) {
        *counts.entry(t.polarity).or_insert(0) += 1;
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::corpus_stats;

    #[test]
    fn planted_offsets_point_at_terms() {
        let corpus = generate(&SynthConfig {
            reviews: 50,
            ..SynthConfig::default()
        })
        .unwrap();
        let aspects = aspect_terms();
        let opinions = all_opinion_terms();
        for r in &corpus {
            r.validate(true).unwrap();
            for t in r.gold.as_ref().unwrap() {
                let a = t.aspect.text(&r.review.raw_text).unwrap();
                let o = t.opinion.text(&r.review.raw_text).unwrap();
                assert!(aspects.iter().any(|x| x == a), "{a}");
                assert!(opinions.iter().any(|x| x == o), "{o}");
                assert!(opinion_terms(t.polarity).contains(&o));
            }
        }
        assert_eq!(corpus, generate(&SynthConfig { reviews: 50, ..SynthConfig::default() }).unwrap());
    }

    #[test]
    fn mirror_reproduces_counts() {
        let manifest = CorpusManifest::from_json(
            r#"{"total_reviews":6,"per_platform":{"daraz":4,"other":2},
                "per_category":{"Pricing":{"total":5,"positive":3,"negative":2,"neutral":0},
                                "Service":{"total":2,"positive":0,"negative":1,"neutral":1}}}"#,
        )
        .unwrap();
        let corpus = mirror_manifest(&manifest, 3).unwrap();
        for r in &corpus {
            r.validate(true).unwrap();
        }
        manifest.verify(&corpus_stats(&corpus).unwrap()).unwrap();
    }
}
