//! Precision/recall/F1 scoring of extracted triplets, k-fold splitting and
//! report rendering.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use num_traits::FromPrimitive;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{AnnotatedReview, Polarity, Review, Span, Triplet};
use crate::error::{Error, Result};
use crate::pairmatch::{match_weights, Cardinality};
use crate::scalar::Weight;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

pub const ROW_NAMES: [&str; 4] = ["aspect_term", "opinion_term", "sentiment_classification", "overall_triplet"];

fn row_title(name: &str) -> &str {
    match name {
        "aspect_term" => "Aspect Term Extraction",
        "opinion_term" => "Opinion Term Extraction",
        "sentiment_classification" => "Sentiment Classification",
        "overall_triplet" => "Overall Triplet Extraction",
        other => other,
    }
}

/// Harmonic mean of `p` and `r`; zero when both are zero.
pub fn f1<T: Weight>(p: T, r: T) -> T {
    let sum = p + r;
    if sum == T::zero() {
        T::zero()
    } else {
        (p + p) * r / sum
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Prf<T> {
    pub precision: T,
    pub recall: T,
    pub f1: T,
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
}

/// Builds P/R/F1 from a true-positive count and the two set sizes.
///
/// Both sides empty counts as perfect agreement; a single empty side gives
/// zero for the ratio whose denominator vanishes.
pub fn prf_from_counts<T: Weight + FromPrimitive>(tp: usize, n_gold: usize, n_pred: usize) -> Prf<T> {
    let lit = |n: usize| T::from_usize(n).expect("count fits in scalar");
    let (precision, recall) = if n_gold == 0 && n_pred == 0 {
        (T::one(), T::one())
    } else {
        let ratio = |num: usize, den: usize| if den == 0 { T::zero() } else { lit(num) / lit(den) };
        (ratio(tp, n_pred), ratio(tp, n_gold))
    };
    Prf {
        precision,
        recall,
        f1: f1(precision, recall),
        tp,
        fp: n_pred - tp,
        fn_: n_gold - tp,
    }
}

/// Exact-equality P/R/F1 over two multisets.
pub fn prf<I: Ord, T: Weight + FromPrimitive>(gold: &[I], pred: &[I]) -> Prf<T> {
    let mut counts: BTreeMap<&I, (usize, usize)> = BTreeMap::new();
    for g in gold {
        counts.entry(g).or_default().0 += 1;
    }
    for p in pred {
        counts.entry(p).or_default().1 += 1;
    }
    let tp = counts.values().map(|&(g, p)| g.min(p)).sum();
    prf_from_counts(tp, gold.len(), pred.len())
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchCriterion {
    /// Offsets must be identical.
    #[default]
    Exact,
    /// Any character overlap counts as a hit.
    Overlap,
}

impl MatchCriterion {
    pub fn spans(self, a: &Span, b: &Span) -> bool {
        match self {
            MatchCriterion::Exact => a.start == b.start && a.end == b.end,
            MatchCriterion::Overlap => a.start < b.end && b.start < a.end,
        }
    }
}

/// Size of a maximum one-to-one matching under `weight`, plus the matched
/// pairs. `weight` returns 0 for incompatible items.
fn max_matching<G, P>(gold: &[G], pred: &[P], weight: impl Fn(&G, &P) -> i64) -> Vec<(usize, usize)> {
    if gold.is_empty() || pred.is_empty() {
        return Vec::new();
    }
    let w: Vec<Vec<i64>> = gold.iter().map(|g| pred.iter().map(|p| weight(g, p)).collect()).collect();
    match_weights(&w, 1, Cardinality::OneToOne)
}

/// Raw counts behind the four report rows; sums across reviews give
/// micro-averaged corpus metrics.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TripletTally {
    pub aspect: RowCounts,
    pub opinion: RowCounts,
    pub overall: RowCounts,
    /// `confusion[gold][pred]` over span-matched pairs.
    pub confusion: [[usize; 3]; 3],
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowCounts {
    pub tp: usize,
    pub n_gold: usize,
    pub n_pred: usize,
}

impl RowCounts {
    fn add(&mut self, other: RowCounts) {
        self.tp += other.tp;
        self.n_gold += other.n_gold;
        self.n_pred += other.n_pred;
    }

    fn prf(&self) -> Prf<f64> {
        prf_from_counts(self.tp, self.n_gold, self.n_pred)
    }
}

impl TripletTally {
    /// Scores one review. Aspect and opinion rows compare the spans of the
    /// two triplet lists as multisets, so an aspect shared by two triplets
    /// counts twice on both sides.
    pub fn score(gold: &[Triplet], pred: &[Triplet], criterion: MatchCriterion) -> Self {
        let count = |tp: usize| RowCounts {
            tp,
            n_gold: gold.len(),
            n_pred: pred.len(),
        };
        let hit = |ok: bool| i64::from(ok);
        let aspect = max_matching(gold, pred, |g, p| hit(criterion.spans(&g.aspect, &p.aspect))).len();
        let opinion = max_matching(gold, pred, |g, p| hit(criterion.spans(&g.opinion, &p.opinion))).len();
        let overall = max_matching(gold, pred, |g, p| {
            hit(criterion.spans(&g.aspect, &p.aspect)
                && criterion.spans(&g.opinion, &p.opinion)
                && g.polarity == p.polarity)
        })
        .len();
        // span-matched pairs: as many as possible, then as many agreeing
        // polarities as possible
        let bonus = pred.len() as i64 + 1;
        let pairs = max_matching(gold, pred, |g, p| {
            if criterion.spans(&g.aspect, &p.aspect) && criterion.spans(&g.opinion, &p.opinion) {
                bonus + hit(g.polarity == p.polarity)
            } else {
                0
            }
        });
        let mut confusion = [[0; 3]; 3];
        for (g, p) in pairs {
            confusion[gold[g].polarity.index()][pred[p].polarity.index()] += 1;
        }
        TripletTally {
            aspect: count(aspect),
            opinion: count(opinion),
            overall: count(overall),
            confusion,
        }
    }

    pub fn add(&mut self, other: &TripletTally) {
        self.aspect.add(other.aspect);
        self.opinion.add(other.opinion);
        self.overall.add(other.overall);
        for (row, other_row) in self.confusion.iter_mut().zip(&other.confusion) {
            for (c, o) in row.iter_mut().zip(other_row) {
                *c += o;
            }
        }
    }

    pub fn rows(&self) -> Vec<MetricsRow> {
        vec![
            MetricsRow::from_prf(ROW_NAMES[0], self.aspect.prf()),
            MetricsRow::from_prf(ROW_NAMES[1], self.opinion.prf()),
            self.sentiment_row(),
            MetricsRow::from_prf(ROW_NAMES[3], self.overall.prf()),
        ]
    }

    /// Accuracy plus macro precision and recall over the labels that occur
    /// among matched pairs; F1 is their harmonic mean.
    fn sentiment_row(&self) -> MetricsRow {
        let c = &self.confusion;
        let matched: usize = c.iter().flatten().sum();
        if matched == 0 {
            return MetricsRow::empty(ROW_NAMES[2]);
        }
        let correct: usize = (0..3).map(|k| c[k][k]).sum();
        let (mut p_sum, mut r_sum, mut labels) = (0.0, 0.0, 0usize);
        for k in 0..3 {
            let n_gold: usize = c[k].iter().sum();
            let n_pred: usize = (0..3).map(|g| c[g][k]).sum();
            if n_gold + n_pred == 0 {
                continue;
            }
            let per = prf_from_counts::<f64>(c[k][k], n_gold, n_pred);
            p_sum += per.precision;
            r_sum += per.recall;
            labels += 1;
        }
        let precision = p_sum / labels as f64;
        let recall = r_sum / labels as f64;
        MetricsRow {
            name: ROW_NAMES[2].into(),
            precision: Some(precision),
            recall: Some(recall),
            f1: Some(f1(precision, recall)),
            accuracy: Some(correct as f64 / matched as f64),
        }
    }
}

pub fn score_triplets(gold: &[Triplet], pred: &[Triplet], criterion: MatchCriterion) -> Vec<MetricsRow> {
    TripletTally::score(gold, pred, criterion).rows()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub name: String,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    pub accuracy: Option<f64>,
}

impl MetricsRow {
    pub fn empty(name: &str) -> Self {
        MetricsRow {
            name: name.into(),
            precision: None,
            recall: None,
            f1: None,
            accuracy: None,
        }
    }

    pub fn from_prf(name: &str, prf: Prf<f64>) -> Self {
        MetricsRow {
            name: name.into(),
            precision: Some(prf.precision),
            recall: Some(prf.recall),
            f1: Some(prf.f1),
            accuracy: None,
        }
    }

    pub fn values(&self) -> [Option<f64>; 4] {
        [self.precision, self.recall, self.f1, self.accuracy]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold: usize,
    pub train_reviews: usize,
    pub test_reviews: usize,
    pub rows: Vec<MetricsRow>,
}

/// Sample standard deviation across folds, per metric.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RowSpread {
    pub name: String,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    pub accuracy: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsReport {
    pub schema_version: u32,
    pub seed: u64,
    pub config_digest: String,
    pub criterion: MatchCriterion,
    pub rows: Vec<MetricsRow>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub fold_details: Vec<FoldReport>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub spread: Vec<RowSpread>,
}

impl MetricsReport {
    pub fn new(rows: Vec<MetricsRow>, seed: u64, config_digest: impl Into<String>, criterion: MatchCriterion) -> Self {
        MetricsReport {
            schema_version: REPORT_SCHEMA_VERSION,
            seed,
            config_digest: config_digest.into(),
            criterion,
            rows,
            fold_details: Vec::new(),
            spread: Vec::new(),
        }
    }

    pub fn row(&self, name: &str) -> Option<&MetricsRow> {
        self.rows.iter().find(|r| r.name == name)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let report: MetricsReport = serde_json::from_str(s)?;
        if report.schema_version != REPORT_SCHEMA_VERSION {
            return Err(Error::Invalid(format!(
                "report schema version {} is not supported",
                report.schema_version
            )));
        }
        Ok(report)
    }
}

/// Review-to-fold assignment, aligned with the corpus order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldSplit {
    pub k: usize,
    pub ids: Vec<String>,
    pub folds: Vec<usize>,
}

impl FoldSplit {
    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.folds.len()).filter(|&i| self.folds[i] == fold).collect()
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.folds.len()).filter(|&i| self.folds[i] != fold).collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in &self.folds {
            sizes[f] += 1;
        }
        sizes
    }
}

/// Most frequent gold polarity (earlier label on ties); `None` without gold.
pub fn majority_polarity(triplets: &[Triplet]) -> Option<Polarity> {
    let mut counts = [0usize; 3];
    for t in triplets {
        counts[t.polarity.index()] += 1;
    }
    let best = (1..3).fold(0, |a, k| if counts[k] > counts[a] { k } else { a });
    (counts[best] > 0).then(|| Polarity::LABELS[best])
}

fn gold_of(review: &AnnotatedReview) -> Result<Vec<Triplet>> {
    match &review.gold {
        Some(g) => Ok(g.clone()),
        None => Err(Error::Unadjudicated(vec![review.id().to_owned()])),
    }
}

/// Stratified k-fold split by review-level majority polarity.
///
/// Each stratum is shuffled with the seed and dealt round-robin, continuing
/// from where the previous stratum stopped, so fold sizes differ by at
/// most one.
pub fn kfold_split(corpus: &[AnnotatedReview], k: usize, seed: u64) -> Result<FoldSplit> {
    if k < 2 {
        return Err(Error::Config(format!("k = {k}; cross-validation needs k >= 2")));
    }
    if corpus.len() < k {
        return Err(Error::Invalid(format!("{} reviews cannot fill {k} folds", corpus.len())));
    }
    let mut strata: BTreeMap<Option<usize>, Vec<usize>> = BTreeMap::new();
    for (i, review) in corpus.iter().enumerate() {
        let key = majority_polarity(review.gold.as_deref().unwrap_or(&[])).map(Polarity::index);
        strata.entry(key).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut folds = vec![0; corpus.len()];
    let mut next = 0;
    for members in strata.values_mut() {
        members.shuffle(&mut rng);
        for &i in members.iter() {
            folds[i] = next;
            next = (next + 1) % k;
        }
    }
    Ok(FoldSplit {
        k,
        ids: corpus.iter().map(|r| r.id().to_owned()).collect(),
        folds,
    })
}

/// Anything that turns a review into triplets with raw-text offsets.
pub trait TripletExtractor {
    fn extract(&self, review: &Review) -> Result<Vec<Triplet>>;
}

/// Micro-averaged scores of `extractor` on an adjudicated corpus.
pub fn evaluate<E: TripletExtractor + ?Sized>(
    extractor: &E,
    corpus: &[AnnotatedReview],
    criterion: MatchCriterion,
) -> Result<TripletTally> {
    let missing: Vec<String> = corpus
        .iter()
        .filter(|r| r.gold.is_none())
        .map(|r| r.id().to_owned())
        .collect();
    if !missing.is_empty() {
        return Err(Error::Unadjudicated(missing));
    }
    let mut tally = TripletTally::default();
    for review in corpus {
        let pred = extractor.extract(&review.review)?;
        tally.add(&TripletTally::score(&gold_of(review)?, &pred, criterion));
    }
    Ok(tally)
}

/// Trains on k−1 folds and scores the held-out fold, k times. Folds run on
/// scoped threads; results are collected in fold order.
///
/// Report rows hold fold means of precision, recall and accuracy; F1 is
/// the harmonic mean of the mean precision and recall. Per-fold rows and
/// the fold-to-fold standard deviation are attached.
pub fn cross_validate<E, F>(
    corpus: &[AnnotatedReview],
    k: usize,
    seed: u64,
    config_digest: &str,
    criterion: MatchCriterion,
    fit: F,
) -> Result<MetricsReport>
where
    E: TripletExtractor,
    F: Fn(usize, &[AnnotatedReview]) -> Result<E> + Sync,
{
    let missing: Vec<String> = corpus
        .iter()
        .filter(|r| r.gold.is_none())
        .map(|r| r.id().to_owned())
        .collect();
    if !missing.is_empty() {
        return Err(Error::Unadjudicated(missing));
    }
    let split = kfold_split(corpus, k, seed)?;
    let run_fold = |fold: usize| -> Result<FoldReport> {
        let pick = |idx: Vec<usize>| -> Vec<AnnotatedReview> { idx.into_iter().map(|i| corpus[i].clone()).collect() };
        let train = pick(split.train_indices(fold));
        let test = pick(split.test_indices(fold));
        let wrap = |e: Error| Error::Fold {
            fold,
            source: Box::new(e),
        };
        let model = fit(fold, &train).map_err(wrap)?;
        let tally = evaluate(&model, &test, criterion).map_err(wrap)?;
        Ok(FoldReport {
            fold,
            train_reviews: train.len(),
            test_reviews: test.len(),
            rows: tally.rows(),
        })
    };
    let results: Vec<Result<FoldReport>> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..k).map(|fold| s.spawn(move || run_fold(fold))).collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|p| std::panic::resume_unwind(p)))
            .collect()
    });
    let folds = results.into_iter().collect::<Result<Vec<_>>>()?;

    let mut rows = Vec::with_capacity(ROW_NAMES.len());
    let mut spread = Vec::with_capacity(ROW_NAMES.len());
    for (r, name) in ROW_NAMES.iter().enumerate() {
        let column = |m: usize| -> Vec<f64> { folds.iter().filter_map(|f| f.rows[r].values()[m]).collect() };
        let [p, rc, f, a] = [0, 1, 2, 3].map(column);
        let precision = mean(&p);
        let recall = mean(&rc);
        rows.push(MetricsRow {
            name: (*name).into(),
            precision,
            recall,
            f1: precision.zip(recall).map(|(p, r)| f1(p, r)),
            accuracy: mean(&a),
        });
        spread.push(RowSpread {
            name: (*name).into(),
            precision: stdev(&p),
            recall: stdev(&rc),
            f1: stdev(&f),
            accuracy: stdev(&a),
        });
    }
    let mut report = MetricsReport::new(rows, seed, config_digest, criterion);
    report.fold_details = folds;
    report.spread = spread;
    Ok(report)
}

fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

fn stdev(xs: &[f64]) -> Option<f64> {
    if xs.len() < 2 {
        return None;
    }
    let m = mean(xs)?;
    Some((xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt())
}

/// `0.774` → `"77.4%"`.
pub fn percent(x: f64) -> String {
    format!("{:.1}%", x * 100.0)
}

fn cell(x: Option<f64>) -> String {
    x.map_or_else(|| "-".into(), percent)
}

fn render_rows(out: &mut String, rows: &[MetricsRow]) {
    for row in rows {
        let _ = writeln!(
            out,
            "{:<28}{:>11}{:>9}{:>9}{:>10}",
            row_title(&row.name),
            cell(row.precision),
            cell(row.recall),
            cell(row.f1),
            cell(row.accuracy)
        );
    }
}

/// Fixed-width text table; the fold section is omitted for single runs.
pub fn render_report(report: &MetricsReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "seed {}  config {}", report.seed, report.config_digest);
    let header = format!("{:<28}{:>11}{:>9}{:>9}{:>10}", "Task", "Precision", "Recall", "F1", "Accuracy");
    let _ = writeln!(out, "{header}");
    let _ = writeln!(out, "{}", "-".repeat(header.len()));
    render_rows(&mut out, &report.rows);
    if !report.spread.is_empty() {
        let _ = writeln!(out, "\nStandard deviation across folds");
        for s in &report.spread {
            let _ = writeln!(
                out,
                "{:<28}{:>11}{:>9}{:>9}{:>10}",
                row_title(&s.name),
                cell(s.precision),
                cell(s.recall),
                cell(s.f1),
                cell(s.accuracy)
            );
        }
    }
    if !report.fold_details.is_empty() {
        let _ = writeln!(out, "\nFolds");
        for fold in &report.fold_details {
            let _ = writeln!(
                out,
                "fold {} (train {}, test {})",
                fold.fold, fold.train_reviews, fold.test_reviews
            );
            render_rows(&mut out, &fold.rows);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::Ratio;

    fn t(a: (usize, usize), o: (usize, usize), p: Polarity) -> Triplet {
        Triplet::new(a, o, p)
    }

    #[test]
    fn f1_examples() {
        assert_eq!(f1(0.0, 0.0), 0.0);
        assert!((f1(0.3, 0.3) - 0.3f64).abs() < 1e-15);
        assert!((f1(0.774f64, 0.758) - 0.766).abs() < 5e-4);
        assert!((f1(0.861f64, 0.845) - 0.853).abs() < 5e-4);
        assert_eq!(f1(Ratio::new(1i64, 2), Ratio::new(1, 3)), Ratio::new(2, 5));
    }

    #[test]
    fn prf_examples() {
        let x: Prf<f64> = prf(&[1, 2, 3], &[1, 4]);
        assert_eq!((x.precision, x.tp, x.fp, x.fn_), (0.5, 1, 1, 2));
        assert!((x.recall - 1.0 / 3.0).abs() < 1e-15);
        assert!((x.f1 - 0.4).abs() < 1e-15);
        let exact: Prf<Ratio<i64>> = prf(&[1, 2, 3], &[1, 4]);
        assert_eq!(exact.f1, Ratio::new(2, 5));
        let both_empty: Prf<f64> = prf::<u8, f64>(&[], &[]);
        assert_eq!((both_empty.precision, both_empty.recall, both_empty.f1), (1.0, 1.0, 1.0));
        let no_pred: Prf<f64> = prf(&[1], &[]);
        assert_eq!((no_pred.precision, no_pred.recall), (0.0, 0.0));
        let disjoint: Prf<f64> = prf(&[1, 2], &[3]);
        assert_eq!(disjoint.f1, 0.0);
    }

    #[test]
    fn flipped_polarities() {
        let gold = vec![t((0, 2), (3, 5), Polarity::Positive), t((6, 8), (9, 10), Polarity::Negative)];
        let pred: Vec<Triplet> = gold
            .iter()
            .map(|g| {
                let mut p = g.clone();
                p.polarity = if g.polarity == Polarity::Positive { Polarity::Negative } else { Polarity::Positive };
                p
            })
            .collect();
        let rows = score_triplets(&gold, &pred, MatchCriterion::Exact);
        assert_eq!(rows[0].f1, Some(1.0));
        assert_eq!(rows[1].f1, Some(1.0));
        assert_eq!(rows[2].accuracy, Some(0.0));
        assert_eq!(rows[3].f1, Some(0.0));
        let same = score_triplets(&gold, &gold, MatchCriterion::Exact);
        assert!(same.iter().all(|r| r.f1 == Some(1.0)));
        assert_eq!(same[2].accuracy, Some(1.0));
    }

    #[test]
    fn overlap_criterion_is_looser() {
        let gold = vec![t((0, 4), (5, 9), Polarity::Positive)];
        let pred = vec![t((1, 4), (5, 8), Polarity::Positive)];
        assert_eq!(score_triplets(&gold, &pred, MatchCriterion::Exact)[3].f1, Some(0.0));
        assert_eq!(score_triplets(&gold, &pred, MatchCriterion::Overlap)[3].f1, Some(1.0));
    }

    #[test]
    fn shared_aspect_counts_per_triplet() {
        let gold = vec![t((0, 2), (3, 5), Polarity::Positive), t((0, 2), (6, 8), Polarity::Positive)];
        let pred = vec![t((0, 2), (3, 5), Polarity::Positive)];
        let tally = TripletTally::score(&gold, &pred, MatchCriterion::Exact);
        assert_eq!(tally.aspect, RowCounts { tp: 1, n_gold: 2, n_pred: 1 });
        assert!(tally.overall.tp <= tally.aspect.tp.min(tally.opinion.tp));
    }

    #[test]
    fn rendering() {
        let rows = vec![
            MetricsRow {
                name: "aspect_term".into(),
                precision: Some(0.774),
                recall: Some(0.758),
                f1: Some(0.766),
                accuracy: None,
            },
            MetricsRow::empty("sentiment_classification"),
        ];
        let report = MetricsReport::new(rows, 7, "abc", MatchCriterion::Exact);
        let text = render_report(&report);
        assert!(text.contains("77.4%"));
        assert!(text.contains("75.8%"));
        assert!(text.contains("76.6%"));
        assert!(!text.contains("Folds"));
        assert_eq!(MetricsReport::from_json(&report.to_json().unwrap()).unwrap(), report);
    }

    #[test]
    fn small_kfold() {
        let corpus: Vec<AnnotatedReview> = (0..10)
            .map(|i| AnnotatedReview {
                review: Review {
                    id: format!("r{i}"),
                    platform: crate::corpus::Platform::Daraz,
                    raw_text: "x".into(),
                    collected_at: None,
                    product_category: None,
                },
                annotations: Vec::new(),
                gold: Some(Vec::new()),
            })
            .collect();
        let split = kfold_split(&corpus, 5, 1).unwrap();
        assert_eq!(split.fold_sizes(), vec![2; 5]);
        assert_eq!(split, kfold_split(&corpus, 5, 1).unwrap());
        assert!(kfold_split(&corpus[..3], 5, 1).is_err());
        assert_eq!(kfold_split(&corpus, 10, 1).unwrap().fold_sizes(), vec![1; 10]);
    }
}
