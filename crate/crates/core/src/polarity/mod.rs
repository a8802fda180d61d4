//! Pair featurization and the polarity classifier.
//!
//! Token embeddings are pooled per span and stacked with a few scalar
//! extras; a boosted tree ensemble (or a linear baseline) predicts one of
//! the three polarity labels from that vector.

pub mod booster;
pub mod embed;
pub mod linear;

use serde::{Deserialize, Serialize};

use crate::corpus::Polarity;
use crate::error::{Error, Result};
use crate::spanex::Interval;

pub use booster::{Booster, BoosterConfig};
pub use embed::{EmbeddingBackend, EmbeddingStore, HashedEmbedding, PrecomputedEmbedding};
pub use linear::{LinearConfig, LinearModel};

/// Number of scalar features after the three pooled blocks.
pub const PAIR_EXTRAS: usize = 4;

pub const N_CLASSES: usize = Polarity::LABELS.len();

/// Numerically stable softmax.
pub fn softmax(margins: &[f64]) -> Vec<f64> {
    let max = margins.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = margins.iter().map(|m| (m - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Arithmetic mean of rows `first..=last`.
pub fn mean_pool(vectors: &[Vec<f64>], first: usize, last: usize) -> Vec<f64> {
    let rows = &vectors[first..=last];
    let dim = rows[0].len();
    let mut out = vec![0.0; dim];
    for row in rows {
        for (o, v) in out.iter_mut().zip(row) {
            *o += v;
        }
    }
    let n = rows.len() as f64;
    out.iter_mut().for_each(|o| *o /= n);
    out
}

/// `[aspect mean | opinion mean | review mean | gap, |aspect|, |opinion|, edge weight]`
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairFeatures {
    pub vector: Vec<f64>,
}

impl PairFeatures {
    pub fn dim_for(embedding_dim: usize) -> usize {
        3 * embedding_dim + PAIR_EXTRAS
    }

    pub fn len(&self) -> usize {
        self.vector.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vector.is_empty()
    }
}

pub fn featurize_pair(
    vectors: &[Vec<f64>],
    aspect: Interval,
    opinion: Interval,
    edge_weight: f64,
) -> Result<PairFeatures> {
    let n = vectors.len();
    for span in [aspect, opinion] {
        if span.first > span.last || span.last >= n {
            return Err(Error::SpanOutOfBounds {
                start: span.first,
                end: span.last + 1,
                len: n,
            });
        }
    }
    let d = vectors[0].len();
    if let Some(bad) = vectors.iter().find(|v| v.len() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            actual: bad.len(),
        });
    }
    let mut vector = Vec::with_capacity(PairFeatures::dim_for(d));
    vector.extend(mean_pool(vectors, aspect.first, aspect.last));
    vector.extend(mean_pool(vectors, opinion.first, opinion.last));
    vector.extend(mean_pool(vectors, 0, n - 1));
    vector.extend([
        aspect.gap(&opinion) as f64,
        aspect.len() as f64,
        opinion.len() as f64,
        edge_weight,
    ]);
    if vector.iter().any(|v| !v.is_finite()) {
        return Err(Error::Invalid("pair features contain a non-finite value".into()));
    }
    Ok(PairFeatures { vector })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifierKind {
    #[default]
    Boosted,
    Linear,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PolarityConfig {
    pub classifier: ClassifierKind,
    /// Inverse-frequency class weights.
    pub class_weighting: bool,
    pub booster: BoosterConfig,
    pub linear: LinearConfig,
}

impl Default for PolarityConfig {
    fn default() -> Self {
        PolarityConfig {
            classifier: ClassifierKind::Boosted,
            class_weighting: true,
            booster: BoosterConfig::default(),
            linear: LinearConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Classifier {
    Boosted(Booster),
    Linear(LinearModel),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolarityModel {
    /// Always `Polarity::LABELS`; stored so bundles are self-describing.
    pub labels: Vec<Polarity>,
    pub n_features: usize,
    pub config: PolarityConfig,
    pub classifier: Classifier,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingReport {
    /// Indexed like `Polarity::LABELS`.
    pub class_counts: [usize; N_CLASSES],
    pub training_accuracy: f64,
}

pub fn train_polarity(
    features: &[PairFeatures],
    labels: &[Polarity],
    config: &PolarityConfig,
) -> Result<(PolarityModel, TrainingReport)> {
    if features.len() != labels.len() {
        return Err(Error::Invalid(format!(
            "{} feature rows but {} labels",
            features.len(),
            labels.len()
        )));
    }
    let Some(first) = features.first() else {
        return Err(Error::Degenerate("no polarity training examples".into()));
    };
    let dim = first.len();
    if let Some(bad) = features.iter().find(|f| f.len() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            actual: bad.len(),
        });
    }
    let ys: Vec<usize> = labels.iter().map(|p| p.index()).collect();
    let mut class_counts = [0usize; N_CLASSES];
    for &y in &ys {
        class_counts[y] += 1;
    }
    let present = class_counts.iter().filter(|&&c| c > 0).count();
    if present < 2 {
        let only = Polarity::from_index(ys[0]).unwrap_or(Polarity::Positive);
        return Err(Error::Degenerate(format!(
            "every polarity example is `{}`; refusing to train a constant classifier",
            only.as_str()
        )));
    }
    let row_weights: Vec<f64> = if config.class_weighting {
        let n = ys.len() as f64;
        ys.iter()
            .map(|&y| n / (present as f64 * class_counts[y] as f64))
            .collect()
    } else {
        vec![1.0; ys.len()]
    };
    let xs: Vec<Vec<f64>> = features.iter().map(|f| f.vector.clone()).collect();
    let classifier = match config.classifier {
        ClassifierKind::Boosted => Classifier::Boosted(Booster::fit(&xs, &ys, &row_weights, N_CLASSES, &config.booster)),
        ClassifierKind::Linear => Classifier::Linear(LinearModel::fit(&xs, &ys, &row_weights, N_CLASSES, &config.linear)),
    };
    let model = PolarityModel {
        labels: Polarity::LABELS.to_vec(),
        n_features: dim,
        config: config.clone(),
        classifier,
    };
    let mut correct = 0usize;
    for (f, &y) in features.iter().zip(&ys) {
        if predict_polarity(&model, f)?.0.index() == y {
            correct += 1;
        }
    }
    let report = TrainingReport {
        class_counts,
        training_accuracy: correct as f64 / ys.len() as f64,
    };
    Ok((model, report))
}

/// Returns the argmax label and the full distribution in `Polarity::LABELS`
/// order. Ties go to the earlier label.
pub fn predict_polarity(model: &PolarityModel, features: &PairFeatures) -> Result<(Polarity, Vec<f64>)> {
    if features.len() != model.n_features {
        return Err(Error::DimensionMismatch {
            expected: model.n_features,
            actual: features.len(),
        });
    }
    let dist = match &model.classifier {
        Classifier::Boosted(b) => b.predict_proba(&features.vector),
        Classifier::Linear(l) => l.predict_proba(&features.vector),
    };
    let best = (1..dist.len()).fold(0, |a, k| if dist[k] > dist[a] { k } else { a });
    Ok((model.labels[best], dist))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pooled_blocks_and_extras() {
        let v = vec![vec![1.0, 2.0], vec![3.0, 4.0], vec![3.0, 4.0], vec![0.0, 0.0]];
        let f = featurize_pair(&v, Interval::new(0, 0), Interval::new(1, 2), 0.75).unwrap();
        assert_eq!(f.len(), PairFeatures::dim_for(2));
        assert_eq!(&f.vector[0..2], &[1.0, 2.0]);
        assert_eq!(&f.vector[2..4], &[3.0, 4.0]);
        assert_eq!(&f.vector[4..6], &[7.0 / 4.0, 10.0 / 4.0]);
        assert_eq!(&f.vector[6..], &[0.0, 1.0, 2.0, 0.75]);
        assert!(featurize_pair(&v, Interval::new(0, 4), Interval::new(1, 1), 0.5).is_err());
    }

    #[test]
    fn single_class_is_refused() {
        let f = vec![PairFeatures { vector: vec![0.0, 1.0] }; 3];
        let err = train_polarity(&f, &[Polarity::Negative; 3], &PolarityConfig::default()).unwrap_err();
        assert!(matches!(err, Error::Degenerate(_)));
        assert!(train_polarity(&[], &[], &PolarityConfig::default()).is_err());
    }

    #[test]
    fn zero_linear_model_ties_to_positive() {
        let model = PolarityModel {
            labels: Polarity::LABELS.to_vec(),
            n_features: 3,
            config: PolarityConfig::default(),
            classifier: Classifier::Linear(LinearModel::zeros(3, N_CLASSES)),
        };
        let (label, dist) = predict_polarity(&model, &PairFeatures { vector: vec![1.0, 2.0, 3.0] }).unwrap();
        assert_eq!(label, Polarity::Positive);
        assert!(dist.iter().all(|p| (p - 1.0 / 3.0).abs() < 1e-15));
        assert!(predict_polarity(&model, &PairFeatures { vector: vec![1.0] }).is_err());
    }

    #[test]
    fn softmax_is_stable() {
        let p = softmax(&[1000.0, 1000.0, -1000.0]);
        assert!((p[0] - 0.5).abs() < 1e-12 && p[2] < 1e-300);
    }
}
