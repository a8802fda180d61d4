use aste_core::corpus::Polarity;
use aste_core::polarity::{
    featurize_pair, predict_polarity, softmax, train_polarity, ClassifierKind, EmbeddingBackend, EmbeddingStore,
    HashedEmbedding, PairFeatures, PolarityConfig, PAIR_EXTRAS,
};
use aste_core::spanex::Interval;
use aste_core::textnorm::TextProcessor;
use aste_core::Error;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Gaussian-ish blobs around one centre per label.
fn blobs(counts: &[(Polarity, usize)], spread: f64, seed: u64) -> (Vec<PairFeatures>, Vec<Polarity>) {
    let centres = [[2.0, 0.0, 0.0, 1.0], [-2.0, 0.0, 1.0, 0.0], [0.0, 2.5, -1.0, 0.0]];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for &(label, n) in counts {
        for _ in 0..n {
            let c = centres[label.index()];
            let vector = c.iter().map(|v| v + spread * (rng.gen::<f64>() - 0.5)).collect();
            xs.push(PairFeatures { vector });
            ys.push(label);
        }
    }
    (xs, ys)
}

fn accuracy(model: &aste_core::polarity::PolarityModel, xs: &[PairFeatures], ys: &[Polarity]) -> f64 {
    let hits = xs
        .iter()
        .zip(ys)
        .filter(|(x, &y)| predict_polarity(model, x).unwrap().0 == y)
        .count();
    hits as f64 / xs.len() as f64
}

fn config(kind: ClassifierKind) -> PolarityConfig {
    let mut config = PolarityConfig {
        classifier: kind,
        ..PolarityConfig::default()
    };
    config.booster.trees = 40;
    config
}

#[test]
fn separable_classes_are_learned() {
    let counts = [(Polarity::Positive, 70), (Polarity::Negative, 70), (Polarity::Neutral, 60)];
    let (xs, ys) = blobs(&counts, 1.0, 1);
    let (test_x, test_y) = blobs(&counts, 1.0, 2);
    for kind in [ClassifierKind::Boosted, ClassifierKind::Linear] {
        let (model, report) = train_polarity(&xs, &ys, &config(kind)).unwrap();
        assert_eq!(report.class_counts, [70, 70, 60]);
        let acc = accuracy(&model, &test_x, &test_y);
        assert!(acc >= 0.99, "{kind:?}: {acc}");
    }
}

#[test]
fn class_weighting_recovers_the_minority() {
    let (xs, ys) = blobs(&[(Polarity::Positive, 180), (Polarity::Negative, 20)], 4.5, 3);
    let (test_x, test_y) = blobs(&[(Polarity::Negative, 200)], 4.5, 4);
    let (model, _) = train_polarity(&xs, &ys, &config(ClassifierKind::Boosted)).unwrap();
    let recall = accuracy(&model, &test_x, &test_y);
    assert!(recall >= 0.8, "minority recall {recall}");
}

#[test]
fn training_is_deterministic() {
    let (xs, ys) = blobs(&[(Polarity::Positive, 50), (Polarity::Negative, 50)], 3.0, 5);
    for kind in [ClassifierKind::Boosted, ClassifierKind::Linear] {
        let a = train_polarity(&xs, &ys, &config(kind)).unwrap().0;
        let b = train_polarity(&xs, &ys, &config(kind)).unwrap().0;
        assert_eq!(a, b);
    }
}

#[test]
fn single_class_is_degenerate() {
    let (xs, ys) = blobs(&[(Polarity::Positive, 30)], 1.0, 6);
    assert!(matches!(
        train_polarity(&xs, &ys, &PolarityConfig::default()),
        Err(Error::Degenerate(_))
    ));
    assert!(matches!(
        train_polarity(&[], &[], &PolarityConfig::default()),
        Err(Error::Degenerate(_))
    ));
}

#[test]
fn probabilities_sum_to_one() {
    let (xs, ys) = blobs(&[(Polarity::Positive, 40), (Polarity::Negative, 40), (Polarity::Neutral, 40)], 2.0, 7);
    let (model, _) = train_polarity(&xs, &ys, &config(ClassifierKind::Boosted)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..1000 {
        let probe = PairFeatures {
            vector: (0..4).map(|_| rng.gen_range(-10.0..10.0)).collect(),
        };
        let (label, dist) = predict_polarity(&model, &probe).unwrap();
        assert_eq!(dist.len(), 3);
        assert!((dist.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(dist.iter().all(|p| (0.0..=1.0).contains(p)));
        let best = dist.iter().cloned().fold(f64::MIN, f64::max);
        assert_eq!(dist[label.index()], best);
    }
    let wrong = PairFeatures { vector: vec![0.0; 5] };
    assert!(predict_polarity(&model, &wrong).is_err());
}

#[test]
fn store_round_trips() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut store = EmbeddingStore::new(8);
    let mut originals = Vec::new();
    for i in 0..20 {
        let rows: Vec<Vec<f64>> = (0..rng.gen_range(1..6))
            .map(|_| (0..8).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        store.insert(format!("r{i}"), &rows).unwrap();
        originals.push(rows);
    }
    let mut buf = Vec::new();
    store.write(&mut buf).unwrap();
    let back = EmbeddingStore::read(buf.as_slice()).unwrap();
    assert_eq!(back, store);
    for (i, rows) in originals.iter().enumerate() {
        let got = back.get(&format!("r{i}")).unwrap();
        for (g, o) in got.iter().flatten().zip(rows.iter().flatten()) {
            assert!((g - o).abs() < 1e-6);
        }
    }
    assert!(store.insert("bad", &[vec![0.0; 3]]).is_err());
}

#[test]
fn store_rejects_token_count_drift() {
    let text = "{\"format\":\"aste-embeddings\",\"version\":1,\"dim\":2}\n{\"id\":\"r\",\"tokens\":2,\"vectors\":[[0.0,1.0]]}\n";
    assert!(EmbeddingStore::read(text.as_bytes()).is_err());
}

#[test]
fn hashed_backend_is_deterministic_and_unit_length() {
    let backend = HashedEmbedding::new(32, 42).unwrap();
    let text = TextProcessor::default().process("ব্যাটারি ব্যাকআপ ভালো");
    let a = backend.embed("r", &text).unwrap();
    assert_eq!(a, backend.embed("r", &text).unwrap());
    assert_eq!(a.len(), 3);
    for row in &a {
        let norm: f64 = row.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-9);
    }
}

proptest! {
    #[test]
    fn pooled_blocks_are_span_means(
        rows in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 3), 1..10),
        a in 0usize..10, a_len in 0usize..3, o in 0usize..10, o_len in 0usize..3,
    ) {
        let n = rows.len();
        let aspect = Interval::new(a % n, (a % n + a_len).min(n - 1));
        let opinion = Interval::new(o % n, (o % n + o_len).min(n - 1));
        let f = featurize_pair(&rows, aspect, opinion, 0.5).unwrap();
        prop_assert_eq!(f.len(), PairFeatures::dim_for(3));
        let mean = |first: usize, last: usize, k: usize| {
            rows[first..=last].iter().map(|r| r[k]).sum::<f64>() / (last - first + 1) as f64
        };
        for k in 0..3 {
            prop_assert!((f.vector[k] - mean(aspect.first, aspect.last, k)).abs() < 1e-9);
            prop_assert!((f.vector[3 + k] - mean(opinion.first, opinion.last, k)).abs() < 1e-9);
            prop_assert!((f.vector[6 + k] - mean(0, n - 1, k)).abs() < 1e-9);
        }
        let extras = &f.vector[9..];
        prop_assert_eq!(extras.len(), PAIR_EXTRAS);
        prop_assert_eq!(extras[0], aspect.gap(&opinion) as f64);
        prop_assert_eq!(extras[3], 0.5);
    }

    #[test]
    fn softmax_is_a_distribution(m in prop::collection::vec(-500.0f64..500.0, 1..6)) {
        let p = softmax(&m);
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        prop_assert!(p.iter().all(|x| x.is_finite() && *x >= 0.0));
    }
}

#[test]
fn out_of_range_spans_are_rejected() {
    let rows = vec![vec![1.0, 2.0]; 3];
    assert!(featurize_pair(&rows, Interval::new(0, 3), Interval::new(1, 1), 0.5).is_err());
}
